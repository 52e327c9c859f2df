"""Small-signal frequency-domain network solver.

Modified nodal analysis over complex admittances: R, L, C, voltage-
controlled current sources, and lossless transmission-line sections (whose
electrical length scales linearly with frequency). Two-port S-parameters
are computed with both ports terminated in the reference impedance and the
driven port excited through its termination, so ideal throughs and
series-only fixtures stay non-singular.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SingularNetwork

GROUND = "0"


@dataclass(frozen=True)
class Resistor:
    n1: str
    n2: str
    r: float

    def __post_init__(self):
        if self.r <= 0.0:
            raise ValueError("resistance must be positive; omit shorts")


@dataclass(frozen=True)
class Capacitor:
    n1: str
    n2: str
    c: float


@dataclass(frozen=True)
class Inductor:
    n1: str
    n2: str
    l: float

    def __post_init__(self):
        if self.l <= 0.0:
            raise ValueError("inductance must be positive")


@dataclass(frozen=True)
class Vccs:
    """Current gm * (V(cp) - V(cq)) flowing from node p to node q."""

    p: str
    q: str
    cp: str
    cq: str
    gm: float


@dataclass(frozen=True)
class Tank:
    """One-port passive equivalent: series R(f) + L from n1 to n2 with the
    parasitic capacitance in parallel across the branch."""

    n1: str
    n2: str
    l: float
    r_dc: float
    c_par: float
    f_skin: float

    def r_at(self, f: float) -> float:
        return self.r_dc * max(1.0, math.sqrt(f / self.f_skin))


@dataclass(frozen=True)
class Tline:
    """Lossless line: impedance z0, electrical length theta_ref at f_ref."""

    n1: str
    n2: str
    z0: float
    theta_ref: float
    f_ref: float

    def theta(self, f: float) -> float:
        return self.theta_ref * f / self.f_ref


@dataclass(frozen=True)
class Port:
    number: int
    node: str
    z0: float = 50.0


@dataclass
class Network:
    """Element bag plus ordered port list; nodes are inferred."""

    elements: list = field(default_factory=list)
    ports: list = field(default_factory=list)

    def add(self, *elems):
        self.elements.extend(elems)

    def node_names(self) -> list:
        names = set()
        for e in self.elements:
            for attr in ("n1", "n2", "p", "q", "cp", "cq"):
                n = getattr(e, attr, None)
                if n is not None and n != GROUND:
                    names.add(n)
        for p in self.ports:
            if p.node != GROUND:
                names.add(p.node)
        return sorted(names)


def _assemble(net: Network, f: float, index: dict) -> np.ndarray:
    n = len(index)
    y = np.zeros((n, n), dtype=complex)
    w = 2.0 * math.pi * f

    def stamp(a, b, adm):
        ia = index.get(a, -1)
        ib = index.get(b, -1)
        if ia >= 0:
            y[ia, ia] += adm
        if ib >= 0:
            y[ib, ib] += adm
        if ia >= 0 and ib >= 0:
            y[ia, ib] -= adm
            y[ib, ia] -= adm

    for e in net.elements:
        if isinstance(e, Resistor):
            stamp(e.n1, e.n2, 1.0 / e.r)
        elif isinstance(e, Capacitor):
            stamp(e.n1, e.n2, 1j * w * e.c)
        elif isinstance(e, Inductor):
            stamp(e.n1, e.n2, 1.0 / (1j * w * e.l))
        elif isinstance(e, Tank):
            z = complex(e.r_at(f), w * e.l)
            stamp(e.n1, e.n2, 1.0 / z + 1j * w * e.c_par)
        elif isinstance(e, Tline):
            th = e.theta(f)
            s = cmath.sin(th)
            if abs(s) < 1e-12:
                raise SingularNetwork(f)
            y11 = cmath.cos(th) / (1j * e.z0 * s)
            y12 = -1.0 / (1j * e.z0 * s)
            # two-port pi stamp: diagonal y11, off-diagonal y12
            i1 = index.get(e.n1, -1)
            i2 = index.get(e.n2, -1)
            if i1 >= 0:
                y[i1, i1] += y11
            if i2 >= 0:
                y[i2, i2] += y11
            if i1 >= 0 and i2 >= 0:
                y[i1, i2] += y12
                y[i2, i1] += y12
        elif isinstance(e, Vccs):
            ip = index.get(e.p, -1)
            iq = index.get(e.q, -1)
            icp = index.get(e.cp, -1)
            icq = index.get(e.cq, -1)
            if ip >= 0 and icp >= 0:
                y[ip, icp] += e.gm
            if ip >= 0 and icq >= 0:
                y[ip, icq] -= e.gm
            if iq >= 0 and icp >= 0:
                y[iq, icp] -= e.gm
            if iq >= 0 and icq >= 0:
                y[iq, icq] += e.gm
        else:
            raise TypeError(f"unknown element {type(e).__name__}")
    return y


def solve_point(net: Network, f: float):
    """One frequency point: S matrix plus the worst relative KCL residual
    across excitations."""
    if f <= 0.0:
        raise ValueError("frequency must be positive")
    ports = sorted(net.ports, key=lambda p: p.number)
    index = {name: i for i, name in enumerate(net.node_names())}
    y = _assemble(net, f, index)
    for p in ports:
        y[index[p.node], index[p.node]] += 1.0 / p.z0

    npt = len(ports)
    s = np.zeros((npt, npt), dtype=complex)
    residual = 0.0
    for k, pk in enumerate(ports):
        j = np.zeros(len(index), dtype=complex)
        j[index[pk.node]] = 1.0 / pk.z0          # source V = 1 behind z0
        try:
            v = np.linalg.solve(y, j)
        except np.linalg.LinAlgError:
            raise SingularNetwork(f) from None
        if not np.all(np.isfinite(v)):
            raise SingularNetwork(f)
        r = np.linalg.norm(y @ v - j) / np.linalg.norm(j)
        residual = max(residual, float(r))
        for jj, pj in enumerate(ports):
            s[jj, k] = 2.0 * v[index[pj.node]] - (1.0 if jj == k else 0.0)
    return s, residual


def sparams(net: Network, freqs) -> np.ndarray:
    """S matrices for every frequency: shape (len(freqs), n_ports, n_ports).
    Per-frequency solves are independent; assembly order is deterministic."""
    out = []
    for f in freqs:
        s, _ = solve_point(net, f)
        out.append(s)
    return np.array(out)


def kcl_residual(net: Network, f: float) -> float:
    return solve_point(net, f)[1]


def stability_kappa(s) -> float:
    """Rollett stability factor of a 2x2 S matrix; +inf for a unilateral
    network (S12 * S21 = 0)."""
    s = np.asarray(s, dtype=complex)
    s11, s12, s21, s22 = s[0, 0], s[0, 1], s[1, 0], s[1, 1]
    num = 1.0 - abs(s11) ** 2 - abs(s22) ** 2 + abs(s11 * s22 - s12 * s21) ** 2
    den = 2.0 * abs(s12 * s21)
    if den == 0.0:
        return math.inf
    return num / den


def stability_delta(s) -> float:
    s = np.asarray(s, dtype=complex)
    return abs(s[0, 0] * s[1, 1] - s[0, 1] * s[1, 0])
