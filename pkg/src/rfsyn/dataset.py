"""Sampling, evaluation, and persistence of labeled passive datasets.

The on-disk format is plain text, CSV-compatible: one metadata line
(``# rfsyn-dataset schema=1 kind=... seed=... [f0=...]``), one column-name
header, then one row per geometry. Floats are written with ``repr`` so a
round trip is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import em_oracle as em
from .errors import InfeasibleRanges, InvalidGeometry, ParseError, UnsupportedSchema
from .tech import TechParams

SCHEMA = 1

_COLUMNS = {
    "inductor": ("t", "w", "s", "r", "frac_class", "L", "Q_peak", "f_peakQ", "f_SRF"),
    "tline": ("l", "w", "L", "Q_peak", "f_peakQ", "f_SRF"),
    "cpw": ("l", "w", "s", "Z_cpw", "theta_cpw"),
}

DEFAULT_RANGES = {
    "inductor": {"t": (0.25, 5.0), "w": (2.0, 10.0), "s": (2.0, 6.0), "r": (15.0, 80.0)},
    "tline": {"l": (5.0, 400.0), "w": (2.0, 10.0)},
    "cpw": {"l": (10.0, 2000.0), "w": (2.0, 360.0), "s": (2.0, 30.0)},
}


@dataclass
class EmDataset:
    kind: str
    seed: int
    rows: list  # list of (geometry, response) pairs
    f0: float | None = None  # evaluation frequency; used by the cpw kind
    schema_version: int = SCHEMA
    _features: np.ndarray | None = field(default=None, repr=False, compare=False)
    _targets: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __len__(self):
        return len(self.rows)

    def features(self) -> np.ndarray:
        """Geometry parameters as a float matrix, one row per sample."""
        if self._features is None:
            cols = _geom_fields(self.kind)
            self._features = np.array(
                [[getattr(g, c) for c in cols] for g, _ in self.rows])
        return self._features

    def targets(self) -> np.ndarray:
        if self._targets is None:
            cols = _resp_fields(self.kind)
            self._targets = np.array(
                [[getattr(r, c) for c in cols] for _, r in self.rows])
        return self._targets


def _geom_fields(kind):
    return {"inductor": ("t", "w", "s", "r"),
            "tline": ("l", "w"),
            "cpw": ("l", "w", "s")}[kind]


def _resp_fields(kind):
    return {"inductor": ("L", "q_peak", "f_peak_q", "f_srf"),
            "tline": ("L", "q_peak", "f_peak_q", "f_srf"),
            "cpw": ("z0", "theta")}[kind]


def _check_ranges(kind: str, ranges: dict, tech: TechParams) -> dict:
    bounds = {
        "inductor": {"t": ("t_min", "t_max"), "w": ("w_min_um", "w_max_um"),
                     "s": ("s_min_um", "s_max_um"), "r": ("r_min_um", "r_max_um")},
        "tline": {"l": ("l_min_um", "l_max_um"), "w": ("w_min_um", "w_max_um")},
        "cpw": {"l": ("l_min_um", "l_max_um"), "w": ("w_min_um", "w_max_um"),
                "s": ("s_min_um", "s_max_um")},
    }[kind]
    section = getattr(tech, kind)
    out = {}
    for dim, (lo_key, hi_key) in bounds.items():
        lo, hi = ranges.get(dim, (section[lo_key], section[hi_key]))
        lo = max(lo, section[lo_key])
        hi = min(hi, section[hi_key])
        if lo > hi:
            raise InfeasibleRanges(f"{kind}.{dim}: empty range [{lo}, {hi}]")
        out[dim] = (float(lo), float(hi))
    return out


def _lhs(rng: np.random.Generator, n: int, lo: float, hi: float) -> np.ndarray:
    """Stratified grid-plus-jitter sample: one point per equal-width slice."""
    slots = rng.permutation(n)
    return lo + (slots + rng.uniform(size=n)) / n * (hi - lo)


def sample_geometries(kind: str, ranges: dict | None, n: int, seed: int,
                      tech: TechParams) -> list:
    """Deterministic stratified sample of n legal geometries.

    Inductor samples are stratified over the four fractional-turn classes
    (counts within +-1 of n/4); continuous dimensions use a latin-hypercube
    grid with uniform jitter.
    """
    if n < 1:
        raise InfeasibleRanges("n must be >= 1")
    rng = np.random.default_rng(seed)
    ranges = _check_ranges(kind, ranges or {}, tech)

    if kind == "inductor":
        t_lo, t_hi = ranges["t"]
        geoms = []
        base, extra = divmod(n, 4)
        for ci, frac in enumerate((0.25, 0.5, 0.75, 1.0)):
            m = base + (1 if ci < extra else 0)
            if m == 0:
                continue
            # legal integer parts for this class: t = k + frac within [t_lo, t_hi]
            k_lo = math.ceil(t_lo - frac - 1e-12)
            k_hi = math.floor(t_hi - frac + 1e-12)
            if frac == 1.0:
                k_lo = max(k_lo, 0)  # 1T needs at least one full turn
            else:
                k_lo = max(k_lo, 0)
            if k_lo > k_hi:
                raise InfeasibleRanges(
                    f"no legal turn count for class {em.FRAC_CLASSES[ci]}")
            ks = rng.integers(k_lo, k_hi + 1, size=m)
            ws = _lhs(rng, m, *ranges["w"])
            ss = _lhs(rng, m, *ranges["s"])
            rs = _lhs(rng, m, *ranges["r"])
            geoms.extend(
                em.InductorGeometry(t=float(k) + frac, w=float(w), s=float(s),
                                    r=float(r))
                for k, w, s, r in zip(ks, ws, ss, rs))
        return geoms

    if kind == "tline":
        ls = _lhs(rng, n, *ranges["l"])
        ws = _lhs(rng, n, *ranges["w"])
        return [em.TlineGeometry(l=float(l), w=float(w)) for l, w in zip(ls, ws)]

    if kind == "cpw":
        ls = _lhs(rng, n, *ranges["l"])
        ws = _lhs(rng, n, *ranges["w"])
        ss = _lhs(rng, n, *ranges["s"])
        return [em.CpwGeometry(l=float(l), w=float(w), s=float(s))
                for l, w, s in zip(ls, ws, ss)]

    raise ValueError(f"unknown kind {kind!r}")


def generate_dataset(geoms: list, tech: TechParams, f0: float | None = None,
                     seed: int = 0) -> EmDataset:
    """Evaluate every geometry through the EM oracle; order-independent content."""
    if not geoms:
        raise InfeasibleRanges("empty geometry list")
    first = geoms[0]
    if isinstance(first, em.InductorGeometry):
        kind, evaluate = "inductor", lambda g: em.inductor_em(g, tech)
    elif isinstance(first, em.TlineGeometry):
        kind, evaluate = "tline", lambda g: em.tline_em(g, tech)
    elif isinstance(first, em.CpwGeometry):
        if f0 is None:
            raise InvalidGeometry("cpw dataset requires an evaluation frequency f0")
        kind, evaluate = "cpw", lambda g: em.cpw_em(g, f0, tech)
    else:
        raise ValueError(f"unknown geometry type {type(first).__name__}")

    rows = []
    for i, geom in enumerate(geoms):
        try:
            rows.append((geom, evaluate(geom)))
        except InvalidGeometry as exc:
            raise InvalidGeometry(f"row {i}: {exc}") from exc
    return EmDataset(kind=kind, seed=seed, rows=rows, f0=f0)


def save(dataset: EmDataset, path) -> None:
    cols = _COLUMNS[dataset.kind]
    meta = f"# rfsyn-dataset schema={dataset.schema_version} " \
           f"kind={dataset.kind} seed={dataset.seed}"
    if dataset.f0 is not None:
        meta += f" f0={dataset.f0!r}"
    lines = [meta, ",".join(cols)]
    gf, rf = _geom_fields(dataset.kind), _resp_fields(dataset.kind)
    for geom, resp in dataset.rows:
        cells = [repr(getattr(geom, c)) for c in gf]
        if dataset.kind == "inductor":
            cells.append(geom.frac_class)
        cells += [repr(getattr(resp, c)) for c in rf]
        lines.append(",".join(cells))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load(path) -> EmDataset:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("# rfsyn-dataset"):
        raise ParseError("missing dataset metadata line", line=1)
    meta = dict(tok.split("=", 1) for tok in lines[0].split()[2:])
    schema = int(meta.get("schema", -1))
    if schema != SCHEMA:
        raise UnsupportedSchema(f"dataset schema {schema}, expected {SCHEMA}")
    kind = meta.get("kind")
    if kind not in _COLUMNS:
        raise ParseError(f"unknown dataset kind {kind!r}", line=1)
    if len(lines) < 2 or lines[1] != ",".join(_COLUMNS[kind]):
        raise ParseError(f"bad column header for kind {kind!r}", line=2)

    f0 = float(meta["f0"]) if "f0" in meta else None
    n_cols = len(_COLUMNS[kind])
    geom_cls = {"inductor": em.InductorGeometry, "tline": em.TlineGeometry,
                "cpw": em.CpwGeometry}[kind]
    resp_cls = {"inductor": em.EmResponse, "tline": em.EmResponse,
                "cpw": em.CpwResponse}[kind]
    gf, rf = _geom_fields(kind), _resp_fields(kind)

    rows = []
    for lineno, raw in enumerate(lines[2:], start=3):
        if not raw.strip():
            continue
        cells = raw.split(",")
        if len(cells) != n_cols:
            raise ParseError(
                f"expected {n_cols} columns, got {len(cells)}", line=lineno)
        try:
            geom = geom_cls(**{c: float(cells[i]) for i, c in enumerate(gf)})
            off = len(gf) + (1 if kind == "inductor" else 0)
            resp = resp_cls(**{c: float(cells[off + i]) for i, c in enumerate(rf)})
        except (ValueError, InvalidGeometry) as exc:
            raise ParseError(str(exc), line=lineno) from exc
        if kind == "inductor" and geom.frac_class != cells[4]:
            raise ParseError(
                f"frac_class {cells[4]!r} inconsistent with t={geom.t}", line=lineno)
        rows.append((geom, resp))
    if not rows:
        raise ParseError("dataset has no rows", line=3)
    return EmDataset(kind=kind, seed=int(meta.get("seed", 0)), rows=rows, f0=f0)
