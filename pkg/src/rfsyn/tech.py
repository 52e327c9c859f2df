"""Technology file loading and access.

The technology document is a versioned JSON file carrying the metal stack,
device small-signal constants, passive model coefficients, and DRC minima.
The shipped ``generic9m`` file is synthetic: every value is invented but
internally consistent (see ``docs/tech_file.md``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

from .errors import ParseError, UnsupportedSchema

SUPPORTED_SCHEMA = 1

_REQUIRED_SECTIONS = (
    "layers", "routing", "inductor", "tline", "cpw",
    "device", "mos", "resistor", "capacitor", "pad", "pdn",
)

_LAYER_KEYS = (
    "name", "index", "sheet_res_ohm_sq", "c_area_ff_um2",
    "c_fringe_ff_um", "min_width_um", "min_spacing_um",
)


@dataclass(frozen=True)
class Layer:
    name: str
    index: int
    sheet_res_ohm_sq: float
    c_area_ff_um2: float
    c_fringe_ff_um: float
    min_width_um: float
    min_spacing_um: float


@dataclass(frozen=True)
class TechParams:
    """Validated view over a technology document."""

    name: str
    layers: tuple[Layer, ...]
    routing: dict
    inductor: dict
    tline: dict
    cpw: dict
    device: dict
    mos: dict
    resistor: dict
    capacitor: dict
    pad: dict
    pdn: dict
    z0_ohm: float = 50.0
    _by_name: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_by_name", {l.name: l for l in self.layers})

    def layer(self, name: str) -> Layer:
        try:
            return self._by_name[name]
        except KeyError:
            raise ParseError(f"unknown layer {name!r}") from None

    @property
    def top_layer(self) -> Layer:
        return self.layers[-1]

    @property
    def l_min(self) -> float:
        """Inductance floor below which T-lines replace spirals (H)."""
        return float(self.inductor["l_min_henry"])


def _validate(doc: dict) -> None:
    version = doc.get("schema_version")
    if version != SUPPORTED_SCHEMA:
        raise UnsupportedSchema(f"tech schema {version!r}, expected {SUPPORTED_SCHEMA}")
    for section in _REQUIRED_SECTIONS:
        if section not in doc:
            raise ParseError(f"tech file missing section {section!r}")
    for i, layer in enumerate(doc["layers"]):
        for key in _LAYER_KEYS:
            if key not in layer:
                raise ParseError(f"layer {i}: missing key {key!r}")
    indices = [l["index"] for l in doc["layers"]]
    if indices != sorted(indices) or len(set(indices)) != len(indices):
        raise ParseError("layer indices must be strictly increasing")
    dev = doc["device"]
    for key, val in dev.items():
        if isinstance(val, (int, float)) and val <= 0 and key != "cgd_isolation":
            raise ParseError(f"device constant {key!r} must be positive")
    pdn = doc["pdn"]
    if set(pdn["gnd_layers"]) & set(pdn["vdd_layers"]):
        raise ParseError("PDN GND and VDD layer sets must be disjoint")
    if pdn["strap_pitch_um"] <= pdn["strap_width_um"]:
        raise ParseError("PDN strap pitch must exceed strap width")


def from_dict(doc: dict) -> TechParams:
    _validate(doc)
    layers = tuple(Layer(**{k: l[k] for k in _LAYER_KEYS}) for l in doc["layers"])
    return TechParams(
        name=doc.get("name", "unnamed"),
        layers=layers,
        routing=doc["routing"],
        inductor=doc["inductor"],
        tline=doc["tline"],
        cpw=doc["cpw"],
        device=doc["device"],
        mos=doc["mos"],
        resistor=doc["resistor"],
        capacitor=doc["capacitor"],
        pad=doc["pad"],
        pdn=doc["pdn"],
        z0_ohm=float(doc.get("z0_ohm", 50.0)),
    )


def load_tech(path) -> TechParams:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(str(exc)) from exc
    return from_dict(doc)


def default_tech() -> TechParams:
    """The synthetic 9-metal technology shipped with the package."""
    with resources.files("rfsyn.data").joinpath("generic9m.json").open() as fh:
        return from_dict(json.load(fh))
