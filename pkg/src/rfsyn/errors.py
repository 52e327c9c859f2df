"""Exception hierarchy shared across the synthesis flow."""


class RfsynError(Exception):
    """Base class for all flow errors."""


class InvalidGeometry(RfsynError):
    """Passive geometry violates technology bounds."""


class OutOfModelRange(RfsynError):
    """Requested evaluation point is outside the model's validity range."""


class InfeasibleRanges(RfsynError):
    """Sampling ranges contain no legal geometry."""


class UnsupportedSchema(RfsynError):
    """Persisted document carries an unknown schema version."""


class ParseError(RfsynError):
    """Malformed persisted document."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class InsufficientData(RfsynError):
    """Not enough rows to train a model."""


class NoFeasibleInductor(RfsynError):
    """No dataset geometry falls in the inductance tolerance band."""


class ExtrapolationError(RfsynError):
    """Inverse query lies outside the dataset hull."""


class NoFeasibleSize(RfsynError):
    """No candidate device multiplier survives clamping."""


class MatchInfeasible(RfsynError):
    """No sizing candidate meets the return-loss target."""

    def __init__(self, message, best_s11_db=None):
        super().__init__(message)
        self.best_s11_db = best_s11_db


class PowerInfeasible(RfsynError):
    """Required output-stage width exceeds the technology maximum."""


class InvalidDevice(RfsynError):
    """Device parameters cannot be realized as a primitive."""


class InfeasibleConstraint(RfsynError):
    """Placement model is structurally infeasible."""


class Infeasible(RfsynError):
    """MILP has no feasible solution."""


class PinBlocked(RfsynError):
    """A net pin lies inside another net's inflated obstacle."""


class Unroutable(RfsynError):
    """A*: no path exists between a pin pair."""

    def __init__(self, net, pair=None):
        super().__init__(f"net {net!r}: no path for pin pair {pair}")
        self.net = net
        self.pair = pair


class PdnDisconnected(RfsynError):
    """PDN mesh splits into islands after exclusion clipping."""

    def __init__(self, net, islands):
        super().__init__(f"{net} mesh disconnected into {len(islands)} islands")
        self.net = net
        self.islands = islands


class ExtractionError(RfsynError):
    """A routed net could not be mapped to parasitic elements."""


class SingularNetwork(RfsynError):
    """MNA system is singular at a frequency point."""

    def __init__(self, freq):
        super().__init__(f"singular network at f = {freq:.6g} Hz")
        self.freq = freq


class SweepCoverage(RfsynError):
    """Frequency sweep does not cover the operating frequency."""
