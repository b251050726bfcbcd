"""Exception types shared across the simulator."""


class SfcSimError(Exception):
    """Base class for all simulator errors."""


class TopologyError(SfcSimError):
    """Invalid or unsatisfiable topology construction/loading."""


class ConfigError(SfcSimError):
    """Invalid run configuration, catalog, or CLI input."""


class CapacityError(SfcSimError):
    """A ledger charge was rejected for insufficient capacity."""


class OracleBoundsError(SfcSimError):
    """An exhaustive-search request exceeded the instance size bounds."""


class TrainingError(SfcSimError):
    """Value-network training produced non-finite numbers."""


class InvariantViolation(SfcSimError):
    """A runtime invariant was violated mid-simulation."""
