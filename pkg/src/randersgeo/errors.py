"""Exception hierarchy for the randersgeo package."""


class RandersGeoError(Exception):
    """Base class for all package errors."""


class FormatError(RandersGeoError):
    """Unsupported or malformed file format."""


class GeometryError(RandersGeoError):
    """Invalid geometric input (non-simple contour, point on contour, ...)."""


class InvalidMetricError(RandersGeoError):
    """Metric violates the compatibility/definiteness requirements."""


class DomainError(RandersGeoError):
    """A point or cell lies outside the computational domain."""


class UnreachableError(RandersGeoError):
    """Front propagation cannot reach the requested target."""


class BacktrackError(RandersGeoError):
    """Geodesic descent stalled before reaching the source."""


class TopologyError(RandersGeoError):
    """A domain does not have the required topology (ring, connected, ...)."""


class WidthError(RandersGeoError):
    """Tubular-domain width outside the supported range."""


class DegenerateRegionError(RandersGeoError):
    """Appearance model needs both an inside and an outside region."""


class SolverError(RandersGeoError):
    """An iterative solver failed to converge."""


class EvolutionError(RandersGeoError):
    """Contour evolution failed; carries a diagnostic payload."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class InitError(RandersGeoError):
    """No admissible (simple) initial contour could be constructed."""
