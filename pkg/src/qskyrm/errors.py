"""Exception types shared across the library."""


class QskyrmError(Exception):
    """Base class for all library errors."""


class LatticeError(QskyrmError):
    """Invalid lattice geometry or model parameters."""


class DimensionCapError(QskyrmError):
    """Requested Hilbert-space dimension exceeds the configured cap."""


class DegenerateTriangleError(QskyrmError):
    """Solid-angle triangle with antipodal/collinear vertices; charge undefined."""


class VanishingMomentError(QskyrmError):
    """A site's spin expectation is too short to normalize."""

    def __init__(self, site, norm):
        self.site = site
        self.norm = norm
        super().__init__(f"spin moment at site {site} has norm {norm:.3e}, below floor")


class ConvergenceError(QskyrmError):
    """Step-halving failed to reach the requested tolerance."""


class LevelCrossingError(QskyrmError):
    """Instantaneous gap fell below the tracking floor along the path."""


class TruncationError(QskyrmError):
    """Retained spectrum carries too little thermal weight at this beta."""


class ConfigError(QskyrmError):
    """Invalid run configuration; message carries the offending key path."""


class CacheError(QskyrmError):
    """Spectrum cache file is malformed or corrupt."""
