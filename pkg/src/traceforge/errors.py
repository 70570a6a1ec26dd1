"""Exception types shared across the package."""


class TraceForgeError(Exception):
    """Base class for all package-specific failures."""


class CoverageGap(TraceForgeError):
    """Chart cover leaves part of the boundary (or collar) unweighted."""


class IsolatedNode(TraceForgeError):
    """A grid node has no inside neighbor along some axis."""


class ChartUnresolved(TraceForgeError):
    """Grid too coarse to interpolate or resolve a chart patch."""


class ZeroNorm(TraceForgeError):
    """A catalog function has (numerically) zero W^{1,p} norm."""


class NotTraceZero(TraceForgeError):
    """Operation requires a trace-zero function and the input is not."""


class CollarTooThin(TraceForgeError):
    """Function does not vanish deep enough near the boundary to mollify."""


class ConfigError(TraceForgeError):
    """Experiment configuration is malformed."""
