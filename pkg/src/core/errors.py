"""
Error hierarchy shared by every layer of the framework.

The CLI maps these onto exit codes, so each failure mode gets its own type.
"""

from typing import Any, Dict, Optional


class ConvRlError(Exception):
    """Base class for all framework errors."""


class BlowUpError(ConvRlError):
    """Raised when a PDE state becomes non-finite or exceeds the blow-up threshold."""

    def __init__(self, detail: str, step: Optional[int] = None, time: Optional[float] = None):
        self.detail = detail
        self.step = step
        self.time = time
        where = []
        if step is not None:
            where.append(f"step {step}")
        if time is not None:
            where.append(f"t={time:.4f}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(f"blow-up: {detail}{suffix}")

    def at_step(self, step: int, time: Optional[float] = None) -> "BlowUpError":
        """Returns a copy of the error tagged with the control step it happened in."""
        return BlowUpError(self.detail, step=step, time=time)


class ShapeMismatchError(ConvRlError, ValueError):
    """Raised when grids, arrays or network dimensions do not line up."""


class KernelSupportError(ConvRlError, ValueError):
    """Raised when a kernel support leaves the domain in truncate mode."""


class EmptyBufferError(ConvRlError):
    """Raised when sampling from an empty replay buffer."""


class TrainingDivergedError(ConvRlError):
    """Raised when a DDPG update produces a non-finite loss."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class GeometryMismatchError(ConvRlError):
    """Raised when a policy checkpoint is applied to an incompatible sensor geometry."""

    def __init__(self, trained: Dict[str, Any], requested: Dict[str, Any], reasons: list[str]):
        self.trained = trained
        self.requested = requested
        self.reasons = reasons
        super().__init__("incompatible geometry: " + "; ".join(reasons))

    def render_diff(self) -> str:
        """Human-readable side by side view of both geometries."""
        keys = sorted(set(self.trained) | set(self.requested))
        width = max((len(k) for k in keys), default=0)
        lines = [f"{'field'.ljust(width)}  {'checkpoint':>16}  {'config':>16}"]
        for key in keys:
            left = self.trained.get(key, "-")
            right = self.requested.get(key, "-")
            marker = "" if left == right else "  <--"
            lines.append(f"{key.ljust(width)}  {str(left):>16}  {str(right):>16}{marker}")
        return "\n".join(lines)


class ConfigError(ConvRlError, ValueError):
    """Raised when an experiment config cannot be parsed or validated."""

    def __init__(self, message: str, line: Optional[int] = None, source: str = "<config>"):
        self.line = line
        self.source = source
        location = f"{source}:{line}" if line is not None else source
        super().__init__(f"{location}: {message}")
