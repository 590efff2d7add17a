"""Exception types shared across the package.

Everything raised on purpose derives from PhysgrdError so callers (and the
CLI) can distinguish our failures from genuine bugs.
"""


class PhysgrdError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(PhysgrdError):
    """A file could not be parsed (malformed row, bad header, bad JSON)."""


class ValidationError(PhysgrdError):
    """Parsed data violates a type invariant (non-finite value, bad width)."""


class UnitError(PhysgrdError):
    """A physical quantity is outside its legal range (e.g. frame rate <= 0)."""


class LengthMismatchError(PhysgrdError):
    """Two paired sequences do not have the same number of frames."""


class NoValidFramesError(PhysgrdError):
    """A metric was asked to average over zero usable frames."""


class SimulationDivergedError(PhysgrdError):
    """The simulated state left the sane range; reports the first bad frame."""

    def __init__(self, frame: int, value: float):
        self.frame = frame
        self.value = value
        super().__init__(
            f"simulation diverged at frame {frame} (|position| = {value:.3g} m)"
        )


class CheckpointError(PhysgrdError):
    """A model checkpoint is unreadable or has an incompatible version."""
