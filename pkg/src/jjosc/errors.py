"""Exception hierarchy shared by all jjosc modules.

A single base class lets the CLI map failures onto exit codes without
inspecting module internals: configuration problems are distinct from
numerical failures, which in turn are distinct from I/O errors.
"""


class JJOscError(Exception):
    """Base class for all jjosc-specific failures."""


class ConfigError(JJOscError):
    """A configuration file or command-line argument could not be parsed."""


class UnlockedError(JJOscError):
    """The phase-locking condition |I_dc| <= Ic |J1| is violated.

    No phase-locked junction solution exists at the requested bias and
    drive amplitude.
    """


class DegenerateError(JJOscError):
    """Drive amplitude below the numeric floor; the perturbative
    impedance (which scales as 1/I1^2) is meaningless there."""


class NoOscillationError(JJOscError):
    """No self-consistent oscillation with positive amplitude and a
    satisfied locking condition exists at this bias."""


class ConvergenceError(JJOscError):
    """An iterative solver or refined quadrature failed to converge
    within its budget; the message carries the residuals."""


class DivergingQError(JJOscError):
    """Total quality factor diverges: the junction gain exactly cancels
    the resonator loss (sustained-oscillation condition)."""


class StepSizeUnderflowError(JJOscError):
    """The adaptive integrator could not proceed (stiffness failure or a
    non-finite state). Carries the simulation time reached."""

    def __init__(self, message: str, t_reached: float = float("nan")):
        super().__init__(message)
        self.t_reached = t_reached


class NoPeakError(JJOscError):
    """The spectrum has no peak at least 10 dB above its median: the
    trace is not oscillating."""


class TooShortError(JJOscError):
    """The trace is shorter than the requested analysis segment."""


class PoorFitError(JJOscError):
    """A least-squares line fit was rejected (reduced chi^2 > 10)."""


class EmptyBandError(JJOscError):
    """The requested integration band does not overlap the spectrum."""


class AliasRiskError(JJOscError):
    """Decimated sample rate is too low for the residual detuning."""


class UnderdeterminedError(JJOscError):
    """Not enough data points to constrain the fit."""


class EmptyInputError(JJOscError):
    """An input sequence that must be non-empty was empty."""


class NonMonotoneFrequenciesError(JJOscError):
    """Frequency anchors must be strictly increasing."""
