"""Exception types raised by the solvers.

Domain violations (bad distances, negative powers, wrong array shapes) raise
plain ``ValueError``. The classes below flag numerical conditions that callers
are expected to handle, e.g. the bisection treats :class:`InfeasibleTarget`
and :class:`NonConvergence` as an infeasible probe.
"""


class FicicError(Exception):
    """Base class for solver-level failures."""


class OscillationError(FicicError):
    """The loop gain sigma_e2 * tr(W^H W) reached 1, so the forwarding loop self-oscillates."""

    def __init__(self, loop_gain: float, subcarrier: int | None = None):
        self.loop_gain = loop_gain
        self.subcarrier = subcarrier
        where = "" if subcarrier is None else f" on subcarrier {subcarrier}"
        super().__init__(f"self-oscillation bound violated{where}: loop gain {loop_gain:.6g} >= 1")


class NumericalFailure(FicicError):
    """A quantity that is non-negative in exact arithmetic came out negative."""


class InfeasibleTarget(FicicError):
    """The SINR targets cannot be met with positive powers."""


class NonConvergence(FicicError):
    """An iteration hit its cap before reaching tolerance."""

    def __init__(self, message: str, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"{message} (residual {residual:.3e} after {iterations} iterations)")


class DegenerateChannel(FicicError):
    """A sampled channel is singular for the requested operation; re-sample."""


class BranchError(ValueError):
    """An asymptotic formula was evaluated outside its interference regime."""


class ConfigError(ValueError):
    """A sweep configuration is malformed; the message names the line and field."""
