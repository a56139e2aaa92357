"""Single-user narrowband fICIC: closed-form optimum, HD baseline and asymptotics.

With one MUE stream and one PUE the optimal forwarding precoder is rank one,
``W_f = -conj(hbar_M) e^{j phi} beta h hbar_MP^H``, the desired precoder is
maximum-ratio, and the only free parameter ``beta`` solves a quadratic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import NarrowbandScenario
from .errors import BranchError, NumericalFailure, OscillationError

# relative agreement required between the closed-form SINR and the literal evaluator
CLOSED_FORM_RTOL = 1e-9


@dataclass(frozen=True)
class PropOneConstants:
    """Scalars that parameterize the single-user SINR as a function of beta.

    a = P0 |h|^2, b = |h|^2 (|hbar_MP|^2 + sigma_I2 + sigma_n2),
    c = 2 |hbar_M| |h| |hbar_MP|, d = |hbar_M|^2 + sigma_n2.
    """

    a: float
    b: float
    c: float
    d: float

    def f0(self, beta):
        """SINR as a function of beta at full power (vectorized)."""
        nu = 0.5 * self.c * np.asarray(beta, dtype=float)
        return (self.a - self.b * nu ** 2) / (self.b * nu ** 2 - self.c * nu + self.d)


@dataclass(frozen=True, eq=False)
class FicicSolution:
    """Precoders and the powers/SINRs they realize.

    ``w_d`` has one row per PUE. ``beta`` is set only by the single-user
    solver, ``duals`` only by the multi-user one.
    """

    w_f: np.ndarray
    w_d: np.ndarray
    p_out: float
    sinr: np.ndarray
    beta: float | None = None
    duals: np.ndarray | None = None

    @property
    def loop_gain(self) -> float:
        return float(np.sum(np.abs(self.w_f) ** 2))


# ---------------------------------------------------------------------------
# evaluators

def p_out_single(s: NarrowbandScenario, w_f: np.ndarray, w_d: np.ndarray) -> float:
    """Transmit power including the forwarded noise and residual self-interference."""
    g = s.hbar_mp_vec
    tr = float(np.sum(np.abs(w_f) ** 2))
    loop = s.sigma_e2 * tr
    if loop >= 1.0:
        raise OscillationError(loop)
    num = np.linalg.norm(w_f @ g) ** 2 + s.sigma_n2 * tr + np.linalg.norm(w_d) ** 2
    return float(num / (1.0 - loop))


def sinr_eval_single(s: NarrowbandScenario, sol: FicicSolution) -> float:
    """SINR of the PUE for arbitrary precoders, with the realized transmit power."""
    h, g = s.h, s.hbar_mp_vec
    w_f = np.asarray(sol.w_f)
    w_d = np.asarray(sol.w_d).reshape(-1)
    p_out = p_out_single(s, w_f, w_d)
    sig = abs(np.vdot(h, w_d)) ** 2
    hw = h.conj() @ w_f
    ici = abs(np.conj(s.hbar_mk) + (hw @ g) * np.exp(-1j * s.phi)) ** 2
    fwd = np.linalg.norm(hw) ** 2 * (p_out * s.sigma_e2 + s.sigma_n2)
    return float(sig / (ici + fwd + s.sigma_n2))


# ---------------------------------------------------------------------------
# HD baseline

def hd_sinr(s: NarrowbandScenario) -> float:
    return s.p0 * np.linalg.norm(s.h) ** 2 / (abs(s.hbar_mk) ** 2 + s.sigma_n2)


def hd_optimal(s: NarrowbandScenario) -> FicicSolution:
    """No forwarding, maximum-ratio transmission at full power."""
    h = s.h
    nh = np.linalg.norm(h)
    if nh == 0:
        raise ValueError("PBS->PUE channel is zero")
    w_d = math.sqrt(s.p0) * h / nh
    w_f = np.zeros((s.n_t, s.n_r), dtype=complex)
    return FicicSolution(w_f, w_d[None, :], s.p0, np.array([hd_sinr(s)]))


# ---------------------------------------------------------------------------
# closed-form optimum

def prop1_constants(s: NarrowbandScenario) -> PropOneConstants:
    h2 = float(np.linalg.norm(s.h) ** 2)
    g2 = float(np.linalg.norm(s.hbar_mp_vec) ** 2)
    m2 = abs(s.hbar_mk) ** 2
    return PropOneConstants(
        a=s.p0 * h2,
        b=h2 * (g2 + s.sigma_i2 + s.sigma_n2),
        c=2.0 * math.sqrt(m2 * h2 * g2),
        d=m2 + s.sigma_n2,
    )


def _beta_star_ld(k: PropOneConstants) -> np.longdouble:
    a, b, c, d = k.a, k.b, k.c, k.d
    if not (a > 0 and b > 0 and d > 0 and c >= 0):
        raise ValueError(f"invalid constants {k}")
    la, lb, lc, ld = (np.longdouble(v) for v in (a, b, c, d))
    if c == 0:
        return la / (lb * (la + ld))
    # (a+d)^2 - a c^2/b rewritten so the large terms do not cancel
    disc = (la - ld) ** 2 + la * (4 * ld - lc * lc / lb)
    if disc < 0:
        if disc < -1e-12 * (la + ld) ** 2:
            raise NumericalFailure(f"negative discriminant {float(disc):.3e} for {k}")
        disc = np.longdouble(0)
    return 2 * la / (lb * (la + ld + np.sqrt(disc)))


def beta_star(k: PropOneConstants) -> float:
    """Optimal forwarding scalar.

    The smaller root of the stationarity quadratic is evaluated in the
    rationalized form ``2a / (b (a + d + sqrt(disc)))``, which avoids the
    cancellation of the textbook form and tends to ``a / (b (a + d))`` as
    ``c -> 0`` without any switch-over (a cut-off on small ``c`` costs
    accuracy at high SINR, where SINR errors are ``SINR`` times the relative
    error in beta). Arithmetic is carried out in extended precision.
    """
    return float(_beta_star_ld(k))


def closed_form_sinr(k: PropOneConstants, beta=None) -> float:
    """Optimal SINR ``1 / (1/(b beta) - 1)``; ``beta`` defaults to the optimum."""
    bb = np.longdouble(k.b) * (_beta_star_ld(k) if beta is None else np.longdouble(beta))
    return float(bb / (1 - bb))


def ficic_optimal(s: NarrowbandScenario) -> FicicSolution:
    """Jointly optimal forwarding and desired-signal precoders for one PUE."""
    h, g = s.h, s.hbar_mp_vec
    nh = np.linalg.norm(h)
    if nh == 0:
        raise ValueError("PBS->PUE channel is zero")
    k = prop1_constants(s)
    beta = beta_star(k)
    w_f = -np.conj(s.hbar_mk) * np.exp(1j * s.phi) * beta * np.outer(h, g.conj())
    g2 = np.linalg.norm(g) ** 2
    radicand = s.p0 - 0.25 * (g2 + s.sigma_i2 + s.sigma_n2) * k.c ** 2 * beta ** 2
    if radicand < 0:
        if radicand < -1e-12 * s.p0:
            raise NumericalFailure(f"negative desired-signal power {radicand:.3e}")
        radicand = 0.0
    w_d = math.sqrt(radicand) * h / nh

    sol = FicicSolution(w_f, w_d[None, :], 0.0, np.zeros(1), beta=beta)
    p_out = p_out_single(s, w_f, w_d)
    sinr = sinr_eval_single(s, sol)
    ref = closed_form_sinr(k)
    if abs(sinr - ref) > CLOSED_FORM_RTOL * abs(ref):
        raise NumericalFailure(f"closed-form SINR {ref!r} disagrees with evaluated {sinr!r}")
    return FicicSolution(w_f, w_d[None, :], p_out, np.array([sinr]), beta=beta)


# ---------------------------------------------------------------------------
# asymptotic formulas (validation only)

def _scalars(s: NarrowbandScenario):
    h2 = float(np.linalg.norm(s.h) ** 2)
    g2 = float(np.linalg.norm(s.hbar_mp_vec) ** 2)
    m2 = abs(s.hbar_mk) ** 2
    return s.p0 * h2, m2, g2


def weak_ici_sinr(s: NarrowbandScenario) -> float:
    """High-SNR optimum with perfect cancellation when ICI is weaker than the desired signal."""
    ph2, m2, g2 = _scalars(s)
    if not m2 < ph2:
        raise BranchError("weak-ICI formula needs |hbar_M|^2 < P0 |h|^2")
    return (ph2 - m2) / ((m2 / g2 + 1.0) * s.sigma_n2)


def strong_ici_sinr(s: NarrowbandScenario) -> float:
    """High-SNR optimum with perfect cancellation when ICI dominates the desired signal."""
    ph2, m2, g2 = _scalars(s)
    if not m2 > ph2:
        raise BranchError("strong-ICI formula needs |hbar_M|^2 > P0 |h|^2")
    return ph2 / (m2 - ph2 + (ph2 ** 2 / g2 + m2) / (m2 - ph2) * s.sigma_n2)


def very_strong_ici_sinr(s: NarrowbandScenario) -> float:
    ph2, m2, _ = _scalars(s)
    return ph2 / m2


def fd_hd_gain(s: NarrowbandScenario) -> float:
    """Weak-ICI SINR ratio of the optimum over HD in the high-SNR limit."""
    ph2, m2, g2 = _scalars(s)
    if not m2 < ph2:
        raise BranchError("gain formula needs |hbar_M|^2 < P0 |h|^2")
    return (1.0 - m2 / ph2) / ((1.0 / g2 + 1.0 / m2) * s.sigma_n2)


def forward_power_asymptotic(s: NarrowbandScenario) -> float:
    """Approximate power spent forwarding the listened interference."""
    ph2, m2, g2 = _scalars(s)
    return (s.p0 * ph2 * g2 * m2) / ((m2 + ph2 + s.sigma_n2) ** 2 * (g2 + s.sigma_i2 + s.sigma_n2))


def forward_power(s: NarrowbandScenario, sol: FicicSolution) -> float:
    """Power spent on the forwarding branch of a given solution."""
    w_f = np.asarray(sol.w_f)
    return float(np.linalg.norm(w_f @ s.hbar_mp_vec) ** 2
                 + (s.sigma_i2 + s.sigma_n2) * np.sum(np.abs(w_f) ** 2))


@dataclass(frozen=True)
class AsymptoticReport:
    weak_ici_sinr: float | None
    strong_ici_sinr: float | None
    very_strong_ici_sinr: float
    hd_limit_sinr: float
    fd_hd_gain: float | None
    forward_power: float


def asymptotics(s: NarrowbandScenario) -> AsymptoticReport:
    """All limiting expressions that apply to this instance (``None`` off-branch)."""
    ph2, m2, _ = _scalars(s)
    weak = weak_ici_sinr(s) if m2 < ph2 else None
    strong = strong_ici_sinr(s) if m2 > ph2 else None
    gain = fd_hd_gain(s) if (m2 < ph2 and m2 > 0) else None
    return AsymptoticReport(weak, strong, very_strong_ici_sinr(s) if m2 > 0 else math.inf,
                            hd_sinr(s), gain, forward_power_asymptotic(s))
