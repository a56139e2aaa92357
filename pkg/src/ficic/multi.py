"""Multi-user narrowband fICIC via bisection on the sum rate and a dual fixed point.

Each bisection probe fixes per-UE SINR targets ``gamma_k = 2^(alpha_k R) - 1``
and asks for the least transmit power meeting them. That power-minimization
problem is solved through its Lagrange dual:

1. multipliers ``lam`` from the fixed point ``lam_k = gamma_k / (h_k^H A_k^{-1} h_k)``
   with ``A_k = I + sum_{j != k} lam_j h_j h_j^H``;
2. the forwarding precoder in closed form from ``lam``;
3. desired-signal directions ``A_k^{-1} h_k``;
4. their powers from a K_P x K_P linear system that meets every target with equality.

The probe is feasible when the minimum power does not exceed ``P0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .channel import NarrowbandScenario
from .errors import FicicError, InfeasibleTarget, NonConvergence, NumericalFailure, OscillationError
from .single import FicicSolution

FP_TOL = 1e-10
FP_MAX_ITER = 10_000
BISECTION_EPS = 1e-4
MAX_OUTER = 60
STATIONARITY_TOL = 1e-8


@dataclass(frozen=True)
class FairnessSpec:
    """Rate shares ``alpha_k`` (non-negative, summing to one)."""

    alpha: tuple

    def __post_init__(self):
        a = tuple(float(x) for x in self.alpha)
        if not a:
            raise ValueError("fairness needs at least one weight")
        if any(x < 0 or not math.isfinite(x) for x in a):
            raise ValueError(f"fairness weights must be finite and non-negative, got {a}")
        if abs(sum(a) - 1.0) > 1e-12:
            raise ValueError(f"fairness weights must sum to 1, got {sum(a)!r}")
        object.__setattr__(self, "alpha", a)

    @classmethod
    def equal(cls, k_p: int) -> "FairnessSpec":
        w = [1.0 / k_p] * k_p
        w[-1] = 1.0 - sum(w[:-1])
        return cls(tuple(w))

    def as_array(self) -> np.ndarray:
        return np.array(self.alpha)


@dataclass(frozen=True)
class DualState:
    lam: np.ndarray
    iterations: int
    residual: float


@dataclass(frozen=True, eq=False)
class BisectionReport:
    """Outcome of the sum-rate bisection.

    ``r_sum`` is the lower end of the final bracket, the largest sum rate known
    to be feasible; ``solution`` and ``sinr`` belong to that probe. SINRs are
    evaluated with ``P_out = P0`` as in the probe itself.
    """

    r_sum: float
    lower: float
    upper: float
    sinr: np.ndarray
    rates: np.ndarray
    solution: FicicSolution
    objective: float
    outer_iterations: int
    feasible_at_r: list = field(default_factory=list)
    nonconverged: int = 0


# ---------------------------------------------------------------------------
# evaluators

def _loop_gain(s: NarrowbandScenario, w_f: np.ndarray) -> float:
    return s.sigma_e2 * float(np.sum(np.abs(w_f) ** 2))


def p_out_multi(s: NarrowbandScenario, sol: FicicSolution) -> float:
    """Realized transmit power of a precoder set."""
    w_f = np.asarray(sol.w_f)
    w_d = np.atleast_2d(sol.w_d)
    loop = _loop_gain(s, w_f)
    if loop >= 1.0:
        raise OscillationError(loop)
    tr = float(np.sum(np.abs(w_f) ** 2))
    num = (np.linalg.norm(w_f @ s.hbar_mp.conj().T) ** 2 + s.sigma_n2 * tr
           + float(np.sum(np.abs(w_d) ** 2)))
    return float(num / (1.0 - loop))


def _ici_terms(s: NarrowbandScenario, w_f: np.ndarray):
    """Per-UE residual ICI power and forwarded-noise gain ``||h_k^H W_f||^2``."""
    hw = s.h_p.conj() @ w_f                                   # (K_P, N_r): rows h_k^H W
    resid = s.hbar_m.conj() + np.exp(-1j * s.phi) * (hw @ s.hbar_mp.conj().T)
    return np.sum(np.abs(resid) ** 2, axis=1), np.sum(np.abs(hw) ** 2, axis=1)


def sinr_eval_multi(s: NarrowbandScenario, sol: FicicSolution, p_out: float | None = None) -> np.ndarray:
    """Per-UE SINR including intra-cell interference.

    ``p_out`` overrides the transmit power used in the residual
    self-interference term; by default the realized power is used.
    """
    w_f = np.asarray(sol.w_f)
    w_d = np.atleast_2d(sol.w_d)
    if p_out is None:
        p_out = p_out_multi(s, sol)
    elif _loop_gain(s, w_f) >= 1.0:
        raise OscillationError(_loop_gain(s, w_f))
    g = np.abs(s.h_p.conj() @ w_d.T) ** 2                      # g[k, j] = |h_k^H w_j|^2
    sig = np.diag(g).copy()
    intra = g.sum(axis=1) - sig
    ici, fgain = _ici_terms(s, w_f)
    den = intra + ici + fgain * (p_out * s.sigma_e2 + s.sigma_n2) + s.sigma_n2
    return sig / den


# ---------------------------------------------------------------------------
# dual algorithm

def fixed_point_lambdas(h_p, gamma, tol: float = FP_TOL, max_iter: int = FP_MAX_ITER,
                        lam0=None) -> DualState:
    """Dual multipliers of the power-minimization problem (unique fixed point)."""
    h = np.atleast_2d(np.asarray(h_p, dtype=complex))
    gamma = np.asarray(gamma, dtype=float).reshape(-1)
    if gamma.shape[0] != h.shape[0]:
        raise ValueError(f"{gamma.shape[0]} targets for {h.shape[0]} users")
    if np.any(gamma < 0) or not np.all(np.isfinite(gamma)):
        raise ValueError("targets must be finite and non-negative")
    if np.any(np.linalg.norm(h, axis=1) == 0):
        raise ValueError("a PBS->PUE channel is zero")
    lam0 = np.zeros(h.shape[0]) if lam0 is None else np.asarray(lam0, dtype=float)
    try:
        lam, it, residual, ok = _kernels.fixed_point(h, gamma, lam0, tol, max_iter)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(str(exc)) from exc
    if not ok or not np.all(np.isfinite(lam)):
        raise NonConvergence("dual fixed point did not converge", residual, it)
    return DualState(np.asarray(lam, dtype=float), int(it), float(residual))


def _dual_matrix(h_p: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """I + sum_k lam_k h_k h_k^H."""
    return np.eye(h_p.shape[1]) + (h_p.T * lam) @ h_p.conj()


def wf_from_duals(s: NarrowbandScenario, lam, check: bool = True) -> np.ndarray:
    """Forwarding precoder minimizing the Lagrangian for fixed multipliers.

    ``W = -e^{j phi} (I + sum lam_k h_k h_k^H)^{-1} (sum lam_k h_k hbar_Mk^H)
    Hbar (Hbar^H Hbar + (sigma_I2 + sigma_n2) I)^{-1}``.
    """
    lam = np.asarray(lam, dtype=float)
    a = _dual_matrix(s.h_p, lam)
    cross = (s.h_p.T * lam) @ s.hbar_m.conj()                  # N_t x K_M
    noise = s.sigma_i2 + s.sigma_n2
    right = np.linalg.solve(s.hbar_mp.conj().T @ s.hbar_mp + noise * np.eye(s.n_r),
                            s.hbar_mp.conj().T).conj().T       # Hbar (Hbar^H Hbar + sI)^{-1}
    w_f = -np.exp(1j * s.phi) * np.linalg.solve(a, cross) @ right
    if check:
        const = np.exp(1j * s.phi) * cross @ s.hbar_mp
        grad = a @ w_f @ (s.hbar_mp.conj().T @ s.hbar_mp + noise * np.eye(s.n_r)) + const
        scale = np.linalg.norm(const)
        if scale > 0 and np.linalg.norm(grad) > STATIONARITY_TOL * scale:
            raise NumericalFailure(f"forwarding stationarity residual {np.linalg.norm(grad) / scale:.3e}")
    return w_f


def wd_directions(h_p, lam) -> np.ndarray:
    """Unnormalized desired-signal directions, one row per UE."""
    h = np.atleast_2d(np.asarray(h_p, dtype=complex))
    try:
        return _kernels.directions(h, np.asarray(lam, dtype=float))
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(str(exc)) from exc


def ici_floor(s: NarrowbandScenario, w_f: np.ndarray, p_out: float | None = None) -> np.ndarray:
    """Interference-plus-noise seen by each UE apart from intra-cell terms."""
    p_out = s.p0 if p_out is None else p_out
    ici, fgain = _ici_terms(s, w_f)
    return ici + fgain * (p_out * s.sigma_e2 + s.sigma_n2) + s.sigma_n2


def power_allocation(s: NarrowbandScenario, gamma, w_f: np.ndarray, w_tilde: np.ndarray) -> np.ndarray:
    """Powers that meet every SINR target with equality for fixed directions.

    The system ``M p = zeta`` is solved after scaling row k by ``gamma_k``, so
    a zero target simply pins ``p_k = 0``.
    """
    gamma = np.asarray(gamma, dtype=float)
    zeta = ici_floor(s, w_f)
    g = np.abs(s.h_p.conj() @ np.atleast_2d(w_tilde).T) ** 2  # g[k, j] = |h_k^H w~_j|^2
    m = -gamma[:, None] * g
    m[np.diag_indices_from(m)] = np.diag(g)
    rhs = gamma * zeta
    if not np.all(np.isfinite(m)) or np.linalg.cond(m) > 1e14:
        raise InfeasibleTarget("power-allocation system is singular")
    p = np.linalg.solve(m, rhs)
    active = gamma > 0
    if np.any(p[active] <= 0) or not np.all(np.isfinite(p)):
        raise InfeasibleTarget(f"targets need non-positive powers {p}")
    p[~active] = 0.0
    return p


def feasibility_power(s: NarrowbandScenario, gamma, hd: bool = False,
                      tol: float = FP_TOL, max_iter: int = FP_MAX_ITER):
    """Least objective power meeting the targets, and the precoders achieving it.

    The objective counts the forwarded signal, forwarded noise and residual
    self-interference at full power, and the desired-signal power. It is at
    most ``P0`` exactly when the realized transmit power is. With ``hd`` the
    forwarding precoder is frozen at zero.
    """
    gamma = np.asarray(gamma, dtype=float)
    if np.all(gamma == 0):
        w_f = np.zeros((s.n_t, s.n_r), dtype=complex)
        w_d = np.zeros((s.k_p, s.n_t), dtype=complex)
        sol = FicicSolution(w_f, w_d, 0.0, np.zeros(s.k_p), duals=np.zeros(s.k_p))
        return 0.0, sol
    duals = fixed_point_lambdas(s.h_p, gamma, tol, max_iter)
    lam = duals.lam
    w_f = np.zeros((s.n_t, s.n_r), dtype=complex) if hd else wf_from_duals(s, lam)
    if _loop_gain(s, w_f) >= 1.0:
        raise InfeasibleTarget("forwarding precoder violates the oscillation bound")
    w_t = wd_directions(s.h_p, lam)
    p = power_allocation(s, gamma, w_f, w_t)
    w_d = np.sqrt(p)[:, None] * w_t
    objective = forward_objective(s, w_f) + float(np.sum(np.abs(w_d) ** 2))
    sol = _assemble(s, w_f, w_d, lam)
    return objective, sol


def forward_objective(s: NarrowbandScenario, w_f: np.ndarray) -> float:
    """Power of the forwarding branch with self-interference at full power."""
    return float(np.linalg.norm(w_f @ s.hbar_mp.conj().T) ** 2
                 + (s.sigma_i2 + s.sigma_n2) * np.sum(np.abs(w_f) ** 2))


def _assemble(s, w_f, w_d, lam) -> FicicSolution:
    sol = FicicSolution(w_f, w_d, 0.0, np.zeros(s.k_p), duals=lam)
    try:
        p_out = p_out_multi(s, sol)
        sinr = sinr_eval_multi(s, sol, p_out)
    except OscillationError:
        p_out, sinr = math.inf, np.zeros(s.k_p)
    return FicicSolution(w_f, w_d, p_out, sinr, duals=lam)


def rate_upper_bound(s: NarrowbandScenario) -> float:
    return float(np.sum(np.log2(1.0 + s.p0 * np.linalg.norm(s.h_p, axis=1) ** 2 / s.sigma_n2)))


def solve_sum_rate(s: NarrowbandScenario, fairness: FairnessSpec | None = None,
                   eps: float = BISECTION_EPS, hd: bool = False, max_outer: int = MAX_OUTER,
                   tol: float = FP_TOL, max_iter: int = FP_MAX_ITER) -> BisectionReport:
    """Largest fair sum rate whose minimum power fits the budget (bisection)."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps!r}")
    fairness = FairnessSpec.equal(s.k_p) if fairness is None else fairness
    alpha = fairness.as_array()
    if alpha.shape[0] != s.k_p:
        raise ValueError(f"{alpha.shape[0]} fairness weights for {s.k_p} users")
    lo, hi = 0.0, rate_upper_bound(s)
    best_obj, best = feasibility_power(s, np.zeros(s.k_p))
    trace = []
    nonconv = 0
    it = 0
    while hi - lo > eps and it < max_outer:
        it += 1
        r = 0.5 * (lo + hi)
        gamma = np.expm1(alpha * r * math.log(2.0))
        try:
            obj, sol = feasibility_power(s, gamma, hd=hd, tol=tol, max_iter=max_iter)
            ok = obj <= s.p0
        except NonConvergence:
            nonconv += 1
            ok = False
        except (InfeasibleTarget, NumericalFailure):
            ok = False
        trace.append((r, ok))
        if ok:
            lo, best_obj, best = r, obj, sol
        else:
            hi = r
    if hi - lo > eps:
        nonconv += 1
    sinr = sinr_eval_multi(s, best, s.p0) if lo > 0 else np.zeros(s.k_p)
    return BisectionReport(lo, lo, hi, sinr, np.log2(1.0 + sinr), best, best_obj, it, trace, nonconv)


def prop2_predicates(h_p, lam, gamma, slack: float = 1e-10):
    """Two equivalent tests that ``lam`` is dual feasible for targets ``gamma``.

    The first checks positive semidefiniteness of
    ``I + sum_{j != k} lam_j h_j h_j^H - (lam_k / gamma_k) h_k h_k^H`` by its
    smallest eigenvalue; the second the scalar condition
    ``lam_k h_k^H A_k^{-1} h_k <= gamma_k``. Both use the same slack.
    """
    h = np.atleast_2d(np.asarray(h_p, dtype=complex))
    lam = np.asarray(lam, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    n_t = h.shape[1]
    outer = h[:, :, None] * h.conj()[:, None, :]
    total = np.eye(n_t) + np.tensordot(lam, outer, axes=1)
    sd_ok = True
    sc_ok = True
    for k in range(h.shape[0]):
        a_k = total - lam[k] * outer[k]
        if lam[k] == 0:
            ratio = 0.0
        elif gamma[k] == 0:
            ratio = math.inf
        else:
            ratio = lam[k] / gamma[k]
        if math.isinf(ratio):
            sd_ok = sc_ok = False
            continue
        mat = a_k - ratio * outer[k]
        if np.linalg.eigvalsh(0.5 * (mat + mat.conj().T))[0] < -slack:
            sd_ok = False
        q = np.real(np.vdot(h[k], np.linalg.solve(a_k, h[k])))
        if lam[k] * q > gamma[k] + slack:
            sc_ok = False
    return sd_ok, sc_ok


__all__ = [
    "FairnessSpec", "DualState", "BisectionReport", "FicicError",
    "sinr_eval_multi", "p_out_multi", "fixed_point_lambdas", "wf_from_duals",
    "wd_directions", "power_allocation", "feasibility_power", "solve_sum_rate",
    "prop2_predicates", "rate_upper_bound", "forward_objective", "ici_floor",
]
