"""Independent verifiers for the solvers.

Nothing here calls the routines it checks except to obtain the candidate
being checked: the grid search evaluates the SINR-versus-beta curve directly,
the KKT residuals are built from Kronecker-vectorized gradients rather than
the matrix closed forms, transmit power is estimated by simulating the
forwarding loop sample by sample, and water-filling uses the sort-based
closed form.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .channel import NarrowbandScenario


@dataclass(frozen=True)
class OracleReport:
    name: str
    instance_digest: str
    primary_value: float
    oracle_value: float
    abs_err: float
    rel_err: float
    passed: bool
    budget_used: int
    threshold: float = 0.0

    @property
    def pass_(self) -> bool:
        return self.passed

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.name:<28} [{self.instance_digest}] primary={self.primary_value:.10g} "
                f"oracle={self.oracle_value:.10g} abs={self.abs_err:.2e} rel={self.rel_err:.2e} "
                f"tol={self.threshold:.1e} budget={self.budget_used}")


def digest(*arrays) -> str:
    """Short content hash of the arrays defining an instance."""
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(np.asarray(a))
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()[:12]


def scenario_digest(s: NarrowbandScenario) -> str:
    return digest(s.h_p, s.hbar_m, s.hbar_mp, np.array([s.sigma_n2, s.sigma_i2, s.p0, s.phi]))


def make_report(name, inst, primary, oracle, threshold, budget, one_sided=False) -> OracleReport:
    """``one_sided``: only ``oracle > primary`` counts as an error (optimality checks)."""
    primary, oracle = float(primary), float(oracle)
    diff = oracle - primary if one_sided else abs(oracle - primary)
    abs_err = max(diff, 0.0)
    rel_err = abs_err / abs(oracle) if oracle != 0 else (0.0 if abs_err == 0 else math.inf)
    ok = bool(rel_err <= threshold or abs_err <= threshold)
    return OracleReport(name, inst, primary, oracle, abs_err, rel_err, ok, int(budget), threshold)


# ---------------------------------------------------------------------------
# single user

def _single_constants(s: NarrowbandScenario):
    h2 = float(np.sum(np.abs(s.h_p[0]) ** 2))
    g2 = float(np.sum(np.abs(s.hbar_mp[0]) ** 2))
    m2 = float(np.abs(s.hbar_m[0, 0]) ** 2)
    a = s.p0 * h2
    b = h2 * (g2 + s.sigma_i2 + s.sigma_n2)
    c = 2.0 * math.sqrt(m2 * h2 * g2)
    d = m2 + s.sigma_n2
    return a, b, c, d


def f0(a, b, c, d, beta):
    nu = 0.5 * c * np.asarray(beta, dtype=float)
    return (a - b * nu * nu) / (b * nu * nu - c * nu + d)


def grid_search_beta(s_or_consts, points: int = 100_000, chunk: int = 1 << 20):
    """Best ``(beta, sinr)`` on a uniform grid over the feasible beta interval.

    Accepts a single-user scenario or an ``(a, b, c, d)`` tuple.
    """
    if points < 1000:
        raise ValueError("use at least 10^3 grid points")
    if isinstance(s_or_consts, NarrowbandScenario):
        a, b, c, d = _single_constants(s_or_consts)
    else:
        a, b, c, d = (float(v) for v in s_or_consts)
    hi = 2.0 * math.sqrt(a / b) / c if c > 0 else 2.0 * a / (b * (a + d))
    best_b, best_f = 0.0, -math.inf
    for start in range(0, points, chunk):
        idx = np.arange(start, min(points, start + chunk))
        beta = hi * idx / (points - 1)
        f = f0(a, b, c, d, beta)
        i = int(np.argmax(f))
        if f[i] > best_f:
            best_b, best_f = float(beta[i]), float(f[i])
    return best_b, best_f


def stationarity_quadratic(a, b, c, d, nu):
    """``b c nu^2 - 2 b (a + d) nu + a c``; its smaller root is the optimal ``nu``."""
    return b * c * nu * nu - 2.0 * b * (a + d) * nu + a * c


def noiseless_constants(s: NarrowbandScenario):
    """``(a, b, c, d)`` with thermal noise and residual self-interference set to zero."""
    h2 = float(np.sum(np.abs(s.h_p[0]) ** 2))
    g2 = float(np.sum(np.abs(s.hbar_mp[0]) ** 2))
    m2 = float(np.abs(s.hbar_m[0, 0]) ** 2)
    return s.p0 * h2, h2 * g2, 2.0 * math.sqrt(m2 * h2 * g2), m2


def root_bracket(consts, beta: float):
    """Values of the stationarity quadratic at both ends of the feasible interval.

    Returns ``(g(0), g(sqrt(a/b)), nu, sqrt(a/b))`` with ``nu = c beta / 2``.
    """
    a, b, c, d = consts
    upper = math.sqrt(a / b)
    return (stationarity_quadratic(a, b, c, d, 0.0), stationarity_quadratic(a, b, c, d, upper),
            0.5 * c * beta, upper)


# ---------------------------------------------------------------------------
# multi user: KKT residuals in vectorized form

@dataclass(frozen=True)
class KktResiduals:
    fixed_point: float     # max_k |lam_k - gamma_k / (h_k^H A_k^{-1} h_k)| / max(lam_k, 1)
    forwarding: float      # ||dL/dw_f*|| relative to its constant term
    desired: float         # max_k ||dL/dw_k*|| / ||w_k||
    duality_gap: float     # (primal - dual) / primal
    primal: float
    dual: float


def _kron_blocks(s: NarrowbandScenario):
    """Vectorized maps acting on ``w = vec(W_f)`` (column-major)."""
    n_t, n_r = s.n_t, s.n_r
    hb = s.hbar_mp                                      # (K_M, N_r)
    fwd = np.kron(hb.conj(), np.eye(n_t))               # vec(W Hbar^H)
    t = [np.kron(hb.conj(), s.h_p[k].conj()[None, :]) for k in range(s.k_p)]      # vec(h^H W Hbar^H)
    u = [np.kron(np.eye(n_r), s.h_p[k].conj()[None, :]) for k in range(s.k_p)]   # vec(h^H W)
    return fwd, t, u


def _vec(w_f):
    return np.asarray(w_f).reshape(-1, order="F")


def _lagrangian_parts(s, lam, fwd, t, u):
    """Hessian-like matrix M and linear term r with dL/dw* = M w + r."""
    noise = s.sigma_i2 + s.sigma_n2
    n = fwd.shape[1]
    m = fwd.conj().T @ fwd + noise * np.eye(n)
    r = np.zeros(n, dtype=complex)
    rot = np.exp(1j * s.phi)
    for k in range(s.k_p):
        m = m + lam[k] * (t[k].conj().T @ t[k] + noise * u[k].conj().T @ u[k])
        r = r + lam[k] * rot * (t[k].conj().T @ s.hbar_m[k].conj())
    return m, r


def _primal(s, w, w_d, fwd):
    noise = s.sigma_i2 + s.sigma_n2
    return float(np.linalg.norm(fwd @ w) ** 2 + noise * np.linalg.norm(w) ** 2 + np.sum(np.abs(w_d) ** 2))


def _dual(s, lam, fwd, t, u):
    """Dual function: the Lagrangian minimized over all precoders."""
    m, r = _lagrangian_parts(s, lam, fwd, t, u)
    w = -np.linalg.solve(m, r)
    noise = s.sigma_i2 + s.sigma_n2
    val = np.linalg.norm(fwd @ w) ** 2 + noise * np.linalg.norm(w) ** 2
    rot = np.exp(-1j * s.phi)
    for k in range(s.k_p):
        resid = s.hbar_m[k].conj() + rot * (t[k] @ w)
        val += lam[k] * (np.linalg.norm(resid) ** 2 + noise * np.linalg.norm(u[k] @ w) ** 2 + s.sigma_n2)
    return float(np.real(val))


def kkt_residuals(s: NarrowbandScenario, lam, gamma, w_f, w_d) -> KktResiduals:
    """Residuals of the power-minimization KKT system at the given point.

    The constraint of UE ``k`` is written as interference-plus-noise minus
    ``|h_k^H w_k|^2 / gamma_k``; its multiplier is ``lam_k``.
    """
    lam = np.asarray(lam, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    w_d = np.atleast_2d(np.asarray(w_d, dtype=complex))
    h = s.h_p
    n_t = s.n_t
    fwd, t, u = _kron_blocks(s)
    w = _vec(w_f)

    # fixed point
    fp = 0.0
    for k in range(s.k_p):
        a_k = np.eye(n_t, dtype=complex)
        for j in range(s.k_p):
            if j != k:
                a_k += lam[j] * np.outer(h[j], h[j].conj())
        q = float(np.real(h[k].conj() @ np.linalg.solve(a_k, h[k])))
        fp = max(fp, abs(lam[k] - gamma[k] / q) / max(lam[k], 1.0))

    # forwarding stationarity
    m, r = _lagrangian_parts(s, lam, fwd, t, u)
    grad = m @ w + r
    scale = np.linalg.norm(r)
    fwd_res = float(np.linalg.norm(grad) / scale) if scale > 0 else float(np.linalg.norm(grad))

    # desired-signal stationarity
    des = 0.0
    for k in range(s.k_p):
        wk = w_d[k]
        nk = np.linalg.norm(wk)
        if nk == 0:
            continue
        g = wk.copy()
        for j in range(s.k_p):
            if j != k:
                g += lam[j] * h[j] * (h[j].conj() @ wk)
        g -= (lam[k] / gamma[k]) * h[k] * (h[k].conj() @ wk)
        des = max(des, float(np.linalg.norm(g) / nk))

    primal = _primal(s, w, w_d, fwd)
    dual = _dual(s, lam, fwd, t, u)
    gap = (primal - dual) / primal if primal > 0 else abs(primal - dual)
    return KktResiduals(fp, fwd_res, des, float(gap), primal, dual)


# ---------------------------------------------------------------------------
# transmit power by simulating the forwarding loop

@dataclass(frozen=True)
class PoutEstimate:
    estimate: float
    samples: int
    diverged: bool
    trace: np.ndarray      # mean power per simulated step across chains


def signal_level_pout(s: NarrowbandScenario, w_f, w_d, samples: int = 100_000,
                      rng: np.random.Generator | None = None, chains: int = 2000,
                      mu_x: float = 0.0, mu_y: float = 0.0, alpha_pp: float = 1.0,
                      divergence_steps: int = 200) -> PoutEstimate:
    """Monte Carlo transmit power of ``x[t] = W_f y[t - 1] + sum_k w_k s_k[t]``.

    The receive signal after cancellation is ``Hbar^H s_M - E^H x + H^H z_x
    + n + z_y``. Without hardware components (``mu_x = mu_y = 0``) the whole
    residual is the estimation error ``E`` with i.i.d. CN(0, sigma_e2)
    entries. With components, ``E`` carries the rest of ``sigma_e2`` and the
    distortions are drawn at the signal level with a fresh Rayleigh ``H``.
    Independent chains run past a burn-in sized from the loop gain.
    """
    if samples < 10_000:
        raise ValueError("use at least 10^4 samples")
    rng = np.random.default_rng(0) if rng is None else rng
    w_f = np.asarray(w_f, dtype=complex)
    w_d = np.atleast_2d(np.asarray(w_d, dtype=complex))
    n_t, n_r = w_f.shape
    k_m = s.hbar_mp.shape[0]
    se2 = s.sigma_e2
    e_var = se2 - 2.0 * alpha_pp * (mu_x + mu_y)
    if e_var < 0:
        raise ValueError("distortion terms exceed sigma_e2")
    loop = se2 * float(np.sum(np.abs(w_f) ** 2))
    hb_h = s.hbar_mp.conj().T                            # Hbar^H, (N_r, K_M)

    def cn(shape, var):
        z = rng.standard_normal(shape + (2,))
        return math.sqrt(var / 2.0) * (z[..., 0] + 1j * z[..., 1])

    def step(x):
        c = x.shape[0]
        y = cn((c, k_m), 1.0) @ hb_h.T + cn((c, n_r), s.sigma_n2)
        e = cn((c, n_t, n_r), e_var)
        y = y - np.einsum("cij,ci->cj", e.conj(), x)
        if mu_x > 0 or mu_y > 0:
            hpp = cn((c, n_t, n_r), alpha_pp)
            zx = cn((c, n_t), 1.0) * np.sqrt(mu_x) * np.abs(x)
            si = np.einsum("cij,ci->cj", hpp.conj(), x + zx)
            zy = cn((c, n_r), 1.0) * np.sqrt(mu_y) * np.abs(si)
            # the cancelled part of H^H x is folded into E, leaving the distortion terms
            y = y + np.einsum("cij,ci->cj", hpp.conj(), zx) + zy
        return y @ w_f.T + cn((c, w_d.shape[0]), 1.0) @ w_d

    x = np.zeros((chains, n_t), dtype=complex)
    trace = []
    if loop >= 1.0:
        for _ in range(divergence_steps):
            x = step(x)
            p = float(np.mean(np.sum(np.abs(x) ** 2, axis=1)))
            trace.append(p)
            if not math.isfinite(p) or p > 1e30:
                break
        return PoutEstimate(math.inf, chains * len(trace), True, np.array(trace))

    burn = 10 if loop <= 0 else max(10, int(math.ceil(math.log(1e-4) / math.log(loop))) + 1)
    n_steps = int(math.ceil(samples / chains))
    acc = 0.0
    for i in range(burn + n_steps):
        x = step(x)
        p = float(np.mean(np.sum(np.abs(x) ** 2, axis=1)))
        trace.append(p)
        if i >= burn:
            acc += p
    return PoutEstimate(acc / n_steps, chains * n_steps, False, np.array(trace))


def closed_form_pout(s: NarrowbandScenario, w_f, w_d) -> float:
    """Transmit power from the fixed-point power balance (reference for the simulation)."""
    w_f = np.asarray(w_f, dtype=complex)
    tr = float(np.sum(np.abs(w_f) ** 2))
    num = (np.linalg.norm(w_f @ s.hbar_mp.conj().T) ** 2 + s.sigma_n2 * tr
           + float(np.sum(np.abs(np.asarray(w_d)) ** 2)))
    return float(num / (1.0 - s.sigma_e2 * tr))


# ---------------------------------------------------------------------------
# generic numerics

def finite_diff_gradient(fun, x, step: float = 1e-6, coords=None):
    """Central-difference partial derivatives of ``fun`` at ``x``.

    ``coords`` selects coordinates (all by default). Returns ``(coords, grad)``.
    """
    x = np.asarray(x, dtype=float)
    coords = np.arange(x.size) if coords is None else np.asarray(coords, dtype=int)
    out = np.empty(coords.size)
    for i, c in enumerate(coords):
        e = np.zeros_like(x)
        e[c] = step
        out[i] = (fun(x + e) - fun(x - e)) / (2.0 * step)
    return coords, out


def water_filling(slopes, budget: float):
    """Powers maximizing ``sum log2(1 + q_n slope_n)`` with ``sum q_n = budget``.

    Sort-based closed form: activate channels in decreasing slope order while
    the common water level stays above the next floor ``1 / slope``.
    """
    slopes = np.asarray(slopes, dtype=float)
    if not budget > 0:
        raise ValueError("budget must be positive")
    if np.any(slopes < 0):
        raise ValueError("slopes must be non-negative")
    order = np.argsort(-slopes)
    sorted_s = slopes[order]
    floors = np.full_like(sorted_s, np.inf)
    floors[sorted_s > 0] = 1.0 / sorted_s[sorted_s > 0]
    level = np.inf
    for m in range(1, len(sorted_s) + 1):
        if not math.isfinite(floors[m - 1]):
            break
        cand = (budget + floors[:m].sum()) / m
        if m == len(sorted_s) or not (cand > floors[m]):
            level = cand
            break
    q_sorted = np.maximum(level - floors, 0.0)
    q = np.empty_like(q_sorted)
    q[order] = q_sorted
    rate = float(np.sum(np.log2(1.0 + q * slopes)))
    return q, rate
