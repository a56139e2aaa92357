"""Wideband (OFDM) fICIC with an L-tap FIR forwarding precoder.

The forwarding filter is designed in the time domain so that the forwarded
path stays inside the cyclic prefix; its response on subcarrier ``n`` is
``Wbar_n = sum_l W_l exp(-j 2 pi n l / N)``. Desired-signal precoders are
maximum-ratio per subcarrier, leaving one power ``q_n`` per subcarrier.

The optimizer maximizes the sum rate over the taps. For fixed taps the best
powers are computed exactly (a concave water-filling-like problem with one
budget constraint), so the outer search runs on the taps alone with the
gradient supplied by the envelope theorem. Zero taps reduce to classic
water-filling, which is the half-duplex baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .channel import GeometryConfig, NarrowbandScenario, link_gains, sample_rayleigh
from .errors import OscillationError

LN2 = math.log(2.0)


# ---------------------------------------------------------------------------
# types

@dataclass(frozen=True, eq=False)
class WidebandScenario:
    """Per-subcarrier channels of one single-user pico cell.

    ``g_pk``: (N, N_t) PBS->PUE responses. ``gbar_mk``: (N,) equivalent
    MBS->PUE responses. ``gbar_mp``: (N, N_r) vectors such that the forwarded
    interference reaching the PUE is ``g^H Wbar gbar_mp``. ``sigma_n2`` is the
    noise power per subcarrier and ``p0`` the budget summed over subcarriers.
    The forwarded path is rotated by ``exp(-j (phi + 2 pi n tau / N))``.
    """

    g_pk: np.ndarray
    gbar_mk: np.ndarray
    gbar_mp: np.ndarray
    sigma_n2: float
    sigma_e2: float
    p0: float
    tau_samples: int = 0
    ts: float = 0.13e-6
    cp_samples: int = 36
    spread_mp: int = 0
    spread_pk: int = 0
    phi: float = 0.0

    def __post_init__(self):
        g = np.atleast_2d(np.asarray(self.g_pk, dtype=complex))
        gm = np.asarray(self.gbar_mk, dtype=complex).reshape(-1)
        gmp = np.atleast_2d(np.asarray(self.gbar_mp, dtype=complex))
        if not (g.shape[0] == gm.shape[0] == gmp.shape[0]):
            raise ValueError(f"per-subcarrier arrays disagree on N: {g.shape[0]}, {gm.shape[0]}, {gmp.shape[0]}")
        for a in (g, gm, gmp):
            a.setflags(write=False)
        object.__setattr__(self, "g_pk", g)
        object.__setattr__(self, "gbar_mk", gm)
        object.__setattr__(self, "gbar_mp", gmp)
        if not (self.sigma_n2 > 0 and self.p0 > 0 and self.sigma_e2 >= 0):
            raise ValueError("need sigma_n2 > 0, p0 > 0, sigma_e2 >= 0")
        if np.any(np.linalg.norm(g, axis=1) == 0):
            raise ValueError("a PBS->PUE subcarrier response is zero")
        for name in ("tau_samples", "cp_samples", "spread_mp", "spread_pk"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def n(self) -> int:
        return self.g_pk.shape[0]

    @property
    def n_t(self) -> int:
        return self.g_pk.shape[1]

    @property
    def n_r(self) -> int:
        return self.gbar_mp.shape[1]

    @property
    def delay_phase(self) -> np.ndarray:
        n = np.arange(self.n)
        return np.exp(-1j * (self.phi + 2.0 * np.pi * n * self.tau_samples / self.n))

    @classmethod
    def from_narrowband(cls, s: NarrowbandScenario) -> "WidebandScenario":
        """One-subcarrier view of a single-user narrowband scenario."""
        return cls(s.h[None, :], np.array([s.hbar_mk]), s.hbar_mp_vec[None, :],
                   s.sigma_n2, s.sigma_e2, s.p0, phi=s.phi)


def dft_map(n: int, l: int) -> np.ndarray:
    """First ``l`` columns of the N-point DFT matrix."""
    return np.exp(-2j * np.pi * np.outer(np.arange(n), np.arange(l)) / n)


@dataclass(frozen=True, eq=False)
class FirPrecoder:
    """Time-domain taps (L, N_t, N_r) and their N-point frequency responses."""

    taps: np.ndarray
    n: int
    freq: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=complex)
        if taps.ndim != 3:
            raise ValueError(f"taps must have shape (L, N_t, N_r), got {taps.shape}")
        if taps.shape[0] > self.n:
            raise ValueError(f"{taps.shape[0]} taps exceed the {self.n}-point DFT")
        taps = taps.copy()
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)
        freq = np.einsum("nl,lij->nij", dft_map(self.n, taps.shape[0]), taps)
        freq.setflags(write=False)
        object.__setattr__(self, "freq", freq)

    @property
    def order(self) -> int:
        return self.taps.shape[0]

    @classmethod
    def zeros(cls, l: int, n_t: int, n_r: int, n: int) -> "FirPrecoder":
        return cls(np.zeros((l, n_t, n_r), dtype=complex), n)

    def padded(self, l: int) -> "FirPrecoder":
        """Same filter with zero taps appended up to order ``l``."""
        if l < self.order:
            raise ValueError("cannot pad to a shorter order")
        extra = np.zeros((l - self.order,) + self.taps.shape[1:], dtype=complex)
        return FirPrecoder(np.concatenate([self.taps, extra]), self.n)


def fir_order_bound(ws: WidebandScenario) -> int:
    """Longest forwarding filter whose forwarded path still fits in the cyclic prefix.

    The forwarded path spans the processing delay, the filter length and both
    channel delay spreads, so ``L <= cp - tau - spread_mp - spread_pk``. The
    result is clamped to N since longer filters alias in an N-point DFT.
    """
    bound = ws.cp_samples - ws.tau_samples - ws.spread_mp - ws.spread_pk
    if bound < 1:
        raise ValueError(f"cyclic prefix of {ws.cp_samples} samples cannot hold even a one-tap "
                         f"forwarding path (delay {ws.tau_samples}, spreads {ws.spread_mp}+{ws.spread_pk})")
    return min(bound, ws.n)


# ---------------------------------------------------------------------------
# power and SINR

def _mrt(ws: WidebandScenario) -> np.ndarray:
    return ws.g_pk / np.linalg.norm(ws.g_pk, axis=1, keepdims=True)


def mrt_precoders(ws: WidebandScenario, q) -> np.ndarray:
    """Maximum-ratio desired precoders with powers ``q`` (one row per subcarrier)."""
    return np.sqrt(np.asarray(q, dtype=float))[:, None] * _mrt(ws)


def _check_freq(ws: WidebandScenario, fir: FirPrecoder):
    if fir.n != ws.n or fir.taps.shape[1:] != (ws.n_t, ws.n_r):
        raise ValueError(f"precoder shape {fir.taps.shape} / N={fir.n} does not fit the scenario")


def p_out_subcarrier(ws: WidebandScenario, fir: FirPrecoder, wd) -> np.ndarray:
    """Transmit power on each subcarrier (their sum is the budgeted quantity)."""
    _check_freq(ws, fir)
    wd = np.atleast_2d(np.asarray(wd, dtype=complex))
    w = fir.freq
    tr = np.sum(np.abs(w) ** 2, axis=(1, 2))
    loop = ws.sigma_e2 * tr
    bad = np.flatnonzero(loop >= 1.0)
    if bad.size:
        raise OscillationError(float(loop[bad[0]]), int(bad[0]))
    fwd = np.sum(np.abs(np.einsum("nij,nj->ni", w, ws.gbar_mp)) ** 2, axis=1)
    return (fwd + ws.sigma_n2 * tr + np.sum(np.abs(wd) ** 2, axis=1)) / (1.0 - loop)


def sinr_all(ws: WidebandScenario, fir: FirPrecoder, wd) -> np.ndarray:
    """SINR on every subcarrier for arbitrary desired precoders."""
    wd = np.atleast_2d(np.asarray(wd, dtype=complex))
    p_out = p_out_subcarrier(ws, fir, wd)
    g = ws.g_pk
    sig = np.abs(np.sum(g.conj() * wd, axis=1)) ** 2
    b = np.einsum("ni,nij->nj", g.conj(), fir.freq)
    ici = np.abs(ws.gbar_mk.conj() + ws.delay_phase * np.sum(b * ws.gbar_mp, axis=1)) ** 2
    fwd = np.sum(np.abs(b) ** 2, axis=1) * (p_out * ws.sigma_e2 + ws.sigma_n2)
    return sig / (ici + fwd + ws.sigma_n2)


def sinr_subcarrier(ws: WidebandScenario, fir: FirPrecoder, wd, n: int) -> float:
    return float(sinr_all(ws, fir, wd)[n])


def sum_rate(ws: WidebandScenario, fir: FirPrecoder, q) -> float:
    return float(np.sum(np.log2(1.0 + sinr_all(ws, fir, mrt_precoders(ws, q)))))


# ---------------------------------------------------------------------------
# per-subcarrier quantities for a given frequency response

@dataclass
class _Terms:
    w: np.ndarray       # (N, N_t, N_r)
    tr: np.ndarray      # ||Wbar_n||_F^2
    a: np.ndarray       # Wbar_n gbar_mp,n
    pf: np.ndarray      # forwarding power numerator
    den_d: np.ndarray   # 1 - sigma_e2 tr
    b: np.ndarray       # g_n^H Wbar_n
    c: np.ndarray       # ||b||^2
    ici: np.ndarray     # complex residual interference amplitude
    b0: np.ndarray      # interference-plus-noise at q = 0
    k: np.ndarray       # slope of the interference in q
    gain: np.ndarray    # ||g_n||^2


def _terms(ws: WidebandScenario, w: np.ndarray) -> _Terms:
    tr = np.sum(np.abs(w) ** 2, axis=(1, 2))
    a = np.einsum("nij,nj->ni", w, ws.gbar_mp)
    pf = np.sum(np.abs(a) ** 2, axis=1) + ws.sigma_n2 * tr
    den_d = 1.0 - ws.sigma_e2 * tr
    b = np.einsum("ni,nij->nj", ws.g_pk.conj(), w)
    c = np.sum(np.abs(b) ** 2, axis=1)
    ici = ws.gbar_mk.conj() + ws.delay_phase * np.sum(b * ws.gbar_mp, axis=1)
    gain = np.sum(np.abs(ws.g_pk) ** 2, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        b0 = np.abs(ici) ** 2 + c * (pf * ws.sigma_e2 / den_d + ws.sigma_n2) + ws.sigma_n2
        k = c * ws.sigma_e2 / den_d
    return _Terms(w, tr, a, pf, den_d, b, c, ici, b0, k, gain)


def _rate_and_grads(ws: WidebandScenario, t: _Terms, q: np.ndarray):
    """Sum rate (bits) with its gradients wrt conj(Wbar_n) and q_n, and dP_out,n/dconj(Wbar_n)."""
    p_out = (t.pf + q) / t.den_d
    s = q * t.gain
    den = t.b0 + t.k * q
    rate = float(np.sum(np.log2(1.0 + s / den)))
    se2, sn2 = ws.sigma_e2, ws.sigma_n2
    gb = ws.gbar_mp.conj()
    dpout = (t.a[:, :, None] * gb[:, None, :] + (sn2 + p_out * se2)[:, None, None] * t.w) / t.den_d[:, None, None]
    dden = ((t.ici * ws.delay_phase.conj())[:, None, None] * ws.g_pk[:, :, None] * gb[:, None, :]
            + (p_out * se2 + sn2)[:, None, None] * ws.g_pk[:, :, None] * t.b[:, None, :]
            + (t.c * se2)[:, None, None] * dpout)
    coef = -s / (den * (den + s)) / LN2
    d_w = coef[:, None, None] * dden
    d_q = (t.gain / (den + s) - t.k * s / (den * (den + s))) / LN2
    return rate, d_w, d_q, dpout


# ---------------------------------------------------------------------------
# exact power allocation for fixed taps

@dataclass(frozen=True)
class PowerSolution:
    q: np.ndarray
    rate: float
    mu: float          # budget multiplier, bits per watt
    feasible: bool


def _q_of_level(t: _Terms, nu: float) -> np.ndarray:
    """Stationary q_n for multiplier ``nu`` (nats per unit of budget)."""
    g, b0, k, d = t.gain, t.b0, t.k, t.den_d
    target = g * b0 * d / nu                  # required (b0+(g+k)q)(b0+kq)
    cq = b0 * b0 - target
    aq = (g + k) * k
    bq = b0 * (g + 2.0 * k)
    on = cq < 0
    q = np.zeros_like(b0)
    disc = bq[on] ** 2 - 4.0 * aq[on] * cq[on]
    q[on] = -2.0 * cq[on] / (bq[on] + np.sqrt(disc))
    return q


def optimal_powers(ws: WidebandScenario, fir: FirPrecoder) -> PowerSolution:
    """Rate-maximizing subcarrier powers for fixed forwarding taps."""
    _check_freq(ws, fir)
    t = _terms(ws, fir.freq)
    return _optimal_powers(ws, t)


def _optimal_powers(ws: WidebandScenario, t: _Terms) -> PowerSolution:
    if np.any(t.den_d <= 0):
        return PowerSolution(np.zeros(ws.n), -math.inf, 0.0, False)
    budget = ws.p0 - float(np.sum(t.pf / t.den_d))
    if not budget > 0:
        return PowerSolution(np.zeros(ws.n), -math.inf, 0.0, False)
    # budget used at level nu is decreasing in nu; zero above nu_hi
    nu_hi = float(np.max(t.gain * t.den_d / t.b0))

    def excess(log_nu):
        q = _q_of_level(t, math.exp(log_nu))
        return float(np.sum(q / t.den_d)) - budget

    lo = math.log(nu_hi)
    step = 1.0
    while excess(lo - step) < 0:
        step *= 2.0
        if step > 2000:
            break
    log_nu = brentq(excess, lo - step, lo, xtol=1e-14, rtol=1e-15, maxiter=500)
    nu = math.exp(log_nu)
    q = _q_of_level(t, nu)
    used = float(np.sum(q / t.den_d))
    if used > 0:
        q *= budget / used    # close the last ulp-level gap so the budget is tight
    s = q * t.gain
    rate = float(np.sum(np.log2(1.0 + s / (t.b0 + t.k * q))))
    return PowerSolution(q, rate, nu / LN2, True)


# ---------------------------------------------------------------------------
# objective over the full real parameter vector (taps and powers)

class WidebandObjective:
    """Sum rate as a function of a real parameter vector.

    ``theta = [Re V, Im V, u]`` with taps ``W_l = tap_scale * V_l`` and powers
    ``q = p0 * u``. The gradient is analytic.
    """

    def __init__(self, ws: WidebandScenario, l: int):
        self.ws = ws
        self.l = l
        self.shape = (l, ws.n_t, ws.n_r)
        self.n_taps = int(np.prod(self.shape))
        rms = math.sqrt(float(np.mean(np.sum(np.abs(ws.gbar_mp) ** 2, axis=1))))
        self.tap_scale = math.sqrt(ws.p0) / rms if rms > 0 else math.sqrt(ws.p0)
        self.f = dft_map(ws.n, l)

    @property
    def size(self) -> int:
        return 2 * self.n_taps + self.ws.n

    def split(self, theta):
        theta = np.asarray(theta, dtype=float)
        v = (theta[:self.n_taps] + 1j * theta[self.n_taps:2 * self.n_taps]).reshape(self.shape)
        return v, theta[2 * self.n_taps:]

    def pack(self, taps, q) -> np.ndarray:
        v = np.asarray(taps, dtype=complex).reshape(-1) / self.tap_scale
        return np.concatenate([v.real, v.imag, np.asarray(q, dtype=float) / self.ws.p0])

    def fir(self, theta) -> FirPrecoder:
        v, _ = self.split(theta)
        return FirPrecoder(self.tap_scale * v, self.ws.n)

    def _freq(self, v):
        return self.tap_scale * np.einsum("nl,lij->nij", self.f, v)

    def value(self, theta) -> float:
        """Sum rate; ``-inf`` where the taps break the oscillation bound on some subcarrier."""
        v, u = self.split(theta)
        t = _terms(self.ws, self._freq(v))
        if np.any(t.den_d <= 0):
            return -math.inf
        return _rate_and_grads(self.ws, t, self.ws.p0 * u)[0]

    def gradient(self, theta) -> np.ndarray:
        v, u = self.split(theta)
        t = _terms(self.ws, self._freq(v))
        _, d_w, d_q, _ = _rate_and_grads(self.ws, t, self.ws.p0 * u)
        d_v = self.tap_scale * np.einsum("nl,nij->lij", self.f.conj(), d_w).reshape(-1)
        return np.concatenate([2.0 * d_v.real, 2.0 * d_v.imag, self.ws.p0 * d_q])

    def total_power(self, theta) -> float:
        v, u = self.split(theta)
        t = _terms(self.ws, self._freq(v))
        return float(np.sum((t.pf + self.ws.p0 * u) / t.den_d))

    # value function with the powers optimized out
    def tap_value(self, x):
        """Best sum rate for the taps in ``x = [Re V, Im V]`` and the envelope gradient."""
        v = (x[:self.n_taps] + 1j * x[self.n_taps:]).reshape(self.shape)
        t = _terms(self.ws, self._freq(v))
        ps = _optimal_powers(self.ws, t)
        if not ps.feasible:
            return -math.inf, None, ps
        _, d_w, _, dpout = _rate_and_grads(self.ws, t, ps.q)
        d_w = d_w - ps.mu * dpout
        d_v = self.tap_scale * np.einsum("nl,nij->lij", self.f.conj(), d_w).reshape(-1)
        return ps.rate, np.concatenate([2.0 * d_v.real, 2.0 * d_v.imag]), ps


# ---------------------------------------------------------------------------
# optimizer

@dataclass(frozen=True)
class WidebandOptions:
    max_iter: int = 400
    tol: float = 1e-10
    gtol: float = 1e-9
    armijo: float = 1e-4
    max_halvings: int = 60
    restarts: int = 3
    seed: int = 0
    frozen: bool = False      # keep taps at zero (half-duplex baseline)


@dataclass(frozen=True, eq=False)
class WidebandResult:
    fir: FirPrecoder
    q: np.ndarray
    sum_rate: float
    trace: list
    iterations: int
    converged: bool


def _ascend(obj: WidebandObjective, x0: np.ndarray, opts: WidebandOptions):
    """Quasi-Newton ascent with Armijo backtracking; every accepted step increases the rate."""
    f, g, ps = obj.tap_value(x0)
    if not math.isfinite(f):
        return None
    x = x0.copy()
    h = np.eye(x.size)
    trace = [f]
    converged = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= opts.gtol * max(1.0, abs(f)):
            converged = True
            break
        d = h @ g
        slope = float(g @ d)
        if slope <= 0:
            h = np.eye(x.size)
            d, slope = g.copy(), gnorm ** 2
        step = 1.0
        accepted = False
        for _ in range(opts.max_halvings):
            xn = x + step * d
            fn, gn, psn = obj.tap_value(xn)
            if math.isfinite(fn) and fn >= f + opts.armijo * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            converged = True   # no ascent step left at machine precision
            break
        s_vec = xn - x
        y_vec = g - gn        # gradient change of the minimized function -f
        sy = float(s_vec @ y_vec)
        if sy > 1e-12 * np.linalg.norm(s_vec) * np.linalg.norm(y_vec):
            rho = 1.0 / sy
            hy = h @ y_vec
            h = (h - rho * (np.outer(s_vec, hy) + np.outer(hy, s_vec))
                 + (rho * rho * float(y_vec @ hy) + rho) * np.outer(s_vec, s_vec))
        gain = fn - f
        x, f, g, ps = xn, fn, gn, psn
        trace.append(f)
        if gain <= opts.tol * max(1.0, abs(f)):
            converged = True
            break
    return x, f, ps, trace, it, converged


def optimize_wideband(ws: WidebandScenario, l: int, opts: WidebandOptions | None = None,
                      init: FirPrecoder | None = None) -> WidebandResult:
    """Maximize the sum rate over L-tap forwarding filters and subcarrier powers.

    Starts from ``init`` (zero-padded to ``l`` taps) if given, from zero taps,
    and from ``opts.restarts`` random feasible filters; returns the best local
    optimum. With ``opts.frozen`` the taps stay zero.
    """
    opts = WidebandOptions() if opts is None else opts
    if l < 1:
        raise ValueError("filter order must be at least 1")
    if l > fir_order_bound(ws):
        raise ValueError(f"order {l} exceeds the cyclic-prefix bound {fir_order_bound(ws)}")
    obj = WidebandObjective(ws, l)
    zero = np.zeros(2 * obj.n_taps)
    if opts.frozen:
        fir = FirPrecoder.zeros(l, ws.n_t, ws.n_r, ws.n)
        ps = optimal_powers(ws, fir)
        return WidebandResult(fir, ps.q, ps.rate, [ps.rate], 0, True)

    starts = []
    if init is not None:
        if init.n != ws.n:
            raise ValueError("initial filter has a different subcarrier count")
        starts.append(obj.pack(init.padded(l).taps, np.zeros(ws.n))[:2 * obj.n_taps])
    starts.append(zero)
    rng = np.random.default_rng(opts.seed)
    for _ in range(opts.restarts):
        x = rng.standard_normal(2 * obj.n_taps) * (0.3 / math.sqrt(max(ws.n, 1)))
        while not math.isfinite(obj.tap_value(x)[0]):
            x *= 0.5
        starts.append(x)

    best = None
    for x0 in starts:
        res = _ascend(obj, x0, opts)
        if res is None:
            continue
        if best is None or res[1] > best[1]:
            best = res
    assert best is not None, "zero taps are always feasible"
    x, f, ps, trace, it, conv = best
    fir = FirPrecoder(obj.tap_scale * (x[:obj.n_taps] + 1j * x[obj.n_taps:]).reshape(obj.shape), ws.n)
    return WidebandResult(fir, ps.q, f, trace, it, conv)


def hd_water_filling(ws: WidebandScenario) -> WidebandResult:
    """Half-duplex baseline: zero taps, optimal powers."""
    return optimize_wideband(ws, 1, WidebandOptions(frozen=True))


def optimize_ladder(ws: WidebandScenario, orders=(1, 2, 4), opts: WidebandOptions | None = None):
    """Optimize increasing filter orders, each warm-started from the previous optimum.

    Because the shorter filter zero-padded is feasible for the longer order and
    the ascent never decreases the objective, the rates are non-decreasing in
    the order and never below the half-duplex baseline.
    """
    hd = hd_water_filling(ws)
    out = {0: hd}
    prev = None
    for l in sorted(orders):
        res = optimize_wideband(ws, l, opts, init=prev)
        out[l] = res
        prev = res.fir
    return out


# ---------------------------------------------------------------------------
# channel model

@dataclass(frozen=True)
class WidebandConfig:
    """Tapped-delay-line channel model for one pico cell.

    Spreads are in samples; tap powers decay as ``exp(-l / (decay * spread))``
    and are normalized to the link's large-scale gain.
    """

    geometry: GeometryConfig = field(default_factory=lambda: GeometryConfig(k_m=1, k_p=1, sir_self_db=110.0))
    cell: int = 0
    n_subcarriers: int = 25
    tau_samples: int = 4
    cp_samples: int = 36
    ts: float = 0.13e-6
    spread_mp: int = 3
    spread_pk: int = 6
    spread_mk: int = 6
    spread_mue: int = 6
    decay: float = 0.5

    def __post_init__(self):
        if self.n_subcarriers < 1:
            raise ValueError("need at least one subcarrier")
        if self.geometry.k_m != 1 or self.geometry.k_p != 1:
            raise ValueError("the wideband model is single-user (k_m = k_p = 1)")
        if not 0 <= self.cell < self.geometry.n_cells:
            raise ValueError(f"cell {self.cell} out of range")
        for name in ("tau_samples", "cp_samples", "spread_mp", "spread_pk", "spread_mk", "spread_mue"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not self.decay > 0:
            raise ValueError("decay must be positive")


def pdp(spread: int, decay: float) -> np.ndarray:
    """Normalized exponential power-delay profile with ``spread + 1`` taps."""
    l = np.arange(spread + 1)
    p = np.exp(-l / (decay * spread)) if spread > 0 else np.ones(1)
    return p / p.sum()


def _tdl(shape, spread, decay, gain, rng, n):
    """Frequency response (n, *shape) of a TDL link with i.i.d. Rayleigh taps."""
    prof = pdp(spread, decay)
    taps = np.stack([sample_rayleigh(1, int(np.prod(shape)), gain * p, rng).reshape(shape) for p in prof])
    return np.einsum("nl,l...->n...", dft_map(n, len(prof)), taps)


def sample_wideband(cfg: WidebandConfig, rng: np.random.Generator) -> WidebandScenario:
    """Draw a frequency-selective single-user scenario.

    The MBS serves its MUE with maximum-ratio transmission per subcarrier and
    spreads its power evenly, as does the noise.
    """
    geo = cfg.geometry
    n = cfg.n_subcarriers
    lg = link_gains(geo)
    h_mue = _tdl((geo.m,), cfg.spread_mue, cfg.decay, lg.mue[0], rng, n)                  # (N, M)
    h_mk = _tdl((geo.m,), cfg.spread_mk, cfg.decay, lg.mbs_pue[cfg.cell, 0], rng, n)    # (N, M)
    h_mp = _tdl((geo.m, geo.n_r), cfg.spread_mp, cfg.decay, lg.mbs_pbs[cfg.cell], rng, n)
    g_pk = _tdl((geo.n_t,), cfg.spread_pk, cfg.decay, lg.pbs_pue[cfg.cell, 0], rng, n)
    w_m = h_mue / np.linalg.norm(h_mue, axis=1, keepdims=True)
    scale = math.sqrt(geo.p_m / n)
    gbar_mk = scale * np.sum(w_m.conj() * h_mk, axis=1)
    gbar_mp = scale * np.einsum("nmr,nm->nr", h_mp.conj(), w_m)   # H_MP,n^H w_M,n
    return WidebandScenario(g_pk, gbar_mk, gbar_mp, geo.sigma_n2 / n, geo.sigma_e2, geo.p0,
                            tau_samples=cfg.tau_samples, ts=cfg.ts, cp_samples=cfg.cp_samples,
                            spread_mp=cfg.spread_mp, spread_pk=cfg.spread_pk, phi=geo.phi)
