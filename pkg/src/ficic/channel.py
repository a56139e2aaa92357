"""Scenario generation: geometry, path loss, Rayleigh fading and equivalent channels.

Everything a solver consumes is in linear units (W, linear power gains). dB
values appear only in :class:`GeometryConfig` and the conversion helpers.

Channel conventions
-------------------
``NarrowbandScenario.h_p``
    ``(K_P, N_t)`` array whose rows are the PBS->PUE channels ``h_k``; the PUE
    receives ``h_k^H x``.
``NarrowbandScenario.hbar_m``
    ``(K_P, K_M)`` equivalent MBS->PUE channels ``W_M^H h_Mk`` (power folded in).
``NarrowbandScenario.hbar_mp``
    ``(K_M, N_r)`` equivalent MBS->PBS channel ``W_M^H H_MP``. In the
    single-user case its only row is ``hbar_MP^H``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateChannel

Point = tuple[float, float]

MACRO = "macro"
PICO = "pico"


# ---------------------------------------------------------------------------
# unit helpers

def _scalar_or_array(x: np.ndarray):
    return float(x) if x.ndim == 0 else x


def dbm_to_w(dbm):
    """Convert dBm to watts."""
    return _scalar_or_array(10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0))


def w_to_dbm(w):
    """Convert watts to dBm."""
    return _scalar_or_array(10.0 * np.log10(np.asarray(w, dtype=float)) + 30.0)


def db_to_lin(db):
    return _scalar_or_array(10.0 ** (np.asarray(db, dtype=float) / 10.0))


def lin_to_db(x):
    return _scalar_or_array(10.0 * np.log10(np.asarray(x, dtype=float)))


def path_loss_db(d_km: float, tier: str) -> float:
    """Distance-dependent path loss in dB (distance in km).

    Macro: ``128.1 + 37.6 log10 d``; pico: ``140.7 + 36.7 log10 d``. Penetration
    loss is not included.
    """
    d_km = float(d_km)
    if not d_km > 0.0 or not math.isfinite(d_km):
        raise ValueError(f"distance must be positive and finite, got {d_km!r} km")
    if tier == MACRO:
        return 128.1 + 37.6 * math.log10(d_km)
    if tier == PICO:
        return 140.7 + 36.7 * math.log10(d_km)
    raise ValueError(f"unknown tier {tier!r}; expected 'macro' or 'pico'")


def macro_distance_km(pl_db: float) -> float:
    """Inverse of the macro path-loss law."""
    return 10.0 ** ((pl_db - 128.1) / 37.6)


def noise_power_dbm(p_m_dbm: float, r_macro_m: float, snr_edge_db: float) -> float:
    """Noise floor that gives a cell-edge MUE the requested average SNR."""
    if not r_macro_m > 0.0:
        raise ValueError(f"macro radius must be positive, got {r_macro_m!r}")
    return p_m_dbm - path_loss_db(r_macro_m / 1000.0, MACRO) - snr_edge_db


# ---------------------------------------------------------------------------
# types

@dataclass(frozen=True)
class RfImpairmentParams:
    """Residual self-interference after cancellation.

    ``sigma_e2`` is the ratio of residual self-interference power to transmit
    power. Build it from hardware components with :meth:`from_components` or
    from a signal-to-self-interference ratio with :meth:`from_sir_self`.
    """

    sigma_e2: float
    mu_x: float | None = None
    mu_y: float | None = None
    p_tr: float | None = None
    alpha_pp: float | None = None

    def __post_init__(self):
        if not (self.sigma_e2 >= 0.0 and math.isfinite(self.sigma_e2)):
            raise ValueError(f"sigma_e2 must be finite and non-negative, got {self.sigma_e2!r}")

    @classmethod
    def from_components(cls, mu_x: float, mu_y: float, p_tr: float, alpha_pp: float,
                        sigma_n2: float) -> "RfImpairmentParams":
        """Pilot-based estimation error plus transmitter/receiver distortion.

        ``mu_x, mu_y << 1`` is assumed by the model but not enforced.
        """
        if mu_x < 0 or mu_y < 0 or alpha_pp < 0 or sigma_n2 < 0:
            raise ValueError("distortion factors, SI gain and noise power must be non-negative")
        if not p_tr > 0:
            raise ValueError(f"pilot power must be positive, got {p_tr!r}")
        sigma_e2 = sigma_n2 / p_tr + 2.0 * alpha_pp * (mu_x + mu_y)
        return cls(sigma_e2=sigma_e2, mu_x=mu_x, mu_y=mu_y, p_tr=p_tr, alpha_pp=alpha_pp)

    @classmethod
    def from_sir_self(cls, sir_self_db: float) -> "RfImpairmentParams":
        return cls(sigma_e2=10.0 ** (-sir_self_db / 10.0))

    @property
    def has_components(self) -> bool:
        return self.mu_x is not None

    def sigma_i2(self, p0: float) -> float:
        """Residual self-interference power at full transmit power."""
        return p0 * self.sigma_e2


def _frozen_array(x, dtype=complex, ndim=2) -> np.ndarray:
    a = np.array(x, dtype=dtype, copy=True)
    if a.ndim != ndim:
        raise ValueError(f"expected a {ndim}-D array, got shape {a.shape}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class NarrowbandScenario:
    """One pico-cell instance: channels, noise, self-interference and budget."""

    h_p: np.ndarray
    hbar_m: np.ndarray
    hbar_mp: np.ndarray
    sigma_n2: float
    sigma_i2: float
    p0: float
    phi: float = 0.0

    def __post_init__(self):
        h_p = np.atleast_2d(np.asarray(self.h_p, dtype=complex))
        hbar_m = np.asarray(self.hbar_m, dtype=complex)
        if hbar_m.ndim < 2:
            hbar_m = hbar_m.reshape(h_p.shape[0], -1)
        hbar_mp = np.atleast_2d(np.asarray(self.hbar_mp, dtype=complex))
        object.__setattr__(self, "h_p", _frozen_array(h_p))
        object.__setattr__(self, "hbar_m", _frozen_array(hbar_m))
        object.__setattr__(self, "hbar_mp", _frozen_array(hbar_mp))
        for name in ("sigma_n2", "sigma_i2", "p0", "phi"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.hbar_m.shape[0] != self.h_p.shape[0]:
            raise ValueError(f"hbar_m has {self.hbar_m.shape[0]} rows but there are {self.h_p.shape[0]} PUEs")
        if self.hbar_m.shape[1] != self.hbar_mp.shape[0]:
            raise ValueError(f"hbar_m has {self.hbar_m.shape[1]} MBS streams but hbar_mp has {self.hbar_mp.shape[0]}")
        if not (self.sigma_n2 > 0 and math.isfinite(self.sigma_n2)):
            raise ValueError(f"sigma_n2 must be positive, got {self.sigma_n2!r}")
        if not (self.sigma_i2 >= 0 and math.isfinite(self.sigma_i2)):
            raise ValueError(f"sigma_i2 must be non-negative, got {self.sigma_i2!r}")
        if not (self.p0 > 0 and math.isfinite(self.p0)):
            raise ValueError(f"p0 must be positive, got {self.p0!r}")
        for name in ("h_p", "hbar_m", "hbar_mp"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite entries")

    # dimensions
    @property
    def k_p(self) -> int:
        return self.h_p.shape[0]

    @property
    def k_m(self) -> int:
        return self.hbar_mp.shape[0]

    @property
    def n_t(self) -> int:
        return self.h_p.shape[1]

    @property
    def n_r(self) -> int:
        return self.hbar_mp.shape[1]

    @property
    def sigma_e2(self) -> float:
        return self.sigma_i2 / self.p0

    @property
    def is_single_user(self) -> bool:
        return self.k_p == 1 and self.k_m == 1

    # single-user views
    @property
    def h(self) -> np.ndarray:
        """PBS->PUE channel of the only PUE."""
        self._require_single()
        return self.h_p[0]

    @property
    def hbar_mk(self) -> complex:
        """Scalar equivalent MBS->PUE channel."""
        self._require_single()
        return complex(self.hbar_m[0, 0])

    @property
    def hbar_mp_vec(self) -> np.ndarray:
        """The N_r vector ``hbar_MP`` whose Hermitian is the single row of ``hbar_mp``."""
        self._require_single()
        return self.hbar_mp[0].conj()

    def _require_single(self):
        if not self.is_single_user:
            raise ValueError(f"single-user view needs K_M = K_P = 1, got K_M={self.k_m}, K_P={self.k_p}")

    def replace(self, **changes) -> "NarrowbandScenario":
        return dataclasses.replace(self, **changes)

    def ici_free(self) -> "NarrowbandScenario":
        """Same instance with the MBS->PUE link removed."""
        return self.replace(hbar_m=np.zeros_like(self.hbar_m))

    def pue(self, k: int) -> "NarrowbandScenario":
        """Single-PUE sub-scenario (all MBS streams kept)."""
        return self.replace(h_p=self.h_p[k:k + 1], hbar_m=self.hbar_m[k:k + 1])


def _default_pues() -> tuple:
    return (((60.0, 40.0), (60.0, -40.0)), ((180.0, 40.0), (180.0, -40.0)))


@dataclass(frozen=True)
class GeometryConfig:
    """HetNet layout, powers and antenna counts.

    The defaults reproduce the two-cell layout used throughout the evaluation:
    PBSs at 60 m and 180 m on the x-axis, PUEs 40 m above and below each PBS,
    MUEs at 120 m and 240 m. The first ``k_m`` MUEs and the first ``k_p`` PUEs
    of each cell are used.

    ``penetration_loss_db`` applies to MBS->PUE links. Set ``pico_penetration``
    to also apply it on PBS->PUE links. ``ici_scale`` multiplies the MBS->PUE
    power gain (0 gives an ICI-free instance).
    """

    r_macro: float = 500.0
    mbs_position: Point = (0.0, 0.0)
    pbs_positions: tuple = ((60.0, 0.0), (180.0, 0.0))
    mue_positions: tuple = ((120.0, 0.0), (240.0, 0.0))
    pue_positions: tuple = field(default_factory=_default_pues)
    p_m_dbm: float = 46.0
    p0_dbm: float = 30.0
    snr_edge_db: float = 20.0
    sir_self_db: float | None = None
    rf: RfImpairmentParams | None = None
    penetration_loss_db: float = 20.0
    pico_penetration: bool = False
    m: int = 4
    n_t: int = 2
    n_r: int = 2
    k_m: int = 1
    k_p: int = 1
    phi: float = 0.0
    ici_scale: float = 1.0
    min_distance_m: float = 1.0

    def __post_init__(self):
        # normalize nested sequences (e.g. lists from JSON) to tuples
        object.__setattr__(self, "mbs_position", _point(self.mbs_position))
        object.__setattr__(self, "pbs_positions", tuple(_point(p) for p in self.pbs_positions))
        object.__setattr__(self, "mue_positions", tuple(_point(p) for p in self.mue_positions))
        object.__setattr__(self, "pue_positions",
                           tuple(tuple(_point(p) for p in cell) for cell in self.pue_positions))
        self.validate()

    def validate(self) -> None:
        for name in ("m", "n_t", "n_r", "k_m", "k_p"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 1:
                raise ValueError(f"{name} must be an integer >= 1, got {v!r}")
        if self.n_t < self.k_p:
            raise ValueError(f"need n_t >= k_p, got n_t={self.n_t}, k_p={self.k_p}")
        if self.m < self.k_m:
            raise ValueError(f"need m >= k_m, got m={self.m}, k_m={self.k_m}")
        if len(self.mue_positions) < self.k_m:
            raise ValueError(f"k_m={self.k_m} but only {len(self.mue_positions)} MUE positions")
        if len(self.pbs_positions) == 0:
            raise ValueError("at least one PBS is required")
        if len(self.pue_positions) != len(self.pbs_positions):
            raise ValueError("pue_positions must list one group per PBS")
        for c, cell in enumerate(self.pue_positions):
            if len(cell) < self.k_p:
                raise ValueError(f"cell {c} has {len(cell)} PUE positions, k_p={self.k_p}")
        for name in ("r_macro", "min_distance_m"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive, got {v!r}")
        for name in ("p_m_dbm", "p0_dbm", "snr_edge_db", "penetration_loss_db", "phi"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not (self.ici_scale >= 0 and math.isfinite(self.ici_scale)):
            raise ValueError(f"ici_scale must be non-negative, got {self.ici_scale!r}")
        if self.sir_self_db is not None and not math.isfinite(self.sir_self_db):
            raise ValueError("sir_self_db must be finite or None")

    @property
    def n_cells(self) -> int:
        return len(self.pbs_positions)

    @property
    def sigma_n2(self) -> float:
        return dbm_to_w(noise_power_dbm(self.p_m_dbm, self.r_macro, self.snr_edge_db))

    @property
    def p0(self) -> float:
        return dbm_to_w(self.p0_dbm)

    @property
    def p_m(self) -> float:
        return dbm_to_w(self.p_m_dbm)

    @property
    def sigma_e2(self) -> float:
        if self.rf is not None:
            return self.rf.sigma_e2
        if self.sir_self_db is not None:
            return 10.0 ** (-self.sir_self_db / 10.0)
        return 0.0

    def replace(self, **changes) -> "GeometryConfig":
        return dataclasses.replace(self, **changes)

    def with_pbs_x(self, cell: int, x: float) -> "GeometryConfig":
        """Move PBS ``cell`` along the x-axis, carrying its PUEs with it."""
        px, py = self.pbs_positions[cell]
        dx = x - px
        pbs = list(self.pbs_positions)
        pbs[cell] = (x, py)
        pues = list(self.pue_positions)
        pues[cell] = tuple((ux + dx, uy) for ux, uy in pues[cell])
        return self.replace(pbs_positions=tuple(pbs), pue_positions=tuple(pues))


def _point(p) -> Point:
    if len(p) != 2:
        raise ValueError(f"positions are 2-D points, got {p!r}")
    x, y = float(p[0]), float(p[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValueError(f"non-finite position {p!r}")
    return (x, y)


# ---------------------------------------------------------------------------
# fading and MBS precoding

def sample_rayleigh(rows: int, cols: int, gain: float, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. CN(0, gain) entries.

    The standard normals are drawn before scaling, so the same generator state
    yields the same underlying fading for any ``gain``.
    """
    if not gain >= 0:
        raise ValueError(f"gain must be non-negative, got {gain!r}")
    z = rng.standard_normal((rows, cols, 2))
    return math.sqrt(gain / 2.0) * (z[..., 0] + 1j * z[..., 1])


def mbs_precoder(h_m_list: Sequence[np.ndarray], sigma_n2: float | None = None) -> np.ndarray:
    """Unit-norm MBS precoding columns: MRT for one MUE, zero-forcing otherwise.

    ``h_m_list`` holds the K_M MBS->MUE channels (length M each); MUE ``j``
    receives ``h_j^H W_M s``. ``sigma_n2`` is unused by MRT/ZF and accepted for
    signature compatibility with the SLNR variant.
    """
    h = np.atleast_2d(np.asarray(h_m_list, dtype=complex)).T  # M x K_M
    m, k_m = h.shape
    if m < k_m:
        raise ValueError(f"need M >= K_M, got M={m}, K_M={k_m}")
    if k_m == 1:
        nrm = np.linalg.norm(h[:, 0])
        if nrm == 0:
            raise DegenerateChannel("MBS->MUE channel is identically zero")
        return h / nrm
    gram = h.conj().T @ h
    if np.linalg.cond(gram) > 1e12:
        raise DegenerateChannel("stacked MBS->MUE channel is rank deficient; re-sample")
    w = h @ np.linalg.inv(gram)
    return w / np.linalg.norm(w, axis=0, keepdims=True)


# ---------------------------------------------------------------------------
# scenario construction

def _dist_km(a: Point, b: Point, floor_m: float) -> float:
    return max(math.hypot(a[0] - b[0], a[1] - b[1]), floor_m) / 1000.0


@dataclass(frozen=True)
class LinkGains:
    """Large-scale power gains (linear) of one network draw."""

    mue: np.ndarray      # (K_M,) MBS->MUE
    mbs_pbs: np.ndarray  # (cells,) MBS->PBS
    mbs_pue: np.ndarray  # (cells, K_P) MBS->PUE incl. penetration
    pbs_pue: np.ndarray  # (cells, K_P) serving PBS->PUE


def link_gains(cfg: GeometryConfig) -> LinkGains:
    pen = db_to_lin(-cfg.penetration_loss_db)
    pico_pen = pen if cfg.pico_penetration else 1.0
    f = cfg.min_distance_m
    mbs = cfg.mbs_position

    def macro(p):
        return db_to_lin(-path_loss_db(_dist_km(mbs, p, f), MACRO))

    mue = np.array([macro(p) for p in cfg.mue_positions[:cfg.k_m]])
    mbs_pbs = np.array([macro(p) for p in cfg.pbs_positions])
    mbs_pue = np.array([[macro(u) * pen * cfg.ici_scale for u in cell[:cfg.k_p]]
                        for cell in cfg.pue_positions])
    pbs_pue = np.array([[db_to_lin(-path_loss_db(_dist_km(pbs, u, f), PICO)) * pico_pen
                         for u in cell[:cfg.k_p]]
                        for pbs, cell in zip(cfg.pbs_positions, cfg.pue_positions)])
    return LinkGains(mue, mbs_pbs, mbs_pue, pbs_pue)


@dataclass(frozen=True, eq=False)
class NetworkDraw:
    """Raw (unprecoded) small-scale channels of every link in one draw.

    Channels are stored with their large-scale gain applied and the MBS power
    not yet folded in.
    """

    h_mue: np.ndarray         # (K_M, M)
    h_mpue: np.ndarray        # (cells, K_P, M)
    h_mpbs: np.ndarray        # (cells, M, N_r)
    h_p: np.ndarray           # (cells, K_P, N_t)


def sample_network(cfg: GeometryConfig, rng: np.random.Generator) -> NetworkDraw:
    """Draw all small-scale channels in a fixed order."""
    g = link_gains(cfg)
    h_mue = np.stack([sample_rayleigh(1, cfg.m, g.mue[j], rng)[0] for j in range(cfg.k_m)])
    h_mpue, h_mpbs, h_p = [], [], []
    for c in range(cfg.n_cells):
        h_mpue.append(np.stack([sample_rayleigh(1, cfg.m, g.mbs_pue[c, k], rng)[0] for k in range(cfg.k_p)]))
        h_mpbs.append(sample_rayleigh(cfg.m, cfg.n_r, g.mbs_pbs[c], rng))
        rows = []
        for k in range(cfg.k_p):
            row = sample_rayleigh(1, cfg.n_t, g.pbs_pue[c, k], rng)[0]
            tries = 0
            while not np.any(row):
                # zero vector only happens with zero gain or astronomically rare draws
                if g.pbs_pue[c, k] == 0 or tries > 10:
                    raise DegenerateChannel(f"PBS->PUE channel of cell {c}, PUE {k} is identically zero")
                row = sample_rayleigh(1, cfg.n_t, g.pbs_pue[c, k], rng)[0]
                tries += 1
            rows.append(row)
        h_p.append(np.stack(rows))
    return NetworkDraw(h_mue, np.stack(h_mpue), np.stack(h_mpbs), np.stack(h_p))


def scenarios_from_draw(cfg: GeometryConfig, draw: NetworkDraw, w_m: np.ndarray) -> list[NarrowbandScenario]:
    """Fold the MBS precoder and power into equivalent channels, one scenario per cell."""
    scale = math.sqrt(cfg.p_m / cfg.k_m)
    sigma_n2 = cfg.sigma_n2
    p0 = cfg.p0
    sigma_i2 = p0 * cfg.sigma_e2
    out = []
    for c in range(cfg.n_cells):
        hbar_m = scale * (draw.h_mpue[c] @ w_m.conj())  # (K_P, K_M): entries w_i^H h_Mk
        hbar_mp = scale * (w_m.conj().T @ draw.h_mpbs[c])     # (K_M, N_r)
        out.append(NarrowbandScenario(draw.h_p[c], hbar_m, hbar_mp, sigma_n2, sigma_i2, p0, cfg.phi))
    return out


def build_network(cfg: GeometryConfig, rng: np.random.Generator, mbs: str = "zf") -> list[NarrowbandScenario]:
    """Sample one network draw and return the per-cell scenarios.

    ``mbs`` selects the MBS precoder: ``"zf"`` (MRT for one MUE, ZF otherwise)
    or ``"slnr"`` (coordinated beamforming against all PUE links).
    """
    draw = sample_network(cfg, rng)
    if mbs == "zf":
        w_m = mbs_precoder(draw.h_mue)
    elif mbs == "slnr":
        from .baselines import slnr_precoder
        scale = math.sqrt(cfg.p_m / cfg.k_m)
        leak = scale * draw.h_mpue.reshape(-1, cfg.m)
        w_m = slnr_precoder(scale * draw.h_mue, leak, cfg.sigma_n2)
    else:
        raise ValueError(f"unknown MBS precoder {mbs!r}")
    return scenarios_from_draw(cfg, draw, w_m)


def build_scenario(cfg: GeometryConfig, rng: np.random.Generator, cell: int = 0,
                   mbs: str = "zf") -> NarrowbandScenario:
    """Scenario of one pico cell. All cells are sampled so draws stay aligned."""
    return build_network(cfg, rng, mbs)[cell]


def pbs_x_for_inr(cfg: GeometryConfig, inr_db: float, cell: int = 0) -> float:
    """PBS x-coordinate whose PUEs see the requested mean INR.

    The mean of ``||hbar_Mk||^2`` is ``P_M`` times the MBS->PUE gain for unit-norm
    MBS columns, so the required macro path loss follows directly and the
    macro law is inverted for the PUE distance. PUEs keep their vertical offset
    from the PBS.
    """
    pl = cfg.p_m_dbm - w_to_dbm(cfg.sigma_n2) - inr_db - cfg.penetration_loss_db + lin_to_db(max(cfg.ici_scale, 1e-300))
    d_m = 1000.0 * macro_distance_km(pl)
    pbs = cfg.pbs_positions[cell]
    dy = cfg.pue_positions[cell][0][1] - pbs[1]
    y = pbs[1] + dy
    if d_m <= abs(y - cfg.mbs_position[1]):
        raise ValueError(f"INR {inr_db} dB needs a PUE distance of {d_m:.2f} m, "
                         f"closer than its vertical offset {abs(y):.2f} m")
    return cfg.mbs_position[0] + math.sqrt(d_m ** 2 - (y - cfg.mbs_position[1]) ** 2)
