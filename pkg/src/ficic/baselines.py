"""Comparison schemes: half-duplex, almost-blank-subframe eICIC, SLNR coordinated
beamforming at the macro, and their combinations with fICIC.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .channel import GeometryConfig, NarrowbandScenario, build_network
from .errors import DegenerateChannel, OscillationError
from .multi import BISECTION_EPS, FairnessSpec, p_out_multi, sinr_eval_multi, solve_sum_rate
from .single import ficic_optimal, hd_optimal


class SchemeId(str, enum.Enum):
    FD_FICIC = "FD_FICIC"
    HD = "HD"
    EICIC = "EICIC"
    EICIC_PLUS_FICIC = "EICIC_PLUS_FICIC"
    COMP_CB = "COMP_CB"
    COMP_CB_PLUS_FICIC = "COMP_CB_PLUS_FICIC"

    @classmethod
    def parse(cls, name: str) -> "SchemeId":
        try:
            return cls(name.strip().upper())
        except ValueError:
            raise ValueError(f"unknown scheme {name!r}; choose from {[s.value for s in cls]}") from None

    @property
    def mbs_mode(self) -> str:
        return "slnr" if self in (SchemeId.COMP_CB, SchemeId.COMP_CB_PLUS_FICIC) else "zf"


@dataclass(frozen=True)
class SchemeResult:
    """Rate of one cell under one scheme."""

    rate: float
    per_ue: np.ndarray
    p_out: float
    iterations: int
    nonconverged: int = 0


def _rate(s: NarrowbandScenario, fairness, eps, hd: bool) -> SchemeResult:
    """Sum rate of one cell; single-user instances use the closed forms."""
    if s.is_single_user:
        sol = hd_optimal(s) if hd else ficic_optimal(s)
        r = float(np.log2(1.0 + sol.sinr[0]))
        return SchemeResult(r, np.array([r]), sol.p_out, 0)
    rep = solve_sum_rate(s, fairness, eps, hd=hd)
    return SchemeResult(rep.r_sum, rep.rates, rep.solution.p_out, rep.outer_iterations, rep.nonconverged)


def hd_rate(s: NarrowbandScenario, fairness: FairnessSpec | None = None, eps: float = BISECTION_EPS) -> float:
    """Sum rate with the forwarding precoder frozen at zero."""
    return _rate(s, fairness, eps, hd=True).rate


def ficic_rate(s: NarrowbandScenario, fairness: FairnessSpec | None = None, eps: float = BISECTION_EPS) -> float:
    return _rate(s, fairness, eps, hd=False).rate


def eicic_rate(s: NarrowbandScenario, fairness: FairnessSpec | None = None, eps: float = BISECTION_EPS) -> float:
    """PUEs served only in the muted half of the subframes, free of macro interference."""
    return 0.5 * hd_rate(s.ici_free(), fairness, eps)


def eicic_plus_ficic_rate(s: NarrowbandScenario, fairness: FairnessSpec | None = None,
                          eps: float = BISECTION_EPS) -> float:
    """Muted half served interference-free, the other half with fICIC."""
    return 0.5 * hd_rate(s.ici_free(), fairness, eps) + 0.5 * ficic_rate(s, fairness, eps)


def slnr_precoder(h_mue, h_leak, sigma_n2: float) -> np.ndarray:
    """MBS columns maximizing signal-to-leakage-plus-noise ratio.

    Column ``m`` is the dominant generalized eigenvector of
    ``(h_m h_m^H, sigma_n2 I + sum_leak g g^H)``, i.e. proportional to
    ``(sigma_n2 I + sum g g^H)^{-1} h_m``. The leakage set is every PUE channel
    plus the other MUEs. Columns have unit norm and their first nonzero entry
    is made real and positive.
    """
    h_mue = np.atleast_2d(np.asarray(h_mue, dtype=complex))
    m = h_mue.shape[1]
    leak = np.asarray(h_leak, dtype=complex).reshape(-1, m) if np.size(h_leak) else np.zeros((0, m), complex)
    if not sigma_n2 > 0:
        raise ValueError("sigma_n2 must be positive")
    cols = []
    for j in range(h_mue.shape[0]):
        others = np.delete(h_mue, j, axis=0)
        g = np.vstack([leak, others])
        b = sigma_n2 * np.eye(m) + g.T @ g.conj()
        v = np.linalg.solve(b, h_mue[j])
        nv = np.linalg.norm(v)
        if not (nv > 0 and np.isfinite(nv)):
            raise DegenerateChannel("SLNR eigenproblem is degenerate")
        v = v / nv
        lead = np.flatnonzero(np.abs(v) > 1e-14 * np.max(np.abs(v)))[0]
        v = v * (abs(v[lead]) / v[lead])
        v[lead] = abs(v[lead])
        cols.append(v)
    return np.stack(cols, axis=1)


def evaluate_scheme(scheme: SchemeId | str, cfg: GeometryConfig, rng: np.random.Generator,
                    eps: float = BISECTION_EPS, fairness: FairnessSpec | None = None,
                    cells=None, perturb=None) -> list[SchemeResult]:
    """Per-cell results of one scheme on one network draw.

    ``perturb`` optionally maps a true scenario to the one the PBS believes
    (imperfect CSI); rates are then re-evaluated on the true channels.
    """
    scheme = SchemeId.parse(scheme) if isinstance(scheme, str) else scheme
    net = build_network(cfg, rng, scheme.mbs_mode)
    cells = range(len(net)) if cells is None else cells
    out = []
    for c in cells:
        s = net[c]
        est = perturb(s) if perturb is not None else None
        out.append(_scheme_on(scheme, s, est, fairness, eps))
    return out


def _solve(s_est: NarrowbandScenario, s_true: NarrowbandScenario | None, fairness, eps, hd: bool) -> SchemeResult:
    """Design on ``s_est``; with ``s_true`` given, score the design on the true channels."""
    if s_true is None:
        return _rate(s_est, fairness, eps, hd)
    if s_est.is_single_user:
        sol = hd_optimal(s_est) if hd else ficic_optimal(s_est)
        iters, nonconv = 0, 0
    else:
        rep = solve_sum_rate(s_est, fairness, eps, hd=hd)
        sol, iters, nonconv = rep.solution, rep.outer_iterations, rep.nonconverged
    try:
        sinr = sinr_eval_multi(s_true, sol)
        p_out = p_out_multi(s_true, sol)
    except OscillationError:
        sinr, p_out = np.zeros(s_true.k_p), math.inf
    per = np.log2(1.0 + sinr)
    return SchemeResult(float(per.sum()), per, p_out, iters, nonconv)


def _scheme_on(scheme: SchemeId, s: NarrowbandScenario, est: NarrowbandScenario | None,
               fairness, eps) -> SchemeResult:
    design = s if est is None else est
    truth = None if est is None else s
    if scheme in (SchemeId.FD_FICIC, SchemeId.COMP_CB_PLUS_FICIC):
        return _solve(design, truth, fairness, eps, hd=False)
    if scheme in (SchemeId.HD, SchemeId.COMP_CB):
        return _solve(design, truth, fairness, eps, hd=True)
    free = _solve(design.ici_free(), None if truth is None else truth.ici_free(), fairness, eps, hd=True)
    if scheme is SchemeId.EICIC:
        return SchemeResult(0.5 * free.rate, 0.5 * free.per_ue, free.p_out, free.iterations, free.nonconverged)
    fd = _solve(design, truth, fairness, eps, hd=False)
    return SchemeResult(0.5 * (free.rate + fd.rate), 0.5 * (free.per_ue + fd.per_ue),
                        max(free.p_out, fd.p_out), free.iterations + fd.iterations,
                        free.nonconverged + fd.nonconverged)
