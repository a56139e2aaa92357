"""Random sweep configurations within the documented ranges."""

import math

import numpy as np

from ficic.baselines import SchemeId
from ficic.channel import GeometryConfig
from ficic.harness import NARROWBAND_AXES, SweepConfig
from ficic.wideband import WidebandConfig

NB_SCHEMES = [s.value for s in SchemeId]

AXIS_RANGES = {
    "snr_edge_db": (-10.0, 40.0),
    "d_p1_m": (1.0, 480.0),
    "sir_self_db": (20.0, 130.0),
    "inr_db": (-10.0, 45.0),
}


def _values(rng, axis, count):
    lo, hi = AXIS_RANGES[axis]
    v = np.sort(rng.uniform(lo, hi, count))
    if count > 1 and np.any(np.diff(v) == 0):
        v = np.linspace(lo, hi, count)
    return tuple(float(x) for x in v)


def random_geometry(rng) -> GeometryConfig:
    k_p = int(rng.integers(1, 4))
    base = GeometryConfig()
    pues = tuple(cell + ((pbs[0] + 30.0, pbs[1] + 10.0),) for cell, pbs in zip(base.pue_positions,
                                                                               base.pbs_positions))
    sir = None if rng.random() < 0.3 else float(rng.uniform(20.0, 130.0))
    return base.replace(
        k_p=k_p, k_m=int(rng.integers(1, 3)), n_t=int(rng.integers(k_p, k_p + 3)), n_r=int(rng.integers(1, 4)),
        m=int(rng.integers(2, 6)), pue_positions=pues, sir_self_db=sir,
        snr_edge_db=float(rng.uniform(-10.0, 40.0)), p0_dbm=float(rng.uniform(10.0, 40.0)),
        penetration_loss_db=float(rng.uniform(0.0, 30.0)), phi=float(rng.uniform(-math.pi, math.pi)),
        ici_scale=float(rng.choice([0.0, 1.0, rng.uniform(0.0, 10.0)])),
    )


def random_config(rng, wideband_prob: float = 0.01) -> SweepConfig:
    seed = int(rng.integers(0, 2 ** 63))
    if rng.random() < wideband_prob:
        geo = GeometryConfig(k_m=1, k_p=1, n_t=int(rng.integers(1, 3)), n_r=int(rng.integers(1, 3)),
                             sir_self_db=float(rng.uniform(40.0, 120.0)),
                             snr_edge_db=float(rng.uniform(0.0, 30.0)))
        wb = WidebandConfig(geometry=geo, n_subcarriers=int(rng.integers(1, 9)),
                            tau_samples=int(rng.integers(0, 5)), spread_mp=int(rng.integers(0, 4)),
                            spread_pk=int(rng.integers(0, 7)))
        bound = min(wb.cp_samples - wb.tau_samples - wb.spread_mp - wb.spread_pk, wb.n_subcarriers)
        pool = [1, 2, 3][:bound]
        orders = tuple(float(v) for v in sorted(rng.choice(pool, size=int(rng.integers(1, len(pool) + 1)),
                                                           replace=False)))
        return SweepConfig(geometry=geo, axis="taps", values=orders, schemes=("FD_FICIC", "HD"), trials=1,
                           seed=seed, wideband=wb, restarts=int(rng.integers(0, 2)))
    geo = random_geometry(rng)
    axis = str(rng.choice(NARROWBAND_AXES))
    schemes = tuple(rng.choice(NB_SCHEMES, size=int(rng.integers(1, 3)), replace=False))
    csi = "estimated" if rng.random() < 0.3 else "perfect"
    pilots = [float(rng.choice([math.inf, rng.uniform(-20.0, 40.0)])) for _ in range(3)]
    fairness = None
    if geo.k_p > 1 and rng.random() < 0.3:
        a = rng.dirichlet(np.ones(geo.k_p))
        if rng.random() < 0.2:
            a[0] = 0.0
        a = a / a.sum()
        a[-1] = 1.0 - a[:-1].sum()
        fairness = tuple(float(x) for x in a)
    return SweepConfig(geometry=geo, axis=axis, values=_values(rng, axis, int(rng.integers(1, 3))),
                       schemes=schemes, trials=1, seed=seed, csi_mode=csi, est_pilot_power_dbm=pilots[0],
                       mp_pilot_power_dbm=pilots[1], feedback_power_dbm=pilots[2], fairness=fairness,
                       eps=float(10.0 ** rng.uniform(-4, -2)))
