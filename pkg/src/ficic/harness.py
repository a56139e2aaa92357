"""Monte Carlo sweeps, imperfect-CSI injection, configuration files and CSV output."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .baselines import SchemeId, evaluate_scheme
from .channel import GeometryConfig, NarrowbandScenario, RfImpairmentParams, dbm_to_w, pbs_x_for_inr
from .errors import ConfigError, FicicError, NonConvergence
from .multi import FairnessSpec
from .wideband import WidebandConfig, WidebandOptions, hd_water_filling, optimize_ladder, sample_wideband

NARROWBAND_AXES = ("snr_edge_db", "d_p1_m", "sir_self_db", "inr_db")
AXES = NARROWBAND_AXES + ("taps",)
CSV_COLUMNS = ("scheme", "cell", "axis_name", "axis_value", "trial",
               "sum_rate_bps_hz", "p_out_w", "iters", "ok")
CSI_MODEL_LABEL = "additive-gaussian(var=sigma_n2/P_pilot)"


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class SweepConfig:
    """One Monte Carlo sweep over a single axis.

    Pilot powers set the estimation-error variance ``sigma_n2 / P`` of each
    link when ``csi_mode == "estimated"``: ``est_pilot_power_dbm`` for the
    uplink pilots used to learn ``h_P``, ``mp_pilot_power_dbm`` for the
    MBS->PBS equivalent channel and ``feedback_power_dbm`` for the MBS->PUE
    coefficients fed back by the PUEs.
    """

    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    axis: str = "snr_edge_db"
    values: tuple = (20.0,)
    schemes: tuple = (SchemeId.FD_FICIC, SchemeId.HD)
    trials: int = 100
    seed: int = 0
    eps: float = 1e-4
    csi_mode: str = "perfect"
    est_pilot_power_dbm: float = 23.0
    mp_pilot_power_dbm: float = 23.0
    feedback_power_dbm: float = 23.0
    cells: tuple | None = None
    fairness: tuple | None = None
    wideband: WidebandConfig | None = None
    restarts: int = 3
    out: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "schemes", tuple(SchemeId.parse(s) if isinstance(s, str) else SchemeId(s)
                                                  for s in self.schemes))
        if self.cells is not None:
            object.__setattr__(self, "cells", tuple(int(c) for c in self.cells))
        if self.fairness is not None:
            object.__setattr__(self, "fairness", tuple(float(a) for a in self.fairness))
        self.validate()

    def validate(self) -> None:
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}, got {self.axis!r}")
        if not self.values:
            raise ValueError("at least one axis value is required")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("axis values must be finite")
        d = np.diff(self.values)
        if len(self.values) > 1 and not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError("axis values must be strictly monotone")
        if not self.schemes:
            raise ValueError("at least one scheme is required")
        if isinstance(self.trials, bool) or not isinstance(self.trials, (int, np.integer)) or self.trials < 1:
            raise ValueError(f"trials must be an integer >= 1, got {self.trials!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < 2 ** 64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if not (self.eps > 0 and math.isfinite(self.eps)):
            raise ValueError(f"eps must be positive, got {self.eps!r}")
        if self.csi_mode not in ("perfect", "estimated"):
            raise ValueError(f"csi_mode must be 'perfect' or 'estimated', got {self.csi_mode!r}")
        for name in ("est_pilot_power_dbm", "mp_pilot_power_dbm", "feedback_power_dbm"):
            v = getattr(self, name)
            if math.isnan(v) or v == -math.inf:
                raise ValueError(f"{name} must be a finite power or +inf, got {v!r}")
        if self.restarts < 0:
            raise ValueError("restarts must be non-negative")
        if self.axis == "taps":
            if any(v != int(v) or v < 1 for v in self.values):
                raise ValueError("taps values must be positive integers")
            bad = [s.value for s in self.schemes if s not in (SchemeId.FD_FICIC, SchemeId.HD)]
            if bad:
                raise ValueError(f"wideband sweeps support FD_FICIC and HD only, got {bad}")
            if self.csi_mode != "perfect":
                raise ValueError("wideband sweeps use perfect CSI")
            w = self.wideband_config()
            bound = min(w.cp_samples - w.tau_samples - w.spread_mp - w.spread_pk, w.n_subcarriers)
            if max(self.values) > bound:
                raise ValueError(f"values: filter order {int(max(self.values))} exceeds the cyclic-prefix "
                                 f"bound {max(bound, 0)} of the wideband channel")
        n_cells = self.geometry.n_cells
        if self.cells is not None:
            if not self.cells or any(not 0 <= c < n_cells for c in self.cells):
                raise ValueError(f"cells must index the {n_cells} PBSs, got {self.cells}")
        if self.fairness is not None:
            FairnessSpec(self.fairness)
            if len(self.fairness) != self.geometry.k_p:
                raise ValueError(f"{len(self.fairness)} fairness weights for k_p={self.geometry.k_p}")

    def replace(self, **changes) -> "SweepConfig":
        return dataclasses.replace(self, **changes)

    @property
    def active_cells(self) -> tuple:
        if self.axis == "taps":
            return (self.wideband_config().cell,)
        if self.cells is not None:
            return self.cells
        if self.axis in ("d_p1_m", "inr_db"):
            return (0,)    # only the first PBS moves along these axes
        return tuple(range(self.geometry.n_cells))

    def wideband_config(self) -> WidebandConfig:
        if self.wideband is not None:
            return self.wideband
        return WidebandConfig(geometry=self.geometry.replace(k_m=1, k_p=1))

    def geometry_at(self, value: float) -> GeometryConfig:
        """Base geometry with the axis variable set to ``value``."""
        g = self.geometry
        if self.axis == "snr_edge_db":
            return g.replace(snr_edge_db=value)
        if self.axis == "sir_self_db":
            return g.replace(sir_self_db=value, rf=None)
        if self.axis == "d_p1_m":
            return g.with_pbs_x(0, g.mbs_position[0] + value)
        if self.axis == "inr_db":
            return g.with_pbs_x(0, pbs_x_for_inr(g, value, cell=0))
        return g


# ---------------------------------------------------------------------------
# imperfect CSI

def _error_var(sigma_n2: float, p_dbm: float) -> float:
    if p_dbm == math.inf:
        return 0.0
    p = dbm_to_w(p_dbm)
    if not p > 0:
        raise ValueError("pilot power must be positive")
    return sigma_n2 / p


def perturb_csi(s: NarrowbandScenario, cfg: SweepConfig, rng: np.random.Generator) -> NarrowbandScenario:
    """Channels as estimated at the PBS: each entry gets CN(0, sigma_n2 / P_pilot) error.

    Infinite pilot powers return ``s`` unchanged.
    """
    if cfg.csi_mode != "estimated":
        raise ValueError("perturb_csi needs csi_mode = 'estimated'")
    v_p = _error_var(s.sigma_n2, cfg.est_pilot_power_dbm)
    v_mp = _error_var(s.sigma_n2, cfg.mp_pilot_power_dbm)
    v_m = _error_var(s.sigma_n2, cfg.feedback_power_dbm)
    if v_p == v_mp == v_m == 0.0:
        return s

    def err(shape, var):
        z = rng.standard_normal(shape + (2,))
        return math.sqrt(var / 2.0) * (z[..., 0] + 1j * z[..., 1])

    return s.replace(h_p=s.h_p + err(s.h_p.shape, v_p),
                     hbar_m=s.hbar_m + err(s.hbar_m.shape, v_m),
                     hbar_mp=s.hbar_mp + err(s.hbar_mp.shape, v_mp))


# ---------------------------------------------------------------------------
# results

@dataclass(frozen=True)
class ResultRow:
    scheme: str
    cell: int
    axis_name: str
    axis_value: float
    trial: int | str
    sum_rate_bps_hz: float
    p_out_w: float
    iters: float
    ok: int
    per_ue_rates: tuple = ()
    nonconverged: int = 0
    error: str = ""

    def csv_fields(self) -> list:
        return [self.scheme, self.cell, self.axis_name, _fmt(self.axis_value), self.trial,
                _fmt(self.sum_rate_bps_hz), _fmt(self.p_out_w), _fmt(self.iters), self.ok]


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


@dataclass
class SweepResult:
    config: SweepConfig
    rows: list
    summary: list
    elapsed_s: float = 0.0

    @property
    def nonconvergence_rate(self) -> float:
        if not self.rows:
            return 0.0
        return sum(1 for r in self.rows if r.nonconverged > 0) / len(self.rows)

    def mean(self, scheme, cell: int, axis_value: float) -> float:
        scheme = SchemeId.parse(scheme).value if isinstance(scheme, str) else SchemeId(scheme).value
        for r in self.summary:
            if r.trial == "mean" and r.scheme == scheme and r.cell == cell and r.axis_value == float(axis_value):
                return r.sum_rate_bps_hz
        raise KeyError((scheme, cell, axis_value))

    def metadata_line(self) -> str:
        c = self.config
        parts = [f"axis={c.axis}", f"seed={c.seed}", f"trials={c.trials}", f"eps={c.eps!r}",
                 f"csi_mode={c.csi_mode}"]
        if c.csi_mode == "estimated":
            parts += [f"csi_model={CSI_MODEL_LABEL}", f"est_pilot_power_dbm={c.est_pilot_power_dbm!r}",
                      f"mp_pilot_power_dbm={c.mp_pilot_power_dbm!r}", f"feedback_power_dbm={c.feedback_power_dbm!r}"]
        stamp = time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime())
        return "# ficic " + " ".join(parts) + f" created={stamp}"

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(self.metadata_line() + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows + self.summary:
            w.writerow(r.csv_fields())
        return buf.getvalue()

    def write_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())


def summarize(rows: list) -> list:
    """Mean and standard deviation rows per (scheme, cell, axis value) over successful trials."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r.scheme, r.cell, r.axis_name, r.axis_value), []).append(r)
    out = []
    for (scheme, cell, axis_name, value), grp in groups.items():
        good = [r for r in grp if r.ok]
        rate = np.array([r.sum_rate_bps_hz for r in good], dtype=float)
        pout = np.array([r.p_out_w for r in good], dtype=float)
        iters = np.array([r.iters for r in good], dtype=float)
        ok = int(len(good) > 0)
        if ok:
            mean = (float(np.mean(rate)), float(np.mean(pout)), float(np.mean(iters)))
            std = (float(np.std(rate)), float(np.std(pout)), float(np.std(iters)))
        else:
            mean = std = (math.nan, math.nan, math.nan)
        out.append(ResultRow(scheme, cell, axis_name, value, "mean", *mean, ok))
        out.append(ResultRow(scheme, cell, axis_name, value, "std", *std, ok))
    return out


# ---------------------------------------------------------------------------
# sweep execution

def trial_seed(seed: int, trial: int, stream: int = 0) -> np.random.SeedSequence:
    """Per-trial stream shared by every scheme and axis value (common random numbers)."""
    return np.random.SeedSequence([int(seed), int(trial), int(stream)])


def _failed(scheme, cell, axis, value, trial, exc) -> ResultRow:
    nonconv = 1 if isinstance(exc, NonConvergence) else 0
    return ResultRow(scheme, cell, axis, value, trial, math.nan, math.nan, 0.0, 0,
                     nonconverged=nonconv, error=f"{type(exc).__name__}: {exc}")


def _narrowband_job(cfg: SweepConfig, value: float, trial: int) -> list:
    rows = []
    cells = cfg.active_cells
    fairness = FairnessSpec(cfg.fairness) if cfg.fairness is not None else None
    try:
        geo = cfg.geometry_at(value)
    except ValueError as exc:
        return [_failed(s.value, c, cfg.axis, value, trial, exc) for s in cfg.schemes for c in cells]
    for scheme in cfg.schemes:
        rng = np.random.default_rng(trial_seed(cfg.seed, trial))
        perturb = None
        if cfg.csi_mode == "estimated":
            prng = np.random.default_rng(trial_seed(cfg.seed, trial, 1))
            perturb = lambda s, prng=prng: perturb_csi(s, cfg, prng)  # noqa: E731
        try:
            res = evaluate_scheme(scheme, geo, rng, cfg.eps, fairness, cells, perturb)
        except (FicicError, ValueError, np.linalg.LinAlgError) as exc:
            rows += [_failed(scheme.value, c, cfg.axis, value, trial, exc) for c in cells]
            continue
        for c, r in zip(cells, res):
            ok = int(math.isfinite(r.rate) and r.rate >= 0)
            rows.append(ResultRow(scheme.value, c, cfg.axis, value, trial, r.rate if ok else math.nan,
                                  r.p_out, float(r.iterations), ok, tuple(float(x) for x in r.per_ue),
                                  r.nonconverged))
    return rows


def _wideband_job(cfg: SweepConfig, trial: int) -> list:
    wcfg = cfg.wideband_config()
    orders = sorted(int(v) for v in cfg.values)
    rng = np.random.default_rng(trial_seed(cfg.seed, trial))
    cell = wcfg.cell
    try:
        ws = sample_wideband(wcfg, rng)
        opts = WidebandOptions(restarts=cfg.restarts, seed=int(trial_seed(cfg.seed, trial, 2).generate_state(1)[0]))
        if SchemeId.FD_FICIC in cfg.schemes:
            ladder = optimize_ladder(ws, orders, opts)
        else:
            ladder = {0: hd_water_filling(ws)}
    except (FicicError, ValueError, np.linalg.LinAlgError) as exc:
        return [_failed(s.value, cell, "taps", float(v), trial, exc) for v in cfg.values for s in cfg.schemes]
    rows = []
    n = ws.n
    for v in cfg.values:
        for scheme in cfg.schemes:
            res = ladder[0] if scheme is SchemeId.HD else ladder[int(v)]
            # rates are averaged over subcarriers; the budget is always spent in full
            rows.append(ResultRow(scheme.value, cell, "taps", float(v), trial, res.sum_rate / n, float(ws.p0),
                                  float(res.iterations), 1, (res.sum_rate / n,), int(not res.converged)))
    return rows


def _job(args):
    cfg, value, trial = args
    if cfg.axis == "taps":
        return _wideband_job(cfg, trial)
    return _narrowband_job(cfg, value, trial)


def thread_cap() -> int:
    """Worker count: ``FICIC_THREADS`` if set, else the CPU count."""
    env = os.environ.get("FICIC_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"FICIC_THREADS must be an integer, got {env!r}") from None
        return max(1, n)
    return max(1, os.cpu_count() or 1)


def run_sweep(cfg: SweepConfig, workers: int | None = None) -> SweepResult:
    """Run every (axis value, trial) job and append mean/std rows.

    Jobs are independent and seeded per trial, so the output does not depend
    on the worker count. Per-row solver errors are recorded, not raised.
    """
    t0 = time.perf_counter()
    if cfg.axis == "taps":
        jobs = [(cfg, None, t) for t in range(cfg.trials)]
    else:
        jobs = [(cfg, v, t) for v in cfg.values for t in range(cfg.trials)]
    workers = thread_cap() if workers is None else max(1, workers)
    workers = min(workers, len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            chunks = list(ex.map(_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        chunks = [_job(j) for j in jobs]
    rows = [r for chunk in chunks for r in chunk]
    if cfg.axis == "taps":
        # one job per trial covers every order; regroup by axis value
        order = {v: i for i, v in enumerate(cfg.values)}
        rows.sort(key=lambda r: (order[r.axis_value], r.trial))
    return SweepResult(cfg, rows, summarize(rows), time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# JSON configuration

_GEOMETRY_FIELDS = {f.name for f in dataclasses.fields(GeometryConfig)}
_WIDEBAND_FIELDS = {f.name for f in dataclasses.fields(WidebandConfig)}
_SWEEP_FIELDS = {f.name for f in dataclasses.fields(SweepConfig)}
_RF_FIELDS = {f.name for f in dataclasses.fields(RfImpairmentParams)}


def _line_of(text: str, key: str) -> int:
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return i
    return 0


def _where(text, key, path):
    line = _line_of(text, key)
    return f"line {line}, field '{path}'" if line else f"field '{path}'"


def _check_keys(obj, allowed, text, prefix):
    if not isinstance(obj, dict):
        raise ConfigError(f"{_where(text, prefix.split('.')[-1], prefix)}: expected an object")
    for k in obj:
        if k not in allowed:
            path = f"{prefix}.{k}" if prefix else k
            raise ConfigError(f"{_where(text, k, path)}: unknown field")


def _build(cls, kwargs, text, prefix):
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        msg = str(exc)
        key = next((k for k in kwargs if k in msg), None)
        if key is None:
            return_path = prefix or "<root>"
            raise ConfigError(f"field '{return_path}': {msg}") from None
        path = f"{prefix}.{key}" if prefix else key
        raise ConfigError(f"{_where(text, key, path)}: {msg}") from None


def _geometry_from(obj, text, prefix) -> GeometryConfig:
    _check_keys(obj, _GEOMETRY_FIELDS, text, prefix)
    kw = dict(obj)
    if "rf" in kw and kw["rf"] is not None:
        _check_keys(kw["rf"], _RF_FIELDS, text, f"{prefix}.rf")
        kw["rf"] = _build(RfImpairmentParams, kw["rf"], text, f"{prefix}.rf")
    for name in ("n_t", "n_r", "m", "k_m", "k_p"):
        if name in kw and isinstance(kw[name], float) and kw[name].is_integer():
            kw[name] = int(kw[name])
    return _build(GeometryConfig, kw, text, prefix)


def config_from_dict(obj: dict, text: str = "", base: SweepConfig | None = None) -> SweepConfig:
    """Sweep configuration from a parsed JSON document (unset fields keep ``base`` values)."""
    try:
        return _config_from_dict(obj, text, SweepConfig() if base is None else base)
    except ConfigError:
        raise
    except (TypeError, ValueError, AttributeError, IndexError, KeyError) as exc:
        # type mix-ups deeper than the field checks catch (e.g. a number where a point is expected)
        raise ConfigError(f"malformed configuration: {type(exc).__name__}: {exc}") from None


def _config_from_dict(obj: dict, text: str, base: SweepConfig) -> SweepConfig:
    _check_keys(obj, _SWEEP_FIELDS, text, "")
    kw = dict(obj)
    if "geometry" in kw:
        merged = {f.name: getattr(base.geometry, f.name) for f in dataclasses.fields(GeometryConfig)}
        if not isinstance(kw["geometry"], dict):
            raise ConfigError(f"{_where(text, 'geometry', 'geometry')}: expected an object")
        _check_keys(kw["geometry"], _GEOMETRY_FIELDS, text, "geometry")
        merged.update(kw["geometry"])
        kw["geometry"] = _geometry_from(merged, text, "geometry")
    if kw.get("wideband") is not None:
        wb = kw["wideband"]
        _check_keys(wb, _WIDEBAND_FIELDS, text, "wideband")
        wb = dict(wb)
        geo = kw.get("geometry", base.geometry)
        if "geometry" in wb:
            merged = {f.name: getattr(geo, f.name) for f in dataclasses.fields(GeometryConfig)}
            merged.update(wb["geometry"])
            wb["geometry"] = _geometry_from(merged, text, "wideband.geometry")
        else:
            wb["geometry"] = geo.replace(k_m=1, k_p=1)
        kw["wideband"] = _build(WidebandConfig, wb, text, "wideband")
    for name in ("values", "schemes", "cells", "fairness"):
        if name in kw and kw[name] is not None and not isinstance(kw[name], list):
            raise ConfigError(f"{_where(text, name, name)}: expected a list")
    if kw.get("schemes") is not None:
        for s in kw["schemes"]:
            try:
                SchemeId.parse(str(s))
            except ValueError as exc:
                raise ConfigError(f"{_where(text, 'schemes', 'schemes')}: {exc}") from None
    merged = {f.name: getattr(base, f.name) for f in dataclasses.fields(SweepConfig)}
    merged.update(kw)
    return _build(SweepConfig, merged, text, "")


def load_config(path: str, base: SweepConfig | None = None) -> SweepConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
    return parse_config(text, base)


def parse_config(text: str, base: SweepConfig | None = None) -> SweepConfig:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise ConfigError("line 1: the configuration must be a JSON object")
    return config_from_dict(obj, text, base)
