"""Declarative experiment runner: scenario presets, sweeps, audits.

Configs are flat ``key = value`` text (one dotted key per line, ``#``
comments).  Recognized keys:

    scenario = table1 | fig3 | fig4_rp_sweep | fig5_contour |
               fig6_noise_grid | fig7_tdb_populations | custom
    tier     = effective | full | lab
    out      = output directory
    workers  = worker-pool size for grid scenarios
    seed     = integer (reserved for stochastic-sampling oracles)
    model.<field>  = ModelSpec override (r_p, K1, K2, Omega0, kappa, ...)
    run.dt / run.t_end / run.record_stride / run.audit_stride
    grid.<axis>    = comma list (1,1.5,2) or linspace shorthand lo:hi:n
    noise.lambda / noise.eta
    init.mixed = true | false

Scenario presets start from the baseline parameter set (C = 30,
kappa = 0.3*gamma, Omega0 = 0.1*g_sc, Omega0_MW = 0.2*Omega0,
delta = 0.4*Omega0, K1 = 1, K2 = 0.15) and run on the full squeezed-frame
tier by default; the five-state tier is available via ``tier = effective``
for fast qualitative runs.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .analysis import (RunSummary, StabilizationCriterion, cooperativity_report,
                       summarize)
from .control import law_for_model
from .dynamics import IntegratorConfig, NoiseSpec, Trajectory, integrate_closed_loop
from .errors import ConfigError
from .io import (fingerprint, summary_dict, write_noise_grid, write_summaries,
                 write_timeseries)
from .models import (CompiledModel, ModelSpec, build_effective_model,
                     build_lab_frame_model, build_squeezed_frame_model,
                     initial_state, reference_spec)

__all__ = [
    "SCENARIOS",
    "ExperimentConfig",
    "ResultRecord",
    "AuditReport",
    "parse_config",
    "resolve_text",
    "run_scenario",
    "convergence_audit",
    "build_model",
    "run_single",
    "default_run_params",
]

SCENARIOS = ("table1", "fig3", "fig4_rp_sweep", "fig5_contour",
             "fig6_noise_grid", "fig7_tdb_populations", "custom")

_TIER_ALIASES = {
    "effective": "effective",
    "full": "full_squeezed",
    "full_squeezed": "full_squeezed",
    "lab": "lab_frame",
    "lab_frame": "lab_frame",
}

_MODEL_FIELDS = {f.name for f in dataclasses.fields(ModelSpec)}
_RUN_FIELDS = {"dt", "t_end", "record_stride", "audit_stride", "store_states"}

# Table rows: (tag, r_p, K1, K2, default t_end)
_TABLE1_ROWS = (
    ("TDB", 0.0, 0.0, 0.0, 2600.0),
    ("PM", 0.0, 1.0, 0.15, 2000.0),
    ("PA", 2.0, 0.0, 0.0, 800.0),
    ("ADB", 2.0, 1.0, 0.15, 800.0),
)


@dataclass
class ExperimentConfig:
    scenario: str = "custom"
    tier: str = "full_squeezed"
    out: Optional[str] = None
    workers: int = 1
    seed: Optional[int] = None
    model: dict = field(default_factory=dict)
    run: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    noise_lambda: float = 0.0
    noise_eta: float = 0.0
    init_mixed: bool = False


@dataclass(frozen=True)
class ResultRecord:
    fingerprint: str
    summary: RunSummary
    files: dict[str, str]
    warnings: tuple[str, ...] = ()


def _parse_value(text: str):
    text = text.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if ":" in text and "," not in text:
        parts = text.split(":")
        if len(parts) == 3:
            lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
            if n < 1:
                raise ConfigError(f"linspace count must be >= 1 in {text!r}")
            return [float(x) for x in np.linspace(lo, hi, n)]
    if "," in text:
        return [float(p) for p in text.split(",") if p.strip()]
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def parse_config(text: str) -> ExperimentConfig:
    cfg = ExperimentConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        try:
            value = _parse_value(val)
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"line {lineno}: {exc}") from exc
        _apply_key(cfg, key, value, lineno)
    _validate(cfg)
    return cfg


def _apply_key(cfg: ExperimentConfig, key: str, value, lineno: int) -> None:
    if key == "scenario":
        cfg.scenario = str(value)
    elif key == "tier":
        cfg.tier = str(value)
    elif key == "out":
        cfg.out = str(value)
    elif key == "workers":
        cfg.workers = int(value)
    elif key == "seed":
        cfg.seed = int(value)
    elif key.startswith("model."):
        name = key[len("model."):]
        if name not in _MODEL_FIELDS:
            raise ConfigError(f"line {lineno}: unknown model field {name!r}")
        cfg.model[name] = value
    elif key.startswith("run."):
        name = key[len("run."):]
        if name not in _RUN_FIELDS:
            raise ConfigError(f"line {lineno}: unknown run field {name!r}")
        cfg.run[name] = value
    elif key.startswith("grid."):
        axis = key[len("grid."):]
        cfg.grid[axis] = value if isinstance(value, list) else [float(value)]
    elif key == "noise.lambda":
        cfg.noise_lambda = float(value)
    elif key == "noise.eta":
        cfg.noise_eta = float(value)
    elif key == "init.mixed":
        cfg.init_mixed = bool(value)
    else:
        raise ConfigError(f"line {lineno}: unknown key {key!r}")


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.scenario not in SCENARIOS:
        raise ConfigError(
            f"unknown scenario {cfg.scenario!r}; pick one of {SCENARIOS}"
        )
    if cfg.tier not in _TIER_ALIASES:
        raise ConfigError(
            f"unknown tier {cfg.tier!r}; pick one of {sorted(_TIER_ALIASES)}"
        )
    cfg.tier = _TIER_ALIASES[cfg.tier]
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    if cfg.scenario == "custom" and not cfg.grid:
        raise ConfigError("custom scenario needs at least one grid axis")
    for axis, values in cfg.grid.items():
        if not values:
            raise ConfigError(f"grid axis {axis!r} is empty")


def resolve_text(cfg: ExperimentConfig) -> str:
    """Canonical sorted key=value rendering (fingerprint input)."""
    lines = [
        f"scenario = {cfg.scenario}",
        f"tier = {cfg.tier}",
        f"workers = {cfg.workers}",
        f"seed = {cfg.seed}",
        f"init.mixed = {cfg.init_mixed}",
        f"noise.eta = {cfg.noise_eta!r}",
        f"noise.lambda = {cfg.noise_lambda!r}",
    ]
    lines += [f"model.{k} = {cfg.model[k]!r}" for k in sorted(cfg.model)]
    lines += [f"run.{k} = {cfg.run[k]!r}" for k in sorted(cfg.run)]
    lines += [f"grid.{k} = {cfg.grid[k]!r}" for k in sorted(cfg.grid)]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# single-run machinery


def build_model(spec: ModelSpec, tier: str) -> CompiledModel:
    tier = _TIER_ALIASES[tier]
    if tier == "effective":
        return build_effective_model(spec)
    if tier == "full_squeezed":
        return build_squeezed_frame_model(spec)
    return build_lab_frame_model(spec)


def default_run_params(model: CompiledModel, t_end: float,
                       record_every: float = 0.5,
                       overrides: Optional[dict] = None) -> IntegratorConfig:
    """Step size from the model's frequency scale, recording every ~0.5/g."""
    overrides = dict(overrides or {})
    dt = overrides.pop("dt", None)
    if dt is None:
        dt = min(0.05, 0.14 / model.frequency_scale)
    t_end = float(overrides.pop("t_end", t_end))
    stride = overrides.pop("record_stride", None)
    if stride is None:
        stride = max(1, int(round(record_every / dt)))
    audit = overrides.pop("audit_stride", max(stride * 20, 200))
    store = overrides.pop("store_states", False)
    return IntegratorConfig(dt=float(dt), t_end=t_end, record_stride=int(stride),
                            audit_stride=int(audit), store_states=bool(store))


def run_single(spec: ModelSpec, tier: str, tag: str, t_end: float,
               run_overrides: Optional[dict] = None,
               noise: Optional[NoiseSpec] = None,
               t_f: Optional[float] = None,
               mixed: bool = False,
               record_every: float = 0.5) -> tuple[RunSummary, Trajectory]:
    model = build_model(spec, tier)
    cfg = default_run_params(model, t_end, record_every, run_overrides)
    law = law_for_model(model)
    traj = integrate_closed_loop(model, law, initial_state(model, mixed), cfg,
                                 noise)
    return summarize(traj, tag, StabilizationCriterion(), t_f=t_f), traj


def _pool_map(fn, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(task) for task in tasks]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def _sweep_task(args):
    spec, tier, tag, t_end, run_overrides, noise_pair, t_f, mixed, rec = args
    noise = NoiseSpec(*noise_pair) if noise_pair else None
    return run_single(spec, tier, tag, t_end, run_overrides, noise, t_f,
                      mixed, rec)


def _noise_task(args):
    spec, tier, lam, eta, t_f, run_overrides = args
    summ, _ = run_single(spec, tier, f"ADB(lam={lam:g},eta={eta:g})", t_f,
                         run_overrides, NoiseSpec(lam, eta), t_f=t_f)
    return lam, eta, summ.fidelity


# ---------------------------------------------------------------------------
# scenarios


def _spec_for(cfg: ExperimentConfig, **kwargs) -> ModelSpec:
    over = dict(cfg.model)
    over.update(kwargs)
    r_p = over.pop("r_p", 2.0)
    K1 = over.pop("K1", 1.0)
    K2 = over.pop("K2", 0.15)
    return reference_spec(r_p=r_p, K1=K1, K2=K2, **over)


def _emit(out_dir: Path, name: str, traj: Trajectory, summary: RunSummary,
          fp: str, records: list, json_records: list, extra: dict | None = None):
    csv_path = write_timeseries(out_dir / f"{name}.csv", traj)
    js = summary_dict(summary, dict(extra or {}, fingerprint=fp))
    json_records.append(js)
    records.append(ResultRecord(fp, summary, {"timeseries": str(csv_path)},
                                summary.warnings))


def run_scenario(cfg: ExperimentConfig, out_dir: str | Path) -> list[ResultRecord]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fp = fingerprint(resolve_text(cfg))
    records: list[ResultRecord] = []
    json_records: list[dict] = []

    if cfg.scenario == "table1":
        tasks = []
        for tag, r_p, K1, K2, t_end in _TABLE1_ROWS:
            spec = _spec_for(cfg, r_p=r_p, K1=K1, K2=K2)
            tasks.append((spec, cfg.tier, tag, cfg.run.get("t_end", t_end),
                          dict(cfg.run), None, None, cfg.init_mixed, 0.5))
        results = _pool_map(_sweep_task, tasks, cfg.workers)
        for (tag, r_p, *_), (summary, traj) in zip(_TABLE1_ROWS, results):
            _emit(out_dir, tag, traj, summary, fp, records, json_records,
                  {"C_sc_over_C": math.cosh(r_p) ** 2})
        _write_table(out_dir / "table1.txt", json_records)

    elif cfg.scenario == "fig3":
        rows = [("ADB", 2.0, 1.0, 0.15, 800.0), ("TDB", 0.0, 0.0, 0.0, 2000.0)]
        tasks = [( _spec_for(cfg, r_p=r, K1=k1, K2=k2), cfg.tier, tag,
                   cfg.run.get("t_end", te), dict(cfg.run), None, None,
                   cfg.init_mixed, 0.5) for tag, r, k1, k2, te in rows]
        for (tag, *_), (summary, traj) in zip(
                rows, _pool_map(_sweep_task, tasks, cfg.workers)):
            _emit(out_dir, tag, traj, summary, fp, records, json_records)

    elif cfg.scenario == "fig4_rp_sweep":
        rps = cfg.grid.get("r_p", [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0])
        tasks = []
        labels = []
        for scheme, (K1, K2) in (("ADB", (1.0, 0.15)), ("PA", (0.0, 0.0))):
            for r_p in rps:
                if scheme == "ADB":
                    tag = "ADB" if r_p > 0 else "PM"
                else:
                    tag = "PA" if r_p > 0 else "TDB"
                t_end = cfg.run.get(
                    "t_end", 300.0 + 2400.0 / math.cosh(r_p))
                spec = _spec_for(cfg, r_p=r_p, K1=K1, K2=K2)
                labels.append((f"{tag}_rp{r_p:g}", r_p))
                tasks.append((spec, cfg.tier, tag, t_end, dict(cfg.run),
                              None, None, cfg.init_mixed, 0.5))
        results = _pool_map(_sweep_task, tasks, cfg.workers)
        for (name, r_p), (summary, traj) in zip(labels, results):
            ratio = math.cosh(r_p) ** 2
            _emit(out_dir, name, traj, summary, fp, records, json_records,
                  {"C_sc_over_C": ratio})

    elif cfg.scenario == "fig5_contour":
        rps = cfg.grid.get("r_p", [0.25 * i for i in range(13)])
        t_end = cfg.run.get("t_end", 600.0)
        tasks = [(_spec_for(cfg, r_p=r_p), cfg.tier, f"ADB_rp{r_p:g}", t_end,
                  dict(cfg.run), None, None, cfg.init_mixed, 1.0)
                 for r_p in rps]
        results = _pool_map(_sweep_task, tasks, cfg.workers)
        for r_p, (summary, traj) in zip(rps, results):
            _emit(out_dir, f"ADB_rp{r_p:g}", traj, summary, fp, records,
                  json_records, {"C_sc_over_C": math.cosh(r_p) ** 2})

    elif cfg.scenario == "fig6_noise_grid":
        lams = cfg.grid.get("lambda", [float(x) for x in np.linspace(0, 0.05, 11)])
        etas = cfg.grid.get("eta", [float(x) for x in np.linspace(0, 0.05, 11)])
        t_f = float(cfg.run.get("t_end", 160.0))
        spec = _spec_for(cfg)
        tasks = [(spec, cfg.tier, lam, eta, t_f, dict(cfg.run))
                 for lam in lams for eta in etas]
        results = _pool_map(_noise_task, tasks, cfg.workers)
        F = np.array([r[2] for r in results]).reshape(len(lams), len(etas))
        grid_path = write_noise_grid(out_dir / "noise_grid.csv", lams, etas, F)
        summ, traj = run_single(spec, cfg.tier, "ADB", t_f, dict(cfg.run),
                                NoiseSpec(0.0, 0.0), t_f=t_f)
        _emit(out_dir, "ADB_nominal", traj, summ, fp, records, json_records,
              {"noise_grid": str(grid_path),
               "F_grid_corners": {"F00": float(F[0, 0]),
                                  "F_lam": float(F[-1, 0]),
                                  "F_eta": float(F[0, -1]),
                                  "F_both": float(F[-1, -1])}})

    elif cfg.scenario == "fig7_tdb_populations":
        spec = _spec_for(cfg, r_p=0.0, K1=0.0, K2=0.0)
        summary, traj = run_single(spec, cfg.tier, "TDB",
                                   cfg.run.get("t_end", 2000.0),
                                   dict(cfg.run), mixed=cfg.init_mixed)
        _emit(out_dir, "TDB_populations", traj, summary, fp, records,
              json_records)

    elif cfg.scenario == "custom":
        axes = sorted(cfg.grid)
        values = [cfg.grid[a] for a in axes]
        meshes = [m.ravel() for m in np.meshgrid(*values, indexing="ij")]
        tasks = []
        names = []
        for point in zip(*meshes):
            over = dict(zip(axes, (float(v) for v in point)))
            spec = _spec_for(cfg, **over)
            name = "_".join(f"{a}{v:g}" for a, v in over.items())
            names.append(name)
            noise_pair = ((cfg.noise_lambda, cfg.noise_eta)
                          if (cfg.noise_lambda or cfg.noise_eta) else None)
            tasks.append((spec, cfg.tier, name,
                          cfg.run.get("t_end", 400.0), dict(cfg.run),
                          noise_pair, None, cfg.init_mixed, 0.5))
        results = _pool_map(_sweep_task, tasks, cfg.workers)
        for name, (summary, traj) in zip(names, results):
            _emit(out_dir, name, traj, summary, fp, records, json_records)
    else:
        raise ConfigError(f"unhandled scenario {cfg.scenario!r}")

    write_summaries(out_dir / "summary.json", json_records)
    return records


def _write_table(path: Path, json_records: list[dict]) -> None:
    lines = [f"{'scheme':<6} {'r_p':>4} {'C_sc/C':>7} {'t_S [1/g]':>10} "
             f"{'T':>8} {'F':>7}"]
    for rec in json_records:
        t_s = "none" if rec["t_S"] is None else f"{rec['t_S']:.1f}"
        t_dim = "none" if rec["T"] is None else f"{rec['T']:.0f}"
        lines.append(f"{rec['scenario']:<6} {rec['r_p']:>4.1f} "
                     f"{rec.get('C_sc_over_C', float('nan')):>7.2f} "
                     f"{t_s:>10} {t_dim:>8} {rec['fidelity']:>7.4f}")
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# convergence audit


@dataclass(frozen=True)
class AuditReport:
    cutoff_delta: float
    dt_delta: float
    order_ratio: float
    cutoff_passed: bool
    dt_passed: bool
    order_passed: bool

    @property
    def passed(self) -> bool:
        return self.cutoff_passed and self.dt_passed and self.order_passed


def convergence_audit(cfg: ExperimentConfig, t_end: float = 50.0,
                      cutoff_tol: float = 1e-3, dt_tol: float = 1e-6
                      ) -> AuditReport:
    """Self-comparison oracle: doubled Fock cutoff and halved step size.

    Only meaningful for the tiers that carry a mode; the effective tier is
    rejected (no cutoff axis).
    """
    if cfg.tier == "effective":
        raise ConfigError("convergence audit needs a tier with a Fock cutoff")
    spec = _spec_for(cfg)
    t_end = float(cfg.run.get("t_end", t_end))
    dt = cfg.run.get("dt")
    model = build_model(spec, cfg.tier)
    if dt is None:
        dt = min(0.02, 0.05 / model.frequency_scale)

    def pop_series(spec_, dt_):
        over = dict(cfg.run)
        over["dt"] = dt_
        over.pop("t_end", None)
        _, traj = run_single(spec_, cfg.tier, "audit", t_end, over,
                             record_every=1.0)
        return traj.populations["S"], float(traj.fidelity[-1])

    base, f_base = pop_series(spec, dt)
    doubled_spec = dataclasses.replace(spec, fock_cutoff=2 * spec.fock_cutoff)
    doubled, _ = pop_series(doubled_spec, dt)
    halved, f_half = pop_series(spec, dt / 2)
    _, f_quarter = pop_series(spec, dt / 4)

    n = min(len(base), len(doubled), len(halved))
    cutoff_delta = float(np.max(np.abs(base[:n] - doubled[:n])))
    dt_delta = float(np.max(np.abs(base[:n] - halved[:n])))
    d1 = abs(f_base - f_half)
    d2 = abs(f_half - f_quarter)
    order_ratio = d1 / d2 if d2 > 0 else float("inf")
    return AuditReport(
        cutoff_delta=cutoff_delta,
        dt_delta=dt_delta,
        order_ratio=order_ratio,
        cutoff_passed=cutoff_delta < cutoff_tol,
        dt_passed=dt_delta < dt_tol,
        order_passed=(8.0 <= order_ratio <= 32.0 or d2 < 1e-14),
    )
