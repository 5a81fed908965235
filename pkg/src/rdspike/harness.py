"""
Scenario configuration, named presets and the command line.

Configuration files are flat ``key = value`` text; ``#`` starts a comment.
Recognised keys (all optional, defaults shown by ``dump_config``):

    a1, d1, kappa1, d_w          reduced model parameters
    full_model = true            switch to the three-equation rates below
    a, d_c, d_b, d, d_g, alpha, kappa, gamma
    ic.kind                      spline | cos | cosxx | eigenmode | trivial | minus
    ic.s, ic.eps, ic.eps1        spline bump (cos kinds use ic.eps)
    ic.k, ic.amplitude           eigenmode; trivial/minus shift u by ic.amplitude
    mesh_level                   h = 2^-mesh_level
    scheme                       implicit_euler | crank_nicolson
    nonlinear_mode               semi | newton
    dt, t_end
    snapshot_times               comma separated

Every float written by this module uses 17 significant digits so that two
runs of the same scenario give identical bytes.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import enum
import math
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .convergence import ConvergenceStudy, run_study
from .diagnostics import SpikeCriteria, growth_order, mass_bound_monitor
from .grid import (
    Cosine,
    CosineForm,
    Eigenmode,
    Mesh1D,
    PerturbationSpec,
    Spline,
    Uniform,
    initial_profiles,
    write_snapshot,
)
from .integrator import IntegratorConfig, NonlinearMode, Scheme, SimulationFault, simulate
from .kinetics import (
    Branch,
    FullModelParams,
    KineticParams,
    ModelParams,
    integrate_kinetics,
    reduce_full_params,
    steady_state,
)
from .stability import critical_diffusion, ddi_report, lambda_pm
from .steady_bvp import NoMonotoneSolution, periodic_profile, shoot_monotone


def fmt(x: float) -> str:
    return f"{x:.17g}"


class ConfigError(ValueError):
    pass


class Preset(enum.Enum):
    FIG1S = "Fig1s"
    MULTI_SPIKE_DW1 = "MultiSpikeDw1"
    COS = "Cos"
    COSXX = "CosXX"
    TRIV_STAB = "TrivStab"
    NEW_PARAMS = "NewParams"
    TABLE_SPIKE_POSITIONS = "TableSpikePositions"
    TABLE_SPIKE_COUNTS = "TableSpikeCounts"
    CONVERGENCE_SISP = "ConvergenceSisp"
    DISPERSION_PLOT = "DispersionPlot"


@dataclass(frozen=True)
class OutputPaths:
    csv: str = "diagnostics.csv"
    snapshot_dir: str = "snapshots"
    report: str = "report.txt"


@dataclass(frozen=True)
class ScenarioConfig:
    params: ModelParams | FullModelParams = ModelParams.of(2.0, 1.0, 3.0, 6.0)
    ic: PerturbationSpec = Spline(0.4, 0.1, 0.05)
    mesh_level: int = 10
    integrator: IntegratorConfig = IntegratorConfig()
    outputs: OutputPaths = OutputPaths()
    preset: Preset | None = None

    @property
    def model_params(self) -> ModelParams:
        if isinstance(self.params, FullModelParams):
            return reduce_full_params(self.params)
        return self.params

    @property
    def mesh(self) -> Mesh1D:
        return Mesh1D.from_level(self.mesh_level)


# --- config text -----------------------------------------------------------

REDUCED_KEYS = ("a1", "d1", "kappa1", "d_w")
FULL_KEYS = ("a", "d_c", "d_b", "d", "d_g", "alpha", "kappa", "gamma")
IC_KEYS = ("ic.kind", "ic.s", "ic.eps", "ic.eps1", "ic.k", "ic.amplitude")
RUN_KEYS = ("mesh_level", "scheme", "nonlinear_mode", "dt", "t_end", "snapshot_times")
IC_KINDS = ("spline", "cos", "cosxx", "eigenmode", "trivial", "minus")


def _parse_lines(text: str) -> dict[str, tuple[str, int]]:
    out: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} (first on line {out[key][1]})")
        out[key] = (value, lineno)
    return out


class _Reader:
    def __init__(self, entries: dict[str, tuple[str, int]]):
        self.entries = entries

    def has(self, key):
        return key in self.entries

    def _raw(self, key):
        return self.entries[key]

    def float(self, key, default):
        if key not in self.entries:
            return default
        value, lineno = self._raw(key)
        try:
            x = float(value)
        except ValueError:
            raise ConfigError(f"line {lineno}: {key}: not a number: {value!r}") from None
        if not math.isfinite(x):
            raise ConfigError(f"line {lineno}: {key}: must be finite")
        return x

    def int(self, key, default):
        if key not in self.entries:
            return default
        value, lineno = self._raw(key)
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"line {lineno}: {key}: not an integer: {value!r}") from None

    def str(self, key, default):
        return self.entries[key][0] if key in self.entries else default

    def floats(self, key):
        if key not in self.entries:
            return ()
        value, lineno = self._raw(key)
        try:
            return tuple(float(s) for s in value.split(",") if s.strip())
        except ValueError:
            raise ConfigError(f"line {lineno}: {key}: expected comma separated numbers") from None

    def where(self, key):
        return f"line {self.entries[key][1]}: " if key in self.entries else ""


def _positive(r: _Reader, key: str, value: float) -> float:
    if not value > 0:
        raise ConfigError(f"{r.where(key)}{key}: must be positive, got {value}")
    return value


def parse_config(text: str) -> ScenarioConfig:
    entries = _parse_lines(text)
    r = _Reader(entries)
    full = r.str("full_model", "false").lower()
    if full not in ("true", "false"):
        raise ConfigError(f"{r.where('full_model')}full_model: expected true or false")
    full = full == "true"
    allowed = set(IC_KEYS + RUN_KEYS + ("full_model",)) | set(FULL_KEYS if full else REDUCED_KEYS)
    for key, (_, lineno) in entries.items():
        if key not in allowed:
            hint = " (only valid with full_model = true)" if key in FULL_KEYS else ""
            raise ConfigError(f"line {lineno}: unknown key {key!r}{hint}")

    if full:
        vals = {}
        for k in FULL_KEYS:
            if not r.has(k):
                raise ConfigError(f"{k}: required when full_model = true")
            vals[k] = _positive(r, k, r.float(k, 0.0))
        params: ModelParams | FullModelParams = FullModelParams(**vals)
    else:
        a1 = _positive(r, "a1", r.float("a1", 2.0))
        d1 = _positive(r, "d1", r.float("d1", 1.0))
        kappa1 = _positive(r, "kappa1", r.float("kappa1", 3.0))
        d_w = _positive(r, "d_w", r.float("d_w", 6.0))
        params = ModelParams.of(a1, d1, kappa1, d_w)

    kind = r.str("ic.kind", "spline")
    if kind not in IC_KINDS:
        raise ConfigError(f"{r.where('ic.kind')}ic.kind: expected one of {', '.join(IC_KINDS)}, got {kind!r}")
    try:
        if kind == "spline":
            ic: PerturbationSpec = Spline(r.float("ic.s", 0.4), r.float("ic.eps", 0.1), r.float("ic.eps1", 0.05))
        elif kind in ("cos", "cosxx"):
            form = CosineForm.LINEAR if kind == "cos" else CosineForm.QUADRATIC
            ic = Cosine(form, r.float("ic.eps", 0.05))
        elif kind == "eigenmode":
            k = r.int("ic.k", 1)
            if k < 0:
                raise ValueError("ic.k: must be nonnegative")
            ic = Eigenmode(k, r.float("ic.amplitude", 1e-3))
        else:
            branch = Branch.TRIVIAL if kind == "trivial" else Branch.MINUS
            ic = Uniform(du=r.float("ic.amplitude", 0.0), branch=branch)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None

    level = r.int("mesh_level", 10)
    if not 1 <= level <= 20:
        raise ConfigError(f"{r.where('mesh_level')}mesh_level: must lie in [1, 20], got {level}")
    scheme = r.str("scheme", Scheme.IMPLICIT_EULER.value)
    mode = r.str("nonlinear_mode", NonlinearMode.SEMI_IMPLICIT.value)
    if scheme not in {s.value for s in Scheme}:
        raise ConfigError(f"{r.where('scheme')}scheme: expected implicit_euler or crank_nicolson, got {scheme!r}")
    if mode not in {m.value for m in NonlinearMode}:
        raise ConfigError(f"{r.where('nonlinear_mode')}nonlinear_mode: expected semi or newton, got {mode!r}")
    dt = _positive(r, "dt", r.float("dt", 2.5e-4))
    t_end = _positive(r, "t_end", r.float("t_end", 25.0))
    try:
        integ = IntegratorConfig(
            dt=dt, t_end=t_end, scheme=scheme, nonlinear_mode=mode, snapshot_times=r.floats("snapshot_times")
        )
        integ.n_steps
        integ.output_steps()
    except ValueError as exc:
        raise ConfigError(f"integrator: {exc}") from None
    return ScenarioConfig(params=params, ic=ic, mesh_level=level, integrator=integ)


def load_config(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def dump_config(cfg: ScenarioConfig) -> str:
    """Config text that ``parse_config`` maps back to ``cfg`` (outputs and preset excluded)."""
    lines = []
    p = cfg.params
    if isinstance(p, FullModelParams):
        lines.append("full_model = true")
        lines += [f"{k} = {fmt(getattr(p, k))}" for k in FULL_KEYS]
    else:
        kin = p.kinetics
        lines += [f"a1 = {fmt(kin.a1)}", f"d1 = {fmt(kin.d1)}", f"kappa1 = {fmt(kin.kappa1)}", f"d_w = {fmt(p.d_w)}"]
    ic = cfg.ic
    if isinstance(ic, Spline):
        lines += ["ic.kind = spline", f"ic.s = {fmt(ic.s)}", f"ic.eps = {fmt(ic.eps)}", f"ic.eps1 = {fmt(ic.eps1)}"]
    elif isinstance(ic, Cosine):
        kind = "cos" if ic.frequency_form is CosineForm.LINEAR else "cosxx"
        lines += [f"ic.kind = {kind}", f"ic.eps = {fmt(ic.eps)}"]
    elif isinstance(ic, Eigenmode):
        lines += ["ic.kind = eigenmode", f"ic.k = {ic.k}", f"ic.amplitude = {fmt(ic.amplitude)}"]
    elif isinstance(ic, Uniform):
        if ic.dw != 0.0 or ic.branch is Branch.PLUS:
            raise ValueError("only u shifts of the trivial or MINUS state have a config form")
        kind = "trivial" if ic.branch is Branch.TRIVIAL else "minus"
        lines += [f"ic.kind = {kind}", f"ic.amplitude = {fmt(ic.du)}"]
    it = cfg.integrator
    lines += [
        f"mesh_level = {cfg.mesh_level}",
        f"scheme = {it.scheme.value}",
        f"nonlinear_mode = {it.nonlinear_mode.value}",
        f"dt = {fmt(it.dt)}",
        f"t_end = {fmt(it.t_end)}",
    ]
    if it.snapshot_times:
        lines.append("snapshot_times = " + ", ".join(fmt(t) for t in it.snapshot_times))
    return "\n".join(lines) + "\n"


# --- presets ---------------------------------------------------------------

REFERENCE_KINETICS = KineticParams(2.0, 1.0, 3.0)
SECOND_KINETICS = KineticParams(2.5, 1.5, 4.0)
SPIKE_IC = Spline(0.4, 0.1, 0.05)
SPIKE_POSITION_SHIFTS = (0.2, 0.4, 0.5, 0.7, 0.85)
SPIKE_COUNT_DIVISORS = (1, 4, 9, 16, 25, 36)
GROWTH_PROBES = (0.250092, 0.5, 0.866028)
CONVERGENCE_LEVELS = (7, 8, 9, 10)
CONVERGENCE_REFERENCE = 13


def unit_critical_diffusion(p: KineticParams = REFERENCE_KINETICS) -> float:
    """First critical diffusion with Laplacian eigenvalues k^2 (5.8541... for the reference kinetics)."""
    return critical_diffusion(p, 1, mode_scale=1.0)


def _every(step: float, t_end: float) -> tuple[float, ...]:
    n = int(round(t_end / step))
    return tuple(step * i for i in range(1, n))


def _scenario(kin, d_w, ic, t_end=25.0, snap_step=1.0, preset=None, **integ) -> ScenarioConfig:
    return ScenarioConfig(
        params=ModelParams(kin, d_w),
        ic=ic,
        mesh_level=10,
        integrator=IntegratorConfig(dt=2.5e-4, t_end=t_end, snapshot_times=_every(snap_step, t_end), **integ),
        preset=preset,
    )


def preset_config(preset: Preset | str) -> ScenarioConfig:
    """Single-run scenario behind a preset; sweep presets return their first member."""
    preset = Preset(preset)
    if preset is Preset.FIG1S:
        return _scenario(REFERENCE_KINETICS, 6.0, SPIKE_IC, preset=preset)
    if preset is Preset.MULTI_SPIKE_DW1:
        return _scenario(REFERENCE_KINETICS, 1.0, SPIKE_IC, preset=preset)
    if preset is Preset.COS:
        return _scenario(REFERENCE_KINETICS, 2.0, Cosine(CosineForm.LINEAR, 0.05), snap_step=0.5, preset=preset)
    if preset is Preset.COSXX:
        return _scenario(REFERENCE_KINETICS, 2.0, Cosine(CosineForm.QUADRATIC, 0.05), snap_step=0.5, preset=preset)
    if preset is Preset.TRIV_STAB:
        return _scenario(SECOND_KINETICS, 2.0, Uniform(du=0.2, branch=Branch.TRIVIAL), preset=preset)
    if preset is Preset.NEW_PARAMS:
        return _scenario(SECOND_KINETICS, unit_critical_diffusion(), Spline(0.4, 0.05, 0.1), preset=preset)
    if preset is Preset.TABLE_SPIKE_POSITIONS:
        return _scenario(REFERENCE_KINETICS, 6.0, Spline(SPIKE_POSITION_SHIFTS[0], 0.1, 0.05), preset=preset)
    if preset is Preset.TABLE_SPIKE_COUNTS:
        return _scenario(REFERENCE_KINETICS, unit_critical_diffusion(), SPIKE_IC, preset=preset)
    if preset is Preset.CONVERGENCE_SISP:
        return _scenario(REFERENCE_KINETICS, 6.0, SPIKE_IC, preset=preset)
    if preset is Preset.DISPERSION_PLOT:
        return _scenario(REFERENCE_KINETICS, 2.0, SPIKE_IC, preset=preset)
    raise AssertionError(preset)


def spike_position_configs() -> list[ScenarioConfig]:
    base = preset_config(Preset.TABLE_SPIKE_POSITIONS)
    return [replace(base, ic=Spline(s, 0.1, 0.05)) for s in SPIKE_POSITION_SHIFTS]


def spike_count_configs() -> list[ScenarioConfig]:
    base = preset_config(Preset.TABLE_SPIKE_COUNTS)
    d1 = unit_critical_diffusion()
    return [replace(base, params=ModelParams(REFERENCE_KINETICS, d1 / n)) for n in SPIKE_COUNT_DIVISORS]


# --- runners ---------------------------------------------------------------


def run_scenario(cfg: ScenarioConfig, keep_snapshots: bool = True):
    p = cfg.model_params
    return simulate(p, cfg.mesh, cfg.ic, cfg.integrator, SpikeCriteria.for_params(p.kinetics), keep_snapshots)


def _final_summary(cfg: ScenarioConfig):
    """Worker entry point: (final spike positions, argmax of u) of one run."""
    _, diag = run_scenario(cfg, keep_snapshots=False)
    return diag.final.spike_positions, diag.final.argmax_u


def _map(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def spike_positions_csv(threads: int = 1) -> str:
    cfgs = spike_position_configs()
    rows = ["s,final_position,spike_count"]
    for cfg, (positions, argmax) in zip(cfgs, _map(_final_summary, cfgs, threads)):
        rows.append(f"{fmt(cfg.ic.s)},{fmt(argmax)},{len(positions)}")
    return "\n".join(rows) + "\n"


def spike_counts_csv(threads: int = 1) -> str:
    cfgs = spike_count_configs()
    rows = ["d_w,divisor,spike_count,spike_positions"]
    for n, cfg, (positions, _) in zip(SPIKE_COUNT_DIVISORS, cfgs, _map(_final_summary, cfgs, threads)):
        rows.append(f"{fmt(cfg.model_params.d_w)},{n},{len(positions)},{';'.join(fmt(x) for x in positions)}")
    return "\n".join(rows) + "\n"


def dispersion_csv(p: ModelParams, k_max: int = 64, mode_scale: float = math.pi**2) -> str:
    s = steady_state(p.kinetics, Branch.MINUS)
    rows = ["k,re_lambda_plus,im_lambda_plus,re_lambda_minus,im_lambda_minus"]
    for k in range(k_max + 1):
        d = lambda_pm(p, s, k, mode_scale)
        lp, lm = complex(d.lambda_plus), complex(d.lambda_minus)
        rows.append(f"{k},{fmt(lp.real)},{fmt(lp.imag)},{fmt(lm.real)},{fmt(lm.imag)}")
    return "\n".join(rows) + "\n"


def ddi_text(p: ModelParams) -> str:
    rep = ddi_report(p)
    kin = p.kinetics
    lines = [f"a1 = {fmt(kin.a1)}", f"d1 = {fmt(kin.d1)}", f"kappa1 = {fmt(kin.kappa1)}", f"d_w = {fmt(p.d_w)}"]
    if rep.steady_state is None:
        lines.append("positive_steady_states = none")
        return "\n".join(lines) + "\n"
    s = rep.steady_state
    lines += [
        f"u_minus = {fmt(s.u_bar)}",
        f"w_minus = {fmt(s.w_bar)}",
        f"kinetically_stable = {str(rep.kinetically_stable).lower()}",
        f"ddi = {str(rep.ddi).lower()}",
        f"first_unstable_mode = {rep.first_unstable_mode}",
        f"lambda_limit = {fmt(rep.lambda_limit)}",
        f"unstable_modes_up_to_{rep.k_max} = {len(rep.unstable_modes)}",
    ]
    lines += [f"critical_d_w_{k} = {fmt(d)}" for k, d in rep.d_w_thresholds]
    return "\n".join(lines) + "\n"


def growth_csv(cfg: ScenarioConfig, snapshots, probes=GROWTH_PROBES) -> str:
    u_bar = steady_state(cfg.model_params.kinetics, Branch.MINUS).u_bar
    u0 = snapshots[0].u
    rows = ["t," + ",".join(f"order_x{i}" for i in range(len(probes)))]
    for s in snapshots[1:]:
        orders = growth_order(s.u, u0, u_bar, s.t, probes)
        rows.append(fmt(s.t) + "," + ",".join(fmt(o) for o in orders))
    return "\n".join(rows) + "\n"


def convergence_study(
    cfg: ScenarioConfig, levels=CONVERGENCE_LEVELS, ref_level=CONVERGENCE_REFERENCE, threads: int = 1
) -> ConvergenceStudy:
    scenario = cfg.preset.value if cfg.preset else "config"
    return run_study(cfg.model_params, cfg.ic, levels, ref_level, cfg.integrator, scenario=scenario, threads=threads)


def profile_csv(profile) -> str:
    rows = ["x,u,w"]
    for x, u, w in zip(profile.mesh.nodes, profile.u.values, profile.w.values):
        rows.append(f"{fmt(x)},{fmt(u)},{fmt(w)}")
    return "\n".join(rows) + "\n"


def kinetics_csv(cfg: ScenarioConfig) -> str:
    """Space-free trajectory from the mesh average of the initial profiles."""
    p = cfg.model_params
    u0f, w0f = initial_profiles(p, cfg.ic)
    x = cfg.mesh.nodes
    scheme = {Scheme.IMPLICIT_EULER: "implicit_euler", Scheme.CRANK_NICOLSON: "crank_nicolson"}[cfg.integrator.scheme]
    traj = integrate_kinetics(
        p.kinetics, float(np.mean(u0f(x))), float(np.mean(w0f(x))), cfg.integrator.dt, cfg.integrator.t_end, scheme
    )
    rows = ["t,u,w"] + [f"{fmt(t)},{fmt(u)},{fmt(w)}" for t, u, w in zip(traj.t, traj.u, traj.w)]
    return "\n".join(rows) + "\n"


# --- command line ----------------------------------------------------------


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text)
    return path


def _write_run(out: Path, cfg: ScenarioConfig, snapshots, diag) -> None:
    _write(out, cfg.outputs.csv, diag.to_csv())
    snap_dir = out / cfg.outputs.snapshot_dir
    snap_dir.mkdir(parents=True, exist_ok=True)
    for i, s in enumerate(snapshots):
        write_snapshot(snap_dir / f"snapshot_{i:04d}.txt", s.t, s.u, s.w)
    p = cfg.model_params
    mb = mass_bound_monitor(diag, p.kinetics)
    final = diag.final
    report = dump_config(cfg) + "\n".join(
        [
            f"final_t = {fmt(final.t)}",
            f"final_max_u = {fmt(final.max_u)}",
            f"final_argmax_u = {fmt(final.argmax_u)}",
            f"final_spike_count = {final.spike_count}",
            f"final_spike_positions = {';'.join(fmt(x) for x in final.spike_positions)}",
            f"mass_bounds_ok = {str(mb.ok).lower()}",
        ]
    ) + "\n"
    _write(out, cfg.outputs.report, report)


def _config_from(args) -> ScenarioConfig:
    if args.config and args.preset:
        raise ConfigError("--config and --preset are mutually exclusive")
    if args.preset:
        try:
            return preset_config(Preset(args.preset))
        except ValueError:
            raise ConfigError(f"unknown preset {args.preset!r}") from None
    return load_config(args.config) if args.config else ScenarioConfig()


def cmd_analyze(args) -> None:
    cfg = _config_from(args)
    p = cfg.model_params
    out = Path(args.out)
    text = ddi_text(p)
    _write(out, "ddi_report.txt", text)
    if p.kinetics.has_positive_steady_states:
        _write(out, "dispersion.csv", dispersion_csv(p))
    sys.stdout.write(text)


def cmd_simulate(args) -> None:
    cfg = _config_from(args)
    snaps, diag = run_scenario(cfg)
    _write_run(Path(args.out), cfg, snaps, diag)


def cmd_kinetics(args) -> None:
    cfg = _config_from(args)
    _write(Path(args.out), "kinetics.csv", kinetics_csv(cfg))


def cmd_steady(args) -> None:
    cfg = _config_from(args)
    p = cfg.model_params
    n = args.modes
    base = shoot_monotone(ModelParams(p.kinetics, p.d_w * n * n), n_grid=args.n_grid)
    _write(Path(args.out), "steady_profile.csv", profile_csv(periodic_profile(base, n)))


def cmd_converge(args) -> None:
    cfg = _config_from(args)
    study = convergence_study(cfg, args.levels, args.ref_level, args.threads)
    out = Path(args.out)
    _write(out, "errors.csv", study.errors_csv())
    _write(out, "orders.csv", study.orders_csv())


def run_preset(name: str, out: Path, threads: int = 1) -> None:
    try:
        preset = Preset(name)
    except ValueError:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(p.value for p in Preset)}") from None
    cfg = preset_config(preset)
    if preset is Preset.TABLE_SPIKE_POSITIONS:
        _write(out, "spike_positions.csv", spike_positions_csv(threads))
    elif preset is Preset.TABLE_SPIKE_COUNTS:
        _write(out, "spike_counts.csv", spike_counts_csv(threads))
    elif preset is Preset.CONVERGENCE_SISP:
        study = convergence_study(cfg, threads=threads)
        _write(out, "errors.csv", study.errors_csv())
        _write(out, "orders.csv", study.orders_csv())
    elif preset is Preset.DISPERSION_PLOT:
        _write(out, "dispersion.csv", dispersion_csv(cfg.model_params))
        _write(out, "ddi_report.txt", ddi_text(cfg.model_params))
    else:
        snaps, diag = run_scenario(cfg)
        _write_run(out, cfg, snaps, diag)
        if preset in (Preset.COS, Preset.COSXX):
            _write(out, "growth_orders.csv", growth_csv(cfg, snaps))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario file (flat key = value)")
    common.add_argument("--preset", help="take the scenario from a named preset instead of a file")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker processes for sweeps")

    ap = argparse.ArgumentParser(prog="rdspike", description="spike formation in a reaction-diffusion-ODE model")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="steady states, DDI report and dispersion CSV")
    sub.add_parser("simulate", parents=[common], help="PDE run: diagnostics CSV and snapshots")
    sub.add_parser("kinetics", parents=[common], help="space-free ODE trajectory CSV")
    st = sub.add_parser("steady", parents=[common], help="nonconstant steady profile by shooting")
    st.add_argument("--modes", type=int, default=1)
    st.add_argument("--n-grid", type=int, default=2**14)
    cv = sub.add_parser("converge", parents=[common], help="mesh convergence study CSVs")
    cv.add_argument("--levels", type=int, nargs="+", default=list(CONVERGENCE_LEVELS))
    cv.add_argument("--ref-level", type=int, default=CONVERGENCE_REFERENCE)
    pr = sub.add_parser("preset", parents=[common], help="run a named scenario end to end")
    pr.add_argument("name", help=", ".join(p.value for p in Preset))
    return ap


COMMANDS = {
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "kinetics": cmd_kinetics,
    "steady": cmd_steady,
    "converge": cmd_converge,
}


def cli_main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        if args.command == "preset":
            run_preset(args.name, Path(args.out), args.threads)
        else:
            COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except (SimulationFault, NoMonotoneSolution, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical fault: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        # constraint violations raised by the model types themselves
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    return 0
