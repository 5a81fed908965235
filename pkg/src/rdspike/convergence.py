"""
Mesh convergence against a fine-mesh reference solution.

All meshes are dyadic, so every coarse node is also a reference node and the
reference is compared by nodal injection. Errors are exact norms of the
piecewise-linear difference on the coarse mesh; the observed order between
levels h and h/2 is log2(e_h / e_{h/2}).
"""

from __future__ import annotations

import concurrent.futures
import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .grid import Field, Mesh1D, PerturbationSpec, build_initial_state, l1_norm, l2_norm
from .integrator import IntegratorConfig, State, run_from_state
from .kinetics import ModelParams

DEFAULT_SAMPLE_TIMES = (1.0, 5.0, 10.0, 15.0, 20.0, 25.0)
ORDER_FLOOR = 1e-14


def restrict_to(coarse: Mesh1D, fine: Field) -> Field:
    if fine.mesh.n_cells % coarse.n_cells:
        raise ValueError(f"mesh with {fine.mesh.n_cells} cells is not nested in {coarse.n_cells} cells")
    stride = fine.mesh.n_cells // coarse.n_cells
    return Field(coarse, fine.values[::stride].copy())


@dataclass(frozen=True)
class ErrorRow:
    h: float
    t: float
    e_l1_u: float
    e_l2_u: float
    e_l1_w: float
    e_l2_w: float


@dataclass(frozen=True)
class OrderRow:
    h: float
    t: float
    order_l2_u: float
    order_l2_w: float


def observed_order(e_coarse: float, e_fine: float, ratio: float = 2.0) -> float:
    if e_coarse <= ORDER_FLOOR or e_fine <= ORDER_FLOOR:
        return math.nan
    return math.log(e_coarse / e_fine) / math.log(ratio)


@dataclass
class ConvergenceStudy:
    scenario: str
    mesh_levels: list[float]
    reference_level: float
    dt: float
    dt_ref: float
    sample_times: list[float]
    errors: list[ErrorRow] = field(default_factory=list)
    orders: list[OrderRow] = field(default_factory=list)

    def error(self, h: float, t: float) -> ErrorRow:
        return next(e for e in self.errors if math.isclose(e.h, h) and math.isclose(e.t, t))

    def order(self, h: float, t: float) -> OrderRow:
        return next(o for o in self.orders if math.isclose(o.h, h) and math.isclose(o.t, t))

    def errors_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["h", "t", "e_l1_u", "e_l2_u", "e_l1_w", "e_l2_w"])
        for e in self.errors:
            w.writerow([f"{v:.17g}" for v in (e.h, e.t, e.e_l1_u, e.e_l2_u, e.e_l1_w, e.e_l2_w)])
        return buf.getvalue()

    def orders_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["h", "t", "order_l2_u", "order_l2_w"])
        for o in self.orders:
            w.writerow([f"{v:.17g}" for v in (o.h, o.t, o.order_l2_u, o.order_l2_w)])
        return buf.getvalue()


def _snapshots_at(state: State, p: ModelParams, cfg: IntegratorConfig) -> dict[float, State]:
    snaps, _ = run_from_state(p, state, cfg)
    return {round(s.t, 12): s for s in snaps}


def study_from_solutions(
    scenario: str,
    solutions: dict[int, dict[float, State]],
    reference: dict[float, State],
    ref_level: int,
    sample_times,
    dt: float,
    dt_ref: float,
) -> ConvergenceStudy:
    """Tabulate errors and orders given precomputed snapshots keyed by level and time."""
    levels = sorted(solutions)
    study = ConvergenceStudy(
        scenario, [2.0**-lv for lv in levels], 2.0**-ref_level, dt, dt_ref, list(sample_times)
    )
    for lv in levels:
        mesh = Mesh1D.from_level(lv)
        for t in sample_times:
            key = round(t, 12)
            s, r = solutions[lv][key], reference[key]
            du = Field(mesh, s.u.values - restrict_to(mesh, r.u).values)
            dw = Field(mesh, s.w.values - restrict_to(mesh, r.w).values)
            study.errors.append(ErrorRow(mesh.h, t, l1_norm(du), l2_norm(du), l1_norm(dw), l2_norm(dw)))
    for coarse, fine in zip(levels, levels[1:]):
        for t in sample_times:
            ec = study.error(2.0**-coarse, t)
            ef = study.error(2.0**-fine, t)
            study.orders.append(
                OrderRow(2.0**-fine, t, observed_order(ec.e_l2_u, ef.e_l2_u), observed_order(ec.e_l2_w, ef.e_l2_w))
            )
    return study


def _run_level(job):
    p, ic, level, cfg = job
    return _snapshots_at(build_initial_state(p, Mesh1D.from_level(level), ic), p, cfg)


def run_study(
    p: ModelParams,
    ic: PerturbationSpec,
    levels,
    ref_level: int,
    cfg: IntegratorConfig,
    sample_times=DEFAULT_SAMPLE_TIMES,
    dt_ref: float | None = None,
    scenario: str = "",
    min_level_gap: int = 3,
    threads: int = 1,
) -> ConvergenceStudy:
    """Simulate every level and the reference, then compare at the sample times.

    The reference uses ``dt_ref`` (default: the same dt as the levels, so the
    temporal error largely cancels and the spatial order is what is measured).
    ``min_level_gap`` can be set to 0 for self-comparison checks.
    """
    levels = sorted(levels)
    if ref_level - max(levels) < min_level_gap:
        raise ValueError(f"reference level {ref_level} must exceed the finest level by >= {min_level_gap}")
    dt_ref = dt_ref or cfg.dt
    sample_times = [float(t) for t in sample_times]
    t_end = max(sample_times)
    level_cfg = IntegratorConfig(
        dt=cfg.dt, t_end=t_end, scheme=cfg.scheme, nonlinear_mode=cfg.nonlinear_mode,
        snapshot_times=tuple(sample_times),
    )
    ref_cfg = IntegratorConfig(
        dt=dt_ref, t_end=t_end, scheme=cfg.scheme, nonlinear_mode=cfg.nonlinear_mode,
        snapshot_times=tuple(sample_times),
    )
    jobs = [(p, ic, ref_level, ref_cfg)] + [(p, ic, lv, level_cfg) for lv in levels]
    if threads > 1:
        # results come back in submission order, so the study is independent of scheduling
        with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(_run_level, jobs))
    else:
        runs = [_run_level(j) for j in jobs]
    reference = runs[0]
    solutions = dict(zip(levels, runs[1:]))
    return study_from_solutions(scenario, solutions, reference, ref_level, sample_times, cfg.dt, dt_ref)


def heat_equation_study(levels, d_w: float = 1.0, t: float = 0.1, dt: float = 1e-4) -> dict[float, float]:
    """L2 error of the FEM heat solver against exp(-pi^2 d_w t) cos(pi x), by mesh size.

    Crank-Nicolson in time so the temporal error stays below the spatial one.
    """
    from .integrator import diffusion_only_run

    out = {}
    n_steps = int(round(t / dt))
    for lv in levels:
        mesh = Mesh1D.from_level(lv)
        w0 = np.cos(np.pi * mesh.nodes)
        w = diffusion_only_run(mesh, d_w, w0, dt, n_steps, theta=0.5)
        exact = math.exp(-math.pi**2 * d_w * n_steps * dt) * np.cos(np.pi * mesh.nodes)
        out[mesh.h] = l2_norm(Field(mesh, w - exact))
    return out
