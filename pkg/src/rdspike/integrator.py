"""
Time stepping for the semi-discrete system.

w is discretized with consistent-mass linear finite elements,

    M w' = -D_w K w - M w - M diag(u^2) w + kappa1 M 1,

and u is an ODE at every mesh node, u_i' = f(u_i, w_i).

Two nonlinear strategies are available. ``semi`` (default) solves the w
equation with u^2 taken from the previous level and then updates u node by
node with scalar Newton: one tridiagonal solve per step. For Crank-Nicolson a
second w-solve with the predicted u restores second order. ``newton`` solves
the fully coupled theta-scheme; u is eliminated nodally, so every Newton
iteration is again a single tridiagonal solve.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .diagnostics import RunDiagnostics, SpikeCriteria, measure
from .grid import FemMatrices, Field, Mesh1D, PerturbationSpec, assemble_fem, build_initial_state
from .kinetics import Branch, ConstantSteadyState, ModelParams, branch_jacobian

log = logging.getLogger(__name__)

POSITIVITY_TOL = -1e-12


class Scheme(enum.Enum):
    IMPLICIT_EULER = "implicit_euler"
    CRANK_NICOLSON = "crank_nicolson"

    @property
    def theta(self) -> float:
        return 1.0 if self is Scheme.IMPLICIT_EULER else 0.5


class NonlinearMode(enum.Enum):
    SEMI_IMPLICIT = "semi"
    NEWTON = "newton"


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 2.5e-4
    t_end: float = 25.0
    scheme: Scheme = Scheme.IMPLICIT_EULER
    nonlinear_mode: NonlinearMode = NonlinearMode.SEMI_IMPLICIT
    newton_tol: float = 1e-12
    newton_max_iter: int = 30
    snapshot_times: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "nonlinear_mode", NonlinearMode(self.nonlinear_mode))
        object.__setattr__(self, "snapshot_times", tuple(float(t) for t in self.snapshot_times))
        if not (self.dt > 0 and self.t_end > 0):
            raise ValueError("dt and t_end must be positive")
        if self.dt > self.t_end:
            raise ValueError(f"dt={self.dt} exceeds t_end={self.t_end}")
        for t in self.snapshot_times:
            if not 0 <= t <= self.t_end:
                raise ValueError(f"snapshot time {t} outside [0, {self.t_end}]")

    def step_index(self, t: float) -> int:
        k = round(t / self.dt)
        if not math.isclose(k * self.dt, t, rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError(f"time {t} is not a multiple of dt={self.dt}")
        return int(k)

    @property
    def n_steps(self) -> int:
        return self.step_index(self.t_end)

    def output_steps(self) -> list[int]:
        """Step indices where snapshots are taken; always includes 0 and the end."""
        return sorted({0, self.n_steps, *(self.step_index(t) for t in self.snapshot_times)})


@dataclass
class State:
    t: float
    u: Field
    w: Field

    @property
    def mesh(self) -> Mesh1D:
        return self.u.mesh

    def copy(self) -> "State":
        return State(self.t, Field(self.mesh, self.u.values.copy()), Field(self.mesh, self.w.values.copy()))


class PositivityFault(FloatingPointError):
    def __init__(self, t: float, node: int, u: float, w: float):
        super().__init__(f"negative value at node {node}, t={t:.6g}: u={u:.3g}, w={w:.3g}")
        self.t = t
        self.node = node


class SimulationFault(RuntimeError):
    """A run aborted; partial snapshots and diagnostics are kept on the exception."""

    def __init__(self, cause: Exception, snapshots: list[State], diagnostics: RunDiagnostics):
        super().__init__(str(cause))
        self.cause = cause
        self.snapshots = snapshots
        self.diagnostics = diagnostics


def _check_positive(t: float, u: np.ndarray, w: np.ndarray) -> None:
    bad = np.flatnonzero((u < POSITIVITY_TOL) | (w < POSITIVITY_TOL) | ~np.isfinite(u + w))
    if bad.size:
        i = int(bad[0])
        raise PositivityFault(t, i, float(u[i]), float(w[i]))


def _newton_step(p: ModelParams, mats: FemMatrices, u0, w0, cfg: IntegratorConfig):
    kin = p.kinetics
    a1, d1, k1 = kin.a1, kin.d1, kin.kappa1
    dt, theta = cfg.dt, cfg.scheme.theta
    mass, stiff = mats.mass, mats.stiffness
    ones_mass = _kernels.banded_matvec(mass, np.ones_like(u0))
    work = np.empty_like(mass)
    # old-level contributions
    _kernels.w_operator(mass, stiff, p.d_w, u0, -dt * (1 - theta), work)
    rw_old = _kernels.banded_matvec(work, w0) + dt * k1 * ones_mass
    ru_old = u0 + dt * (1 - theta) * _kernels.reaction_u(u0, w0, a1, d1)
    dtt = dt * theta
    u, w = u0.copy(), w0.copy()
    for it in range(cfg.newton_max_iter):
        _kernels.w_operator(mass, stiff, p.d_w, u, dtt, work)
        r_w = _kernels.banded_matvec(work, w) - rw_old
        uw = u * w
        q = 1.0 + uw
        f = (a1 * uw / q - d1) * u
        f_u = a1 * uw / q - d1 + a1 * uw / (q * q)
        f_w = a1 * u * u / (q * q)
        r_u = u - dtt * f - ru_old
        # du = -(r_u - dtt f_w dw) / (1 - dtt f_u)
        g = 1.0 / (1.0 - dtt * f_u)
        # d r_w / d u_j = dtt * M_ij * 2 u_j w_j; fold du into the w system column-wise
        col = dtt * 2.0 * uw * g * dtt * f_w
        jac = work.copy()
        jac[1] += mass[1] * col
        jac[0, 1:] += mass[0, 1:] * col[1:]
        jac[2, :-1] += mass[2, :-1] * col[:-1]
        rhs = -r_w + _kernels.banded_matvec(mass, dtt * 2.0 * uw * g * r_u)
        dw = _kernels.thomas(jac, rhs)
        du = -g * (r_u - dtt * f_w * dw)
        u += du
        w += dw
        if np.max(np.abs(du)) <= cfg.newton_tol * max(1.0, np.max(np.abs(u))) and np.max(
            np.abs(dw)
        ) <= cfg.newton_tol * max(1.0, np.max(np.abs(w))):
            return u, w, it + 1
    raise ArithmeticError(f"coupled Newton did not converge in {cfg.newton_max_iter} iterations")


def _advance(p: ModelParams, mats: FemMatrices, u: np.ndarray, w: np.ndarray, t: float, n: int, cfg: IntegratorConfig):
    """Advance arrays u, w in place by n steps starting at time t."""
    if n == 0:
        return
    kin = p.kinetics
    if cfg.nonlinear_mode is NonlinearMode.SEMI_IMPLICIT:
        work = np.empty_like(mats.mass)
        done, fallbacks, bad = _kernels.semi_implicit_run(
            mats.mass, mats.stiffness, p.d_w, kin.a1, kin.d1, kin.kappa1,
            cfg.scheme.theta, cfg.dt, u, w, n, work,
        )
        if fallbacks:
            log.debug("%d nodal bisection fallbacks before t=%g", fallbacks, t + n * cfg.dt)
        if bad >= 0:
            t_bad = t + (done + 1) * cfg.dt
            raise PositivityFault(t_bad, bad, float("nan"), float("nan"))
        return
    for i in range(n):
        u_new, w_new, _ = _newton_step(p, mats, u, w, cfg)
        _check_positive(t + (i + 1) * cfg.dt, u_new, w_new)
        u[:] = u_new
        w[:] = w_new


def step(p: ModelParams, mats: FemMatrices, s: State, cfg: IntegratorConfig) -> State:
    """One time step of size cfg.dt."""
    u = s.u.values.copy()
    w = s.w.values.copy()
    _advance(p, mats, u, w, s.t, 1, cfg)
    return State(s.t + cfg.dt, Field(s.mesh, u), Field(s.mesh, w))


def run_from_state(
    p: ModelParams,
    state: State,
    cfg: IntegratorConfig,
    criteria: SpikeCriteria | None = None,
    mats: FemMatrices | None = None,
    keep_snapshots: bool = True,
) -> tuple[list[State], RunDiagnostics]:
    mats = mats or assemble_fem(state.mesh)
    criteria = criteria or SpikeCriteria.for_params(p.kinetics)
    mesh = state.mesh
    u = state.u.values.copy()
    w = state.w.values.copy()
    snapshots: list[State] = []
    diagnostics = RunDiagnostics()
    t0 = state.t
    done = 0
    for k in cfg.output_steps():
        try:
            _advance(p, mats, u, w, t0 + done * cfg.dt, k - done, cfg)
        except (FloatingPointError, ArithmeticError, ZeroDivisionError) as exc:
            raise SimulationFault(exc, snapshots, diagnostics) from exc
        done = k
        t = t0 + k * cfg.dt
        snap = State(t, Field(mesh, u.copy()), Field(mesh, w.copy()))
        diagnostics.append(measure(t, snap.u, snap.w, criteria))
        if keep_snapshots or k == cfg.n_steps:
            snapshots.append(snap)
    return snapshots, diagnostics


def simulate(
    p: ModelParams,
    mesh: Mesh1D,
    ic: PerturbationSpec,
    cfg: IntegratorConfig,
    criteria: SpikeCriteria | None = None,
    keep_snapshots: bool = True,
) -> tuple[list[State], RunDiagnostics]:
    """Run from the initial condition, recording diagnostics at 0, every snapshot time and t_end.

    The last snapshot is always the final state.
    """
    state = build_initial_state(p, mesh, ic)
    return run_from_state(p, state, cfg, criteria, keep_snapshots=keep_snapshots)


def simulate_linearized(
    p: ModelParams,
    mesh: Mesh1D,
    s: ConstantSteadyState,
    ic: tuple[Field, Field],
    cfg: IntegratorConfig,
) -> list[State]:
    """Frozen-coefficient linearization about a positive constant steady state.

    Snapshots hold the perturbations (phi, psi) of (u, w), not the full fields.
    The theta-scheme follows cfg.scheme; cfg.nonlinear_mode is irrelevant.
    """
    if s.branch is Branch.TRIVIAL:
        raise ValueError("linearization is only provided about the positive steady states")
    a = branch_jacobian(p.kinetics, s.w_bar)
    mats = assemble_fem(mesh)
    phi = ic[0].values.astype(float).copy()
    psi = ic[1].values.astype(float).copy()
    work = np.empty_like(mats.mass)
    out = []
    done = 0
    for k in cfg.output_steps():
        _kernels.linear_run(
            mats.mass, mats.stiffness, p.d_w, a[0, 0], a[0, 1], a[1, 0], a[1, 1],
            cfg.scheme.theta, cfg.dt, phi, psi, k - done, work,
        )
        done = k
        out.append(State(k * cfg.dt, Field(mesh, phi.copy()), Field(mesh, psi.copy())))
    return out


def diffusion_only_run(mesh: Mesh1D, d_w: float, w0: np.ndarray, dt: float, n_steps: int, theta: float = 1.0) -> np.ndarray:
    """Pure Neumann heat equation M w' = -d_w K w with the same FEM matrices and theta-scheme."""
    mats = assemble_fem(mesh)
    lhs = mats.mass + dt * theta * d_w * mats.stiffness
    w = np.asarray(w0, dtype=float).copy()
    # solving for the increment keeps rounding proportional to it, so the mass does not drift
    for _ in range(n_steps):
        w += _kernels.thomas(lhs, -dt * d_w * _kernels.banded_matvec(mats.stiffness, w))
    return w
