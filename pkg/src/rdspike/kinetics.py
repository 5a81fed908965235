"""
Space-free part of the model.

Reaction terms, their Jacobian, the constant steady states, kinetic ODE
trajectories, and the reduction of the three-equation receptor model to the
two-equation form

    u_t = (a1 u w / (1 + u w) - d1) u
    w_t = D_w w_xx - w - u^2 w + kappa1
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

DISCRIMINANT_TOL = 1e-12
MARGINAL_TOL = 1e-12


def _require_positive(**values: float) -> None:
    for name, value in values.items():
        if not (value > 0 and math.isfinite(value)):
            raise ValueError(f"{name} must be a positive finite number, got {value!r}")


@dataclass(frozen=True)
class KineticParams:
    a1: float
    d1: float
    kappa1: float

    def __post_init__(self):
        _require_positive(a1=self.a1, d1=self.d1, kappa1=self.kappa1)

    @property
    def uw_product(self) -> float:
        """The value d1/(a1-d1) taken by u*w on every positive steady state."""
        return self.d1 / (self.a1 - self.d1)

    @property
    def has_positive_steady_states(self) -> bool:
        return self.a1 > self.d1 and self.kappa1 > 2.0 * self.uw_product


@dataclass(frozen=True)
class ModelParams:
    kinetics: KineticParams
    d_w: float

    def __post_init__(self):
        _require_positive(d_w=self.d_w)

    @classmethod
    def of(cls, a1: float, d1: float, kappa1: float, d_w: float) -> "ModelParams":
        return cls(KineticParams(a1, d1, kappa1), d_w)


@dataclass(frozen=True)
class FullModelParams:
    """Rates of the three-equation model (u, v, w) before the fast v is eliminated."""

    a: float
    d_c: float
    d_b: float
    d: float
    d_g: float
    alpha: float
    kappa: float
    gamma: float

    def __post_init__(self):
        _require_positive(**{k: getattr(self, k) for k in self.__dataclass_fields__})

    @property
    def sigma(self) -> float:
        return (self.d_b + self.d) / self.alpha


class Branch(enum.Enum):
    TRIVIAL = "trivial"
    MINUS = "minus"
    PLUS = "plus"


class Stability(enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    MARGINAL = "marginal"


@dataclass(frozen=True)
class ConstantSteadyState:
    u_bar: float
    w_bar: float
    branch: Branch


def reaction_rhs(p: KineticParams, u, w):
    """Reaction terms (du, dw) without diffusion. Works elementwise on arrays."""
    uw = u * w
    du = (p.a1 * uw / (1.0 + uw) - p.d1) * u
    dw = -w - u * u * w + p.kappa1
    return du, dw


def kinetic_jacobian(p: KineticParams, u: float, w: float) -> np.ndarray:
    """Analytic 2x2 Jacobian of :func:`reaction_rhs` with respect to (u, w)."""
    uw = u * w
    q = 1.0 + uw
    a11 = p.a1 * uw / q - p.d1 + p.a1 * uw / (q * q)
    a12 = p.a1 * u * u / (q * q)
    a21 = -2.0 * uw
    a22 = -1.0 - u * u
    return np.array([[a11, a12], [a21, a22]])


def branch_jacobian(p: KineticParams, w: float) -> np.ndarray:
    """Jacobian at the on-branch point (d1/((a1-d1) w), w), written in closed form."""
    c = p.uw_product
    return np.array(
        [
            [(p.a1 - p.d1) * p.d1 / p.a1, p.d1**2 / (p.a1 * w * w)],
            [-2.0 * c, -(1.0 + (c / w) ** 2)],
        ]
    )


def reduce_full_params(f: FullModelParams) -> ModelParams:
    """Quasi-steady elimination of v followed by the time and amplitude rescaling.

    Time is measured in units of 1/d_g; the reduced unknowns are
    u_hat = sqrt(d_b/(sigma d_g)) u and w_hat = sqrt(d_g/(d_b sigma)) w.
    """
    sigma = f.sigma
    return ModelParams(
        KineticParams(
            a1=f.a / f.d_g,
            d1=f.d_c / f.d_g,
            kappa1=f.kappa / math.sqrt(f.d_g * f.d_b * sigma),
        ),
        d_w=1.0 / (f.gamma * f.d_g),
    )


def full_model_rhs(f: FullModelParams, u, v, w):
    """Kinetic right-hand side of the three-equation model (no diffusion)."""
    du = (f.a * v / (u + v) - f.d_c) * u
    dv = -f.d_b * v + f.alpha * u * u * w - f.d * v
    dw = -f.d_g * w - f.alpha * u * u * w + f.d * v + f.kappa
    return du, dv, dw


def full_to_reduced_variables(f: FullModelParams, t, u, w):
    """Map (t, u, w) of the quasi-steady full model to reduced (t_hat, u_hat, w_hat)."""
    sigma = f.sigma
    return (
        f.d_g * np.asarray(t),
        math.sqrt(f.d_b / (sigma * f.d_g)) * np.asarray(u),
        math.sqrt(f.d_g / (f.d_b * sigma)) * np.asarray(w),
    )


def constant_steady_states(p: KineticParams) -> list[ConstantSteadyState]:
    """All spatially constant steady states, trivial state first.

    The two positive states exist only when a1 > d1 and kappa1 > 2 d1/(a1-d1);
    at the degenerate boundary a single state tagged MINUS is returned.
    """
    states = [ConstantSteadyState(0.0, p.kappa1, Branch.TRIVIAL)]
    if p.a1 <= p.d1:
        return states
    c = p.uw_product
    half = 0.5 * p.kappa1
    disc = half * half - c * c
    if disc < -DISCRIMINANT_TOL:
        return states
    if abs(disc) <= DISCRIMINANT_TOL:
        states.append(ConstantSteadyState(c / half, half, Branch.MINUS))
        return states
    root = math.sqrt(disc)
    w_plus = half + root
    # c^2 / w_plus avoids cancellation in half - root
    w_minus = c * c / w_plus
    states.append(ConstantSteadyState(c / w_minus, w_minus, Branch.MINUS))
    states.append(ConstantSteadyState(c / w_plus, w_plus, Branch.PLUS))
    return states


def steady_state(p: KineticParams, branch: Branch | str) -> ConstantSteadyState:
    branch = Branch(branch)
    for s in constant_steady_states(p):
        if s.branch is branch:
            return s
    raise ValueError(f"no {branch.value} steady state for {p}")


def _check_consistent(p: KineticParams, s: ConstantSteadyState) -> None:
    du, dw = reaction_rhs(p, s.u_bar, s.w_bar)
    scale = max(1.0, p.kappa1, s.u_bar, s.w_bar)
    if abs(du) > 1e-10 * scale or abs(dw) > 1e-10 * scale:
        raise ValueError(f"{s} is not a steady state of {p} (residual {du:.3g}, {dw:.3g})")
    if s.branch is Branch.TRIVIAL and s.u_bar != 0.0:
        raise ValueError("trivial steady state must have u_bar == 0")
    if s.branch is not Branch.TRIVIAL and s.u_bar <= 0.0:
        raise ValueError(f"{s.branch.value} steady state must have u_bar > 0")


def minus_branch_conditions(p: KineticParams) -> tuple[bool, bool]:
    """The two closed-form sufficient conditions for kinetic stability of the MINUS state.

    Evaluated literally. For d1 <= 1 the threshold d1^2/(d1-1) is not a
    positive number, so the first clause of the second condition can only
    hold for d1 > 1.
    """
    a1, d1, k1 = p.a1, p.d1, p.kappa1
    first = k1 * k1 > 2.0 * d1**3 / (a1 * (a1 - d1))
    second = False
    if d1 > 1.0 and a1 > d1 * d1 / (d1 - 1.0):
        denom = a1 - d1 * (a1 - d1)
        if denom > 0:
            second = k1 * k1 > d1**4 / a1 / denom
    return first, second


def _classify_by_jacobian(jac: np.ndarray) -> Stability:
    tr = jac[0, 0] + jac[1, 1]
    det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
    if abs(tr) < MARGINAL_TOL or abs(det) < MARGINAL_TOL:
        return Stability.MARGINAL
    if det < 0 or tr > 0:
        return Stability.UNSTABLE
    return Stability.STABLE


def classify_kinetic_stability(p: KineticParams, s: ConstantSteadyState) -> Stability:
    """Linear stability of a constant steady state for the kinetic ODE.

    TRIVIAL is always stable and PLUS always a saddle. MINUS uses the
    closed-form conditions, cross-checked against trace/determinant of the
    Jacobian; disagreement raises ``ArithmeticError``.
    """
    _check_consistent(p, s)
    jac = kinetic_jacobian(p, s.u_bar, s.w_bar)
    by_jacobian = _classify_by_jacobian(jac)
    if by_jacobian is Stability.MARGINAL:
        return Stability.MARGINAL
    if s.branch is Branch.TRIVIAL:
        closed_form = Stability.STABLE
    elif s.branch is Branch.PLUS:
        closed_form = Stability.UNSTABLE
    else:
        closed_form = Stability.STABLE if any(minus_branch_conditions(p)) else Stability.UNSTABLE
    if closed_form is not by_jacobian:
        raise ArithmeticError(
            f"closed-form classification {closed_form.value} disagrees with "
            f"Jacobian trace/det ({by_jacobian.value}) for {p}, {s}"
        )
    return closed_form


@dataclass
class KineticTrajectory:
    t: np.ndarray
    u: np.ndarray
    w: np.ndarray
    scheme: str
    dt: float
    halvings: int = field(default=0)


KINETIC_SCHEMES = (
    "rk4",
    "implicit_euler",
    "crank_nicolson",
    "semi_implicit_euler",
    "semi_implicit_crank_nicolson",
)


def _rk4_step(p, u, w, dt):
    k1 = reaction_rhs(p, u, w)
    k2 = reaction_rhs(p, u + 0.5 * dt * k1[0], w + 0.5 * dt * k1[1])
    k3 = reaction_rhs(p, u + 0.5 * dt * k2[0], w + 0.5 * dt * k2[1])
    k4 = reaction_rhs(p, u + dt * k3[0], w + dt * k3[1])
    return (
        u + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
        w + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
    )


def _theta_step(p, u, w, dt, theta):
    # Fully coupled theta-method with 2x2 Newton, starting from the old state.
    fu, fw = reaction_rhs(p, u, w)
    bu = u + dt * (1.0 - theta) * fu
    bw = w + dt * (1.0 - theta) * fw
    un, wn = u, w
    for _ in range(50):
        gu, gw = reaction_rhs(p, un, wn)
        r = np.array([un - dt * theta * gu - bu, wn - dt * theta * gw - bw])
        jac = np.eye(2) - dt * theta * kinetic_jacobian(p, un, wn)
        delta = np.linalg.solve(jac, r)
        un -= delta[0]
        wn -= delta[1]
        if abs(delta[0]) <= 1e-14 * max(1.0, abs(un)) and abs(delta[1]) <= 1e-14 * max(1.0, abs(wn)):
            break
    return un, wn


def _implicit_u(p, b, w, dtt):
    # scalar Newton for un - dtt * f(un, w) = b, started from b
    un = b
    for _ in range(50):
        uw = un * w
        q = 1.0 + uw
        g = un - dtt * (p.a1 * uw / q - p.d1) * un - b
        dg = 1.0 - dtt * (p.a1 * uw / q - p.d1 + p.a1 * uw / (q * q))
        step = g / dg
        un -= step
        if abs(step) <= 1e-15 * max(1.0, abs(un)):
            break
    return un


def _semi_implicit_step(p, u, w, dt):
    # Same splitting as the PDE integrator: w with lagged u^2, then implicit u.
    w_new = (w + dt * p.kappa1) / (1.0 + dt * (1.0 + u * u))
    return _implicit_u(p, u, w_new, dt), w_new


def _semi_implicit_cn_step(p, u, w, dt):
    # Trapezoidal predictor-corrector of the PDE integrator, on a single node.
    half = 0.5 * dt
    rhs = w - half * (1.0 + u * u) * w + dt * p.kappa1
    b = u + half * reaction_rhs(p, u, w)[0]
    w_star = rhs / (1.0 + half * (1.0 + u * u))
    u_star = _implicit_u(p, b, w_star, half)
    w_new = rhs / (1.0 + half * (1.0 + u_star * u_star))
    return _implicit_u(p, b, w_new, half), w_new


def _one_step(p, u, w, dt, scheme):
    if scheme == "rk4":
        return _rk4_step(p, u, w, dt)
    if scheme == "implicit_euler":
        return _theta_step(p, u, w, dt, 1.0)
    if scheme == "crank_nicolson":
        return _theta_step(p, u, w, dt, 0.5)
    if scheme == "semi_implicit_crank_nicolson":
        return _semi_implicit_cn_step(p, u, w, dt)
    return _semi_implicit_step(p, u, w, dt)


def integrate_kinetics(
    p: KineticParams,
    u0: float,
    w0: float,
    dt: float = 1e-3,
    t_end: float = 1.0,
    scheme: str = "rk4",
    max_halvings: int = 20,
) -> KineticTrajectory:
    """Integrate the kinetic ODE on the uniform grid t_k = k*dt.

    A step that loses positivity is retried on 2, 4, ... substeps (up to
    ``max_halvings`` halvings) before giving up with ``FloatingPointError``.
    """
    if scheme not in KINETIC_SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {KINETIC_SCHEMES}")
    if not (u0 > 0 and w0 > 0):
        raise ValueError("initial data must be positive")
    _require_positive(dt=dt, t_end=t_end)
    n = int(round(t_end / dt))
    if not math.isclose(n * dt, t_end, rel_tol=1e-9):
        raise ValueError(f"t_end={t_end} is not a multiple of dt={dt}")
    t = dt * np.arange(n + 1)
    u = np.empty(n + 1)
    w = np.empty(n + 1)
    u[0], w[0] = u0, w0
    worst = 0
    for i in range(n):
        for level in range(max_halvings + 1):
            sub = 2**level
            h = dt / sub
            uu, ww = u[i], w[i]
            ok = True
            for _ in range(sub):
                uu, ww = _one_step(p, uu, ww, h, scheme)
                if not (uu > 0 and ww > 0 and math.isfinite(uu) and math.isfinite(ww)):
                    ok = False
                    break
            if ok:
                worst = max(worst, level)
                break
        else:
            raise FloatingPointError(f"positivity lost at t={t[i]:.6g} after {max_halvings} halvings")
        u[i + 1], w[i + 1] = uu, ww
    return KineticTrajectory(t, u, w, scheme, dt, worst)
