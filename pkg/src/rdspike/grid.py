"""
Uniform mesh of [0, 1] with continuous piecewise-linear elements.

Tridiagonal matrices are stored in banded form, an array of shape (3, n+1)
with rows (upper, diagonal, lower) as used by ``scipy.linalg.solve_banded``:
``ab[0, 1:]`` is the superdiagonal and ``ab[2, :-1]`` the subdiagonal.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .kinetics import Branch, ModelParams, steady_state


@dataclass(frozen=True)
class Mesh1D:
    n_cells: int

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < 1:
            raise ValueError(f"n_cells must be a positive integer, got {self.n_cells!r}")

    @classmethod
    def from_level(cls, level: int) -> "Mesh1D":
        """Dyadic mesh with h = 2**-level."""
        return cls(2**level)

    @property
    def h(self) -> float:
        return 1.0 / self.n_cells

    @property
    def n_nodes(self) -> int:
        return self.n_cells + 1

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_nodes) * self.h


@dataclass
class Field:
    mesh: Mesh1D
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.n_nodes,):
            raise ValueError(
                f"field has {self.values.shape} values, mesh has {self.mesh.n_nodes} nodes"
            )

    @classmethod
    def from_function(cls, mesh: Mesh1D, f: Callable[[np.ndarray], np.ndarray]) -> "Field":
        return cls(mesh, np.broadcast_to(f(mesh.nodes), (mesh.n_nodes,)).astype(float))

    def __call__(self, x):
        """Evaluate the piecewise-linear interpolant."""
        return np.interp(x, self.mesh.nodes, self.values)


@dataclass(frozen=True)
class FemMatrices:
    mesh: Mesh1D
    mass: np.ndarray
    stiffness: np.ndarray

    def dense(self) -> tuple[np.ndarray, np.ndarray]:
        return banded_to_dense(self.mass), banded_to_dense(self.stiffness)


def banded_to_dense(ab: np.ndarray) -> np.ndarray:
    n = ab.shape[1]
    return np.diag(ab[1]) + np.diag(ab[0, 1:], 1) + np.diag(ab[2, :-1], -1)


def banded_matvec(ab: np.ndarray, x: np.ndarray) -> np.ndarray:
    y = ab[1] * x
    y[:-1] += ab[0, 1:] * x[1:]
    y[1:] += ab[2, :-1] * x[:-1]
    return y


def assemble_fem(mesh: Mesh1D) -> FemMatrices:
    """Consistent mass and stiffness matrices; Neumann boundary is natural."""
    n, h = mesh.n_nodes, mesh.h
    mass = np.zeros((3, n))
    mass[0, 1:] = h / 6.0
    mass[2, :-1] = h / 6.0
    mass[1, :] = 2.0 * h / 3.0
    mass[1, [0, -1]] = h / 3.0
    stiff = np.zeros((3, n))
    stiff[0, 1:] = -1.0 / h
    stiff[2, :-1] = -1.0 / h
    stiff[1, :] = 2.0 / h
    stiff[1, [0, -1]] = 1.0 / h
    return FemMatrices(mesh, mass, stiff)


def _values(f) -> tuple[np.ndarray, float]:
    if isinstance(f, Field):
        return f.values, f.mesh.h
    raise TypeError(f"expected a Field, got {type(f).__name__}")


def l1_norm(f: Field) -> float:
    """Exact L1 norm of the piecewise-linear interpolant, sign changes included."""
    v, h = _values(f)
    a, b = v[:-1], v[1:]
    same = a * b >= 0
    # on a sign-changing element the integral of |.| is h (a^2 + b^2) / (2 (|a| + |b|))
    denom = np.where(same, 1.0, np.abs(a) + np.abs(b))
    per = np.where(same, 0.5 * h * np.abs(a + b), 0.5 * h * (a * a + b * b) / denom)
    return float(per.sum())


def l2_norm(f: Field) -> float:
    v, h = _values(f)
    a, b = v[:-1], v[1:]
    return math.sqrt(float((h / 3.0 * (a * a + a * b + b * b)).sum()))


def integral(f: Field) -> float:
    v, h = _values(f)
    return float(h * (v.sum() - 0.5 * (v[0] + v[-1])))


# Initial conditions


class CosineForm(enum.Enum):
    LINEAR = "linear"  # cos(4 pi x)
    QUADRATIC = "quadratic"  # cos(4 pi x^2)


@dataclass(frozen=True)
class Spline:
    s: float
    eps: float
    eps1: float

    def __post_init__(self):
        _check_spline_domain(self.s, self.eps)


@dataclass(frozen=True)
class Cosine:
    frequency_form: CosineForm
    eps: float


@dataclass(frozen=True)
class Eigenmode:
    k: int
    amplitude: float


@dataclass(frozen=True)
class Uniform:
    """Constant shift (du, dw) of a chosen constant steady state."""

    du: float = 0.0
    dw: float = 0.0
    branch: Branch = Branch.MINUS


PerturbationSpec = Spline | Cosine | Eigenmode | Uniform


def _check_spline_domain(s: float, eps: float) -> None:
    if not (eps > 0 and s - eps > 0 and s + eps < 1):
        raise ValueError(f"spline needs 0 < s-eps and s+eps < 1, got s={s}, eps={eps}")


def spline_perturbation(s: float, eps: float) -> Callable[[np.ndarray], np.ndarray]:
    """C^1 piecewise-quadratic bump with p(0) = p(1) = -1, p'(0) = p'(1) = 0, p(s) = 1.

    Quadratic on [0, s-eps), [s-eps, s+eps] and (s+eps, 1]. Its maximum lies
    strictly inside (s-eps, s+eps) and is in general slightly above 1.
    """
    _check_spline_domain(s, eps)
    den = -2.0 * s + 2.0 * s * s - eps
    c_left = 4.0 * (-1.0 + s - eps) / ((s - eps) * den)
    mid_den = eps * den
    se = s + eps
    c_right = 4.0 * se / (den * (-1.0 + se))

    def p(x):
        x = np.asarray(x, dtype=float)
        left = c_left * x * x - 1.0
        mid = (
            2.0 * (1.0 + 2.0 * eps) * x * x
            - 4.0 * se * x
            + 2.0 * s * s
            + 2.0 * s * eps
            - 2.0 * s * s * eps
            - eps * eps
        ) / mid_den
        # anchored at x = 1 so that p(1) = -1 holds to rounding even when 1 - s - eps is small
        right = c_right * (1.0 - x) ** 2 - 1.0
        return np.where(x < s - eps, left, np.where(x <= se, mid, right))

    return p


def initial_profiles(p: ModelParams, spec: PerturbationSpec):
    """(u0, w0) as functions of x for a perturbation spec."""
    from .stability import eigenmode_ic

    if isinstance(spec, Uniform):
        base = steady_state(p.kinetics, spec.branch)
        return (
            lambda x: np.full(np.shape(x), base.u_bar + spec.du),
            lambda x: np.full(np.shape(x), base.w_bar + spec.dw),
        )
    if not p.kinetics.has_positive_steady_states:
        raise ValueError(f"{p.kinetics} has no positive steady states to perturb")
    base = steady_state(p.kinetics, Branch.MINUS)
    const_w = lambda x: np.full(np.shape(x), base.w_bar)  # noqa: E731
    if isinstance(spec, Spline):
        bump = spline_perturbation(spec.s, spec.eps)
        return (lambda x: base.u_bar + spec.eps1 * bump(x)), const_w
    if isinstance(spec, Cosine):
        if spec.frequency_form is CosineForm.LINEAR:
            return (lambda x: base.u_bar - spec.eps * np.cos(4 * np.pi * np.asarray(x))), const_w
        return (lambda x: base.u_bar - spec.eps * np.cos(4 * np.pi * np.asarray(x) ** 2)), const_w
    if isinstance(spec, Eigenmode):
        mode = eigenmode_ic(p, base, spec.k, spec.amplitude)
        return (lambda x: base.u_bar + mode.phi(x)), (lambda x: base.w_bar + mode.psi(x))
    raise TypeError(f"unknown perturbation spec {spec!r}")


def build_initial_state(p: ModelParams, mesh: Mesh1D, spec: PerturbationSpec):
    from .integrator import State

    u0, w0 = initial_profiles(p, spec)
    return State(0.0, Field.from_function(mesh, u0), Field.from_function(mesh, w0))


def write_snapshot(path, t: float, u: Field, w: Field) -> None:
    """Three space-separated columns ``x u w`` after a ``# t=<time>`` header."""
    x = u.mesh.nodes
    with open(path, "w") as fh:
        fh.write(f"# t={t!r}\n")
        for xi, ui, wi in zip(x, u.values, w.values):
            fh.write(f"{xi:.17g} {ui:.17g} {wi:.17g}\n")


def read_snapshot(path) -> tuple[float, Field, Field]:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("# t="):
            raise ValueError(f"{path}: missing '# t=' header")
        t = float(header[4:])
        data = np.loadtxt(fh, ndmin=2)
    mesh = Mesh1D(len(data) - 1)
    if not np.allclose(data[:, 0], mesh.nodes, rtol=0, atol=1e-14):
        raise ValueError(f"{path}: nodes are not a uniform mesh of [0, 1]")
    return t, Field(mesh, data[:, 1]), Field(mesh, data[:, 2])
