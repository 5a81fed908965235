"""
Nonconstant steady states by shooting.

On a positive steady state u = c/w with c = d1/(a1-d1), so w solves the scalar
Neumann problem

    D_w W'' = W + c^2/W - kappa1,   W'(0) = W'(1) = 0.

The MINUS constant w is a center of this oscillator. The monotone solution is
the orbit whose first turning point after x = 0 sits exactly at x = 1; it is
found by bisection on W(0) below the MINUS value.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .grid import Field, Mesh1D
from .kinetics import Branch, ModelParams, steady_state

W_FLOOR = 1e-8
W_CEIL = 1e8


class Orientation(enum.Enum):
    INCREASING = "increasing"
    DECREASING = "decreasing"


@dataclass(frozen=True)
class SteadyProfile:
    params: ModelParams
    mesh: Mesh1D
    w: Field
    u: Field
    modes: int
    orientation: Orientation

    def residual(self) -> np.ndarray:
        """D_w W'' - W - c^2/W + kappa1 at every node.

        W'' uses the fourth-order five-point stencil; ghost values beyond the
        ends come from even reflection, which the Neumann condition makes exact
        for this autonomous equation.
        """
        kin = self.params.kinetics
        c = kin.uw_product
        v = self.w.values
        h = self.mesh.h
        ext = np.concatenate([v[2:0:-1], v, v[-2:-4:-1]])
        lap = (-ext[:-4] + 16 * ext[1:-3] - 30 * ext[2:-2] + 16 * ext[3:-1] - ext[4:]) / (12 * h * h)
        return self.params.d_w * lap - v - c * c / v + kin.kappa1

    def end_slopes(self) -> tuple[float, float]:
        """Fourth-order one-sided W'(0) and W'(1)."""
        v = self.w.values
        h = self.mesh.h
        st = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12 * h)
        return float(st @ v[:5]), float(-(st @ v[::-1][:5]))


class NoMonotoneSolution(ValueError):
    def __init__(self, params: ModelParams, bracket: tuple[float, float], residuals: np.ndarray):
        super().__init__(
            f"no sign change of the shooting residual for D_w={params.d_w} over W(0) in "
            f"[{bracket[0]:.6g}, {bracket[1]:.6g}]"
        )
        self.params = params
        self.bracket = bracket
        self.residuals = residuals


@njit(cache=True)
def _shoot(w0, d_w, c2, kappa1, n_grid, record):
    """RK4 for (W, W') from x = 0; stops at the first turning point.

    Returns (residual, W array). The residual is W'(1) when W' stays
    nonnegative on [0, 1], otherwise the first negative W' value reached
    (an early turn). An orbit dropping below W_FLOOR counts as an early turn;
    one escaping above W_CEIL returns +inf.
    """
    h = 1.0 / n_grid
    out = np.empty(n_grid + 1 if record else 1)
    w = w0
    p = 0.0
    out[0] = w
    for i in range(n_grid):
        k1w = p
        k1p = (w + c2 / w - kappa1) / d_w
        w2 = w + 0.5 * h * k1w
        if w2 < W_FLOOR:
            return -1.0, out
        k2w = p + 0.5 * h * k1p
        k2p = (w2 + c2 / w2 - kappa1) / d_w
        w3 = w + 0.5 * h * k2w
        if w3 < W_FLOOR:
            return -1.0, out
        k3w = p + 0.5 * h * k2p
        k3p = (w3 + c2 / w3 - kappa1) / d_w
        w4 = w + h * k3w
        if w4 < W_FLOOR:
            return -1.0, out
        k4w = p + h * k3p
        k4p = (w4 + c2 / w4 - kappa1) / d_w
        w = w + h / 6.0 * (k1w + 2 * k2w + 2 * k3w + k4w)
        p = p + h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
        if record:
            out[i + 1] = w
        if w < W_FLOOR:
            return -1.0, out
        if w > W_CEIL:
            return np.inf, out
        if p < 0.0:
            return p, out
    return p, out


def _residual(p: ModelParams, w0: float, n_grid: int) -> float:
    kin = p.kinetics
    r, _ = _shoot(w0, p.d_w, kin.uw_product**2, kin.kappa1, n_grid, False)
    return r


def shoot(p: ModelParams, w0: float, n_grid: int = 2**14) -> tuple[float, np.ndarray]:
    """One shot from W(0) = w0, W'(0) = 0: (residual, W at the nodes reached)."""
    kin = p.kinetics
    return _shoot(float(w0), p.d_w, kin.uw_product**2, kin.kappa1, n_grid, True)


def shoot_monotone(
    p: ModelParams,
    n_grid: int = 2**14,
    n_scan: int = 64,
    orientation: Orientation = Orientation.INCREASING,
) -> SteadyProfile:
    """Strictly monotone steady state on [0, 1] (one mode)."""
    kin = p.kinetics
    if not kin.has_positive_steady_states:
        raise ValueError(f"{kin} has no positive steady states")
    w_minus = steady_state(kin, Branch.MINUS).w_bar
    lo, hi = 1e-6 * w_minus, w_minus * (1 - 1e-6)
    grid = np.linspace(lo, hi, n_scan)
    res = np.array([_residual(p, w0, n_grid) for w0 in grid])
    # an increasing orbit that has not turned by x = 1 has residual > 0; one that turned early < 0
    idx = [i for i in range(n_scan - 1) if res[i] > 0 and res[i + 1] <= 0]
    if not idx:
        raise NoMonotoneSolution(p, (lo, hi), res)
    i = idx[-1]
    a, b = grid[i], grid[i + 1]
    for _ in range(200):
        mid = 0.5 * (a + b)
        if mid in (a, b):
            break
        if _residual(p, mid, n_grid) > 0:
            a = mid
        else:
            b = mid
    # the side with r > 0 has not turned; its W' at x = 1 is the smaller error
    _, values = _shoot(a, p.d_w, kin.uw_product**2, kin.kappa1, n_grid, True)
    mesh = Mesh1D(n_grid)
    if orientation is Orientation.DECREASING:
        values = values[::-1].copy()
    w = Field(mesh, values)
    return SteadyProfile(p, mesh, w, Field(mesh, kin.uw_product / values), 1, orientation)


def reflect(profile: SteadyProfile) -> SteadyProfile:
    """x -> 1 - x."""
    flipped = (
        Orientation.DECREASING if profile.orientation is Orientation.INCREASING else Orientation.INCREASING
    )
    return SteadyProfile(
        profile.params,
        profile.mesh,
        Field(profile.mesh, profile.w.values[::-1].copy()),
        Field(profile.mesh, profile.u.values[::-1].copy()),
        profile.modes,
        flipped,
    )


def periodic_profile(base: SteadyProfile, n: int) -> SteadyProfile:
    """n-mode steady state built from a one-mode profile by even reflection.

    ``base`` must be the increasing one-mode solution for diffusion D_w n^2;
    the result solves the problem with diffusion D_w, increasing on [0, 1/n].
    """
    if base.modes != 1 or base.orientation is not Orientation.INCREASING:
        raise ValueError("periodic_profile needs an increasing one-mode base profile")
    if n < 1 or int(n) != n:
        raise ValueError(f"mode count must be a positive integer, got {n}")
    if n == 1:
        return base
    v = base.w.values
    m = base.mesh.n_cells
    pieces = []
    for j in range(n):
        piece = v if j % 2 == 0 else v[::-1]
        pieces.append(piece if j == 0 else piece[1:])
    values = np.concatenate(pieces)
    mesh = Mesh1D(n * m)
    kin = base.params.kinetics
    params = ModelParams(kin, base.params.d_w / n**2)
    return SteadyProfile(
        params, mesh, Field(mesh, values), Field(mesh, kin.uw_product / values), n, Orientation.INCREASING
    )


def existence_threshold(p: ModelParams, tol: float = 1e-4, n_grid: int = 2**12) -> float:
    """Largest D_w (bisection) for which the one-mode profile exists, kinetics fixed."""
    kin = p.kinetics

    def exists(d):
        try:
            shoot_monotone(ModelParams(kin, d), n_grid=n_grid)
            return True
        except NoMonotoneSolution:
            return False

    lo, hi = 1e-3, 1.0
    while exists(hi):
        lo, hi = hi, 2 * hi
    if not exists(lo):
        raise NoMonotoneSolution(ModelParams(kin, lo), (lo, lo), np.array([]))
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if exists(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def small_amplitude_threshold(p: ModelParams) -> float:
    """D_w below which a small-amplitude one-mode orbit fits in [0, 1]: half period pi/omega < 1."""
    kin = p.kinetics
    w_minus = steady_state(kin, Branch.MINUS).w_bar
    w_plus = steady_state(kin, Branch.PLUS).w_bar
    return (w_plus - w_minus) / (math.pi**2 * w_minus)
