"""
Linear stability of constant steady states under diffusion.

A Neumann mode cos(pi k x) on [0, 1] has Laplacian eigenvalue (pi k)^2. The
growth rates of that mode are the roots lambda_+/- of

    det [[a11 - lam, a12], [a21, a22 - D_w mu_k - lam]] = 0,   mu_k = (pi k)^2,

where (a_ij) is the kinetic Jacobian at the steady state. Because u does not
diffuse, lambda_+ tends to a11 > 0 for large k: every positive steady state
has infinitely many unstable modes.

``mode_scale`` replaces pi^2 in mu_k = mode_scale * k^2. The default is the
physical value for the unit interval; ``mode_scale=1`` gives thresholds in the
k^2 normalization, in which the critical diffusion of (2, 1, 3) for k = 1 is
5.8541.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .kinetics import (
    Branch,
    ConstantSteadyState,
    KineticParams,
    ModelParams,
    Stability,
    branch_jacobian,
    classify_kinetic_stability,
    constant_steady_states,
)

PI2 = math.pi**2
DEFAULT_K_MAX = 64


@dataclass(frozen=True)
class DispersionSample:
    k: int
    lambda_plus: complex
    lambda_minus: complex


def _on_branch_jacobian(p: KineticParams, s: ConstantSteadyState) -> np.ndarray:
    if s.branch is Branch.TRIVIAL:
        raise ValueError("dispersion relation is defined here for the positive steady states only")
    return branch_jacobian(p, s.w_bar)


def dispersion_det(
    p: ModelParams, s: ConstantSteadyState, lam: complex, k: int, mode_scale: float = PI2
) -> complex:
    a = _on_branch_jacobian(p.kinetics, s)
    mu = mode_scale * k * k
    return (a[0, 0] - lam) * (a[1, 1] - p.d_w * mu - lam) - a[0, 1] * a[1, 0]


def lambda_pm(p: ModelParams, s: ConstantSteadyState, k: int, mode_scale: float = PI2) -> DispersionSample:
    a = _on_branch_jacobian(p.kinetics, s)
    mu = mode_scale * k * k
    det_a = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    half = 0.5 * (a[0, 0] + a[1, 1] - mu * p.d_w)
    disc = half * half - det_a + mu * p.d_w * a[0, 0]
    if disc >= 0:
        root = math.sqrt(disc)
        # larger-magnitude root first, then Vieta for the other: no cancellation
        big = half + math.copysign(root, half) if half != 0 else root
        prod = det_a - mu * p.d_w * a[0, 0]
        other = prod / big if big != 0 else -big
        plus, minus = (big, other) if big >= other else (other, big)
        return DispersionSample(k, complex(plus), complex(minus))
    root = cmath.sqrt(disc)
    return DispersionSample(k, half + root, half - root)


def critical_diffusion_definition(p: KineticParams, k: int, mode_scale: float = PI2) -> float:
    """|A| / (a11 mu_k): the diffusion at which mode k's lambda_+ crosses zero."""
    a = branch_jacobian(p, _minus(p).w_bar)
    det_a = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    return det_a / (a[0, 0] * mode_scale * k * k)


def critical_diffusion_expanded(p: KineticParams, k: int, mode_scale: float = PI2) -> float:
    a1, d1, k1 = p.a1, p.d1, p.kappa1
    g = a1 - d1
    num = -4 * d1**2 + g**2 * k1**2 + k1 * g * math.sqrt(k1**2 * g**2 - 4 * d1**2)
    return num / (2 * d1**2) / (mode_scale * k * k)


def critical_diffusion(p: KineticParams, k: int, mode_scale: float = PI2) -> float:
    if k < 1:
        raise ValueError("critical diffusion is defined for modes k >= 1")
    by_def = critical_diffusion_definition(p, k, mode_scale)
    expanded = critical_diffusion_expanded(p, k, mode_scale)
    if not math.isclose(by_def, expanded, rel_tol=1e-9):
        raise ArithmeticError(f"critical diffusion formulas disagree: {by_def!r} vs {expanded!r}")
    return by_def


def _minus(p: KineticParams) -> ConstantSteadyState:
    if not p.has_positive_steady_states:
        raise ValueError(f"{p} has no positive steady states")
    return next(s for s in constant_steady_states(p) if s.branch is Branch.MINUS)


def unstable_mode_range(
    p: ModelParams, s: ConstantSteadyState, k_max: int, mode_scale: float = PI2
) -> list[int]:
    return [k for k in range(k_max + 1) if lambda_pm(p, s, k, mode_scale).lambda_plus.real > 0]


@dataclass(frozen=True)
class EigenmodeIC:
    phi: Callable[[np.ndarray], np.ndarray]
    psi: Callable[[np.ndarray], np.ndarray]
    growth_rate: float
    ratio: float


def eigenmode_ic(p: ModelParams, s: ConstantSteadyState, k: int, amplitude: float) -> EigenmodeIC:
    """Perturbation (phi, psi) along the lambda_+ eigenvector of mode k.

    phi = amplitude cos(pi k x), psi = a21 / (lambda_+ - a22 + D_w (pi k)^2) phi.
    Under the linearized dynamics the pair is multiplied by exp(lambda_+ t).
    """
    a = _on_branch_jacobian(p.kinetics, s)
    sample = lambda_pm(p, s, k)
    lam = sample.lambda_plus
    if abs(lam.imag) > 0:
        raise ValueError(f"mode {k} has complex growth rates; no real eigenmode")
    ratio = a[1, 0] / (lam.real - a[1, 1] + p.d_w * PI2 * k * k)

    def phi(x):
        return amplitude * np.cos(math.pi * k * np.asarray(x, dtype=float))

    def psi(x):
        return ratio * phi(x)

    return EigenmodeIC(phi, psi, lam.real, ratio)


@dataclass
class DdiReport:
    params: ModelParams
    steady_state: ConstantSteadyState | None
    kinetically_stable: bool
    first_unstable_mode: int | None
    lambda_limit: float | None
    unstable_modes: list[int]
    d_w_thresholds: list[tuple[int, float]]
    dispersion: list[DispersionSample] = field(default_factory=list)
    k_max: int = DEFAULT_K_MAX

    @property
    def ddi(self) -> bool:
        return self.kinetically_stable and any(k >= 1 for k in self.unstable_modes)

    def unstable_mode_count_up_to(self, k: int) -> int:
        if k > self.k_max:
            raise ValueError(f"report only scanned modes up to {self.k_max}")
        return sum(1 for m in self.unstable_modes if m <= k)


def ddi_report(p: ModelParams, k_max: int = DEFAULT_K_MAX, n_thresholds: int = 10) -> DdiReport:
    """Diffusion-driven instability summary for the MINUS steady state."""
    if not p.kinetics.has_positive_steady_states:
        return DdiReport(p, None, False, None, None, [], [], [], k_max)
    s = _minus(p.kinetics)
    stable = classify_kinetic_stability(p.kinetics, s) is Stability.STABLE
    samples = [lambda_pm(p, s, k) for k in range(k_max + 1)]
    unstable = [d.k for d in samples if d.lambda_plus.real > 0]
    first = unstable[0] if unstable else None
    thresholds = [(k, critical_diffusion(p.kinetics, k)) for k in range(1, n_thresholds + 1)]
    kin = p.kinetics
    return DdiReport(
        params=p,
        steady_state=s,
        kinetically_stable=stable,
        first_unstable_mode=first,
        lambda_limit=(kin.a1 - kin.d1) * kin.d1 / kin.a1,
        unstable_modes=unstable,
        d_w_thresholds=thresholds,
        dispersion=samples,
        k_max=k_max,
    )
