"""Compiled inner loops of the time stepper.

Banded arrays follow the (upper, diagonal, lower) row layout of grid.py.
"""

import numpy as np
from numba import njit

NEWTON_TOL = 1e-12
NEWTON_MAXIT = 30


@njit(cache=True)
def thomas(ab, d):
    """Solve a tridiagonal system in banded (3, n) storage with the Thomas recurrence."""
    n = d.shape[0]
    c = np.empty(n)
    x = np.empty(n)
    b0 = ab[1, 0]
    if b0 == 0.0:
        raise ZeroDivisionError("zero pivot in tridiagonal solve")
    c[0] = ab[0, 1] / b0 if n > 1 else 0.0
    x[0] = d[0] / b0
    for i in range(1, n):
        lower = ab[2, i - 1]
        m = ab[1, i] - lower * c[i - 1]
        if m == 0.0:
            raise ZeroDivisionError("zero pivot in tridiagonal solve")
        c[i] = ab[0, i + 1] / m if i < n - 1 else 0.0
        x[i] = (d[i] - lower * x[i - 1]) / m
    for i in range(n - 2, -1, -1):
        x[i] -= c[i] * x[i + 1]
    return x


@njit(cache=True)
def banded_matvec(ab, x):
    n = x.shape[0]
    y = ab[1] * x
    for i in range(n - 1):
        y[i] += ab[0, i + 1] * x[i + 1]
        y[i + 1] += ab[2, i] * x[i]
    return y


@njit(cache=True)
def w_operator(mass, stiff, d_w, u, scale, out):
    """out = mass + scale * (d_w * stiff + mass + mass @ diag(u**2)), banded."""
    n = u.shape[0]
    for i in range(n):
        u2 = u[i] * u[i]
        # column i of mass @ diag(u^2) is scaled by u_i^2
        out[1, i] = mass[1, i] + scale * (d_w * stiff[1, i] + mass[1, i] * (1.0 + u2))
        if i > 0:
            out[0, i] = mass[0, i] + scale * (d_w * stiff[0, i] + mass[0, i] * (1.0 + u2))
        if i < n - 1:
            out[2, i] = mass[2, i] + scale * (d_w * stiff[2, i] + mass[2, i] * (1.0 + u2))
    out[0, 0] = 0.0
    out[2, n - 1] = 0.0
    return out


@njit(cache=True)
def _f(a1, d1, u, w):
    uw = u * w
    return (a1 * uw / (1.0 + uw) - d1) * u


@njit(cache=True)
def _dfdu(a1, d1, u, w):
    uw = u * w
    q = 1.0 + uw
    return a1 * uw / q - d1 + a1 * uw / (q * q)


@njit(cache=True)
def nodal_u_solve(b, w, a1, d1, dt_theta):
    """Solve u - dt_theta * f(u, w_i) = b_i node by node.

    Scalar Newton from u = b_i; bisection on [0, b_i / (1 - dt_theta a1)]
    when Newton fails to converge or leaves the bracket. Returns the solution
    and the number of nodes that needed bisection.
    """
    n = b.shape[0]
    out = np.empty(n)
    fallbacks = 0
    for i in range(n):
        bi = b[i]
        wi = w[i]
        if bi == 0.0:
            out[i] = 0.0
            continue
        hi = bi / (1.0 - dt_theta * a1) if dt_theta * a1 < 1.0 else np.inf
        u = bi
        ok = False
        for _ in range(NEWTON_MAXIT):
            g = u - dt_theta * _f(a1, d1, u, wi) - bi
            dg = 1.0 - dt_theta * _dfdu(a1, d1, u, wi)
            step = g / dg
            u -= step
            if not (u >= 0.0 and u <= hi):
                break
            if abs(step) <= NEWTON_TOL * max(1.0, abs(u)):
                ok = True
                break
        if not ok:
            fallbacks += 1
            lo = 0.0
            up = hi
            if not np.isfinite(up):
                up = max(bi, 1.0)
                while up - dt_theta * _f(a1, d1, up, wi) - bi < 0.0:
                    up *= 2.0
            for _ in range(200):
                mid = 0.5 * (lo + up)
                if mid - dt_theta * _f(a1, d1, mid, wi) - bi > 0.0:
                    up = mid
                else:
                    lo = mid
                if up - lo <= NEWTON_TOL * max(1.0, up):
                    break
            u = 0.5 * (lo + up)
        out[i] = u
    return out, fallbacks


@njit(cache=True)
def reaction_u(u, w, a1, d1):
    n = u.shape[0]
    out = np.empty(n)
    for i in range(n):
        out[i] = _f(a1, d1, u[i], w[i])
    return out


@njit(cache=True)
def semi_implicit_run(mass, stiff, d_w, a1, d1, kappa1, theta, dt, u, w, n_steps, work):
    """Advance n_steps semi-implicit steps in place.

    theta = 1: one lagged-u^2 w-solve then implicit-Euler u.
    theta = 1/2: Crank-Nicolson with a predictor w-solve on u^n and a
    corrector w-solve on the predicted u.
    Returns (steps_done, bisection fallbacks, index of the first node that went
    negative or -1).
    """
    n = u.shape[0]
    ones_mass = banded_matvec(mass, np.ones(n))
    fallbacks = 0
    for step in range(n_steps):
        if theta == 1.0:
            w_operator(mass, stiff, d_w, u, dt, work)
            rhs = banded_matvec(mass, w) + dt * kappa1 * ones_mass
            w_new = thomas(work, rhs)
            u_new, fb = nodal_u_solve(u.copy(), w_new, a1, d1, dt)
            fallbacks += fb
        else:
            half = 0.5 * dt
            w_operator(mass, stiff, d_w, u, -half, work)
            rhs = banded_matvec(work, w) + dt * kappa1 * ones_mass
            b = u + half * reaction_u(u, w, a1, d1)
            w_operator(mass, stiff, d_w, u, half, work)
            w_star = thomas(work, rhs)
            u_star, fb = nodal_u_solve(b, w_star, a1, d1, half)
            fallbacks += fb
            w_operator(mass, stiff, d_w, u_star, half, work)
            w_new = thomas(work, rhs)
            u_new, fb = nodal_u_solve(b, w_new, a1, d1, half)
            fallbacks += fb
        for i in range(n):
            if u_new[i] < -1e-12 or w_new[i] < -1e-12 or not np.isfinite(u_new[i] + w_new[i]):
                return step, fallbacks, i
        u[:] = u_new
        w[:] = w_new
    return n_steps, fallbacks, -1


@njit(cache=True)
def linear_run(mass, stiff, d_w, a11, a12, a21, a22, theta, dt, phi, psi, n_steps, work):
    """Frozen-coefficient linearized system, theta-method, coupled exactly.

    d phi/dt = a11 phi + a12 psi,  M d psi/dt = -d_w K psi + M (a21 phi + a22 psi).
    phi is eliminated nodally, leaving one tridiagonal solve per step.
    """
    n = phi.shape[0]
    g = 1.0 / (1.0 - dt * theta * a11)
    for step in range(n_steps):
        # explicit parts
        dphi = a11 * phi + a12 * psi
        mpsi = banded_matvec(mass, psi)
        kpsi = banded_matvec(stiff, psi)
        mrhs = banded_matvec(mass, a21 * phi + a22 * psi)
        b_phi = phi + dt * (1.0 - theta) * dphi
        # phi_new = g (b_phi + dt theta a12 psi_new)
        rhs = mpsi + dt * (1.0 - theta) * (mrhs - d_w * kpsi) + dt * theta * a21 * g * banded_matvec(mass, b_phi)
        coef = dt * theta * (a22 + a21 * g * dt * theta * a12)
        for i in range(n):
            work[1, i] = mass[1, i] * (1.0 - coef) + dt * theta * d_w * stiff[1, i]
            work[0, i] = mass[0, i] * (1.0 - coef) + dt * theta * d_w * stiff[0, i]
            work[2, i] = mass[2, i] * (1.0 - coef) + dt * theta * d_w * stiff[2, i]
        psi_new = thomas(work, rhs)
        phi[:] = g * (b_phi + dt * theta * a12 * psi_new)
        psi[:] = psi_new
    return n_steps
