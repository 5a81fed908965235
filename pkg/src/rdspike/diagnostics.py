"""
Measurements taken during and after a run.

Mass (L1) and L2 evolution, spike detection, pointwise growth orders of a
perturbation, the finite Fourier transform of initial data, and a check of
the long-time mass bounds

    (1/a1)|u|_1 + |w|_1 <= kappa1 / min(d1, 1)
    |u|_1 <= a1 kappa1 / min(d1, 1)
    |w|_1 <= kappa1
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .grid import Field, l1_norm, l2_norm
from .kinetics import Branch, KineticParams, steady_state


@dataclass(frozen=True)
class SpikeCriteria:
    """Thresholds for calling a local maximum of u a spike.

    A maximum counts when it reaches both ``abs_floor`` and ``rel_height``
    times the global maximum; maxima closer than ``min_separation`` are merged
    into the taller one.
    """

    rel_height: float = 0.1
    abs_floor: float = 0.0
    min_separation: float = 0.02

    def __post_init__(self):
        if not 0 < self.rel_height < 1:
            raise ValueError("rel_height must lie in (0, 1)")
        if self.abs_floor < 0 or self.min_separation < 0:
            raise ValueError("abs_floor and min_separation must be nonnegative")

    @classmethod
    def for_params(cls, p: KineticParams, **overrides) -> "SpikeCriteria":
        """Defaults with the floor at twice the MINUS steady-state value of u."""
        floor = 2.0 * steady_state(p, Branch.MINUS).u_bar if p.has_positive_steady_states else 0.0
        return cls(**{"abs_floor": floor, **overrides})


def detect_spikes(u: Field, c: SpikeCriteria = SpikeCriteria()) -> list[float]:
    v = u.values
    x = u.mesh.nodes
    n = len(v)
    if n < 2:
        return []
    gmax = float(v.max())
    threshold = max(c.abs_floor, c.rel_height * gmax)
    candidates = []
    for i in range(n):
        left = v[i - 1] if i > 0 else -np.inf
        right = v[i + 1] if i < n - 1 else -np.inf
        if v[i] > left and v[i] > right and v[i] >= threshold and v[i] > 0:
            candidates.append(i)
    # tallest first, drop anything within min_separation of a kept spike
    kept: list[int] = []
    for i in sorted(candidates, key=lambda j: (-v[j], j)):
        if all(abs(x[i] - x[j]) >= c.min_separation for j in kept):
            kept.append(i)
    return [float(x[i]) for i in sorted(kept)]


@dataclass(frozen=True)
class DiagnosticsRow:
    t: float
    l1_u: float
    l1_w: float
    l2_u: float
    l2_w: float
    max_u: float
    argmax_u: float
    spike_positions: tuple[float, ...]

    @property
    def spike_count(self) -> int:
        return len(self.spike_positions)


CSV_HEADER = ["t", "l1_u", "l1_w", "l2_u", "l2_w", "max_u", "argmax_u", "spike_count", "spike_positions"]


def _fmt(x: float) -> str:
    return f"{x:.17g}"


@dataclass
class RunDiagnostics:
    rows: list[DiagnosticsRow] = field(default_factory=list)

    def append(self, row: DiagnosticsRow) -> None:
        if self.rows and row.t <= self.rows[-1].t:
            raise ValueError(f"diagnostic times must increase: {row.t} after {self.rows[-1].t}")
        self.rows.append(row)

    def column(self, name: str) -> np.ndarray:
        if name == "spike_count":
            return np.array([r.spike_count for r in self.rows])
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    @property
    def final(self) -> DiagnosticsRow:
        return self.rows[-1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in self.rows:
            writer.writerow(
                [_fmt(r.t), _fmt(r.l1_u), _fmt(r.l1_w), _fmt(r.l2_u), _fmt(r.l2_w),
                 _fmt(r.max_u), _fmt(r.argmax_u), str(r.spike_count),
                 ";".join(_fmt(x) for x in r.spike_positions)]
            )
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "RunDiagnostics":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if header != CSV_HEADER:
            raise ValueError(f"unexpected diagnostics header {header}")
        out = cls()
        for rec in reader:
            positions = tuple(float(s) for s in rec[8].split(";") if s)
            if int(rec[7]) != len(positions):
                raise ValueError(f"spike_count {rec[7]} does not match {len(positions)} positions")
            out.append(DiagnosticsRow(*(float(s) for s in rec[:7]), positions))
        return out


def measure(t: float, u: Field, w: Field, criteria: SpikeCriteria) -> DiagnosticsRow:
    i = int(np.argmax(u.values))
    return DiagnosticsRow(
        t=t,
        l1_u=l1_norm(u),
        l1_w=l1_norm(w),
        l2_u=l2_norm(u),
        l2_w=l2_norm(w),
        max_u=float(u.values[i]),
        argmax_u=float(u.mesh.nodes[i]),
        spike_positions=tuple(detect_spikes(u, criteria)),
    )


def growth_order(
    u_t: Field, u_0: Field, u_bar: float, t: float, probe_points: Sequence[float], min_offset: float = 1e-12
) -> np.ndarray:
    """log((u(t, x) - u_bar) / (u_0(x) - u_bar)) / t at each probe.

    Probes where the initial perturbation is below ``min_offset`` in
    magnitude, or where the perturbation changed sign, come back as NaN.
    """
    if not t > 0:
        raise ValueError("growth order needs t > 0")
    x = np.asarray(probe_points, dtype=float)
    num = u_t(x) - u_bar
    den = u_0(x) - u_bar
    out = np.full(x.shape, np.nan)
    ok = (np.abs(den) > min_offset) & (num * den > 0)
    out[ok] = np.log(num[ok] / den[ok]) / t
    return out


def finite_fourier(
    f: Callable[[np.ndarray], np.ndarray] | np.ndarray,
    omega: float,
    n: int = 2**12,
    conjugate: bool = False,
) -> complex:
    """Composite trapezoid value of the integral of f(x) exp(i pi omega x) over [0, 1].

    ``f`` is a callable or an array of samples on a uniform grid including both
    end points (its length then fixes the resolution). ``conjugate`` flips the
    sign of the exponent.
    """
    if callable(f):
        x = np.linspace(0.0, 1.0, n + 1)
        y = np.asarray(f(x), dtype=complex)
    else:
        y = np.asarray(f, dtype=complex)
        x = np.linspace(0.0, 1.0, len(y))
    sign = -1.0 if conjugate else 1.0
    g = y * np.exp(sign * 1j * np.pi * omega * x)
    h = x[1] - x[0]
    return complex(h * (g.sum() - 0.5 * (g[0] + g[-1])))


@dataclass(frozen=True)
class MassBoundReport:
    combined_bound: float
    u_bound: float
    w_bound: float
    max_combined: float
    max_l1_u: float
    max_l1_w: float
    min_l1_u: float
    tol: float
    t_from: float

    @property
    def combined_ok(self) -> bool:
        return self.max_combined <= self.combined_bound + self.tol

    @property
    def u_ok(self) -> bool:
        return self.max_l1_u <= self.u_bound + self.tol

    @property
    def w_ok(self) -> bool:
        return self.max_l1_w <= self.w_bound + self.tol

    @property
    def ok(self) -> bool:
        return self.combined_ok and self.u_ok and self.w_ok


def mass_bounds(p: KineticParams) -> tuple[float, float, float]:
    m = min(p.d1, 1.0)
    return p.kappa1 / m, p.a1 * p.kappa1 / m, p.kappa1


def mass_bound_monitor(d: RunDiagnostics, p: KineticParams, tail_fraction: float = 0.5, tol: float = 1e-3) -> MassBoundReport:
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must lie in (0, 1]")
    if not d.rows:
        raise ValueError("no diagnostics rows")
    n = len(d.rows)
    tail = d.rows[n - max(1, math.ceil(tail_fraction * n)):]
    l1u = np.array([r.l1_u for r in tail])
    l1w = np.array([r.l1_w for r in tail])
    combined = l1u / p.a1 + l1w
    cb, ub, wb = mass_bounds(p)
    return MassBoundReport(
        combined_bound=cb,
        u_bound=ub,
        w_bound=wb,
        max_combined=float(combined.max()),
        max_l1_u=float(l1u.max()),
        max_l1_w=float(l1w.max()),
        min_l1_u=float(l1u.min()),
        tol=tol,
        t_from=tail[0].t,
    )
