import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rdspike.diagnostics import SpikeCriteria, detect_spikes
from rdspike.grid import Cosine, CosineForm, Eigenmode, Field, Mesh1D, Spline, Uniform, assemble_fem, build_initial_state, l1_norm
from rdspike.integrator import (
    IntegratorConfig,
    NonlinearMode,
    Scheme,
    SimulationFault,
    State,
    diffusion_only_run,
    run_from_state,
    simulate,
    simulate_linearized,
    step,
)
from rdspike.kinetics import Branch, KineticParams, ModelParams, integrate_kinetics, steady_state
from rdspike.stability import eigenmode_ic, lambda_pm

REF = KineticParams(2.0, 1.0, 3.0)
FIG1S = ModelParams(REF, 6.0)
MINUS = steady_state(REF, Branch.MINUS)
SPIKE_IC = Spline(0.4, 0.1, 0.05)


def _constant_state(mesh, u, w):
    return State(0.0, Field(mesh, np.full(mesh.n_nodes, u)), Field(mesh, np.full(mesh.n_nodes, w)))


# --- configuration -----------------------------------------------------------


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(dt=1.0, t_end=0.5)
    with pytest.raises(ValueError):
        IntegratorConfig(dt=0.1, t_end=1.0, snapshot_times=(1.5,))
    with pytest.raises(ValueError):
        IntegratorConfig(dt=0.0)
    cfg = IntegratorConfig(dt=0.1, t_end=1.0, snapshot_times=(0.5,))
    assert cfg.output_steps() == [0, 5, 10]
    with pytest.raises(ValueError):
        cfg.step_index(0.55)


# --- single steps ----------------------------------------------------------


@pytest.mark.parametrize("scheme", list(Scheme))
@pytest.mark.parametrize("mode", list(NonlinearMode))
def test_equilibrium_is_fixed_point(scheme, mode):
    mesh = Mesh1D(64)
    mats = assemble_fem(mesh)
    cfg = IntegratorConfig(dt=1e-2, t_end=1.0, scheme=scheme, nonlinear_mode=mode)
    s = _constant_state(mesh, MINUS.u_bar, MINUS.w_bar)
    for _ in range(10):
        nxt = step(FIG1S, mats, s, cfg)
        assert np.abs(nxt.u.values - s.u.values).max() < 1e-12
        assert np.abs(nxt.w.values - s.w.values).max() < 1e-12
        s = nxt


@pytest.mark.parametrize(
    "scheme,mode,kinetic",
    [
        (Scheme.IMPLICIT_EULER, NonlinearMode.SEMI_IMPLICIT, "semi_implicit_euler"),
        (Scheme.CRANK_NICOLSON, NonlinearMode.SEMI_IMPLICIT, "semi_implicit_crank_nicolson"),
        (Scheme.IMPLICIT_EULER, NonlinearMode.NEWTON, "implicit_euler"),
        (Scheme.CRANK_NICOLSON, NonlinearMode.NEWTON, "crank_nicolson"),
    ],
)
def test_constant_data_follows_kinetics(scheme, mode, kinetic):
    mesh = Mesh1D(32)
    dt, t_end = 1e-2, 2.0
    cfg = IntegratorConfig(dt=dt, t_end=t_end, scheme=scheme, nonlinear_mode=mode,
                           snapshot_times=tuple(0.1 * i for i in range(1, 20)))
    snaps, _ = run_from_state(FIG1S, _constant_state(mesh, MINUS.u_bar + 0.05, MINUS.w_bar), cfg)
    traj = integrate_kinetics(REF, MINUS.u_bar + 0.05, MINUS.w_bar, dt=dt, t_end=t_end, scheme=kinetic)
    for s in snaps:
        i = int(round(s.t / dt))
        assert np.abs(s.u.values - traj.u[i]).max() < 1e-10
        assert np.abs(s.w.values - traj.w[i]).max() < 1e-10


def _step_halving_orders(scheme, ic=SPIKE_IC):
    mesh = Mesh1D.from_level(10)
    mats = assemble_fem(mesh)
    s0 = build_initial_state(FIG1S, mesh, ic)
    diffs = []
    dts = [2.5e-4, 1.25e-4, 6.25e-5, 3.125e-5]
    for dt in dts:
        one = step(FIG1S, mats, s0, IntegratorConfig(dt=dt, t_end=dt, scheme=scheme))
        half = IntegratorConfig(dt=dt / 2, t_end=dt, scheme=scheme)
        two = step(FIG1S, mats, step(FIG1S, mats, s0, half), half)
        diffs.append(np.abs(one.u.values - two.u.values).max() + np.abs(one.w.values - two.w.values).max())
    return np.log2(np.array(diffs[:-1]) / np.array(diffs[1:]))


def test_step_halving_implicit_euler_is_second_order_locally():
    orders = _step_halving_orders(Scheme.IMPLICIT_EULER)
    assert np.all(orders > 1.7), orders


def test_step_halving_crank_nicolson_is_third_order_locally():
    # one step vs two half steps on the spike configuration should differ by O(dt^3)
    orders = _step_halving_orders(Scheme.CRANK_NICOLSON)
    assert np.all(orders > 2.7), orders


def test_step_halving_crank_nicolson_smooth_data():
    # with smooth data the stiff modes carry no content and the O(dt^3) local error shows
    orders = _step_halving_orders(Scheme.CRANK_NICOLSON, Cosine(CosineForm.LINEAR, 0.05))
    assert np.all(orders > 2.7), orders


@pytest.mark.parametrize("scheme,order", [(Scheme.IMPLICIT_EULER, 1.0), (Scheme.CRANK_NICOLSON, 2.0)])
def test_global_order_on_smooth_kinetic_run(scheme, order):
    mesh = Mesh1D(8)
    s0 = _constant_state(mesh, MINUS.u_bar + 0.5, MINUS.w_bar + 0.2)
    ref = integrate_kinetics(REF, MINUS.u_bar + 0.5, MINUS.w_bar + 0.2, dt=1e-4, t_end=1.0)
    errs = []
    for dt in (0.04, 0.02, 0.01, 0.005):
        snaps, _ = run_from_state(FIG1S, s0, IntegratorConfig(dt=dt, t_end=1.0, scheme=scheme))
        f = snaps[-1]
        errs.append(abs(f.u.values[0] - ref.u[-1]) + abs(f.w.values[0] - ref.w[-1]))
    observed = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(observed - order) < 0.3), observed


@pytest.mark.parametrize("scheme", list(Scheme))
def test_newton_and_semi_implicit_agree(scheme):
    mesh = Mesh1D.from_level(10)
    base = IntegratorConfig(dt=1e-4, t_end=1.0, scheme=scheme)
    semi, _ = simulate(FIG1S, mesh, SPIKE_IC, base)
    newton, _ = simulate(FIG1S, mesh, SPIKE_IC, replace(base, nonlinear_mode=NonlinearMode.NEWTON))
    diff = max(np.abs(semi[-1].u.values - newton[-1].u.values).max(), np.abs(semi[-1].w.values - newton[-1].w.values).max())
    assert diff < 1e-6


# --- invariants ------------------------------------------------------------


def _mass(s, a1):
    return l1_norm(s.u) / a1 + l1_norm(s.w)


@settings(max_examples=10, deadline=None)
@given(
    seed=st.integers(0, 2**31),
    level=st.integers(5, 8),
    dt=st.sampled_from([1e-3, 1e-2, 5e-2]),
    scheme=st.sampled_from(list(Scheme)),
)
def test_discrete_mass_inequality_every_step(seed, level, dt, scheme):
    rng = np.random.default_rng(seed)
    mesh = Mesh1D.from_level(level)
    kin = REF
    p = ModelParams(kin, float(rng.choice([0.1, 1.0, 6.0])))
    x = mesh.nodes
    u = 2.6 + 2.0 * np.cos(np.pi * rng.integers(1, 6) * x) ** 2
    w = 0.4 + rng.uniform(0, 1) * (1 + np.cos(np.pi * x))
    s = State(0.0, Field(mesh, u), Field(mesh, w))
    mats = assemble_fem(mesh)
    cfg = IntegratorConfig(dt=dt, t_end=dt, scheme=scheme)
    for _ in range(100):
        nxt = step(p, mats, s, cfg)
        bound = (1 - dt * min(kin.d1, 1.0)) * _mass(s, kin.a1) + dt * kin.kappa1 + 1e-8
        assert _mass(nxt, kin.a1) <= bound
        s = nxt


def test_diffusion_conserves_mass():
    mesh = Mesh1D.from_level(8)
    w0 = 1.0 + np.cos(3 * np.pi * mesh.nodes) + 0.5 * (mesh.nodes > 0.3)
    start = l1_norm(Field(mesh, w0))
    w = diffusion_only_run(mesh, 1.0, w0, 1e-4, 10_000)
    assert abs(l1_norm(Field(mesh, w)) - start) < 1e-12


def test_positivity_fault_keeps_partial_diagnostics():
    mesh = Mesh1D(16)
    bad = State(0.0, Field(mesh, np.full(17, 1.0)), Field(mesh, np.full(17, -5.0)))
    cfg = IntegratorConfig(dt=1e-3, t_end=1e-2, snapshot_times=(0.0,))
    with pytest.raises(SimulationFault) as info:
        run_from_state(FIG1S, bad, cfg)
    assert len(info.value.diagnostics.rows) == 1
    assert isinstance(info.value.cause, FloatingPointError)


# --- full runs -------------------------------------------------------------


def test_single_spike_at_t25(fig1s_long):
    _, snaps, _ = fig1s_long
    final = next(s for s in snaps if abs(s.t - 25.0) < 1e-9)
    spikes = detect_spikes(final.u, SpikeCriteria.for_params(REF))
    assert len(spikes) == 1
    assert 0.41 <= spikes[0] <= 0.45


def test_runs_are_deterministic():
    cfg = IntegratorConfig(dt=1e-3, t_end=0.5, snapshot_times=(0.25,))
    a, da = simulate(FIG1S, Mesh1D.from_level(8), SPIKE_IC, cfg)
    b, db = simulate(FIG1S, Mesh1D.from_level(8), SPIKE_IC, cfg)
    assert da.to_csv() == db.to_csv()
    assert all(np.array_equal(x.u.values, y.u.values) for x, y in zip(a, b))


@pytest.mark.slow
def test_unit_diffusion_spike_count_is_mesh_converged():
    # the count at t = 25 is fixed by a refined run; both resolutions must agree
    p = ModelParams(REF, 1.0)
    crit = SpikeCriteria.for_params(REF)
    counts = []
    for level, dt in ((10, 2.5e-4), (11, 1.25e-4)):
        snaps, _ = simulate(p, Mesh1D.from_level(level), SPIKE_IC, IntegratorConfig(dt=dt, t_end=25.0), keep_snapshots=False)
        counts.append(len(detect_spikes(snaps[-1].u, crit)))
    assert counts == [2, 2]


def test_trivial_state_attracts_nearby_data():
    p = ModelParams(REF, 2.0)
    snaps, _ = simulate(p, Mesh1D.from_level(8), Uniform(0.2, 0.0, Branch.TRIVIAL), IntegratorConfig(dt=1e-2, t_end=25.0))
    f = snaps[-1]
    assert np.abs(f.u.values).max() < 1e-4
    assert np.abs(f.w.values - 3.0).max() < 1e-4


# --- linearized propagator -----------------------------------------------------


def test_eigenmode_growth_rate():
    p = ModelParams(REF, 2.0)
    mesh = Mesh1D.from_level(10)
    e = eigenmode_ic(p, MINUS, 3, 1e-3)
    ic = (Field.from_function(mesh, e.phi), Field.from_function(mesh, e.psi))
    snaps = simulate_linearized(p, mesh, MINUS, ic, IntegratorConfig(dt=1e-5, t_end=0.5, scheme=Scheme.CRANK_NICOLSON))
    ratio = snaps[-1].u.values[0] / ic[0].values[0]
    want = math.exp(lambda_pm(p, MINUS, 3).lambda_plus.real * 0.5)
    assert ratio == pytest.approx(want, rel=1e-3)
    # the shape is preserved
    np.testing.assert_allclose(snaps[-1].u.values, ratio * ic[0].values, atol=1e-3 * abs(ratio) * 1e-3)


def test_linearized_zero_and_superposition():
    p = ModelParams(REF, 2.0)
    mesh = Mesh1D.from_level(7)
    cfg = IntegratorConfig(dt=1e-3, t_end=0.2, snapshot_times=(0.1,))
    zero = (Field(mesh, np.zeros(129)), Field(mesh, np.zeros(129)))
    assert all(np.all(s.u.values == 0) and np.all(s.w.values == 0) for s in simulate_linearized(p, mesh, MINUS, zero, cfg))
    rng = np.random.default_rng(5)
    a = (Field(mesh, rng.normal(size=129)), Field(mesh, rng.normal(size=129)))
    b = (Field(mesh, rng.normal(size=129)), Field(mesh, rng.normal(size=129)))
    ab = (Field(mesh, a[0].values + b[0].values), Field(mesh, a[1].values + b[1].values))
    ra, rb, rab = (simulate_linearized(p, mesh, MINUS, x, cfg) for x in (a, b, ab))
    for sa, sb, sab in zip(ra, rb, rab):
        assert np.abs(sa.u.values + sb.u.values - sab.u.values).max() < 1e-10
        assert np.abs(sa.w.values + sb.w.values - sab.w.values).max() < 1e-10


def test_linearized_rejects_trivial_state():
    mesh = Mesh1D(4)
    z = (Field(mesh, np.zeros(5)), Field(mesh, np.zeros(5)))
    with pytest.raises(ValueError):
        simulate_linearized(FIG1S, mesh, steady_state(REF, Branch.TRIVIAL), z, IntegratorConfig(dt=0.1, t_end=0.1))


def test_eigenmode_ic_in_full_model_grows_at_linear_rate():
    # small amplitude: the nonlinear run follows the linear growth rate for a short time
    p = ModelParams(REF, 2.0)
    snaps, _ = simulate(p, Mesh1D.from_level(9), Eigenmode(2, 1e-7), IntegratorConfig(dt=1e-4, t_end=0.5))
    amp = snaps[-1].u.values[0] - MINUS.u_bar
    want = 1e-7 * math.exp(lambda_pm(p, MINUS, 2).lambda_plus.real * 0.5)
    assert amp == pytest.approx(want, rel=1e-2)
