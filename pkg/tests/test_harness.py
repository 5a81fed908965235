import math
import os

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rdspike import harness
from rdspike.grid import Cosine, CosineForm, Eigenmode, Spline, Uniform, read_snapshot
from rdspike.integrator import IntegratorConfig, NonlinearMode, Scheme
from rdspike.kinetics import Branch, FullModelParams, KineticParams, ModelParams, reduce_full_params
from rdspike.harness import ConfigError, ScenarioConfig, cli_main, dump_config, load_config, parse_config

D_W1 = 5.85410196624969
THREADS = max(2, min(6, os.cpu_count() or 1))


# --- config text ---------------------------------------------------------------


def test_minimal_config_uses_defaults():
    cfg = parse_config("a1 = 2\n")
    assert cfg == ScenarioConfig()
    assert parse_config("") == ScenarioConfig()
    assert cfg.model_params == ModelParams.of(2.0, 1.0, 3.0, 6.0)


def test_nonpositive_kappa_named_with_line():
    with pytest.raises(ConfigError, match=r"line 2: kappa1"):
        parse_config("a1 = 2\nkappa1 = 0\n")
    with pytest.raises(ConfigError, match="kappa1"):
        parse_config("kappa1 = -1.5")


@pytest.mark.parametrize(
    "text, pattern",
    [
        ("a1 = 2\nfoo = 1\n", r"line 2: unknown key 'foo'"),
        ("a1 = 2\na1 = 3\n", r"line 2: duplicate key 'a1'"),
        ("a1 2\n", r"line 1: expected 'key = value'"),
        ("a1 = two\n", r"line 1"),
        ("kappa = 5\n", "only valid with full_model"),
        ("ic.kind = gauss\n", "ic.kind"),
        ("scheme = rk4\n", "scheme"),
        ("mesh_level = 0\n", "mesh_level"),
        ("dt = 0.3\nt_end = 1\n", "integrator"),
        ("full_model = true\na = 1\n", "required"),
    ],
)
def test_malformed_configs(text, pattern):
    with pytest.raises(ConfigError, match=pattern):
        parse_config(text)


def test_comments_and_blank_lines():
    cfg = parse_config("# header\n\nd_w = 2   # below threshold\nic.kind = cosxx\n")
    assert cfg.params.d_w == 2.0
    assert cfg.ic == Cosine(CosineForm.QUADRATIC, 0.05)


def test_full_model_config_reduces():
    vals = dict(a=4.0, d_c=2.0, d_b=1.0, d=1.0, d_g=2.0, alpha=2.0, kappa=5.0, gamma=0.25)
    text = "full_model = true\n" + "".join(f"{k} = {v}\n" for k, v in vals.items())
    cfg = parse_config(text)
    assert cfg.params == FullModelParams(**vals)
    assert cfg.model_params == reduce_full_params(FullModelParams(**vals))
    kin = cfg.model_params.kinetics
    assert (kin.a1, kin.d1, cfg.model_params.d_w) == (2.0, 1.0, 2.0)
    assert kin.kappa1 == pytest.approx(5 / math.sqrt(2))


def test_reduced_keys_rejected_in_full_mode():
    vals = "".join(f"{k} = 1\n" for k in harness.FULL_KEYS)
    with pytest.raises(ConfigError, match="unknown key 'a1'"):
        parse_config("full_model = true\n" + vals + "a1 = 2\n")


def test_load_config_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("d_w = 1\nic.kind = eigenmode\nic.k = 3\n")
    cfg = load_config(path)
    assert cfg.ic == Eigenmode(3, 1e-3) and cfg.params.d_w == 1.0
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.cfg")


pos = st.floats(0.05, 20.0, allow_nan=False)
ics = st.one_of(
    st.builds(Spline, st.floats(0.05, 0.95), st.floats(0.01, 0.04), st.floats(-1.0, 1.0)),
    st.builds(Cosine, st.sampled_from(list(CosineForm)), st.floats(-0.5, 0.5)),
    st.builds(Eigenmode, st.integers(0, 40), st.floats(-1.0, 1.0)),
    st.builds(lambda du, b: Uniform(du=du, branch=b), st.floats(-1.0, 1.0), st.sampled_from([Branch.TRIVIAL, Branch.MINUS])),
)


@st.composite
def scenarios(draw):
    if draw(st.booleans()):
        params = FullModelParams(*(draw(pos) for _ in harness.FULL_KEYS))
    else:
        params = ModelParams.of(draw(pos), draw(pos), draw(pos), draw(pos))
    dt = draw(st.sampled_from([1e-4, 2.5e-4, 1e-3, 0.01]))
    n = draw(st.integers(1, 400))
    t_end = dt * n
    k = draw(st.integers(0, min(5, n - 1)))
    snaps = tuple(sorted(set(dt * i for i in draw(st.lists(st.integers(1, n - 1), min_size=k, max_size=k))))) if n > 1 else ()
    integ = IntegratorConfig(
        dt=dt,
        t_end=t_end,
        scheme=draw(st.sampled_from(list(Scheme))),
        nonlinear_mode=draw(st.sampled_from(list(NonlinearMode))),
        snapshot_times=snaps,
    )
    return ScenarioConfig(params=params, ic=draw(ics), mesh_level=draw(st.integers(1, 20)), integrator=integ)


@settings(max_examples=200, deadline=None)
@given(cfg=scenarios())
def test_config_round_trip(cfg):
    assert parse_config(dump_config(cfg)) == cfg


def test_preset_configs_follow_defaults():
    for p in harness.Preset:
        cfg = harness.preset_config(p)
        assert cfg.preset is p
        assert cfg.mesh_level == 10 and cfg.integrator.dt == 2.5e-4 and cfg.integrator.t_end == 25.0
    assert harness.preset_config("NewParams").model_params.kinetics == KineticParams(2.5, 1.5, 4.0)
    assert harness.preset_config("TableSpikeCounts").model_params.d_w == pytest.approx(D_W1, abs=1e-12)
    with pytest.raises(ValueError):
        harness.preset_config("Fig9")


# --- command line ----------------------------------------------------------------


def test_analyze_without_positive_states(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("a1 = 2\nd1 = 1\nkappa1 = 1.5\n")
    assert cli_main(["analyze", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    report = (tmp_path / "o" / "ddi_report.txt").read_text()
    assert "positive_steady_states = none" in report
    assert "positive_steady_states = none" in capsys.readouterr().out
    assert not (tmp_path / "o" / "dispersion.csv").exists()


def test_analyze_reference(tmp_path):
    assert cli_main(["analyze", "--out", str(tmp_path)]) == 0
    report = (tmp_path / "ddi_report.txt").read_text()
    # d_w = 6 exceeds every mode threshold, so each mode grows
    assert "ddi = true" in report and "first_unstable_mode = 1" in report
    assert "unstable_modes_up_to_64 = 64" in report
    rows = (tmp_path / "dispersion.csv").read_text().splitlines()
    assert rows[0].startswith("k,re_lambda_plus") and len(rows) == 66


def test_preset_flag_selects_scenario(tmp_path):
    assert cli_main(["analyze", "--preset", "DispersionPlot", "--out", str(tmp_path)]) == 0
    assert "d_w = 2\n" in (tmp_path / "ddi_report.txt").read_text()
    assert cli_main(["analyze", "--preset", "Nope", "--out", str(tmp_path)]) == 1
    cfg = tmp_path / "c.cfg"
    cfg.write_text("")
    assert cli_main(["analyze", "--preset", "Fig1s", "--config", str(cfg), "--out", str(tmp_path)]) == 1


def test_exit_codes(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("kappa1 = 0\n")
    assert cli_main(["preset", "Fig9", "--out", str(tmp_path)]) == 1
    assert cli_main(["simulate", "--config", str(bad), "--out", str(tmp_path)]) == 1
    assert cli_main(["simulate", "--config", str(tmp_path / "missing"), "--out", str(tmp_path)]) == 1
    assert cli_main(["bogus"]) == 1
    assert cli_main(["analyze", "--threads", "0", "--out", str(tmp_path)]) == 1
    # no monotone profile exists above the existence threshold
    assert cli_main(["steady", "--out", str(tmp_path)]) == 2


def test_kinetics_and_steady_commands(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("d_w = 0.05\nic.kind = minus\nic.amplitude = 0.2\ndt = 0.01\nt_end = 5\n")
    assert cli_main(["kinetics", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "kinetics.csv").read_text().splitlines()
    assert rows[0] == "t,u,w" and len(rows) == 502
    assert cli_main(["steady", "--config", str(cfg), "--modes", "2", "--n-grid", "4096", "--out", str(tmp_path)]) == 0
    prof = (tmp_path / "steady_profile.csv").read_text().splitlines()
    assert prof[0] == "x,u,w" and len(prof) == 1 + 2 * 4096 + 1


def test_simulate_and_converge_commands(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("mesh_level = 6\ndt = 0.01\nt_end = 1\nsnapshot_times = 0.5\n")
    assert cli_main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "s")]) == 0
    t, u, w = read_snapshot(tmp_path / "s" / "snapshots" / "snapshot_0001.txt")
    assert t == 0.5 and len(u.values) == 65
    assert len((tmp_path / "s" / "diagnostics.csv").read_text().splitlines()) == 4
    assert cli_main(["converge", "--config", str(cfg), "--levels", "3", "4", "--ref-level", "7", "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "c" / "orders.csv").read_text().startswith("h,t,order_l2_u")


@pytest.fixture(scope="module")
def fig1s_dirs(tmp_path_factory):
    dirs = [tmp_path_factory.mktemp(f"fig1s{i}") for i in range(2)]
    for d in dirs:
        assert cli_main(["preset", "Fig1s", "--out", str(d)]) == 0
    return dirs


def test_fig1s_preset_single_spike(fig1s_dirs):
    report = dict(
        line.split(" = ", 1) for line in (fig1s_dirs[0] / "report.txt").read_text().splitlines()
    )
    assert report["final_spike_count"] == "1"
    assert 0.41 <= float(report["final_spike_positions"]) <= 0.45
    assert report["mass_bounds_ok"] == "true"
    assert len(list((fig1s_dirs[0] / "snapshots").iterdir())) == 26


def test_preset_bytes_deterministic(fig1s_dirs):
    a, b = fig1s_dirs
    for name in ("diagnostics.csv", "report.txt", "snapshots/snapshot_0025.txt"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


@pytest.mark.slow
def test_spike_count_preset_table(tmp_path, spike_count_runs):
    assert cli_main(["preset", "TableSpikeCounts", "--threads", str(THREADS), "--out", str(tmp_path)]) == 0
    rows = [r.split(",") for r in (tmp_path / "spike_counts.csv").read_text().splitlines()]
    assert rows[0] == ["d_w", "divisor", "spike_count", "spike_positions"]
    got = [(float(r[0]), int(r[1]), int(r[2])) for r in rows[1:]]
    for (d_w, n, count), want in zip(got, [1, 2, 3, 3, 4, 4]):
        assert d_w == pytest.approx(D_W1 / n, rel=1e-12)
        assert count == want
    # the pooled sweep reports exactly what serial in-process runs give
    for row, (_, _, diag) in zip(rows[1:], spike_count_runs):
        assert row[3] == ";".join(harness.fmt(x) for x in diag.final.spike_positions)
