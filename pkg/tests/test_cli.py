import csv
import io
import json

import numpy as np
import pytest

from gbridge.cli import build_parser, main
from gbridge.minimax import design_plus, geometric_spectrum


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def parse_report(text):
    out = {}
    for line in text.strip().splitlines():
        key, value = line.split(None, 1)
        out[key] = value.strip()
    return out


@pytest.fixture
def design_csv(tmp_path):
    rng = np.random.default_rng(1)
    d = geometric_spectrum(1.2)
    q, _ = np.linalg.qr(rng.standard_normal((40, 9)))
    v, _ = np.linalg.qr(rng.standard_normal((9, 9)))
    a = q @ np.diag(1 / np.sqrt(d)) @ v.T
    y = a @ np.full(9, 0.3) + rng.standard_normal(40)
    path = tmp_path / "data.csv"
    np.savetxt(path, np.column_stack([a, y]), delimiter=",", fmt="%.17g")
    return path, a, y


def write_json(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


# ---------------------------------------------------------------------------
# fit


def test_fit_ls_matches_normal_equations(design_csv, tmp_path, capsys):
    path, a, y = design_csv
    out_csv = tmp_path / "beta.csv"
    code, out, _ = run(["fit", str(path), "--estimator", "ls", "--out", str(out_csv)], capsys)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out_csv.read_text())))
    assert rows[0] == ["index", "beta"]
    beta = np.array([float(r[1]) for r in rows[1:]])
    np.testing.assert_allclose(beta, np.linalg.solve(a.T @ a, a.T @ y), atol=1e-10)
    assert parse_report(out)["kappa_ls"] == "4.29982"


def test_fit_ridge_zero_is_domain_error(design_csv, capsys):
    code, _, err = run(["fit", str(design_csv[0]), "--estimator", "ridge:0"], capsys)
    assert code == 3
    assert "k must be > 0" in err


@pytest.mark.parametrize("est", ["sb", "gb"])
def test_fit_shrinkage_reduces_condition_number(design_csv, est, capsys):
    code, out, _ = run(["fit", str(design_csv[0]), "--estimator", est, "--loss", "0"], capsys)
    assert code == 0
    rep = parse_report(out)
    assert rep["regime"] == "plus"
    assert rep["minimax"] == "yes"
    assert rep["stable_guaranteed"] == "yes"
    assert float(rep["kappa_est"]) <= float(rep["kappa_ls"])
    assert len(rep["c"].split(",")) == 9


def test_fit_errors(tmp_path, capsys):
    code, _, _ = run(["fit", str(tmp_path / "missing.csv")], capsys)
    assert code == 2
    bad = tmp_path / "rank.csv"
    bad.write_text("1,1,1\n2,2,3\n3,3,2\n4,4,5\n")
    code, _, err = run(["fit", str(bad)], capsys)
    assert code == 2
    ok = tmp_path / "ok.csv"
    ok.write_text("1,0,1\n0,1,2\n1,1,3\n2,1,1\n")
    code, _, _ = run(["fit", str(ok), "--estimator", "lasso"], capsys)
    assert code == 1


def test_fit_minus_regime_uses_other_construction(tmp_path, capsys):
    rng = np.random.default_rng(3)
    d = geometric_spectrum(2.4)
    q, _ = np.linalg.qr(rng.standard_normal((30, 9)))
    a = q @ np.diag(1 / np.sqrt(d))
    y = a @ np.ones(9) + rng.standard_normal(30)
    path = tmp_path / "m.csv"
    np.savetxt(path, np.column_stack([a, y]), delimiter=",", fmt="%.17g")
    code, out, _ = run(["fit", str(path), "--estimator", "sb"], capsys)
    assert code == 0
    rep = parse_report(out)
    assert rep["regime"] == "minus"
    assert float(rep["kappa_est"]) <= float(rep["kappa_ls"])


# ---------------------------------------------------------------------------
# bounds


def test_bounds_plus_matches_design(capsys):
    code, out, _ = run(["bounds", "--mu", "1.2", "--j", "0", "--n", "10", "--format", "csv"], capsys)
    assert code == 0
    kv = {row[0]: row[1] for row in csv.reader(io.StringIO(out)) if row[0] != "key"}
    design = design_plus(geometric_spectrum(1.2), 0, 10)
    assert kv["regime"] == "plus"
    assert float(kv["u"]) == design.u
    assert float(kv["v"]) == design.v
    assert float(kv["alpha"]) == design.alpha
    assert float(kv["gamma"]) == design.gamma
    assert float(kv["c9"]) == design.c[8]


def test_bounds_minus_regime(capsys):
    code, out, _ = run(["bounds", "--mu", "2.0", "--j", "0", "--n", "10"], capsys)
    assert code == 0
    assert parse_report(out)["regime"] == "minus"


def test_bounds_spherical_equal_eigenvalues(capsys):
    code, out, _ = run(["bounds", "--d", "1,1,1", "--j", "0", "--n", "4"], capsys)
    assert code == 0
    assert parse_report(out)["bound"] == "0.333333"


@pytest.mark.parametrize("argv, code", [
    (["bounds", "--d", "1,2,3", "--j", "0", "--n", "4"], 2),
    (["bounds", "--d", "1,x", "--j", "0", "--n", "4"], 1),
    (["bounds", "--mu", "0.9", "--j", "0", "--n", "4"], 3),
    (["bounds", "--mu", "1.2", "--j", "0"], 1),
])
def test_bounds_errors(argv, code, capsys):
    try:
        got = run(argv, capsys)[0]
    except SystemExit as exc:
        got = exc.code
    assert got == code


# ---------------------------------------------------------------------------
# simulate


def test_simulate_smoke(tmp_path, capsys):
    cfg = write_json(tmp_path, "c.json", {
        "mu": 1.2, "n": 10, "j": 0, "theta_value": 0.5, "reps": 1000,
        "estimator": {"type": "design"},
    })
    code, out, _ = run(["simulate", cfg], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 1
    for key in ("risk_ratio", "risk_se", "ecn_ratio", "ecn_se"):
        assert np.isfinite(float(rows[0][key]))
    assert rows[0]["reps"] == "1000"


def test_simulate_matches_table1_cell(tmp_path, capsys):
    cfg = write_json(tmp_path, "c.json", {
        "mu": 1.6, "n": 10, "j": 1, "theta_value": 0.5, "reps": 1000, "seed": 42,
        "estimator": {"type": "table1", "protocol": "published"},
    })
    code, out, _ = run(["simulate", cfg, "--threads", "3"], capsys)
    assert code == 0
    sim_row = out.strip().split("\n")[1]
    code, grid, _ = run(["table1", "--reps", "1000", "--seed", "42"], capsys)
    assert code == 0
    assert sim_row in grid.split("\n")


def test_simulate_rejects_unknown_keys(tmp_path, capsys):
    cfg = write_json(tmp_path, "c.json", {
        "mu": 1.2, "n": 10, "j": 0, "repz": 1000, "estimator": {"type": "design", "etta": 1},
    })
    code, _, err = run(["simulate", cfg], capsys)
    assert code == 1
    assert "'repz'" in err and "'etta'" in err


@pytest.mark.parametrize("body", [
    "{not json",
    json.dumps({"n": 10, "j": 0, "estimator": {"type": "design"}}),
    json.dumps({"mu": 1.2, "d": [1, 1, 1], "n": 10, "j": 0, "estimator": {"type": "design"}}),
    json.dumps({"mu": 1.2, "n": 10, "j": 0, "reps": 5, "estimator": {"type": "design"}}),
])
def test_simulate_malformed_configs(tmp_path, body, capsys):
    path = tmp_path / "bad.json"
    path.write_text(body)
    assert run(["simulate", str(path)], capsys)[0] == 1


def test_simulate_flags_override_config(tmp_path, capsys):
    cfg = write_json(tmp_path, "c.json", {
        "d": [3.0, 2.0, 1.0, 0.5], "n": 6, "j": 1, "reps": 100_000,
        "estimator": {"type": "design"}, "error_model": {"type": "student_t", "df": 5},
    })
    code, out, _ = run(["simulate", cfg, "--reps", "500"], capsys)
    assert code == 0
    assert list(csv.DictReader(io.StringIO(out)))[0]["reps"] == "500"


def test_assert_minimax_exit_code(tmp_path, capsys):
    # heavy spherical shrinkage under a loss that weights the small-variance
    # coordinates is far from minimax
    cfg = write_json(tmp_path, "c.json", {
        "mu": 2.4, "n": 10, "j": 2, "theta_value": 2.0, "reps": 2000,
        "estimator": {"type": "custom", "c": [1] * 9, "phi": {"type": "sb", "alpha": 3.0, "gamma": 0.05}},
    })
    code, _, err = run(["simulate", cfg, "--assert-minimax"], capsys)
    assert code == 4
    assert "dominance" in err
    ok = write_json(tmp_path, "ok.json", {
        "mu": 1.2, "n": 10, "j": 0, "reps": 2000, "estimator": {"type": "design"},
    })
    assert run(["simulate", ok, "--assert-minimax"], capsys)[0] == 0


def test_simulate_custom_gb(tmp_path, capsys):
    cfg = write_json(tmp_path, "c.json", {
        "d": [4.0, 2.0, 1.0, 0.5], "n": 6, "j": 0, "reps": 200,
        "estimator": {"type": "custom", "c": [1, 1, 1, 1], "phi": {"type": "gb", "a": -1.0, "b": 0, "e": -1}},
    })
    code, out, _ = run(["simulate", cfg], capsys)
    assert code == 0
    assert float(list(csv.DictReader(io.StringIO(out)))[0]["alpha"]) == pytest.approx(2.0 / 3.0)


# ---------------------------------------------------------------------------
# table1 and general behaviour


def test_table1_deterministic_files(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["table1", "--reps", "20", "--seed", "9", "--out", str(a)], capsys)[0] == 0
    assert run(["table1", "--reps", "20", "--seed", "9", "--threads", "4", "--out", str(b)], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_text().strip().split("\n")) == 61


def test_help_lists_every_flag(capsys):
    parser = build_parser()
    sub = parser._subparsers._group_actions[0].choices
    for name, sp in sub.items():
        text = sp.format_help()
        for action in sp._actions:
            for opt in action.option_strings:
                assert opt in text, (name, opt)


@pytest.mark.parametrize("argv", [["table1", "--bogus"], ["bounds", "--mu", "1.2", "--j", "0", "--n", "4", "-x"], []])
def test_unknown_flags_are_usage_errors(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 1


def test_threads_must_be_positive(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["table1", "--reps", "10", "--threads", "0"])
    assert exc.value.code == 1
