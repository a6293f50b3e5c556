import io
import json
import subprocess
import sys

import pytest

from tullock_brd import cli
from tullock_brd import config as C


def write(tmp_path, name, doc):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def call(argv):
    out = io.StringIO()
    code = cli.main(argv, stdout=out)
    return code, out.getvalue()


SIM = {"contest": {"n": 2, "cost": {"kind": "linear"}}, "x0": [0.5, 0.5], "stop": {"eps": 1e-8, "max_steps": 100}}
A1 = {
    "contest": {
        "costs": [
            {"kind": "scaled-power", "coeff": 1.0, "r": 0.2},
            {"kind": "scaled-power", "coeff": 0.05, "r": 0.2},
        ]
    },
    "x0": [0.1058, 1.3102],
    "policy": {"kind": "alternating", "first": 0},
    "stop": {"cycle_tol": 5e-4, "max_steps": 200},
}
SWEEP = {"n": [2], "cost": [{"kind": "linear"}], "eps": [1e-2, 1e-4, 1e-8, 1e-12], "seeds": [0, 1], "x0": {"fill": 0.5}}
DSWEEP = {"mode": "dissum", "n": [4, 8, 16], "eps": [1e-6], "seeds": [0, 1, 2, 3], "B": 0.5, "selection": "uniform"}


def test_simulate_converges(tmp_path):
    code, out = call(["simulate", write(tmp_path, "c.json", SIM)])
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "t,mover,x_0,x_1"
    assert lines[-1].startswith("# summary ")
    assert json.loads(lines[-1][len("# summary ") :])["converged"] is True


def test_simulate_equilibrium_start_single_row(tmp_path):
    doc = dict(SIM, x0=[1, 1])
    out = tmp_path / "t.csv"
    code, _ = call(["simulate", write(tmp_path, "c.json", doc), "--out", str(out)])
    assert code == 0
    assert out.read_text().splitlines() == ["t,mover,x_0,x_1", "0,,1,1"]
    summary = json.loads((tmp_path / "t.csv.summary.json").read_text())
    assert summary["steps"] == 0


def test_simulate_max_steps_zero(tmp_path):
    code, _ = call(["simulate", write(tmp_path, "c.json", SIM), "--set", "stop.max_steps=0"])
    assert code == 2


def test_simulate_schedule_end(tmp_path):
    doc = dict(SIM, policy={"kind": "schedule", "agents": [1]})
    code, _ = call(["simulate", write(tmp_path, "c.json", doc)])
    assert code == 2


def test_simulate_cycle_exit_code(tmp_path):
    code, _ = call(["simulate", write(tmp_path, "a1.json", A1)])
    assert code == 3


def test_cycle_command(tmp_path):
    code, out = call(["cycle", write(tmp_path, "a1.json", A1)])
    assert code == 3
    rep = json.loads(out)
    assert rep["cycle"]["period"] == 4
    assert rep["stop_reason"] == "cycle"


def test_jsonl_format(tmp_path):
    code, out = call(["simulate", write(tmp_path, "c.json", SIM), "--format", "jsonl"])
    recs = [json.loads(line) for line in out.splitlines()]
    assert recs[0] == {"t": 0, "mover": None, "x": [0.5, 0.5]}
    assert "summary" in recs[-1]
    x = recs[1]["x"][1]
    assert x == float(repr(x))


def test_csv_round_trips_17_digits(tmp_path):
    _, out = call(["simulate", write(tmp_path, "c.json", SIM)])
    v = out.splitlines()[2].split(",")[3]
    assert len(v.replace(".", "").lstrip("0")) == 17


def test_set_overrides(tmp_path):
    path = write(tmp_path, "c.json", SIM)
    code, out = call(["simulate", path, "--set", "x0=[1,1]", "--set", "stop.eps=0.001"])
    assert code == 0 and len(out.splitlines()) == 3


@pytest.mark.parametrize(
    "doc",
    [
        {"contest": {"n": 2}},
        {"contest": {"n": 2, "cost": {"kind": "nope"}}},
        {"contest": {"n": 2, "cost": {"kind": "linear"}}, "x0": [1, 2, 3]},
        {"contest": {"n": 2, "cost": {"kind": "linear"}}, "stop": {"bogus": 1}},
        {"contest": {"n": 3, "cost": {"kind": "linear"}}, "policy": "alternating"},
        {"contest": {"n": 2, "cost": {"kind": "linear", "coeff": 2.0}}},
    ],
)
def test_malformed_config_exits_64(tmp_path, capsys, doc):
    code, out = call(["simulate", write(tmp_path, "c.json", doc)])
    assert code == 64 and out == ""
    assert capsys.readouterr().err


def test_invalid_json_and_missing_file(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert call(["simulate", str(p)])[0] == 64
    assert call(["simulate", str(tmp_path / "missing.json")])[0] == 64
    assert call(["simulate", str(p), "--set", "novalue"])[0] == 64


def test_bad_arguments_exit_64(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["simulate"])
    assert exc.value.code == 64
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate", "x"])
    assert exc.value.code == 64


def test_dissum_command(tmp_path):
    doc = {"n": 5, "B": 0.5, "z0": [1, -2, 0.5, 0, 3], "eps": 1e-6}
    code, out = call(["dissum", write(tmp_path, "d.json", doc)])
    assert code == 0
    assert out.splitlines()[0] == "t,mover,f,z_0,z_1,z_2,z_3,z_4"
    code, _ = call(["dissum", write(tmp_path, "d.json", doc), "--set", "max_steps=2"])
    assert code == 2


def test_dissum_instance(tmp_path):
    doc = {"instance": {"kind": "two_coordinate", "kappa": 1.0, "B": 0.9}, "eps": 1e-6}
    code, out = call(["dissum", write(tmp_path, "d.json", doc), "--format", "jsonl"])
    assert code == 0
    summary = json.loads(out.splitlines()[-1])["summary"]
    assert summary["steps"] >= 133
    bad = {"instance": {"kind": "two_coordinate", "kappa": 1.0, "B": 0.3}, "eps": 1e-6}
    assert call(["dissum", write(tmp_path, "e.json", bad)])[0] == 64


def test_sweep_two_agent(tmp_path):
    out = tmp_path / "sweep.json"
    code, _ = call(["sweep", write(tmp_path, "s.json", SWEEP), "--out", str(out)])
    assert code == 0
    rep = json.loads(out.read_text())
    (g,) = rep["groups"]
    assert g["mean_steps"] == sorted(g["mean_steps"])
    assert "max_residual" in g["fit"] and g["fit"]["C"] <= 6
    assert len(rep["cells"]) == 8
    assert len(list((tmp_path / "sweep.json.cells").iterdir())) == 8


def test_sweep_dissum_quantiles(tmp_path):
    code, out = call(["sweep", write(tmp_path, "s.json", DSWEEP)])
    assert code == 0
    rep = json.loads(out)
    assert [g["n"] for g in rep["groups"]] == [4, 8, 16]
    for g in rep["groups"]:
        assert set(g["quantiles"]) == {"q10", "q50", "q90", "q95", "q99"}
        assert g["trials"] == 4


def test_sweep_parallel_matches_serial(tmp_path):
    path = write(tmp_path, "s.json", DSWEEP)
    a = call(["sweep", path])[1]
    b = call(["sweep", path, "--jobs", "3"])[1]
    assert a == b


@pytest.mark.parametrize(
    "override",
    ["seeds=[]", "eps=[]", "eps=[1.5]", "n=[1]", "mode=\"other\"", "seeds=[0.5]"],
)
def test_sweep_bad_axes_exit_64(tmp_path, override):
    code, _ = call(["sweep", write(tmp_path, "s.json", SWEEP), "--set", override])
    assert code == 64


def test_sweep_crash_writes_partial(tmp_path, monkeypatch):
    real = cli.run_cell

    def flaky(cell):
        if cell["eps"] == 1e-8:
            raise RuntimeError("boom")
        return real(cell)

    monkeypatch.setattr(cli, "run_cell", flaky)
    out = tmp_path / "sweep.json"
    code, _ = call(["sweep", write(tmp_path, "s.json", SWEEP), "--out", str(out)])
    assert code == 1
    assert not out.exists()
    partial = json.loads((tmp_path / "sweep.json.partial.json").read_text())
    assert partial["complete"] is False
    assert "boom" in partial["failed"][0]["error"]
    assert len(partial["cells"]) >= 1


def test_verify_core_passes():
    code, out = call(["verify", "core"])
    assert code == 0
    rep = json.loads(out)
    assert rep["passed"] and rep["failed"] == []


def test_verify_auxiliary_suite_contents():
    names = [f.__name__ for f in cli.V.SUITES["lemmas"]]
    assert {"check_partition_all", "check_coupon", "check_reverse_lipschitz"} <= set(names)


def test_verify_unknown_suite():
    assert call(["verify", "everything"])[0] == 64


def test_verify_detects_injected_sign_flip():
    from tullock_brd import discounted_sum

    original = discounted_sum.potential
    code, out = call(["verify", "dissum", "--inject", "potential-sign-flip"])
    assert code == 1
    assert "potential_monotonicity" in json.loads(out)["failed"]
    assert discounted_sum.potential is original


def test_apply_overrides_nested():
    doc = C.apply_overrides({"a": {"b": 1}}, ["a.c=2", "x.y.z=\"s\"", "w=plain"])
    assert doc == {"a": {"b": 1, "c": 2}, "x": {"y": {"z": "s"}}, "w": "plain"}


def test_byte_identical_across_processes(tmp_path):
    cfg = write(tmp_path, "c.json", {
        "contest": {"n": 4, "cost": {"kind": "power", "r": 1.0}},
        "x0": {"fill": 5.0},
        "policy": {"kind": "uniform"},
        "stop": {"eps": 1e-9, "max_steps": 5000},
    })
    argv = [sys.executable, "-m", "tullock_brd.cli", "simulate", cfg, "--seed", "7", "--format", "jsonl"]
    a = subprocess.run(argv, capture_output=True, check=True).stdout
    b = subprocess.run(argv, capture_output=True, check=True).stdout
    assert a == b and len(a) > 100
    sweep = write(tmp_path, "s.json", SWEEP)
    argv = [sys.executable, "-m", "tullock_brd.cli", "sweep", sweep]
    assert subprocess.run(argv, capture_output=True).stdout == subprocess.run(argv, capture_output=True).stdout
