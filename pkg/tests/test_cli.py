import json

import pytest

from pcmlogic.cli import (
    EXIT_CONFIG,
    EXIT_MARGIN,
    EXIT_OK,
    EXIT_USAGE,
    EXIT_VERIFY,
    main,
)

from conftest import FULL_ADDER


def run(tmp_path, *args, out="o"):
    return main(["--out", str(tmp_path / out), *args])


def load(tmp_path, name, out="o"):
    return json.loads((tmp_path / out / name).read_text())


def test_characterize_short(tmp_path):
    assert run(tmp_path, "characterize", "--cycles", "5") == EXIT_OK
    s = load(tmp_path, "characterize.json")
    assert s["set_transition_V"] == 1.2 and s["reset_transition_V"] == 3.0
    assert s["endurance"]["switch_count"] == 5 and not s["endurance"]["endurance_warning"]
    head = (tmp_path / "o" / "set_transient.csv").read_text().splitlines()[0]
    assert head == "time_s,v_cell_V,current_A,resistance_ohm"


def test_characterize_below_threshold_flat(tmp_path):
    assert run(tmp_path, "characterize", "--cycles", "1", "--amplitudes", "0.2,0.5,0.9") == EXIT_OK
    rows = (tmp_path / "o" / "sweep.csv").read_text().splitlines()[1:]
    assert [r.split(",")[1] for r in rows] == ["1000000"] * 3
    assert load(tmp_path, "characterize.json")["set_transition_V"] is None


@pytest.mark.parametrize("args,out", [(["NOR", "0", "0"], 1), (["NIMP", "1", "1"], 0),
                                      (["IMPLY", "0", "-", "--out-old", "0"], 1)])
def test_gate(tmp_path, args, out):
    assert run(tmp_path, "gate", *args) == EXIT_OK
    rep = load(tmp_path, "gate.json")
    assert rep["out"] == out and rep["inputs_stable"]
    lines = (tmp_path / "o" / "trace.csv").read_text().splitlines()
    assert lines[0].startswith("time_s,v_be_V,cell0_v_V")
    events = load(tmp_path, "events.json")
    assert any(e["kind"] == "set" for e in events) == bool(out)


def test_gate_nor_be_transient_vs_flat_nimp(tmp_path):
    run(tmp_path, "gate", "NOR", "0", "0", out="a")
    run(tmp_path, "gate", "NIMP", "1", "1", out="b")

    def plateau_span(out, t0, t1):
        rows = [list(map(float, r.split(","))) for r in (tmp_path / out / "trace.csv").read_text().splitlines()[1:]]
        vals = [r[1] for r in rows if t0 <= r[0] <= t1]
        return max(vals) - min(vals)

    # OUT plateau windows: 3.2-4.2 us for the two-part NOR pulse, 70-71 us for NIMP
    assert plateau_span("a", 3.3e-6, 4.1e-6) > 0.1
    assert plateau_span("b", 70.1e-6, 70.9e-6) < 1e-3


def test_gate_usage_errors(tmp_path):
    assert run(tmp_path, "gate", "IMPLY", "0", "1") == EXIT_USAGE
    with pytest.raises(SystemExit) as e:
        run(tmp_path, "gate", "NOR", "2", "0")
    assert e.value.code == EXIT_USAGE


def test_margins(tmp_path, capsys):
    assert run(tmp_path, "margins", "all") == EXIT_OK
    assert capsys.readouterr().out.count("PASS") == 4
    assert run(tmp_path, "margins", "OR", "--lrs-max", "50000", "--hrs-min", "50000") == EXIT_MARGIN
    assert run(tmp_path, "margins", "NOR", "--r-fix", "100000") == EXIT_MARGIN
    assert load(tmp_path, "margins.json")["r_fix"] == 100000


def test_montecarlo(tmp_path):
    assert run(tmp_path, "--seed", "7", "montecarlo", "NOR", "20") == EXIT_OK
    rep = load(tmp_path, "montecarlo_NOR.json")
    assert rep["success_rate"] == 1.0 and rep["seed"] == 7
    assert run(tmp_path, "montecarlo", "NOR", "0") == EXIT_USAGE


def test_montecarlo_extreme_sigma(tmp_path):
    code = run(tmp_path, "montecarlo", "NIMP", "4", "--sigma-v-th", "0.5", "--sigma-r-lrs", "0.5",
               "--sigma-r-hrs", "0.5")
    assert code == EXIT_VERIFY
    assert load(tmp_path, "montecarlo_NIMP.json")["failures"][0]["seeds"]


def test_compile_and_run_xor(tmp_path, capsys):
    net = tmp_path / "xor.net"
    net.write_text("inputs a b; x = XOR(a,b); out x;\n")
    assert run(tmp_path, "compile", str(net), "--row-width", "3", out="c") == EXIT_OK
    assert load(tmp_path, "stats.json", "c")["computation_steps"] == 2
    prog = str(tmp_path / "c" / "program.txt")
    assert run(tmp_path, "run", prog, "--all-vectors", "--mode", "circuit", out="r") == EXIT_OK
    rep = load(tmp_path, "run.json", "r")
    assert rep["matched"] == 4 and rep["computation_steps"] == 2
    assert "4/4 vectors match, 2 computation steps" in capsys.readouterr().out
    assert run(tmp_path, "run", prog, "--inputs", "10", out="r") == EXIT_OK
    assert load(tmp_path, "run.json", "r")["outputs"] == {"x": 1}
    assert run(tmp_path, "run", prog, "--inputs", "101", out="r") == EXIT_USAGE


def test_full_adder_end_to_end(tmp_path):
    net = tmp_path / "fa.net"
    net.write_text(FULL_ADDER)
    assert run(tmp_path, "compile", str(net), "--row-width", "8", out="c") == EXIT_OK
    assert run(tmp_path, "run", str(tmp_path / "c" / "program.txt"), "--all-vectors", out="r") == EXIT_OK
    assert load(tmp_path, "run.json", "r")["matched"] == 8


def test_compile_errors(tmp_path):
    net = tmp_path / "bad.net"
    net.write_text("inputs a\nx = AND(a, y)\nout x\n")
    assert run(tmp_path, "compile", str(net)) == EXIT_CONFIG
    net.write_text(FULL_ADDER)
    assert run(tmp_path, "compile", str(net), "--row-width", "2") == EXIT_CONFIG
    assert run(tmp_path, "compile", str(tmp_path / "missing.net")) == EXIT_CONFIG


def test_run_detects_mismatch(tmp_path):
    net = tmp_path / "xor.net"
    net.write_text("inputs a b; x = XOR(a,b); out x;\n")
    run(tmp_path, "compile", str(net), out="c")
    prog = tmp_path / "c" / "program.txt"
    prog.write_text(prog.read_text().replace("in1=1 in2=0", "in1=0 in2=1"))
    assert run(tmp_path, "run", str(prog), "--all-vectors", out="r") == EXIT_VERIFY


def test_config_error(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"device": {"v_th": 9}}')
    assert main(["--config", str(cfg), "--out", str(tmp_path / "o"), "margins", "all"]) == EXIT_CONFIG


def test_manifest_and_determinism(tmp_path):
    for out in ("a", "b"):
        assert main(["--preset", "integrated", "--seed", "3", "--out", str(tmp_path / out),
                     "montecarlo", "OR", "3"]) == EXIT_OK
    m = load(tmp_path, "manifest.json", "a")
    assert m["subcommand"] == "montecarlo" and m["preset"] == "integrated" and m["seed"] == 3
    assert m["effective"]["circuit"]["c_p"] == 1e-14
    for name in ("montecarlo_OR.json", "scatter_OR.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_global_flags_after_subcommand(tmp_path):
    assert main(["margins", "NOR", "--out", str(tmp_path / "x"), "--preset", "integrated"]) == EXIT_OK
    assert load(tmp_path, "manifest.json", "x")["preset"] == "integrated"
