"""Schema round trips, generators and the command line."""
import json
import math

import numpy as np
import pytest

from smoothpd import generators as gen
from smoothpd import harness, schema
from smoothpd.cli import main
from smoothpd.core import InputError, total_cost
from smoothpd.oracle import offline_opt_general


def test_general_round_trip():
    inst = gen.general(5, 4, seed=2)
    back = schema.general_from_json(json.loads(json.dumps(schema.general_to_json(inst))))
    assert offline_opt_general(back)[0] == offline_opt_general(inst)[0]
    assign = {r.id: 0 for r in inst.requests}
    assert total_cost(back, assign) == total_cost(inst, assign)


def test_row_stream_round_trip(tmp_path):
    f, n, rows = gen.covering("norm", 5, 6, 3, seed=1)
    schema.write_rows(rows, tmp_path / "rows.jsonl")
    assert list(schema.read_rows(tmp_path / "rows.jsonl")) == rows
    f2, n2, rows2 = schema.covering_from_json(schema.covering_to_json(f, n, rows))
    assert n2 == n and rows2 == rows and f2.of_set([0, 2]) == f.of_set([0, 2])


def test_app_round_trips():
    r = gen.routing(5, 7, 3, seed=4)
    assert schema.routing_from_json(schema.routing_to_json(r)).requests == r.requests
    v = gen.vecsched(4, 2, 3, math.inf, seed=4)
    back = schema.vecsched_from_json(json.loads(json.dumps(schema.vecsched_to_json(v))))
    assert np.array_equal(back.p, v.p) and math.isinf(back.alpha)
    e = gen.energy(3, 2, prize=True, seed=4)
    assert schema.energy_from_json(json.loads(json.dumps(schema.energy_to_json(e)))).jobs == e.jobs
    fac = gen.facility(6, 2, 4, seed=4)
    back = schema.facility_from_json(schema.facility_to_json(fac))
    assert np.array_equal(back.dist, fac.dist) and back.clients == fac.clients


def test_malformed_input():
    with pytest.raises(InputError):
        schema.general_from_json({"requests": [{"id": 0}]})


def test_generators_are_seeded():
    a = schema.dump_json(schema.general_to_json(gen.general(6, 4, seed=9)))
    b = schema.dump_json(schema.general_to_json(gen.general(6, 4, seed=9)))
    c = schema.dump_json(schema.general_to_json(gen.general(6, 4, seed=10)))
    assert a == b != c


def test_generators_size_zero_and_negative():
    assert gen.general(0, 0).requests == ()
    assert gen.covering("polynomial", 0, 0, 1)[2] == []
    assert gen.vecsched(0, 2, 2).shape[0] == 0
    assert gen.energy(0, 1).jobs == ()
    assert gen.facility(3, 1, 0).clients == ()
    assert gen.routing(0, 0, 0).requests == ()
    with pytest.raises(InputError):
        gen.general(-1, 2)
    with pytest.raises(InputError):
        gen.covering("mystery", 3, 1, 1)


def test_generated_covering_rows_are_satisfiable():
    for seed in range(20):
        _, n, rows = gen.covering("piecewise", 5, 8, 4, seed)
        assert all(sum(r.b.values()) >= 1 - 1e-12 and len(r.b) <= 4 for r in rows)


def test_generate_cli_is_byte_stable(tmp_path, capsys):
    for name in ("a", "b"):
        assert main(["generate", "covering", "--family", "submodular", "--seed", "3", "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()


def test_greedy_cli(tmp_path, capsys):
    path = tmp_path / "g.json"
    main(["generate", "general", "--n", "5", "--m", "3", "--out", str(path)])
    assert main(["greedy", "run", "--instance", str(path), "--check-dual", "--oracle"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["feasible"] is True and out["ratio"] <= out["bound"] + 1e-9


def test_greedy_cli_skips_large_dual_check(tmp_path, capsys):
    path = tmp_path / "g.json"
    main(["generate", "general", "--n", "14", "--m", "3", "--out", str(path)])
    assert main(["greedy", "run", "--instance", str(path), "--check-dual"]) == 0
    captured = capsys.readouterr()
    assert json.loads(captured.out)["feasible"] == harness.SKIPPED
    assert harness.SKIPPED in captured.err


def test_cover_cli_with_row_stream(tmp_path, capsys):
    f, n, rows = gen.covering("polynomial", 3, 3, 2, seed=5)
    schema.dump_json(schema.covering_to_json(f, n), tmp_path / "c.json")
    schema.write_rows(rows, tmp_path / "rows.jsonl")
    assert main(["cover", "run", "--instance", str(tmp_path / "c.json"), "--rows", str(tmp_path / "rows.jsonl"), "--oracle"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["rows_satisfied"] and "bound_derived" in out and "bound_expr" in out


def test_smoothness_cli(tmp_path, capsys):
    (tmp_path / "sq.json").write_text(json.dumps({"kind": "polynomial", "coeffs": [0, 0, 1]}))
    assert main(["smoothness", "verify", "--instance", str(tmp_path / "sq.json"), "--lambda", "1", "--n", "3"]) == 1
    out = json.loads(capsys.readouterr().out)
    assert out["holds"] is False and out["lhs"] > out["rhs"] and "witness" in out
    assert main(["smoothness", "verify", "--instance", str(tmp_path / "sq.json"), "--lambda", "4", "--mu", "0.5",
                 "--n", "4"]) == 0
    assert "HOLDS" in capsys.readouterr().out


def test_bad_input_exit_code(tmp_path, capsys):
    (tmp_path / "bad.json").write_text("{not json")
    assert main(["greedy", "run", "--instance", str(tmp_path / "bad.json")]) == 2
    assert "error" in capsys.readouterr().err


def test_malformed_cost_exit_code(tmp_path, capsys):
    path = tmp_path / "cost.json"
    path.write_text(json.dumps({"kind": "polynomial", "coefficients": {"2": 1.0}}))
    assert main(["costlib", "params", "--cost", str(path)]) == 2
    assert "malformed" in capsys.readouterr().err


def test_experiment_empty_list_gives_header_only(tmp_path, capsys):
    (tmp_path / "cfg.json").write_text('{"experiments": []}')
    assert main(["experiment", str(tmp_path / "cfg.json"), "--csv", str(tmp_path / "out.csv")]) == 0
    assert (tmp_path / "out.csv").read_text().strip() == ",".join(harness.COLUMNS)


def test_experiment_key_value_config_and_determinism(tmp_path, capsys):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("algorithm = greedy\nseeds = [0, 1, 2]\n# comment\nrequests = [2, 5]\n")
    for name, workers in (("a.csv", "1"), ("b.csv", "2")):
        assert main(["experiment", str(cfg), "--csv", str(tmp_path / name), "--workers", workers]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert len((tmp_path / "a.csv").read_text().splitlines()) == 4


def test_experiment_reports_skipped_dual_check(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"experiments": [{"algorithm": "greedy", "seeds": [0], "requests": 14, "oracle": False}]}))
    main(["experiment", str(cfg), "--csv", str(tmp_path / "o.csv"), "--check-dual"])
    assert harness.SKIPPED in capsys.readouterr().err
    assert harness.SKIPPED in (tmp_path / "o.csv").read_text()


def test_mlext_cli(tmp_path, capsys):
    (tmp_path / "sq.json").write_text(json.dumps({"kind": "polynomial", "coeffs": [0, 0, 1]}))
    assert main(["mlext", "eval", "--cost", str(tmp_path / "sq.json"), "--x", "0.5,0.5"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["F"] == pytest.approx(1.5) and out["grad"] == pytest.approx([2.0, 2.0])
