import csv
import io as stdio
import json
import subprocess
import sys

import pytest

from laplacewalk import cli, exact


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def usage_error(capsys, *argv):
    with pytest.raises(SystemExit) as e:
        cli.main(list(argv))
    capsys.readouterr()
    return e.value.code


def test_parse_values():
    assert cli.parse_values("1..4", integer=True) == [1, 2, 3, 4]
    assert cli.parse_values("0.5,1,inf") == [0.5, 1.0, float("inf")]


def test_exact_table_csv(capsys):
    code, out, _ = run(capsys, "exact", "tail_dk", "--k", "1..3", "--v", "0.5")
    assert code == 0
    rows = list(csv.reader(stdio.StringIO(out)))
    assert rows[0] == ["k", "v", "value"] and len(rows) == 4
    assert float(rows[2][2]) == exact.tail_dk(2, 0.5)
    assert "\r\n" in out


def test_exact_table_json(capsys):
    code, out, _ = run(capsys, "exact", "ndes_pmf", "--v", "1", "--order", "4", "--format", "json")
    body = json.loads(out)
    assert code == 0 and body["law"] == "ndes_pmf" and body["params"] == {"order": 4}
    assert len(body["values"]) == 5
    assert sum(r["value"] for r in body["values"]) < 1


def test_exact_agreement(capsys):
    code, out, _ = run(capsys, "exact", "agreement", "--v", "1", "--z", "0.5", "--K", "60")
    rows = list(csv.reader(stdio.StringIO(out)))
    assert code == 0 and rows[0][-2:] == ["error", "tailBound"]
    assert float(rows[1][5]) < 1e-9


def test_exact_to_file(tmp_path, capsys):
    out = tmp_path / "t.csv"
    code, text, _ = run(capsys, "exact", "max_mnu_tail", "--t", "1", "--out", str(out))
    assert code == 0 and text == ""
    assert out.read_bytes().startswith(b"t,value\r\n")


@pytest.mark.parametrize("argv", [
    ["exact", "no_such_law"],
    ["exact", "tail_dk", "--k", "0", "--v", "1"],
    ["exact", "tail_dk", "--v", "1"],
    ["exact", "mellin", "--s", "3"],
    ["simulate", "geiger", "--replicas", "5"],
    ["simulate", "nonsense", "--seed", "1"],
    ["verify", "stopped"],
    ["verify", "nope", "--seed", "1"],
    ["verify", "series", "--replicas", "0"],
    ["verify", "series", "--safety", "3"],
    ["verify", "series", "--format", "xml"],
])
def test_usage_errors_exit_2(capsys, argv):
    assert usage_error(capsys, *argv) == 2


def test_domain_message_names_valid_range(capsys):
    with pytest.raises(SystemExit):
        cli.main(["exact", "tail_dk", "--k", "0", "--v", "1"])
    assert "k >= 1" in capsys.readouterr().err


def test_verify_without_seed_for_deterministic_suites(capsys):
    code, out, err = run(capsys, "verify", "agreement")
    body = json.loads(out)
    assert code == 0 and body["passed"] and body["seed"] is None
    assert all(r["runtimeMs"] is None for r in body["reports"])
    assert "[PASS]" in err


def test_verify_failure_exits_1(capsys, monkeypatch):
    from laplacewalk import stats, verify

    def failing(cfg):
        return [stats.exact_check(1.0, 2.0, 0.1, name="forced")]

    monkeypatch.setitem(verify.SUITES, "series", (2, failing))
    code, out, _ = run(capsys, "verify", "series", "--format", "csv")
    assert code == 1 and "forced" in out


@pytest.mark.parametrize("sampler", ["stopped_walk", "marked_bd", "geiger", "w_branching", "h_chain",
                                     "feller_w", "poisson_cluster", "mk_infty", "walk_minimum_gap"])
def test_simulate_dumps(capsys, sampler):
    extra = {"feller_w": ["--n", "50"], "walk_minimum_gap": ["--n", "50"], "mk_infty": ["--K", "2"]}
    code, out, _ = run(capsys, "simulate", sampler, "--seed", "3", "--replicas", "20", "--K", "3",
                       *extra.get(sampler, []))
    rows = list(csv.reader(stdio.StringIO(out)))
    assert code == 0 and rows[0] == ["replica", "k", "value"]


def test_simulate_besq_path_and_json(capsys):
    code, out, _ = run(capsys, "simulate", "besq_path", "--seed", "1", "--grid-step", "0.5", "--v-max", "2")
    assert code == 0 and out.splitlines()[0] == "t,Q" and len(out.splitlines()) == 6
    code, out, _ = run(capsys, "simulate", "h_chain", "--seed", "1", "--replicas", "2", "--K", "2",
                       "--format", "json")
    assert json.loads(out)["params"] == {"seed": 1, "replicas": 2}


def test_simulate_is_byte_deterministic_across_threads(capsys):
    _, a, _ = run(capsys, "simulate", "stopped_walk", "--seed", "9", "--replicas", "300")
    _, b, _ = run(capsys, "simulate", "stopped_walk", "--seed", "9", "--replicas", "300", "--threads", "4")
    _, c, _ = run(capsys, "simulate", "stopped_walk", "--seed", "10", "--replicas", "300")
    assert a == b and a != c


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "laplacewalk", "exact", "first_death_tail", "--t", "0"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.splitlines()[1] == "0,1"
