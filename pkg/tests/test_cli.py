import os

import pytest

from aggrml.cli import build_parser, load_input, main, parse_list
from aggrml.errors import ConfigError
from aggrml.lsh_aggregate import read_index

SMALL = "synth:400,6,20,0.3"


def run_cli(*argv):
    return main(list(argv))


def test_parse_list_comma_and_sweep():
    assert parse_list("10,20,100") == [10.0, 20.0, 100.0]
    assert parse_list("0.01:0.1:0.01") == [round(0.01 * i, 10) for i in range(1, 11)]
    assert parse_list("0.05:0.1:0.05") == [0.05, 0.1]
    with pytest.raises(ConfigError):
        parse_list("1:0:1")
    with pytest.raises(ConfigError):
        parse_list("a,b")


def test_load_input_synth_shorthands():
    ds = load_input("synth:100,4,5,0.2", "dense", 1)
    assert ds.n_points == 100 and ds.n_dims == 4
    rm = load_input("synthr:40,20,0.4", "ratings", 1)
    assert rm.n_users == 40 and rm.n_items == 20
    with pytest.raises(ConfigError):
        load_input("/nonexistent/file.csv", "dense", 1)


def test_aggregate_writes_index(tmp_path):
    out = tmp_path / "out"
    rc = run_cli("aggregate", "--input", SMALL, "--ratio", "10",
                 "--seed", "3", "--out", str(out))
    assert rc == 0
    build = read_index(out / "index.txt")
    assert build.index.n_points == 400


def test_run_writes_report(tmp_path):
    out = tmp_path / "out"
    rc = run_cli("run", "--workload", "knn", "--input", SMALL, "--ratio", "10",
                 "--epsilon", "0.05", "--seed", "1", "--partitions", "2",
                 "--test-fraction", "0.05", "--out", str(out))
    assert rc == 0
    lines = (out / "report.csv").read_text().splitlines()
    assert lines[0].startswith("workload,pipeline,ratio,epsilon,seed,partitions")
    assert len(lines) == 2
    assert lines[1].startswith("knn,accurateml,10.0,0.05,1,2,")
    assert (out / "wall_times.csv").exists()


def test_bench_deterministic_csv(tmp_path):
    args = ["bench", "--workload", "knn", "--input", SMALL, "--sweep-ratio", "10",
            "--sweep-epsilon", "0.05:0.1:0.05", "--seed", "5", "--partitions", "2",
            "--test-fraction", "0.05"]
    assert run_cli(*args, "--out", str(tmp_path / "a")) == 0
    assert run_cli(*args, "--out", str(tmp_path / "b")) == 0
    assert ((tmp_path / "a" / "report.csv").read_bytes()
            == (tmp_path / "b" / "report.csv").read_bytes())


def test_compare_budget_parity(tmp_path):
    out = tmp_path / "out"
    rc = run_cli("compare", "--workload", "knn", "--input", SMALL, "--ratio", "10",
                 "--epsilon", "0.05", "--seed", "2", "--partitions", "2",
                 "--test-fraction", "0.05", "--out", str(out))
    assert rc == 0
    rows = (out / "report.csv").read_text().splitlines()[1:]
    by_pipeline = {r.split(",")[1]: r.split(",") for r in rows}
    assert set(by_pipeline) == {"exact", "accurateml", "sampling"}
    touched_aml = int(by_pipeline["accurateml"][6])
    touched_samp = int(by_pipeline["sampling"][6])
    n_queries = 20  # 0.05 * 400
    assert abs(touched_samp - touched_aml) <= 2 * n_queries


def test_epsilon_out_of_range_exits_2(tmp_path):
    rc = run_cli("run", "--input", SMALL, "--epsilon", "1.5",
                 "--test-fraction", "0.05", "--out", str(tmp_path / "o"))
    assert rc == 2


def test_unknown_flag_exits_2():
    with pytest.raises(SystemExit) as exc:
        run_cli("run", "--frobnicate")
    assert exc.value.code == 2


def test_missing_input_exits_2(tmp_path):
    rc = run_cli("run", "--input", "/no/such/file.csv",
                 "--out", str(tmp_path / "o"))
    assert rc == 2


def test_writes_stay_under_out(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    out = tmp_path / "only_here"
    rc = run_cli("run", "--input", SMALL, "--epsilon", "0.05", "--partitions", "2",
                 "--test-fraction", "0.05", "--out", str(out))
    assert rc == 0
    assert set(os.listdir(tmp_path)) == {"only_here"}


def test_seed_env_fallback(monkeypatch):
    monkeypatch.setenv("AGGRML_SEED", "77")
    args = build_parser().parse_args(["run"])
    assert args.seed == 77


def test_help_lists_every_registered_flag():
    parser = build_parser()
    sub_actions = [a for a in parser._actions
                   if isinstance(a, type(parser._subparsers._group_actions[0]))]
    for name, sub in sub_actions[0].choices.items():
        text = sub.format_help()
        for action in sub._actions:
            for opt in action.option_strings:
                assert opt in text, f"{name}: {opt} missing from --help"
