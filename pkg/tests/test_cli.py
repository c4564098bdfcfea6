import json

import pytest

from rmlab import cli
from rmlab.errors import InvalidParams
from rmlab.experiments import SpectralSample, run_replication
from rmlab.matgen import MatrixParams

HEADER = "rep,lambda1,lambda2,est1,est2,lambda1_centered,sum_sq_dev"


def test_parse_happy_path():
    cmd = cli.parse("verify-clt --p 256 --n 512 --mu 1 --sigma 1 --reps 2000 --seed 42".split(), env={})
    assert cmd.name == "verify-clt"
    assert cmd.config.params == MatrixParams(256, 512, 1.0, 1.0, 42)
    assert cmd.config.replications == 2000
    assert cmd.config.parallelism == 1


def test_parse_rejects_bad_size():
    with pytest.raises(cli.UsageError, match="--p"):
        cli.parse(["verify-clt", "--p", "0"], env={})
    assert cli.main(["verify-clt", "--p", "0"]) == 1


def test_parse_grid():
    cmd = cli.parse(
        "error-scaling --grid 64:128,128:256,256:512,512:1024 --reps 200 --seed 42".split(), env={}
    )
    assert cmd.config.size_grid == ((64, 128), (128, 256), (256, 512), (512, 1024))
    with pytest.raises(cli.UsageError):
        cli.parse(["error-scaling", "--grid", "64x128"], env={})
    with pytest.raises(cli.UsageError):
        cli.parse(["error-scaling", "--grid", "8:16,16:32"], env={})


def test_unknown_flags_rejected():
    for argv in (["simulate", "--bogus", "1"], ["simulate", "--rep", "3"], ["simulate", "extra"]):
        with pytest.raises(cli.UsageError):
            cli.parse(argv, env={})


def test_tolerance_overrides():
    cmd = cli.parse(["verify-clt", "--tol-clt-ks", "0.1", "--tol-clt_mean=0.5"], env={})
    assert cmd.config.tolerances == {"clt_ks": 0.1, "clt_mean": 0.5}
    with pytest.raises(cli.UsageError):
        cli.parse(["verify-clt", "--tol-unknown", "1"], env={})
    with pytest.raises(cli.UsageError):
        cli.parse(["verify-clt", "--tol-clt-ks"], env={})


def test_seed_environment_fallback():
    assert cli.parse(["simulate"], env={}).config.params.seed == 42
    assert cli.parse(["simulate"], env={"RMLAB_SEED": "9"}).config.params.seed == 9
    assert cli.parse(["simulate", "--seed", "5"], env={"RMLAB_SEED": "9"}).config.params.seed == 5


def test_degenerate_row(tmp_path):
    s = run_replication(MatrixParams(3, 5, 2.0, 0.0), 0)
    path = tmp_path / "s.csv"
    cli.write_samples([s], path)
    assert path.read_text() == HEADER + "\n0,12,0,12,12,0,0\n"


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_round_trip(tmp_path, fmt):
    samples = [run_replication(MatrixParams(7, 11, 0.3, 1.7, 5), i) for i in range(4)]
    path = tmp_path / f"s.{fmt}"
    cli.write_samples(samples, path, fmt, MatrixParams(7, 11, 0.3, 1.7, 5))
    assert cli.read_samples(path, fmt) == samples


def test_json_and_csv_carry_same_decimals(tmp_path):
    samples = [run_replication(MatrixParams(5, 6), i) for i in range(3)]
    csv_rows = cli.samples_text(samples, "csv").splitlines()[1:]
    doc = cli.samples_text(samples, "json", MatrixParams(5, 6))
    assert json.loads(doc)["params"]["p"] == 5
    for row, line in zip(csv_rows, doc.splitlines()[1:]):
        for value in row.split(",")[1:]:
            assert f": {value}" in line


def test_empty_samples(tmp_path):
    path = tmp_path / "e.csv"
    cli.write_samples([], path)
    assert path.read_text() == HEADER + "\n"
    assert cli.read_samples(path) == []
    assert json.loads(cli.samples_text([], "json")) == {"params": {}, "samples": []}


def test_simulate_output_is_byte_identical(capsys):
    argv = ["simulate", "--p", "6", "--n", "9", "--reps", "5"]
    assert cli.main(argv) == 0
    first = capsys.readouterr().out
    assert cli.main(argv) == 0
    assert capsys.readouterr().out == first
    assert first.startswith(HEADER)


def test_exit_codes(tmp_path, capsys):
    ok = ["verify-clt", "--p", "3", "--n", "5", "--mu", "2", "--sigma", "0", "--reps", "3"]
    assert cli.main(ok) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["verdict"]["mean"] == "pass"
    failing = ["verify-clt", "--p", "16", "--n", "32", "--reps", "30", "--tol-clt-mean", "0"]
    assert cli.main(failing) == 2
    capsys.readouterr()
    assert cli.main(ok + ["--out", str(tmp_path / "missing" / "x.csv")]) == 3


def test_bench_small():
    r = cli.run_bench(MatrixParams(2, 2), repeat=3)
    assert r.t_estimators > 0 and r.t_full_eigen > 0
    assert r.speedup == r.t_full_eigen / r.t_estimators


def test_bench_repeat_validation():
    with pytest.raises(InvalidParams):
        cli.run_bench(MatrixParams(2, 2), repeat=2)
    assert cli.main(["bench", "--p", "2", "--n", "2", "--repeat", "2"]) == 1


def test_bench_speedup_at_scale():
    r = cli.run_bench(MatrixParams(512, 1024, 1.0, 1.0, 42), repeat=3)
    assert r.speedup > 1
