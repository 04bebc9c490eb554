import io
import contextlib
import os
from pathlib import Path

import numpy as np
import pytest

from compcorr.cli import _default_workers, _guarded_output, build_parser, main
from compcorr.datasets import Dataset, write_dataset
from compcorr.segments import TimeSeries


def run(argv):
    # Emulate the shell: SystemExit with a message prints it and exits 1.
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        try:
            code = main(argv)
        except SystemExit as exc:
            if exc.code is None or isinstance(exc.code, int):
                code = exc.code or 0
            else:
                print(exc.code, file=err)
                code = 1
    return code, out.getvalue(), err.getvalue()


@pytest.fixture()
def toy_file(tmp_path):
    rng = np.random.default_rng(11)
    series = tuple(TimeSeries(f"g{i}", rng.normal(size=23)) for i in range(6))
    ds = Dataset(series=series, time_labels=list(range(0, 230, 10)), name="toy")
    path = tmp_path / "toy.tsv"
    write_dataset(ds, path)
    return path


@pytest.fixture()
def in_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


# ------------------------------------------------------------------ count

def test_count_prints_exact_integers():
    for args, want in [
        (["count", "23", "--min-part", "4"], "250"),
        (["count", "23", "--min-part", "3"], "1278"),
        (["count", "23"], "17711"),  # m defaults to 2 here
        (["count", "50"], "7778742049"),
    ]:
        code, out, _ = run(args)
        assert code == 0
        assert out.strip() == want


def test_count_rejects_short_series():
    code, _, err = run(["count", "3", "--min-part", "4"])
    assert code == 1
    assert "error" in err


# ------------------------------------------------------------------ synth

def test_synth_writes_dataset(in_tmp):
    code, _, _ = run(["synth", "--function", "square", "--pieces", "30", "--output", "sq.tsv"])
    assert code == 0
    lines = Path("sq.tsv").read_text().splitlines()
    assert lines[0].startswith("id\t")
    assert len(lines) == 3  # header + x + square
    assert lines[1].split("\t")[0] == "x"
    assert len(lines[1].split("\t")) == 32


def test_synth_range_flag(in_tmp):
    code, _, _ = run(["synth", "--function", "quartic", "--range=-2:2", "--pieces", "4", "--output", "q.tsv"])
    assert code == 0
    row = Path("q.tsv").read_text().splitlines()[1].split("\t")
    assert float(row[1]) == -2.0 and float(row[-1]) == 2.0


def test_synth_bad_range(in_tmp):
    code, _, err = run(["synth", "--function", "square", "--range", "5:1", "--output", "x.tsv"])
    assert code == 1
    assert "error" in err


# ------------------------------------------------------------------- pair

def test_pair_writes_distribution_file(in_tmp, toy_file):
    code, out, _ = run(["pair", "g0", "g1", "--input", str(toy_file), "--min-part", "4"])
    assert code == 0
    assert "HCC" in out and "LCC" in out
    dist = Path("Output.toy.g0.g1.n23.m4.txt")
    assert dist.exists()
    lines = dist.read_text().splitlines()
    assert lines[0] == "composition\tr_c"
    assert len(lines) == 250 + 1
    # canonical order: first composition of 23 with m=4 is [4,4,4,4,7]
    assert lines[1].startswith("[4,4,4,4,7]\t")
    assert lines[-1].startswith("[23]\t")


def test_pair_synthetic_function_defaults(in_tmp):
    code, out, _ = run(["pair", "--function", "square", "--min-part", "2"])
    assert code == 0
    dist = Path("Output.square.x.square.n31.m2.txt")
    assert dist.exists()
    assert len(dist.read_text().splitlines()) == 832040 + 1
    assert "0.9449" in out


def test_pair_precision_flag(in_tmp, toy_file):
    code, _, _ = run(["pair", "g0", "g1", "--input", str(toy_file), "--min-part", "4", "--precision", "3"])
    assert code == 0
    line = Path("Output.toy.g0.g1.n23.m4.txt").read_text().splitlines()[1]
    value = line.split("\t")[1]
    assert len(value.split(".")[1]) == 3


def test_pair_undefined_prints_na(in_tmp, tmp_path):
    ds = Dataset(
        series=(TimeSeries("flat", np.full(8, 2.0)), TimeSeries("g", np.arange(8.0))),
        name="flat",
    )
    p = tmp_path / "flat.tsv"
    write_dataset(ds, p)
    code, out, _ = run(["pair", "flat", "g", "--input", str(p), "--min-part", "2"])
    assert code == 0
    assert "NA" in out
    dist = Path("Output.flat.flat.g.n8.m2.txt").read_text().splitlines()
    assert all(line.split("\t")[1] == "NA" for line in dist[1:])


def test_pair_unknown_id(in_tmp, toy_file):
    code, _, err = run(["pair", "g0", "zzz", "--input", str(toy_file)])
    assert code == 1
    assert "no series named" in err


# ------------------------------------------------------------------ clouds

def test_clouds_output(in_tmp, toy_file):
    code, _, _ = run(["clouds", "g0", "g1", "--input", str(toy_file), "--min-part", "4", "--output", "clouds.tsv"])
    assert code == 0
    lines = Path("clouds.tsv").read_text().splitlines()
    assert lines[0] == "r_c\tvar_a\tvar_b\tcov"
    assert len(lines) == 250 + 1


# --------------------------------------------------------------- all pairs

def test_all_pairs_output_and_thread_determinism(in_tmp, toy_file):
    code1, _, _ = run(["all-pairs", "--input", str(toy_file), "--min-part", "4", "--output", "a1.tsv", "--threads", "1"])
    code2, _, _ = run(["all-pairs", "--input", str(toy_file), "--min-part", "4", "--output", "a2.tsv", "--threads", "2"])
    assert code1 == code2 == 0
    a1 = Path("a1.tsv").read_text()
    assert a1 == Path("a2.tsv").read_text()
    lines = a1.splitlines()
    assert lines[0] == "id_a\tid_b\thcc\tpearson\tlcc\tbcc\twcc"
    assert len(lines) == 15 + 1


def test_all_pairs_filter_and_summary(in_tmp, toy_file):
    code, _, err = run(["all-pairs", "--input", str(toy_file), "--min-part", "4", "--output", "f.tsv", "--filter", "hcc>0.99"])
    assert code == 0
    assert len(Path("f.tsv").read_text().splitlines()) >= 1  # header always present
    assert "15 pairs" in err or "15" in err  # summary goes to stderr


def test_all_pairs_emit_distribution(in_tmp, toy_file):
    code, _, _ = run([
        "all-pairs", "--input", str(toy_file), "--min-part", "4",
        "--output", "ap.tsv", "--filter", "hcc>-1", "--emit-distribution",
    ])
    assert code == 0
    records = len(Path("ap.tsv").read_text().splitlines()) - 1
    dist_files = [p for p in os.listdir(".") if p.startswith("Output.toy.")]
    assert len(dist_files) == records == 15


def test_all_pairs_bad_filter(in_tmp, toy_file):
    code, _, err = run(["all-pairs", "--input", str(toy_file), "--filter", "bogus>0.5", "--output", "x.tsv"])
    assert code == 1
    assert "error" in err


# --------------------------------------------------------------- time corr

def test_time_corr_one_row_per_series(in_tmp, toy_file):
    code, _, _ = run(["time-corr", "--input", str(toy_file), "--output", "tc.tsv"])
    assert code == 0
    lines = Path("tc.tsv").read_text().splitlines()
    assert len(lines) == 6 + 1
    assert all(line.split("\t")[1] == "time" for line in lines[1:])


# ------------------------------------------------------------------ misc

def test_guarded_output_moves_partial_aside(in_tmp):
    target = Path("out.tsv")
    with pytest.raises(KeyboardInterrupt):
        with contextlib.redirect_stderr(io.StringIO()):
            with _guarded_output(target) as fh:
                fh.write("something\n")
                raise KeyboardInterrupt
    assert not target.exists()
    assert Path("out.tsv.partial").exists()


def test_default_workers_env(monkeypatch):
    monkeypatch.setenv("COMP_CORR_THREADS", "3")
    assert _default_workers() == 3
    monkeypatch.setenv("COMP_CORR_THREADS", "not-a-number")
    with pytest.raises(SystemExit):
        _default_workers()
    monkeypatch.setenv("COMP_CORR_THREADS", "0")
    with pytest.raises(SystemExit):
        _default_workers()
    monkeypatch.delenv("COMP_CORR_THREADS")
    assert _default_workers() >= 1


def test_parser_rejects_unknown_subcommand():
    parser = build_parser()
    with pytest.raises(SystemExit):
        parser.parse_args(["frobnicate"])


def test_main_requires_input_or_function():
    code, _, err = run(["pair", "a", "b"])
    assert code == 1
    assert "input" in err.lower() or "function" in err.lower()
