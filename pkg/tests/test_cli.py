import csv
import json

import pytest

from scorelab.cli import load_config, main


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# ---------------------------------------------------------------------------
# config resolution


def test_defaults_and_override_precedence(tmp_path):
    cfg_file = tmp_path / "c.json"
    cfg_file.write_text(json.dumps({"seed": 7, "target": {"name": "mixture2"}}))
    cfg = load_config("sample", str(cfg_file), [("seed", "9"),
                                                ("ensemble", "25")])
    assert cfg["seed"] == 9              # override beats config file
    assert cfg["target"]["name"] == "mixture2"   # file beats default
    assert cfg["ensemble"] == 25
    assert cfg["T"] == 3.0               # untouched default
    assert cfg["format"] == "csv"


def test_dotted_override_reaches_nested_keys():
    cfg = load_config("sample", None, [("target.name", "two_point"),
                                       ("source.kind", "quadrature")])
    assert cfg["target"]["name"] == "two_point"
    assert cfg["source"]["kind"] == "quadrature"


def test_bad_format_rejected():
    with pytest.raises(Exception):
        load_config("sample", None, [("format", "parquet")])


# ---------------------------------------------------------------------------
# happy paths, one per command


def test_verify_bounds_writes_report(tmp_path):
    out = tmp_path / "vb"
    code = main(["verify-bounds", "--t_bars", "[0.2, 0.5]",
                 "--points", "[[0.0], [1.0]]", "--output", str(out)])
    assert code == 0
    rows = read_csv(out / "verify_bounds.csv")
    assert rows[0][:2] == ["theorem_id", "quantity"]
    assert all(r[0] == "thm31" for r in rows[1:])
    assert len(rows) == 1 + 2 * 2 * 2   # two quantities, two times, two pts
    meta = json.loads((out / "verify_bounds.meta.json").read_text())
    assert meta["command"] == "verify-bounds"
    assert "written_at" in meta and "versions" in meta
    assert meta["versions"]["scorelab"]
    assert meta["flagged"] == []


def test_counterexample_scales_report(tmp_path):
    out = tmp_path / "ce"
    code = main(["counterexample", "--scales", "[1.0, 2.0]",
                 "--output", str(out)])
    assert code == 0
    rows = read_csv(out / "counterexample.csv")
    assert rows[0] == ["k", "x_k", "M", "ratio", "bound", "pass"]
    assert [r[5] for r in rows[1:]] == ["true", "true"]
    meta = json.loads((out / "counterexample.meta.json").read_text())
    assert max(meta["path_rel_gaps"]) <= 1e-6


def test_counterexample_chain_report(tmp_path):
    out = tmp_path / "chain"
    code = main(["counterexample", "--K", "2", "--output", str(out)])
    assert code == 0
    rows = read_csv(out / "counterexample.csv")
    assert len(rows) == 3
    meta = json.loads((out / "counterexample.meta.json").read_text())
    assert max(meta["crosstalk"]) < 1e-8


def test_manifold_probe(tmp_path):
    out = tmp_path / "mani"
    code = main(["manifold", "--target.name", "notched_square",
                 "--output", str(out)])
    assert code == 0
    rows = read_csv(out / "manifold.csv")
    assert rows[0] == ["t", "x0", "x1", "t_hess_norm", "t2_variance_term"]
    assert len(rows) == 1 + 2 * 4       # two points, four rungs


def test_sample_run(tmp_path):
    out = tmp_path / "samp"
    code = main(["sample", "--T", "1.0", "--N", "3", "--ensemble", "50",
                 "--output", str(out)])
    assert code == 0
    rows = read_csv(out / "sample.csv")
    assert rows[0] == ["x0"]
    assert len(rows) == 51
    meta = json.loads((out / "sample.meta.json").read_text())
    assert meta["excluded"] == 0
    assert meta["kept"] == 50
    assert meta["provenance"] == "exact:std_normal"


def test_converge_scan_with_rate_fit(tmp_path):
    out = tmp_path / "conv"
    code = main(["converge", "--target.name", "mixture2",
                 "--ensemble", "2000", "--N_list", "[4, 8, 16, 32]",
                 "--T", "2.0", "--output", str(out)])
    assert code == 0
    rows = read_csv(out / "converge.csv")
    assert rows[0] == ["N", "error", "stderr", "excluded"]
    assert [int(r[0]) for r in rows[1:]] == [4, 8, 16, 32]
    meta = json.loads((out / "converge.meta.json").read_text())
    assert "rate_fit" in meta
    assert set(meta["rate_fit"]) >= {"floor", "coeff", "gamma"}


# ---------------------------------------------------------------------------
# formats and determinism


def test_json_format(tmp_path):
    out = tmp_path / "j"
    code = main(["sample", "--T", "1.0", "--N", "2", "--ensemble", "5",
                 "--format", "json", "--output", str(out)])
    assert code == 0
    rows = json.loads((out / "sample.json").read_text())
    assert len(rows) == 5
    assert set(rows[0]) == {"x0"}


def test_reruns_are_byte_identical(tmp_path):
    args = ["sample", "--T", "1.0", "--N", "3", "--ensemble", "40",
            "--seed", "13"]
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(args + ["--output", str(out1)]) == 0
    assert main(args + ["--output", str(out2)]) == 0
    assert (out1 / "sample.csv").read_bytes() == (
        out2 / "sample.csv").read_bytes()


# ---------------------------------------------------------------------------
# failure paths


def test_violation_exits_one(tmp_path):
    out = tmp_path / "viol"
    code = main(["counterexample", "--scales", "[1.0]",
                 "--rel_tol", "1e-20", "--output", str(out)])
    assert code == 1
    rows = read_csv(out / "counterexample.csv")
    assert rows[1][5] == "false"


def test_unknown_target_exits_two_and_cleans_up(tmp_path, capsys):
    out = tmp_path / "bad"
    code = main(["verify-bounds", "--target.name", "lorenz",
                 "--output", str(out)])
    assert code == 2
    assert "config error" in capsys.readouterr().err
    assert not list(out.iterdir())


def test_bad_sampler_config_exits_two(tmp_path):
    out = tmp_path / "bad2"
    code = main(["sample", "--T", "1.0", "--delta", "2.0",
                 "--output", str(out)])
    assert code == 2
    assert not list(out.iterdir())


def test_bad_override_shape_exits_two(capsys):
    assert main(["sample", "--seed"]) == 2
    assert "config error" in capsys.readouterr().err


def test_unknown_eta_kind_exits_two(tmp_path):
    out = tmp_path / "bad3"
    code = main(["sample", "--source", '{"kind": "perturbed", "eta": '
                 '{"kind": "ramp"}}', "--output", str(out)])
    assert code == 2
