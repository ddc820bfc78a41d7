import csv
import io
import json
import math

import numpy as np
import pytest

from volcrf import cli
from volcrf.volume import (
    LabelVolume,
    ScalarVolume,
    UnaryField,
    load_field,
    load_volume,
    save_field,
    save_volume,
)

from test_gfilter import direct_convolution


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, out


def run_json(capsys, *argv):
    code, out = run(capsys, *argv)
    assert code == 0, out
    return json.loads(out)


@pytest.fixture
def bench(tmp_path, capsys):
    """Small noisy-sphere scene written through the synth command."""
    d = tmp_path / "bench"
    run_json(capsys, "synth", "--dims", "10,10,10", "--sphere", "5,5,5,3", "--noise", "0.3",
             "--seed", "3", "--out-dir", d)
    return d


class TestSynth:
    def test_deterministic(self, tmp_path, capsys):
        args = ["--dims", "8,8,8", "--sphere", "4,4,4,2,1.0", "--noise", "0.2", "--seed", "42"]
        m1 = run_json(capsys, "synth", *args, "--out-dir", tmp_path / "a")
        m2 = run_json(capsys, "synth", *args, "--out-dir", tmp_path / "b")
        assert m1["positive_voxels"] == m2["positive_voxels"]
        for name in ("image", "labels", "unary"):
            for ext in (".raw", ".json"):
                assert (tmp_path / "a" / (name + ext)).read_bytes() == (tmp_path / "b" / (name + ext)).read_bytes()

    def test_empty(self, tmp_path, capsys):
        m = run_json(capsys, "synth", "--dims", "4,4,4", "--out-dir", tmp_path)
        assert m["positive_voxels"] == 0

    def test_count(self, tmp_path, capsys):
        m = run_json(capsys, "synth", "--dims", "16,16,16", "--sphere", "8,8,8,3", "--noise", "0.1",
                     "--out-dir", tmp_path)
        brute = sum(1 for x in range(16) for y in range(16) for z in range(16)
                    if (x - 8) ** 2 + (y - 8) ** 2 + (z - 8) ** 2 <= 9)
        assert m["positive_voxels"] == brute == 123
        assert int(load_volume(tmp_path / "labels").data.sum()) == brute

    def test_bad_sphere_is_config_error(self, tmp_path, capsys):
        code, _ = run(capsys, "synth", "--sphere", "1,1,1,0", "--out-dir", tmp_path)
        assert code == cli.EXIT_CONFIG


class TestRefine:
    def test_decoupled_equals_unary_argmax(self, bench, tmp_path, capsys):
        doc = run_json(capsys, "refine", "--image", bench / "image", "--unary", bench / "unary",
                       "--w1", 0, "--w2", 0, "--out-dir", tmp_path / "r")
        unary = load_field(bench / "unary")
        labels = load_volume(tmp_path / "r" / "labels")
        np.testing.assert_array_equal(labels.data, np.argmax(unary.data, axis=-1))
        assert doc["report"]["converged"] and doc["report"]["iterations"] == 1

    def test_eighteen_alpha_zero_is_six(self, bench, tmp_path, capsys):
        common = ["--image", bench / "image", "--unary", bench / "unary", "--truth", bench / "labels"]
        a = run_json(capsys, "refine", *common, "--mode", "eighteen", "--alpha", 0, "--out-dir", tmp_path / "a")
        b = run_json(capsys, "refine", *common, "--mode", "six", "--out-dir", tmp_path / "b")
        qa = load_field(tmp_path / "a" / "beliefs", "belief").data
        qb = load_field(tmp_path / "b" / "beliefs", "belief").data
        assert np.max(np.abs(qa - qb)) <= 1e-12
        assert a["metrics"] == b["metrics"] and a["report"] == b["report"]

    def test_missing_input_is_data_error(self, tmp_path, capsys):
        code, _ = run(capsys, "refine", "--image", tmp_path / "no", "--unary", tmp_path / "no",
                      "--out-dir", tmp_path)
        assert code == cli.EXIT_DATA

    def test_bad_kernel_is_config_error(self, bench, tmp_path, capsys):
        code, _ = run(capsys, "refine", "--image", bench / "image", "--unary", bench / "unary",
                      "--theta-beta", -1, "--out-dir", tmp_path)
        assert code == cli.EXIT_CONFIG

    def test_missing_flag_is_config_error(self, capsys):
        assert run(capsys, "refine")[0] == cli.EXIT_CONFIG

    def test_dims_mismatch_is_data_error(self, bench, tmp_path, capsys):
        save_volume(ScalarVolume(np.zeros((3, 3, 3))), tmp_path / "small")
        code, _ = run(capsys, "refine", "--image", tmp_path / "small", "--unary", bench / "unary",
                      "--out-dir", tmp_path)
        assert code == cli.EXIT_DATA

    def test_config_file_precedence(self, bench, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"image": str(bench / "image"), "unary": str(bench / "unary"),
                                   "w1": 0, "w2": 0, "max-iters": 3}))
        doc = run_json(capsys, "refine", "--config", cfg, "--out-dir", tmp_path / "a")
        assert doc["report"]["iterations"] == 1  # decoupled from the file
        doc = run_json(capsys, "refine", "--config", cfg, "--w1", 1, "--tol", 0,
                       "--out-dir", tmp_path / "b")
        assert doc["report"]["iterations"] == 3  # flag overrides file, file overrides default

    def test_unknown_config_key(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text('{"bogus": 1}')
        assert run(capsys, "refine", "--config", cfg)[0] == cli.EXIT_CONFIG

    def test_explicit_mu_file(self, bench, tmp_path, capsys):
        mu = tmp_path / "mu.json"
        mu.write_text("[[0, 0], [0, 0]]")
        run_json(capsys, "refine", "--image", bench / "image", "--unary", bench / "unary",
                 "--mu", mu, "--out-dir", tmp_path / "r")
        unary = load_field(bench / "unary")
        labels = load_volume(tmp_path / "r" / "labels")
        np.testing.assert_array_equal(labels.data, np.argmax(unary.data, axis=-1))


class TestFilterLabels:
    def _write(self, tmp_path, lab):
        save_volume(LabelVolume(lab), tmp_path / "lab")
        return tmp_path / "lab"

    def test_zero_and_one(self, tmp_path, capsys):
        for value in (0, 1):
            p = self._write(tmp_path, np.full((4, 4, 4), value))
            run_json(capsys, "filter-labels", "--labels", p, "--out", tmp_path / "m")
            assert np.all(load_volume(tmp_path / "m").data == value)

    def test_half_space(self, tmp_path, capsys):
        lab = np.zeros((16, 1, 1), int)
        lab[:8] = 1
        p = self._write(tmp_path, lab)
        run_json(capsys, "filter-labels", "--labels", p, "--sigma", 1, "--floor", 0,
                 "--out", tmp_path / "m")
        mask = load_volume(tmp_path / "m").data[:, 0, 0]
        assert np.all(mask[:8] == 1) and np.all(np.diff(mask[8:]) <= 0)
        np.testing.assert_allclose(mask[8:], direct_convolution(lab.astype(float), 1.0, 3)[8:, 0, 0],
                                   atol=1e-6)

    def test_non_binary(self, tmp_path, capsys):
        save_volume(LabelVolume(np.full((2, 2, 2), 2), 3), tmp_path / "lab")
        assert run(capsys, "filter-labels", "--labels", tmp_path / "lab", "--out", tmp_path / "m")[0] == cli.EXIT_DATA


class TestEvaluate:
    def test_truth_as_prediction(self, bench, capsys):
        m = run_json(capsys, "evaluate", "--pred-labels", bench / "labels", "--truth", bench / "labels")
        assert m["loss"] < 1e-6 and m["pos_prec"] == 100.0 and m["neg_prec"] == 100.0
        assert set(m) == {"loss", "pos_prec", "neg_prec", "tp", "fp", "tn", "fn"}

    def test_uniform(self, bench, tmp_path, capsys):
        save_field(UnaryField(np.zeros((10, 10, 10, 2))), tmp_path / "u")
        # a belief file: relabel the header kind
        from volcrf.volume import BeliefField
        save_field(BeliefField(np.full((10, 10, 10, 2), 0.5)), tmp_path / "q")
        m = run_json(capsys, "evaluate", "--beliefs", tmp_path / "q", "--truth", bench / "labels",
                     "--sigma", 1.5, "--beta", 4)
        assert abs(m["loss"] - math.log(2)) < 1e-9

    def test_filtered_vs_unfiltered(self, bench, tmp_path, capsys):
        run_json(capsys, "refine", "--image", bench / "image", "--unary", bench / "unary",
                 "--out-dir", tmp_path / "r")
        q = tmp_path / "r" / "beliefs"
        plain = run_json(capsys, "evaluate", "--beliefs", q, "--truth", bench / "labels")
        sharp = run_json(capsys, "evaluate", "--beliefs", q, "--truth", bench / "labels",
                         "--sigma", 0.05, "--floor", 0.5)
        blurred = run_json(capsys, "evaluate", "--beliefs", q, "--truth", bench / "labels",
                           "--sigma", 1.0)
        assert abs(plain["loss"] - sharp["loss"]) < 1e-9
        assert blurred["loss"] != plain["loss"]
        assert blurred["pos_prec"] == plain["pos_prec"]

    def test_mask_file(self, bench, tmp_path, capsys):
        run_json(capsys, "filter-labels", "--labels", bench / "labels", "--sigma", 1.0,
                 "--out", tmp_path / "mask")
        a = run_json(capsys, "evaluate", "--pred-labels", bench / "labels", "--truth", bench / "labels",
                     "--mask", tmp_path / "mask")
        b = run_json(capsys, "evaluate", "--pred-labels", bench / "labels", "--truth", bench / "labels",
                     "--sigma", 1.0)
        assert a["loss"] == pytest.approx(b["loss"], rel=1e-6)

    def test_needs_prediction(self, bench, capsys):
        assert run(capsys, "evaluate", "--truth", bench / "labels")[0] == cli.EXIT_CONFIG

    def test_undefined_precision_is_null(self, bench, tmp_path, capsys):
        save_volume(LabelVolume(np.zeros((10, 10, 10), int)), tmp_path / "none")
        m = run_json(capsys, "evaluate", "--pred-labels", tmp_path / "none", "--truth", bench / "labels")
        assert m["pos_prec"] is None and m["neg_prec"] < 100


def _csv(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestSweep:
    def _common(self, bench):
        return ["--image", bench / "image", "--unary", bench / "unary", "--truth", bench / "labels"]

    def test_single_combination(self, bench, tmp_path, capsys):
        code, out = run(capsys, "sweep", *self._common(bench), "--grid", "mode=eighteen",
                        "--alpha", 0.5)
        assert code == 0
        rows = _csv(out)
        assert len(rows) == 1 and rows[0]["status"] == "ok"
        direct = run_json(capsys, "refine", *self._common(bench), "--mode", "eighteen",
                          "--alpha", 0.5, "--out-dir", tmp_path / "r")
        assert float(rows[0]["loss"]) == direct["metrics"]["loss"]
        assert float(rows[0]["pos_prec"]) == direct["metrics"]["pos_prec"]
        assert int(rows[0]["iterations"]) == direct["report"]["iterations"]

    def test_alpha_zero_row_matches_six(self, bench, capsys):
        _, out = run(capsys, "sweep", *self._common(bench), "--mode", "eighteen",
                     "--grid", "alpha=0,0.5,1")
        rows = _csv(out)
        assert [r["alpha"] for r in rows] == ["0", "0.5", "1"]
        _, six = run(capsys, "sweep", *self._common(bench), "--grid", "mode=six")
        six_row = _csv(six)[0]
        for key in ("loss", "pos_prec", "neg_prec", "iterations", "converged"):
            assert rows[0][key] == six_row[key]

    def test_header_and_errors_are_rows(self, bench, capsys):
        _, out = run(capsys, "sweep", *self._common(bench), "--grid", "theta_beta=0.5,-1",
                     "--grid", "mode=six,eighteen")
        lines = out.splitlines()
        assert lines[0] == "theta_beta,mode,loss,pos_prec,neg_prec,iterations,converged,status"
        rows = _csv(out)
        assert len(rows) == 4
        assert [r["status"].startswith("error") for r in rows] == [False, False, True, True]

    def test_three_way_design(self, bench, capsys):
        _, out = run(capsys, "sweep", *self._common(bench), "--grid", "mode=none,six,eighteen",
                     "--mu", "potts:2")
        rows = {r["mode"]: r for r in _csv(out)}
        score = {k: float(r["pos_prec"]) + float(r["neg_prec"]) for k, r in rows.items()}
        assert score["eighteen"] >= score["none"] and score["six"] >= score["none"]

    def test_cap(self, bench, capsys):
        code, _ = run(capsys, "sweep", *self._common(bench), "--grid", "alpha=0,1,2",
                      "--max-combinations", 2)
        assert code == cli.EXIT_CONFIG

    def test_unknown_parameter(self, bench, capsys):
        assert run(capsys, "sweep", *self._common(bench), "--grid", "nope=1")[0] == cli.EXIT_CONFIG

    def test_grid_from_config(self, bench, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"grid": {"w1": [0, 1]}}))
        code, out = run(capsys, "sweep", "--config", cfg, *self._common(bench),
                        "--out", tmp_path / "s.csv", "--out-dir", tmp_path / "runs")
        assert code == 0 and (tmp_path / "s.csv").read_text() == out
        assert (tmp_path / "runs" / "combo_0001" / "labels.raw").exists()


class TestOracleCheck:
    def test_decoupled(self, capsys):
        r = run_json(capsys, "oracle-check", "--mu", "zero", "--instances", 5, "--seed", 1)
        assert r["max_marginal_deviation"] < 1e-9 and r["argmax_agreement"] == 1.0

    def test_strong_unaries(self, capsys):
        r = run_json(capsys, "oracle-check", "--instances", 100, "--seed", 2, "--strength", 3)
        assert r["full_agreement_instances"] >= 95

    def test_single_voxel(self, tmp_path, capsys):
        save_volume(ScalarVolume(np.zeros((1, 1, 1))), tmp_path / "img")
        save_field(UnaryField(np.array([0.4, -1.3]).reshape(1, 1, 1, 2)), tmp_path / "u")
        r = run_json(capsys, "oracle-check", "--image", tmp_path / "img", "--unary", tmp_path / "u")
        assert r["max_marginal_deviation"] < 1e-12 and r["argmax_agreement"] == 1.0

    def test_refuses_large(self, capsys):
        assert run(capsys, "oracle-check", "--dims", "4,4,4")[0] == cli.EXIT_DATA

    def test_refuses_large_files(self, tmp_path, capsys):
        save_volume(ScalarVolume(np.zeros((3, 3, 3))), tmp_path / "img")
        save_field(UnaryField(np.zeros((3, 3, 3, 2))), tmp_path / "u")
        code, _ = run(capsys, "oracle-check", "--image", tmp_path / "img", "--unary", tmp_path / "u")
        assert code == cli.EXIT_DATA


class TestDeterminism:
    def test_every_command_twice(self, bench, tmp_path, capsys):
        common = ["--image", bench / "image", "--unary", bench / "unary", "--truth", bench / "labels"]
        commands = [
            ["refine", *common, "--mode", "eighteen", "--alpha", 0.5, "--out-dir", "{d}"],
            ["filter-labels", "--labels", bench / "labels", "--out", "{d}/mask"],
            ["evaluate", "--pred-labels", bench / "labels", "--truth", bench / "labels", "--sigma", 1],
            ["sweep", *common, "--grid", "alpha=0,1", "--mode", "eighteen", "--out-dir", "{d}"],
            ["oracle-check", "--instances", 3, "--seed", 5],
        ]
        for i, cmd in enumerate(commands):
            outs = []
            for rep in ("a", "b"):
                d = tmp_path / f"{i}{rep}"
                outs.append(run(capsys, *[str(c).replace("{d}", str(d)) for c in cmd]))
            assert outs[0][0] == 0
            assert outs[0][1].replace(f"{i}a", "") == outs[1][1].replace(f"{i}b", "")
            da, db = tmp_path / f"{i}a", tmp_path / f"{i}b"
            if da.exists():
                files = sorted(p.relative_to(da) for p in da.rglob("*") if p.is_file())
                assert files == sorted(p.relative_to(db) for p in db.rglob("*") if p.is_file())
                for f in files:
                    assert (da / f).read_bytes() == (db / f).read_bytes()
