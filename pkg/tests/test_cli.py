"""End-to-end runs of every subcommand on small simulated files."""
import csv
import json
import math

import numpy as np
import pytest

from zitboost.cli import main

SIM = {
    "n": 500, "seed": 4, "phi": 1.0, "p": 1.5, "gamma": 1.5,
    "features": [{"name": "x1", "dist": "uniform", "low": -1, "high": 1},
                 {"name": "x2", "dist": "normal", "mean": 0, "sd": 1},
                 {"name": "region", "dist": "categorical", "levels": ["a", "b", "c"]}],
    "exposure": {"dist": "uniform", "low": 0.5, "high": 1.0},
    "mu": "exp(0.9 * x1 + 0.3 * (region == 'a'))",
}
SCHEMA = {
    "columns": {"x1": "numeric", "x2": "numeric", "region": "categorical",
                "exposure": "exposure", "y": "target"},
    "seed": 5, "family": "zitw_s2", "cv_folds": 2,
    "boost": {"n_trees": 12, "max_depth": 3},
    "grid": {"learning_rate": [0.05, 0.3], "l2_lambda": [0.0, 10.0]},
}


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run(*argv):
    code = main([str(a) for a in argv])
    assert code == 0
    return code


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    (d / "sim.json").write_text(json.dumps(SIM))
    (d / "schema.json").write_text(json.dumps(SCHEMA))
    run("simulate", "--config", d / "sim.json", "--out", d / "data.csv")
    run("train", "--config", d / "schema.json", "--data", d / "data.csv", "--out", d / "run")
    return d


class TestSimulate:
    def test_files_and_sidecar(self, workdir):
        rows = read_rows(workdir / "data.csv")
        truth = read_rows(workdir / "data.truth.csv")
        assert len(rows) == len(truth) == SIM["n"]
        assert set(rows[0]) == {"x1", "x2", "region", "exposure", "y"}
        assert {"mu", "q"} <= set(truth[0])

    def test_deterministic(self, workdir, tmp_path):
        run("simulate", "--config", workdir / "sim.json", "--out", tmp_path / "again.csv")
        assert (tmp_path / "again.csv").read_bytes() == (workdir / "data.csv").read_bytes()

    def test_seed_override(self, workdir, tmp_path):
        run("simulate", "--config", workdir / "sim.json", "--out", tmp_path / "s.csv",
            "--seed", 99)
        assert (tmp_path / "s.csv").read_bytes() != (workdir / "data.csv").read_bytes()

    def test_zero_rows_gives_header_only(self, write_json, tmp_path):
        run("simulate", "--config", write_json("sim.json", {**SIM, "n": 0}),
            "--out", tmp_path / "empty.csv")
        assert (tmp_path / "empty.csv").read_text() == "x1,x2,region,exposure,y\n"
        assert (tmp_path / "empty.truth.csv").read_text() == "mu,q\n"

    def test_certain_inflation_gives_zero_target(self, write_json, tmp_path):
        spec = {k: v for k, v in SIM.items() if k != "gamma"}
        run("simulate", "--config", write_json("sim.json", {**spec, "q": 1.0}),
            "--out", tmp_path / "z.csv")
        assert all(float(r["y"]) == 0.0 for r in read_rows(tmp_path / "z.csv"))

    def test_zero_fraction_matches_closed_form(self, write_json, tmp_path):
        n, q = 100_000, 0.3
        spec = {"n": n, "seed": 1, "mu": "1.0", "q": q, "phi": 1.0, "p": 1.5}
        run("simulate", "--config", write_json("sim.json", spec), "--out", tmp_path / "d.csv")
        y = np.array([float(r["y"]) for r in read_rows(tmp_path / "d.csv")])
        p0 = q + (1 - q) * math.exp(-2.0)
        assert abs(np.mean(y == 0) - p0) < 3 * math.sqrt(p0 * (1 - p0) / n)

    def test_invalid_spec(self, write_json, tmp_path, capsys):
        code = main(["simulate", "--config", str(write_json("sim.json", {**SIM, "phi": -1})),
                     "--out", str(tmp_path / "x.csv")])
        assert code == 1
        assert "phi" in capsys.readouterr().err


class TestTrain:
    def test_outputs(self, workdir):
        out = workdir / "run"
        for name in ("model.json", "cv_table.csv", "training_log.csv", "test.csv",
                     "train_summary.json"):
            assert (out / name).exists()
        log = read_rows(out / "training_log.csv")
        assert "nll" in log[0] and "deviance" in log[0]

    def test_winner_is_argmin_of_table(self, workdir):
        table = read_rows(workdir / "run" / "cv_table.csv")
        assert len(table) == 4
        dev = [float(r["mean_deviance"]) for r in table]
        assert [int(r["selected"]) for r in table] == [int(i == np.argmin(dev))
                                                      for i in range(4)]
        summary = json.loads((workdir / "run" / "train_summary.json").read_text())
        won = table[int(np.argmin(dev))]
        assert summary["winner"] == {"l2_lambda": float(won["l2_lambda"]),
                                     "learning_rate": float(won["learning_rate"])}

    def test_cv_means_are_fold_means(self, workdir):
        for r in read_rows(workdir / "run" / "cv_table.csv"):
            folds = [float(r["fold1_deviance"]), float(r["fold2_deviance"])]
            assert float(r["mean_deviance"]) == pytest.approx(np.mean(folds), rel=1e-12)

    def test_test_split_is_a_fifth(self, workdir):
        assert len(read_rows(workdir / "run" / "test.csv")) == pytest.approx(100, abs=1)

    def test_deterministic_and_thread_independent(self, workdir, tmp_path):
        run("train", "--config", workdir / "schema.json", "--data", workdir / "data.csv",
            "--out", tmp_path, "--threads", 2)
        for name in ("model.json", "cv_table.csv", "training_log.csv", "train_summary.json"):
            assert (tmp_path / name).read_bytes() == (workdir / "run" / name).read_bytes()

    def test_single_cell_grid(self, workdir, write_json, tmp_path):
        cfg = {**SCHEMA, "grid": {"learning_rate": [0.1]}, "family": "tweedie"}
        run("train", "--config", write_json("s.json", cfg), "--data", workdir / "data.csv",
            "--out", tmp_path)
        table = read_rows(tmp_path / "cv_table.csv")
        assert len(table) == 1 and table[0]["selected"] == "1"

    def test_unparseable_cell_is_located(self, workdir, tmp_path, capsys):
        lines = (workdir / "data.csv").read_text().splitlines()
        header = lines[0].split(",")
        row = lines[3].split(",")
        row[header.index("x2")] = "abc"
        lines[3] = ",".join(row)
        (tmp_path / "bad.csv").write_text("\n".join(lines) + "\n")
        code = main(["train", "--config", str(workdir / "schema.json"),
                     "--data", str(tmp_path / "bad.csv"), "--out", str(tmp_path / "o")])
        assert code == 1
        err = capsys.readouterr().err
        assert "row 3" in err and "'x2'" in err

    @pytest.mark.parametrize("column,value,needle", [("exposure", "-1", "exposure"),
                                                     ("y", "-0.5", "target"),
                                                     ("x1", "nan", "non-finite")])
    def test_invalid_values_rejected(self, workdir, tmp_path, capsys, column, value, needle):
        rows = read_rows(workdir / "data.csv")
        rows[0][column] = value
        with open(tmp_path / "bad.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
        code = main(["train", "--config", str(workdir / "schema.json"),
                     "--data", str(tmp_path / "bad.csv"), "--out", str(tmp_path / "o")])
        assert code == 1
        err = capsys.readouterr().err
        assert "row 1" in err and needle in err

    def test_schema_mismatch(self, workdir, write_json, tmp_path, capsys):
        cfg = {**SCHEMA, "columns": {**SCHEMA["columns"], "x9": "numeric"}}
        code = main(["train", "--config", str(write_json("s.json", cfg)),
                     "--data", str(workdir / "data.csv"), "--out", str(tmp_path)])
        assert code == 1
        assert "x9" in capsys.readouterr().err


class TestEvaluateAndCompare:
    def test_evaluate_report(self, workdir, tmp_path):
        run("evaluate", "--model", workdir / "run" / "model.json",
            "--data", workdir / "run" / "test.csv", "--out", tmp_path, "--predictions")
        rep = json.loads((tmp_path / "metrics.json").read_text())
        assert set(rep["labels"]) == {"model"}
        assert len(read_rows(tmp_path / "predictions.csv")) == \
            len(read_rows(workdir / "run" / "test.csv"))
        summary = json.loads((workdir / "run" / "train_summary.json").read_text())
        assert rep["mean_deviance"]["model"] == pytest.approx(summary["test_mean_deviance"],
                                                              rel=1e-12)

    def test_training_rows_score_better(self, workdir, tmp_path, write_json):
        cfg = {**SCHEMA, "boost": {"n_trees": 60, "max_depth": 6},
               "grid": {"learning_rate": [0.5], "l2_lambda": [0.0]}}
        run("train", "--config", write_json("s.json", cfg), "--data", workdir / "data.csv",
            "--out", tmp_path / "fit")
        run("evaluate", "--model", tmp_path / "fit" / "model.json",
            "--data", workdir / "data.csv", "--out", tmp_path / "all")
        run("evaluate", "--model", tmp_path / "fit" / "model.json",
            "--data", tmp_path / "fit" / "test.csv", "--out", tmp_path / "held")
        dev_all = json.loads((tmp_path / "all" / "metrics.json").read_text())["mean_deviance"]
        dev_held = json.loads((tmp_path / "held" / "metrics.json").read_text())["mean_deviance"]
        assert dev_all["model"] < dev_held["model"]

    def test_self_comparison_is_undefined(self, workdir, tmp_path):
        m = workdir / "run" / "model.json"
        run("compare", "--model", m, m, "--data", workdir / "run" / "test.csv", "--out", tmp_path)
        text = (tmp_path / "comparison.json").read_text()
        assert "undefined" in text
        rows = read_rows(tmp_path / "vuong_matrix.csv")
        assert rows[0]["model#2"] == "" and rows[1]["model"] == ""
        gini = read_rows(tmp_path / "gini_b_matrix.csv")
        assert abs(float(gini[0]["model#2"])) < 1e-12

    def test_compare_needs_two_models(self, workdir, tmp_path, capsys):
        code = main(["compare", "--model", str(workdir / "run" / "model.json"),
                     "--data", str(workdir / "data.csv"), "--out", str(tmp_path)])
        assert code == 1
        assert "at least two" in capsys.readouterr().err

    def test_compare_orders_models(self, workdir, tmp_path, write_json):
        paths = []
        for fam in ("tweedie", "zitw_s2"):
            cfg = {**SCHEMA, "family": fam, "grid": {"learning_rate": [0.1]}}
            run("train", "--config", write_json(f"{fam}.json", cfg),
                "--data", workdir / "data.csv", "--out", tmp_path / fam,
                "--model", tmp_path / f"{fam}.json")
            paths.append(tmp_path / f"{fam}.json")
        run("compare", "--model", *paths, "--data", workdir / "run" / "test.csv",
            "--out", tmp_path / "cmp")
        rep = json.loads((tmp_path / "cmp" / "comparison.json").read_text())
        assert rep["labels"] == ["tweedie", "zitw_s2"]
        assert rep["minmax_choice"] in rep["labels"]
        first = (tmp_path / "cmp" / "comparison.json").read_bytes()
        run("compare", "--model", *paths, "--data", workdir / "run" / "test.csv",
            "--out", tmp_path / "cmp")
        assert (tmp_path / "cmp" / "comparison.json").read_bytes() == first


class TestTransform:
    @pytest.fixture
    def comp(self, tmp_path, rng):
        parts = rng.dirichlet(np.ones(4), size=20)
        parts[0] = 0.25
        path = tmp_path / "comp.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id", "a", "b", "c", "d", "exposure", "y"])
            for i, row in enumerate(parts):
                w.writerow([f"r{i:02d}"] + [repr(float(v)) for v in row] + ["1", "0.0"])
        return path

    def _schema(self, write_json, treatment):
        return write_json("t.json", {
            "columns": {"id": "ignore", "a": "numeric", "b": "numeric", "c": "numeric",
                        "d": "numeric", "exposure": "exposure", "y": "target"},
            "seed": 0, "grid": {"learning_rate": [0.1]},
            "composition_blocks": [{"name": "mix", "columns": ["a", "b", "c", "d"],
                                    "treatment": treatment}]})

    def test_none_is_byte_identical(self, comp, write_json, tmp_path):
        run("transform", "--config", self._schema(write_json, "none"), "--data", comp,
            "--out", tmp_path / "o.csv")
        assert (tmp_path / "o.csv").read_bytes() == comp.read_bytes()

    def test_clr_uniform_row(self, comp, write_json, tmp_path):
        run("transform", "--config", self._schema(write_json, "clr"), "--data", comp,
            "--out", tmp_path / "o.csv")
        rows = read_rows(tmp_path / "o.csv")
        assert [float(rows[0][f"mix_clr_{c}"]) for c in "abcd"] == [0.0] * 4
        assert rows[5]["id"] == "r05"

    def test_ilr_column_count(self, comp, write_json, tmp_path):
        run("transform", "--config", self._schema(write_json, "ilr"), "--data", comp,
            "--out", tmp_path / "o.csv")
        header = read_rows(tmp_path / "o.csv")[0]
        assert list(header) == ["id", "mix_ilr1", "mix_ilr2", "mix_ilr3", "exposure", "y"]

    def test_passthrough_bit_exact(self, comp, write_json, tmp_path):
        run("transform", "--config", self._schema(write_json, "clr_ppca"), "--data", comp,
            "--out", tmp_path / "o.csv")
        a, b = read_rows(comp), read_rows(tmp_path / "o.csv")
        assert [(r["id"], r["exposure"], r["y"]) for r in a] == \
            [(r["id"], r["exposure"], r["y"]) for r in b]

    def test_deterministic(self, comp, write_json, tmp_path):
        cfg = self._schema(write_json, "clr_ppca")
        run("transform", "--config", cfg, "--data", comp, "--out", tmp_path / "1.csv")
        run("transform", "--config", cfg, "--data", comp, "--out", tmp_path / "2.csv")
        assert (tmp_path / "1.csv").read_bytes() == (tmp_path / "2.csv").read_bytes()

    def test_zero_row_rejected(self, comp, write_json, tmp_path, capsys):
        text = comp.read_text().splitlines()
        text[2] = "r01,0,0,0,0,1,0.0"
        comp.write_text("\n".join(text) + "\n")
        code = main(["transform", "--config", str(self._schema(write_json, "clr")),
                     "--data", str(comp), "--out", str(tmp_path / "o.csv")])
        assert code == 1
        assert capsys.readouterr().err

    def test_missing_block_column(self, comp, write_json, tmp_path, capsys):
        text = [",".join(line.split(",")[:4] + line.split(",")[5:])
                for line in comp.read_text().splitlines()]
        comp.write_text("\n".join(text) + "\n")
        code = main(["transform", "--config", str(self._schema(write_json, "clr")),
                     "--data", str(comp), "--out", str(tmp_path / "o.csv")])
        assert code == 1
        assert "'d'" in capsys.readouterr().err
