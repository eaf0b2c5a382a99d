import json
import re
import subprocess
import sys
from importlib import resources

import jsonschema
import numpy as np
import pytest

from knnpoison.knn import read_dataset_csv, write_dataset_csv
from knnpoison.testkit import fixture_1d_three_targets, fixture_k3_line

TIME_FIELD = re.compile(r'"time_used_ms":\s*[0-9.]+')


def run_cli(*args, cwd=None):
    return subprocess.run(
        [sys.executable, "-m", "knnpoison", *map(str, args)],
        capture_output=True,
        text=True,
        cwd=cwd,
    )


def mask(text):
    return TIME_FIELD.sub('"time_used_ms": 0', text)


def load_schema(name):
    with resources.files("knnpoison.schemas").joinpath(name).open("r") as fh:
        return json.load(fh)


@pytest.fixture()
def fixture_csvs(tmp_path):
    train, targets = fixture_1d_three_targets()
    train_csv = tmp_path / "train.csv"
    targets_csv = tmp_path / "targets.csv"
    write_dataset_csv(train, train_csv)
    write_dataset_csv(targets, targets_csv)
    return train_csv, targets_csv


class TestExitCodes:
    def test_unknown_flag_is_usage_error(self):
        proc = run_cli("attack-one", "--no-such-flag")
        assert proc.returncode == 2

    def test_missing_file_is_input_error(self, tmp_path):
        proc = run_cli(
            "attack-one", "--train", tmp_path / "nope.csv",
            "--targets", tmp_path / "nope.csv", "--yplus", "pos",
        )
        assert proc.returncode == 2

    def test_even_k_rejected(self, fixture_csvs):
        train_csv, targets_csv = fixture_csvs
        proc = run_cli("attack-one", "--train", train_csv, "--targets", targets_csv,
                       "--k", "2")
        assert proc.returncode == 2

    def test_bad_norm_rejected(self, fixture_csvs):
        train_csv, targets_csv = fixture_csvs
        proc = run_cli("eval", "--train", train_csv, "--targets", targets_csv,
                       "--norm", "manhattan")
        assert proc.returncode == 2

    def test_oracle_budget_limit_is_refusal(self, fixture_csvs):
        train_csv, targets_csv = fixture_csvs
        proc = run_cli("oracle", "--mode", "attack", "--train", train_csv,
                       "--targets", targets_csv, "--budget", "9")
        assert proc.returncode == 3


class TestAttackOne:
    def test_three_target_fixture(self, fixture_csvs):
        train_csv, targets_csv = fixture_csvs
        proc = run_cli("attack-one", "--train", train_csv, "--targets", targets_csv,
                       "--yplus", "pos", "--k", "1", "--norm", "l2")
        assert proc.returncode == 0
        payload = json.loads(proc.stdout)
        jsonschema.validate(payload, load_schema("attack_one.schema.json"))
        assert payload["tsi"] == 3
        assert payload["completed"] is True

    def test_k3_requires_multiplicity_two(self, tmp_path):
        train, targets = fixture_k3_line()
        train_csv, targets_csv = tmp_path / "t.csv", tmp_path / "g.csv"
        write_dataset_csv(train, train_csv)
        write_dataset_csv(targets, targets_csv)
        proc = run_cli("attack-one", "--train", train_csv, "--targets", targets_csv,
                       "--k", "3")
        payload = json.loads(proc.stdout)
        assert payload["multiplicity"] == 2
        assert payload["tsi"] == 1


class TestAttackAndEval:
    def test_attack_writes_delta_and_eval_confirms(self, fixture_csvs, tmp_path):
        train_csv, targets_csv = fixture_csvs
        delta_csv = tmp_path / "delta.csv"
        proc = run_cli("attack", "--train", train_csv, "--targets", targets_csv,
                       "--yplus", "pos", "--budget", "2", "--delta-out", delta_csv)
        assert proc.returncode == 0
        payload = json.loads(proc.stdout)
        jsonschema.validate(payload, load_schema("attack.schema.json"))
        assert payload["score_after"] == 3
        assert payload["bound_factor"] is not None

        proc2 = run_cli("eval", "--train", train_csv, "--targets", targets_csv,
                        "--delta", delta_csv)
        out2 = json.loads(proc2.stdout)
        jsonschema.validate(out2, load_schema("eval.schema.json"))
        assert out2 == {
            **out2,
            "score_before": 0,
            "score_after": payload["score_after"],
        }


class TestOracleCommand:
    def test_single_mode_schema(self, fixture_csvs):
        train_csv, targets_csv = fixture_csvs
        proc = run_cli("oracle", "--mode", "single", "--train", train_csv,
                       "--targets", targets_csv)
        payload = json.loads(proc.stdout)
        jsonschema.validate(payload, load_schema("oracle.schema.json"))
        assert payload["best_tsi"] == 3

    def test_mis_mode(self, tmp_path):
        graph = tmp_path / "c5.txt"
        graph.write_text("1 2\n2 3\n3 4\n4 5\n5 1\n", encoding="utf-8")
        proc = run_cli("oracle", "--mode", "mis", "--graph", graph)
        payload = json.loads(proc.stdout)
        jsonschema.validate(payload, load_schema("oracle.schema.json"))
        assert payload["mis"] == 2

    def test_attack_mode_schema(self, fixture_csvs):
        train_csv, targets_csv = fixture_csvs
        proc = run_cli("oracle", "--mode", "attack", "--train", train_csv,
                       "--targets", targets_csv, "--budget", "1")
        payload = json.loads(proc.stdout)
        jsonschema.validate(payload, load_schema("oracle.schema.json"))
        assert payload["best_score"] == 3


class TestGadgetCommand:
    def test_k2_summary_and_files(self, tmp_path):
        graph = tmp_path / "k2.txt"
        graph.write_text("1 2\n", encoding="utf-8")
        proc = run_cli(
            "gadget", "--graph", graph,
            "--train-out", tmp_path / "t.csv", "--targets-out", tmp_path / "g.csv",
        )
        assert proc.returncode == 0
        payload = json.loads(proc.stdout)
        jsonschema.validate(payload, load_schema("gadget.schema.json"))
        assert payload["predicted_max_intersection"] == 3
        train = read_dataset_csv(tmp_path / "t.csv")
        targets = read_dataset_csv(tmp_path / "g.csv")
        assert train.dimension == targets.dimension == 2
        assert targets.total_weight == 2 + 2  # vertex targets + edge target x n


class TestSynthCommand:
    def test_csv_and_figure(self, tmp_path):
        out = tmp_path / "table.csv"
        proc = run_cli("synth", "--families", "uniform", "--m-list", "8",
                       "--d-list", "2", "--trials", "2", "--seed", "3",
                       "--out", out)
        assert proc.returncode == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0].startswith("family,norm,m,d,trials,mean_score,sem")
        assert len(lines) == 2
        assert (tmp_path / "table.png").exists()

    def test_explicit_figure_path(self, tmp_path):
        fig = tmp_path / "fig.png"
        proc = run_cli("synth", "--families", "uniform", "--m-list", "8",
                       "--d-list", "2", "--trials", "2", "--figure-out", fig)
        assert proc.returncode == 0
        assert fig.exists()
        assert proc.stdout.startswith("family,")


class TestPcaCommand:
    def test_fit_transform_roundtrip(self, tmp_path):
        rng = np.random.default_rng(0)
        from knnpoison.knn import Dataset

        data = Dataset(rng.standard_normal((30, 4)), ("a",) * 30)
        data_csv = tmp_path / "data.csv"
        write_dataset_csv(data, data_csv)
        model_json = tmp_path / "model.json"
        out_csv = tmp_path / "proj.csv"
        proc = run_cli("pca", "--in", data_csv, "--d-prime", "2",
                       "--model-out", model_json, "--out", out_csv)
        assert proc.returncode == 0
        payload = json.loads(proc.stdout)
        jsonschema.validate(payload, load_schema("pca.schema.json"))
        assert payload["d_prime"] == 2
        proj = read_dataset_csv(out_csv)
        assert proj.dimension == 2

        # reuse the stored model
        proc2 = run_cli("pca", "--in", data_csv, "--model-in", model_json,
                        "--out", tmp_path / "proj2.csv")
        assert proc2.returncode == 0
        proj2 = read_dataset_csv(tmp_path / "proj2.csv")
        assert np.allclose(proj.features, proj2.features)

    def test_missing_d_prime_rejected(self, tmp_path):
        train, _ = fixture_1d_three_targets()
        data_csv = tmp_path / "d.csv"
        write_dataset_csv(train, data_csv)
        assert run_cli("pca", "--in", data_csv).returncode == 2


class TestDefendCommand:
    def test_small_run(self, tmp_path):
        from knnpoison.experiments import gen_defense_instance

        train, targets, holdout = gen_defense_instance(
            d=8, n_per_class=30, n_targets=4, n_holdout=20, seed=3
        )
        paths = {}
        for name, ds in (("train", train), ("targets", targets), ("holdout", holdout)):
            paths[name] = tmp_path / f"{name}.csv"
            write_dataset_csv(ds, paths[name])
        out = tmp_path / "defense.csv"
        proc = run_cli("defend", "--train", paths["train"], "--targets", paths["targets"],
                       "--holdout", paths["holdout"], "--d-primes", "8,2",
                       "--budgets", "1", "--out", out)
        assert proc.returncode == 0, proc.stderr
        lines = out.read_text().strip().splitlines()
        assert lines[0].startswith("d_prime,explained_variance,loss,budget")
        assert len(lines) == 3
        assert (tmp_path / "defense.png").exists()


class TestDeterminism:
    def test_attack_one_byte_identical(self, fixture_csvs):
        train_csv, targets_csv = fixture_csvs
        args = ("attack-one", "--train", train_csv, "--targets", targets_csv,
                "--yplus", "pos", "--seed", "7")
        a = mask(run_cli(*args).stdout)
        b = mask(run_cli(*args).stdout)
        assert a == b

    def test_synth_independent_of_threads(self, tmp_path):
        args = ("synth", "--families", "uniform", "--m-list", "8", "--d-list", "2,4",
                "--trials", "2", "--seed", "9")
        a = run_cli(*args, "--threads", "1").stdout
        b = run_cli(*args, "--threads", "3").stdout
        assert a == b
