import json

import pytest
import yaml

from lsa import cli
from lsa.config import ExperimentConfig
from lsa.embed import ProbeParams

TINY = {
    "levels": [1, 3],
    "object_seeds": [0],
    "train_trajectories": 10,
    "test_trajectories": 2,
    "injectivity_pairs": 8,
    "train": {"epochs": 3, "batch_size": 8},
}


@pytest.fixture
def tiny_config(tmp_path, monkeypatch):
    path = tmp_path / "tiny.yaml"
    path.write_text(yaml.safe_dump(TINY))
    monkeypatch.setenv("LSA_OUT", str(tmp_path / "out"))
    return path


def run(argv, capsys):
    code = cli.run(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# configuration


def test_config_defaults():
    cfg = ExperimentConfig()
    assert cfg.seed == 42 and cfg.train.seed == 42
    assert cfg.train.learning_rate == 1e-4 and cfg.train.batch_size == 1024 and cfg.train.epochs == 50
    assert cfg.walk_length == 20


def test_config_round_trip(tmp_path):
    cfg = ExperimentConfig.from_dict(TINY)
    again = ExperimentConfig.from_dict(json.loads(cfg.dumps()))
    assert again == cfg and again.dumps() == cfg.dumps()
    (tmp_path / "c.json").write_text(cfg.dumps())
    assert ExperimentConfig.load(tmp_path / "c.json") == cfg


def test_config_rejects_unknown_keys():
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"levels": [1], "colour": "red"})
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"levels": [4]})
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"losses": ["l1"]})


def test_seed_override_reaches_all_streams():
    cfg = ExperimentConfig().with_seed(7)
    assert cfg.seed == 7 and cfg.train.seed == 7
    assert cfg.dataset_config(2).seed == 7


def test_lsa_out_overrides(monkeypatch, tmp_path):
    monkeypatch.setenv("LSA_OUT", str(tmp_path / "x"))
    assert ExperimentConfig(output_dir="elsewhere").output_root() == tmp_path / "x"


def test_flag_overrides(tiny_config):
    args = cli.build_parser().parse_args(
        ["train", "--config", str(tiny_config), "--level", "3", "--loss", "cosine", "--encoder", "oracle", "--seed", "5"]
    )
    cfg = cli.config_from_args(args)
    assert cfg.levels == [3] and cfg.losses == ["cosine"]
    assert cfg.encoder["kind"] == "oracle" and cfg.seed == 5 and cfg.train.seed == 5
    assert cfg.train.epochs == 3


# pipeline commands


def test_generate_writes_manifest(tiny_config, tmp_path, capsys):
    code, out, _ = run(["generate", "--config", str(tiny_config), "--level", "3", "--workers", "1"], capsys)
    assert code == 0 and "injectivity passed" in out
    manifest = json.loads((tmp_path / "out" / "level3" / "dataset" / "manifest.json").read_text())
    assert len(manifest["trajectories"]) == 12
    assert manifest["generators"]["angle_deg"] == 30.0
    assert manifest["generators"]["translation_3d"] == [0.15, 0.15, 0.0]


def test_generate_twice_is_byte_identical(tiny_config, tmp_path, capsys):
    run(["generate", "--config", str(tiny_config), "--level", "1"], capsys)
    path = tmp_path / "out" / "level1" / "dataset" / "manifest.json"
    first = path.read_bytes()
    run(["generate", "--config", str(tiny_config), "--level", "1", "--workers", "2"], capsys)
    assert path.read_bytes() == first


def test_train_without_dataset_is_io_error(tiny_config, capsys):
    code, _, err = run(["train", "--config", str(tiny_config)], capsys)
    assert code == cli.EXIT_IO and "no dataset" in err


def test_eval_without_probe_is_io_error(tiny_config, capsys):
    run(["generate", "--config", str(tiny_config), "--level", "1"], capsys)
    code, _, err = run(["eval", "--config", str(tiny_config), "--level", "1"], capsys)
    assert code == cli.EXIT_IO and "no trained probe" in err


def test_full_pipeline(tiny_config, tmp_path, capsys):
    code, out, _ = run(["repro", "--config", str(tiny_config)], capsys)
    assert code == 0
    root = tmp_path / "out"
    for level in (1, 3):
        for loss in ("mse", "cosine"):
            ProbeParams.load(root / f"level{level}" / f"probe_{loss}.json")
            curve = (root / f"level{level}" / f"loss_{loss}.csv").read_text().splitlines()
            assert curve[0] == "epoch,loss" and len(curve) == 4
            report = json.loads((root / f"level{level}" / f"report_{loss}.json").read_text())
            assert [s["n"] for s in report["per_step"]] == list(range(1, 21))
            assert "collapse_step" in report
    summary = json.loads((root / "summary_mse.json").read_text())
    assert set(summary["auc"]) == {"L1", "L3"}
    assert (root / "report.csv").read_text().startswith("level,loss,N,mean_loss,baseline,ratio\n")
    assert json.loads((root / "compounding.json").read_text())["epsilon"] == 0.01
    assert "ordering" in out


def test_identity_task_training(tmp_path, monkeypatch, capsys):
    # with the oracle encoder level-1 transitions are exactly learnable
    cfg = dict(TINY, levels=[1], losses=["mse"], encoder={"kind": "oracle"},
               train={"learning_rate": 1e-2, "batch_size": 64, "epochs": 200})
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump(cfg))
    monkeypatch.setenv("LSA_OUT", str(tmp_path / "out"))
    run(["generate", "--config", str(path)], capsys)
    code, out, _ = run(["train", "--config", str(path)], capsys)
    assert code == 0
    curve = (tmp_path / "out" / "level1" / "loss_mse.csv").read_text().splitlines()
    assert float(curve[-1].split(",")[1]) < 1e-6


def test_bad_config_is_usage_error(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text("levels: [9]\n")
    code, _, err = run(["generate", "--config", str(path)], capsys)
    assert code == cli.EXIT_USAGE
    path.write_text("levels: [1\n")
    assert run(["generate", "--config", str(path)], capsys)[0] == cli.EXIT_USAGE


def test_missing_config_is_io_error(tmp_path, capsys):
    assert run(["generate", "--config", str(tmp_path / "nope.yaml")], capsys)[0] == cli.EXIT_IO


def test_argparse_errors_exit_one(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.run(["generate", "--level", "7"])
    assert exc.value.code == cli.EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        cli.run([])
    assert exc.value.code == cli.EXIT_USAGE


# algebra


def json_tail(out):
    return json.loads(out[out.index("{"):])


def test_algebra_derived_series(capsys):
    code, out, _ = run(["algebra", "derived-series", "S4"], capsys)
    assert code == 0
    assert "24, 12, 4, 1" in out and "SolvableNonAbelian" in out
    assert json_tail(out) == {"orders": [24, 12, 4, 1], "class": "SolvableNonAbelian"}


def test_algebra_derived_series_from_cycles(capsys):
    code, out, _ = run(["algebra", "derived-series", "(0 1 2 3 4)", "(0 1 2)"], capsys)
    assert code == 0 and json_tail(out)["class"] == "NonSolvable"


def test_algebra_word_eval(capsys):
    code, out, _ = run(["algebra", "word-eval", "A5", "g0 g0^-1"], capsys)
    assert code == 0 and "identity: true" in out
    assert json_tail(out)["identity"] is True
    code, out, _ = run(["algebra", "word-eval", "icosahedral", "g0 g0 g0 g0 g0"], capsys)
    assert json_tail(out)["identity"] is True


def test_algebra_barrington(capsys):
    code, out, _ = run(["algebra", "barrington", "(x0 & x1)"], capsys)
    assert code == 0
    assert "length: 4" in out and "verified" in out
    data = json_tail(out)
    assert data["program"]["length"] == 4 and data["truth_table"]["verified"]


def test_algebra_parse_error_reports_position(capsys):
    code, _, err = run(["algebra", "barrington", "(x0 & "], capsys)
    assert code == cli.EXIT_USAGE and "position 6" in err
    code, _, err = run(["algebra", "word-eval", "S4", "g0 q"], capsys)
    assert code == cli.EXIT_USAGE and "position 3" in err


def test_algebra_unknown_group(capsys):
    code, _, err = run(["algebra", "derived-series", "Q8"], capsys)
    assert code == cli.EXIT_USAGE and "Q8" in err
