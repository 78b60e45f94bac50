"""
End-to-end tests of the command-line interface
"""
import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from tgt.cli import main
from tgt.services.inference import PREDICTION_COLUMNS

RUN_FILE = """
seed = 0
output_dir = "{root}/run"

[data]
train_path = "{root}/data/train.jsonl"
eval_path = "{root}/data/eval.jsonl"
count = 6
eval_count = 3
n_min = 4
n_max = 6

[model]
num_layers = 2
node_dim = 8
edge_dim = 4
num_heads = 2
triplet_heads = 2
variant = "triplet_agg"
node_ffn_dim = 8
edge_ffn_dim = 4
rbf_kernels = 4

[model.bins]
num_bins = 16

[training]
steps = 2
batch_size = 2
warmup_steps = 0
log_every = 1

[inference]
samples = 3
sample_counts = [1, 2]
repeats = 2

[sweep]
seeds = [0, 1]

[verify]
oracle_instances = 2
max_nodes = 4
gradcheck_coords = 2

[logging]
level = "WARNING"
"""


@pytest.fixture
def run_file(tmp_path) -> Path:
    path = tmp_path / "run.toml"
    path.write_text(RUN_FILE.format(root=tmp_path.as_posix()), encoding="utf-8")
    return path


def invoke(run_file: Path, *args: str):
    return CliRunner().invoke(main, ["--config", str(run_file), *args])


def test_gen_data_writes_requested_counts(tmp_path, run_file):
    result = invoke(run_file, "gen-data", "--count", "5", "--eval-count", "2")
    assert result.exit_code == 0, result.output
    train = (tmp_path / "data" / "train.jsonl").read_text().splitlines()
    held_out = (tmp_path / "data" / "eval.jsonl").read_text().splitlines()
    assert len(train) == 5
    assert len(held_out) == 2
    assert json.loads(held_out[0])["graph_id"] == 5


def test_train_is_reproducible(tmp_path, run_file):
    assert invoke(run_file, "gen-data").exit_code == 0
    logs = []
    for run in ("a", "b"):
        out = tmp_path / run
        result = invoke(run_file, "--output-dir", str(out), "train", "--stage", "single_stage")
        assert result.exit_code == 0, result.output
        logs.append((out / "logs" / "single_stage.csv").read_bytes())
    assert logs[0] == logs[1]


def test_pipeline_eval_and_infer(tmp_path, run_file):
    assert invoke(run_file, "gen-data").exit_code == 0
    result = invoke(run_file, "train", "--stage", "pipeline")
    assert result.exit_code == 0, result.output

    checkpoints = tmp_path / "run" / "checkpoints"
    for stage in ("distance_pretrain", "task_pretrain", "task_finetune"):
        assert (checkpoints / f"{stage}.npz").is_file()

    result = invoke(
        run_file,
        "eval",
        "--checkpoint",
        str(checkpoints / "task_finetune.npz"),
        "--distance-checkpoint",
        str(checkpoints / "distance_pretrain.npz"),
    )
    assert result.exit_code == 0, result.output
    assert (tmp_path / "run" / "eval_task_finetune.csv").is_file()

    result = invoke(
        run_file,
        "infer",
        "--distance-checkpoint",
        str(checkpoints / "distance_pretrain.npz"),
        "--task-checkpoint",
        str(checkpoints / "task_finetune.npz"),
        "--sample-curve",
    )
    assert result.exit_code == 0, result.output
    predictions = (tmp_path / "run" / "predictions.csv").read_text().splitlines()
    assert predictions[0] == ",".join(PREDICTION_COLUMNS)
    assert len(predictions) == 4
    assert (tmp_path / "run" / "confidence_curve.csv").is_file()
    assert (tmp_path / "run" / "sample_count.csv").is_file()


def test_sweep_summarizes_selected_variants(tmp_path, run_file):
    assert invoke(run_file, "gen-data").exit_code == 0
    result = invoke(
        run_file,
        "sweep",
        "--stage",
        "single_stage",
        "--variant",
        "none",
        "--variant",
        "triplet_agg",
    )
    assert result.exit_code == 0, result.output
    runs = (tmp_path / "run" / "sweep_runs.csv").read_text().splitlines()
    summary = (tmp_path / "run" / "sweep_summary.csv").read_text().splitlines()
    assert len(runs) == 5
    assert len(summary) == 3
    assert summary[1].startswith("none,2,")
    assert summary[2].startswith("triplet_agg,2,")


def test_infer_needs_checkpoints(run_file):
    result = invoke(run_file, "infer")
    assert result.exit_code == 6


def test_verify(run_file):
    result = invoke(run_file, "verify")
    assert result.exit_code == 0, result.output
    assert "failures: 0" in result.output


def test_unknown_config_key_exits_with_config_code(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[model]\nbogus = 1\n", encoding="utf-8")
    result = CliRunner().invoke(main, ["--config", str(path), "verify"])
    assert result.exit_code == 2
    assert '"error": "config"' in result.output


def test_missing_dataset_exits_with_data_code(run_file):
    result = invoke(run_file, "train")
    assert result.exit_code == 4
