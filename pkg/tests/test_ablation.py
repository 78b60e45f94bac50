"""
Tests for the variant ablation sweep
"""
import csv

import pytest

from tgt.core.config import RunConfig, StageConfig, SweepSettings
from tgt.core.exceptions import ConfigError, PipelineError
from tgt.services import ablation


def sweep_config(tmp_path, make_config, **sweep) -> RunConfig:
    return RunConfig(
        model=make_config(),
        training=StageConfig(
            stage="single_stage", steps=1, batch_size=2, warmup_steps=0, log_every=1
        ),
        sweep=SweepSettings(**sweep),
        output_dir=tmp_path,
    )


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def test_variant_config_sets_heads_seed_and_directory(tmp_path, make_config):
    config = RunConfig(model=make_config(variant="none"), output_dir=tmp_path)
    cell = ablation.variant_config(config, "triangular", 4)
    assert cell.model.variant == "triangular"
    assert cell.model.triplet_heads == 2
    assert cell.seed == 4
    assert cell.output_dir == tmp_path / "sweep" / "triangular" / "seed_4"
    assert ablation.variant_config(cell, "none", 4).model.triplet_heads == 0
    assert config.model.variant == "none"


def test_variant_config_rejects_incompatible_heads(tmp_path, make_config):
    config = RunConfig(
        model=make_config(variant="none"),
        sweep=SweepSettings(triplet_heads=3),
        output_dir=tmp_path,
    )
    with pytest.raises(ConfigError):
        ablation.variant_config(config, "triplet_att", 0)


def test_summary_statistics():
    runs = [
        {"variant": "none", "seed": 0, "parameters": 10, "distance_ce": 1.0, "mae": 2.0},
        {"variant": "none", "seed": 1, "parameters": 10, "distance_ce": 1.2, "mae": 4.0},
        {"variant": "triplet_agg", "seed": 0, "parameters": 12, "distance_ce": 0.9},
        {"variant": "triplet_agg", "seed": 1, "parameters": 12, "distance_ce": 1.1},
    ]
    none, agg = ablation.summarize_runs(runs)
    assert none["runs"] == 2
    assert none["distance_ce_mean"] == pytest.approx(1.1)
    assert none["distance_ce_std"] == pytest.approx(0.1414213562, rel=1e-9)
    assert none["mae_mean"] == pytest.approx(3.0)
    assert none["distance_ce_vs_none"] == pytest.approx(0.0)
    assert agg["parameters"] == 12
    assert "mae_mean" not in agg
    assert agg["distance_ce_vs_none"] == pytest.approx(1.0 / 1.1 - 1.0)


def test_single_seed_has_zero_spread():
    (entry,) = ablation.summarize_runs(
        [{"variant": "axial", "seed": 0, "parameters": 5, "f1": 80.0}]
    )
    assert entry["f1_mean"] == 80.0
    assert entry["f1_std"] == 0.0
    assert "distance_ce_vs_none" not in entry


def test_sweep_writes_runs_and_summary(tmp_path, make_config, graphs):
    config = sweep_config(
        tmp_path, make_config, variants=["none", "triplet_agg"], seeds=[0, 1], stage="single_stage"
    )
    report = ablation.run_sweep(config, graphs, graphs[:2])

    assert [(r["variant"], r["seed"]) for r in report.runs] == [
        ("none", 0),
        ("none", 1),
        ("triplet_agg", 0),
        ("triplet_agg", 1),
    ]
    assert report.runs[0]["parameters"] < report.runs[2]["parameters"]
    assert all("distance_ce" in r and "mae" in r for r in report.runs)

    runs = read_rows(report.runs_path)
    summary = read_rows(report.summary_path)
    assert list(runs[0]) == ablation.RUN_COLUMNS
    assert list(summary[0]) == ablation.SUMMARY_COLUMNS
    assert [row["variant"] for row in summary] == ["none", "triplet_agg"]
    assert all(row["runs"] == "2" for row in summary)
    assert float(summary[0]["distance_ce_vs_none"]) == 0.0
    for variant in ("none", "triplet_agg"):
        for seed in (0, 1):
            run_dir = tmp_path / "sweep" / variant / f"seed_{seed}"
            assert (run_dir / "checkpoints" / "single_stage.npz").is_file()


def test_sweep_needs_held_out_set(tmp_path, make_config, graphs):
    config = sweep_config(tmp_path, make_config, variants=["none"], seeds=[0])
    with pytest.raises(PipelineError):
        ablation.run_sweep(config, graphs, [])


@pytest.mark.slow
def test_distance_sweep_over_every_variant(tmp_path, make_config, graphs):
    config = sweep_config(tmp_path, make_config, stage="distance_pretrain")
    report = ablation.run_sweep(config, graphs, graphs[:2])
    assert len(report.runs) == 7 * 3
    assert [entry["variant"] for entry in report.summary] == SweepSettings().variants
    for entry in report.summary:
        assert entry["runs"] == 3
        assert entry["distance_ce_mean"] > 0.0
        assert "distance_ce_vs_none" in entry
