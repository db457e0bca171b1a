import json

import numpy as np
import pytest

from morlext.cli import load_run_config, main
from morlext.pareto import load_front_table


MINIMAL_CONFIG = """\
[run]
env = dual_goal
output_dir = {out}
total_budget = 3000
seed = 5

[lle]
k = 2
delta_alpha = 0.5
eval_episodes = 2
final_eval_episodes = 4

[ppo]
steps_per_batch = 64
minibatches = 4
epochs = 2
"""


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    config = tmp / "config.ini"
    out = tmp / "run"
    config.write_text(MINIMAL_CONFIG.format(out=out))
    assert main(["run", "--config", str(config)]) == 0
    return out


def test_run_writes_all_artifact_kinds(run_dir):
    assert (run_dir / "config.ini").is_file()
    assert (run_dir / "front.csv").is_file()
    assert (run_dir / "metrics.json").is_file()
    assert (run_dir / "front.svg").is_file()
    policies = run_dir / "policies"
    for name in ("bases", "directions", "selected", "fine_tuned", "final"):
        assert (policies / f"{name}.jsonl").is_file()
    assert (run_dir / "candidates.csv").is_file()
    assert any((run_dir / "train_logs").iterdir())


def test_metrics_json_consistent_with_front(run_dir):
    metrics = json.loads((run_dir / "metrics.json").read_text())
    archive = load_front_table(run_dir / "front.csv")
    assert metrics["archive_size"] == len(archive)
    assert metrics["budget"]["extension_training_steps"] == 0
    assert len(metrics["ref_point"]) == archive.d
    assert metrics["stage_hv"]["bases"] <= metrics["stage_hv"]["final"]


def test_metrics_recompute_matches_run_report(run_dir, capsys):
    metrics = json.loads((run_dir / "metrics.json").read_text())
    ref = ",".join(repr(v) for v in metrics["ref_point"])
    code = main(
        ["metrics", str(run_dir / "front.csv"), f"--ref-point={ref}",
         f"--eu-seed={metrics['eu_seed']}", f"--eu-samples={metrics['n_weights']}"]
    )
    assert code == 0
    recomputed = json.loads(capsys.readouterr().out)
    assert recomputed["hv"] == metrics["hv"]
    assert recomputed["eu"] == metrics["eu"]
    assert recomputed["sp"] == metrics["sp"]


def test_replaying_snapshot_reproduces_front(run_dir, tmp_path):
    replay_out = tmp_path / "replay"
    code = main(["run", "--config", str(run_dir / "config.ini"), "--output-dir", str(replay_out)])
    assert code == 0
    assert (replay_out / "front.csv").read_bytes() == (run_dir / "front.csv").read_bytes()


def test_front_svg_has_marker_shapes(run_dir):
    svg = (run_dir / "front.svg").read_text()
    assert svg.startswith("<svg")
    assert "circle" in svg


def test_distance_subcommand(run_dir, capsys):
    bases = str(run_dir / "policies" / "bases.jsonl")
    assert main(["distance", bases, bases, "--entry-b", "1"]) == 0
    out = capsys.readouterr().out
    assert "combined" in out and "actor.layer0" in out
    assert main(["distance", bases, bases]) == 0
    out = capsys.readouterr().out
    assert "combined (log stds excluded): 0" in out


def test_distance_bad_entry_is_usage_error(run_dir, capsys):
    bases = str(run_dir / "policies" / "bases.jsonl")
    assert main(["distance", bases, bases, "--entry-b", "99"]) == 1


def test_front_export_roundtrip(run_dir, tmp_path, capsys):
    out = tmp_path / "exported.csv"
    code = main(["front-export", str(run_dir / "policies" / "final.jsonl"), "-o", str(out)])
    assert code == 0
    exported = load_front_table(out)
    original = load_front_table(run_dir / "front.csv")
    assert {tuple(p.returns) for p in exported.points} == {tuple(p.returns) for p in original.points}


def test_synth_check_exit_codes(tmp_path, capsys):
    assert main(["synth-check", "flat"]) == 0
    table = tmp_path / "curve.csv"
    assert main(["synth-check", "curved", "--output", str(table)]) == 0
    assert table.is_file() and "alpha_norm" in table.read_text().splitlines()[0]
    assert main(["synth-check", "wiggly"]) == 1


def test_synth_check_numerical_failure_exits_2(monkeypatch, capsys):
    import morlext.cli as cli
    from morlext.quadratic import ErrorCurve

    bad = ErrorCurve(alpha_norms=np.array([0.05, 0.1, 0.5]),
                     distances=np.array([0.05, 0.1, 0.5]))  # slope 1: outside window
    monkeypatch.setattr(cli, "preset_error_curve", lambda name: bad)
    assert main(["synth-check", "curved"]) == 2
    assert "FAIL" in capsys.readouterr().err


def test_missing_config_is_usage_error(capsys):
    assert main(["run", "--config", "/nonexistent/config.ini"]) == 1


def test_unknown_config_key_rejected(tmp_path):
    config = tmp_path / "c.ini"
    config.write_text("[run]\nenv = dual_goal\nbogus_key = 3\noutput_dir = /tmp/x\n")
    assert main(["run", "--config", str(config)]) == 1


def test_budget_too_small_is_usage_error(tmp_path, capsys):
    config = tmp_path / "c.ini"
    config.write_text(
        f"[run]\nenv = dual_goal\ntotal_budget = 400\noutput_dir = {tmp_path / 'x'}\n"
        "[lle]\nk = 2\n"
    )
    assert main(["run", "--config", str(config)]) == 1
    assert "budget too small" in capsys.readouterr().err


def test_three_line_config_has_full_defaults(tmp_path):
    config = tmp_path / "tiny.ini"
    config.write_text("[run]\nenv = speed_energy\noutput_dir = unused\n")
    parsed = load_run_config(config)
    assert parsed["total_budget"] == 150_000
    assert parsed["lle"].K == 6
    assert parsed["lle"].delta_alpha == 0.05
    assert parsed["ppo"].steps_per_batch == 512
    assert parsed["ppo"].gamma == 0.995
