import dataclasses
import sys

import pytest

# the trainer consumes the simulator only through its CLI and file formats;
# the fixtures below shell into that CLI to produce real datasets


def _generate(tmp_dir, n_traj, duration_s, seed):
    from tsgsim.cli import main as tsgsim_main
    from tsgsim.scenario import preset_leo_crew3, save_scenario

    cfg = dataclasses.replace(preset_leo_crew3(), sim_duration=duration_s)
    cfg_path = tmp_dir / "scenario.json"
    save_scenario(cfg, cfg_path)
    code = tsgsim_main(
        [
            "gen-dataset",
            "--config", str(cfg_path),
            "--n-traj", str(n_traj),
            "--seed", str(seed),
            "--out", str(tmp_dir),
        ]
    )
    assert code == 0, "dataset generation failed"
    return tmp_dir


@pytest.fixture(scope="session")
def small_dataset_dir(tmp_path_factory):
    """8 short trajectories; enough for unit tests."""
    return _generate(tmp_path_factory.mktemp("small_ds"), 8, 600.0, seed=5)


@pytest.fixture(scope="session")
def desk_dataset_dir(tmp_path_factory):
    """50 trajectories covering the approach into the close phase."""
    return _generate(tmp_path_factory.mktemp("desk_ds"), 50, 1500.0, seed=17)
