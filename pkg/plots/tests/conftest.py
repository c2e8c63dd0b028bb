import numpy as np
import pytest

from rundirs import write_info, write_metrics, write_snapshots


@pytest.fixture
def box_run(tmp_path):
    """A small box-domain run: 40 particles scattered in [0, 10]^3."""
    run_dir = tmp_path / "boxrun"
    run_dir.mkdir()
    rng = np.random.default_rng(21)
    positions = rng.uniform(0.0, 10.0, size=(40, 3))
    states = (np.arange(40) % 3 == 0).astype(int)
    write_snapshots(run_dir, (0.0, 0.5, 1.0), positions, states)
    write_metrics(run_dir, [(0.0, 1.4, 1.0, 1.0), (0.5, 0.9, 0.6, 1.0),
                            (1.0, 0.4, 0.2, 1.0)])
    write_info(run_dir, {
        "config": {"domain": {"kind": "box", "lo": [0.0, 0.0, 0.0],
                              "hi": [10.0, 10.0, 10.0]},
                   "target": {"kind": "balls8"}},
        "seed": 21, "code_version": "test"})
    return run_dir


@pytest.fixture
def sphere_run(tmp_path):
    """A sphere-domain run: 1000 unit vectors, motionless near the poles."""
    run_dir = tmp_path / "sphererun"
    run_dir.mkdir()
    rng = np.random.default_rng(4)
    positions = rng.normal(size=(1000, 3))
    positions /= np.linalg.norm(positions, axis=1, keepdims=True)
    states = (np.abs(positions[:, 2]) > 0.8).astype(int)
    write_snapshots(run_dir, (0.0, 100.0), positions, states)
    write_metrics(run_dir, [(0.0, 1.2, 1.0, 1.0), (100.0, 0.1, 0.12, 1.0)])
    write_info(run_dir, {
        "config": {"domain": {"kind": "sphere"}, "target": {"kind": "caps"}},
        "seed": 4, "code_version": "test"})
    return run_dir
