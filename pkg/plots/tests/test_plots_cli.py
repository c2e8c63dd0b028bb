"""Command-line behavior: outputs, defaults, and exit codes."""

import pytest

from swarmplots import cli


def test_render_l1curve_prints_written_path(box_run, tmp_path, capsys):
    out_dir = tmp_path / "figs"
    code = cli.main(["render", "--run", str(box_run), "--kind", "l1curve",
                     "--out", str(out_dir)])
    assert code == 0
    listed = capsys.readouterr().out.strip().splitlines()
    assert listed == [str(out_dir / "l1curve.png")]
    assert (out_dir / "l1curve.png").stat().st_size > 1000


def test_default_output_is_figures_subdirectory(box_run, capsys):
    code = cli.main(["render", "--run", str(box_run), "--kind", "scatter3d"])
    assert code == 0
    # defaults: figures/ under the run, at the final snapshot time
    assert (box_run / "figures" / "scatter3d_t1.png").is_file()


def test_times_match_nearest_snapshots(box_run, tmp_path, capsys):
    out_dir = tmp_path / "figs"
    code = cli.main(["render", "--run", str(box_run), "--kind", "scatter3d",
                     "--times", "0,0.45", "--out", str(out_dir)])
    assert code == 0
    assert (out_dir / "scatter3d_t0.png").is_file()
    assert (out_dir / "scatter3d_t0.5.png").is_file()


def test_sphere_kind_renders_from_box_run(box_run, tmp_path):
    out_dir = tmp_path / "figs"
    code = cli.main(["render", "--run", str(box_run), "--kind", "sphere",
                     "--out", str(out_dir)])
    assert code == 0
    assert (out_dir / "sphere_t1.png").stat().st_size > 1000


def test_contract_violation_exits_one_with_message(box_run, tmp_path, capsys):
    path = box_run / "metrics.csv"
    path.write_text(path.read_text().replace("moving_fraction", "frac_moving"))
    code = cli.main(["render", "--run", str(box_run), "--kind", "l1curve",
                     "--out", str(tmp_path)])
    assert code == 1
    err = capsys.readouterr().err
    assert "metrics.csv" in err
    assert "moving_fraction" in err


def test_missing_run_directory_exits_one(tmp_path, capsys):
    code = cli.main(["render", "--run", str(tmp_path / "nowhere"),
                     "--kind", "l1curve"])
    assert code == 1
    assert "file not found" in capsys.readouterr().err


def test_usage_errors_exit_two(box_run, capsys):
    assert cli.main(["render", "--run", str(box_run), "--kind", "mosaic"]) == 2
    assert cli.main(["render", "--kind", "l1curve"]) == 2
    assert cli.main([]) == 2
    assert cli.main(["render", "--run", str(box_run), "--kind", "scatter3d",
                     "--times", "one,two"]) == 2
    capsys.readouterr()


def test_version_flag(capsys):
    assert cli.main(["--version"]) == 0
    assert "plots" in capsys.readouterr().out
