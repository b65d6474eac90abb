import subprocess
import sys

import pytest

from quadmat.cli import main
from quadmat.generators import ExperimentCase, flop_count_exact, solve_block_size


def run_cli(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_flops_banded(capsys):
    code, out, err = run_cli(["flops", "--case", "banded", "--n", "100", "--b", "3"], capsys)
    assert code == 0
    assert int(out.strip()) == flop_count_exact(ExperimentCase("banded", 100, 3))


def test_flops_growing_block_solves_s(capsys):
    code, out, _ = run_cli(
        ["flops", "--case", "growing-block", "--n", "20000", "--b", "600"], capsys
    )
    assert code == 0
    s = solve_block_size("growing_block", 20000, 600)
    want = flop_count_exact(ExperimentCase("growing_block", 20000, 600, s=s))
    assert int(out.strip()) == want


def test_flops_explicit_s_and_default_b(capsys):
    code, out, _ = run_cli(
        ["flops", "--case", "growing-block", "--n", "320", "--s", "40"], capsys
    )
    assert code == 0
    want = flop_count_exact(ExperimentCase("growing_block", 320, 10, s=40))  # b = n//32
    assert int(out.strip()) == want


def test_flops_target_ratio_one_meets_banded(capsys):
    base, *_ = run_cli(["flops", "--case", "banded", "--n", "5000", "--b", "100"], capsys)
    code, out, _ = run_cli(
        ["flops", "--case", "growing-block", "--n", "5000", "--b", "100",
         "--target-ratio", "1.0"],
        capsys,
    )
    assert code == 0
    want = flop_count_exact(ExperimentCase("banded", 5000, 100))
    assert int(out.strip()) == want  # ratio 1 solves to s = 0


def test_unknown_case_is_an_argparse_error(capsys):
    with pytest.raises(SystemExit) as info:
        main(["flops", "--case", "circulant", "--n", "100"])
    assert info.value.code == 2


def test_domain_errors_exit_one(capsys):
    code, out, err = run_cli(
        ["flops", "--case", "growing-block", "--n", "100", "--b", "90",
         "--target-ratio", "3.0"],
        capsys,
    )
    assert code == 1
    assert "bench: error" in err
    assert out == ""


def test_run_writes_csv_and_plots(tmp_path, capsys):
    out_dir = tmp_path / "results"
    code, out, err = run_cli(
        ["run", "--case", "banded", "--n", "192", "--b", "3", "--workers", "2",
         "--leaf-dim", "32", "--block-size", "8", "--repeats", "2",
         "--out", str(out_dir)],
        capsys,
    )
    assert code == 0
    assert (out_dir / "bench.csv").exists()
    for stem in ("wall_time", "efficiency", "bytes_received"):
        assert (out_dir / f"{stem}.svg").exists()
    assert "wrote" in out

    from quadmat.bench import load_csv

    records = load_csv(out_dir / "bench.csv")
    assert len(records) == 2
    assert records[0].case_id == "banded-n192"


def test_run_shared_mode(tmp_path, capsys):
    out_dir = tmp_path / "shm"
    code, _, _ = run_cli(
        ["run", "--case", "banded", "--n", "128", "--b", "2", "--workers", "2",
         "--leaf-dim", "32", "--block-size", "8", "--repeats", "1",
         "--mode", "shared", "--out", str(out_dir)],
        capsys,
    )
    assert code == 0
    assert (out_dir / "bench.csv").exists()


def test_sweep_weak_scaling_config(tmp_path, capsys):
    config = tmp_path / "sweep.cfg"
    out_dir = tmp_path / "sweep-out"
    config.write_text(
        "# tiny weak-scaling sweep\n"
        "cases = banded\n"
        "workers = 1,2\n"
        "weak_n_per_worker = 96\n"
        "b = 3\n"
        "leaf_dim = 32\n"
        "block_size = 8\n"
        "repeats = 2\n"
        f"out = {out_dir}\n"
    )
    code, out, err = run_cli(["sweep", "--config", str(config)], capsys)
    assert code == 0
    from quadmat.bench import load_csv

    records = load_csv(out_dir / "bench.csv")
    assert len(records) == 4  # 2 worker counts x 2 repeats
    by_workers = {r.n_workers: r.n for r in records}
    assert by_workers == {1: 96, 2: 192}  # weak scaling: n grows with workers
    assert (out_dir / "wall_time.svg").exists()


def test_sweep_rejects_unknown_keys(tmp_path, capsys):
    config = tmp_path / "bad.cfg"
    config.write_text("n = 128\nfrobnicate = 7\n")
    code, _, err = run_cli(["sweep", "--config", str(config)], capsys)
    assert code == 1
    assert "frobnicate" in err


def test_sweep_needs_exactly_one_size_key(tmp_path, capsys):
    config = tmp_path / "bad.cfg"
    config.write_text("n = 128\nweak_n_per_worker = 64\n")
    code, _, err = run_cli(["sweep", "--config", str(config)], capsys)
    assert code == 1
    config.write_text("workers = 1\n")
    code, _, err = run_cli(["sweep", "--config", str(config)], capsys)
    assert code == 1


def test_sweep_rejects_malformed_lines(tmp_path, capsys):
    config = tmp_path / "bad.cfg"
    config.write_text("just some words\n")
    code, _, err = run_cli(["sweep", "--config", str(config)], capsys)
    assert code == 1
    assert "key=value" in err


def test_console_script_is_installed():
    proc = subprocess.run(
        ["bench", "flops", "--case", "banded", "--n", "100", "--b", "3"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert int(proc.stdout.strip()) == flop_count_exact(ExperimentCase("banded", 100, 3))
