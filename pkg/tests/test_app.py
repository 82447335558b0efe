from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from controllers.app import MANIFEST_NAME, RunManifest, run, sha256_file
from disk.storage import IO, dict_to_config
from main import apply_overrides, build_parser, main
from models.base import Verdict
from models.errors import ConfigInvalid
from models.params import Formats, Task_Name
from models.version import get_app_version
from oracle.constants import Calibration, ConstantsReport
from verify.ratios import RatioCheck, RatioRow
from verify.report import Provenance, VerificationReport
from walks.batch import Statistic

LAZY_MODEL = {"kind": "Y", "xi": {"-1": 0.25, "0": 0.5, "1": 0.25}, "restart": {"1": 1.0}}
SMALL_ORACLE = {"spitzer_terms": 1024, "ladder_horizon": 4000, "x_max": 64}


def simulate_config(**changes):
    payload = {
        "version": 1,
        "model": LAZY_MODEL,
        "tasks": ["simulate"],
        "seed": 11,
        "convention": "fixed:on_negative",
        "sampling": {"n": 32, "paths": 1000, "chunk_size": 250, "dump_paths": 2},
        "oracle": SMALL_ORACLE,
        **changes,
    }
    return dict_to_config(payload)


def test_constants_run_calibrates_and_writes_a_manifest(fixtures_dir, tmp_path):
    config = IO.load_config(fixtures_dir / "perturbed-lazy.json")
    manifest = run(config, tmp_path)
    assert manifest.tasks == [Task_Name.CONSTANTS]
    assert manifest.verdict is Verdict.NA
    assert sorted(manifest.checksums()) == ["calibration.json", "constants.json"]
    constants = IO.load_json(tmp_path / "constants.json", ConstantsReport)
    assert constants.alpha == pytest.approx(2.0 / 3.0, abs=1e-4)
    assert constants.convention.label == "on_negative/0"
    calibration = IO.load_json(tmp_path / "calibration.json", Calibration)
    assert calibration.convention == constants.convention
    saved = IO.load_json(tmp_path / MANIFEST_NAME, RunManifest)
    assert saved.config_hash == config.config_hash()
    assert saved.finished >= saved.started


def test_fixed_convention_skips_calibration(tmp_path):
    config = simulate_config(tasks=["constants"], convention="fixed:on_nonpositive:1")
    manifest = run(config, tmp_path)
    assert list(manifest.checksums()) == ["constants.json"]
    assert IO.load_json(tmp_path / "constants.json", ConstantsReport).convention.label == "on_nonpositive/1"


def test_dp_tables_and_limit_density(tmp_path):
    config = simulate_config(tasks=["dp"], seed=None, grids={"n_grid": [64, 128]})
    manifest = run(config, tmp_path)
    names = set(manifest.checksums())
    assert {f"survival-x{x}.csv" for x in (0, 1, 2, 5)} <= names
    assert {"renewal-h.csv", "returns.csv", "density-t1.csv"} <= names
    with (tmp_path / "density-t1.csv").open(encoding="utf-8", newline="") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["coordinate", "density"]
    coordinates, density = np.array(rows[1:], dtype=float).T
    # the reflected walk has the half-normal limit
    assert np.all(density[coordinates < 0] == 0.0)
    assert np.trapezoid(density, coordinates) == pytest.approx(1.0, abs=0.02)


def test_simulation_outputs(tmp_path):
    manifest = run(simulate_config(), tmp_path)
    assert sorted(manifest.checksums()) == ["path-0.csv", "path-1.csv", "simulate.json"]
    summary = json.loads((tmp_path / "simulate.json").read_text(encoding="utf-8"))
    assert summary["paths"] == 1000
    assert [estimate["statistic"] for estimate in summary["estimates"]] == [s.value for s in Statistic]
    entry = manifest.files()[0]
    assert entry.sha256 == sha256_file(tmp_path / entry.path)
    assert entry.size == (tmp_path / entry.path).stat().st_size


def test_runs_are_reproducible_across_worker_counts(tmp_path):
    first = run(simulate_config(), tmp_path / "a")
    second = run(simulate_config(threads=2), tmp_path / "b")
    assert first.checksums() == second.checksums()
    assert first.config_hash == second.config_hash
    other = run(simulate_config(seed=12), tmp_path / "c")
    assert other.checksums()["simulate.json"] != first.checksums()["simulate.json"]


def test_verify_writes_png_charts(tmp_path):
    config = simulate_config(
        tasks=["verify"],
        charts=["png"],
        grids={"n_grid": [64, 128], "x_grid": [0, 1], "harmonic_x_max": 10, "tightness_n": [32, 64]},
    )
    manifest = run(config, tmp_path)
    charts = sorted(name for name in manifest.checksums() if name.startswith("charts/"))
    assert "charts/tail.png" in charts
    assert all(name.endswith(".png") for name in charts)
    with Image.open(tmp_path / "charts" / "tail.png") as image:
        assert image.size == (640, 400)
    assert config.config_hash() != config.replace(charts=[Formats.svg]).config_hash()


def test_stochastic_tasks_need_a_seed(tmp_path):
    config = simulate_config().replace(seed=None)
    with pytest.raises(ConfigInvalid):
        run(config, tmp_path)


def test_too_few_paths_for_simulation(tmp_path):
    config = simulate_config(sampling={"n": 32, "paths": 999})
    with pytest.raises(ConfigInvalid):
        run(config, tmp_path)


def test_version_stamp_comes_from_the_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("SKEWALK_VERSION", "1.2.3")
    get_app_version.cache_clear()
    try:
        manifest = run(simulate_config(tasks=["constants"]), tmp_path)
    finally:
        get_app_version.cache_clear()
    assert manifest.version == "1.2.3"


# ---- command line ----
def write_config(directory: Path, **changes) -> Path:
    payload = {"version": 1, "model": LAZY_MODEL, "tasks": ["constants"], "oracle": SMALL_ORACLE, **changes}
    path = directory / "config.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


def test_main_runs_and_prints_the_verdict(tmp_path, capsys):
    config = write_config(tmp_path, convention="fixed:on_negative")
    out = tmp_path / "out"
    assert main(["--config", str(config), "--out", str(out), "-q"]) == 0
    assert capsys.readouterr().out.strip() == "verdict: na"
    assert (out / "constants.json").is_file()
    assert (out / MANIFEST_NAME).is_file()


def test_flags_override_the_file(tmp_path):
    config = IO.load_config(write_config(tmp_path, seed=1))
    argv = ["--config", "x.json", "--seed", "5", "--threads", "2", "--task", "dp", "constants", "--out", "elsewhere"]
    args = build_parser().parse_args([*argv, "--charts", "png"])
    merged = apply_overrides(config, args)
    assert (merged.seed, merged.threads, merged.out_dir) == (5, 2, Path("elsewhere"))
    assert merged.expanded_tasks() == [Task_Name.CONSTANTS, Task_Name.DP]
    assert merged.charts == [Formats.png]
    assert config.charts == [Formats.svg]
    assert merged.model == config.model
    plain = build_parser().parse_args(["--config", "x.json"])
    assert apply_overrides(config, plain) is config


@pytest.mark.parametrize(
    ("argv", "env"),
    [
        (["--config", "absent.json"], None),
        (["--config", "{config}", "--threads", "0"], None),
        (["--config", "{config}", "--task", "simulate"], None),
        (["--config", "{config}", "--convention", "fixed:sideways"], None),
        (["--config", "{config}"], "many"),
    ],
)
def test_configuration_errors_exit_with_two(argv, env, tmp_path, monkeypatch):
    config = write_config(tmp_path)
    if env is not None:
        monkeypatch.setenv("SKEWALK_THREADS", env)
    argv = [arg.format(config=config) for arg in argv]
    assert main([*argv, "--out", str(tmp_path / "out"), "-q"]) == 2


def test_threads_come_from_the_environment(tmp_path, monkeypatch):
    config = write_config(tmp_path, convention="fixed:on_negative")
    monkeypatch.setenv("SKEWALK_THREADS", "3")
    assert main(["--config", str(config), "--out", str(tmp_path / "out"), "-q"]) == 0


def test_plotdata_from_an_existing_report(tmp_path, capsys):
    config = write_config(tmp_path)
    out = tmp_path / "out"
    report = VerificationReport(
        provenance=Provenance(
            config_hash="0" * 64, version="dev", convention="on_negative/0", kind="Y", n=8, paths=1, chunk_size=1
        )
    )
    report.add(RatioCheck(name="tail", claim="", rows=[RatioRow.fixed("x=0", 1.0, 0.02, n_grid=[8], ratios=[1.0])]))
    IO.save_json(report, out / "verify.json")
    assert main(["--config", str(config), "--out", str(out), "--plotdata", "tail", "-q"]) == 0
    assert capsys.readouterr().out.strip().endswith("tail-x_0.csv")
    assert (out / "plots" / "tail-x_0.csv").is_file()
    assert main(["--config", str(config), "--out", str(out), "--plotdata", "joint_X", "-q"]) == 2
    assert main(["--config", str(config), "--out", str(tmp_path / "empty"), "--plotdata", "tail", "-q"]) == 4


# ---- acceptance ----
@pytest.mark.slow
def test_reflected_lazy_pipeline(fixtures_dir, tmp_path):
    config = IO.load_config(fixtures_dir / "reflected-lazy.json")
    manifest = run(config, tmp_path)
    assert manifest.tasks == [Task_Name.CONSTANTS, Task_Name.DP, Task_Name.SIMULATE, Task_Name.VERIFY]
    report = IO.load_json(tmp_path / "verify.json", VerificationReport)
    assert manifest.verdict is report.verdict
    for name in ("tail", "harmonicity", "return_times", "identities", "last_zero_mixture", "tightness"):
        assert report.get(name).verdict is Verdict.PASS, name
    assert report.provenance.convention == "on_negative/0"
    assert (tmp_path / "survival-x5.csv").is_file()
    assert (tmp_path / "plots" / "tail-x_0.csv").is_file()
    assert (tmp_path / "charts" / "tail.svg").is_file()


@pytest.mark.slow
def test_full_runs_are_byte_identical(fixtures_dir, tmp_path):
    config = IO.load_config(fixtures_dir / "reflected-lazy.json")
    first = run(config, tmp_path / "one")
    second = run(config.replace(threads=2), tmp_path / "two")
    assert first.checksums() == second.checksums()
