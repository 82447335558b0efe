from __future__ import annotations

import csv
import json
import shutil
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from disk.export import Chart, Exporter, charts_for, emit_plotdata, render_charts
from disk.storage import IO, build_model, dict_to_config, read_pmf, write_pmf
from disk.tables import path_csv, ratio_csv, renewal_csv, survival_csv, write_csv
from models.base import Verdict
from models.errors import ConfigInvalid, InvalidPMF, UnknownCurve
from models.lattice import Walk_Kind
from models.params import SCHEMA_VERSION, Task_Name
from models.streams import RandomStream
from oracle.convention import BoundaryConvention
from oracle.ladder import renewal_table
from oracle.survival import survival_dp
from verify.ratios import FitTest, RatioCheck, RatioRow, TightnessReport
from verify.report import Provenance, VerificationReport
from walks.simulate import simulate_path

LAZY_MODEL = {"kind": "Y", "xi": {"-1": 0.25, "0": 0.5, "1": 0.25}, "restart": {"1": 1.0}}


def read_rows(path: Path) -> list[list[str]]:
    with path.open(encoding="utf-8", newline="") as handle:
        return list(csv.reader(handle))


def write_config(directory: Path, payload: dict) -> Path:
    path = directory / "config.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


@pytest.fixture
def report() -> VerificationReport:
    report = VerificationReport(
        provenance=Provenance(
            config_hash="0" * 64, version="dev", convention="on_negative/0", kind="X", n=512, paths=10_000, chunk_size=1
        )
    )
    report.add(
        RatioCheck(
            name="tail",
            claim="",
            rows=[
                RatioRow.extrapolate("x=0", [256, 512, 1024], [1.03, 1.02, 1.014], 0.02),
                RatioRow.fixed("x spread", 1.01, 0.03),
            ],
        )
    )
    report.add(
        FitTest(
            name="marginal_X",
            claim="",
            statistic_name="ks",
            statistic=0.01,
            sample_size=10_000,
            threshold=0.02,
            curves={
                "u": [-1.0, 0.0, 1.0],
                "empirical_density": [0.2, 0.4, 0.2],
                "reference_density": [0.24, 0.4, 0.24],
            },
            verdict=Verdict.PASS,
        )
    )
    report.add(
        TightnessReport(
            n_grid=[64, 128],
            delta_grid=[0.0, 0.1],
            mean_visits_scaled=[1.1, 1.0],
            max_restart_scaled=[0.125, 0.09],
            modulus={"q0.5": [[0.0, 0.4], [0.0, 0.45]], "q0.9": [[0.0, 0.8], [0.0, 0.85]]},
            verdict=Verdict.PASS,
        )
    )
    return report


# ---- configs ----
def test_load_inline_config(fixtures_dir):
    config = IO.load_config(fixtures_dir / "reflected-lazy.json")
    assert config.model.kind is Walk_Kind.Y
    assert config.model.xi == {-1: 0.25, 0: 0.5, 1: 0.25}
    assert config.seed == 42
    assert config.grids.n_grid == [256, 512, 1024]
    assert config.expanded_tasks() == [Task_Name.CONSTANTS, Task_Name.DP, Task_Name.SIMULATE, Task_Name.VERIFY]
    model = build_model(config.model)
    assert model.kind is Walk_Kind.Y
    assert model.restart.pmf.as_dict() == {1: 1.0}


def test_pmf_paths_resolve_against_the_config_directory(fixtures_dir):
    config = IO.load_config(fixtures_dir / "perturbed-lazy.json")
    assert config.model.xi == fixtures_dir / "lazy.pmf"
    model = build_model(config.model)
    assert model.kind is Walk_Kind.X
    assert model.xi_prime.pmf.as_dict() == pytest.approx({-1: 0.25, 0: 0.5, 1: 0.25})
    assert config.expanded_tasks() == [Task_Name.CONSTANTS]


def test_legacy_configs_are_migrated(fixtures_dir):
    config = IO.load_config(fixtures_dir / "legacy-v0.json")
    assert config.version == SCHEMA_VERSION
    assert config.model.restart == {1: 1.0}
    assert config.seed is None


def test_config_round_trip(fixtures_dir, tmp_path):
    config = IO.load_config(fixtures_dir / "perturbed-lazy.json")
    saved = IO.save_config(config, tmp_path / "nested" / "saved.json")
    assert IO.load_config(saved).model_dump() == config.model_dump()


def test_config_hash_ignores_threads_and_output(fixtures_dir):
    config = IO.load_config(fixtures_dir / "reflected-lazy.json")
    moved = config.replace(threads=4, out_dir=Path("elsewhere"))
    assert moved.config_hash() == config.config_hash()
    assert config.replace(seed=43).config_hash() != config.config_hash()
    assert len(config.config_hash()) == 64


def test_config_hash_follows_pmf_content_not_location(fixtures_dir, tmp_path):
    copies = []
    for name in ("one", "two"):
        directory = tmp_path / name
        directory.mkdir()
        for fixture in ("perturbed-lazy.json", "lazy.pmf"):
            shutil.copy(fixtures_dir / fixture, directory / fixture)
        copies.append(directory)
    first, second = (IO.load_config(directory / "perturbed-lazy.json") for directory in copies)
    assert first.config_hash() == second.config_hash()

    inline = first.replace(model=first.model.replace(xi={-1: 0.25, 0: 0.5, 1: 0.25}))
    assert inline.config_hash() == first.config_hash()

    (copies[1] / "lazy.pmf").write_text("-1\t3/10\n0\t2/5\n1\t3/10\n", encoding="utf-8")
    assert second.config_hash() != first.config_hash()


def test_tasks_run_in_dependency_order():
    config = dict_to_config({"version": 1, "model": LAZY_MODEL, "tasks": ["verify", "constants"], "seed": 1})
    assert config.expanded_tasks() == [Task_Name.CONSTANTS, Task_Name.VERIFY]


@pytest.mark.parametrize(
    "changes",
    [
        {"tasks": ["simulate"], "seed": None},
        {"model": {**LAZY_MODEL, "kind": "X"}},
        {"model": {**LAZY_MODEL, "xi_prime": LAZY_MODEL["xi"]}},
        {"model": {**LAZY_MODEL, "xi": "missing.pmf"}},
        {"convention": "fixed:on_zero"},
        {"threads": 0},
        {"tasks": []},
        {"colour": "blue"},
        {"grids": {"s": 0.8, "t_joint": 0.5}},
        {"grids": {"n_grid": [1, 8]}},
    ],
)
def test_invalid_configs(changes, tmp_path):
    payload = {"version": 1, "model": LAZY_MODEL, "tasks": ["constants"], "seed": 3, **changes}
    with pytest.raises(ConfigInvalid):
        IO.load_config(write_config(tmp_path, payload))


def test_unreadable_configs(tmp_path):
    with pytest.raises(ConfigInvalid):
        IO.load_config(tmp_path / "absent.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigInvalid):
        IO.load_config(broken)
    listed = tmp_path / "list.json"
    listed.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ConfigInvalid):
        IO.load_config(listed)


def test_pmf_files(fixtures_dir, tmp_path):
    pmf = read_pmf(fixtures_dir / "asymmetric.pmf")
    assert pmf.as_dict() == pytest.approx({-2: 1 / 3, 1: 2 / 3})
    copy = read_pmf(write_pmf(pmf, tmp_path / "copy.pmf", exact=True))
    assert copy.to_exact() == pmf.to_exact()
    with pytest.raises(InvalidPMF):
        read_pmf(tmp_path / "absent.pmf")


# ---- tables ----
def test_write_csv_formats_cells(tmp_path):
    path = write_csv(tmp_path / "deep" / "t.csv", ("a", "b", "c"), [(np.int64(3), np.float64(0.1), "x")])
    assert read_rows(path) == [["a", "b", "c"], ["3", "0.1", "x"]]


def test_oracle_tables(lazy, tmp_path):
    table = survival_dp(lazy, 0, 4, BoundaryConvention.harmonic())
    rows = read_rows(survival_csv(table, tmp_path / "survival.csv"))
    assert rows[0] == ["n", "survive", "first_passage"]
    assert len(rows) == 6
    assert float(rows[1][1]) == 1.0
    h = renewal_table(lazy, 5, horizon=4000)
    rows = read_rows(renewal_csv(h, tmp_path / "renewal.csv"))
    assert rows[0] == ["x", "h", "err"]
    assert [row[0] for row in rows[1:]] == [str(x) for x in range(h.x_max + 1)]


def test_ratio_and_path_tables(report, reflected_lazy, tmp_path):
    rows = read_rows(ratio_csv(report.get("tail"), tmp_path / "ratio.csv"))
    assert rows[0] == ["row", "n", "ratio", "extrapolated_limit", "tolerance", "verdict"]
    assert [row[0] for row in rows[1:]] == ["x=0"] * 3
    path = simulate_path(reflected_lazy, 10, RandomStream(0))
    rows = read_rows(path_csv(path, tmp_path / "path.csv"))
    assert rows[0] == ["step", "value"]
    assert rows[1] == ["0", "0"]
    assert len(rows) == 12


# ---- plot data ----
def test_plotdata_for_one_ratio_check(report, tmp_path):
    written = emit_plotdata(report, "tail", tmp_path)
    assert [path.name for path in written] == ["tail-x_0.csv"]
    rows = read_rows(written[0])
    assert rows[0] == ["n", "ratio"]
    assert len(rows) == 4


def test_plotdata_for_a_fit(report, tmp_path):
    (path,) = emit_plotdata(report, "marginal_X", tmp_path)
    rows = read_rows(path)
    assert rows[0] == ["u", "empirical_density", "reference_density"]
    assert rows[2] == ["0.0", "0.4", "0.4"]


def test_plotdata_for_everything(report, tmp_path):
    names = sorted(path.name for path in emit_plotdata(report, "all", tmp_path))
    assert names == [
        "marginal_X.csv",
        "tail-x_0.csv",
        "tightness-modulus-q0_5.csv",
        "tightness-modulus-q0_9.csv",
        "tightness-scaling.csv",
    ]
    rows = read_rows(tmp_path / "tightness-modulus-q0_9.csv")
    assert rows[0] == ["delta", "n=64", "n=128"]


def test_unknown_curve(report, tmp_path):
    with pytest.raises(UnknownCurve):
        emit_plotdata(report, "joint_X", tmp_path)


# ---- charts ----
def test_charts_per_check(report):
    assert [chart.title for check in report.checks for chart in charts_for(check)] == [
        "tail",
        "marginal_X",
        "tightness",
    ]
    bare = FitTest(
        name="joint_X",
        claim="",
        statistic_name="chi2",
        statistic=1.0,
        sample_size=1,
        threshold=1e-3,
        verdict=Verdict.PASS,
    )
    assert charts_for(bare) == []


def test_render_svg_charts(report, tmp_path):
    written = render_charts(report, tmp_path)
    assert sorted(path.name for path in written) == ["marginal_x.svg", "tail.svg", "tightness.svg"]
    text = (tmp_path / "tail.svg").read_text(encoding="utf-8")
    assert text.startswith("<svg")
    assert "<polyline" in text
    assert "stroke-dasharray" in text


def test_png_export(tmp_path):
    chart = Chart(title="demo", x_label="n", series={"a": ([1.0, 2.0, 3.0], [0.9, 1.1, 1.0])}, reference=1.0)
    path = Exporter.output(chart, tmp_path / "demo.png")
    with Image.open(path) as image:
        assert image.size == (640, 400)
    with pytest.raises(ValueError):
        Exporter.output(chart, tmp_path / "demo.gif")


def test_flat_charts_have_usable_bounds():
    chart = Chart(title="flat", x_label="n", series={"a": ([5.0], [1.0])})
    x0, x1, y0, y1 = chart.bounds()
    assert x1 > x0
    assert y1 > y0
    assert Chart(title="empty", x_label="n").bounds() == (0.0, 1.0, 0.0, 1.0)
