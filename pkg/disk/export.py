"""Plot data and chart export for verification reports."""

from __future__ import annotations

import math
import re
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path

from PIL import Image, ImageDraw, ImageFont

from disk.tables import write_csv
from models.errors import UnknownCurve
from models.params import Formats
from verify.ratios import FitTest, RatioCheck, TightnessReport
from verify.report import Check, VerificationReport


class RASTERISERS(StrEnum):
    """Supported rasterisation backends."""

    pil = "pil"
    cairosvg = "cairosvg"


try:
    import cairosvg

    RASTER_BACKEND = RASTERISERS.cairosvg
except Exception:
    cairosvg = None
    RASTER_BACKEND = RASTERISERS.pil


PALETTE: tuple[str, ...] = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
WIDTH, HEIGHT, MARGIN = 640, 400, 48


def _slug(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", text.lower()).strip("_")


# ---- plot data ----
def _ratio_curves(check: RatioCheck, out_dir: Path) -> list[Path]:
    written = []
    for row in check.rows:
        if not row.raw_ratios:
            continue
        target = out_dir / f"{check.name}-{_slug(row.label)}.csv"
        written.append(write_csv(target, ("n", "ratio"), zip(row.n_grid, row.raw_ratios)))
    return written


def _fit_curves(check: FitTest, out_dir: Path) -> list[Path]:
    if not check.curves:
        return []
    header = list(check.curves)
    return [write_csv(out_dir / f"{check.name}.csv", header, zip(*check.curves.values()))]


def _tightness_curves(check: TightnessReport, out_dir: Path) -> list[Path]:
    written = [
        write_csv(
            out_dir / f"{check.name}-scaling.csv",
            ("n", "mean_visits_scaled", "max_restart_scaled"),
            zip(check.n_grid, check.mean_visits_scaled, check.max_restart_scaled),
        )
    ]
    for label, rows in check.modulus.items():
        header = ["delta", *(f"n={n}" for n in check.n_grid)]
        columns = zip(check.delta_grid, *rows)
        written.append(write_csv(out_dir / f"{check.name}-modulus-{_slug(label)}.csv", header, columns))
    return written


def curve_writer(check: Check) -> Callable[[Path], list[Path]]:
    if isinstance(check, RatioCheck):
        return lambda out_dir: _ratio_curves(check, out_dir)
    if isinstance(check, FitTest):
        return lambda out_dir: _fit_curves(check, out_dir)
    return lambda out_dir: _tightness_curves(check, out_dir)


def emit_plotdata(report: VerificationReport, which: str, out_dir: Path) -> list[Path]:
    """Write the plot-data CSVs of one check, or of every check when ``which`` is ``all``.

    Raises;
        UnknownCurve: If no check is called ``which``.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    if which == "all":
        return [path for check in report.checks for path in curve_writer(check)(out_dir)]
    try:
        check = report.get(which)
    except KeyError:
        raise UnknownCurve(f"No curve {which!r}; known: {', '.join(report.names())}") from None
    return curve_writer(check)(out_dir)


# ---- charts ----
@dataclass(slots=True)
class Chart:
    """Line series sharing one pair of axes."""

    title: str
    x_label: str
    series: dict[str, tuple[list[float], list[float]]] = field(default_factory=dict)
    reference: float | None = None  # horizontal guide line

    def bounds(self) -> tuple[float, float, float, float]:
        xs = [x for pts, _ in self.series.values() for x in pts if math.isfinite(x)]
        ys = [y for _, pts in self.series.values() for y in pts if math.isfinite(y)]
        if self.reference is not None:
            ys.append(self.reference)
        if not xs or not ys:
            return 0.0, 1.0, 0.0, 1.0
        x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
        pad = 0.05 * (y1 - y0 or 1.0)
        return x0, x1 if x1 > x0 else x0 + 1.0, y0 - pad, y1 + pad

    def project(self, x: float, y: float) -> tuple[float, float]:
        x0, x1, y0, y1 = self.bounds()
        px = MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2 * MARGIN)
        py = HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2 * MARGIN)
        return px, py


def _escape(string: str) -> str:
    return string.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


def charts_for(check: Check) -> list[Chart]:
    """Charts worth drawing for a check: ratios against n, densities against u."""
    if isinstance(check, RatioCheck):
        chart = Chart(title=check.name, x_label="n", reference=check.target)
        for row in check.rows:
            if row.raw_ratios:
                chart.series[row.label] = (row.n_grid, row.raw_ratios)
        return [chart] if chart.series else []
    if isinstance(check, FitTest) and "u" in check.curves:
        u = check.curves["u"]
        chart = Chart(title=check.name, x_label="u")
        chart.series["empirical"] = (u, check.curves["empirical_density"])
        chart.series["reference"] = (u, check.curves["reference_density"])
        return [chart]
    if isinstance(check, TightnessReport):
        chart = Chart(title=check.name, x_label="n")
        ns = [float(n) for n in check.n_grid]
        chart.series["E[N_n]/sqrt(n)"] = (ns, check.mean_visits_scaled)
        chart.series["max restart/sqrt(n)"] = (ns, check.max_restart_scaled)
        return [chart]
    return []


class Exporter:
    """Export charts to supported formats."""

    supported: dict[Formats, Callable[[Chart, Path], Path]] = {}

    @classmethod
    def output(cls, chart: Chart, path: Path) -> Path:
        """Route export to the handler matching the file suffix.

        Raises;
            ValueError: If the suffix is unsupported.
        """
        try:
            fmt = Formats(path.suffix[1:].lower())
        except ValueError:
            raise ValueError(f"Unsupported output type: {path.suffix}") from None
        return cls.supported[fmt](chart, path)

    @classmethod
    def match_supported(cls) -> dict[Formats, Callable[[Chart, Path], Path]]:
        sups: dict[Formats, Callable[[Chart, Path], Path]] = {}
        for fmt in Formats:
            handler = getattr(cls, fmt.name, None)
            if not callable(handler):
                raise NotImplementedError(f"Exporter missing handler for '{fmt.name}'")
            sups[fmt] = handler
        cls.supported = sups
        return sups

    @staticmethod
    def _svg_string(chart: Chart) -> str:
        parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}">',
            f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
            f'<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH - 2 * MARGIN}" height="{HEIGHT - 2 * MARGIN}" '
            'fill="none" stroke="#888888" stroke-width="1"/>',
            f'<text x="{WIDTH / 2}" y="{MARGIN / 2}" text-anchor="middle" font-size="14">'
            f"{_escape(chart.title)}</text>",
            f'<text x="{WIDTH / 2}" y="{HEIGHT - 12}" text-anchor="middle" font-size="12">'
            f"{_escape(chart.x_label)}</text>",
        ]
        x0, x1, _, _ = chart.bounds()
        if chart.reference is not None:
            (ax, ay), (bx, by) = chart.project(x0, chart.reference), chart.project(x1, chart.reference)
            parts.append(
                f'<line x1="{ax:.2f}" y1="{ay:.2f}" x2="{bx:.2f}" y2="{by:.2f}" stroke="#444444" '
                'stroke-dasharray="6,3" stroke-width="1"/>'
            )
        for index, (label, (xs, ys)) in enumerate(chart.series.items()):
            colour = PALETTE[index % len(PALETTE)]
            points = " ".join(
                f"{px:.2f},{py:.2f}"
                for px, py in (chart.project(x, y) for x, y in zip(xs, ys) if math.isfinite(y))
            )
            parts.append(f'<polyline points="{points}" fill="none" stroke="{colour}" stroke-width="2"/>')
            parts.append(
                f'<text x="{WIDTH - MARGIN - 4}" y="{MARGIN + 16 * (index + 1)}" text-anchor="end" '
                f'font-size="11" fill="{colour}">{_escape(label)}</text>'
            )
        parts.append("</svg>")
        return "\n".join(parts)

    @staticmethod
    def _draw(chart: Chart) -> Image.Image:
        img = Image.new("RGBA", (WIDTH, HEIGHT), (255, 255, 255, 255))
        draw = ImageDraw.Draw(img)
        draw.rectangle([MARGIN, MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN], outline=(136, 136, 136, 255))
        font = ImageFont.load_default()
        title_width = draw.textlength(chart.title, font=font)
        label_width = draw.textlength(chart.x_label, font=font)
        draw.text(((WIDTH - title_width) / 2, MARGIN / 2 - 6), chart.title, fill=(0, 0, 0, 255), font=font)
        draw.text(((WIDTH - label_width) / 2, HEIGHT - 20), chart.x_label, fill=(0, 0, 0, 255), font=font)
        x0, x1, _, _ = chart.bounds()
        if chart.reference is not None:
            a, b = chart.project(x0, chart.reference), chart.project(x1, chart.reference)
            draw.line([a, b], fill=(68, 68, 68, 255), width=1)
        for index, (label, (xs, ys)) in enumerate(chart.series.items()):
            colour = PALETTE[index % len(PALETTE)]
            points = [chart.project(x, y) for x, y in zip(xs, ys) if math.isfinite(y)]
            if len(points) > 1:
                draw.line(points, fill=colour, width=2)
            left = WIDTH - MARGIN - 4 - draw.textlength(label, font=font)
            draw.text((left, MARGIN + 16 * index + 8), label, fill=colour, font=font)
        return img

    @staticmethod
    def svg(chart: Chart, path: Path) -> Path:
        path.write_text(Exporter._svg_string(chart), encoding="utf-8")
        return path

    @classmethod
    def png(cls, chart: Chart, path: Path) -> Path:
        if RASTER_BACKEND is RASTERISERS.cairosvg and cairosvg is not None:
            png = cairosvg.svg2png(
                bytestring=cls._svg_string(chart).encode("utf-8"), output_width=WIDTH, output_height=HEIGHT
            )
            if isinstance(png, bytes):
                path.write_bytes(png)
                return path
        cls._draw(chart).save(path, format=Formats.png.upper())
        return path


Exporter.match_supported()


def render_charts(
    report: VerificationReport, out_dir: Path, formats: tuple[Formats, ...] = (Formats.svg,)
) -> list[Path]:
    """Draw every chart of a report into ``out_dir``."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for check in report.checks:
        for chart in charts_for(check):
            for fmt in formats:
                written.append(Exporter.output(chart, out_dir / f"{_slug(chart.title)}.{fmt.value}"))
    return written
