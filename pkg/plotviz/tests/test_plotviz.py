import json
import subprocess
import sys

import pytest

from plotviz import MalformedCsvError, MissingSeriesError, PlotSpec, load_rows, render
from plotviz.cli import main

HEADER = "experiment,scheme,n,t,kind,metric,value,se,seed"


def write_variance_csv(path, values):
    lines = [HEADER]
    for scheme in ("stratified", "ordered-stratified"):
        for t, v in enumerate(values, start=1):
            lines.append(f"pf-variance,{scheme},64,{t},aggregate,var_log_L,{v},0.01,1")
    for t, v in enumerate(values, start=1):
        lines.append(
            f"pf-variance,stratified/ordered-stratified,64,{t},aggregate,var_ratio,{1 + 0.1 * v},,1"
        )
    path.write_text("\n".join(lines) + "\n")
    return [1 + 0.1 * v for v in values]


def write_rate_csv(path):
    lines = [HEADER]
    for n, v in [(64, 1e-3), (128, 2.5e-4), (256, 6.25e-5), (512, 1.5e-5)]:
        lines.append(f"rate/phi=tanh,stratified,{n},,aggregate,var,{v},,7")
    lines.append("rate/phi=tanh,stratified,,,aggregate,slope,-2.0103,0.01,7")
    lines.append("rate/phi=tanh,stratified,,,aggregate,intercept,1.25,,7")
    path.write_text("\n".join(lines) + "\n")


class TestVarianceRatio:
    def test_plotted_values_equal_csv_exactly(self, tmp_path):
        csv_path = tmp_path / "results.csv"
        expected = write_variance_csv(csv_path, [0.31, 0.42, 0.55, 0.61])
        spec = PlotSpec(str(csv_path), "variance-ratio",
                        ("stratified/ordered-stratified",), str(tmp_path / "fig.png"))
        fig = render(spec)
        (line,) = [l for l in fig.axes[0].lines if l.get_label().startswith("strat")]
        assert list(line.get_xdata()) == [1, 2, 3, 4]
        assert list(line.get_ydata()) == expected
        assert (tmp_path / "fig.png").exists()
        assert fig.axes[0].get_ylabel() == "var_ratio"

    def test_missing_series(self, tmp_path):
        csv_path = tmp_path / "results.csv"
        write_variance_csv(csv_path, [0.3])
        spec = PlotSpec(str(csv_path), "variance-ratio", ("ssp/stratified",),
                        str(tmp_path / "fig.png"))
        with pytest.raises(MissingSeriesError):
            render(spec)

    def test_empty_series_rejected(self, tmp_path):
        with pytest.raises(MissingSeriesError):
            PlotSpec(str(tmp_path / "x.csv"), "variance-ratio", (), "out.png")

    def test_deterministic(self, tmp_path):
        csv_path = tmp_path / "results.csv"
        write_variance_csv(csv_path, [0.2, 0.4])
        spec = PlotSpec(str(csv_path), "variance-ratio",
                        ("stratified/ordered-stratified",), str(tmp_path / "a.png"))
        f1 = render(spec)
        f2 = render(spec)
        assert f1.get_size_inches().tolist() == f2.get_size_inches().tolist()
        assert list(f1.axes[0].lines[0].get_ydata()) == list(f2.axes[0].lines[0].get_ydata())


class TestRateLogLog:
    def test_slope_annotation_from_csv(self, tmp_path):
        csv_path = tmp_path / "results.csv"
        write_rate_csv(csv_path)
        spec = PlotSpec(str(csv_path), "rate-loglog", ("stratified@tanh",),
                        str(tmp_path / "fig.svg"))
        fig = render(spec)
        labels = [t.get_text() for t in fig.axes[0].get_legend().get_texts()]
        assert labels == ["stratified@tanh (slope -2.010)"]
        pts = fig.axes[0].collections[0].get_offsets()
        assert [int(x) for x, _ in pts] == [64, 128, 256, 512]
        assert (tmp_path / "fig.svg").exists()

    def test_bad_selector(self, tmp_path):
        csv_path = tmp_path / "results.csv"
        write_rate_csv(csv_path)
        spec = PlotSpec(str(csv_path), "rate-loglog", ("stratified",),
                        str(tmp_path / "fig.png"))
        with pytest.raises(MissingSeriesError):
            render(spec)


class TestCsvValidation:
    def test_malformed_header(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(MalformedCsvError):
            load_rows(str(bad))

    def test_malformed_value(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text(HEADER + "\npf-variance,s,64,1,aggregate,var_ratio,not-a-number,,1\n")
        with pytest.raises(MalformedCsvError):
            load_rows(str(bad))

    def test_missing_file(self, tmp_path):
        with pytest.raises(MalformedCsvError):
            load_rows(str(tmp_path / "nope.csv"))


class TestCli:
    def test_exit_codes(self, tmp_path):
        csv_path = tmp_path / "results.csv"
        write_variance_csv(csv_path, [0.5, 0.6])
        out = tmp_path / "fig.png"
        assert main(["--csv", str(csv_path), "--kind", "variance-ratio",
                     "--series", "stratified/ordered-stratified", "--out", str(out)]) == 0
        assert out.exists()
        assert main(["--csv", str(csv_path), "--kind", "variance-ratio",
                     "--series", "nope/nothere", "--out", str(out)]) == 2
        assert main(["--csv", str(tmp_path / "missing.csv"), "--kind", "variance-ratio",
                     "--series", "a/b", "--out", str(out)]) == 2


@pytest.mark.acceptance
class TestB1AgainstPrimaryCli:
    """Secondary acceptance: consume a real pf-variance CSV end to end."""

    CONFIG = {
        "kind": "pf-variance",
        "seed": 99,
        "schemes": ["ordered-stratified", "ssp", "stratified"],
        "model": {"d": 5, "horizon": 12, "alpha": 0.4},
        "proposal": "guided",
        "n_particles": 256,
        "runs": 30,
        "record_every": 2,
    }

    def test_b1(self, tmp_path):
        cfg = tmp_path / "config.json"
        cfg.write_text(json.dumps(self.CONFIG))
        out_dir = tmp_path / "bench"
        proc = subprocess.run(
            [sys.executable, "-m", "resamplab.bench", "pf-variance",
             "--config", str(cfg), "--out", str(out_dir)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        csv_path = out_dir / "results.csv"

        img = tmp_path / "ratio.png"
        proc = subprocess.run(
            [sys.executable, "-m", "plotviz.cli", "--csv", str(csv_path),
             "--kind", "variance-ratio",
             "--series", "stratified/ordered-stratified,stratified/ssp",
             "--out", str(img)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert img.exists()

        # plotted values must equal the CSV ratio column exactly
        rows = load_rows(str(csv_path))
        spec = PlotSpec(str(csv_path), "variance-ratio",
                        ("stratified/ordered-stratified",), str(tmp_path / "check.png"))
        fig = render(spec)
        csv_vals = sorted(
            (r["t"], r["value"]) for r in rows
            if r["metric"] == "var_ratio" and r["scheme"] == "stratified/ordered-stratified"
        )
        line = fig.axes[0].lines[0]
        plotted = list(zip(line.get_xdata(), line.get_ydata()))
        assert plotted == csv_vals
        print("\nB1 PASS: plotviz variance-ratio figure matches the CSV ratio column "
              f"exactly ({len(plotted)} points); CLI exit 0")
