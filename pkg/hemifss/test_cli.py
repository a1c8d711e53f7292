import json

import numpy as np
import pandas
import pytest

from hemifss.cli import main
from hemifss.feed_model import cos_q_horn


@pytest.fixture
def project(tmp_path):
    """Write a config JSON into a fresh directory and return the argv prefix that points at it."""
    def configure(document=None):
        path = tmp_path / "project.json"
        path.write_text(json.dumps(document or {}))
        return ["--config", str(path), "--out", str(tmp_path / "out")]
    return configure


def table(path):
    return pandas.read_csv(path, comment="#")


def run_record(tmp_path, command):
    return json.loads((tmp_path / "out" / "{}_run.json".format(command)).read_text())


def test_synth(tmp_path, project):
    assert main(["synth"] + project({"stack": {"tan_delta": 0.0}})) == 0

    path = tmp_path / "out" / "synth_sweep.csv"
    assert path.read_text().startswith("# hemifss synth schema=1")
    record = run_record(tmp_path, "synth")
    assert record["results"]["feasible"]
    assert record["results"]["c_farads"] == pytest.approx(82e-15, rel=1e-9)
    assert record["results"]["l_henries"] == pytest.approx(1.25e-9, rel=1e-9)
    assert record["results"]["outputs"] == ["synth_sweep.csv"]
    assert record["config"]["stack"]["tan_delta"] == 0.0


def test_synth_infeasible(project):
    document = {"stack": {"tan_delta": 0.0},
                "synth": {"max_stopband_db": -80.0, "c_sweep_farads": [40e-15, 60e-15, 10e-15],
                          "l_sweep_henries": [1e-9, 2e-9, 1e-9]}}

    assert main(["synth"] + project(document)) == 2


def test_usage_and_format_errors(tmp_path, project):
    assert main(["polish"]) == 64
    assert main(["synth", "--config", str(tmp_path / "missing.json")]) == 64
    assert main(["artwork", "--format", "gerber"] + project()) == 64
    assert main(["feedfit"] + project()) == 64

    broken = tmp_path / "broken.json"
    broken.write_text("{stack")
    assert main(["synth", "--config", str(broken)]) == 65
    assert main(["synth"] + project({"stack": {"colour": "red"}})) == 65


def test_response(tmp_path, project):
    argv = ["response", "--freq-step", "1e8", "--theta", "30", "--pol", "TE"] + project({"stack": {"tan_delta": 0.0}})

    assert main(argv) == 0
    response = table(tmp_path / "out" / "response.csv")
    oblique = table(tmp_path / "out" / "response_oblique.csv")
    assert len(response) == 291
    assert {"s11_db", "s21_db"} <= set(response.columns)
    assert list(oblique.columns) == ["freq_hz", "theta_deg", "pol", "re_s21", "im_s21", "s21_db"]
    assert len(oblique) == 291 and set(oblique["pol"]) == {"TE"}
    record = run_record(tmp_path, "response")
    assert record["results"]["f_lo_hz"] == pytest.approx(5.67e9, rel=0.02)
    assert record["results"]["f_hi_hz"] == pytest.approx(13.78e9, rel=0.02)


def test_tessellate(tmp_path, project):
    assert main(["tessellate"] + project({"tessellation": {"m": 2}})) == 0

    out = tmp_path / "out"
    for radius in ("72.50", "73.75", "75.00"):
        document = json.loads((out / "tessellation_r{}mm.json".format(radius)).read_text())
        assert document["counts"]["pentagons"] == 6
    layers = run_record(tmp_path, "tessellate")["results"]["layers"]
    assert [layer["radius_mm"] for layer in layers] == [72.5, 73.75, 75.0]
    assert table(out / "tessellation_p2_histogram.csv")["count"].sum() == sum(layer["hexagons"] for layer in layers)


def test_artwork(tmp_path, project):
    argv = ["artwork", "--format", "json", "--format", "svg", "--format", "mesh"] + project({"tessellation": {"m": 4}})

    assert main(argv) == 0
    out = tmp_path / "out"
    outputs = run_record(tmp_path, "artwork")["results"]["outputs"]
    assert outputs == sorted(["drc.csv", "artwork.json", "artwork.stl", "artwork_inner_cap.svg",
                              "artwork_mid_ind.svg", "artwork_outer_cap.svg"])
    assert "layer_id" in table(out / "drc.csv").columns
    assert json.loads((out / "artwork.json").read_text())["schema"] == "hemifss.artwork/1"


def test_feedfit(tmp_path, project):
    horn = tmp_path / "horn.csv"
    pandas.DataFrame({"freq_hz": [8e9, 10e9, 12e9], "gain_dbi": cos_q_horn(3.0, [8e9, 10e9, 12e9]).gain_dbi,
                      "beamwidth_deg": [60.0, 55.0, 50.0]}).to_csv(horn, index=False)

    assert main(["feedfit", str(horn)] + project()) == 0
    fit = table(tmp_path / "out" / "feed_q.csv")
    assert np.allclose(fit["q_dir"], 3.0)
    assert run_record(tmp_path, "feedfit")["inputs"]["horn_csv"] == str(horn)


@pytest.mark.parametrize("flag", ["--literal-a9", "--literal-beamwidth"])
def test_feedfit_literal_beamwidth(tmp_path, project, flag):
    horn = tmp_path / "horn.csv"
    pandas.DataFrame({"freq_hz": [8e9, 10e9], "gain_dbi": [12.0, 13.0],
                      "beamwidth_deg": [60.0, 45.0]}).to_csv(horn, index=False)

    assert main(["feedfit", str(horn), flag] + project()) == 0
    fit = table(tmp_path / "out" / "feed_q.csv")
    assert np.allclose(fit["q_bw"], -0.15 / np.log(np.cos(np.radians([60.0, 45.0]))))
    assert run_record(tmp_path, "feedfit")["config"]["feed"]["literal_beamwidth"] is True


def test_gaussproc_with_calibration(tmp_path, project):
    rows = [(f, t, p) for f in (9e9, 10e9) for t in range(0, 61, 15) for p in range(0, 360, 90)]
    grid = pandas.DataFrame(rows, columns=["freq_hz", "theta_deg", "phi_deg"])
    sample, calibration = tmp_path / "sample.csv", tmp_path / "calibration.csv"
    grid.assign(re_s21=0.5, im_s21=0.0).to_csv(sample, index=False)
    grid.assign(re_s21=1.0, im_s21=0.0).to_csv(calibration, index=False)

    argv = ["gaussproc", str(sample), "--calibration", str(calibration), "--w0-mm", "40"] + project()
    assert main(argv) == 0
    result = table(tmp_path / "out" / "sample_gaussian.csv")
    assert np.allclose(result["norm_db"], 20 * np.log10(0.5))
    assert not result["flagged"].any()


def test_timegate(tmp_path, project):
    freqs = np.linspace(1e9, 19e9, 361)
    s21 = np.exp(-2j * np.pi * freqs * 0.1e-9) + 0.3 * np.exp(-2j * np.pi * freqs * 2e-9)
    trace = tmp_path / "trace.csv"
    pandas.DataFrame({"freq_hz": freqs, "re_s21": s21.real, "im_s21": s21.imag}).to_csv(trace, index=False)

    assert main(["timegate", str(trace), "--gate-ns", "0.5"] + project()) == 0
    gated = table(tmp_path / "out" / "trace_gated.csv")
    band = (gated["freq_hz"] >= 8e9) & (gated["freq_hz"] <= 12e9)
    assert np.all(np.abs(gated["s21_db"][band]) < 0.1)
    assert np.abs(gated["s21_db_ungated"][band]).max() > 1.0


def test_estimate(tmp_path, project):
    argv = ["estimate", "--freq-step", "1e9"] + project({"stack": {"tan_delta": 0.0}, "estimator": {"planar": True}})

    assert main(argv) == 0
    out = tmp_path / "out"
    boresight = table(out / "estimate_boresight.csv")
    scan = table(out / "estimate_scan.csv")
    assert len(boresight) == 30
    assert list(boresight.columns) == ["freq_hz", "e_abs_with", "e_abs_without", "norm_db"]
    assert len(scan) == 2 * 7
    assert table(out / "estimate_planar.csv")["direct_path"].sum() > 0
