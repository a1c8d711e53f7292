import numpy as np
import pandas
import pytest

from hemifss.errors import AlignmentError, DataFormatError, DomainError, InfeasibleFitError, SingularityError
from hemifss.feed_model import (FeedSpec, HornData, cos_q_horn, directivity, directivity_numeric, feed_frame,
                                fit_q, half_power_beamwidth, pattern, polarization, q_from_beamwidth,
                                q_from_directivity, raised_cosine_field, read_horn_csv)


@pytest.mark.parametrize("q", [0.0, 0.5, 1.0, 2.0, 3.7, 8.0])
def test_directivity_closed_form_matches_quadrature(q):
    assert directivity_numeric(q) == pytest.approx(directivity(q), rel=1e-9)


def test_q_from_directivity():
    assert q_from_directivity(directivity(2.5)) == pytest.approx(2.5)
    with pytest.raises(InfeasibleFitError):
        q_from_directivity(1.5)


def test_beamwidth_relation_is_three_db_rounded():
    """The beamwidth relation uses 3 dB where the exact half-power level is 3.0103 dB."""
    for q in (1.0, 2.0, 5.0):
        assert q_from_beamwidth(half_power_beamwidth(q)) == pytest.approx(q * 3 / (20 * np.log10(np.sqrt(2))), rel=1e-9)
    assert half_power_beamwidth(2.0) == pytest.approx(65.53, abs=0.01)
    assert 20 * np.log10(pattern(2.0, np.radians(half_power_beamwidth(2.0) / 2))) == pytest.approx(-3.0103, abs=1e-4)


def test_literal_beamwidth_relation():
    assert q_from_beamwidth(60.0, literal=True) == pytest.approx(-0.15 / np.log(0.5))
    with pytest.raises(DomainError):
        q_from_beamwidth(100.0, literal=True)
    with pytest.raises(DomainError):
        q_from_beamwidth(0.0)


def test_fit_recovers_synthetic_horn():
    table = fit_q(cos_q_horn(3.0, np.linspace(8e9, 12e9, 5)))

    assert np.allclose(table["q_dir"], 3.0)
    assert np.allclose(table["q_avg"], 2.9949, atol=1e-4)
    assert not table["flagged"].any()


def test_fit_flags_unusable_rows(caplog):
    horn = HornData(freq_hz=np.array([8e9, 9e9]), gain_dbi=np.array([1.0, 10.0]), beamwidth_deg=np.array([60.0, 60.0]))
    table = fit_q(horn)

    assert list(table["flagged"]) == [True, False]
    assert np.isnan(table["q_dir"][0])
    assert table["q_avg"][0] == table["q_bw"][0]
    assert "flagged" in caplog.text


def test_horn_validation():
    with pytest.raises(AlignmentError):
        HornData(freq_hz=np.array([1e9, 2e9]), gain_dbi=np.array([10.0]), beamwidth_deg=np.array([60.0, 60.0]))
    with pytest.raises(DomainError):
        HornData(beamwidth_deg=np.array([190.0]))


def test_read_horn_csv(tmp_path):
    path = tmp_path / "horn.csv"
    pandas.DataFrame({"freq_hz": [8e9, 10e9], "gain_dbi": [12.0, 14.0], "beamwidth_deg": [60.0, 50.0]}).to_csv(
        path, index=False)
    horn = read_horn_csv(path)

    assert list(horn.gain_dbi) == [12.0, 14.0]

    gap = tmp_path / "gap.csv"
    gap.write_text("freq_hz,gain_dbi,beamwidth_deg\n8e9,12,60\n10e9,,50\n")
    with pytest.raises(AlignmentError):
        read_horn_csv(gap)

    bad = tmp_path / "bad.csv"
    bad.write_text("freq_hz,gain\n8e9,12\n")
    with pytest.raises(DataFormatError):
        read_horn_csv(bad)


def test_feed_frame():
    for pointing in ([0, 0, 1], [1, 0, 0], [0, -np.sin(0.4), np.cos(0.4)], [0, 0, -1]):
        R = feed_frame(pointing)
        assert np.allclose(R @ R.T, np.eye(3))
        assert np.linalg.det(R) == pytest.approx(1.0)
        assert np.allclose(R @ [0, 0, 1], pointing)
    with pytest.raises(DomainError):
        FeedSpec(pointing=(0.0, 0.0, 2.0))


def test_boresight_polarization_is_x():
    p = polarization(np.zeros(4), np.radians([0, 45, 90, 200]))

    assert np.allclose(p, [[1, 0, 0]] * 4)


def test_raised_cosine_field():
    spec = FeedSpec(q=2.0, E0=3.0)
    f = 10e9
    field = raised_cosine_field(spec, f, (2.0, 0.0, 0.0))

    assert np.abs(field[0]) == pytest.approx(1.5)
    assert np.allclose(field[1:], 0)

    off = raised_cosine_field(spec, f, (2.0, np.radians(60), 0.3))
    assert np.linalg.norm(off) == pytest.approx(1.5 * 0.25)
    behind = raised_cosine_field(spec, f, (2.0, np.radians(120), 0.3))
    assert np.allclose(behind, 0)
    with pytest.raises(SingularityError):
        raised_cosine_field(spec, f, (0.0, 0.0, 0.0))


def test_rotated_feed_points_its_beam():
    spec = FeedSpec(pointing=(0.0, -np.sin(0.5), np.cos(0.5)))
    field = raised_cosine_field(spec, 10e9, (1.0, 0.0, 0.0))

    assert np.dot(np.abs(field), spec.pointing) == pytest.approx(0.0, abs=1e-12)
    assert np.linalg.norm(field) == pytest.approx(1.0)
