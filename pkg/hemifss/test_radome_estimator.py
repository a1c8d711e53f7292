import numpy as np
import pytest

from hemifss.errors import DomainError, GeometryError
from hemifss.feed_model import FeedSpec
from hemifss.radome_estimator import (ESTIMATE_COLUMNS, PlanarModel, ProbeConfig, ShellModel,
                                      boresight_transmission, planar_scanned_field, scanned_field)
from hemifss.tmm_circuit import stack_response


@pytest.fixture(scope="module")
def shell(lossless_stack):
    return ShellModel(stack=lossless_stack)


def test_shell_geometry(shell):
    assert shell.thickness_mm == pytest.approx(4.5)
    assert shell.outer_radius_mm == pytest.approx(76.0)
    assert shell.contains((0.0, 0.0, -10.0))
    assert not shell.contains((0.0, 0.0, -30.0))
    assert not shell.contains((0.0, 0.0, 100.0))


def test_shell_intersections(shell):
    point, normal, surface = shell.intersect((0.0, 0.0, 0.0), (0.0, 0.6, 0.8))
    assert surface == "sphere"
    assert np.allclose(point, [0, 0.6 * 73.75, 0.8 * 73.75])
    assert np.allclose(normal, [0, 0.6, 0.8])

    point, normal, surface = shell.intersect((0.0, 0.0, 0.0), (0.0, -np.sin(1.8), np.cos(1.8)))
    assert surface == "cylinder"
    assert np.hypot(point[0], point[1]) == pytest.approx(73.75)
    assert np.allclose(normal, [0, -1, 0])

    assert shell.intersect((0.0, 0.0, 0.0), (0.0, 0.0, -1.0)) is None


def test_centre_fed_boresight_is_the_unit_cell(shell, lossless_stack):
    freqs = np.array([7.5e9, 10e9, 12.5e9, 20e9])
    table = boresight_transmission(shell, FeedSpec(), freqs)

    assert list(table.columns) == ESTIMATE_COLUMNS
    assert np.allclose(table["norm_db"], stack_response(lossless_stack, freqs).s21_db(), rtol=0, atol=1e-9)
    contrast = table["norm_db"].iloc[1] - table["norm_db"].iloc[3]
    assert contrast == pytest.approx(15.33, abs=0.05)


def test_boresight_norm_does_not_depend_on_probe_distance(shell):
    near = boresight_transmission(shell, FeedSpec(), [10e9], ProbeConfig(r_probe_mm=10.0))
    far = boresight_transmission(shell, FeedSpec(), [10e9], ProbeConfig(r_probe_mm=200.0))

    assert near["e_abs_without"].iloc[0] > far["e_abs_without"].iloc[0]
    assert near["norm_db"].iloc[0] == pytest.approx(far["norm_db"].iloc[0])


def test_feed_outside_shell(shell):
    with pytest.raises(GeometryError):
        boresight_transmission(shell, FeedSpec(), [10e9], feed_position=(0.0, 0.0, 100.0))
    with pytest.raises(GeometryError):
        scanned_field(shell, FeedSpec(), ProbeConfig(), 10e9, feed_position=(0.0, 0.0, -40.0))


def test_probe_validation():
    with pytest.raises(DomainError):
        ProbeConfig(theta_probe=[0.0, 4.0])
    with pytest.raises(DomainError):
        ProbeConfig(theta_feed=2.0)


def test_centre_fed_scan_is_normal_everywhere(shell, lossless_stack):
    probes = ProbeConfig(theta_probe=list(np.radians([0.0, 30.0, 60.0, 90.0, 120.0])))
    table = scanned_field(shell, FeedSpec(), probes, 10e9)
    normal_db = stack_response(lossless_stack, [10e9]).s21_db()[0]

    assert list(table["surface"]) == ["sphere"] * 4 + ["none"]
    assert np.allclose(table["incidence_deg"].iloc[:4], 0.0)
    assert np.allclose(table["norm_db"].iloc[:3], normal_db, rtol=0, atol=1e-9)
    assert list(table["edge_flag"]) == [False, False, False, True, True]
    assert list(table["direct_path"]) == [False, False, False, False, True]


def test_scan_reports_direct_rays(shell, caplog):
    scanned_field(shell, FeedSpec(), ProbeConfig(theta_probe=[np.radians(150.0)]), 10e9)

    assert "without crossing the filter" in caplog.text


def test_offset_feed_sees_oblique_incidence(shell):
    probes = ProbeConfig(theta_probe=list(np.radians([0.0, 40.0])))
    table = scanned_field(shell, FeedSpec(), probes, 10e9, feed_position=(0.0, 0.0, -10.0))

    assert table["incidence_deg"].iloc[0] == pytest.approx(0.0)
    assert table["incidence_deg"].iloc[1] > 1.0
    assert (table["surface"] == "sphere").all()


def test_rotated_feed_columns(shell):
    probes = ProbeConfig(theta_probe=[0.0, np.radians(30.0)], theta_feed=np.radians(30.0))
    table = scanned_field(shell, FeedSpec(), probes, 10e9)

    assert np.allclose(table["theta_feed_deg"], 30.0)
    assert table["e_abs_without"].iloc[1] > table["e_abs_without"].iloc[0]


def test_planar_panel_misses_wide_probes(lossless_stack):
    planar = PlanarModel(stack=lossless_stack)
    probes = ProbeConfig(theta_probe=list(np.radians([0.0, 30.0, 60.0, 75.0, 90.0])))
    table = planar_scanned_field(planar, FeedSpec(), probes, 10e9)

    assert planar.flat_width_mm / 2 == pytest.approx(77.94, abs=0.01)
    assert list(table["direct_path"]) == [False, False, True, True, True]
    assert table["incidence_deg"].iloc[1] == pytest.approx(30.0)
    assert list(table["surface"].iloc[:2]) == ["panel", "panel"]
