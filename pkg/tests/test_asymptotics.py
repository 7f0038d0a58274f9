import numpy as np
import pytest

from podstab.asymptotics import (
    BlockFixture,
    block_system_report,
    appendix_sweep,
    block_partition,
    log_slope,
    refine_grid,
    shipped_fixture,
    trend_decreasing,
)

GRID = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5]


def test_log_slope_exact():
    n = np.arange(10, 41, 5)
    assert log_slope(n, 3.0 * np.exp(-0.6 * n)) == pytest.approx(-0.6, rel=1e-12)


def test_trend_decreasing():
    assert trend_decreasing([1.0, 2.0, 0.5])
    assert not trend_decreasing([1.0, 1.0])
    assert trend_decreasing([1.0, 0.01], 0.05)
    assert not trend_decreasing([1.0, 0.1], 0.05)


def test_block_partition():
    p = np.arange(16.0).reshape(4, 4)
    p1, p2, p3 = block_partition(p, 1)
    np.testing.assert_array_equal(p1, p[:1, :1])
    np.testing.assert_array_equal(p2, p[1:, 1:])
    np.testing.assert_array_equal(p3, p[:1, 1:])


def test_refine_grid_geometric_midpoints():
    assert refine_grid([1e-1, 1e-3]) == pytest.approx([1e-1, 1e-2, 1e-3])


def test_fixture_round_trip_and_check():
    fx = shipped_fixture()
    assert BlockFixture.from_dict(fx.to_dict()).to_dict() == fx.to_dict()
    chk = fx.check()
    assert chk["kalman_rank_a1_b1"] == 1 and chk["margin_minus_a1"] > 0 and chk["margin_a2"] > 0
    with pytest.raises(ValueError):
        BlockFixture([[1.0]], [[-2.0]], [[1.0]], [[1.0, 0.0]], [[1.0]], [[1.0]])


def test_sweep_off_blocks_shrink():
    tr = appendix_sweep(shipped_fixture(), GRID, GRID)
    assert tr.p2_norm[-1] <= 0.05 * tr.p2_norm[0]
    assert tr.p3_norm[-1] <= 0.05 * tr.p3_norm[0]
    assert all(a < 0 for a in tr.abscissa)


def test_block_system_report_passes():
    report, trace = block_system_report(shipped_fixture(), GRID, GRID)
    for name in ("assumptions", "block_diagonal_exact_zero", "off_blocks_vanish", "gain_limit", "uniform_hurwitz"):
        assert report[name]["pass"], name
    assert trace.to_csv().splitlines()[0].startswith("eps,alpha,p1_norm")
