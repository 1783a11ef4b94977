import numpy as np
import pytest

from occlp import system
from occlp.oracle import (OracleError, frozen_value, level_set_ordering,
                          rotation_level_value)


@pytest.fixture(scope="module")
def rotation():
    return system.make_rotation()


def test_level_value_first_coordinate(rotation):
    result = rotation_level_value(rotation, 1.0)
    assert result.value == pytest.approx(-1.0, abs=1e-12)  # min of the cosine
    assert result.attained_by.startswith("stationary")
    # the circulating family averages the cosine out
    assert result.circulating_value == pytest.approx(0.0, abs=1e-12)


def test_level_value_constant_cost():
    spec = system.make_rotation(cost_id="3")
    result = rotation_level_value(spec, 0.81)
    assert result.value == 3.0


def test_level_value_favouring_motion():
    # cost 1 - u^2 rewards full-speed circulation; parking pays 1
    spec = system.make_rotation(cost_id="1 - u1^2")
    result = rotation_level_value(spec, 1.0)
    assert result.value == pytest.approx(0.0, abs=1e-12)
    assert result.attained_by.startswith("circulating")
    assert result.stationary_value == pytest.approx(1.0)


def test_level_outside_range_rejected(rotation):
    with pytest.raises(OracleError):
        rotation_level_value(rotation, 4.0)
    box = system.make_frozen()
    with pytest.raises(OracleError):
        rotation_level_value(box, 1.0)


def test_frozen_value_scans():
    quad = system.make_frozen(cost_id="u1^2")
    assert frozen_value(quad, (0.0, 0.0)).value == 0.0

    slope = system.make_frozen(cost_id="y1 + u1")
    result = frozen_value(slope, (0.5, 0.0))
    assert result.value == pytest.approx(-0.5, abs=1e-12)
    assert "u=[-1.0]" in result.attained_by

    const = system.make_frozen(cost_id="3")
    assert frozen_value(const, (0.3, 0.3)).value == 3.0


def test_level_table_square_root_law(rotation):
    levels = np.linspace(0.25, 2.25, 9)
    table = level_set_ordering(rotation, levels)
    for z, value in table.rows:
        assert value == pytest.approx(-np.sqrt(z), abs=1e-9)
    assert table.min_value == pytest.approx(-1.5, abs=1e-9)
    assert table.argmin_level == pytest.approx(2.25)


def test_level_table_constant_cost_flat():
    spec = system.make_rotation(cost_id="3")
    table = level_set_ordering(spec, [0.25, 1.0, 2.25])
    assert all(v == 3.0 for _z, v in table.rows)


def test_level_table_radial_well():
    spec = system.make_rotation(cost_id="(y1^2 + y2^2 - 1)^2")
    table = level_set_ordering(spec, np.linspace(0.25, 2.25, 9))
    assert table.argmin_level == pytest.approx(1.0, abs=1e-12)
    assert table.min_value == pytest.approx(0.0, abs=1e-9)


def test_cost_shift_invariance(rotation):
    shifted = system.make_rotation(cost_id="y1 + 2")
    base = rotation_level_value(rotation, 1.0)
    moved = rotation_level_value(shifted, 1.0)
    assert moved.value == base.value + 2.0


def test_angle_refinement_stability(rotation):
    coarse = rotation_level_value(rotation, 1.0, angle_resolution=7)
    fine = rotation_level_value(rotation, 1.0, angle_resolution=14)
    # Lipschitz constant of the first-coordinate cost is 1 on the unit circle
    assert abs(fine.value - coarse.value) <= np.pi * 1.0 / 7
