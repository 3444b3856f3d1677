import math

import numpy as np
import pytest

from cavesim.world import (CavelinePath, CurrentField, Scenario,
                           arclength_projection, build_hexagon_loop,
                           build_lawnmower, build_rectangle_loop,
                           nearest_point_on_path, sample_current)


def test_path_validation():
    with pytest.raises(ValueError):
        CavelinePath([[0.0, 0.0, 1.0]])
    with pytest.raises(ValueError):
        CavelinePath([[0.0, 0.0, 1.0], [0.0, 0.0, 1.0]])
    with pytest.raises(ValueError):
        CavelinePath([[0.0, 0.0, 1.0], [np.nan, 0.0, 1.0]])
    with pytest.raises(ValueError):
        CavelinePath([[0.0, 0.0, 1.0], [1.0, 0.0, 1.0]], line_width=0.0)
    with pytest.raises(ValueError):
        CavelinePath([[0, 0, 1], [1, 0, 1], [0, 0, 1]], closed=True)


def test_open_path_segments_and_length():
    p = CavelinePath([[0, 0, 1], [3, 0, 1], [3, 4, 1]])
    segs = p.segments()
    assert segs.shape == (2, 2, 3)
    assert p.total_length == pytest.approx(7.0)
    assert not p.closed
    assert not p.sloped


def test_closed_path_wraps():
    p = build_rectangle_loop(1.0, 2.0, 1.2, 0.01)
    assert p.closed
    assert p.total_length == pytest.approx(6.0)
    segs = p.segments()
    assert segs.shape == (4, 2, 3)
    assert np.allclose(segs[-1, 1], p.vertices[0])


def test_sloped_flag():
    flat = CavelinePath([[0, 0, 1], [1, 0, 1]])
    ramp = CavelinePath([[0, 0, 1], [1, 0, 2]])
    assert not flat.sloped
    assert ramp.sloped


def test_point_at():
    p = CavelinePath([[0, 0, 1], [3, 0, 1], [3, 4, 1]])
    assert np.allclose(p.point_at(0.0), [0, 0, 1])
    assert np.allclose(p.point_at(3.0), [3, 0, 1])
    assert np.allclose(p.point_at(5.0), [3, 2, 1])
    # open path clamps
    assert np.allclose(p.point_at(-1.0), [0, 0, 1])
    assert np.allclose(p.point_at(100.0), [3, 4, 1])


def test_point_at_closed_wraps():
    p = build_rectangle_loop(1.0, 2.0, 1.2, 0.01)
    assert np.allclose(p.point_at(6.0), p.point_at(0.0))
    assert np.allclose(p.point_at(7.5), p.point_at(1.5))


def test_nearest_point_on_path():
    p = CavelinePath([[0, 0, 1], [10, 0, 1]])
    pt, d = nearest_point_on_path(p, [5.0, 2.0, 1.0])
    assert np.allclose(pt, [5.0, 0.0, 1.0])
    assert d == pytest.approx(2.0)
    # beyond the end clamps to the vertex
    pt, d = nearest_point_on_path(p, [12.0, 0.0, 1.0])
    assert np.allclose(pt, [10.0, 0.0, 1.0])
    assert d == pytest.approx(2.0)


def test_arclength_projection_ignores_height():
    p = CavelinePath([[0, 0, 1], [10, 0, 1]])
    # directly above s=4: the horizontal projection must not be pulled
    # toward the endpoints by the vertical offset
    assert arclength_projection(p, (4.0, 0.5, 0.0)) == pytest.approx(4.0)
    assert arclength_projection(p, (4.0, 0.0, 5.0)) == pytest.approx(4.0)


def test_arclength_projection_round_trip():
    p = build_rectangle_loop(1.0, 2.0, 1.2, 0.01)
    rng = np.random.default_rng(8)
    for _ in range(200):
        s = rng.uniform(0.0, p.total_length)
        q = p.point_at(s)
        assert arclength_projection(p, q) == pytest.approx(s, abs=1e-9)


def test_builders_validate():
    with pytest.raises(ValueError):
        build_rectangle_loop(0.0, 1.0, 1.0, 0.01)
    with pytest.raises(ValueError):
        build_hexagon_loop(-1.0, 1.0, 0.01)
    with pytest.raises(ValueError):
        build_lawnmower(1, 4.0, 0.5, 1.0, 0.01)
    with pytest.raises(ValueError):
        build_lawnmower(3, 0.0, 0.5, 1.0, 0.01)


def test_hexagon_geometry():
    p = build_hexagon_loop(2.0, 1.5, 0.01)
    assert p.closed
    assert p.vertices.shape == (6, 3)
    # regular hexagon: perimeter equals 6 x circumradius
    assert p.total_length == pytest.approx(12.0)


def test_lawnmower_geometry():
    p = build_lawnmower(3, 4.0, 0.8, 1.5, 0.015)
    assert not p.closed
    assert p.vertices.shape == (6, 3)
    assert p.total_length == pytest.approx(3 * 4.0 + 2 * 0.8)
    # rows alternate direction
    assert p.vertices[0, 0] == 0.0 and p.vertices[1, 0] == 4.0
    assert p.vertices[2, 0] == 4.0 and p.vertices[3, 0] == 0.0


def test_current_steady():
    f = CurrentField(velocity=np.array([0.1, 0.0, 0.0]))
    c = f.sample_current(3.7)
    assert np.allclose(c, [0.1, 0.0, 0.0])
    # must be a copy, not a view of the field's state
    c[0] = 99.0
    assert f.velocity[0] == 0.1


def test_current_gusts():
    f = CurrentField(velocity=np.array([0.0, 0.03, 0.0]),
                     gust_amplitude=np.array([0.0, 0.15, 0.0]),
                     gust_period=7.0)
    assert np.allclose(f.sample_current(0.0), [0.0, 0.03, 0.0])
    quarter = 7.0 / 4.0
    assert f.sample_current(quarter)[1] == pytest.approx(0.18)
    assert f.sample_current(3 * quarter)[1] == pytest.approx(-0.12)
    assert np.allclose(sample_current(f, 7.0), f.sample_current(7.0))


def test_current_validation():
    with pytest.raises(ValueError):
        CurrentField(gust_amplitude=np.array([0.1, 0.0, 0.0]), gust_period=0.0)


def make_scenario(**kw):
    path = CavelinePath([[0, 0, 1.2], [5, 0, 1.2]])
    args = dict(path=path, floor_depth=1.2, target_depth=0.35)
    args.update(kw)
    return Scenario(**args)


def test_scenario_defaults():
    sc = make_scenario()
    assert sc.dt == 0.01
    assert sc.camera_period == 0.2
    assert sc.heading_gains == (3.4, 0.9, 0.0)
    assert sc.depth_gains == (600.0, 50.0, 0.0)
    assert sc.depth_gain_scale == pytest.approx(1.0 / 600.0)


def test_scenario_gain_normalization():
    sc = make_scenario(heading_gains=(2.0, 0.5))
    assert sc.heading_gains == (2.0, 0.5, 0.0)
    with pytest.raises(ValueError):
        make_scenario(heading_gains=(1.0,))


def test_scenario_validation():
    with pytest.raises(ValueError):
        make_scenario(target_depth=1.5)  # below the floor
    with pytest.raises(ValueError):
        make_scenario(duration=0.0)
    with pytest.raises(ValueError):
        make_scenario(dt=0.5)
    with pytest.raises(ValueError):
        make_scenario(camera_period=0.001)  # faster than dt
    with pytest.raises(ValueError):
        make_scenario(seed=-1)
    with pytest.raises(ValueError):
        make_scenario(cruise_speed=-0.1)
