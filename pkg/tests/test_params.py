"""Parameter-space coercion: clamping, rounding, odd snapping, sampling."""

import numpy as np
import pytest

from postfuse.params import (
    CONTINUOUS,
    INTEGER,
    ODD_INTEGER,
    PARAM_NAMES,
    ParamBounds,
    ParamSpec,
    PostProcParams,
    clamp_params,
    effective_bounds,
    is_feasible,
    sample_params,
    snap_odd,
)
from oracles import clamp_scalar_reference

DIMS = (64, 64)
BOUNDS = ParamBounds.defaults(*DIMS)


def test_postprocparams_rejects_even_alpha():
    with pytest.raises(ValueError):
        PostProcParams(4, 1.0, 50, 1e-4, 0, 0, 1.0, 30)


def test_postprocparams_rejects_bad_ranges():
    good = dict(alpha=3, beta=1.0, phi=50, sigma=1e-4, lam_x=5, lam_y=5, theta=1.0, gamma=30)
    for key, bad in [("beta", 0.0), ("phi", 0), ("phi", 101), ("sigma", -1e-9),
                     ("lam_x", -1), ("theta", 0.0), ("gamma", 0)]:
        with pytest.raises(ValueError):
            PostProcParams(**{**good, key: bad})
    with pytest.raises(TypeError):
        PostProcParams(**{**good, "phi": 50.0})


def test_array_round_trip():
    p = PostProcParams(3, 1.25, 77, 2e-4, 10, 20, 0.9, 45)
    q = PostProcParams.from_array(p.as_array())
    assert p == q
    assert list(p.as_array()) == [3.0, 1.25, 77.0, 2e-4, 10.0, 20.0, 0.9, 45.0]


def test_spec_validation():
    with pytest.raises(ValueError):
        ParamSpec(5, 3)
    with pytest.raises(ValueError):
        ParamSpec(2, 13, ODD_INTEGER)  # even bound on an odd dimension
    with pytest.raises(ValueError):
        ParamSpec(1.5, 7, INTEGER)
    with pytest.raises(ValueError):
        ParamSpec(0, 1, "float")


def test_odd_snap_tie_goes_up():
    # raw 4.0 sits exactly between 3 and 5 and must snap to 5
    assert snap_odd(4.0) == 5
    assert snap_odd(2.0) == 3
    assert snap_odd(3.999) == 3
    assert snap_odd(4.001) == 5
    raw = np.array([4.0, 1.0, 50, 1e-4, 0, 0, 1.0, 30.0])
    assert clamp_params(raw, BOUNDS, DIMS).alpha == 5


def test_clamp_matches_scalar_reference():
    rng = np.random.default_rng(7)
    los, his = effective_bounds(BOUNDS, DIMS)
    for _ in range(500):
        raw = rng.uniform(los - 5.0, his + 5.0)
        got = clamp_params(raw, BOUNDS, DIMS).as_array()
        for d, (name, spec) in enumerate(zip(PARAM_NAMES, BOUNDS.as_tuple())):
            want = clamp_scalar_reference(raw[d], los[d], his[d], spec.kind)
            assert got[d] == want, f"{name}: raw={raw[d]} got={got[d]} want={want}"


def test_clamp_is_a_projection():
    rng = np.random.default_rng(11)
    los, his = effective_bounds(BOUNDS, DIMS)
    for _ in range(200):
        raw = rng.uniform(los - 10.0, his + 10.0)
        once = clamp_params(raw, BOUNDS, DIMS)
        twice = clamp_params(once.as_array(), BOUNDS, DIMS)
        assert once == twice


def test_clamp_rejects_non_finite():
    raw = np.array([np.nan, 1.0, 50, 1e-4, 0, 0, 1.0, 30.0])
    with pytest.raises(ValueError):
        clamp_params(raw, BOUNDS, DIMS)


def test_sample_always_feasible():
    rng = np.random.default_rng(3)
    for _ in range(2000):
        p = sample_params(BOUNDS, DIMS, rng)
        assert is_feasible(p, BOUNDS, DIMS)
        assert p.alpha % 2 == 1


def test_sample_is_clamp_fixed_point():
    rng = np.random.default_rng(5)
    for _ in range(300):
        p = sample_params(BOUNDS, DIMS, rng)
        assert clamp_params(p.as_array(), BOUNDS, DIMS) == p


def test_sample_means_near_midpoints():
    # per-dimension empirical mean within 5% of the range width of the midpoint
    rng = np.random.default_rng(42)
    n = 10_000
    acc = np.zeros(8)
    for _ in range(n):
        acc += sample_params(BOUNDS, DIMS, rng).as_array()
    mean = acc / n
    los, his = effective_bounds(BOUNDS, DIMS)
    mid = (los + his) / 2.0
    width = his - los
    assert np.all(np.abs(mean - mid) <= 0.05 * width)


def test_degenerate_bounds_give_constant():
    b = ParamBounds(
        alpha=ParamSpec(3, 3, ODD_INTEGER),
        beta=ParamSpec(1.5, 1.5),
        phi=ParamSpec(40, 40, INTEGER),
        sigma=ParamSpec(2e-4, 2e-4),
        lam_x=ParamSpec(7, 7, INTEGER),
        lam_y=ParamSpec(9, 9, INTEGER),
        theta=ParamSpec(1.0, 1.0),
        gamma=ParamSpec(33, 33, INTEGER),
    )
    rng = np.random.default_rng(0)
    want = PostProcParams(3, 1.5, 40, 2e-4, 7, 9, 1.0, 33)
    for _ in range(20):
        assert sample_params(b, DIMS, rng) == want


def test_lam_bounds_follow_image():
    los, his = effective_bounds(BOUNDS, (32, 48))
    assert his[PARAM_NAMES.index("lam_x")] == 31
    assert his[PARAM_NAMES.index("lam_y")] == 47
    rng = np.random.default_rng(9)
    for _ in range(500):
        p = sample_params(BOUNDS, (32, 48), rng)
        assert 0 <= p.lam_x < 32 and 0 <= p.lam_y < 48


def test_clamp_kind_matrix():
    # continuous stays real, integer rounds half-up, odd snaps
    raw = np.array([6.0, 7.7, 54.5, 9.9, 10.49, 10.5, 1.77, 99.5])
    p = clamp_params(raw, BOUNDS, (128, 128))
    assert p.alpha == 7           # 6.0 -> odd tie up
    assert p.beta == 5.0          # clamped to hi
    assert p.phi == 55            # half rounds up
    assert p.sigma == BOUNDS.sigma.hi
    assert p.lam_x == 10 and p.lam_y == 11
    assert p.theta == 1.77
    assert p.gamma == 100
