"""Stable subordinators, their inverses, and time-changed drivers."""

import numpy as np
import pytest

from loewner import (
    CoverageError,
    InversePath,
    ParameterError,
    SubordinatorPath,
    TimeChangedSqrt,
    invert_path,
    make_time_changed_driver,
    sample_one_sided_stable,
    sample_subordinator,
    time_changed_sqrt_driver,
)


# ---------------------------------------------------------------------------
# one-sided stable variates


@pytest.mark.parametrize("alpha", [0.5, 0.7])
def test_stable_laplace_transform(alpha):
    # E[exp(-X)] = exp(-1) for variates with transform exp(-s^alpha)
    rng = np.random.default_rng(1234)
    x = sample_one_sided_stable(alpha, 10_000, rng)
    assert np.all(x > 0)
    est = np.mean(np.exp(-x))
    assert est == pytest.approx(np.exp(-1.0), rel=0.05)


def test_stable_half_matches_levy_closed_form():
    # alpha = 1/2 is the Levy distribution: X = 1/(4 G^2) in distribution
    # with G standard normal, so P(X <= x) = 2(1 - Phi(1/sqrt(2x)))
    from scipy import stats

    rng = np.random.default_rng(99)
    x = sample_one_sided_stable(0.5, 20_000, rng)
    # scipy's levy has transform exp(-sqrt(2 s)); ours is exp(-s^(1/2)),
    # a scale factor of 2 in x
    _, pvalue = stats.kstest(2.0 * x, stats.levy.cdf)
    assert pvalue > 0.01


def test_stable_rejects_bad_index():
    rng = np.random.default_rng(0)
    for alpha in (0.0, 1.0, 1.5):
        with pytest.raises(ParameterError):
            sample_one_sided_stable(alpha, 4, rng)


# ---------------------------------------------------------------------------
# subordinator paths


def test_subordinator_is_deterministic_in_seed():
    a = sample_subordinator(0.7, 2.0, 1e-3, seed=42)
    b = sample_subordinator(0.7, 2.0, 1e-3, seed=42)
    assert np.array_equal(a.S_values, b.S_values)
    c = sample_subordinator(0.7, 2.0, 1e-3, seed=43)
    assert not np.array_equal(a.S_values, c.S_values)


def test_subordinator_starts_at_zero_and_is_monotone():
    path = sample_subordinator(0.5, 1.0, 1e-3, seed=7)
    assert path.S_values[0] == 0.0
    assert np.all(np.diff(path.S_values) >= 0)
    assert len(path.u_grid) == len(path.S_values)


def test_subordinator_self_similarity():
    # S_{cu} has the law of c^(1/alpha) S_u; compare S(u_max) samples
    # across many seeds at two horizons
    from scipy import stats

    alpha, c = 0.7, 4.0
    ends1 = np.array([sample_subordinator(alpha, 0.5, 1e-3, s).S_values[-1]
                      for s in range(400)])
    ends2 = np.array([sample_subordinator(alpha, 0.5 * c, 1e-3, s + 1000)
                      .S_values[-1] for s in range(400)])
    _, pvalue = stats.ks_2samp(ends1 * c ** (1.0 / alpha), ends2)
    assert pvalue > 0.01


def test_subordinator_validation():
    with pytest.raises(ParameterError):
        sample_subordinator(0.5, -1.0, 1e-3, seed=0)
    with pytest.raises(ParameterError):
        sample_subordinator(0.5, 1.0, 0.0, seed=0)
    with pytest.raises(ParameterError):
        SubordinatorPath(0.5, np.array([0.0, 1.0]), np.array([1.0, 0.5]), 0)


# ---------------------------------------------------------------------------
# inverse paths


def _linear_path(slope=2.0, n=1001, u_max=1.0):
    u = np.linspace(0.0, u_max, n)
    return SubordinatorPath(0.5, u, slope * u, seed=0)


def test_invert_linear_path_is_linear():
    # S_u = 2u inverts to E_t = t/2 up to one grid cell
    S = _linear_path(slope=2.0)
    E = invert_path(S, T=1.5, n_t=512)
    assert np.max(np.abs(E.E_values - E.t_grid / 2.0)) <= 1e-3 + 1e-12
    assert E.flat_fraction() < 0.5


def test_invert_path_composition_bound():
    # by definition of the right-continuous inverse, S_{E_t} >= t up to
    # one grid increment of S
    S = sample_subordinator(0.7, 4.0, 1e-3, seed=5)
    E = invert_path(S, T=1.0, n_t=800)
    idx = np.searchsorted(S.u_grid, E.E_values)
    s_after = S.S_values[np.minimum(idx + 1, len(S.S_values) - 1)]
    assert np.all(s_after >= E.t_grid - 1e-12)


def test_invert_path_requires_coverage():
    S = _linear_path(slope=0.5, u_max=1.0)  # tops out at 0.5
    with pytest.raises(CoverageError):
        invert_path(S, T=1.0, n_t=128)


def test_inverse_path_properties():
    S = sample_subordinator(0.7, 4.0, 1e-3, seed=11)
    E = invert_path(S, T=1.0, n_t=2048)
    assert E.E_values[0] == 0.0
    assert np.all(np.diff(E.E_values) >= 0)
    # jumps of S translate into flat stretches of E
    assert E.flat_fraction() > 0.0


# ---------------------------------------------------------------------------
# time-changed drivers


def test_time_changed_driver_eval():
    S = _linear_path(slope=2.0)
    E = invert_path(S, T=1.0, n_t=4096)
    driver = make_time_changed_driver(3.0, E)
    assert isinstance(driver, TimeChangedSqrt)
    # E_t = t/2, so the driver is 3 sqrt(1 - t/2)
    ts = np.linspace(0.0, 1.0, 33)
    assert np.allclose(driver.eval(ts), 3.0 * np.sqrt(1.0 - ts / 2.0),
                       atol=2e-3)


def test_time_changed_driver_is_nonincreasing():
    driver = time_changed_sqrt_driver(4.0, 0.7, seed=42)
    ts = np.linspace(0.0, 1.0, 2048)
    vals = driver.eval(ts)
    assert vals[0] == pytest.approx(4.0)
    assert np.all(np.diff(vals) <= 1e-12)
    assert np.all(vals >= 0.0)


def test_time_changed_driver_metadata_and_determinism():
    d1 = time_changed_sqrt_driver(4.0, 0.7, seed=42)
    d2 = time_changed_sqrt_driver(4.0, 0.7, seed=42)
    ts = np.linspace(0.0, 1.0, 257)
    assert np.array_equal(d1.eval(ts), d2.eval(ts))
    assert d1.meta == {"alpha": 0.7, "seed": 42}
