"""Geometric checks: capture intervals, bounds, envelopes, curve scans."""

import json

import numpy as np
import pytest

from loewner import (
    CheckReport,
    Constant,
    InsufficientDataError,
    ParameterError,
    PowerEnd,
    PreconditionError,
    SolverConfig,
    SqrtEnd,
    TracePath,
    approach_angle,
    capture_interval_endpoints,
    check_capture_interval,
    check_curvature_comparison,
    check_height_bound,
    check_proposition_hypotheses,
    check_simple_curve,
    compute_trace,
    fit_envelope,
    locate_left_endpoint,
)

CFG = SolverConfig(n_steps=2000)

# left endpoint of the swallowed interval for a(1-t)^r with a=4, r=1/3,
# pinned by bisecting Re f_T(w + i*1e-10) on the upward flow (grid-refined
# until six digits were stable)
P_POWER_4_THIRD = 0.8749771176371723


# ---------------------------------------------------------------------------
# capture interval


def test_capture_interval_endpoints_closed_form():
    left, right = capture_interval_endpoints(5.0)
    assert left == pytest.approx(1.0)
    assert right == 5.0
    left4, right4 = capture_interval_endpoints(4.0)
    assert left4 == pytest.approx(2.0)
    with pytest.raises(ParameterError):
        capture_interval_endpoints(3.9)


@pytest.mark.parametrize("k", [4.5, 8.0])
def test_check_capture_interval_passes(k):
    report = check_capture_interval(k, CFG, tol=1e-3)
    assert report.passed
    assert report.measured["error_left"] <= 1e-3
    assert report.measured["error_right"] <= 1e-3
    assert report.measured["fraction_swallowed"] == 1.0


def test_capture_report_json_is_reproducible(tmp_path):
    report = check_proposition_hypotheses(SqrtEnd(9.0), 9.0, CFG)
    text = report.to_json()
    doc = json.loads(text)
    assert doc["check"] == "proposition_hypotheses"
    assert set(doc) == {"check", "params", "measured", "threshold", "pass",
                        "notes", "solver_metadata"}
    assert report.to_json() == text
    path = tmp_path / "report.json"
    report.to_json(path)
    assert path.read_text().strip() == text


# ---------------------------------------------------------------------------
# left endpoint location


def test_locate_left_endpoint_sqrt():
    p = locate_left_endpoint(SqrtEnd(5.0), CFG)
    assert p == pytest.approx(1.0, abs=1e-3)


def test_locate_left_endpoint_power():
    p = locate_left_endpoint(PowerEnd(4.0, 1.0 / 3.0), CFG)
    assert p == pytest.approx(P_POWER_4_THIRD, abs=1e-4)


# ---------------------------------------------------------------------------
# height bound


def test_height_bound_trivial_regime():
    # 26/k = 2 at k = 13, where no hull reaches height 2 anyway
    report = check_height_bound(SqrtEnd(13.0), 13.0, CFG,
                                resolution=(100, 50))
    assert report.passed
    assert report.measured["member_cells"] == 0
    assert "universal height bound" in report.notes


def test_height_bound_rejects_undershooting_driver():
    # sqrt_end(k - 0.1) fails the lower-bound hypothesis for k
    with pytest.raises(PreconditionError):
        check_height_bound(SqrtEnd(4.9), 5.0, CFG)


def test_height_bound_rejects_nonvanishing_driver():
    with pytest.raises(PreconditionError):
        check_height_bound(Constant(5.0), 5.0, CFG)


# ---------------------------------------------------------------------------
# envelope fitting


def test_fit_envelope_recovers_synthetic_power_law():
    xs = 0.5 + np.geomspace(1e-3, 0.5, 12)
    ys = 3.7 * (xs - 0.5) ** 1.75
    fit = fit_envelope(xs, ys, 0.5)
    assert fit.exponent == pytest.approx(1.75, abs=1e-9)
    assert fit.coefficient == pytest.approx(3.7, rel=1e-9)
    assert fit.residual < 1e-12


def test_fit_envelope_needs_enough_samples():
    xs = np.array([0.6, 0.7, 1.0])
    with pytest.raises(InsufficientDataError):
        fit_envelope(xs, xs - 0.5, 0.5)


# ---------------------------------------------------------------------------
# simple-curve scan


def _synthetic_trace(points):
    points = np.asarray(points, dtype=complex)
    return TracePath(times=np.linspace(0.0, 1.0, len(points)), points=points)


def test_simple_curve_accepts_an_arc():
    th = np.linspace(0.1, np.pi - 0.1, 400)
    trace = _synthetic_trace(np.cos(th) + 1j * np.sin(th))
    report = check_simple_curve(trace)
    assert report.passed
    assert report.measured["n_intersections"] == 0
    assert trace.simple_flag is True


def test_simple_curve_detects_a_crossing():
    # figure-eight: lemniscate-like polyline crossing itself at the origin
    s = np.linspace(0.0, 2.0 * np.pi, 801)
    pts = np.sin(2.0 * s) + 1j * (1.2 + np.sin(s))
    report = check_simple_curve(_synthetic_trace(pts), tolerance=1e-6)
    assert not report.passed
    assert report.measured["n_intersections"] >= 1


def test_simple_curve_flags_real_axis_termination():
    pts = 0.5 + 1j * np.linspace(1.0, 1e-4, 100)
    report = check_simple_curve(_synthetic_trace(pts))
    assert report.passed
    assert "real axis" in report.notes


def test_slow_sqrt_trace_is_simple():
    trace = compute_trace(SqrtEnd(3.0), CFG)
    report = check_simple_curve(trace, tolerance=1e-9)
    assert report.passed
    assert trace.simple_flag is True


# ---------------------------------------------------------------------------
# approach angle


def test_approach_angle_vertical_descent():
    pts = 1.0 + 1j * np.linspace(1.0, 1e-6, 300)
    assert approach_angle(_synthetic_trace(pts)) == pytest.approx(
        np.pi / 2, abs=1e-9
    )


def test_approach_angle_oblique_descent():
    s = np.linspace(1.0, 1e-6, 300)
    pts = s + 1j * s
    assert approach_angle(_synthetic_trace(pts)) == pytest.approx(
        np.pi / 4, abs=1e-9
    )


def test_approach_angle_constant_driver_trace():
    trace = compute_trace(Constant(0.0), CFG)
    # a vertical slit meets the real axis at a right angle; measure the
    # angle of approach toward the starting point by reversing the path
    rev = _synthetic_trace(trace.points[::-1])
    assert approach_angle(rev) == pytest.approx(np.pi / 2, abs=1e-3)


def test_approach_angle_requires_proximity():
    pts = np.linspace(0.0, 1.0, 120) + 2.0j
    with pytest.raises((PreconditionError, InsufficientDataError)):
        approach_angle(_synthetic_trace(pts))


# ---------------------------------------------------------------------------
# curvature comparison


def test_curvature_comparison_power_driver():
    report = check_curvature_comparison(PowerEnd(9.0, 1.0 / 3.0), 0.0, CFG)
    assert report.passed
    assert report.measured["trace_points_in_interior"] == 0
    assert report.measured["inf_curvature"] >= 9.0


def test_curvature_comparison_rejects_flat_curvature():
    # LC of 5 sqrt(1-t) is 12.5 >= 9, but for 4(1-t)^(1/3) it is 32/3 * t...
    # a(1-t)^r with a=4, r=1/3 has LC(0) = 8/3 < 9
    with pytest.raises(PreconditionError):
        check_curvature_comparison(PowerEnd(4.0, 1.0 / 3.0), 0.0, CFG)


# ---------------------------------------------------------------------------
# trace-existence hypothesis margins


def test_proposition_hypotheses_sqrt_driver():
    # for k sqrt(1-t): LC = k^2/2, |lam(T)-lam(t)| = k sqrt(T-t), and the
    # delta ratio is identically k^2/2 / (sqrt(tau) * k/(2 sqrt(tau))) = k
    report = check_proposition_hypotheses(SqrtEnd(9.0), 9.0 - 1e-9, CFG)
    assert report.passed
    assert report.measured["curvature_margin"] == pytest.approx(40.5 - 9.0)
    assert report.measured["delta_margin"] == pytest.approx(9.0, rel=1e-9)
    assert report.measured["drop_margin"] >= 0.0


def test_proposition_hypotheses_fail_for_excess_delta():
    report = check_proposition_hypotheses(SqrtEnd(9.0), 10.0, CFG)
    assert not report.passed


def test_proposition_hypotheses_fail_for_weak_driver():
    # LC(0) = 25/6 < 9 for 5(1-t)^(1/3)
    report = check_proposition_hypotheses(PowerEnd(5.0, 1.0 / 3.0), 1.0, CFG)
    assert not report.passed
    assert report.measured["curvature_margin"] < 0.0


def test_check_report_is_a_dataclass_with_metadata():
    report = check_proposition_hypotheses(SqrtEnd(9.0), 9.0, CFG)
    assert isinstance(report, CheckReport)
    assert report.solver_metadata["n_steps"] == CFG.n_steps
