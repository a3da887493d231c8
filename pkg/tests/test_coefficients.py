"""
Unit tests for coefficient profiles, Feller weights and hypothesis checks
"""

import math

import numpy as np
import pytest

from src.core.coefficients import (
    HypothesisChecker, check_hypotheses, classify, degeneracy_exponent, feller_weight, load_tabulated_csv,
    power_law_profile, tabulated_profile
)
from src.core.errors import IntegrabilityError, InvalidCoefficientError
from src.core.utils import geometric_grid


def test_power_law_validation():
    """a(0) = d(0) = 0 and integrability of b/a are enforced"""
    with pytest.raises(InvalidCoefficientError):
        power_law_profile(alpha=0.0)
    with pytest.raises(InvalidCoefficientError):
        power_law_profile(alpha=0.5, gamma_d=-0.1)
    with pytest.raises(InvalidCoefficientError):
        power_law_profile(alpha=0.5, beta_damp=-1.0)
    with pytest.raises(InvalidCoefficientError):
        power_law_profile(alpha=float("nan"))
    with pytest.raises(IntegrabilityError):
        power_law_profile(alpha=1.5, mu=0.1, beta_b=0.4)


def test_tabulated_profile_rejects_nonzero_start():
    with pytest.raises(InvalidCoefficientError):
        tabulated_profile(lambda x: x + 1.0, lambda x: 0.0 * x, lambda x: np.sqrt(x))


def test_degeneracy_exponent():
    assert degeneracy_exponent(lambda x: x ** 0.5, 0.5) == 0.5
    measured = degeneracy_exponent(lambda x: x ** 0.5)
    assert abs(measured - 0.5) < 1e-5, f"K for x^(1/2) should be 1/2, got {measured}"
    measured = degeneracy_exponent(lambda x: x ** 1.5 + x ** 2)
    assert 1.5 <= measured <= 2.0 + 1e-5, f"K for x^1.5 + x^2 out of range: {measured}"


def test_classify():
    assert classify(0.5) == "WD"
    assert classify(1.0) == "SD"
    assert classify(1.7) == "SD"
    assert classify(2.0) == "neither"
    assert classify(0.0) == "neither"


def test_feller_weight_closed_form(reference_profile):
    weights = feller_weight(reference_profile)
    assert weights.method == "closed-form"
    # eta = exp(0.1 (x^r - 2^-r) / r) with r = 3/2 for a = x^(1/2), b = 0.1 x
    r = 1.5
    eta_1 = math.exp(0.1 * (1.0 - 0.5 ** r) / r)
    eta_0 = math.exp(-0.1 * 0.5 ** r / r)
    assert abs(weights.eta(np.array([0.5]))[0] - 1.0) < 1e-15
    assert abs(weights.eta_at_1 - eta_1) < 1e-14
    assert abs(weights.eta_min - eta_0) < 1e-14
    assert abs(weights.eta_max - eta_1) < 1e-14
    assert abs(weights.sigma_at_1 - 1.0 / eta_1) < 1e-14


def test_feller_weight_quadrature_matches_closed_form(reference_profile):
    closed = feller_weight(reference_profile)
    numeric = feller_weight(reference_profile, method="quadrature")
    x = np.array([1e-8, 0.01, 0.25, 0.5, 0.9, 1.0])
    gap = np.max(np.abs(closed.eta(x) - numeric.eta(x)))
    assert gap < 1e-8, f"quadrature eta deviates by {gap}"
    assert abs(closed.eta_min - numeric.eta_min) < 1e-8


def test_quadrature_eta_on_random_power_laws():
    """Quadrature eta matches exp(mu (x^r - 2^-r) / r) within 1e-9 relative"""
    rng = np.random.default_rng(99)
    x = np.array([2.0 ** -20, 0.1, 0.5, 0.9, 1.0])
    for _ in range(100):
        alpha = rng.uniform(0.2, 1.8)
        r = rng.uniform(0.1, 3.0)
        profile = power_law_profile(alpha=alpha, mu=rng.uniform(-1.0, 1.0), beta_b=r + alpha - 1.0)
        closed = feller_weight(profile).eta(x)
        numeric = feller_weight(profile, method="quadrature").eta(x)
        worst = np.max(np.abs(numeric - closed) / closed)
        assert worst <= 1e-9, f"relative eta error {worst} for alpha={alpha}, r={r}, mu={profile.mu}"


def test_reference_hypotheses(reference_profile, reference_hardy):
    """Reference profile is weakly degenerate with eps0 = 2 - 1/2 - 1/2 - 2 * 0.1"""
    report = check_hypotheses(reference_profile, reference_hardy)
    assert report.k_a == 0.5
    assert report.k_d == 0.25
    assert report.a_class == "WD"
    assert report.d_class == "WD"
    assert abs(report.epsilon0 - 0.8) < 1e-12
    assert report.hyp1_ok and report.hyp2_ok and report.hyp3_ok and report.ass2_ok
    assert report.lambda_range_ok
    assert report.intro_conditions_ok
    assert report.certifiable
    assert report.diagnostics == []


def test_excessive_degeneracy_is_reported(reference_hardy):
    """K_a + 2K_d = 2.2 fails with the inequality named"""
    profile = power_law_profile(alpha=1.2, mu=0.0, gamma_d=0.5)
    report = check_hypotheses(profile, reference_hardy)
    assert not report.hyp3_ok
    assert not report.certifiable
    assert any("K_a + 2K_d <= 2" in message for message in report.diagnostics)


def test_lambda_range_reported(reference_profile, reference_hardy):
    profile = reference_profile.model_copy(update={"lam": 2.0 / reference_hardy.c_hp})
    report = check_hypotheses(profile, reference_hardy)
    assert not report.hyp2_ok
    assert not report.lambda_range_ok
    assert report.ass2_ok


def test_tabulated_csv_recovers_power_law(test_data_dir):
    profile = load_tabulated_csv(test_data_dir / "tabulated_profile.csv", lam=0.0, beta_damp=1.0)
    x = np.array([1e-6, 0.01, 0.3, 0.77, 1.0])
    assert np.allclose(profile.a(x), x ** 0.5, rtol=1e-6)
    assert np.allclose(profile.d(x), x ** 0.25, rtol=1e-6)
    assert np.allclose(profile.b(x), 0.1 * x, atol=1e-8)
    assert profile.a(np.array([0.0]))[0] == 0.0

    k_a = degeneracy_exponent(profile.a)
    assert abs(k_a - 0.5) < 1e-3, f"tabulated K_a should be near 1/2, got {k_a}"


def test_sampled_monotonicity_flags(reference_profile, reference_hardy):
    report = check_hypotheses(reference_profile, reference_hardy)
    assert report.monotone_a_ok and report.monotone_d_ok
    assert report.hyp1_ok

    # x^0.3 / x^0.5 decreases: an exponent below K_a breaks monotonicity
    checker = HypothesisChecker()
    grid = geometric_grid()
    assert not checker._nondecreasing(grid, grid ** 0.3 / reference_profile.a(grid), "x^K_a / a")
    assert checker.diagnostics == ["x^K_a / a nondecreasing on (0, 1] violated on the sample grid"]
    assert checker._nondecreasing(grid, grid ** 0.5 / reference_profile.a(grid), "x^K_a / a")
    assert len(checker.diagnostics) == 1


def test_drift_envelope(reference_hardy):
    """|x^K_a b / a| <= M_tilde = sup |b| / a(1) for b = const"""
    profile = power_law_profile(alpha=0.5, mu=1.0, beta_b=0.0, gamma_d=0.25)
    report = check_hypotheses(profile, reference_hardy)
    assert abs(report.m_tilde - 1.0) < 1e-12
    assert not any("M_tilde" in message for message in report.diagnostics)

    checker = HypothesisChecker()
    grid = geometric_grid()
    checker._check_drift_envelope(profile, grid, 0.5, report.m_tilde)
    assert checker.diagnostics == []
    # x^0.2 b / a = x^-0.3 is unbounded
    checker._check_drift_envelope(profile, grid, 0.2, report.m_tilde)
    assert len(checker.diagnostics) == 1
    assert checker.diagnostics[0].startswith("|x^K_a b / a| <= M_tilde violated")
