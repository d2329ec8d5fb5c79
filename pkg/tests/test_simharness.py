import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from belief.errors import ConfigError, DataError
from belief.simharness import (
    clipped_normal_mean,
    double_limit,
    fit_logistic_irls,
    generate,
    interaction_design,
    make_rng,
    rate_check,
    roc_auc,
    run_comparison,
)


def test_scenario1_symmetric():
    d = generate(1, 100_000, 3)
    sigma = np.sqrt(0.25 / d.prob.size)
    assert abs(d.prob.mean() - 0.5) < 3 * sigma
    assert np.all(np.abs(d.x) <= 1)


def test_scenario2_probability_at_least_half():
    d = generate(2, 10_000, 1)
    assert np.all(d.prob >= 0.5)
    assert np.mean(d.b == 1) > 0.5


def test_scenario3_shape():
    d = generate(3, 500, 2)
    assert d.x.shape == (500, 2)
    assert set(np.unique(d.b)) <= {-1, 1}


def test_generate_reproducible_and_errors():
    a, b = generate(3, 1000, 42), generate(3, 1000, 42)
    assert a.x.tobytes() == b.x.tobytes() and a.b.tobytes() == b.b.tobytes()
    assert generate(3, 1000, 43).x.tobytes() != a.x.tobytes()
    with pytest.raises(ConfigError):
        generate(4, 10, 0)
    with pytest.raises(ConfigError):
        generate(1, 0, 0)


def test_irls_separated_flagged():
    x = np.array([[-2.0, 0.1], [-1.0, -0.3], [1.0, 0.2], [2.0, -0.1], [1.5, 0.4], [-1.5, 0.0]])
    y = np.where(x[:, 0] > 0, 1, -1)
    r = fit_logistic_irls(interaction_design(x), y)
    assert not r.converged and r.separation_suspected


def test_irls_rank_deficient():
    X = np.column_stack([np.ones(5), np.arange(5), 2 * np.arange(5)])
    with pytest.raises(DataError):
        fit_logistic_irls(X, np.array([1, -1, 1, -1, 1]))


def test_irls_recovers_truth():
    truth = np.array([0.3, 1.0, -0.5, 0.8])
    misses = 0
    for seed in range(20):
        rng = make_rng(seed)
        x = rng.uniform(-1, 1, size=(100_000, 2))
        X = interaction_design(x)
        y = np.where(rng.uniform(size=len(x)) < 1 / (1 + np.exp(-X @ truth)), 1, -1)
        r = fit_logistic_irls(X, y)
        assert r.converged
        misses += np.any(np.abs(r.coef - truth) > 3 * r.se)
    # four coefficients at 3 SE: a miss in more than 3 of 20 seeds would be very unusual
    assert misses <= 3


def test_irls_zero_signal():
    rng = make_rng(5)
    x = rng.normal(size=(20_000, 2))
    y = np.where(rng.uniform(size=len(x)) < 0.5, 1, -1)
    r = fit_logistic_irls(interaction_design(x), y)
    assert r.converged
    assert np.all(np.abs(r.coef[1:]) < 3 * r.se[1:])


def test_irls_accepts_01_labels():
    rng = make_rng(6)
    x = rng.normal(size=(2000, 2))
    y = (rng.uniform(size=2000) < 0.4).astype(int)
    a = fit_logistic_irls(interaction_design(x), y)
    b = fit_logistic_irls(interaction_design(x), 2 * y - 1)
    assert np.allclose(a.coef, b.coef)


def test_roc_examples():
    assert roc_auc([1, -1, 1, -1], [1, -1, 1, -1]).auc == 1.0
    assert roc_auc([0.9, 0.8, 0.3, 0.1], [1, -1, 1, -1]).auc == 0.75
    rng = make_rng(0)
    assert abs(roc_auc(rng.uniform(size=50_000), rng.choice([-1, 1], 50_000)).auc - 0.5) < 0.01
    with pytest.raises(DataError):
        roc_auc([0.1, 0.2], [1, 1])


def _mann_whitney(scores, labels):
    pos = scores[labels > 0]
    neg = scores[labels <= 0]
    diff = pos[:, None] - neg[None, :]
    return (np.sum(diff > 0) + 0.5 * np.sum(diff == 0)) / diff.size


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.booleans()), min_size=2, max_size=40))
def test_roc_auc_equals_mann_whitney_with_ties(pairs):
    scores = np.array([p[0] for p in pairs], dtype=float)
    labels = np.array([1 if p[1] else -1 for p in pairs])
    if len(set(labels)) < 2:
        return
    curve = roc_auc(scores, labels)
    assert curve.auc == pytest.approx(_mann_whitney(scores, labels))
    assert np.all(np.diff(curve.fpr) >= 0) and np.all(np.diff(curve.tpr) >= 0)
    assert curve.fpr[-1] == 1 and curve.tpr[-1] == 1 and 0 <= curve.auc <= 1
    warped = roc_auc(np.exp(3 * scores) - 7, labels)
    assert np.array_equal(warped.fpr, curve.fpr) and np.array_equal(warped.tpr, curve.tpr)


def test_run_comparison_reproducible(tmp_path):
    a = run_comparison(1, (1, 2), 1024, 512, seed=7)
    b = run_comparison(1, (1, 2), 1024, 512, seed=7)
    assert a.summary() == b.summary()
    a.write_roc_csv(tmp_path / "a.csv")
    b.write_roc_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert set(a.auc) == {"belief_d1", "belief_d2", "logistic"}


def test_rate_check_linear_bound():
    rows = rate_check(lambda u: 2 * u[:, 0] - u[:, 1], 2, range(1, 8), n=20_000)
    for r in rows:
        assert r.max_error <= 2 * 2.0**-r.depth + 1 * 2.0**-r.depth + 1e-12


def test_rate_check_tanh_halving():
    rows = rate_check(lambda u: np.tanh(u[:, 0]), 1, range(2, 10), n=1_000_000, seed=1)
    ratios = [r.ratio for r in rows[1:]]
    assert all(0.4 <= r <= 0.6 for r in ratios)


def test_clipped_normal_mean_matches_numerical_integration():
    from scipy import integrate, stats

    for m in np.linspace(-1.5, 1.5, 13):
        f = lambda z: np.clip(m + 0.3 * z, -1, 1) * stats.norm.pdf(z)  # noqa: E731
        kinks = sorted({(-1 - m) / 0.3, (1 - m) / 0.3})
        ref, _ = integrate.quad(f, -12, 12, points=kinks, epsabs=1e-13, limit=200)
        assert float(clipped_normal_mean(m, 0.3)) == pytest.approx(ref, abs=1e-10)


def test_double_limit_error_decreases():
    rows = double_limit(lambda u: 0.8 * np.sin(2 * u), [(1, 1), (2, 2), (3, 4), (5, 6)], n=1 << 17, seed=3)
    errs = [r.l2_error for r in rows]
    assert all(b < a for a, b in zip(errs, errs[1:]))
