import math
from fractions import Fraction

import numpy as np
import pytest

from planhorizon import stats
from planhorizon.stats import (Outcome, build_design, fit_clustered_logit,
                               match_answer, model_based_covariance, standardize,
                               summarize_run)


def newton_logit_oracle(X, y, tol=1e-12, max_iter=200):
    """Dense Newton maximum-likelihood fit, written independently of stats.py."""
    X, y = np.asarray(X, float), np.asarray(y, float)
    beta = np.zeros(X.shape[1])
    for _ in range(max_iter):
        mu = 1 / (1 + np.exp(-X @ beta))
        grad = X.T @ (y - mu)
        hess = X.T @ np.diag(mu * (1 - mu)) @ X
        step = np.linalg.solve(hess, grad)
        beta += step
        if np.abs(step).max() < tol:
            break
    return beta


class TestMatchAnswer:
    def test_exact(self):
        assert match_answer("Paris", ["Paris"]) == "correct"

    def test_case_and_filler_insensitive(self):
        assert match_answer("The answer is PARIS.", ["Paris"]) == "correct"

    def test_id_or_name_gold(self):
        gold = ["m.02686wj (He's a Bully, Charlie Brown)"]
        assert match_answer("m.02686wj", gold) == "correct"
        assert match_answer("He's a Bully, Charlie Brown", gold) == "correct"
        assert match_answer("Twilight", gold) == "incorrect"

    def test_partial_when_some_gold_missing(self):
        assert match_answer("Paris", ["Paris", "Rome"]) == "partially_correct"

    def test_partial_when_extra_values_listed(self):
        assert match_answer("Paris, Berlin", ["Paris"]) == "partially_correct"

    def test_refusal(self):
        assert match_answer("", ["Paris"]) == "refusal"
        assert match_answer("I don't know", ["Paris"]) == "refusal"

    def test_numeric_mode(self):
        assert match_answer("180,000", ["180000"], mode="numeric") == "correct"
        assert match_answer("206.0", ["206"], mode="numeric") == "correct"

    def test_idempotent_and_permutation_invariant(self):
        gold = ["Paris", "Rome"]
        label = match_answer("Rome and Paris", gold)
        assert label == match_answer("Rome and Paris", list(reversed(gold)))
        assert label == "correct"


class TestStandardize:
    def test_population_sd(self):
        z = standardize([1.0, 2.0, 3.0, 4.0])
        assert np.mean(z) == pytest.approx(0.0)
        # population sd of 1..4 is sqrt(1.25)
        assert z[0] == pytest.approx(-1.5 / math.sqrt(1.25))

    def test_constant_column_rejected(self):
        with pytest.raises(stats.DegenerateFeatureError):
            standardize([5.0, 5.0, 5.0])


class TestFitClusteredLogit:
    def test_matches_newton_oracle_small(self):
        X = np.column_stack([np.ones(10), [0, 0, 0, 0, 0, 1, 1, 1, 1, 1]])
        y = np.array([0, 0, 1, 0, 1, 1, 1, 0, 1, 1], float)
        fit = fit_clustered_logit(X, y, clusters=list(range(10)))
        oracle = newton_logit_oracle(X, y)
        assert np.abs(fit.beta - oracle).max() < 1e-6
        assert fit.converged

    def test_matches_scipy_optimizer(self):
        from scipy.optimize import minimize
        rng = np.random.default_rng(5)
        X = np.column_stack([np.ones(12), rng.normal(size=12)])
        y = (rng.random(12) < 0.5).astype(float)

        def nll(beta):
            eta = X @ beta
            return float(np.sum(np.log1p(np.exp(eta)) - y * eta))

        best = minimize(nll, np.zeros(2), method="BFGS", tol=1e-12)
        fit = fit_clustered_logit(X, y, clusters=list(range(12)))
        assert np.abs(fit.beta - best.x).max() < 1e-5

    def test_balanced_outcome_gives_zero_slope(self):
        # y is a coin flip independent of x, perfectly balanced within levels
        X = np.column_stack([np.ones(8), [0, 0, 0, 0, 1, 1, 1, 1]])
        y = np.array([0, 1, 0, 1, 0, 1, 0, 1], float)
        fit = fit_clustered_logit(X, y, clusters=list(range(8)))
        assert abs(fit.beta[1]) < 1e-6

    def test_sandwich_equals_model_based_for_saturated_singletons(self):
        """With singleton clusters and a saturated model, the bread and meat
        cancel and the sandwich reduces to the inverse Fisher information."""
        X = np.column_stack([np.ones(12), [0.0] * 6 + [1.0] * 6])
        y = np.array([0, 0, 1, 1, 1, 1, 0, 1, 1, 1, 1, 1], float)
        fit = fit_clustered_logit(X, y, clusters=list(range(12)))
        model = model_based_covariance(X, fit.beta)
        assert np.abs(fit.cov - model).max() < 1e-8

    def test_z_invariant_to_positive_rescaling(self):
        rng = np.random.default_rng(17)
        X = np.column_stack([np.ones(60), rng.normal(size=60)])
        latent = 0.3 + 0.8 * X[:, 1]
        y = (rng.random(60) < 1 / (1 + np.exp(-latent))).astype(float)
        clusters = [i // 3 for i in range(60)]
        fit = fit_clustered_logit(X, y, clusters)
        X2 = X.copy()
        X2[:, 1] *= 40.0
        fit2 = fit_clustered_logit(X2, y, clusters)
        assert fit2.beta[1] == pytest.approx(fit.beta[1] / 40.0, abs=1e-8)
        assert fit2.z[1] == pytest.approx(fit.z[1], abs=1e-8)

    def test_synthetic_recovery_within_three_se(self):
        rng = np.random.default_rng(123)
        n, n_clusters = 2000, 500
        clusters = np.repeat(np.arange(n_clusters), n // n_clusters)
        cluster_effect = rng.normal(0, 0.3, n_clusters)[clusters]
        x = rng.normal(size=n)
        beta0, beta_d = 0.5, -0.4
        p = 1 / (1 + np.exp(-(beta0 + beta_d * x + cluster_effect)))
        y = (rng.random(n) < p).astype(float)
        X = np.column_stack([np.ones(n), x])
        fit = fit_clustered_logit(X, y, list(clusters))
        assert abs(fit.beta[1] - beta_d) < 3 * fit.se[1]
        assert fit.n_clusters == n_clusters

    def test_rank_deficiency_surfaced(self):
        X = np.column_stack([np.ones(8), [1.0] * 8])
        y = np.array([0, 1] * 4, float)
        with pytest.raises(stats.RankDeficiencyError):
            fit_clustered_logit(X, y, list(range(8)))

    def test_separation_surfaced(self):
        X = np.column_stack([np.ones(8), [0, 0, 0, 0, 1, 1, 1, 1]])
        y = np.array([0, 0, 0, 0, 1, 1, 1, 1], float)
        with pytest.raises(stats.SeparationError):
            fit_clustered_logit(X, y, list(range(8)))

    def test_p_values_two_sided_normal(self):
        X = np.column_stack([np.ones(40), [0, 1] * 20])
        rng = np.random.default_rng(2)
        y = (rng.random(40) < 0.5).astype(float)
        fit = fit_clustered_logit(X, y, list(range(40)))
        for zi, pi in zip(fit.z, fit.p):
            assert pi == pytest.approx(2 * 0.5 * math.erfc(abs(zi) / math.sqrt(2)))


def make_outcome(i, planner, success, **kw):
    defaults = dict(question_id=f"q{i}", trial=0, planner=planner, success=success,
                    depth=2 + i % 3, breadth=1.0 + (i % 2) / 2, tokens_in=100,
                    tokens_out=10)
    defaults.update(kw)
    return Outcome(**defaults)


class TestBuildDesign:
    def outcomes(self):
        return [make_outcome(i, "sh" if i % 2 else "fh", i % 2, last_tool="Find" if i < 4 else "Count")
                for i in range(8)]

    def test_columns(self):
        X, y, clusters, names = build_design(self.outcomes())
        assert names == ["intercept", "depth", "breadth", "sh", "depth:sh", "breadth:sh"]
        assert X.shape == (8, 6)
        assert list(y) == [0, 1] * 4

    def test_control_dummies_drop_reference_level(self):
        X, y, clusters, names = build_design(self.outcomes(), controls=("last_tool",))
        assert names[-1] == "last_tool[Find]"  # "Count" is the reference level

    def test_unknown_control_rejected(self):
        with pytest.raises(stats.StatsError):
            build_design(self.outcomes(), controls=("favorite_color",))


class TestSummarizeRun:
    def test_single_correct_fh_record(self):
        report = summarize_run([make_outcome(0, "fh", 1)])
        assert report.accuracy[("fixture", "fh")] == Fraction(1)

    def test_identical_planners_delta_zero(self):
        outcomes = [make_outcome(i, p, 1) for i in range(3) for p in ("sh", "fh")]
        report = summarize_run(outcomes)
        assert report.delta_sh["fixture"] == 0
        assert report.input_ratio["fixture"] == 1

    def test_hand_computed_mixed_fixture(self):
        outcomes = [
            make_outcome(0, "sh", 1, tokens_in=300, tokens_out=30),
            make_outcome(1, "sh", 1, tokens_in=500, tokens_out=50),
            make_outcome(2, "sh", 0, tokens_in=400, tokens_out=40, repeated=True),
            make_outcome(0, "fh", 1, tokens_in=100, tokens_out=30),
            make_outcome(1, "fh", 0, tokens_in=200, tokens_out=50),
            make_outcome(2, "fh", 0, tokens_in=300, tokens_out=40),
        ]
        report = summarize_run(outcomes)
        assert report.accuracy[("fixture", "sh")] == Fraction(2, 3)
        assert report.accuracy[("fixture", "fh")] == Fraction(1, 3)
        assert report.delta_sh["fixture"] == Fraction(1, 3)
        assert report.tokens_in[("fixture", "sh")] == Fraction(400)
        assert report.input_ratio["fixture"] == Fraction(400, 200)
        assert report.output_ratio["fixture"] == Fraction(1)
        assert report.repetition[("fixture", "sh")] == Fraction(1, 3)
        assert report.repetition[("fixture", "fh")] == Fraction(0)

    def test_exact_rational_accuracy(self):
        outcomes = [make_outcome(i, "sh", 1 if i < 1 else 0) for i in range(3)]
        report = summarize_run(outcomes)
        assert report.accuracy[("fixture", "sh")] == Fraction(1, 3)  # not 0.333...

    def test_empty_rejected(self):
        with pytest.raises(stats.StatsError):
            summarize_run([])

    def test_text_and_json_renderings(self):
        outcomes = [make_outcome(i, p, 1) for i in range(2) for p in ("sh", "fh")]
        report = summarize_run(outcomes)
        assert "delta_SH" in report.to_text()
        doc = report.to_json()
        assert doc["accuracy"]["fixture/sh"] == 1.0
