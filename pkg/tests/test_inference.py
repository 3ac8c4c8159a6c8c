"""Likelihood ratio testing: statistics, corrections, bootstrap, errors."""

import dataclasses
import math

import numpy as np
import pytest

from betabart.fit import (
    FitOptions,
    FitResult,
    NonConvergenceError,
    Restriction,
    fit_mle,
    fit_restricted,
)
from betabart.inference import (
    BootstrapFailureError,
    BootstrapOptions,
    NestingError,
    _default_resample,
    bartlett_corrected,
    bootstrap_bartlett,
    lr_statistic,
    run_test,
)
from betabart.inference import TestReport as Report  # alias: not a test class
from betabart.model import ParamVector
from betabart.specfun import chisq_sf


def _stub_fit(loglik, fixed_positions=(), k=4, converged=True):
    """Hand-built FitResult for exercising the nesting checks."""
    mask = np.zeros(k, dtype=bool)
    for i in fixed_positions:
        mask[i] = True
    free = np.nonzero(~mask)[0]
    m = len(free)
    return FitResult(
        theta_hat=ParamVector(np.zeros(k - 1), 10.0),
        loglik=loglik,
        K=np.eye(m),
        K_inv=np.eye(m),
        std_errors=np.ones(k),
        iterations=5,
        converged=converged,
        clamp_activated=False,
        fixed_mask=mask,
        free_indices=free,
    )


class TestLrStatistic:
    def test_floor_at_zero(self, food_reduced, link):
        # restricting a coefficient at its own MLE value keeps the optimum
        full = fit_mle(food_reduced, link)
        pinned = Restriction((3,), (float(full.theta_hat.beta[2]),))
        restricted = fit_restricted(food_reduced, link, pinned)
        lr = lr_statistic(full, restricted)
        assert 0.0 <= lr < 1e-6

    def test_positive_on_real_restriction(self, food_five, link):
        full = fit_mle(food_five, link)
        restricted = fit_restricted(food_five, link, Restriction((4, 5), (0.0, 0.0)))
        assert lr_statistic(full, restricted) > 0.1

    def test_full_fit_must_be_unrestricted(self):
        with pytest.raises(NestingError, match="fixed"):
            lr_statistic(_stub_fit(-10.0, fixed_positions=(1,)), _stub_fit(-12.0, (1,)))

    def test_restricted_fit_must_be_restricted(self):
        with pytest.raises(NestingError, match="no fixed"):
            lr_statistic(_stub_fit(-10.0), _stub_fit(-12.0))

    def test_dimension_mismatch(self):
        with pytest.raises(NestingError, match="dimensions"):
            lr_statistic(_stub_fit(-10.0, k=4), _stub_fit(-12.0, (1,), k=5))

    def test_restricted_cannot_beat_full(self):
        with pytest.raises(NestingError, match="not nested"):
            lr_statistic(_stub_fit(-12.0), _stub_fit(-10.0, (1,)))

    def test_roundoff_deficit_is_floored(self):
        lr = lr_statistic(_stub_fit(-10.0 - 1e-12), _stub_fit(-10.0, (1,)))
        assert lr == 0.0

    def test_non_convergence_rejected(self):
        with pytest.raises(NonConvergenceError):
            lr_statistic(_stub_fit(-10.0, converged=False), _stub_fit(-12.0, (1,)))
        with pytest.raises(NonConvergenceError):
            lr_statistic(_stub_fit(-10.0), _stub_fit(-12.0, (1,), converged=False))


class TestBartlettCorrected:
    def test_zero_correction_is_identity(self):
        assert bartlett_corrected(5.0, 0.0, 2) == (5.0, 5.0, 5.0)

    def test_ordering_for_positive_x(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            lr = float(rng.uniform(0.0, 30.0))
            x = float(rng.uniform(0.0, 1.5))
            b1, b2, b3 = bartlett_corrected(lr, x, 1)
            assert b1 >= b2 >= b3
            # b2 and b3 agree to second order in x
            assert abs(b2 - b3) <= lr * x**2 / 2.0 + 1e-12

    def test_degenerate_division_gives_nan(self):
        b1, b2, b3 = bartlett_corrected(4.0, -1.5, 1)
        assert math.isnan(b1)
        assert math.isfinite(b2) and math.isfinite(b3)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            bartlett_corrected(-1.0, 0.1, 1)
        with pytest.raises(ValueError):
            bartlett_corrected(1.0, 0.1, 0)


class TestReportValidation:
    def test_negative_lr_rejected(self):
        with pytest.raises(ValueError):
            Report(
                lr=-1.0, q=1, eps_diff_over_q=None, lr_b1=None, lr_b2=None,
                lr_b3=None, lr_boot=None, boot_mean=None, boot_failures=0,
                p_values={},
            )

    def test_bad_p_value_rejected(self):
        with pytest.raises(ValueError):
            Report(
                lr=1.0, q=1, eps_diff_over_q=None, lr_b1=None, lr_b2=None,
                lr_b3=None, lr_boot=None, boot_mean=None, boot_failures=0,
                p_values={"lr": 1.5},
            )

    def test_df_property(self):
        report = Report(
            lr=1.0, q=3, eps_diff_over_q=None, lr_b1=None, lr_b2=None,
            lr_b3=None, lr_boot=None, boot_mean=None, boot_failures=0,
            p_values={},
        )
        assert report.df == 3


class TestBootstrapOptions:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"B": 0},
            {"B": -5},
            {"B": 2.5},
            {"max_failure_fraction": 1.0},
            {"max_failure_fraction": -0.1},
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            BootstrapOptions(**kwargs)

    def test_numpy_integer_accepted(self):
        opts = BootstrapOptions(B=np.int64(7))
        assert opts.B == 7


class TestBootstrapBartlett:
    def test_self_resample_identity(self, food_five, link):
        # when every resample is the observed data, mean(LR*) = LR and
        # the corrected statistic collapses to the reference mean q
        restriction = Restriction((4, 5), (0.0, 0.0))
        lr_boot, boot_mean, failures = bootstrap_bartlett(
            food_five,
            link,
            restriction,
            BootstrapOptions(B=1, seed=0),
            resample_fn=lambda mu, phi, rng: food_five.y.copy(),
        )
        assert failures == 0
        assert lr_boot == pytest.approx(restriction.q, rel=1e-10)

    def test_seed_determinism(self, food_five, link):
        restriction = Restriction((4,), (0.0,))
        first = bootstrap_bartlett(
            food_five, link, restriction, BootstrapOptions(B=25, seed=11)
        )
        second = bootstrap_bartlett(
            food_five, link, restriction, BootstrapOptions(B=25, seed=11)
        )
        third = bootstrap_bartlett(
            food_five, link, restriction, BootstrapOptions(B=25, seed=12)
        )
        assert first == second
        assert first[0] != third[0]

    def test_failure_budget_enforced(self, food_five, link):
        restriction = Restriction((4,), (0.0,))
        state = {"calls": 0}

        def sometimes_bad(mu, phi, rng):
            state["calls"] += 1
            if state["calls"] == 1:
                return np.full(mu.shape, np.nan)
            return _default_resample(mu, phi, rng)

        with pytest.raises(BootstrapFailureError, match="over the budget"):
            bootstrap_bartlett(
                food_five,
                link,
                restriction,
                BootstrapOptions(B=20, seed=3, max_failure_fraction=0.0),
                resample_fn=sometimes_bad,
            )

    def test_failures_within_budget_are_counted(self, food_five, link):
        restriction = Restriction((4,), (0.0,))
        state = {"calls": 0}

        def sometimes_bad(mu, phi, rng):
            state["calls"] += 1
            if state["calls"] == 1:
                return np.full(mu.shape, np.nan)
            return _default_resample(mu, phi, rng)

        lr_boot, boot_mean, failures = bootstrap_bartlett(
            food_five,
            link,
            restriction,
            BootstrapOptions(B=20, seed=3, max_failure_fraction=0.10),
            resample_fn=sometimes_bad,
        )
        assert failures == 1
        assert math.isfinite(lr_boot) and lr_boot > 0.0

    def test_mean_stabilizes_in_b(self, food_reduced, link):
        restriction = Restriction((3,), (0.0,))
        _, mean_small, _ = bootstrap_bartlett(
            food_reduced, link, restriction, BootstrapOptions(B=200, seed=1)
        )
        _, mean_large, _ = bootstrap_bartlett(
            food_reduced, link, restriction, BootstrapOptions(B=2000, seed=1)
        )
        assert abs(mean_small - mean_large) < 0.5


class TestRunTest:
    def test_all_methods(self, food_five, link):
        report = run_test(
            food_five,
            link,
            Restriction((4, 5), (0.0, 0.0)),
            boot_opts=BootstrapOptions(B=50, seed=2),
        )
        assert report.q == 2
        assert report.lr > 0.0
        assert report.lr_b1 >= report.lr_b2 >= report.lr_b3
        assert report.lr_boot is not None and report.boot_mean is not None
        assert set(report.p_values) == {"lr", "b1", "b2", "b3", "boot"}

    def test_agrees_with_component_calls(self, food_five, link):
        restriction = Restriction((4, 5), (0.0, 0.0))
        report = run_test(
            food_five, link, restriction, methods=("lr", "b1", "b2", "b3")
        )
        full = fit_mle(food_five, link)
        restricted = fit_restricted(food_five, link, restriction)
        lr = lr_statistic(full, restricted)
        assert report.lr == pytest.approx(lr, rel=1e-12)
        b1, b2, b3 = bartlett_corrected(lr, report.eps_diff_over_q, 2)
        assert report.lr_b1 == pytest.approx(b1, rel=1e-12)
        assert report.lr_b2 == pytest.approx(b2, rel=1e-12)
        assert report.lr_b3 == pytest.approx(b3, rel=1e-12)

    def test_boot_agrees_with_bootstrap_bartlett(self, food_five, link):
        restriction = Restriction((4,), (0.0,))
        opts = BootstrapOptions(B=40, seed=7)
        report = run_test(
            food_five, link, restriction, methods=("lr", "boot"), boot_opts=opts
        )
        lr_boot, boot_mean, failures = bootstrap_bartlett(
            food_five, link, restriction, opts
        )
        assert report.lr_boot == pytest.approx(lr_boot, rel=1e-12)
        assert report.boot_mean == pytest.approx(boot_mean, rel=1e-12)
        assert report.boot_failures == failures

    def test_lr_only(self, food_five, link):
        report = run_test(food_five, link, Restriction((4,), (0.0,)), methods=("lr",))
        assert report.lr_b1 is None and report.lr_b2 is None and report.lr_b3 is None
        assert report.lr_boot is None and report.boot_mean is None
        assert report.eps_diff_over_q is None
        assert set(report.p_values) == {"lr"}

    def test_b3_only(self, food_five, link):
        report = run_test(food_five, link, Restriction((4,), (0.0,)), methods=("b3",))
        assert report.lr > 0.0  # the raw statistic is always computed
        assert report.eps_diff_over_q is not None
        assert report.lr_b1 is None and report.lr_b2 is None
        assert report.lr_b3 is not None
        assert set(report.p_values) == {"b3"}

    def test_duplicate_methods_deduped(self, food_five, link):
        report = run_test(
            food_five, link, Restriction((4,), (0.0,)), methods=("lr", "lr", "b3")
        )
        assert set(report.p_values) == {"lr", "b3"}

    def test_unknown_method(self, food_five, link):
        with pytest.raises(ValueError, match="unknown method"):
            run_test(food_five, link, Restriction((4,), (0.0,)), methods=("wald",))
        with pytest.raises(ValueError, match="at least one"):
            run_test(food_five, link, Restriction((4,), (0.0,)), methods=())

    def test_p_values_are_chisq_tails(self, food_five, link):
        report = run_test(
            food_five, link, Restriction((4, 5), (0.0, 0.0)), methods=("lr", "b3")
        )
        assert report.p_values["lr"] == pytest.approx(
            chisq_sf(report.lr, 2), rel=1e-14
        )
        assert report.p_values["b3"] == pytest.approx(
            chisq_sf(report.lr_b3, 2), rel=1e-14
        )

    def test_report_is_frozen(self, food_five, link):
        report = run_test(food_five, link, Restriction((4,), (0.0,)), methods=("lr",))
        with pytest.raises(dataclasses.FrozenInstanceError):
            report.lr = 0.0
