"""Loss values, gradients and Hessians of the three objectives."""
import numpy as np
import pytest
from scipy.special import expit

from helpers import central_diff, loss_draws, rel_err
from zitboost import losses as L
from zitboost.tweedie import tweedie_logpdf, zitw_logpdf


def _state(log_mu, w_prob=None):
    return L.ScoreState(w_mean=log_mu, w_prob=w_prob)


@pytest.fixture(params=[False, True], ids=["zero", "positive"])
def draws(request):
    return loss_draws(np.random.default_rng(11), 500, request.param)


class TestFiniteDifferences:
    """Analytic derivatives against centred differences of the loss (for
    gradients) and of the analytic gradient (for Hessians)."""

    def _check(self, loss, grad_hess, x0):
        g, h = grad_hess(x0)
        assert rel_err(central_diff(loss, x0), g).max() < 1e-6
        assert rel_err(central_diff(lambda x: grad_hess(x)[0], x0), h).max() < 1e-5

    def test_tweedie(self, draws):
        y, lm, phi, p, _, _ = draws
        self._check(lambda x: L.tweedie_loss(y, _state(x), phi, p, full=False),
                    lambda x: L.tweedie_grad_hess(y, _state(x), phi, p), lm)

    def test_s1_mean(self, draws):
        y, lm, phi, p, w, _ = draws
        self._check(lambda x: L.s1_loss(y, _state(x, w), phi, p, full=False),
                    lambda x: L.s1_grad_hess_mean(y, _state(x, w), phi, p), lm)

    def test_s1_prob(self, draws):
        y, lm, phi, p, w, _ = draws
        self._check(lambda x: L.s1_loss(y, _state(lm, x), phi, p, full=False),
                    lambda x: L.s1_grad_hess_prob(y, _state(lm, x), phi, p), w)

    def test_s2(self, draws):
        y, lm, phi, p, _, gam = draws
        self._check(lambda x: L.s2_loss(y, _state(x), phi, p, gam, full=False),
                    lambda x: L.s2_grad_hess(y, _state(x), phi, p, gam), lm)


class TestLossValues:
    def test_full_tweedie_loss_is_negative_log_density(self, rng):
        y = np.where(rng.random(30) < 0.4, 0.0, rng.gamma(2.0, 1.0, 30))
        lm = rng.uniform(-1, 1, 30)
        got = L.tweedie_loss(y, _state(lm), 1.2, 1.6)
        assert np.allclose(got, -tweedie_logpdf(y, np.exp(lm), 1.2, 1.6), rtol=1e-12, atol=1e-12)

    def test_full_s1_loss_is_negative_log_density(self, rng):
        y = np.where(rng.random(30) < 0.4, 0.0, rng.gamma(2.0, 1.0, 30))
        lm, w = rng.uniform(-1, 1, 30), rng.uniform(-3, 3, 30)
        got = L.s1_loss(y, _state(lm, w), 0.9, 1.4)
        want = -zitw_logpdf(y, np.exp(lm), 0.9, 1.4, expit(w))
        assert np.allclose(got, want, rtol=1e-12, atol=1e-12)

    def test_full_s2_loss_is_negative_log_density(self, rng):
        y = np.where(rng.random(30) < 0.4, 0.0, rng.gamma(2.0, 1.0, 30))
        lm = rng.uniform(-2, 2, 30)
        got = L.s2_loss(y, _state(lm), 1.0, 1.5, 1.3)
        want = -zitw_logpdf(y, np.exp(lm), 1.0, 1.5, 1.0 / (1.0 + np.exp(lm) ** 1.3))
        assert np.allclose(got, want, rtol=1e-12, atol=1e-12)

    def test_exposure_enters_as_offset(self):
        a = L.tweedie_loss(1.0, L.ScoreState(w_mean=np.log(2.0), exposure=3.0), 1.0, 1.5)
        b = L.tweedie_loss(1.0, L.ScoreState(w_mean=np.log(6.0)), 1.0, 1.5)
        assert a == pytest.approx(b, rel=1e-14)

    def test_extreme_scores_stay_finite(self):
        y = np.array([0.0, 0.0, 2.0, 2.0])
        lm = np.array([-15.0, 15.0, -15.0, 15.0])
        w = np.array([30.0, -30.0, -30.0, 30.0])
        for out in (L.s1_loss(y, _state(lm, w), 1.0, 1.5), *L.s1_grad_hess_prob(
                y, _state(lm, w), 1.0, 1.5), *L.s2_grad_hess(y, _state(lm), 1.0, 1.5, 2.0)):
            assert np.all(np.isfinite(out))

    def test_negative_target_rejected(self):
        with pytest.raises(ValueError):
            L.tweedie_loss(np.array([-1.0]), _state(np.zeros(1)), 1.0, 1.5)

    def test_s1_requires_prob_score(self):
        with pytest.raises(ValueError, match="w_prob"):
            L.s1_loss(np.zeros(2), _state(np.zeros(2)), 1.0, 1.5)


class TestReparameterization:
    """Scenario 2 is scenario 1 with ``w_prob = -gamma * log(mu)``."""

    def test_loss_identity(self, draws):
        y, lm, phi, p, _, gam = draws
        s1 = L.s1_loss(y, _state(lm, -gam * lm), phi, p, full=False)
        s2 = L.s2_loss(y, _state(lm), phi, p, gam, full=False)
        assert np.allclose(s1, s2, rtol=1e-12, atol=1e-12)

    def test_gradient_chain_rule(self, draws):
        y, lm, phi, p, _, gam = draws
        st = _state(lm, -gam * lm)
        gm, _ = L.s1_grad_hess_mean(y, st, phi, p)
        gp, _ = L.s1_grad_hess_prob(y, st, phi, p)
        g2, _ = L.s2_grad_hess(y, _state(lm), phi, p, gam)
        assert np.allclose(g2, gm - gam * gp, rtol=1e-10, atol=1e-12)

    def test_gamma_zero_is_even_inflation(self, rng):
        y = np.where(rng.random(50) < 0.5, 0.0, rng.gamma(2.0, 1.0, 50))
        lm = rng.uniform(-2, 2, 50)
        s2 = L.s2_loss(y, _state(lm), 1.0, 1.5, 0.0)
        s1 = L.s1_loss(y, _state(lm, np.zeros(50)), 1.0, 1.5)
        assert np.allclose(s1, s2, rtol=1e-13, atol=1e-13)
        assert np.allclose(L.implied_q(lm, 0.0), 0.5)

    def test_s1_reduces_to_tweedie_as_q_vanishes(self, draws):
        y, lm, phi, p, _, _ = draws
        # keep rows whose Poisson zero mass exp(-delta) dwarfs q = sigmoid(-300)
        keep = np.exp((2 - p) * lm) / (phi * (2 - p)) < 200
        y, lm, phi, p = y[keep], lm[keep], phi[keep], p[keep]
        st = _state(lm, np.full(lm.shape, -300.0))
        assert np.allclose(L.s1_loss(y, st, phi, p, full=False),
                           L.tweedie_loss(y, st, phi, p, full=False), rtol=1e-12, atol=1e-12)
        g1, h1 = L.s1_grad_hess_mean(y, st, phi, p)
        g0, h0 = L.tweedie_grad_hess(y, st, phi, p)
        assert np.allclose(g1, g0, rtol=1e-9, atol=1e-12)
        assert np.allclose(h1, h0, rtol=1e-9, atol=1e-12)

    def test_intermediates(self, rng):
        lm = rng.uniform(-1, 1, 10)
        st = _state(lm, rng.uniform(-1, 1, 10))
        s1 = L.s1_intermediates(st, 1.3, 1.5)
        assert np.allclose(s1.delta_aux * 0.5, s1.beta_aux)
        assert np.allclose(s1.alpha_aux, (1 - expit(st.w_prob)) * np.exp(-s1.delta_aux))
        s2 = L.s2_intermediates(st, 1.3, 1.5, 2.0)
        assert np.allclose(s2.eta, 2.0 - s1.beta_aux)
        assert np.allclose(s2.zeta, np.exp(lm) ** 2 * np.exp(-s1.delta_aux))
        assert np.allclose(s2.kappa, 2.0 * np.exp(lm) ** 2 / (1 + np.exp(lm) ** 2))
