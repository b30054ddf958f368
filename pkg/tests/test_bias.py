from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from omitbias.bias import (
    LeastFalse,
    all_methods,
    binary_covariate_least_false,
    figure1_curve,
    gail_least_false_alpha,
    neuhaus_arguments,
    neuhaus_factor,
    neuhaus_least_false_alpha,
    probit_least_false,
    probit_neuhaus_hprime,
    skew_normal_least_false,
)
from omitbias.covariates import BinaryBlock, CovariateModel, TrueModel, omitted_quadratic_form
from omitbias.errors import ContractError
from omitbias.specfun import PROBIT_LOGIT_C, PROBIT_LOGIT_C2


def scenario(p, q, alpha=0.5, beta=0.5, mu=0.0, link="logistic"):
    return TrueModel(link, mu, alpha, [beta] * p, [beta] * q), CovariateModel.equicorrelated(p, q)


class TestSkewNormal:
    @pytest.mark.parametrize(
        "p, q, alpha, beta, expected",
        [(0, 2, 0.5, 0.5, 0.4456), (1, 1, 0.5, 0.5, 0.4845), (2, 3, 1.5, 2.0, 0.661)],
    )
    def test_frozen(self, p, q, alpha, beta, expected):
        assert skew_normal_least_false(*scenario(p, q, alpha, beta)).alpha_star == pytest.approx(expected, abs=5e-4)

    def test_radical_for_table1_corner(self):
        model, cov = scenario(2, 3, 1.5, 2.0)
        assert math.sqrt(1 + PROBIT_LOGIT_C2 * omitted_quadratic_form(cov, model.beta2)) == pytest.approx(2.2694, abs=1e-4)

    def test_zero_beta2(self):
        model = TrueModel("logistic", 0.3, 0.5, [0.7], [0.0])
        lf = skew_normal_least_false(model, CovariateModel.equicorrelated(1, 1))
        assert (lf.mu_star, lf.alpha_star) == (0.3, 0.5)
        np.testing.assert_array_equal(lf.beta1_star, [0.7])

    def test_beta1_formula(self):
        model, cov = scenario(1, 1)
        lf = skew_normal_least_false(model, cov)
        q_tilde = math.sqrt(1 + PROBIT_LOGIT_C2 * 0.5**2 * 0.75)
        assert lf.beta1_star[0] == pytest.approx((0.5 + 0.5 * 0.5) / q_tilde)
        assert lf.beta1_star.shape == (1,)

    def test_unequal_means(self):
        model = TrueModel("logistic", 0.0, 0.5, [], [1.0])
        cov = CovariateModel(nu_plus=[0.5], nu_minus=[-0.5], omega=[[1.0]], p=0, q=1)
        lf = skew_normal_least_false(model, cov)
        q_tilde = math.sqrt(1 + PROBIT_LOGIT_C2)
        # arm means shift alpha by beta2 * (nu+ - nu-)/2 before attenuation
        assert lf.alpha_star == pytest.approx((0.5 + 0.5) / q_tilde)
        assert lf.mu_star == pytest.approx(0.0, abs=1e-15)

    def test_rejects_probit(self):
        with pytest.raises(ContractError):
            skew_normal_least_false(*scenario(0, 2, link="probit"))

    @pytest.mark.parametrize("mu", [-4.0, 0.0, 4.0])
    def test_mu_invariant(self, mu):
        assert skew_normal_least_false(*scenario(1, 1, mu=mu)).alpha_star == pytest.approx(0.5 / 1.0320, abs=1e-3)
        assert probit_least_false(*scenario(0, 2, mu=mu, link="probit")).alpha_star == pytest.approx(0.37796, abs=1e-5)


class TestGail:
    def test_frozen(self):
        assert gail_least_false_alpha(*scenario(0, 2)).alpha_star == pytest.approx(0.40816, abs=1e-5)
        assert gail_least_false_alpha(*scenario(0, 2, beta=2.0)).alpha_star == pytest.approx(-0.96951, abs=1e-5)
        assert gail_least_false_alpha(*scenario(0, 2, beta=2.0, link="probit", mu=3.0)).alpha_star == pytest.approx(-2.5)

    def test_needs_p_zero(self):
        with pytest.raises(ContractError, match="p = 0|p=0|no fitted"):
            gail_least_false_alpha(*scenario(1, 1))

    def test_mu_none(self):
        assert gail_least_false_alpha(*scenario(0, 2)).mu_star is None


class TestNeuhaus:
    def test_factor_one_at_a_one(self):
        assert neuhaus_factor(1.7, 1.0) == 1.0

    def test_factor_at_h_zero(self):
        a = 1 / math.sqrt(1 + 2 * PROBIT_LOGIT_C2 * 0.75)
        assert a == pytest.approx(0.81144, abs=1e-5)
        assert neuhaus_factor(0.0, a) == pytest.approx(math.atan(a) / (math.pi / 4), abs=1e-10)

    def test_table2_mu2(self):
        h = PROBIT_LOGIT_C * 2 / 1.1222
        assert h == pytest.approx(1.04805, abs=1e-4)
        assert 0.5 * neuhaus_factor(h, 0.81144) == pytest.approx(0.452, abs=5e-4)

    @pytest.mark.parametrize("a", [0.0, -0.1, 1.01])
    def test_factor_contract(self, a):
        with pytest.raises(ContractError):
            neuhaus_factor(0.3, a)

    @pytest.mark.parametrize(
        "p, q, beta, mu, expected",
        [(0, 2, 0.5, 0.0, 0.43397), (1, 1, 0.5, 0.0, 0.48060), (0, 2, 0.5, 2.0, 0.45151), (0, 2, 2.0, 4.0, 0.22691)],
    )
    def test_frozen(self, p, q, beta, mu, expected):
        assert neuhaus_least_false_alpha(*scenario(p, q, beta=beta, mu=mu)).alpha_star == pytest.approx(expected, abs=1e-5)

    def test_zero_beta2(self):
        model = TrueModel("logistic", 1.0, 0.5, [], [0.0, 0.0])
        cov = CovariateModel.equicorrelated(0, 2)
        assert neuhaus_arguments(model, cov)[1] == 1.0
        assert neuhaus_least_false_alpha(model, cov).alpha_star == 0.5


class TestProbit:
    def test_frozen(self):
        assert probit_least_false(*scenario(0, 2, link="probit")).alpha_star == pytest.approx(0.37796, abs=1e-5)
        assert probit_least_false(*scenario(0, 2, beta=2.0, link="probit")).alpha_star == pytest.approx(0.13868, abs=1e-5)

    def test_hprime(self):
        assert probit_neuhaus_hprime(*scenario(0, 2, link="probit")) == pytest.approx(0.75593, abs=1e-5)
        assert probit_neuhaus_hprime(*scenario(0, 2, beta=2.0, link="probit")) == pytest.approx(0.27735, abs=1e-5)

    def test_hprime_equals_exact(self):
        model, cov = scenario(2, 3, alpha=1.3, beta=0.7, link="probit")
        assert model.alpha * probit_neuhaus_hprime(model, cov) == pytest.approx(probit_least_false(model, cov).alpha_star)


class TestBridge:
    @settings(max_examples=50, deadline=None)
    @given(beta=st.floats(0.01, 3.0), rho=st.floats(-0.33, 0.9), p=st.integers(0, 2))
    def test_logistic_probit_bridge(self, beta, rho, p):
        cov = CovariateModel.equicorrelated(p, 2, rho=rho)
        logistic = TrueModel("logistic", 0.0, 0.5, [beta] * p, [beta, beta])
        probit = TrueModel("probit", 0.0, 0.5, [beta] * p, [PROBIT_LOGIT_C * beta] * 2)
        assert skew_normal_least_false(logistic, cov).alpha_star == pytest.approx(
            probit_least_false(probit, cov).alpha_star, rel=1e-12
        )


class TestBinaryCovariate:
    def test_no_omitted_effect(self):
        model = TrueModel("logistic", 0.1, 0.5, [], [0.0], BinaryBlock(0.5, 0.5, [0.3], [-0.3]))
        lf = binary_covariate_least_false(model, CovariateModel.equicorrelated(0, 1))
        assert (lf.alpha_star, lf.gamma_star) == (0.5, 0.5)

    def test_pure_division(self):
        model = TrueModel("logistic", 0.0, 0.5, [], [0.5, 0.5], BinaryBlock(0.8, 0.4, [0.2, 0.2], [0.2, 0.2]))
        cov = CovariateModel.equicorrelated(0, 2)
        lf = binary_covariate_least_false(model, cov)
        assert lf.gamma_star == pytest.approx(0.8 / 1.1222, abs=1e-4)
        assert lf.alpha_star == pytest.approx(0.5 / 1.1222, abs=1e-4)

    def test_hand_value(self):
        model = TrueModel("logistic", 0.0, 0.5, [], [1.0], BinaryBlock(0.0, 0.5, [0.5], [-0.5]))
        lf = binary_covariate_least_false(model, CovariateModel.equicorrelated(0, 1))
        assert lf.gamma_star == pytest.approx(0.5 / math.sqrt(1 + PROBIT_LOGIT_C2))

    def test_needs_block(self):
        with pytest.raises(ContractError):
            binary_covariate_least_false(*scenario(0, 2))


class TestFigure1:
    def test_centre(self):
        (_, value), = figure1_curve(0.8911, [0.5])
        assert value == pytest.approx(0.86767, abs=5e-4)

    @pytest.mark.parametrize("inv", [0.7, 0.8, 0.9, 0.95])
    def test_shape(self, inv):
        grid = [0.01, 0.2, 0.5, 0.8, 0.99]
        vals = [v for _, v in figure1_curve(inv, grid)]
        assert vals[0] == pytest.approx(vals[-1], abs=1e-12)
        assert vals[1] == pytest.approx(vals[3], abs=1e-12)
        assert vals[2] < inv < vals[-1]
        assert vals[2] == min(vals)

    def test_constant_at_one(self):
        assert all(v == 1.0 for _, v in figure1_curve(1.0, [0.1, 0.5, 0.9]))

    def test_grid_contract(self):
        with pytest.raises(ContractError):
            figure1_curve(0.8, [0.0, 0.5])


class TestAllMethods:
    def test_logistic_p0(self):
        assert set(all_methods(*scenario(0, 2))) == {"skew_normal", "neuhaus", "gail"}

    def test_probit_p1(self):
        assert set(all_methods(*scenario(1, 1, link="probit"))) == {"probit_exact", "neuhaus"}

    def test_least_false_method_checked(self):
        with pytest.raises(ContractError):
            LeastFalse(0.0, 0.0, np.zeros(0), "bogus", "logistic")
