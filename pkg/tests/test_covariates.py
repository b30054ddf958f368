from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from omitbias.covariates import (
    BinaryBlock,
    CovariateModel,
    TrueModel,
    attenuation_radical,
    conditional_dispersion,
    load_models,
    models_from_dict,
    models_to_dict,
    omitted_quadratic_form,
)
from omitbias.errors import ContractError, NumericalError


def random_psd(rng: np.random.Generator, k: int) -> np.ndarray:
    a = rng.standard_normal((k, k))
    return a @ a.T + 0.05 * np.eye(k)


class TestCovariateModel:
    def test_equicorrelated(self):
        cov = CovariateModel.equicorrelated(2, 3)
        assert cov.omega.shape == (5, 5)
        assert cov.is_randomized
        assert cov.p_treat == 0.5
        np.testing.assert_array_equal(cov.omega12, 0.5)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(nu_plus=[0, 0], nu_minus=[0, 0], omega=np.eye(2), p=2, q=0),
            dict(nu_plus=[0, 0], nu_minus=[0, 0], omega=[[1, 0.5], [0.4, 1]], p=1, q=1),
            dict(nu_plus=[0, 0], nu_minus=[0, 0], omega=[[1, 2], [2, 1]], p=1, q=1),
            dict(nu_plus=[0, 0], nu_minus=[0, 0], omega=np.eye(2), p=1, q=1, p_treat=1.0),
            dict(nu_plus=[0], nu_minus=[0, 0], omega=np.eye(2), p=1, q=1),
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ContractError):
            CovariateModel(**kwargs)

    def test_immutable_omega(self):
        cov = CovariateModel.equicorrelated(1, 1)
        with pytest.raises(ValueError):
            cov.omega[0, 0] = 2.0


class TestConditionalDispersion:
    def test_no_conditioning(self):
        cov = CovariateModel.equicorrelated(0, 2)
        np.testing.assert_array_equal(conditional_dispersion(cov), [[1, 0.5], [0.5, 1]])

    def test_one_fitted(self):
        cov = CovariateModel.equicorrelated(1, 1)
        np.testing.assert_allclose(conditional_dispersion(cov), [[0.75]])

    def test_two_fitted_three_omitted(self):
        tilde = conditional_dispersion(CovariateModel.equicorrelated(2, 3))
        np.testing.assert_allclose(np.diag(tilde), 2 / 3)
        np.testing.assert_allclose(tilde[~np.eye(3, dtype=bool)], 1 / 6)
        assert omitted_quadratic_form(CovariateModel.equicorrelated(2, 3), [2, 2, 2]) == pytest.approx(12.0)

    def test_singular_fitted_block(self):
        omega = np.ones((3, 3))
        cov = CovariateModel.randomized(omega, p=2)
        with pytest.raises(NumericalError, match="Omega11"):
            conditional_dispersion(cov)

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), p=st.integers(0, 3), q=st.integers(1, 3))
    def test_conditioning_shrinks(self, seed, p, q):
        rng = np.random.default_rng(seed)
        cov = CovariateModel.randomized(random_psd(rng, p + q), p)
        tilde = conditional_dispersion(cov)
        np.testing.assert_allclose(tilde, tilde.T, atol=1e-10)
        assert np.linalg.eigvalsh(tilde).min() > -1e-10
        beta2 = rng.standard_normal(q)
        assert beta2 @ tilde @ beta2 <= beta2 @ cov.omega22 @ beta2 + 1e-10

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_permutation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        p, q = 2, 3
        omega = random_psd(rng, p + q)
        perm_fit = rng.permutation(p)
        perm_omit = p + rng.permutation(q)
        order = np.concatenate([perm_fit, perm_omit])
        base = conditional_dispersion(CovariateModel.randomized(omega, p))
        permuted = conditional_dispersion(CovariateModel.randomized(omega[np.ix_(order, order)], p))
        idx = perm_omit - p
        np.testing.assert_allclose(permuted, base[np.ix_(idx, idx)], atol=1e-10)


class TestAttenuationRadical:
    def test_zero_beta(self):
        assert attenuation_radical(CovariateModel.equicorrelated(0, 2), [0, 0]) == 1.0

    def test_logistic(self):
        cov = CovariateModel.equicorrelated(0, 2)
        assert attenuation_radical(cov, [0.5, 0.5]) == pytest.approx(1.1222, abs=1e-4)

    def test_probit(self):
        cov = CovariateModel.equicorrelated(0, 2)
        assert attenuation_radical(cov, [0.5, 0.5], "probit") == pytest.approx(1.32288, abs=1e-5)

    def test_dimension_mismatch(self):
        with pytest.raises(ContractError):
            attenuation_radical(CovariateModel.equicorrelated(0, 2), [0.5])

    def test_one_iff_explained(self):
        # omitted covariate is an exact copy of the fitted one
        cov = CovariateModel.randomized([[1.0, 1.0], [1.0, 1.0 + 1e-30]], p=1)
        assert attenuation_radical(cov, [3.0]) == pytest.approx(1.0, abs=1e-12)
        assert attenuation_radical(CovariateModel.equicorrelated(1, 1), [0.1]) > 1.0


class TestTrueModel:
    def test_check_against(self):
        model = TrueModel("logistic", 0.0, 0.5, [0.5], [0.5, 0.5])
        with pytest.raises(ContractError):
            model.check_against(CovariateModel.equicorrelated(0, 2))

    def test_bad_link(self):
        with pytest.raises(ContractError):
            TrueModel("cloglog", 0.0, 0.5, [], [0.5])

    def test_bad_theta(self):
        with pytest.raises(ContractError):
            BinaryBlock(0.5, 1.0, [0.0], [0.0])


class TestJson:
    def test_round_trip(self, tmp_path):
        model = TrueModel("probit", 0.2, 0.5, [0.3], [0.5], BinaryBlock(0.4, 0.3, [0.1, 0.2], [-0.1, 0.0]))
        cov = CovariateModel.equicorrelated(1, 1)
        path = tmp_path / "s.json"
        path.write_text(json.dumps(models_to_dict(model, cov)))
        model2, cov2 = load_models(path)
        assert model2.link == "probit"
        assert model2.binary_block.gamma == 0.4
        np.testing.assert_array_equal(cov2.omega, cov.omega)

    def test_defaults(self):
        model, cov = models_from_dict(
            {"omega": [[1]], "p": 0, "q": 1, "link": "logistic", "mu": 0, "alpha": 1, "beta1": [], "beta2": [1]}
        )
        np.testing.assert_array_equal(cov.nu_plus, [0.0])
        assert cov.p_treat == 0.5

    def test_missing_field_named(self):
        with pytest.raises(ContractError, match="beta2"):
            models_from_dict({"omega": [[1]], "p": 0, "q": 1, "link": "logistic", "mu": 0, "alpha": 1, "beta1": []})

    def test_bad_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ContractError, match="not valid JSON"):
            load_models(path)
