"""
测试 processes.estimation 模块：矩估计、E/M 步、EM 拟合、观测信息矩阵与正态基准。
"""
import logging

import numpy as np
import pytest

from nef_mp.core.context import EStepRecord, FitMethod, NefParams
from nef_mp.core.exceptions import (
    DomainError,
    InadmissibleEstimateError,
    MStepDomainError,
    NumericalFailureError,
    UnsupportedFamilyError,
)
from nef_mp.core.families import GAMMA, GHS, INVERSE_GAUSSIAN
from nef_mp.core.nef import nef_log_pdf, nef_raw_moments, posterior_expectation_quad, sample_nef
from nef_mp.processes import estimation
from nef_mp.processes.estimation import (
    _initial_params,
    e_step,
    em_fit,
    fallback_init,
    loglik,
    m_step,
    method_of_moments,
    mm_from_moments,
    normal_mle,
    numerical_observed_information,
    observed_information,
    standard_errors,
)

FAMILIES = [GAMMA, INVERSE_GAUSSIAN]
TRUE = NefParams(mu=3.0, sigma2=4.0, phi=2.0)


def _posterior_funcs(fam):
    """E 步 8 个期望对应的被积函数，g 为混合族的 g(w)"""
    g = fam.g
    return {
        "alpha": lambda w: w,
        "gamma": lambda w: 1.0 / w,
        "delta": g,
        "lambda2": lambda w: w * w,
        "tau": lambda w: w * g(w),
        "nu": lambda w: g(w) ** 2,
        "rho": lambda w: w**-2.0,
        "varphi": lambda w: g(w) / w,
    }


@pytest.fixture(scope="module")
def samples():
    """每个混合族一个 n=500 的合成样本"""
    return {
        fam.tag: sample_nef(TRUE, fam, 500, np.random.default_rng(2024)) for fam in FAMILIES
    }


# region 矩估计
class TestMethodOfMoments:
    """矩估计测试"""

    @pytest.mark.parametrize("fam", FAMILIES, ids=lambda f: f.name)
    @pytest.mark.parametrize("mu", [-2.0, 0.5, 3.0])
    @pytest.mark.parametrize("sigma2", [0.5, 4.0])
    @pytest.mark.parametrize("phi", [0.7, 2.0, 10.0])
    def test_exact_moments_recover_parameters(self, fam, mu, sigma2, phi):
        """测试总体矩回代得到生成参数"""
        p = NefParams(mu, sigma2, phi)
        est, multiple = mm_from_moments(*nef_raw_moments(p, fam), fam)
        np.testing.assert_allclose(est.as_array(), p.as_array(), rtol=1e-10)
        assert not multiple

    def test_zero_mean_has_no_root(self):
        """μ=0 时二次方程退化，无可行根"""
        with pytest.raises(InadmissibleEstimateError):
            mm_from_moments(*nef_raw_moments(NefParams(0.0, 1.0, 2.0), GAMMA), GAMMA)

    def test_fit_result(self, samples):
        result = method_of_moments(samples[GAMMA.tag], GAMMA)
        assert result.method == FitMethod.MM
        assert result.iterations == 0
        assert result.loglik is None
        assert result.params.mu == pytest.approx(np.mean(samples[GAMMA.tag]))

    def test_negative_skew_is_inadmissible(self, samples, caplog):
        """负偏数据在逆高斯族下无可行根，EM 初值回退到 (M₁, 方差, 1)"""
        y = 20.0 - samples[INVERSE_GAUSSIAN.tag]
        with pytest.raises(InadmissibleEstimateError):
            method_of_moments(y, INVERSE_GAUSSIAN)
        with caplog.at_level(logging.WARNING):
            init, multiple = _initial_params(y, INVERSE_GAUSSIAN)
        assert init == fallback_init(y)
        assert init.phi == 1.0
        assert not multiple
        assert "矩估计不可行" in caplog.text

    @pytest.mark.parametrize("data", [[1.0, 2.0], [3.0, 3.0, 3.0], [1.0, np.nan, 2.0]])
    def test_invalid_data(self, data):
        with pytest.raises(DomainError):
            method_of_moments(data, GAMMA)


# endregion


# region E 步与 M 步
class TestEStep:
    """E 步测试"""

    @pytest.mark.parametrize("fam", FAMILIES, ids=lambda f: f.name)
    @pytest.mark.parametrize(
        "p", [NefParams(3.0, 4.0, 2.0), NefParams(-1.0, 0.5, 0.8), NefParams(0.5, 2.0, 6.0)], ids=str
    )
    @pytest.mark.parametrize("y", [-4.0, -0.3, 1.0, 7.5])
    def test_matches_posterior_quadrature(self, fam, p, y):
        """测试全部 8 个后验期望与混合积分一致"""
        record = e_step([y], p, fam, full=True).record(0)
        for name, func in _posterior_funcs(fam).items():
            expected = posterior_expectation_quad(p, fam, y, func)
            assert record[name] == pytest.approx(expected, rel=1e-6, abs=1e-8), name

    def test_ig_tau_is_constant(self):
        """逆高斯族 E[W·g(W)|y] = −½，与 y 无关"""
        record = e_step(np.linspace(-5.0, 5.0, 11), TRUE, INVERSE_GAUSSIAN, full=True)
        np.testing.assert_array_equal(record.tau, -0.5)
        np.testing.assert_allclose(record.delta, -0.5 * record.gamma)

    def test_log_moment_algorithms_agree(self, samples):
        """测试 Gamma 族对数矩的阶数导数闭式与积分一致"""
        y = samples[GAMMA.tag][:20]
        closed = e_step(y, TRUE, GAMMA, full=True)
        quad = e_step(y, TRUE, GAMMA, full=True, log_moments="quadrature")
        for name in ("delta", "tau", "nu", "varphi"):
            np.testing.assert_allclose(getattr(closed, name), getattr(quad, name), rtol=1e-6, atol=1e-10)

    @pytest.mark.parametrize(
        "p", [NefParams(3.0, 4.0, 2.0), NefParams(-1.0, 0.5, 0.8), NefParams(0.5, 2.0, 6.0)], ids=str
    )
    def test_gamma_log_square_matches_quadrature(self, p):
        """测试 E[(log W)²|y] 的阶数二阶导数闭式与 GIG 积分一致"""
        y = np.array([-2.0, -0.5, 0.5, 1.5, 3.0, 6.0])
        closed = e_step(y, p, GAMMA, full=True)
        quad = e_step(y, p, GAMMA, full=True, log_moments="quadrature")
        np.testing.assert_allclose(closed.nu, quad.nu, rtol=1e-6, atol=1e-10)

    def test_partial_record(self):
        record = e_step([1.0, 2.0], TRUE, GAMMA)
        assert not record.full
        assert len(record) == 2

    def test_improper_zero_observation(self, caplog):
        """φ ≤ ½ 且 y=0 时改在 y_eps 处用积分计算"""
        p = NefParams(1.0, 1.0, 0.4)
        with caplog.at_level(logging.WARNING):
            record = e_step([0.0, 1.0], p, GAMMA)
        assert np.all(np.isfinite(record.alpha))
        assert record.alpha[0] > 0
        assert "不可积" in caplog.text

    def test_unknown_algorithm(self):
        with pytest.raises(DomainError):
            e_step([1.0], TRUE, GAMMA, log_moments="series")

    def test_ghs_unsupported(self):
        with pytest.raises(UnsupportedFamilyError):
            e_step([1.0], TRUE, GHS)


class TestMStep:
    """M 步测试"""

    def _record(self, alpha, gamma, delta):
        return EStepRecord(alpha=np.asarray(alpha), gamma=np.asarray(gamma), delta=np.asarray(delta))

    def test_closed_form(self):
        """测试 μ = Σy/Σα 与 σ² 的闭式"""
        y = np.array([1.0, 2.0, 4.0])
        record = self._record([1.0, 2.0, 3.0], [2.0, 1.0, 0.5], [-1.0, -1.0, -1.0])
        p = m_step(y, record, GAMMA)
        mu = 7.0 / 6.0
        assert p.mu == pytest.approx(mu)
        assert p.sigma2 == pytest.approx(np.mean(y * y * record.gamma - 2.0 * mu * y + mu * mu * record.alpha))
        # x = b(ξ₀) − ξ₀·mean(α) − mean(δ) = 0 + 2 + 1 = 3
        assert GAMMA.d1(p.phi) == pytest.approx(3.0, rel=1e-10)

    def test_inverse_argument_out_of_range(self):
        """d′ 反函数参数越界时抛出 MStepDomainError 并携带迭代编号"""
        record = self._record([1.0, 1.0, 1.0], [1.0, 1.0, 1.0], [0.5, 0.5, 0.5])
        with pytest.raises(MStepDomainError) as info:
            m_step([1.0, 2.0, 3.0], record, GAMMA, iteration=7)
        assert info.value.iteration == 7
        assert "迭代 7" in str(info.value)

    def test_negative_variance(self):
        record = self._record([1.0, 1.0, 1.0], [0.0, 0.0, 0.0], [-5.0, -5.0, -5.0])
        with pytest.raises(MStepDomainError):
            m_step([1.0, 2.0, 3.0], record, GAMMA)

    def test_length_mismatch(self):
        with pytest.raises(DomainError):
            m_step([1.0, 2.0], self._record([1.0], [1.0], [0.0]), GAMMA)


# endregion


# region EM
class TestEmFit:
    """EM 拟合测试"""

    @pytest.mark.parametrize("fam", FAMILIES, ids=lambda f: f.name)
    def test_ascent_and_convergence(self, fam, samples):
        """测试对数似然不降、收敛且估计值在 4 个标准误以内"""
        result = em_fit(samples[fam.tag], fam)
        assert result.method == FitMethod.EM
        assert result.converged
        assert 1 <= result.iterations <= 500
        assert len(result.loglik_trace) == result.iterations + 1
        assert result.ascent_violations(1e-8) == 0
        assert result.std_errors is not None
        err = np.abs(result.params.as_array() - TRUE.as_array())
        assert np.all(err < 4.0 * np.asarray(result.std_errors))

    def test_loglik_matches_trace(self, samples):
        y = samples[GAMMA.tag]
        result = em_fit(y, GAMMA, information=False)
        assert result.information is None
        assert result.loglik == pytest.approx(loglik(y, result.params, GAMMA), rel=1e-12)

    def test_max_iter_respected(self, samples):
        result = em_fit(samples[GAMMA.tag], GAMMA, epsilon=1e-14, max_iter=3, information=False)
        assert result.iterations == 3
        assert not result.converged

    def test_fixed_point(self, samples):
        """测试收敛点处再做一次 E/M 步参数几乎不变"""
        y = samples[GAMMA.tag]
        result = em_fit(y, GAMMA, epsilon=1e-8, max_iter=5000, information=False)
        again = m_step(y, e_step(y, result.params, GAMMA), GAMMA)
        change = np.linalg.norm(again.as_array() - result.params.as_array())
        assert change / np.linalg.norm(result.params.as_array()) < 1e-4

    def test_scale_equivariance(self, samples):
        """测试 y → c·y 时 (μ̂, σ̂²) → (cμ̂, c²σ̂²)，φ̂ 不变"""
        y = samples[INVERSE_GAUSSIAN.tag]
        c = 2.5
        kwargs = dict(epsilon=1e-10, max_iter=5000, information=False)
        base = em_fit(y, INVERSE_GAUSSIAN, **kwargs).params
        scaled = em_fit(c * y, INVERSE_GAUSSIAN, **kwargs).params
        np.testing.assert_allclose(
            scaled.as_array(), [c * base.mu, c * c * base.sigma2, base.phi], rtol=1e-6
        )

    def test_numerical_failure(self, samples, monkeypatch):
        """测试对数似然非有限时抛出 NumericalFailureError 并携带迭代编号"""
        calls = {"n": 0}
        original = estimation.loglik

        def broken(data, p, fam):
            calls["n"] += 1
            return original(data, p, fam) if calls["n"] == 1 else float("nan")

        monkeypatch.setattr(estimation, "loglik", broken)
        with pytest.raises(NumericalFailureError) as info:
            em_fit(samples[GAMMA.tag], GAMMA)
        assert info.value.iteration == 1

    @pytest.mark.parametrize("kwargs", [{"epsilon": 0.0}, {"max_iter": 0}])
    def test_invalid_settings(self, samples, kwargs):
        with pytest.raises(DomainError):
            em_fit(samples[GAMMA.tag], GAMMA, **kwargs)

    def test_ghs_unsupported(self, samples):
        with pytest.raises(UnsupportedFamilyError):
            em_fit(samples[GAMMA.tag], GHS)


class TestLoglik:
    """对数似然测试"""

    def test_matches_quadrature(self):
        y = np.array([-3.0, -1.2, -0.1, 0.4, 1.0, 2.2, 3.0, 4.7, 8.0, 12.5])
        expected = np.sum(nef_log_pdf(TRUE, GAMMA, y, method="quadrature"))
        assert loglik(y, TRUE, GAMMA) == pytest.approx(expected, rel=1e-8)


# endregion


# region 观测信息矩阵
class TestObservedInformation:
    """Louis 观测信息矩阵测试"""

    @pytest.mark.parametrize("fam", FAMILIES, ids=lambda f: f.name)
    @pytest.mark.parametrize("p", [TRUE, NefParams(2.5, 5.0, 1.5)], ids=str)
    def test_matches_numerical_hessian(self, fam, p, samples):
        """测试与对数似然数值负 Hessian 一致（任意参数点）"""
        y = samples[fam.tag]
        info = observed_information(y, p, fam)
        numeric = numerical_observed_information(y, p, fam)
        np.testing.assert_allclose(info, numeric, rtol=1e-2, atol=1e-3 * np.abs(numeric).max())

    def test_symmetric(self, samples):
        info = observed_information(samples[GAMMA.tag], TRUE, GAMMA)
        np.testing.assert_allclose(info, info.T)

    def test_two_term_form_at_fixed_point(self, samples):
        """驻点处两项形式与一般形式相同"""
        y = samples[INVERSE_GAUSSIAN.tag]
        fit = em_fit(y, INVERSE_GAUSSIAN, epsilon=1e-10, max_iter=5000, information=False)
        full = observed_information(y, fit.params, INVERSE_GAUSSIAN)
        two_term = observed_information(y, fit.params, INVERSE_GAUSSIAN, include_score_term=False)
        np.testing.assert_allclose(two_term, full, rtol=1e-3, atol=1e-3)


class TestStandardErrors:
    """标准误测试"""

    def test_diagonal(self):
        assert standard_errors(np.diag([4.0, 25.0, 100.0])) == pytest.approx((0.5, 0.2, 0.1))

    @pytest.mark.parametrize(
        "info",
        [
            np.zeros((3, 3)),
            np.diag([1.0, -1.0, 1.0]),
            np.array([[1.0, np.nan, 0.0], [np.nan, 1.0, 0.0], [0.0, 0.0, 1.0]]),
        ],
    )
    def test_unavailable(self, info):
        assert standard_errors(info) is None


# endregion


class TestNormalMle:
    """正态基准模型测试"""

    def test_values(self):
        y = np.array([1.0, 2.0, 3.0, 4.0])
        result = normal_mle(y)
        assert result.method == FitMethod.NORMAL_MLE
        assert result.params.mu == 2.5
        assert result.params.sigma2 == pytest.approx(1.25)
        assert result.loglik == pytest.approx(-2.0 * (np.log(2.0 * np.pi * 1.25) + 1.0))
        assert result.std_errors == pytest.approx((np.sqrt(1.25 / 4.0), 1.25 * np.sqrt(0.5)))

    def test_degenerate(self):
        with pytest.raises(DomainError):
            normal_mle([1.0, 1.0, 1.0])
