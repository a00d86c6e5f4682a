"""
测试 core.sums 模块：混合泊松计数概率、正规化随机和与 KS 距离。
"""
import numpy as np
import pytest
from scipy import stats

from nef_mp.core.context import MpCountParams, NefParams, SummandSpec
from nef_mp.core.exceptions import DomainError, UnsupportedFamilyError
from nef_mp.core.families import GAMMA, GHS, INVERSE_GAUSSIAN
from nef_mp.core.nef import sample_nef
from nef_mp.core.sums import (
    ks_distance,
    mp_moments,
    mp_pmf,
    pmf_truncation,
    sample_mp_count,
    sample_normalized_sum,
    sample_normalized_sums,
)


# region 计数概率
class TestCountPmf:
    """混合泊松计数概率测试"""

    @pytest.mark.parametrize("fam", [GAMMA, INVERSE_GAUSSIAN], ids=lambda f: f.name)
    @pytest.mark.parametrize("lam, phi", [(2.0, 2.0), (10.0, 2.0)])
    def test_normalized(self, fam, lam, phi):
        """测试概率在截断点内求和为 1"""
        c = MpCountParams(lam=lam, phi=phi, family=fam)
        n = np.arange(pmf_truncation(c) + 1)
        assert np.sum(mp_pmf(c, n)) == pytest.approx(1.0, abs=1e-10)

    def test_pig_mean(self):
        """测试 PIG(λ=2, φ=2) 均值为 λ"""
        c = MpCountParams(lam=2.0, phi=2.0, family=INVERSE_GAUSSIAN)
        n = np.arange(pmf_truncation(c) + 1)
        assert np.sum(n * mp_pmf(c, n)) == pytest.approx(2.0, abs=1e-8)

    def test_pig_bessel_matches_quadrature(self):
        """测试 PIG Bessel 闭式与混合积分一致"""
        c = MpCountParams(lam=3.0, phi=1.5, family=INVERSE_GAUSSIAN)
        n = np.arange(0, 30)
        np.testing.assert_allclose(mp_pmf(c, n, method="bessel"), mp_pmf(c, n), rtol=1e-8)

    def test_nb_matches_quadrature(self):
        c = MpCountParams(lam=5.0, phi=2.5, family=GAMMA)
        n = np.arange(0, 30)
        np.testing.assert_allclose(mp_pmf(c, n), mp_pmf(c, n, method="quadrature"), rtol=1e-8)

    def test_moments(self):
        c = MpCountParams(lam=4.0, phi=2.0, family=GAMMA)
        assert mp_moments(c) == (4.0, 4.0 + 16.0 / 2.0)

    @pytest.mark.parametrize("n", [-1, 1.5])
    def test_invalid_count(self, n):
        with pytest.raises(DomainError):
            mp_pmf(MpCountParams(lam=1.0, phi=1.0, family=GAMMA), n)

    def test_ghs_unsupported(self):
        with pytest.raises(UnsupportedFamilyError):
            mp_pmf(MpCountParams(lam=1.0, phi=1.0, family=GHS), 0)

    def test_sample_count_mean(self):
        c = MpCountParams(lam=20.0, phi=2.0, family=GAMMA)
        counts = sample_mp_count(c, np.random.default_rng(5), size=50_000)
        _, var = mp_moments(c)
        assert counts.mean() == pytest.approx(20.0, abs=4.0 * np.sqrt(var / 50_000))
        assert isinstance(sample_mp_count(c, np.random.default_rng(5)), int)

    @pytest.mark.parametrize("fam", [GAMMA, INVERSE_GAUSSIAN], ids=lambda f: f.name)
    @pytest.mark.parametrize("lam, phi", [(1.5, 0.8), (5.0, 2.0), (12.0, 4.0)])
    def test_sample_count_goodness_of_fit(self, fam, lam, phi):
        """测试抽样计数的频数与 mp_pmf 一致（卡方拟合优度检验，期望频数 ≥ 5 的格子，尾部合并）"""
        c = MpCountParams(lam=lam, phi=phi, family=fam)
        size = 20_000
        counts = sample_mp_count(c, np.random.default_rng(2024), size=size)
        probs = np.asarray(mp_pmf(c, np.arange(pmf_truncation(c) + 1)))
        last = int(np.argmax(size * probs < 5.0)) - 1
        expected = size * probs[: last + 1]
        observed = np.bincount(counts, minlength=last + 2)
        expected = np.append(expected, size - expected.sum())
        observed = np.append(observed[: last + 1], observed[last + 1 :].sum())
        result = stats.chisquare(observed, expected)
        assert result.pvalue > 1e-3


# endregion


# region 正规化随机和
class TestNormalizedSums:
    """正规化随机和测试"""

    def test_moments(self):
        """测试 E S̃ = μ，Var S̃ = σ² + μ²(1/λ + b″/φ)"""
        lam, phi = 50.0, 2.0
        c = MpCountParams(lam=lam, phi=phi, family=GAMMA)
        s = SummandSpec.exponential(1.0)
        sums = sample_normalized_sums(c, s, 20_000, np.random.default_rng(9))
        expected_var = 1.0 + (1.0 / lam + 1.0 / phi)
        assert sums.mean() == pytest.approx(1.0, abs=4.0 * np.sqrt(expected_var / 20_000))
        assert sums.var(ddof=1) == pytest.approx(expected_var, abs=0.1)

    def test_zero_mean_summands(self):
        """μ=0 时 S̃ = ΣX/√λ"""
        lam = 9.0
        c = MpCountParams(lam=lam, phi=1.0, family=INVERSE_GAUSSIAN)
        s = SummandSpec.normal(0.0, 1.0)
        sums = sample_normalized_sums(c, s, 5, np.random.default_rng(2))

        rng = np.random.default_rng(2)
        counts = sample_mp_count(c, rng, size=5)
        x = s.draw(rng, int(counts.sum()))
        expected = [chunk.sum() / 3.0 for chunk in np.split(x, np.cumsum(counts)[:-1])]
        np.testing.assert_allclose(sums, expected, rtol=1e-12, atol=1e-15)

    def test_empty_count_gives_zero(self):
        """N=0 时和为 0"""
        c = MpCountParams(lam=1e-9, phi=1.0, family=GAMMA)
        sums = sample_normalized_sums(c, SummandSpec.exponential(1.0), 50, np.random.default_rng(0))
        np.testing.assert_array_equal(sums, 0.0)
        assert sample_normalized_sum(c, SummandSpec.exponential(1.0), np.random.default_rng(0)) == 0.0

    def test_invalid_size(self):
        c = MpCountParams(lam=1.0, phi=1.0, family=GAMMA)
        with pytest.raises(DomainError):
            sample_normalized_sums(c, SummandSpec.exponential(1.0), 0, np.random.default_rng(0))


class TestKsDistance:
    """KS 距离测试"""

    def test_sample_from_same_law(self):
        p = NefParams(1.0, 1.0, 2.0)
        y = sample_nef(p, GAMMA, 2000, np.random.default_rng(4))
        assert ks_distance(y, p, GAMMA) < 0.05

    def test_wrong_law_is_far(self):
        y = sample_nef(NefParams(1.0, 1.0, 2.0), GAMMA, 2000, np.random.default_rng(4))
        assert ks_distance(y, NefParams(-2.0, 1.0, 2.0), GAMMA) > 0.3

    def test_empty_sample(self):
        with pytest.raises(DomainError):
            ks_distance([], NefParams(1.0, 1.0, 2.0), GAMMA)


# endregion
