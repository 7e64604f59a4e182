import numpy as np
import pytest

import smoothfem as sf
from smoothfem.ns1d import Interval1DProblem

# dense generalized condition numbers, frozen as regression constants
TRUE_KAPPA = {
    4: 5.8284271247461925,
    8: 25.274142369088207,
    16: 103.08686891981813,
    32: 414.34506223190414,
    64: 1659.379646292632,
}


class TestAssemble1D:
    def test_standard_row_pattern(self):
        n = 8
        K, _ = sf.assemble_1d(n)
        Kd = K.toarray()
        for i in range(1, n - 2):
            assert Kd[i, i] == pytest.approx(2 * n)
            assert Kd[i, i - 1] == pytest.approx(-n)
            assert Kd[i, i + 1] == pytest.approx(-n)

    def test_smoothed_matrix_symmetric_spd(self):
        K, Kns = sf.assemble_1d(8)
        Kd = Kns.toarray()
        assert np.allclose(Kd, Kd.T)
        assert np.linalg.eigvalsh(Kd)[0] > 0.0

    def test_rejects_odd_or_small_n(self):
        for bad in (3, 5, 2, 0):
            with pytest.raises(ValueError):
                sf.assemble_1d(bad)


class TestRayleighQuotients:
    @pytest.mark.parametrize("n", [4, 8, 16, 32, 64])
    def test_exact_values(self, n):
        qu, qv = sf.rayleigh_quotients(n)
        assert qu == pytest.approx(1.0 / n, abs=1e-13)
        assert qv == pytest.approx(0.75, abs=1e-13)

    def test_probe_vectors(self):
        prob = Interval1DProblem.create(8)
        assert np.array_equal(prob.oscillating,
                              [1, 0, 1, 0, 1, 0, 1])
        assert np.array_equal(prob.plateau, np.ones(7))


class TestLowerBound:
    @pytest.mark.parametrize("n", [4, 8, 16, 32, 64])
    def test_bound_is_three_quarters_n(self, n):
        assert sf.kappa_lower_bound_1d(n) == pytest.approx(0.75 * n,
                                                           rel=1e-12)

    @pytest.mark.parametrize("n", [4, 8, 16, 32, 64])
    def test_true_kappa_dominates_bound(self, n):
        kappa = sf.true_kappa_1d(n)
        assert kappa >= 0.75 * n
        assert kappa == pytest.approx(TRUE_KAPPA[n], rel=1e-10)

    def test_growth_monotone(self):
        values = [sf.true_kappa_1d(n) for n in (4, 8, 16, 32, 64)]
        assert all(b > a for a, b in zip(values, values[1:]))
