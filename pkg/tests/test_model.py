import numpy as np
import pytest

from erasure_mmse import (
    InvalidInputError,
    InvalidPatternError,
    SamplingPattern,
    SourceModel,
    Spectrum,
    UnitaryTransform,
    coherence,
    covariance,
    effective_dof,
    make_dft,
    random_unitary,
)
from erasure_mmse.precoder import counterexample_transform


def unitarity_residual(u: np.ndarray) -> float:
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


class TestMakeDft:
    def test_dimension_one_is_identity(self):
        assert np.allclose(make_dft(1).entries, [[1.0]])

    def test_dimension_two_matrix(self):
        r = 1 / np.sqrt(2)
        assert np.allclose(make_dft(2).entries, [[r, r], [r, -r]], atol=1e-15)

    def test_dimension_four_entry(self):
        # exp(j*2*pi/4) = j, scaled by 1/2
        assert make_dft(4).entries[1, 1] == pytest.approx(0.5j, abs=1e-15)

    @pytest.mark.parametrize("n", [1, 2, 3, 7, 16, 33, 64])
    def test_unitary_for_all_sizes(self, n):
        assert unitarity_residual(make_dft(n).entries) <= 1e-10

    def test_zero_dimension_rejected(self):
        with pytest.raises(InvalidInputError):
            make_dft(0)


class TestCoherence:
    def test_identity_is_sqrt_n(self):
        assert coherence(UnitaryTransform(np.eye(9))) == pytest.approx(3.0)

    @pytest.mark.parametrize("n", [1, 2, 5, 16, 64])
    def test_dft_is_one(self, n):
        assert coherence(make_dft(n)) == pytest.approx(1.0, abs=1e-12)

    def test_counterexample_transform(self):
        assert coherence(counterexample_transform()) == pytest.approx(np.sqrt(3.0))

    def test_range_for_haar_draws(self):
        for seed in range(5):
            u = random_unitary(6, seed)
            mu = coherence(u)
            assert 1.0 - 1e-12 <= mu <= np.sqrt(6) + 1e-12


class TestEffectiveDof:
    def test_cumulative_example(self):
        spec = Spectrum((0.5, 0.3, 0.15, 0.05))
        assert effective_dof(spec, 0.8) == 2

    def test_full_fraction_needs_all(self):
        spec = Spectrum((0.4, 0.3, 0.2, 0.1))
        assert effective_dof(spec, 1.0) == 4

    def test_single_mode(self):
        spec = Spectrum((2.0, 0.0, 0.0))
        assert effective_dof(spec, 0.999) == 1

    def test_monotone_in_delta(self):
        rng = np.random.default_rng(1)
        spec = Spectrum(tuple(rng.random(12)))
        values = [effective_dof(spec, d) for d in np.linspace(0.01, 1.0, 40)]
        assert values == sorted(values)


class TestCovariance:
    def test_identity_transform_is_diagonal(self):
        model = SourceModel(UnitaryTransform(np.eye(2)), Spectrum((3.0, 5.0)))
        assert np.allclose(covariance(model), np.diag([3.0, 5.0]))

    def test_counterexample_covariance_matrix(self):
        model = SourceModel(counterexample_transform(), Spectrum((1 / 6, 2 / 6, 3 / 6)))
        expected = np.array(
            [[1 / 3, 0, 1 / 6], [0, 1 / 3, 0], [1 / 6, 0, 1 / 3]], dtype=complex
        )
        assert np.allclose(covariance(model), expected, atol=1e-15)

    def test_rank_one_dft_by_direct_multiplication(self):
        n = 4
        u = make_dft(n)
        lam = (1.0, 0.0, 0.0, 0.0)
        model = SourceModel(u, Spectrum(lam))
        # independent entrywise oracle
        expected = np.zeros((n, n), dtype=complex)
        for i in range(n):
            for j in range(n):
                expected[i, j] = sum(
                    lam[k] * u.entries[i, k] * np.conj(u.entries[j, k]) for k in range(n)
                )
        k = covariance(model)
        assert np.allclose(k, expected, atol=1e-14)
        assert np.allclose(np.diag(k), 0.25)
        # circulant: every diagonal is constant
        for off in range(n):
            band = [k[i, (i + off) % n] for i in range(n)]
            assert np.allclose(band, band[0], atol=1e-14)

    @pytest.mark.parametrize("seed", range(4))
    def test_trace_matches_total_power(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 9))
        lam = rng.random(n)
        model = SourceModel(random_unitary(n, seed), Spectrum(tuple(lam)))
        p = lam.sum()
        assert abs(np.trace(covariance(model)).real - p) <= 1e-10 * p


class TestRandomUnitary:
    def test_scalar_has_unit_modulus(self):
        u = random_unitary(1, 3)
        assert abs(abs(u.entries[0, 0]) - 1.0) < 1e-12

    def test_deterministic_per_seed(self):
        assert np.array_equal(random_unitary(5, 11).entries, random_unitary(5, 11).entries)

    def test_distinct_seeds_differ(self):
        assert not np.allclose(random_unitary(5, 1).entries, random_unitary(5, 2).entries)

    @pytest.mark.parametrize("n", [1, 2, 6, 17, 40])
    def test_passes_unitarity_validator(self, n):
        assert unitarity_residual(random_unitary(n, n).entries) <= 1e-10


class TestValidation:
    def test_negative_eigenvalue_rejected(self):
        with pytest.raises(InvalidInputError):
            Spectrum((1.0, -0.1))

    def test_all_zero_spectrum_rejected(self):
        with pytest.raises(InvalidInputError):
            Spectrum((0.0, 0.0))

    def test_support_skips_zero_modes(self):
        assert Spectrum((0.5, 0.0, 0.5)).support == (0, 2)

    def test_non_unitary_matrix_rejected(self):
        with pytest.raises(InvalidInputError):
            UnitaryTransform(np.ones((2, 2)))

    def test_transform_entries_read_only(self):
        u = make_dft(3)
        with pytest.raises(ValueError):
            u.entries[0, 0] = 0.0

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(InvalidInputError):
            SourceModel(make_dft(3), Spectrum((1.0, 1.0)))

    def test_pattern_must_increase_without_replacement(self):
        with pytest.raises(InvalidPatternError):
            SamplingPattern((2, 1))
        with pytest.raises(InvalidPatternError):
            SamplingPattern((1, 1))

    def test_pattern_repeats_allowed_with_replacement(self):
        assert SamplingPattern((1, 1, 3), with_replacement=True).m == 3

    def test_from_covariance_roundtrip(self):
        rng = np.random.default_rng(5)
        a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        k = a @ a.conj().T
        model = SourceModel.from_covariance(k)
        assert np.allclose(covariance(model), k, atol=1e-10)
