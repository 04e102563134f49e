import itertools

import numpy as np
import pytest

from imddsim.errors import DecodeError, ParameterError
from imddsim.shaping import (
    Composition,
    PamAlphabet,
    SymbolDistribution,
    ccdm_decode,
    ccdm_encode,
    ccdm_input_bits,
    ccdm_rate_bits_per_symbol,
    composition_from_distribution,
    entropy_bits,
    magnitude_distribution,
    maxwell_boltzmann,
    nu_for_entropy,
    pas_assemble,
    uniform_frame,
)


def lex_permutations(composition):
    """Oracle: all distinct permutations of the multiset, in lex order."""
    symbols = []
    for cls, count in enumerate(composition.counts):
        symbols.extend([cls] * count)
    return sorted(set(itertools.permutations(symbols)))


class TestAlphabet:
    def test_pam12_labeling(self):
        a = PamAlphabet.pam12()
        assert a.size == 12 and a.label_bits == 4
        assert a.is_symmetric
        # unit average power at uniform probability
        assert abs(np.mean(a.levels**2) - 1.0) < 1e-12
        # sign bit: 1 for negative levels, 0 for positive
        assert all(a.labels[i, 0] == (1 if a.levels[i] < 0 else 0) for i in range(12))
        # +a and -a share the magnitude label bits
        for k in range(6):
            neg = a.labels[a.level_index(k, True)]
            pos = a.labels[a.level_index(k, False)]
            assert np.array_equal(neg[1:], pos[1:])

    def test_uniform_pam8_gray(self):
        a = PamAlphabet.uniform(8)
        assert a.label_bits == 3
        diffs = [int(np.sum(a.labels[i] != a.labels[i + 1])) for i in range(7)]
        assert diffs == [1] * 7

    def test_labels_injective_enforced(self):
        with pytest.raises(ParameterError):
            PamAlphabet(np.array([-1.0, 1.0]), np.array([[0], [0]]))


class TestMaxwellBoltzmann:
    def test_zero_nu_is_uniform(self):
        d = maxwell_boltzmann(0.0, PamAlphabet.pam12())
        assert np.allclose(d.probabilities, 1 / 12, atol=1e-15)

    def test_large_nu_concentrates_on_inner_pair(self):
        a = PamAlphabet.uniform(12, normalize=False)
        d = maxwell_boltzmann(1e3, a)
        inner = d.probabilities[5:7]
        assert np.all(inner >= 0.499)

    def test_hand_checked_ratio(self):
        # levels {+-1, +-3}, nu = ln(2)/8: P(+-1)=1/3, P(+-3)=1/6
        a = PamAlphabet.uniform(4, normalize=False)
        d = maxwell_boltzmann(np.log(2) / 8, a)
        assert np.allclose(d.probabilities, [1 / 6, 1 / 3, 1 / 3, 1 / 6], atol=1e-12)

    def test_symmetry_exact(self):
        d = maxwell_boltzmann(0.7, PamAlphabet.pam12())
        p = d.probabilities
        assert np.array_equal(p, p[::-1])


class TestEntropy:
    def test_uniform(self):
        assert abs(entropy_bits(SymbolDistribution.uniform(12)) - np.log2(12)) < 1e-9

    def test_point_mass(self):
        d = SymbolDistribution(np.array([1.0, 0.0, 0.0]))
        assert entropy_bits(d) == 0.0

    def test_hand_summed(self):
        d = SymbolDistribution(np.array([1 / 3, 1 / 3, 1 / 6, 1 / 6]))
        assert abs(entropy_bits(d) - 1.9183) < 1e-4


class TestNuForEntropy:
    def test_uniform_target_gives_zero(self):
        a = PamAlphabet.pam12()
        assert abs(nu_for_entropy(np.log2(12), a)) < 1e-6

    def test_round_trip(self):
        a = PamAlphabet.pam12()
        nu = nu_for_entropy(3.0, a)
        assert abs(entropy_bits(maxwell_boltzmann(nu, a)) - 3.0) < 1e-6

    def test_monotone(self):
        a = PamAlphabet.pam12()
        assert nu_for_entropy(3.5, a) < nu_for_entropy(3.0, a)

    def test_identity_over_attainable_range(self):
        # symmetric MB floors at 1 bit; identity checked across (1, log2 M]
        a = PamAlphabet.pam12()
        for target in np.linspace(1.0, np.log2(12), 9):
            nu = nu_for_entropy(target, a)
            assert abs(entropy_bits(maxwell_boltzmann(nu, a)) - target) < 1e-6

    def test_out_of_range(self):
        a = PamAlphabet.pam12()
        with pytest.raises(ParameterError):
            nu_for_entropy(np.log2(12) + 0.01, a)
        with pytest.raises(ParameterError):
            nu_for_entropy(0.0, a)


class TestCcdm:
    def test_single_class_degenerate(self):
        comp = Composition((4,))
        assert ccdm_input_bits(comp) == 0
        out = ccdm_encode([], comp)
        assert np.array_equal(out, [0, 0, 0, 0])
        assert ccdm_decode(out, comp).size == 0

    def test_two_class_matches_lex_enumeration(self):
        comp = Composition((2, 2))
        assert ccdm_input_bits(comp) == 2
        perms = lex_permutations(comp)
        seen = set()
        for i in range(4):
            bits = [(i >> 1) & 1, i & 1]
            word = tuple(ccdm_encode(bits, comp))
            assert word == perms[i]
            seen.add(word)
        assert len(seen) == 4

    def test_three_class_exhaustive_round_trip(self):
        comp = Composition((2, 1, 1))
        assert ccdm_input_bits(comp) == 3  # floor(log2 12)
        perms = lex_permutations(comp)
        assert len(perms) == 12
        for i in range(8):
            bits = [(i >> 2) & 1, (i >> 1) & 1, i & 1]
            word = ccdm_encode(bits, comp)
            assert tuple(word) == perms[i]
            assert np.array_equal(ccdm_decode(word, comp), bits)

    def test_random_round_trips_n64(self):
        rng = np.random.default_rng(42)
        comp = Composition((20, 16, 16, 12))
        k = ccdm_input_bits(comp)
        for _ in range(1000):
            bits = rng.integers(0, 2, size=k)
            sym = ccdm_encode(bits, comp)
            assert np.bincount(sym, minlength=4).tolist() == list(comp.counts)
            assert np.array_equal(ccdm_decode(sym, comp), bits)

    def test_wrong_input_length(self):
        with pytest.raises(ParameterError):
            ccdm_encode([0, 1, 0], Composition((2, 2)))

    def test_wrong_composition_rejected(self):
        with pytest.raises(DecodeError):
            ccdm_decode([0, 0, 0, 1], Composition((2, 2)))

    def test_non_codeword_rejected(self):
        comp = Composition((2, 2))
        perms = lex_permutations(comp)
        # ranks 4 and 5 lie beyond the 2-bit codebook
        with pytest.raises(DecodeError):
            ccdm_decode(list(perms[5]), comp)

    def test_rates(self):
        assert ccdm_rate_bits_per_symbol(Composition((2, 2))) == 0.5
        assert ccdm_rate_bits_per_symbol(Composition((6,))) == 0.0
        assert ccdm_rate_bits_per_symbol(Composition((2, 1, 1))) == 0.75

    def test_rate_loss_nonnegative_exhaustive(self):
        # all compositions with n <= 8 and up to 3 classes
        for n in range(1, 9):
            for c1 in range(n + 1):
                for c2 in range(n - c1 + 1):
                    c3 = n - c1 - c2
                    comp = Composition((c1, c2, c3))
                    p = np.array([c1, c2, c3]) / n
                    h = -np.sum(p[p > 0] * np.log2(p[p > 0]))
                    assert ccdm_rate_bits_per_symbol(comp) <= h + 1e-12


class TestComposition:
    def test_largest_remainder_sums_exactly(self):
        p = np.array([0.4, 0.35, 0.15, 0.1])
        for n in (7, 97, 1000):
            comp = composition_from_distribution(p, n)
            assert comp.n == n

    def test_tv_distance_shrinks_with_n(self):
        a = PamAlphabet.pam12()
        dist = maxwell_boltzmann(nu_for_entropy(3.0, a), a)
        p_mag = magnitude_distribution(dist, a)
        tv = []
        for n in (100, 1000, 10000):
            comp = composition_from_distribution(p_mag, n)
            emp = np.array(comp.counts) / n
            tv.append(0.5 * np.sum(np.abs(emp - p_mag)))
        assert tv[0] > tv[1] > tv[2] or tv[2] < 1e-4


class TestPasAssemble:
    def test_sign_convention(self):
        a = PamAlphabet.pam12()
        frame = pas_assemble([0, 0], [0, 1], a)
        mags = a.magnitudes()
        assert frame.levels()[0] == pytest.approx(mags[0])
        assert frame.levels()[1] == pytest.approx(-mags[0])

    def test_all_zero_signs_nonnegative(self):
        a = PamAlphabet.pam12()
        frame = pas_assemble([0, 3, 5, 1], [0, 0, 0, 0], a)
        assert np.all(frame.levels() > 0)

    def test_length_mismatch(self):
        with pytest.raises(ParameterError):
            pas_assemble([0, 1], [0], PamAlphabet.pam12())

    def test_empirical_distribution_near_target(self):
        rng = np.random.default_rng(7)
        a = PamAlphabet.pam12()
        n = 10_000
        dist = maxwell_boltzmann(nu_for_entropy(3.2, a), a)
        comp = composition_from_distribution(magnitude_distribution(dist, a), n)
        bits = rng.integers(0, 2, size=ccdm_input_bits(comp))
        classes = ccdm_encode(bits, comp)
        signs = rng.integers(0, 2, size=n)
        frame = pas_assemble(classes, signs, a, distribution=dist)
        emp = np.bincount(frame.indices, minlength=12) / n
        tv = 0.5 * np.sum(np.abs(emp - dist.probabilities))
        assert tv < 0.02

    def test_uniform_frame(self):
        rng = np.random.default_rng(1)
        frame = uniform_frame(PamAlphabet.uniform(8), 4096, rng)
        assert frame.n == 4096
        assert frame.bits().shape == (4096, 3)
