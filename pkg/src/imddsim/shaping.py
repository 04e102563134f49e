"""Probabilistic amplitude shaping: PAM alphabets, Maxwell-Boltzmann
distributions, constant-composition distribution matching, and entropy
accounting.

The distribution matcher maps uniform data bits to fixed-composition
amplitude sequences by exact multiset ranking: the k-bit input indexes the
lexicographic enumeration of all permutations of the composition, with the
interval subdivision carried out in arbitrary-precision integers (block
lengths around 1e5 overflow any fixed-width type).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Sequence

import numpy as np

from .errors import DecodeError, ParameterError


def _gray(i: int) -> int:
    return i ^ (i >> 1)


def _bits_of(value: int, width: int) -> np.ndarray:
    return np.array([(value >> (width - 1 - b)) & 1 for b in range(width)], dtype=np.int8)


@dataclass(frozen=True)
class PamAlphabet:
    """Ordered PAM levels with an injective bit labeling.

    ``levels`` are strictly increasing and, for even sizes, symmetric about
    zero. ``labels`` is an (M, m) bit matrix, row i labeling levels[i].
    """

    levels: np.ndarray
    labels: np.ndarray
    name: str = ""

    def __post_init__(self):
        levels = np.asarray(self.levels, dtype=float)
        labels = np.asarray(self.labels, dtype=np.int8)
        if levels.ndim != 1 or levels.size < 2:
            raise ParameterError("alphabet needs at least two levels")
        if not np.all(np.diff(levels) > 0):
            raise ParameterError("levels must be strictly increasing")
        if labels.shape[0] != levels.size:
            raise ParameterError("one label row per level required")
        if 2 ** labels.shape[1] < levels.size:
            raise ParameterError("label width too small for alphabet size")
        rows = {tuple(row) for row in labels.tolist()}
        if len(rows) != levels.size:
            raise ParameterError("labels must be injective")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "labels", labels)

    @property
    def size(self) -> int:
        return int(self.levels.size)

    @property
    def label_bits(self) -> int:
        return int(self.labels.shape[1])

    @property
    def is_symmetric(self) -> bool:
        return self.size % 2 == 0 and np.allclose(self.levels, -self.levels[::-1])

    def magnitudes(self) -> np.ndarray:
        """Distinct magnitudes, ascending (the CCDM amplitude classes)."""
        if not self.is_symmetric:
            raise ParameterError("magnitude classes require a symmetric alphabet")
        return self.levels[self.size // 2:]

    def level_index(self, magnitude_class: int, negative: bool) -> int:
        half = self.size // 2
        return half - 1 - magnitude_class if negative else half + magnitude_class

    @classmethod
    def uniform(cls, size: int, normalize: bool = True, name: str = "") -> "PamAlphabet":
        """Equally spaced PAM-``size`` with reflected Gray labels."""
        raw = np.arange(-(size - 1), size, 2, dtype=float)
        if normalize:
            raw = raw / np.sqrt(np.mean(raw**2))
        m = max(1, int(np.ceil(np.log2(size))))
        labels = np.array([_bits_of(_gray(i), m) for i in range(size)])
        return cls(raw, labels, name or f"PAM{size}")

    @classmethod
    def pam12(cls) -> "PamAlphabet":
        """PAM12 for shaping: sign bit plus 3-bit Gray over the 6 magnitudes.

        Four label bits total; the sign bit (bit 0, value 1 for negative
        levels) carries uniform data in the PAS construction.
        """
        raw = np.arange(-11, 12, 2, dtype=float)
        raw = raw / np.sqrt(np.mean(raw**2))
        labels = np.zeros((12, 4), dtype=np.int8)
        for i in range(12):
            mag_idx = 5 - i if i < 6 else i - 6
            labels[i, 0] = 1 if i < 6 else 0
            labels[i, 1:] = _bits_of(_gray(mag_idx), 3)
        return cls(raw, labels, "PS-PAM12")


@dataclass(frozen=True)
class SymbolDistribution:
    """Probabilities aligned with a PamAlphabet's levels."""

    probabilities: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if np.any(p < 0):
            raise ParameterError("probabilities must be non-negative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ParameterError("probabilities must sum to 1")
        object.__setattr__(self, "probabilities", p)

    @classmethod
    def uniform(cls, size: int) -> "SymbolDistribution":
        return cls(np.full(size, 1.0 / size))


@dataclass(frozen=True)
class Composition:
    """Occurrence count per amplitude class; block length n = sum(counts)."""

    counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if any(c < 0 for c in counts) or sum(counts) < 1:
            raise ParameterError("counts must be non-negative with n >= 1")
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return sum(self.counts)

    def permutation_count(self) -> int:
        """Exact multinomial(n; counts)."""
        total, rem = 1, self.n
        for c in self.counts:
            total *= comb(rem, c)
            rem -= c
        return total


@dataclass(frozen=True)
class SymbolFrame:
    """Transmitted PAM symbols: level indices, alphabet, and design prior."""

    indices: np.ndarray
    alphabet: PamAlphabet
    distribution: SymbolDistribution

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.ndim != 1 or idx.size == 0:
            raise ParameterError("indices must be a non-empty 1-D sequence")
        if idx.min() < 0 or idx.max() >= self.alphabet.size:
            raise ParameterError("index out of alphabet range")
        if self.distribution.probabilities.size != self.alphabet.size:
            raise ParameterError("distribution does not match alphabet size")
        object.__setattr__(self, "indices", idx)

    @property
    def n(self) -> int:
        return int(self.indices.size)

    def levels(self) -> np.ndarray:
        return self.alphabet.levels[self.indices]

    def bits(self) -> np.ndarray:
        """(n, m) transmitted label bits."""
        return self.alphabet.labels[self.indices]


# ---------------------------------------------------------------------------
# Maxwell-Boltzmann family
# ---------------------------------------------------------------------------

def maxwell_boltzmann(nu: float, alphabet: PamAlphabet) -> SymbolDistribution:
    """P(a) proportional to exp(-nu * a^2); symmetric and normalized."""
    if nu < 0:
        raise ParameterError("nu must be non-negative")
    expo = -nu * alphabet.levels**2
    expo -= expo.max()  # stabilize: largest weight is exactly 1
    w = np.exp(expo)
    return SymbolDistribution(w / w.sum())


def entropy_bits(dist: SymbolDistribution) -> float:
    p = dist.probabilities
    nz = p[p > 0]
    return float(-np.sum(nz * np.log2(nz)))


def nu_for_entropy(target_bits: float, alphabet: PamAlphabet,
                   tol_bits: float = 1e-6) -> float:
    """Invert H(nu) by bisection; H is strictly decreasing in nu.

    The attainable range is (H_min, log2 M], where H_min is the entropy of
    the limiting distribution on the minimum-|a| levels (1 bit for a
    symmetric alphabet). Targets within 1e-3 bit above log2 M clamp to the
    uniform limit, accepting conventional roundings such as 3.585 for PAM12.
    """
    h_max = np.log2(alphabet.size)
    if not 0 < target_bits <= h_max + 1e-3:
        raise ParameterError(f"target entropy must lie in (0, {h_max:.6f}]")
    if target_bits >= h_max - tol_bits:
        return 0.0

    min_sq = np.min(alphabet.levels**2)
    h_min = np.log2(np.sum(np.isclose(alphabet.levels**2, min_sq)))
    if target_bits < h_min - tol_bits:
        raise ParameterError(
            f"entropy {target_bits} unattainable; Maxwell-Boltzmann floor is "
            f"{h_min:.6f} bits for this alphabet"
        )

    def h(nu: float) -> float:
        return entropy_bits(maxwell_boltzmann(nu, alphabet))

    lo, hi = 0.0, 1.0 / np.mean(alphabet.levels**2)
    while h(hi) > target_bits + tol_bits:
        hi *= 2.0
        if hi > 1e9:
            break
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        h_mid = h(mid)
        if abs(h_mid - target_bits) <= tol_bits:
            return mid
        if h_mid > target_bits:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def composition_from_distribution(class_probabilities: Sequence[float],
                                  n: int) -> Composition:
    """Largest-remainder rounding of n*P onto integer counts summing to n."""
    p = np.asarray(class_probabilities, dtype=float)
    if n < 1:
        raise ParameterError("block length must be >= 1")
    if abs(p.sum() - 1.0) > 1e-9 or np.any(p < 0):
        raise ParameterError("class probabilities must be a distribution")
    scaled = p * n
    counts = np.floor(scaled).astype(int)
    short = n - counts.sum()
    # distribute the shortfall to the largest remainders (ties: lowest index)
    order = np.lexsort((np.arange(p.size), -(scaled - counts)))
    counts[order[:short]] += 1
    return Composition(tuple(int(c) for c in counts))


def magnitude_distribution(dist: SymbolDistribution,
                           alphabet: PamAlphabet) -> np.ndarray:
    """Marginal over |a| classes (ascending), folding symmetric levels."""
    if not alphabet.is_symmetric:
        raise ParameterError("symmetric alphabet required")
    half = alphabet.size // 2
    p = dist.probabilities
    return p[half:] + p[half - 1::-1]


# ---------------------------------------------------------------------------
# constant composition distribution matcher
# ---------------------------------------------------------------------------

def ccdm_input_bits(composition: Composition) -> int:
    """Data bits consumed per block: floor(log2 multinomial(n; counts))."""
    return composition.permutation_count().bit_length() - 1


def ccdm_rate_bits_per_symbol(composition: Composition) -> float:
    return ccdm_input_bits(composition) / composition.n


def ccdm_encode(data_bits: Sequence[int], composition: Composition) -> np.ndarray:
    """Map data bits to the index-th lexicographic permutation of the
    composition's multiset; exact integer interval subdivision."""
    k = ccdm_input_bits(composition)
    bits = np.asarray(data_bits, dtype=np.int64)
    if bits.size != k:
        raise ParameterError(f"composition requires exactly {k} data bits, got {bits.size}")
    if bits.size and (bits.min() < 0 or bits.max() > 1):
        raise ParameterError("data bits must be 0/1")

    index = 0
    for b in bits.tolist():
        index = (index << 1) | b

    counts = list(composition.counts)
    total = composition.permutation_count()
    n_rem = composition.n
    out = np.empty(n_rem, dtype=np.int64)
    for pos in range(out.size):
        for cls, c in enumerate(counts):
            if c == 0:
                continue
            block = total * c // n_rem
            if index < block:
                out[pos] = cls
                total = block
                counts[cls] -= 1
                n_rem -= 1
                break
            index -= block
    return out


def ccdm_decode(symbols: Sequence[int], composition: Composition) -> np.ndarray:
    """Rank a permutation back to its data bits; strict codeword check."""
    sym = np.asarray(symbols, dtype=np.int64)
    counts = list(composition.counts)
    observed = np.bincount(sym, minlength=len(counts)) if sym.size else np.zeros(len(counts), int)
    if sym.size != composition.n or list(observed) != counts:
        raise DecodeError("symbol sequence does not match the composition")

    k = ccdm_input_bits(composition)
    index = 0
    total = composition.permutation_count()
    n_rem = composition.n
    for s in sym.tolist():
        for cls in range(s):
            if counts[cls]:
                index += total * counts[cls] // n_rem
        block = total * counts[s] // n_rem
        total = block
        counts[s] -= 1
        n_rem -= 1
    if index >= (1 << k):
        raise DecodeError("permutation rank exceeds the codebook (not a codeword)")
    return _bits_of(index, k) if k else np.zeros(0, dtype=np.int8)


# ---------------------------------------------------------------------------
# PAS assembly
# ---------------------------------------------------------------------------

def pas_assemble(amplitude_classes: Sequence[int], sign_bits: Sequence[int],
                 alphabet: PamAlphabet,
                 distribution: SymbolDistribution | None = None) -> SymbolFrame:
    """Combine CCDM amplitude classes with uniform sign bits into symbols.

    Sign bit 0 selects the positive level. When no design distribution is
    given, the exact frame prior implied by the composition and equiprobable
    signs is attached.
    """
    classes = np.asarray(amplitude_classes, dtype=np.int64)
    signs = np.asarray(sign_bits, dtype=np.int64)
    if classes.shape != signs.shape:
        raise ParameterError("amplitude and sign sequences must have equal length")
    if not alphabet.is_symmetric:
        raise ParameterError("PAS requires a symmetric alphabet")
    half = alphabet.size // 2
    if classes.size and (classes.min() < 0 or classes.max() >= half):
        raise ParameterError("amplitude class out of range")

    indices = np.where(signs == 0, half + classes, half - 1 - classes)

    if distribution is None:
        class_counts = np.bincount(classes, minlength=half)
        p_mag = class_counts / classes.size
        probs = np.concatenate([p_mag[::-1], p_mag]) / 2.0
        distribution = SymbolDistribution(probs)
    return SymbolFrame(indices, alphabet, distribution)


def uniform_frame(alphabet: PamAlphabet, n: int, rng: np.random.Generator) -> SymbolFrame:
    """Uniform i.i.d. symbols (the unshaped PAM case)."""
    indices = rng.integers(0, alphabet.size, size=n)
    return SymbolFrame(indices, alphabet, SymbolDistribution.uniform(alphabet.size))
