"""Closed-form MMSE for equidistant sampling of circulant-covariance sources.

Keeping every ``delta_n``-th component of a source whose covariance is
diagonalized by the DFT folds the frequency-indexed eigenvalues into
``m = n / delta_n`` alias groups; the error decomposes into independent
per-group terms. Eigenvalues here are indexed by frequency and never
sorted. The first sample sits at index 0; the error is offset-invariant
for circulant covariances, so this loses no generality.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import InvalidInputError
from .model import Spectrum


@dataclass(frozen=True)
class AliasDecomposition:
    """Eigenvalues folded into the m residue groups of equidistant sampling."""

    m: int
    delta_n: int
    groups: tuple[tuple[float, ...], ...]
    group_power: tuple[float, ...]


@dataclass(frozen=True)
class AliasFreeSet:
    """At most one index per alias group, greedily holding maximal power."""

    indices: frozenset[int]
    power: float


def _check_divisor(n: int, delta_n: int) -> int:
    if delta_n < 1 or n % delta_n != 0:
        raise InvalidInputError(f"delta_n={delta_n} must divide the dimension {n}")
    return n // delta_n


def alias_decompose(spectrum: Spectrum, delta_n: int) -> AliasDecomposition:
    """Group eigenvalue indices congruent mod n/delta_n."""
    m = _check_divisor(spectrum.n, delta_n)
    lam = spectrum.lambdas
    groups = tuple(tuple(lam[i * m + k] for i in range(delta_n)) for k in range(m))
    powers = tuple(sum(g) for g in groups)
    return AliasDecomposition(m=m, delta_n=delta_n, groups=groups, group_power=powers)


def per_band_error(group: Sequence[float], noise_power: float) -> float:
    """Estimation error contributed by one alias group.

    sum(lam) - sum(lam^2) / (sum(lam) + delta_n * sigma^2); a group with no
    power contributes nothing (its band is simply not estimated).
    """
    if len(group) == 0:
        raise InvalidInputError("alias group must be nonempty")
    if noise_power < 0.0:
        raise InvalidInputError(f"noise_power must be >= 0, got {noise_power}")
    total = float(sum(group))
    if total == 0.0:
        return 0.0
    denom = total + len(group) * noise_power
    return total - sum(v * v for v in group) / denom


def equidistant_mmse(spectrum: Spectrum, delta_n: int, noise_power: float) -> float:
    """MMSE of keeping every delta_n-th component of a circulant-model source."""
    dec = alias_decompose(spectrum, delta_n)
    return float(sum(per_band_error(g, noise_power) for g in dec.groups))


def bandpass_error(
    total_power: float, band: int, m: int, n: int, noise_power: float
) -> float:
    """Equidistant-sampling error of a flat band of ``band`` modes, m >= band.

    Equals P / (1 + SNR) with SNR = (1/sigma^2) (P/band) (m/n).
    """
    if band < 1 or total_power <= 0.0 or n < 1:
        raise InvalidInputError("band, total_power and n must be positive")
    if m < band:
        raise InvalidInputError(f"needs m >= band, got m={m}, band={band}")
    if noise_power < 0.0:
        raise InvalidInputError(f"noise_power must be >= 0, got {noise_power}")
    if noise_power == 0.0:
        return 0.0
    snr = (total_power / band) * (m / n) / noise_power
    return total_power / (1.0 + snr)


def best_alias_free_set(spectrum: Spectrum, delta_n: int) -> AliasFreeSet:
    """Strongest eigenvalue index of each alias group; ties pick the lowest index."""
    dec = alias_decompose(spectrum, delta_n)
    picked = []
    power = 0.0
    for k, group in enumerate(dec.groups):
        best = max(range(len(group)), key=lambda i: (group[i], -i))
        picked.append(best * dec.m + k)
        power += group[best]
    return AliasFreeSet(indices=frozenset(picked), power=power)


def aliasing_free_bound(spectrum: Spectrum, delta_n: int) -> float:
    """Noiseless error bound: twice the power outside the best alias-free set."""
    best = best_alias_free_set(spectrum, delta_n)
    return 2.0 * (spectrum.total_power - best.power)
