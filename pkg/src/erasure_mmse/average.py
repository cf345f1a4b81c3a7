"""Average MMSE over random sampling laws, exactly and by Monte Carlo,
plus closed forms for the flat, rank-1, worst-case, and circulant settings.

Exact Bernoulli averages enumerate all 2^N subsets up to ``N_MAX_EXACT``;
above the cap the Monte Carlo estimator is the only option. Enumeration
walks subsets in a fixed order and reduces over constant-size blocks, so
results are identical for any thread count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln, xlogy

from .engine import EmpiricalMse, mmse_for_pattern
from .errors import (
    InvalidInputError,
    ResourceLimitError,
    UnsupportedChannelError,
)
from .model import ChannelMode, ChannelSpec, SamplingPattern, SourceModel, Spectrum
from .seeding import derive_seed, map_blocks

N_MAX_EXACT = 20


@dataclass(frozen=True)
class ErrorByCount:
    """Entry m is the MMSE summed over all size-m subsets of measured rows."""

    e: tuple[float, ...]

    @property
    def n(self) -> int:
        return len(self.e) - 1


def _reduced_pattern_error(
    u_b: np.ndarray, lam_inv: np.ndarray, subset: Sequence[int], noise_power: float
) -> float:
    rows = u_b[list(subset), :]
    a = np.diag(lam_inv) + (rows.conj().T @ rows) / noise_power
    a = (a + a.conj().T) / 2.0
    return float(np.trace(np.linalg.inv(a)).real)


def error_by_count(model: SourceModel, noise_power: float, threads: int = 1) -> ErrorByCount:
    """Total MMSE of every subset size, by exhaustive enumeration."""
    n = model.n
    if n > N_MAX_EXACT:
        raise ResourceLimitError(
            f"exact enumeration capped at {N_MAX_EXACT} dimensions, got {n}; use Monte Carlo"
        )
    if noise_power <= 0.0:
        raise InvalidInputError(f"noise_power must be > 0, got {noise_power}")
    u_b = model.u_b
    lam_inv = 1.0 / model.lambda_b
    p_total = model.spectrum.total_power

    def subsets() -> Iterable[tuple[int, ...]]:
        for m in range(1, n + 1):
            yield from combinations(range(n), m)

    def block_totals(block: Sequence[tuple[int, ...]]) -> np.ndarray:
        totals = np.zeros(n + 1)
        for subset in block:
            totals[len(subset)] += _reduced_pattern_error(u_b, lam_inv, subset, noise_power)
        return totals

    totals = map_blocks(
        block_totals, subsets(), combine=lambda a, b: a + b, init=np.zeros(n + 1), threads=threads
    )
    totals[0] = p_total
    return ErrorByCount(tuple(float(v) for v in totals))


def _noiseless_pattern_error(model: SourceModel, subset: tuple[int, ...]) -> float:
    return mmse_for_pattern(model, SamplingPattern(subset), 0.0).error


def average_mmse_exact(model: SourceModel, channel: ChannelSpec, threads: int = 1) -> float:
    """Channel-averaged MMSE: exact subset enumeration under the sampling law.

    Noiseless channels enumerate through the pseudo-inverse per-pattern
    path; noisy ones use the reduced support-coordinate form.
    """
    noiseless = channel.noise_power == 0.0
    if channel.mode is ChannelMode.SCALAR:
        if noiseless:
            total = sum(_noiseless_pattern_error(model, (k,)) for k in range(model.n))
        else:
            u_b = model.u_b
            lam_inv = 1.0 / model.lambda_b
            total = sum(
                _reduced_pattern_error(u_b, lam_inv, (k,), channel.noise_power)
                for k in range(model.n)
            )
        return total / model.n
    if channel.mode is ChannelMode.BERNOULLI:
        p = channel.p
        n = model.n
        if noiseless:
            if n > N_MAX_EXACT:
                raise ResourceLimitError(
                    f"exact enumeration capped at {N_MAX_EXACT} dimensions, got {n}"
                )
            total = 0.0
            for m in range(n + 1):
                weight = p**m * (1.0 - p) ** (n - m)
                if weight == 0.0:
                    continue
                total += weight * sum(
                    _noiseless_pattern_error(model, subset)
                    for subset in combinations(range(n), m)
                )
            return total
        ebc = error_by_count(model, channel.noise_power, threads=threads)
        return float(sum(p**m * (1.0 - p) ** (n - m) * ebc.e[m] for m in range(n + 1)))
    raise UnsupportedChannelError(f"exact average undefined for mode {channel.mode.value}")


def sample_pattern(channel: ChannelSpec, n: int, rng: np.random.Generator) -> SamplingPattern:
    """Draw one sampling pattern from the channel's law."""
    if channel.mode is ChannelMode.SCALAR:
        return SamplingPattern((int(rng.integers(0, n)),))
    if channel.mode is ChannelMode.BERNOULLI:
        keep = rng.random(n) < channel.p
        return SamplingPattern(tuple(int(i) for i in np.flatnonzero(keep)))
    if channel.mode is ChannelMode.UNIFORM_M:
        if channel.m > n:
            raise InvalidInputError(f"m={channel.m} exceeds dimension {n}")
        idx = np.sort(rng.choice(n, size=channel.m, replace=False))
        return SamplingPattern(tuple(int(i) for i in idx))
    idx = np.sort(rng.integers(0, n, size=channel.m))
    return SamplingPattern(tuple(int(i) for i in idx), with_replacement=True)


def average_mmse_mc(
    model: SourceModel, channel: ChannelSpec, trials: int, seed: int
) -> EmpiricalMse:
    """Monte Carlo estimate of the channel-averaged MMSE.

    Patterns are drawn per trial from the channel law with derived seeds;
    each trial's exact per-pattern MMSE is averaged.
    """
    if trials < 2:
        raise InvalidInputError(f"trials must be >= 2, got {trials}")
    vals = np.empty(trials)
    for i in range(trials):
        rng = np.random.default_rng(derive_seed(seed, i))
        pattern = sample_pattern(channel, model.n, rng)
        vals[i] = mmse_for_pattern(model, pattern, channel.noise_power).error
    mean = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(trials))
    return EmpiricalMse(mean, stderr, trials, seed)


def scalar_flat_optimum(
    n: int, support_size: int, total_power: float, noise_power: float
) -> float:
    """Best single-uniform-sample average error for a flat-support spectrum.

    Attained by any covariance with constant diagonal, e.g. any transform
    with all entry magnitudes 1/sqrt(N).
    """
    if not 1 <= support_size <= n:
        raise InvalidInputError(f"support_size must be in [1, {n}], got {support_size}")
    if total_power <= 0.0 or noise_power <= 0.0:
        raise InvalidInputError("total_power and noise_power must be > 0")
    per_mode = total_power / support_size
    return total_power - per_mode + per_mode / (1.0 + total_power / (n * noise_power))


def rank1_average(n: int, total_power: float, noise_power: float, p: float) -> float:
    """Best Bernoulli-average error for a rank-1 spectrum.

    Binomial expectation of 1/(1/P + k/(N sigma^2)) over the number k of
    kept components; attained when the active column has all entry
    magnitudes 1/sqrt(N). Weights are formed in log space so dimensions up
    to 64 stay finite.
    """
    if total_power <= 0.0 or noise_power <= 0.0:
        raise InvalidInputError("total_power and noise_power must be > 0")
    if not 0.0 <= p <= 1.0:
        raise InvalidInputError(f"p must be in [0, 1], got {p}")
    k = np.arange(n + 1)
    log_w = (
        gammaln(n + 1)
        - gammaln(k + 1)
        - gammaln(n - k + 1)
        + xlogy(k, p)
        + xlogy(n - k, 1.0 - p)
    )
    vals = 1.0 / (1.0 / total_power + k / (n * noise_power))
    return float(np.sum(np.exp(log_w) * vals))


def worst_unitary_value(spectrum: Spectrum, channel: ChannelSpec) -> float:
    """Largest noiseless average error over all unitary transforms.

    Attained by the identity (any diagonal-phase/permutation variant);
    defined only for noiseless scalar or Bernoulli channels.
    """
    if channel.noise_power != 0.0:
        raise UnsupportedChannelError("worst-transform value is a noiseless result")
    p_total = spectrum.total_power
    if channel.mode is ChannelMode.SCALAR:
        return p_total - p_total / spectrum.n
    if channel.mode is ChannelMode.BERNOULLI:
        return (1.0 - channel.p) * p_total
    raise UnsupportedChannelError(f"unsupported mode {channel.mode.value}")


def circulant_average_inverse(k_inv: np.ndarray) -> np.ndarray:
    """Average of all simultaneous cyclic shifts of a positive-definite matrix.

    The output is circulant, positive definite, and keeps the trace; it
    never increases the exact Bernoulli-average MMSE of the corresponding
    covariance model.
    """
    k_inv = np.asarray(k_inv, dtype=complex)
    if k_inv.ndim != 2 or k_inv.shape[0] != k_inv.shape[1]:
        raise InvalidInputError(f"matrix must be square, got shape {k_inv.shape}")
    herm = (k_inv + k_inv.conj().T) / 2.0
    if float(np.max(np.abs(k_inv - herm))) > 1e-10 * max(1.0, float(np.max(np.abs(k_inv)))):
        raise InvalidInputError("matrix must be Hermitian")
    if float(np.linalg.eigvalsh(herm).min()) <= 0.0:
        raise InvalidInputError("matrix must be positive definite")
    n = k_inv.shape[0]
    out = np.zeros_like(herm)
    for shift in range(n):
        out += np.roll(herm, (-shift, -shift), axis=(0, 1))
    return out / n


# Average per-pattern error e[m]/C(n, m), used by validity checks.
def mean_error_per_size(ebc: ErrorByCount) -> tuple[float, ...]:
    n = ebc.n
    return tuple(ebc.e[m] / math.comb(n, m) for m in range(n + 1))
