"""Per-realization MMSE, LMMSE estimates, Monte Carlo MSE, and the
eigenvalue lower bound for a fixed number of measurements.

The noisy path works in the reduced support coordinates,

    err = tr((diag(1/lambda_B) + (1/sigma^2) U_B† H†H U_B)^{-1}),

which never inverts a rank-deficient covariance. The noiseless path falls
back to the dense form tr(K - K H† (H K H†)^+ H K) with an eigenvalue-cutoff
pseudo-inverse. The dense form is also exposed for every noise level as an
independent cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidPatternError
from .model import SamplingPattern, SourceModel, Spectrum, covariance
from .seeding import derive_seed

# Eigenvalues of H K H† + sigma^2 I below this scale (times P + sigma^2) are
# treated as zero by the pseudo-inverse.
SINGULAR_EIG_REL = 1e-12


@dataclass(frozen=True)
class MmseResult:
    """Scalar estimation error plus the evaluation path that produced it."""

    error: float
    method: str  # "woodbury" | "pseudo_inverse"


@dataclass(frozen=True)
class EmpiricalMse:
    mean: float
    stderr: float
    trials: int
    seed: int


def _checked_indices(model: SourceModel, pattern: SamplingPattern) -> np.ndarray:
    idx = np.asarray(pattern.indices, dtype=int)
    if idx.size and int(idx.max()) >= model.n:
        raise InvalidPatternError(
            f"pattern index {int(idx.max())} out of range for dimension {model.n}"
        )
    if not pattern.with_replacement and idx.size != np.unique(idx).size:
        raise InvalidPatternError(f"repeated indices need with_replacement: {pattern.indices}")
    return idx


def _pinv_hermitian(a: np.ndarray, cutoff: float) -> np.ndarray:
    """Pseudo-inverse of a Hermitian PSD matrix with an absolute eigenvalue cutoff."""
    w, v = np.linalg.eigh((a + a.conj().T) / 2.0)
    w_inv = np.where(w > cutoff, 1.0 / np.where(w > cutoff, w, 1.0), 0.0)
    return (v * w_inv) @ v.conj().T


def mmse_for_pattern(
    model: SourceModel, pattern: SamplingPattern, noise_power: float
) -> MmseResult:
    """Exact MMSE of estimating the source from the given measured rows."""
    if noise_power < 0.0:
        raise InvalidInputError(f"noise_power must be >= 0, got {noise_power}")
    idx = _checked_indices(model, pattern)
    p_total = model.spectrum.total_power
    if idx.size == 0:
        method = "woodbury" if noise_power > 0.0 else "pseudo_inverse"
        return MmseResult(p_total, method)

    if noise_power > 0.0:
        rows = model.u_b[idx, :]
        a = np.diag(1.0 / model.lambda_b) + (rows.conj().T @ rows) / noise_power
        a = (a + a.conj().T) / 2.0
        err = float(np.trace(np.linalg.inv(a)).real)
        return MmseResult(err, "woodbury")

    k = covariance(model)
    k_xy = k[:, idx]
    k_y = k[np.ix_(idx, idx)]
    cutoff = SINGULAR_EIG_REL * (p_total + noise_power)
    k_y_pinv = _pinv_hermitian(k_y, cutoff)
    err = float((np.trace(k).real - np.trace(k_xy @ k_y_pinv @ k_xy.conj().T).real))
    return MmseResult(err, "pseudo_inverse")


def mmse_for_pattern_direct(
    model: SourceModel, pattern: SamplingPattern, noise_power: float
) -> float:
    """Dense-form MMSE, tr(K - K H† (H K H† + sigma^2 I)^+ H K).

    Cross-check path: no support reduction, pseudo-inverse at every noise
    level. Kept independent of :func:`mmse_for_pattern`'s noisy branch.
    """
    if noise_power < 0.0:
        raise InvalidInputError(f"noise_power must be >= 0, got {noise_power}")
    idx = _checked_indices(model, pattern)
    k = covariance(model)
    if idx.size == 0:
        return float(np.trace(k).real)
    k_xy = k[:, idx]
    k_y = k[np.ix_(idx, idx)] + noise_power * np.eye(idx.size)
    cutoff = SINGULAR_EIG_REL * (model.spectrum.total_power + noise_power)
    k_y_pinv = _pinv_hermitian(k_y, cutoff)
    return float(np.trace(k).real - np.trace(k_xy @ k_y_pinv @ k_xy.conj().T).real)


def lmmse_estimate(
    model: SourceModel,
    pattern: SamplingPattern,
    noise_power: float,
    y: np.ndarray,
) -> np.ndarray:
    """Linear MMSE estimate K H† (H K H† + sigma^2 I)^+ y of the source."""
    idx = _checked_indices(model, pattern)
    y = np.asarray(y, dtype=complex)
    if y.shape != (idx.size,):
        raise InvalidInputError(f"observation has shape {y.shape}, pattern has {idx.size} rows")
    if idx.size == 0:
        return np.zeros(model.n, dtype=complex)
    return _estimator_matrix(model, idx, noise_power) @ y


def _estimator_matrix(model: SourceModel, idx: np.ndarray, noise_power: float) -> np.ndarray:
    k = covariance(model)
    k_y = k[np.ix_(idx, idx)] + noise_power * np.eye(idx.size)
    cutoff = SINGULAR_EIG_REL * (model.spectrum.total_power + noise_power)
    return k[:, idx] @ _pinv_hermitian(k_y, cutoff)


def sample_source(
    model: SourceModel,
    noise_power: float,
    pattern: SamplingPattern,
    seed: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw one (source, observation) pair; deterministic per seed.

    The source is U diag(sqrt(lambda)) w with w proper complex standard
    Gaussian (real/imaginary parts independent, variance 1/2 each); the
    observation adds proper complex noise of per-component power
    ``noise_power`` to the measured rows.
    """
    idx = _checked_indices(model, pattern)
    n = model.n
    rng = np.random.default_rng(seed)
    w = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)
    x = model.transform.entries @ (np.sqrt(model.spectrum.as_array()) * w)
    noise = (rng.standard_normal(idx.size) + 1j * rng.standard_normal(idx.size)) / np.sqrt(2.0)
    y = x[idx] + np.sqrt(noise_power) * noise
    return x, y


def empirical_mse(
    model: SourceModel,
    pattern: SamplingPattern,
    noise_power: float,
    trials: int,
    seed: int,
) -> EmpiricalMse:
    """Mean and standard error of the squared estimation error over trials.

    Trial ``i`` uses the derived seed ``derive_seed(seed, i)`` and is
    reproducible in isolation; accumulation is in trial order.
    """
    if trials < 2:
        raise InvalidInputError(f"trials must be >= 2, got {trials}")
    idx = _checked_indices(model, pattern)
    w_est = _estimator_matrix(model, idx, noise_power)
    errs = np.empty(trials)
    for i in range(trials):
        x, y = sample_source(model, noise_power, pattern, derive_seed(seed, i))
        r = x - w_est @ y
        errs[i] = float(np.vdot(r, r).real)
    mean = float(errs.mean())
    stderr = float(errs.std(ddof=1) / math.sqrt(trials))
    return EmpiricalMse(mean, stderr, trials, seed)


def mmse_lower_bound_fixed_m(spectrum: Spectrum, m: int, noise_power: float) -> float:
    """Lower bound on the MMSE of any m-row sampling of any unitary model.

    Sum of the eigenvalues below the top m, plus the noisy-scalar errors
    1/(1/lambda + 1/sigma^2) of the m smallest eigenvalues (zero eigenvalues
    contribute nothing).
    """
    if not 0 <= m <= spectrum.n:
        raise InvalidInputError(f"m must be in [0, {spectrum.n}], got {m}")
    if noise_power <= 0.0:
        raise InvalidInputError(f"noise_power must be > 0, got {noise_power}")
    lam = spectrum.sorted_descending()
    tail = lam[spectrum.n - m:]
    second = sum(1.0 / (1.0 / v + 1.0 / noise_power) for v in tail if v > 0.0)
    return float(lam[m:].sum() + second)
