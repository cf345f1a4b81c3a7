"""Data model: spectra, unitary transforms, source models, channels, patterns.

All values are immutable after construction and safe for concurrent reads.
Eigenvalues are kept in the order the caller supplies them; operations that
need a descending order (``effective_dof``) sort internally.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, InvalidPatternError

# Default tolerance for the unitarity residual max|U†U - I|; double-precision
# QR orthonormalization lands orders of magnitude below this.
DEFAULT_UNITARY_TOL = 1e-10

# Eigenvalues below SUPPORT_EPS * total power are treated as zero when the
# support set is formed.
SUPPORT_EPS = 1e-14


@dataclass(frozen=True)
class Spectrum:
    """Ordered eigenvalue list of a source covariance matrix.

    ``lambdas`` are nonnegative powers, at least one strictly positive.
    The support holds the indices above ``support_eps`` times the trace.
    """

    lambdas: tuple[float, ...]
    support_eps: float = SUPPORT_EPS

    def __post_init__(self) -> None:
        lam = tuple(float(v) for v in self.lambdas)
        object.__setattr__(self, "lambdas", lam)
        if len(lam) == 0:
            raise InvalidInputError("spectrum must have at least one eigenvalue")
        if any(not math.isfinite(v) or v < 0.0 for v in lam):
            raise InvalidInputError("eigenvalues must be finite and >= 0")
        if not any(v > 0.0 for v in lam):
            raise InvalidInputError("at least one eigenvalue must be positive")

    @property
    def n(self) -> int:
        return len(self.lambdas)

    @property
    def total_power(self) -> float:
        return float(sum(self.lambdas))

    @property
    def support(self) -> tuple[int, ...]:
        cut = self.support_eps * self.total_power
        return tuple(i for i, v in enumerate(self.lambdas) if v > cut)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.lambdas, dtype=float)

    def sorted_descending(self) -> np.ndarray:
        return np.sort(self.as_array())[::-1]


@dataclass(frozen=True, eq=False)
class UnitaryTransform:
    """Square complex matrix with U†U = I within ``tol`` (max-norm)."""

    entries: np.ndarray
    tol: float = DEFAULT_UNITARY_TOL

    def __post_init__(self) -> None:
        u = np.array(self.entries, dtype=complex)
        if u.ndim != 2 or u.shape[0] != u.shape[1] or u.shape[0] == 0:
            raise InvalidInputError(f"transform must be square and nonempty, got shape {u.shape}")
        gram = u.conj().T @ u
        resid = float(np.max(np.abs(gram - np.eye(u.shape[0]))))
        if resid > self.tol:
            raise InvalidInputError(
                f"matrix is not unitary: max|U†U - I| = {resid:.3e} > {self.tol:.3e}"
            )
        u.setflags(write=False)
        object.__setattr__(self, "entries", u)

    @property
    def n(self) -> int:
        return int(self.entries.shape[0])


class ChannelMode(enum.Enum):
    """Sampling-law families for the random measurement matrix."""

    SCALAR = "scalar"
    BERNOULLI = "bernoulli"
    UNIFORM_M = "uniform_m"
    WITH_REPLACEMENT_M = "with_replacement_m"


@dataclass(frozen=True)
class ChannelSpec:
    """Noise power plus the sampling law of the measurement matrix.

    ``p`` is meaningful only in Bernoulli mode (per-component keep
    probability); ``m`` only in the fixed-count modes.
    """

    noise_power: float
    mode: ChannelMode = ChannelMode.BERNOULLI
    p: float = 0.0
    m: int = 0

    def __post_init__(self) -> None:
        if not math.isfinite(self.noise_power) or self.noise_power < 0.0:
            raise InvalidInputError(f"noise_power must be finite and >= 0, got {self.noise_power}")
        if self.mode is ChannelMode.BERNOULLI and not 0.0 <= self.p <= 1.0:
            raise InvalidInputError(f"p must be in [0, 1], got {self.p}")
        if self.mode in (ChannelMode.UNIFORM_M, ChannelMode.WITH_REPLACEMENT_M) and self.m < 0:
            raise InvalidInputError(f"m must be >= 0, got {self.m}")


@dataclass(frozen=True)
class SamplingPattern:
    """One realization of the sampling matrix: the measured row indices.

    Subset patterns must be strictly increasing. Repeated indices are only
    legal with ``with_replacement=True`` (rows of the sampling matrix may
    then repeat).
    """

    indices: tuple[int, ...]
    with_replacement: bool = False

    def __post_init__(self) -> None:
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        if any(i < 0 for i in idx):
            raise InvalidPatternError(f"indices must be >= 0, got {idx}")
        if not self.with_replacement:
            if any(b <= a for a, b in zip(idx, idx[1:])):
                raise InvalidPatternError(
                    f"subset pattern must be strictly increasing, got {idx}"
                )

    @property
    def m(self) -> int:
        return len(self.indices)


@dataclass(frozen=True, eq=False)
class SourceModel:
    """Source covariance described by a unitary transform and a spectrum."""

    transform: UnitaryTransform
    spectrum: Spectrum

    def __post_init__(self) -> None:
        if self.transform.n != self.spectrum.n:
            raise InvalidInputError(
                f"transform is {self.transform.n}x{self.transform.n} but spectrum has "
                f"{self.spectrum.n} eigenvalues"
            )

    @property
    def n(self) -> int:
        return self.spectrum.n

    @property
    def u_b(self) -> np.ndarray:
        """Columns of the transform on the spectrum support (N x |B|)."""
        return self.transform.entries[:, list(self.spectrum.support)]

    @property
    def lambda_b(self) -> np.ndarray:
        """Support eigenvalues, same order as the ``u_b`` columns."""
        return self.spectrum.as_array()[list(self.spectrum.support)]

    @classmethod
    def from_covariance(cls, k: np.ndarray, tol: float = DEFAULT_UNITARY_TOL) -> "SourceModel":
        """Model for a Hermitian PSD covariance via its eigendecomposition."""
        k = np.asarray(k, dtype=complex)
        herm_resid = float(np.max(np.abs(k - k.conj().T)))
        if herm_resid > 1e-10 * max(1.0, float(np.max(np.abs(k)))):
            raise InvalidInputError("covariance must be Hermitian")
        w, v = np.linalg.eigh((k + k.conj().T) / 2.0)
        w = np.where(w > 0.0, w, 0.0)
        return cls(UnitaryTransform(v, tol=tol), Spectrum(tuple(float(x) for x in w)))


def make_dft(n: int) -> UnitaryTransform:
    """Unitary DFT matrix with entry (t, k) = exp(+j*2*pi*t*k/n)/sqrt(n)."""
    if n < 1:
        raise InvalidInputError(f"dimension must be >= 1, got {n}")
    t = np.arange(n)
    entries = np.exp(2j * np.pi * np.outer(t, t) / n) / np.sqrt(n)
    return UnitaryTransform(entries)


def coherence(u: UnitaryTransform) -> float:
    """sqrt(N) times the largest entry magnitude; lies in [1, sqrt(N)]."""
    return float(np.sqrt(u.n) * np.max(np.abs(u.entries)))


def effective_dof(spectrum: Spectrum, delta: float) -> int:
    """Smallest count of top eigenvalues holding a ``delta`` fraction of the trace."""
    if not 0.0 < delta <= 1.0:
        raise InvalidInputError(f"delta must be in (0, 1], got {delta}")
    csum = np.cumsum(spectrum.sorted_descending())
    # Comparing against the cumulative total keeps delta=1 exact under rounding.
    target = delta * csum[-1]
    return int(np.searchsorted(csum, target) + 1)


def covariance(model: SourceModel) -> np.ndarray:
    """Hermitian PSD covariance matrix of the modeled source."""
    u = model.transform.entries
    k = (u * model.spectrum.as_array()) @ u.conj().T
    return (k + k.conj().T) / 2.0


def random_unitary(n: int, seed: int) -> UnitaryTransform:
    """Haar-distributed unitary matrix, deterministic per seed.

    QR of a standard complex Gaussian matrix, with the R diagonal's phases
    folded into Q so the factorization (and hence the law) is unique.
    """
    if n < 1:
        raise InvalidInputError(f"dimension must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    a = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(a)
    d = np.diagonal(r).copy()
    d = np.where(np.abs(d) > 0.0, d / np.abs(d), 1.0)
    return UnitaryTransform(q * d)
