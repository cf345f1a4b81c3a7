"""High-probability MMSE bound calculators for random row sampling, plus
empirical tail and minimum-eigenvalue checks.

The flat-support bound covers spectra whose nonzero eigenvalues are equal;
the general-support bound covers arbitrary spectra through the effective
degrees of freedom and a compressible/incompressible split of the unit
sphere. Published sufficient-sample constants (C1 <= 50963, C2 <= 456) are
enormous at desk scale, so every calculator also reports the numeric margin
of each sufficiency condition instead of silently claiming validity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import mmse_for_pattern
from .errors import InvalidInputError
from .model import SamplingPattern, SourceModel, Spectrum, effective_dof
from .seeding import derive_seed

DEFAULT_C1 = 50963.0
DEFAULT_C2 = 456.0

# Additive nudge keeping the tail-eigenvalue constant a strict upper ratio.
_TAIL_NUDGE = 1e-12


@dataclass(frozen=True)
class GeneralSupportParams:
    """Free parameters of the general-support bound.

    delta picks the effective degrees of freedom; kappa oversizes the
    sparse support; theta is the eigenvalue-concentration slack; gamma
    splits the compressible-vector margin; rho is the compressibility
    radius; epsilon is the failure probability; m measurements are drawn
    with replacement from n components.
    """

    delta: float
    kappa: float
    theta: float
    gamma: float
    rho: float
    epsilon: float
    m: int
    n: int
    noise_power: float

    def __post_init__(self) -> None:
        if not 0.0 < self.delta <= 1.0:
            raise InvalidInputError(f"delta must be in (0, 1], got {self.delta}")
        if self.kappa < 1.0:
            raise InvalidInputError(f"kappa must be >= 1, got {self.kappa}")
        if not 0.0 < self.theta <= 0.5:
            raise InvalidInputError(f"theta must be in (0, 0.5], got {self.theta}")
        if not 0.0 < self.gamma < 1.0:
            raise InvalidInputError(f"gamma must be in (0, 1), got {self.gamma}")
        if not 0.0 < self.rho < 1.0:
            raise InvalidInputError(f"rho must be in (0, 1), got {self.rho}")
        if not 0.0 < self.epsilon < 1.0:
            raise InvalidInputError(f"epsilon must be in (0, 1), got {self.epsilon}")
        if self.m < 1 or self.n < 1:
            raise InvalidInputError("m and n must be >= 1")
        if self.noise_power <= 0.0:
            raise InvalidInputError(f"noise_power must be > 0, got {self.noise_power}")


@dataclass(frozen=True)
class ConditionCheck:
    name: str
    satisfied: bool
    margin: float  # slack of the inequality; negative means violated


@dataclass(frozen=True)
class BoundReport:
    bound_value: float
    conditions: tuple[ConditionCheck, ...]
    constants: dict[str, float]


@dataclass(frozen=True)
class SparseConditionResult:
    satisfied: bool
    volume_margin: float
    count_margin: float


@dataclass(frozen=True)
class EigminQuantiles:
    minimum: float
    q01: float
    median: float
    trials: int


def flat_support_bound(
    total_power: float, support_size: int, m: int, n: int, noise_power: float
) -> float:
    """High-probability error bound for a flat spectrum on a known support.

    P / (1 + (1/sigma^2) (0.5 m/n) (P/support_size)); the 0.5 factor is the
    price of uniformly random rather than equidistant sampling.
    """
    if total_power <= 0.0 or support_size < 1 or n < 1 or noise_power < 0.0:
        raise InvalidInputError("arguments must be positive (noise_power >= 0)")
    if m > n:
        raise InvalidInputError(f"m={m} exceeds dimension {n}")
    if noise_power == 0.0:
        return 0.0
    snr_eff = 0.5 * (m / n) * (total_power / support_size) / noise_power
    return total_power / (1.0 + snr_eff)


def flat_sample_condition(
    support_size: int, mu: float, delta_prob: float, c1: float, c2: float
) -> int:
    """Rows sufficient for the flat-support bound to hold with failure
    probability ``delta_prob``: ceil(|B| mu^2 max(c1 ln|B|, c2 ln(3/delta)))."""
    if c1 <= 0.0 or c2 <= 0.0:
        raise InvalidInputError("constants must be positive")
    if support_size < 1 or mu < 1.0 or not 0.0 < delta_prob < 3.0:
        raise InvalidInputError("need support_size >= 1, mu >= 1, delta_prob in (0, 3)")
    need = support_size * mu * mu * max(c1 * math.log(support_size), c2 * math.log(3.0 / delta_prob))
    return int(math.ceil(need))


def compressible_rho_max(gamma: float, c_kd: float) -> float:
    """Largest admissible compressibility radius, (1-gamma) c_kd / (c_kd + 1)."""
    if not 0.0 < gamma < 1.0 or c_kd <= 0.0:
        raise InvalidInputError("need gamma in (0, 1) and c_kd > 0")
    return (1.0 - gamma) * c_kd / (c_kd + 1.0)


def sparse_condition_check(
    m: int,
    n: int,
    kappa_d: float,
    mu: float,
    theta: float,
    epsilon: float,
    c1: float = DEFAULT_C1,
    c2: float = DEFAULT_C2,
) -> SparseConditionResult:
    """Margins of the two sample-size sufficiency conditions.

    volume: m/ln(10m) - c1 theta^-2 mu^2 kappa_d ln^2(100 kappa_d) ln(4n)
    count:  m - c2 theta^-2 mu^2 kappa_d ln(1/epsilon)
    """
    if min(m, n) < 1 or kappa_d <= 0.0 or mu < 1.0 or theta <= 0.0 or not 0.0 < epsilon < 1.0:
        raise InvalidInputError("arguments out of range")
    vol_need = c1 * theta**-2 * mu * mu * kappa_d * math.log(100.0 * kappa_d) ** 2 * math.log(4.0 * n)
    cnt_need = c2 * theta**-2 * mu * mu * kappa_d * math.log(1.0 / epsilon)
    volume_margin = m / math.log(10.0 * m) - vol_need
    count_margin = m - cnt_need
    return SparseConditionResult(
        satisfied=volume_margin >= 0.0 and count_margin >= 0.0,
        volume_margin=volume_margin,
        count_margin=count_margin,
    )


def _support_constants(spectrum: Spectrum, params: GeneralSupportParams) -> dict[str, float]:
    """Spectrum- and parameter-derived constants of the general-support bound."""
    if spectrum.n != params.n:
        raise InvalidInputError(f"params.n={params.n} but spectrum has {spectrum.n} eigenvalues")
    lam = spectrum.sorted_descending()
    p_total = spectrum.total_power
    d = effective_dof(spectrum, params.delta)
    if params.kappa >= params.n / d:
        raise InvalidInputError(
            f"kappa={params.kappa} must be < n/dof = {params.n}/{d} = {params.n / d:.6g}"
        )
    c_lambda_s = float(lam[0]) * d / p_total
    tail = lam[d:]
    c_lambda_i = float(tail.max()) * (params.n - d) / p_total + _TAIL_NUDGE
    c_kd = math.sqrt(1.0 - params.theta) * math.sqrt(params.m / params.n)
    mass = 0.5 * params.rho**2 * params.kappa
    if mass > 1.0:
        c_i = (mass - 1.0) * 0.5 * params.rho**2 * (params.n - d) / (c_lambda_i * params.n)
    else:
        c_i = math.nan
    return {
        "dof": float(d),
        "c_lambda_s": c_lambda_s,
        "c_lambda_i": c_lambda_i,
        "c_kappa_d": c_kd,
        "c_i": c_i,
    }


def eigmin_lower_bound(
    spectrum: Spectrum, params: GeneralSupportParams, mu: float
) -> float:
    """High-probability lower bound on the smallest eigenvalue of
    diag(1/lambda) + (1/sigma^2)(HU)†HU under with-replacement sampling.

    min(c_i dof / P, dof/(c_lambda_s P) + (1/sigma^2) gamma^2 c_kd^2);
    returns 0 when the incompressible-mass condition 0.5 rho^2 kappa > 1
    fails (no positive floor is claimed). Valid only where the mu-dependent
    sample-size conditions hold; callers get those margins from
    :func:`general_support_bound`.
    """
    consts = _support_constants(spectrum, params)
    p_total = spectrum.total_power
    d = consts["dof"]
    noisy_branch = d / (consts["c_lambda_s"] * p_total) + (
        params.gamma**2 * consts["c_kappa_d"] ** 2 / params.noise_power
    )
    if math.isnan(consts["c_i"]):
        return 0.0
    return min(consts["c_i"] * d / p_total, noisy_branch)


def general_support_bound(
    spectrum: Spectrum,
    params: GeneralSupportParams,
    mu: float,
    c1: float = DEFAULT_C1,
    c2: float = DEFAULT_C2,
) -> BoundReport:
    """High-probability MMSE bound for arbitrary spectra, with conditions.

    The value recomposes exactly as (1-delta) P + dof / eigmin_lower_bound;
    it is +inf when the incompressible-mass condition fails (the caller
    sees that as a failed condition with its margin). Every sufficiency
    condition is reported with its numeric slack rather than enforced.
    """
    if mu < 1.0:
        raise InvalidInputError(f"mu must be >= 1, got {mu}")
    consts = _support_constants(spectrum, params)
    consts["mu"] = mu
    d = consts["dof"]
    p_total = spectrum.total_power

    sparse = sparse_condition_check(
        params.m, params.n, params.kappa * d, mu, params.theta, params.epsilon, c1=c1, c2=c2
    )
    mass_margin = 0.5 * params.rho**2 * params.kappa - 1.0
    rho_margin = compressible_rho_max(params.gamma, consts["c_kappa_d"]) - params.rho
    conditions = (
        ConditionCheck("sample_volume", sparse.volume_margin >= 0.0, sparse.volume_margin),
        ConditionCheck("sample_count", sparse.count_margin >= 0.0, sparse.count_margin),
        ConditionCheck("incompressible_mass", mass_margin > 0.0, mass_margin),
        ConditionCheck("rho_limit", rho_margin >= 0.0, rho_margin),
    )

    floor = eigmin_lower_bound(spectrum, params, mu)
    if floor > 0.0:
        bound = (1.0 - params.delta) * p_total + d / floor
    else:
        bound = math.inf
    return BoundReport(bound_value=bound, conditions=conditions, constants=consts)


def empirical_tail(
    model: SourceModel,
    m: int,
    noise_power: float,
    bound_value: float,
    trials: int,
    seed: int,
    replacement: bool = False,
) -> float:
    """Fraction of random size-m patterns whose exact MMSE reaches the bound."""
    if trials < 1:
        raise InvalidInputError(f"trials must be >= 1, got {trials}")
    if not 0 <= m <= model.n and not replacement:
        raise InvalidInputError(f"m must be in [0, {model.n}] without replacement")
    exceed = 0
    for i in range(trials):
        rng = np.random.default_rng(derive_seed(seed, i))
        if replacement:
            idx = np.sort(rng.integers(0, model.n, size=m))
            pattern = SamplingPattern(tuple(int(v) for v in idx), with_replacement=True)
        else:
            idx = np.sort(rng.choice(model.n, size=m, replace=False))
            pattern = SamplingPattern(tuple(int(v) for v in idx))
        if mmse_for_pattern(model, pattern, noise_power).error >= bound_value:
            exceed += 1
    return exceed / trials


def empirical_eigmin(
    model: SourceModel, m: int, noise_power: float, trials: int, seed: int
) -> EigminQuantiles:
    """Sample quantiles of the smallest eigenvalue of
    diag(1/lambda) + (1/sigma^2)(HU)†HU over with-replacement patterns."""
    if trials < 1:
        raise InvalidInputError(f"trials must be >= 1, got {trials}")
    if noise_power <= 0.0:
        raise InvalidInputError(f"noise_power must be > 0, got {noise_power}")
    if len(model.spectrum.support) != model.n:
        raise InvalidInputError("needs a full-support spectrum (all eigenvalues positive)")
    lam_inv = 1.0 / model.spectrum.as_array()
    u = model.transform.entries
    mins = np.empty(trials)
    for i in range(trials):
        rng = np.random.default_rng(derive_seed(seed, i))
        counts = np.bincount(rng.integers(0, model.n, size=m), minlength=model.n)
        a = np.diag(lam_inv) + (u.conj().T * counts) @ u / noise_power
        a = (a + a.conj().T) / 2.0
        mins[i] = float(np.linalg.eigvalsh(a)[0])
    return EigminQuantiles(
        minimum=float(mins.min()),
        q01=float(np.quantile(mins, 0.01)),
        median=float(np.quantile(mins, 0.5)),
        trials=trials,
    )
