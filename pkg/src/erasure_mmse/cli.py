"""Command-line front end: experiment configuration, deterministic CSV/JSON
result tables, Monte Carlo drivers, and the built-in reproduction checklist.

Subcommands: mmse | average | cwss | bounds | optimize | mc | verify-paper.
Every run is reproducible: a JSON config (with a top-level "command" field)
plus --seed fully determine the output bytes, for any --threads value.
Command-line flags override config-file values.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 reproduction failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from .average import (
    N_MAX_EXACT,
    average_mmse_exact,
    average_mmse_mc,
    circulant_average_inverse,
    rank1_average,
    scalar_flat_optimum,
    worst_unitary_value,
)
from .bounds import (
    GeneralSupportParams,
    compressible_rho_max,
    empirical_tail,
    general_support_bound,
)
from .cwss import aliasing_free_bound, bandpass_error, equidistant_mmse
from .engine import (
    empirical_mse,
    mmse_for_pattern,
    mmse_lower_bound_fixed_m,
)
from .errors import (
    InvalidInputError,
    NumericalFailureError,
    ReproductionError,
)
from .model import (
    ChannelMode,
    ChannelSpec,
    SamplingPattern,
    SourceModel,
    Spectrum,
    UnitaryTransform,
    coherence,
    make_dft,
    random_unitary,
)
from .precoder import (
    OptimizerConfig,
    _channel_patterns,
    euclidean_gradient,
    objective,
    optimize,
    reproduce_counterexample,
    stationarity_residual,
)
from .seeding import derive_seed

THREADS_ENV = "ERASURE_MMSE_THREADS"


class ConfigError(ValueError):
    """A config file or flag value cannot be interpreted."""


# ---------------------------------------------------------------------------
# Config resolution
# ---------------------------------------------------------------------------


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return cfg


def _require(cfg: dict, field: str) -> Any:
    if field not in cfg or cfg[field] is None:
        raise ConfigError(f"missing required field '{field}'")
    return cfg[field]


def parse_spectrum_values(text: str) -> list[float] | str:
    """Comma-separated eigenvalues, or a preset name."""
    if text in ("flat", "bandpass", "geometric"):
        return text
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"bad spectrum '{text}': {exc}") from exc


def resolve_spectrum(mcfg: dict) -> Spectrum:
    values = mcfg.get("spectrum", "flat")
    if isinstance(values, str):
        values = parse_spectrum_values(values)
    if isinstance(values, list):
        if len(values) == 0:
            raise ConfigError("field 'spectrum' must not be empty")
        try:
            return Spectrum(tuple(float(v) for v in values))
        except InvalidInputError as exc:
            raise ConfigError(f"field 'spectrum': {exc}") from exc
    preset = values
    n = int(_require(mcfg, "n"))
    power = float(mcfg.get("power", 1.0))
    if preset in ("flat", "bandpass"):
        if preset == "bandpass" and "support" not in mcfg:
            raise ConfigError("preset 'bandpass' needs field 'support'")
        support = int(mcfg.get("support", n))
        if not 1 <= support <= n:
            raise ConfigError(f"field 'support' must be in [1, {n}], got {support}")
        lam = [power / support] * support + [0.0] * (n - support)
    elif preset == "geometric":
        ratio = float(mcfg.get("ratio", 0.5))
        if not 0.0 < ratio < 1.0:
            raise ConfigError(f"field 'ratio' must be in (0, 1), got {ratio}")
        raw = np.array([ratio**i for i in range(n)])
        lam = list(power * raw / raw.sum())
    else:
        raise ConfigError(f"unknown spectrum preset '{preset}'")
    return Spectrum(tuple(lam))


def _load_transform_file(path: str) -> np.ndarray:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read transform file {path}: {exc}") from exc
    try:
        rows = []
        for row in data:
            rows.append(
                [complex(v[0], v[1]) if isinstance(v, list) else complex(v) for v in row]
            )
        return np.array(rows, dtype=complex)
    except (TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"transform file {path} must hold a matrix of numbers "
                          f"or [re, im] pairs: {exc}") from exc


def resolve_transform(name: str, n: int) -> UnitaryTransform:
    try:
        if name == "dft":
            return make_dft(n)
        if name == "identity":
            return UnitaryTransform(np.eye(n))
        if name.startswith("haar:"):
            return random_unitary(n, int(name.split(":", 1)[1]))
        if name.startswith("file:"):
            u = UnitaryTransform(_load_transform_file(name.split(":", 1)[1]))
            if u.n != n:
                raise ConfigError(f"field 'transform': file matrix is {u.n}x{u.n}, expected {n}")
            return u
    except (ValueError, InvalidInputError) as exc:
        raise ConfigError(f"field 'transform': {exc}") from exc
    raise ConfigError(
        f"field 'transform' must be dft|identity|haar:SEED|file:PATH, got '{name}'"
    )


def resolve_model(mcfg: dict) -> SourceModel:
    spectrum = resolve_spectrum(mcfg)
    transform = resolve_transform(str(mcfg.get("transform", "dft")), spectrum.n)
    return SourceModel(transform, spectrum)


def resolve_channel(ccfg: dict) -> ChannelSpec:
    mode_name = str(ccfg.get("mode", "bernoulli"))
    try:
        mode = ChannelMode(mode_name)
    except ValueError as exc:
        raise ConfigError(f"field 'mode' must be one of "
                          f"{[m.value for m in ChannelMode]}, got '{mode_name}'") from exc
    try:
        return ChannelSpec(
            noise_power=float(_require(ccfg, "noise_power")),
            mode=mode,
            p=float(ccfg.get("p", 0.0)),
            m=int(ccfg.get("m", 0)),
        )
    except InvalidInputError as exc:
        raise ConfigError(f"channel: {exc}") from exc


def parse_pattern(text: str) -> tuple[int, ...]:
    """Comma- or space-separated indices; empty means no measurements."""
    parts = [p for p in text.replace(",", " ").split() if p]
    try:
        return tuple(int(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"bad pattern '{text}': {exc}") from exc


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def _format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _json_safe(value: Any) -> Any:
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else format(v, "g")
    if isinstance(value, np.integer):
        return int(value)
    return value


def render_output(command: str, columns: Sequence[str], rows: Sequence[dict], fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_cell(row.get(c)) for c in columns])
        return buf.getvalue()
    payload = {
        "command": command,
        "columns": list(columns),
        "rows": [{c: _json_safe(row.get(c)) for c in columns} for row in rows],
    }
    return json.dumps(payload, sort_keys=True, ensure_ascii=False, indent=2) + "\n"


def write_output(out: str | None, text: str) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_mmse(cfg: dict) -> tuple[list[str], list[dict]]:
    model = resolve_model(cfg.get("model", {}))
    noise = float(_require(cfg, "noise_power"))
    raw_patterns = _require(cfg, "patterns")
    with_repl = bool(cfg.get("with_replacement", False))
    rows = []
    for entry in raw_patterns:
        idx = parse_pattern(entry) if isinstance(entry, str) else tuple(int(i) for i in entry)
        try:
            pattern = SamplingPattern(idx, with_replacement=with_repl)
            result = mmse_for_pattern(model, pattern, noise)
        except InvalidInputError as exc:
            raise ConfigError(f"field 'patterns' entry {list(idx)}: {exc}") from exc
        rows.append(
            {
                "pattern": " ".join(str(i) for i in idx),
                "m": len(idx),
                "mmse": result.error,
                "method": result.method,
            }
        )
    return ["pattern", "m", "mmse", "method"], rows


def cmd_average(cfg: dict, threads: int = 1) -> tuple[list[str], list[dict]]:
    mcfg = cfg.get("model", {})
    model = resolve_model(mcfg)
    noise = float(_require(cfg, "noise_power"))
    n = model.n
    dft = SourceModel(make_dft(n), model.spectrum)
    ident = SourceModel(UnitaryTransform(np.eye(n)), model.spectrum)
    rows = []
    mode = str(cfg.get("mode", "bernoulli"))
    if mode == "scalar":
        ch = ChannelSpec(noise, ChannelMode.SCALAR)
        rows.append(
            {
                "p": None,
                "J_U": average_mmse_exact(model, ch, threads=threads),
                "J_dft": average_mmse_exact(dft, ch, threads=threads),
                "J_identity": average_mmse_exact(ident, ch, threads=threads),
            }
        )
    elif mode == "bernoulli":
        grid = cfg.get("p_grid", [round(0.1 * i, 10) for i in range(1, 10)])
        for p in grid:
            ch = ChannelSpec(noise, ChannelMode.BERNOULLI, p=float(p))
            rows.append(
                {
                    "p": float(p),
                    "J_U": average_mmse_exact(model, ch, threads=threads),
                    "J_dft": average_mmse_exact(dft, ch, threads=threads),
                    "J_identity": average_mmse_exact(ident, ch, threads=threads),
                }
            )
    else:
        raise ConfigError(f"field 'mode' must be scalar|bernoulli for exact averages, got '{mode}'")
    return ["p", "J_U", "J_dft", "J_identity"], rows


def _flat_band_size(spectrum: Spectrum) -> int | None:
    """Band size if the spectrum is flat on a leading band, else None."""
    lam = spectrum.as_array()
    support = spectrum.support
    b = len(support)
    if support != tuple(range(b)):
        return None
    top = lam[:b]
    if np.max(np.abs(top - top[0])) > 1e-12 * spectrum.total_power:
        return None
    return b


def cmd_cwss(cfg: dict) -> tuple[list[str], list[dict]]:
    spectrum = resolve_spectrum(cfg.get("model", cfg))
    noise = float(_require(cfg, "noise_power"))
    n = spectrum.n
    sel = cfg.get("delta_n", "all")
    if sel == "all":
        divisors = [d for d in range(1, n + 1) if n % d == 0]
    else:
        divisors = [int(d) for d in (sel if isinstance(sel, list) else parse_pattern(str(sel)))]
    band = _flat_band_size(spectrum)
    rows = []
    for dn in divisors:
        try:
            mmse = equidistant_mmse(spectrum, dn, noise)
            bound = aliasing_free_bound(spectrum, dn)
        except InvalidInputError as exc:
            raise ConfigError(f"field 'delta_n' entry {dn}: {exc}") from exc
        m = n // dn
        benchmark = None
        if band is not None and m >= band:
            benchmark = bandpass_error(spectrum.total_power, band, m, n, noise)
        rows.append(
            {
                "delta_n": dn,
                "m": m,
                "mmse": mmse,
                "alias_free_bound": bound,
                "benchmark": benchmark,
            }
        )
    return ["delta_n", "m", "mmse", "alias_free_bound", "benchmark"], rows


def cmd_bounds(cfg: dict, seed: int) -> tuple[list[str], list[dict]]:
    mcfg = cfg.get("model", {})
    spectrum = resolve_spectrum(mcfg)
    transform = resolve_transform(str(mcfg.get("transform", "dft")), spectrum.n)
    mu = float(cfg.get("mu", coherence(transform)))
    pcfg = dict(cfg.get("params", {}))
    noise = float(_require(cfg, "noise_power"))
    m = int(_require(cfg, "m"))
    try:
        gamma = float(pcfg.get("gamma", 0.5))
        theta = float(pcfg.get("theta", 0.5))
        rho = pcfg.get("rho")
        if rho is None:
            c_kd = math.sqrt(1.0 - theta) * math.sqrt(m / spectrum.n)
            rho = compressible_rho_max(gamma, c_kd)
        params = GeneralSupportParams(
            delta=float(pcfg.get("delta", 0.9)),
            kappa=float(pcfg.get("kappa", 1.5)),
            theta=theta,
            gamma=gamma,
            rho=float(rho),
            epsilon=float(pcfg.get("epsilon", 0.1)),
            m=m,
            n=spectrum.n,
            noise_power=noise,
        )
        report = general_support_bound(spectrum, params, mu)
    except InvalidInputError as exc:
        raise ConfigError(f"params: {exc}") from exc

    rows = [{"kind": "bound", "name": "general_support", "value": report.bound_value,
             "satisfied": None, "margin": None}]
    for key in sorted(report.constants):
        rows.append({"kind": "constant", "name": key, "value": report.constants[key],
                     "satisfied": None, "margin": None})
    for cond in report.conditions:
        rows.append({"kind": "condition", "name": cond.name, "value": None,
                     "satisfied": cond.satisfied, "margin": cond.margin})
    tail_trials = int(cfg.get("tail_trials", 0))
    if tail_trials > 0:
        model = SourceModel(transform, spectrum)
        frac = empirical_tail(
            model, m, noise, report.bound_value, tail_trials, seed,
            replacement=bool(cfg.get("tail_replacement", True)),
        )
        rows.append({"kind": "empirical", "name": "tail_fraction", "value": frac,
                     "satisfied": frac <= params.epsilon, "margin": params.epsilon - frac})
    return ["kind", "name", "value", "satisfied", "margin"], rows


def _save_transform(path: str, u: UnitaryTransform) -> None:
    data = [[[float(v.real), float(v.imag)] for v in row] for row in u.entries]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh)
        fh.write("\n")


def cmd_optimize(cfg: dict, seed: int) -> tuple[list[str], list[dict]]:
    spectrum = resolve_spectrum(cfg.get("model", cfg))
    channel = resolve_channel(_require(cfg, "channel"))
    opt_cfg = OptimizerConfig(
        max_steps=int(cfg.get("max_steps", 500)),
        step_init=float(cfg.get("step_init", 0.1)),
        armijo_c=float(cfg.get("armijo_c", 1e-4)),
        shrink=float(cfg.get("shrink", 0.5)),
        tol_residual=float(cfg.get("tol_residual", 1e-8)),
    )
    init = str(cfg.get("init", "haar"))
    restarts = int(cfg.get("restarts", 1)) if init == "haar" else 1
    if restarts < 1:
        raise ConfigError(f"field 'restarts' must be >= 1, got {restarts}")
    results = []
    for r in range(restarts):
        if init == "haar":
            u0 = random_unitary(spectrum.n, derive_seed(seed, r))
        else:
            u0 = resolve_transform(init, spectrum.n)
        results.append(optimize(spectrum, channel, u0, opt_cfg))
    best_idx = min(range(restarts), key=lambda i: results[i].objectives[-1])
    rows = []
    for r, res in enumerate(results):
        rows.append(
            {
                "restart": r,
                "objective": res.objectives[-1],
                "residual": res.residual,
                "steps": len(res.objectives) - 1,
                "converged": res.converged,
                "best": r == best_idx,
            }
        )
    save = cfg.get("save_transform")
    if save:
        _save_transform(str(save), results[best_idx].transform)
    return ["restart", "objective", "residual", "steps", "converged", "best"], rows


def cmd_mc(cfg: dict, seed: int) -> tuple[list[str], list[dict]]:
    target = str(cfg.get("target", "pattern"))
    trials = int(_require(cfg, "trials"))
    model = resolve_model(cfg.get("model", {}))
    if target == "pattern":
        noise = float(_require(cfg, "noise_power"))
        idx = _require(cfg, "pattern")
        idx = parse_pattern(idx) if isinstance(idx, str) else tuple(int(i) for i in idx)
        try:
            pattern = SamplingPattern(idx)
            est = empirical_mse(model, pattern, noise, trials, seed)
            analytic = mmse_for_pattern(model, pattern, noise).error
        except InvalidInputError as exc:
            raise ConfigError(f"field 'pattern': {exc}") from exc
    elif target == "average":
        channel = resolve_channel(_require(cfg, "channel"))
        est = average_mmse_mc(model, channel, trials, seed)
        analytic = None
        if channel.mode in (ChannelMode.SCALAR, ChannelMode.BERNOULLI) and model.n <= N_MAX_EXACT:
            analytic = average_mmse_exact(model, channel)
    else:
        raise ConfigError(f"field 'target' must be pattern|average, got '{target}'")
    abs_z = None
    if analytic is not None and est.stderr > 0:
        abs_z = abs(est.mean - analytic) / est.stderr
    rows = [
        {
            "target": target,
            "trials": est.trials,
            "mean": est.mean,
            "stderr": est.stderr,
            "analytic": analytic,
            "abs_z": abs_z,
        }
    ]
    return ["target", "trials", "mean", "stderr", "analytic", "abs_z"], rows


# ---------------------------------------------------------------------------
# Reproduction checklist
# ---------------------------------------------------------------------------


def _random_spectrum(rng: np.random.Generator, n: int, zeros: bool = True) -> Spectrum:
    lam = rng.random(n)
    if zeros:
        lam[rng.random(n) < 0.3] = 0.0
        if lam.sum() == 0.0:
            lam[0] = 1.0
    return Spectrum(tuple(float(v) for v in lam))


def _check_flat_scalar_optimum() -> tuple[bool, str]:
    worst = 0.0
    for n in range(2, 6):
        for support in (1, n):
            lam = tuple([1.0 / support] * support + [0.0] * (n - support))
            spectrum = Spectrum(lam)
            ch = ChannelSpec(0.7, ChannelMode.SCALAR)
            closed = scalar_flat_optimum(n, support, 1.0, 0.7)
            exact = average_mmse_exact(SourceModel(make_dft(n), spectrum), ch)
            worst = max(worst, abs(closed - exact))
            for s in range(10):
                j = average_mmse_exact(SourceModel(random_unitary(n, s), spectrum), ch)
                if j < closed - 1e-10:
                    return False, f"random transform beat the closed form: {j} < {closed}"
    return worst <= 1e-10, f"max |closed - enumeration| = {worst:.3e}"


def _check_worst_transform() -> tuple[bool, str]:
    rng = np.random.default_rng(100)
    for n in (2, 3, 4):
        spectrum = _random_spectrum(rng, n, zeros=False)
        for ch in (ChannelSpec(0.0, ChannelMode.SCALAR),
                   ChannelSpec(0.0, ChannelMode.BERNOULLI, p=0.3)):
            w = worst_unitary_value(spectrum, ch)
            j_id = average_mmse_exact(SourceModel(UnitaryTransform(np.eye(n)), spectrum), ch)
            if abs(j_id - w) > 1e-10:
                return False, f"identity value {j_id} != worst value {w}"
            for u in (make_dft(n), random_unitary(n, n)):
                if average_mmse_exact(SourceModel(u, spectrum), ch) > w + 1e-10:
                    return False, f"a transform exceeded the worst value {w}"
    return True, "identity attains the noiseless maximum; no tested transform exceeds it"


def _check_rank1() -> tuple[bool, str]:
    worst = 0.0
    for n in range(2, 7):
        spectrum = Spectrum((1.0,) + (0.0,) * (n - 1))
        model = SourceModel(make_dft(n), spectrum)
        for p in (0.2, 0.5, 0.8):
            ch = ChannelSpec(0.6, ChannelMode.BERNOULLI, p=p)
            diff = abs(rank1_average(n, 1.0, 0.6, p) - average_mmse_exact(model, ch))
            worst = max(worst, diff)
    return worst <= 1e-10, f"max |closed - enumeration| = {worst:.3e}"


def _check_circulantization() -> tuple[bool, str]:
    rng = np.random.default_rng(7)
    ch = ChannelSpec(0.8, ChannelMode.BERNOULLI, p=0.45)
    for _ in range(10):
        n = int(rng.integers(2, 6))
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        k_inv = a @ a.conj().T + 0.1 * np.eye(n)
        j0 = average_mmse_exact(SourceModel.from_covariance(np.linalg.inv(k_inv)), ch)
        j1 = average_mmse_exact(
            SourceModel.from_covariance(np.linalg.inv(circulant_average_inverse(k_inv))), ch
        )
        if j1 > j0 + 1e-10:
            return False, f"cyclic averaging increased the error: {j1} > {j0}"
    return True, "cyclic averaging never increased the exact average error (10 draws)"


def _check_counterexample() -> tuple[bool, str]:
    try:
        report = reproduce_counterexample()
    except ReproductionError as exc:
        return False, str(exc)
    spectrum = Spectrum((1 / 6, 2 / 6, 3 / 6))
    from .precoder import counterexample_transform

    mc = SourceModel(counterexample_transform(), spectrum)
    mf = SourceModel(make_dft(3), spectrum)
    for p in [0.1 * i for i in range(1, 10)]:
        ch = ChannelSpec(1.0, ChannelMode.BERNOULLI, p=p)
        if not average_mmse_exact(mc, ch) < average_mmse_exact(mf, ch):
            return False, f"ordering failed at p={p}"
    return True, (
        f"pair totals {report.pair_error_counter:.6f} < {report.pair_error_dft:.6f}; "
        f"max rel error {report.max_rel_error:.2e}"
    )


def _check_equidistant() -> tuple[bool, str]:
    rng = np.random.default_rng(21)
    worst = 0.0
    for n in (4, 6, 9, 12):
        for dn in [d for d in range(1, n + 1) if n % d == 0]:
            for _ in range(2):
                spectrum = _random_spectrum(rng, n)
                model = SourceModel(make_dft(n), spectrum)
                pattern = SamplingPattern(tuple(range(0, n, dn)))
                for s2 in (0.0, 0.1, 1.0):
                    diff = abs(
                        equidistant_mmse(spectrum, dn, s2)
                        - mmse_for_pattern(model, pattern, s2).error
                    )
                    worst = max(worst, diff)
    return worst <= 1e-10, f"max |closed form - per-pattern engine| = {worst:.3e}"


def _check_two_band_instance() -> tuple[bool, str]:
    value = equidistant_mmse(Spectrum((0.5, 0.25, 0.125, 0.125)), 2, 0.0)
    ok = abs(value - 11.0 / 30.0) <= 1e-12
    return ok, f"got {value!r}, expected 11/30 = {11 / 30!r}"


def _check_alias_free_bound() -> tuple[bool, str]:
    rng = np.random.default_rng(33)
    for n in (4, 6, 8):
        for dn in [d for d in range(2, n + 1) if n % d == 0]:
            for _ in range(5):
                spectrum = _random_spectrum(rng, n)
                err = equidistant_mmse(spectrum, dn, 0.0)
                bound = aliasing_free_bound(spectrum, dn)
                if err > bound + 1e-12:
                    return False, f"noiseless error {err} exceeded bound {bound}"
    return True, "noiseless error never exceeded twice the off-set power"


def _check_count_lower_bound() -> tuple[bool, str]:
    from itertools import combinations

    rng = np.random.default_rng(55)
    for n in range(2, 7):
        spectrum = _random_spectrum(rng, n)
        for u in (make_dft(n), UnitaryTransform(np.eye(n)), random_unitary(n, 3 * n)):
            model = SourceModel(u, spectrum)
            for m in range(n + 1):
                lb = mmse_lower_bound_fixed_m(spectrum, m, 0.7)
                for subset in combinations(range(n), m):
                    v = mmse_for_pattern(model, SamplingPattern(subset), 0.7).error
                    if lb > v + 1e-10:
                        return False, f"bound {lb} exceeded pattern error {v} (n={n}, m={m})"
    return True, "bound held for every pattern size on every tested transform"


def _check_gradient() -> tuple[bool, str]:
    rng = np.random.default_rng(77)
    h = 1e-5
    worst = 0.0
    for trial in range(5):
        n = int(rng.integers(2, 5))
        lam = rng.random(n) + 0.1
        spectrum = Spectrum(tuple(float(v) for v in lam))
        channel = ChannelSpec(0.8, ChannelMode.BERNOULLI, p=0.4)
        u = random_unitary(n, 1000 + trial)
        grad = euclidean_gradient(u, spectrum, channel)[:, list(spectrum.support)]
        u_b = u.entries[:, list(spectrum.support)]
        lam_b = spectrum.as_array()[list(spectrum.support)]
        patterns = list(_channel_patterns(channel, n))

        def raw(ub: np.ndarray) -> float:
            total = 0.0
            for w, subset in patterns:
                rows = ub[list(subset), :]
                mat = np.diag(1.0 / lam_b) + (rows.conj().T @ rows) / channel.noise_power
                total += w * float(np.trace(np.linalg.inv(mat)).real)
            return total

        for _ in range(5):
            d = rng.standard_normal(u_b.shape) + 1j * rng.standard_normal(u_b.shape)
            d /= np.linalg.norm(d)
            fd = (raw(u_b + h * d) - raw(u_b - h * d)) / (2 * h)
            an = 2.0 * float(np.sum(grad.conj() * d).real)
            worst = max(worst, abs(fd - an) / max(abs(fd), 1e-12))
    return worst <= 1e-6, f"max relative difference vs central differences = {worst:.3e}"


def _check_stationarity() -> tuple[bool, str]:
    worst = 0.0
    for n in (3, 4, 6):
        for support in (1, n // 2, n):
            if support < 1:
                continue
            lam = tuple([1.0 / support] * support + [0.0] * (n - support))
            spectrum = Spectrum(lam)
            channel = ChannelSpec(0.7, ChannelMode.SCALAR)
            for u in (make_dft(n), UnitaryTransform(np.eye(n))):
                worst = max(worst, stationarity_residual(u, spectrum, channel).residual)
    return worst <= 1e-8, f"max tangent residual at reference transforms = {worst:.3e}"


VERIFY_ITEMS: list[tuple[str, Callable[[], tuple[bool, str]]]] = [
    ("flat-scalar-optimum", _check_flat_scalar_optimum),
    ("worst-transform-noiseless", _check_worst_transform),
    ("rank1-binomial-average", _check_rank1),
    ("circulant-inverse-averaging", _check_circulantization),
    ("counterexample-reference-errors", _check_counterexample),
    ("equidistant-closed-form", _check_equidistant),
    ("two-band-alias-instance", _check_two_band_instance),
    ("alias-free-power-bound", _check_alias_free_bound),
    ("sampled-count-lower-bound", _check_count_lower_bound),
    ("gradient-finite-difference", _check_gradient),
    ("stationarity-reference-transforms", _check_stationarity),
]


def cmd_verify(_cfg: dict) -> tuple[list[str], list[dict]]:
    rows = []
    for name, check in VERIFY_ITEMS:
        passed, detail = check()
        rows.append({"name": name, "passed": passed, "detail": detail})
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
    return ["name", "passed", "detail"], rows


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file (command line wins)")
    parser.add_argument("--seed", type=int, help="64-bit base seed")
    parser.add_argument("--out", help="output file (stdout if omitted)")
    parser.add_argument("--format", choices=("csv", "json"), help="output format")
    parser.add_argument("--threads", type=int,
                        help=f"enumeration workers (default ${THREADS_ENV} or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="erasure-mmse",
        description="Estimation-error experiments for randomly sampled Gaussian vectors",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mmse", help="per-pattern exact MMSE table")
    _add_common(p)
    p.add_argument("--pattern", action="append", dest="patterns",
                   help="indices like '0,2' (repeatable; '' = no measurements)")
    p.add_argument("--noise-power", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--spectrum")
    p.add_argument("--support", type=int)
    p.add_argument("--power", type=float)
    p.add_argument("--transform")

    p = sub.add_parser("average", help="exact channel-average vs reference transforms")
    _add_common(p)
    p.add_argument("--mode", choices=("scalar", "bernoulli"))
    p.add_argument("--p-grid", dest="p_grid", help="comma-separated keep probabilities")
    p.add_argument("--noise-power", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--spectrum")
    p.add_argument("--support", type=int)
    p.add_argument("--power", type=float)
    p.add_argument("--transform")

    p = sub.add_parser("cwss", help="equidistant-sampling closed forms")
    _add_common(p)
    p.add_argument("--delta-n", dest="delta_n", help="comma-separated divisors or 'all'")
    p.add_argument("--noise-power", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--spectrum")
    p.add_argument("--support", type=int)
    p.add_argument("--power", type=float)

    p = sub.add_parser("bounds", help="high-probability bound report")
    _add_common(p)
    p.add_argument("--m", type=int, help="number of measurements")
    p.add_argument("--noise-power", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--tail-trials", dest="tail_trials", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--spectrum")
    p.add_argument("--support", type=int)
    p.add_argument("--power", type=float)
    p.add_argument("--transform")

    p = sub.add_parser("optimize", help="search for a favorable unitary precoder")
    _add_common(p)
    p.add_argument("--restarts", type=int)
    p.add_argument("--max-steps", dest="max_steps", type=int)
    p.add_argument("--init", help="dft|identity|haar")
    p.add_argument("--save-transform", dest="save_transform")
    p.add_argument("--mode", choices=("scalar", "bernoulli"))
    p.add_argument("--p", type=float)
    p.add_argument("--noise-power", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--spectrum")
    p.add_argument("--support", type=int)
    p.add_argument("--power", type=float)

    p = sub.add_parser("mc", help="Monte Carlo consistency run")
    _add_common(p)
    p.add_argument("--target", choices=("pattern", "average"))
    p.add_argument("--trials", type=int)
    p.add_argument("--pattern")
    p.add_argument("--mode")
    p.add_argument("--p", type=float)
    p.add_argument("--m", type=int)
    p.add_argument("--noise-power", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--spectrum")
    p.add_argument("--support", type=int)
    p.add_argument("--power", type=float)
    p.add_argument("--transform")

    p = sub.add_parser("verify-paper", help="run the built-in reproduction checklist")
    _add_common(p)

    return parser


_MODEL_KEYS = ("n", "spectrum", "support", "power", "transform")
_CHANNEL_KEYS = ("mode", "p", "m", "noise_power")


def _merge_config(args: argparse.Namespace) -> dict:
    cfg = _load_config(args.config)
    if "command" in cfg and cfg["command"] != args.command:
        raise ConfigError(
            f"config file is for command '{cfg['command']}', not '{args.command}'"
        )
    overrides = {k: v for k, v in vars(args).items() if v is not None}
    command = args.command

    def put(section: str, key: str, value: Any) -> None:
        cfg.setdefault(section, {})
        cfg[section][key] = value

    for key, value in overrides.items():
        if key in ("config", "command", "seed", "out", "format", "threads"):
            continue
        if key == "spectrum" and isinstance(value, str):
            value = parse_spectrum_values(value)
        if key in _MODEL_KEYS and command in ("mmse", "average", "cwss", "bounds", "optimize", "mc"):
            put("model", key, value)
        elif key in _CHANNEL_KEYS and command in ("optimize", "mc"):
            if command == "mc" and key == "noise_power":
                cfg["noise_power"] = value
                put("channel", key, value)
            else:
                put("channel", key, value)
        elif key == "p_grid":
            cfg["p_grid"] = [float(v) for v in str(value).split(",")]
        elif key == "patterns":
            cfg["patterns"] = value
        else:
            cfg[key] = value
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _merge_config(args)
        seed = int(args.seed if args.seed is not None else cfg.get("seed", 0))
        out = args.out if args.out is not None else cfg.get("out")
        fmt = args.format if args.format is not None else cfg.get("format", "csv")
        threads = args.threads if args.threads is not None else int(
            cfg.get("threads", os.environ.get(THREADS_ENV, "1"))
        )
        if fmt not in ("csv", "json"):
            raise ConfigError(f"field 'format' must be csv|json, got '{fmt}'")

        if args.command == "mmse":
            columns, rows = cmd_mmse(cfg)
        elif args.command == "average":
            columns, rows = cmd_average(cfg, threads=threads)
        elif args.command == "cwss":
            columns, rows = cmd_cwss(cfg)
        elif args.command == "bounds":
            columns, rows = cmd_bounds(cfg, seed)
        elif args.command == "optimize":
            columns, rows = cmd_optimize(cfg, seed)
        elif args.command == "mc":
            columns, rows = cmd_mc(cfg, seed)
        else:
            columns, rows = cmd_verify(cfg)
            if not all(r["passed"] for r in rows):
                if out is not None:
                    write_output(out, render_output(args.command, columns, rows, fmt))
                return 4
        write_output(out, render_output(args.command, columns, rows, fmt))
        return 0
    except (ConfigError, InvalidInputError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ReproductionError as exc:
        print(f"reproduction failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
