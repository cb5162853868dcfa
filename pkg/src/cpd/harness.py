"""Configuration-driven Monte Carlo experiments over the solvers and bounds.

An experiment fixes a ground-truth signal, a noise model, a confidence
parameter ``t``, and a regularization rule, then runs independent trials:
sample noise, solve, and check the relevant guarantee.  Coverage summaries
come with exact binomial confidence intervals.  Per-trial seeds are derived
as ``base_seed XOR trial_index``, so results are identical no matter how
trials are scheduled across workers.

Config files are flat ``key = value`` text (``#`` comments).  Keys: either
``signal_file`` (noiseless series CSV) or ``n``/``changepoints``/``levels``
inline (levels ``;``-separated, vector components ``,``-separated), plus
``sigma``, ``family``, ``t``, exactly one of ``lambda`` / ``lambda_rule``
(``envelope_sqrt_n`` or ``detection``), ``mode``, ``n_trials``,
``base_seed``, optional ``group`` and ``solver_tol``.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import beta as beta_dist

from .bounds import (
    build_bound_profile,
    detection_parameters,
    detection_parameters_group,
    noise_envelope_group,
    noise_envelope_scalar,
)
from .detect import hausdorff_distance, round_offset, screen_group, screen_scalar
from .errors import SolverError, ValidationError
from .signal import (
    NoiseSpec,
    PiecewiseSignal,
    max_partial_sum_stat,
    read_series_csv,
    sample_noise,
    signal_from_series,
    signal_stats,
)
from .solver1d import solve_fused_lasso
from .solvernd import solve_group_fused_lasso

MODES = ("elementwise", "sos", "detection", "partial_sum_event")
LAMBDA_RULES = ("envelope_sqrt_n", "detection")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description; see the module docstring for keys."""

    signal: PiecewiseSignal
    sigma: float
    family: str
    t: float
    mode: str
    n_trials: int
    base_seed: int
    lam: float | None = None
    lam_rule: str | None = None
    group: bool = False
    solver_tol: float = 1e-8

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.n_trials < 1:
            raise ValidationError("n_trials must be >= 1")
        if (self.lam is None) == (self.lam_rule is None):
            raise ValidationError("exactly one of lambda / lambda_rule must be set")
        if self.lam_rule is not None and self.lam_rule not in LAMBDA_RULES:
            raise ValidationError(f"lambda_rule must be one of {LAMBDA_RULES}")
        if not self.group and self.signal.p != 1:
            raise ValidationError("vector-valued signal requires group = true")


@dataclass(frozen=True)
class TrialRecord:
    """One Monte Carlo trial; fields not touched by the mode stay None."""

    trial_index: int
    seed: int
    max_abs_error: float | None = None
    elementwise_ok: bool | None = None
    sos_value: float | None = None
    sos_ok: bool | None = None
    dh: float | None = None
    dh_ok: bool | None = None
    n_detected: int | None = None
    partial_sum_stat: float | None = None
    event_ok: bool | None = None
    solver_diag: float | None = None


@dataclass(frozen=True)
class Summary:
    """Coverage of the mode's guarantee with an exact binomial 95% CI.

    ``passed`` compares coverage against ``1 - 1/t^2`` minus a three-sigma
    Monte Carlo slack (the theory bound is one-sided; we test non-violation,
    not tightness).
    """

    mode: str
    n_trials: int
    n_pass: int
    coverage: float
    ci_low: float
    ci_high: float
    theory_floor: float
    mc_slack: float
    passed: bool


@dataclass(frozen=True)
class _Plan:
    """Everything a worker needs, precomputed once and picklable."""

    x: np.ndarray
    truth: tuple[int, ...]
    sigma: float
    family: str
    mode: str
    group: bool
    base_seed: int
    lam: float
    envelope: float
    solver_tol: float
    per_index: np.ndarray | None
    aggregate_bound: float | None
    offset: int | None
    threshold: float | None
    dh_guarantee: float | None


def resolve_lambda(cfg: ExperimentConfig):
    """Return ``(lam, envelope, stats)`` for the configured rule."""
    stats = signal_stats(cfg.signal)
    n = cfg.signal.n
    if cfg.group:
        envelope = noise_envelope_group(cfg.sigma, n, cfg.t, cfg.signal.p)
    else:
        envelope = noise_envelope_scalar(cfg.sigma, n, cfg.t, cfg.family)
    if cfg.lam is not None:
        return cfg.lam, envelope, stats
    if cfg.lam_rule == "envelope_sqrt_n":
        return envelope * math.sqrt(n), envelope, stats
    if cfg.group:
        sep = stats.min_jump * stats.min_segment_length ** (2.0 / 3.0) / (96.0 * envelope)
        if sep <= 1.0:
            raise ValidationError("signal too weak for the group detection rule")
        return detection_parameters_group(stats.min_segment_length, envelope, sep).lam, envelope, stats
    params = detection_parameters(stats.min_jump, stats.min_segment_length, envelope)
    return params.lam, envelope, stats


def _build_plan(cfg: ExperimentConfig) -> _Plan:
    lam, envelope, stats = resolve_lambda(cfg)
    x = cfg.signal.materialize()
    per_index = None
    aggregate = None
    offset = None
    threshold = None
    dh_guarantee = None
    if cfg.mode in ("elementwise", "sos"):
        profile = build_bound_profile(
            stats, cfg.sigma, cfg.t, lam,
            family=cfg.family, group=cfg.group, p=cfg.signal.p,
        )
        per_index = profile.per_index
        aggregate = profile.aggregate_bound
    elif cfg.mode == "detection":
        if cfg.group:
            sep = stats.min_jump * stats.min_segment_length ** (2.0 / 3.0) / (96.0 * envelope)
            if sep <= 1.0:
                raise ValidationError("signal too weak for the group detection regime")
            params = detection_parameters_group(stats.min_segment_length, envelope, sep)
        else:
            params = detection_parameters(stats.min_jump, stats.min_segment_length, envelope)
        offset = round_offset(params.offset)
        threshold = params.threshold
        dh_guarantee = params.dh_guarantee
    return _Plan(
        x=x,
        truth=stats.detectable_set,
        sigma=cfg.sigma,
        family=cfg.family,
        mode=cfg.mode,
        group=cfg.group,
        base_seed=cfg.base_seed,
        lam=lam,
        envelope=envelope,
        solver_tol=cfg.solver_tol,
        per_index=per_index,
        aggregate_bound=aggregate,
        offset=offset,
        threshold=threshold,
        dh_guarantee=dh_guarantee,
    )


def _run_trial(plan: _Plan, trial_index: int) -> TrialRecord:
    seed = plan.base_seed ^ trial_index
    spec = NoiseSpec(sigma=plan.sigma, family=plan.family, seed=seed)
    x = plan.x
    eps = sample_noise(spec, x.shape)
    y = x + eps

    if plan.mode == "partial_sum_event":
        stat = max_partial_sum_stat(eps)
        return TrialRecord(
            trial_index=trial_index,
            seed=seed,
            partial_sum_stat=stat,
            event_ok=bool(stat <= plan.envelope),
        )

    if plan.group:
        sol = solve_group_fused_lasso(y, plan.lam, tol=plan.solver_tol)
        if not sol.converged:
            raise SolverError(
                f"trial {trial_index}: group solver gap {sol.duality_gap:.3e} "
                f"after {sol.iterations} sweeps"
            )
        estimate = sol.Xhat
        errors = np.linalg.norm(estimate - x, axis=1)
        diag = sol.duality_gap
    else:
        sol = solve_fused_lasso(y, plan.lam)
        estimate = sol.xhat
        errors = np.abs(estimate - x)
        diag = sol.kkt_residual

    if plan.mode == "detection":
        if plan.group:
            res = screen_group(estimate, plan.offset, plan.threshold)
        else:
            res = screen_scalar(estimate, plan.offset, plan.threshold)
        dh = math.inf if res.is_empty else hausdorff_distance(res.detected, plan.truth)
        return TrialRecord(
            trial_index=trial_index,
            seed=seed,
            dh=dh,
            dh_ok=bool(dh <= plan.dh_guarantee),
            n_detected=len(res.detected),
            solver_diag=diag,
        )

    # elementwise and sos modes share the same per-trial numbers
    sq = float(np.sum(errors**2))
    sos_value = sq if plan.group else sq / plan.x.shape[0]
    return TrialRecord(
        trial_index=trial_index,
        seed=seed,
        max_abs_error=float(np.max(errors)),
        elementwise_ok=bool(np.all(errors <= plan.per_index)),
        sos_value=sos_value,
        sos_ok=bool(sos_value <= plan.aggregate_bound),
        dh=None,
        dh_ok=None,
        n_detected=None,
        partial_sum_stat=None,
        event_ok=None,
        solver_diag=diag,
    )


_FLAG_FOR_MODE = {
    "elementwise": "elementwise_ok",
    "sos": "sos_ok",
    "detection": "dh_ok",
    "partial_sum_event": "event_ok",
}


def binomial_ci(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    """Exact (Clopper-Pearson) two-sided confidence interval for k/n."""
    alpha = 1.0 - level
    lo = 0.0 if k == 0 else float(beta_dist.ppf(alpha / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(beta_dist.ppf(1 - alpha / 2, k + 1, n - k))
    return lo, hi


def summarize(cfg: ExperimentConfig, records: list[TrialRecord]) -> Summary:
    flag = _FLAG_FOR_MODE[cfg.mode]
    n = len(records)
    k = sum(1 for r in records if getattr(r, flag))
    q = 1.0 / cfg.t**2
    slack = 3.0 * math.sqrt(q * (1 - q) / n)
    lo, hi = binomial_ci(k, n)
    coverage = k / n
    return Summary(
        mode=cfg.mode,
        n_trials=n,
        n_pass=k,
        coverage=coverage,
        ci_low=lo,
        ci_high=hi,
        theory_floor=1.0 - q,
        mc_slack=slack,
        passed=bool(coverage >= 1.0 - q - slack),
    )


def run_experiment(
    cfg: ExperimentConfig, workers: int = 1
) -> tuple[list[TrialRecord], Summary]:
    """Run all trials (optionally in parallel) and summarize coverage.

    Deterministic for a fixed config: per-trial seeding makes the records
    independent of worker count and scheduling; records are ordered by
    trial index before aggregation.
    """
    plan = _build_plan(cfg)
    indices = range(cfg.n_trials)
    if workers <= 1:
        records = [_run_trial(plan, i) for i in indices]
    else:
        chunk = max(1, cfg.n_trials // (4 * workers))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_trial, [plan] * cfg.n_trials, indices, chunksize=chunk))
    records.sort(key=lambda r: r.trial_index)
    return records, summarize(cfg, records)


# --- records CSV -------------------------------------------------------------

_COLUMNS = (
    "trial_index",
    "seed",
    "max_abs_error",
    "elementwise_ok",
    "sos_value",
    "sos_ok",
    "dh",
    "dh_ok",
    "n_detected",
    "partial_sum_stat",
    "event_ok",
    "solver_diag",
)
_INT_COLUMNS = {"trial_index", "seed", "n_detected"}
_BOOL_COLUMNS = {"elementwise_ok", "sos_ok", "dh_ok", "event_ok"}


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_records(path, records) -> None:
    """Write trial records as CSV (header row, shortest-round-trip floats)."""
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(_COLUMNS)
            for rec in records:
                writer.writerow([_cell(getattr(rec, c)) for c in _COLUMNS])
    except OSError as exc:
        raise ValidationError(f"cannot write {path}: {exc}") from exc


def read_records(path) -> list[TrialRecord]:
    """Read back a records CSV written by :func:`write_records`."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != list(_COLUMNS):
                raise ValidationError(f"{path}: unexpected header {header}")
            out = []
            for lineno, row in enumerate(reader, start=2):
                if len(row) != len(_COLUMNS):
                    raise ValidationError(
                        f"{path}:{lineno}: expected {len(_COLUMNS)} columns, got {len(row)}"
                    )
                kwargs = {}
                for name, cell in zip(_COLUMNS, row):
                    if cell == "":
                        kwargs[name] = None
                        continue
                    try:
                        if name in _INT_COLUMNS:
                            kwargs[name] = int(cell)
                        elif name in _BOOL_COLUMNS:
                            if cell not in ("true", "false"):
                                raise ValueError(f"bad boolean {cell!r}")
                            kwargs[name] = cell == "true"
                        else:
                            kwargs[name] = float(cell)
                    except ValueError as exc:
                        raise ValidationError(f"{path}:{lineno}: {exc}") from exc
                out.append(TrialRecord(**kwargs))
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    return out


# --- config files ------------------------------------------------------------


def _parse_levels(text: str):
    levels = []
    for part in text.split(";"):
        comps = [c for c in part.strip().split(",") if c.strip() != ""]
        if not comps:
            raise ValidationError(f"empty level in {text!r}")
        vals = [float(c) for c in comps]
        levels.append(vals[0] if len(vals) == 1 else tuple(vals))
    dims = {1 if np.isscalar(v) else len(v) for v in levels}
    if len(dims) > 1:
        raise ValidationError("levels must share a common dimension")
    return levels


def parse_config(path) -> ExperimentConfig:
    """Parse a flat ``key = value`` experiment file into a config."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc

    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        key = key.strip()
        if key in pairs:
            raise ValidationError(f"{path}:{lineno}: duplicate key {key!r}")
        pairs[key] = value.strip()

    known = {
        "signal_file", "n", "changepoints", "levels", "sigma", "family", "t",
        "lambda", "lambda_rule", "mode", "n_trials", "base_seed", "group",
        "solver_tol",
    }
    unknown = set(pairs) - known
    if unknown:
        raise ValidationError(f"{path}: unknown keys {sorted(unknown)}")

    def need(key):
        if key not in pairs:
            raise ValidationError(f"{path}: missing required key {key!r}")
        return pairs[key]

    try:
        if "signal_file" in pairs:
            series_path = Path(pairs["signal_file"])
            if not series_path.is_absolute():
                series_path = path.parent / series_path
            signal = signal_from_series(read_series_csv(series_path))
        else:
            from .signal import make_signal

            signal = make_signal(
                int(need("n")),
                [int(c) for c in need("changepoints").split(",")],
                _parse_levels(need("levels")),
            )
        group_default = signal.p > 1
        group = pairs.get("group", "true" if group_default else "false").lower()
        if group not in ("true", "false"):
            raise ValidationError(f"group must be true/false, got {group!r}")
        cfg = ExperimentConfig(
            signal=signal,
            sigma=float(need("sigma")),
            family=pairs.get("family", "gaussian"),
            t=float(need("t")),
            mode=need("mode"),
            n_trials=int(need("n_trials")),
            base_seed=int(pairs.get("base_seed", "0")),
            lam=float(pairs["lambda"]) if "lambda" in pairs else None,
            lam_rule=pairs.get("lambda_rule"),
            group=group == "true",
            solver_tol=float(pairs.get("solver_tol", "1e-8")),
        )
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    return cfg
