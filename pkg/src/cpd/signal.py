"""Piecewise-constant signals, noise sampling, and partial-sum statistics.

Conventions: series positions are 1-based in documentation and CSV files and
0-based in arrays.  A signal with segments starting at positions
``1 = n_1 < n_2 < ... < n_K`` has detectable change points ``{n_2, ..., n_K}``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError

NOISE_FAMILIES = ("gaussian", "sub_gaussian_bounded", "sub_exponential")

_MAX_SEED = 2**64


@dataclass(frozen=True)
class PiecewiseSignal:
    """Ground-truth piecewise-constant signal.

    Parameters
    ----------
    n : int
        Series length.
    changepoints : tuple of int
        1-based start position of each segment; strictly increasing with
        ``changepoints[0] == 1``.
    levels : tuple
        One level per segment: floats for a scalar series, equal-length
        tuples of floats for a vector series.  Adjacent levels differ.
    p : int
        Level dimension (1 for the scalar case).
    """

    n: int
    changepoints: tuple[int, ...]
    levels: tuple
    p: int

    @property
    def num_segments(self) -> int:
        return len(self.changepoints)

    @property
    def detectable_set(self) -> tuple[int, ...]:
        """1-based positions of the jumps (all segment starts except the first)."""
        return self.changepoints[1:]

    def materialize(self) -> np.ndarray:
        """Expand to the full series: shape ``(n,)`` if p == 1, else ``(n, p)``."""
        starts = list(self.changepoints) + [self.n + 1]
        if self.p == 1:
            x = np.empty(self.n)
            for k, level in enumerate(self.levels):
                x[starts[k] - 1 : starts[k + 1] - 1] = level
        else:
            x = np.empty((self.n, self.p))
            for k, level in enumerate(self.levels):
                x[starts[k] - 1 : starts[k + 1] - 1, :] = level
        x.setflags(write=False)
        return x


@dataclass(frozen=True)
class SignalStats:
    """Structural quantities derived from a :class:`PiecewiseSignal`.

    ``depth[i]`` is ``min(i + 1 - s_k, s_{k+1} - i)`` for 1-based position
    ``i`` inside the segment starting at ``s_k`` (next segment at
    ``s_{k+1}``), i.e. a 1-based distance to the nearest segment boundary.
    ``min_jump`` is ``+inf`` for a single-segment signal.
    """

    segment_lengths: tuple[int, ...]
    min_segment_length: int
    min_jump: float
    harmonic_mean_length: float
    depth: np.ndarray
    segment_index: np.ndarray

    @property
    def num_segments(self) -> int:
        return len(self.segment_lengths)

    @property
    def n(self) -> int:
        return int(sum(self.segment_lengths))

    @property
    def changepoints(self) -> tuple[int, ...]:
        starts = np.cumsum((1,) + self.segment_lengths[:-1])
        return tuple(int(s) for s in starts)

    @property
    def detectable_set(self) -> tuple[int, ...]:
        return self.changepoints[1:]


@dataclass(frozen=True)
class NoiseSpec:
    """I.i.d. noise description: scale, distribution family, and RNG seed.

    Families (all centered, variance ``sigma**2``):

    - ``gaussian``: normal.
    - ``sub_gaussian_bounded``: uniform on ``[-sigma*sqrt(3), sigma*sqrt(3)]``.
    - ``sub_exponential``: Laplace with scale ``sigma/sqrt(2)``.
    """

    sigma: float
    family: str = "gaussian"
    seed: int = 0

    def __post_init__(self):
        if not (self.sigma > 0) or not math.isfinite(self.sigma):
            raise ValidationError(f"sigma must be positive and finite, got {self.sigma}")
        if self.family not in NOISE_FAMILIES:
            raise ValidationError(
                f"unknown noise family {self.family!r}; expected one of {NOISE_FAMILIES}"
            )
        if not (0 <= self.seed < _MAX_SEED):
            raise ValidationError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class Observation:
    """A noisy series, optionally carrying its ground truth and noise spec."""

    y: np.ndarray
    signal_ref: PiecewiseSignal | None = None
    noise_spec: NoiseSpec | None = None

    def __post_init__(self):
        self.y.setflags(write=False)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return 1 if self.y.ndim == 1 else self.y.shape[1]


def make_signal(n: int, changepoints, levels) -> PiecewiseSignal:
    """Validate and build a :class:`PiecewiseSignal`.

    ``changepoints`` are 1-based segment starts (first must be 1, all <= n,
    strictly increasing); ``levels`` has one entry per segment and adjacent
    entries must differ.  Scalar levels give ``p == 1``; sequences of equal
    length ``p`` give a vector signal.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValidationError(f"n must be a positive integer, got {n!r}")
    cps = [int(c) for c in changepoints]
    if len(cps) == 0:
        raise ValidationError("changepoints must be nonempty")
    if cps[0] != 1:
        raise ValidationError(f"first changepoint must be 1, got {cps[0]}")
    if any(b <= a for a, b in zip(cps, cps[1:])):
        raise ValidationError(f"changepoints must be strictly increasing, got {cps}")
    if cps[-1] > n:
        raise ValidationError(f"last changepoint {cps[-1]} exceeds n={n}")
    levels = list(levels)
    if len(levels) != len(cps):
        raise ValidationError(
            f"levels has {len(levels)} entries but there are {len(cps)} segments"
        )

    scalar = np.isscalar(levels[0]) or np.ndim(levels[0]) == 0
    if scalar:
        lv = tuple(float(v) for v in levels)
        p = 1
        if not all(math.isfinite(v) for v in lv):
            raise ValidationError("levels must be finite")
    else:
        rows = [tuple(float(c) for c in row) for row in levels]
        p = len(rows[0])
        if p < 1 or any(len(r) != p for r in rows):
            raise ValidationError("vector levels must share a common positive dimension")
        if not all(math.isfinite(c) for r in rows for c in r):
            raise ValidationError("levels must be finite")
        lv = tuple(rows)
    for k in range(len(lv) - 1):
        if lv[k] == lv[k + 1]:
            raise ValidationError(f"adjacent segments {k + 1} and {k + 2} have equal levels")
    return PiecewiseSignal(n=int(n), changepoints=tuple(cps), levels=lv, p=p)


def signal_stats(sig: PiecewiseSignal) -> SignalStats:
    """Compute segment lengths, minimal jump size, and per-position depths."""
    starts = list(sig.changepoints) + [sig.n + 1]
    lengths = tuple(starts[k + 1] - starts[k] for k in range(sig.num_segments))

    if sig.num_segments == 1:
        min_jump = math.inf
    else:
        lv = np.asarray(sig.levels, dtype=float)
        diffs = (lv[1:] - lv[:-1]).reshape(sig.num_segments - 1, -1)
        min_jump = float(np.min(np.linalg.norm(diffs, axis=1)))

    harmonic = len(lengths) / sum(1.0 / m for m in lengths)

    depth = np.empty(sig.n, dtype=np.int64)
    seg_idx = np.empty(sig.n, dtype=np.int64)
    for k in range(sig.num_segments):
        lo, hi = starts[k], starts[k + 1]  # 1-based [lo, hi)
        pos = np.arange(lo, hi)
        depth[lo - 1 : hi - 1] = np.minimum(pos + 1 - lo, hi - pos)
        seg_idx[lo - 1 : hi - 1] = k
    depth.setflags(write=False)
    seg_idx.setflags(write=False)

    return SignalStats(
        segment_lengths=lengths,
        min_segment_length=min(lengths),
        min_jump=min_jump,
        harmonic_mean_length=harmonic,
        depth=depth,
        segment_index=seg_idx,
    )


def _rng_for(seed: int) -> np.random.Generator:
    # Philox is counter-based: streams keyed by the 64-bit seed are
    # independent and reproducible regardless of worker scheduling.
    return np.random.Generator(np.random.Philox(key=seed))


def sample_noise(spec: NoiseSpec, shape) -> np.ndarray:
    """Draw i.i.d. noise of the given shape from ``spec``'s family."""
    rng = _rng_for(spec.seed)
    if spec.family == "gaussian":
        return rng.standard_normal(shape) * spec.sigma
    if spec.family == "sub_gaussian_bounded":
        half_width = spec.sigma * math.sqrt(3.0)
        return rng.uniform(-half_width, half_width, shape)
    return rng.laplace(0.0, spec.sigma / math.sqrt(2.0), shape)


def sample_observation(sig: PiecewiseSignal, spec: NoiseSpec) -> Observation:
    """Return ``x + eps`` for one noise draw; bit-identical for equal inputs."""
    x = sig.materialize()
    eps = sample_noise(spec, x.shape)
    return Observation(y=x + eps, signal_ref=sig, noise_spec=spec)


def max_partial_sum_stat(eps) -> float:
    """Largest normalized window sum, ``max_{k<=l} |sum(eps[k:l])| / sqrt(l-k+1)``.

    Euclidean norms are used for vector inputs.  O(n^2) via prefix sums.
    """
    arr = np.asarray(eps, dtype=float)
    if arr.size == 0:
        raise ValidationError("max_partial_sum_stat requires a nonempty input")
    if arr.ndim == 1:
        arr = arr[:, None]
    n = arr.shape[0]
    prefix = np.zeros((n + 1, arr.shape[1]))
    np.cumsum(arr, axis=0, out=prefix[1:])
    best = 0.0
    for length in range(1, n + 1):
        window = prefix[length:] - prefix[:-length]
        peak = float(np.max(np.linalg.norm(window, axis=1)))
        best = max(best, peak / math.sqrt(length))
    return best


def signal_from_series(x) -> PiecewiseSignal:
    """Reconstruct a :class:`PiecewiseSignal` from a noiseless materialized series.

    Segment boundaries are taken at exact value changes, so this is only
    meaningful for clean (not noisy) series.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        rows = arr[:, None]
    else:
        rows = arr
    if rows.shape[0] < 1:
        raise ValidationError("series is empty")
    changed = np.any(rows[1:] != rows[:-1], axis=1)
    starts = [1] + [int(i) + 2 for i in np.flatnonzero(changed)]
    if arr.ndim == 1:
        levels = [float(arr[s - 1]) for s in starts]
    else:
        levels = [tuple(float(v) for v in rows[s - 1]) for s in starts]
    return make_signal(rows.shape[0], starts, levels)


# --- CSV formats -----------------------------------------------------------
#
# Series file: header "index,value" (scalar) or "index,v1,...,vp"; one row per
# position, 1-based index, shortest round-trip float representation.
# Changepoint sidecar: header "k,n_k,level" or "k,n_k,l1,...,lp"; one row per
# segment.


def _fmt(v: float) -> str:
    return repr(float(v))


def write_series_csv(path, y) -> None:
    arr = np.asarray(y, dtype=float)
    rows = arr[:, None] if arr.ndim == 1 else arr
    p = rows.shape[1]
    header = ["index", "value"] if p == 1 else ["index"] + [f"v{j + 1}" for j in range(p)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i, row in enumerate(rows, start=1):
            writer.writerow([i] + [_fmt(v) for v in row])


def read_series_csv(path) -> np.ndarray:
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or len(header) < 2 or header[0] != "index":
                raise ValidationError(f"{path}: expected header starting with 'index'")
            p = len(header) - 1
            rows = []
            for lineno, rec in enumerate(reader, start=2):
                if len(rec) != p + 1:
                    raise ValidationError(f"{path}:{lineno}: expected {p + 1} columns")
                try:
                    idx = int(rec[0])
                    vals = [float(v) for v in rec[1:]]
                except ValueError as exc:
                    raise ValidationError(f"{path}:{lineno}: {exc}") from exc
                if idx != lineno - 1:
                    raise ValidationError(f"{path}:{lineno}: indices must run 1..n in order")
                rows.append(vals)
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    arr = np.asarray(rows)
    return arr[:, 0] if p == 1 else arr


def write_changepoint_csv(path, sig: PiecewiseSignal) -> None:
    header = ["k", "n_k", "level"] if sig.p == 1 else ["k", "n_k"] + [
        f"l{j + 1}" for j in range(sig.p)
    ]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for k, (start, level) in enumerate(zip(sig.changepoints, sig.levels), start=1):
            vals = [level] if sig.p == 1 else list(level)
            writer.writerow([k, start] + [_fmt(v) for v in vals])


def read_changepoint_csv(path, n: int) -> PiecewiseSignal:
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or len(header) < 3 or header[:2] != ["k", "n_k"]:
                raise ValidationError(f"{path}: expected header 'k,n_k,level...'")
            p = len(header) - 2
            starts, levels = [], []
            for lineno, rec in enumerate(reader, start=2):
                if len(rec) != p + 2:
                    raise ValidationError(f"{path}:{lineno}: expected {p + 2} columns")
                try:
                    starts.append(int(rec[1]))
                    vals = [float(v) for v in rec[2:]]
                except ValueError as exc:
                    raise ValidationError(f"{path}:{lineno}: {exc}") from exc
                levels.append(vals[0] if p == 1 else tuple(vals))
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    return make_signal(n, starts, levels)
