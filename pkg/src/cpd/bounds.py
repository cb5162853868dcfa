"""High-probability error bounds for fused-lasso estimates.

Everything here is a deterministic formula: given the structural statistics
of the true signal, the noise scale, a confidence parameter ``t`` (the bounds
hold with probability ``1 - 1/t^2``), and the regularization weight, these
functions return concrete numbers.  Natural logarithms throughout (the
Gaussian tail algebra behind the envelope only closes with ``ln``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .signal import NOISE_FAMILIES, SignalStats

#: multiplier for the sub-exponential envelope; the theory fixes only the
#: O(log n) order, the constant is a package choice
SUB_EXPONENTIAL_CONSTANT = 2.0


@dataclass(frozen=True)
class BoundProfile:
    """Per-index error bounds plus their aggregate, at confidence 1 - 1/t^2.

    ``per_index[i]`` bounds ``|xhat_i - x_i|`` (scalar) or the row norm
    (group); ``aggregate_bound`` bounds the mean squared error in the scalar
    regime and the *unnormalized* sum of squared row errors in the group
    regime.
    """

    envelope: float
    per_index: np.ndarray
    aggregate_bound: float
    confidence: float
    t: float
    lam: float
    regime: str

    def __post_init__(self):
        self.per_index.setflags(write=False)


@dataclass(frozen=True)
class DetectionParams:
    """Screening parameters for the scalar regime.

    ``separation`` is the margin ratio C > 2 with ``min_jump * sqrt(W) =
    8 * C * envelope``; ``offset`` is real-valued (rounding is the
    detector's concern); the guarantee bounds the set distance between the
    screened indices and the true jumps.
    """

    separation: float
    lam: float
    offset: float
    dh_guarantee: float
    threshold: float


@dataclass(frozen=True)
class GroupDetectionParams:
    """Screening parameters for the group regime (derived from C > 1).

    ``lam_in_window`` reports whether the prescribed weight also satisfies
    the admissible window of the group elementwise bound; it is checked and
    reported, never silently assumed.
    """

    separation: float
    min_jump: float
    lam: float
    offset: float
    dh_guarantee: float
    threshold: float
    lam_in_window: bool


def _check_positive(**kwargs):
    for name, v in kwargs.items():
        if not (v > 0) or not math.isfinite(v):
            raise ValidationError(f"{name} must be positive and finite, got {v}")


def noise_envelope_scalar(sigma: float, n: int, t: float, family: str = "gaussian") -> float:
    """Envelope M with ``max normalized partial sum <= M`` w.p. >= 1 - 1/t^2.

    gaussian: ``2*sigma*sqrt(ln n + ln t)``; the bounded (uniform) family
    substitutes its sub-Gaussian parameter ``sigma*sqrt(3)``; the
    sub-exponential family scales as ``C*sigma*(ln n + ln t)``.
    """
    _check_positive(sigma=sigma, n=n)
    if t <= 1:
        raise ValidationError(f"t must exceed 1, got {t}")
    if family not in NOISE_FAMILIES:
        raise ValidationError(f"unknown noise family {family!r}")
    log_nt = math.log(n) + math.log(t)
    if family == "gaussian":
        return 2.0 * sigma * math.sqrt(log_nt)
    if family == "sub_gaussian_bounded":
        return 2.0 * (sigma * math.sqrt(3.0)) * math.sqrt(log_nt)
    return SUB_EXPONENTIAL_CONSTANT * sigma * log_nt


def noise_envelope_group(sigma: float, n: int, t: float, p: int) -> float:
    """Group-noise envelope ``sigma * max(sqrt(8(ln n + ln t) + p), 2*sqrt(p))``."""
    _check_positive(sigma=sigma, n=n, p=p)
    if t <= 1:
        raise ValidationError(f"t must exceed 1, got {t}")
    log_nt = math.log(n) + math.log(t)
    return sigma * max(math.sqrt(8.0 * log_nt + p), 2.0 * math.sqrt(p))


def elementwise_error_bound(stats: SignalStats, lam: float, envelope: float) -> np.ndarray:
    """Scalar per-index bound ``max(M/sqrt(d_i), M^2/(4 lam), 2 lam/m + 2M/sqrt(m))``."""
    if not (lam > 0):
        raise ValidationError("lam must be positive (the M^2/(4 lam) term needs it)")
    if envelope < 0:
        raise ValidationError("envelope must be nonnegative")
    m = np.asarray(stats.segment_lengths, dtype=float)[stats.segment_index]
    d = stats.depth.astype(float)
    bound = np.maximum(
        envelope / np.sqrt(d),
        np.maximum(envelope**2 / (4.0 * lam), 2.0 * lam / m + 2.0 * envelope / np.sqrt(m)),
    )
    return bound


def mean_squared_error_bound(stats: SignalStats, lam: float, envelope: float, n: int) -> float:
    """Scalar bound on ``(1/n) * sum (xhat_i - x_i)^2``."""
    if not (lam > 0):
        raise ValidationError("lam must be positive")
    m = np.asarray(stats.segment_lengths, dtype=float)
    k = stats.num_segments
    return (
        envelope**4 / (16.0 * lam**2)
        + (8.0 * lam**2 / n) * float(np.sum(1.0 / m))
        + (2.0 / n) * envelope**2 * (4.0 + k + float(np.sum(np.log(m))))
    )


def group_lambda_window(stats: SignalStats, envelope: float) -> tuple[float, float]:
    """Admissible ``lam`` interval ``[625*M, min_k(7 m_k - sqrt(m_k)) * M)``."""
    m = np.asarray(stats.segment_lengths, dtype=float)
    upper = float(np.min(7.0 * m - np.sqrt(m))) * envelope
    return 625.0 * envelope, upper


def _require_group_window(stats: SignalStats, lam: float, envelope: float):
    if envelope == 0.0:
        # noiseless limit: the window closes to a point but the bounds
        # degenerate gracefully, so the hypothesis is vacuous
        return
    lo, hi = group_lambda_window(stats, envelope)
    if not (lo <= lam < hi):
        raise ValidationError(
            f"lam={lam} outside the admissible group window [{lo}, {hi})"
        )


def elementwise_error_bound_group(
    stats: SignalStats, lam: float, envelope: float
) -> np.ndarray:
    """Group per-index bound on the row error norm.

    Requires ``625*M <= lam < min_k(7 m_k - sqrt(m_k)) * M``; violations are
    errors, not clamps.  The boundary-distance term is applied two-sidedly
    through the depth.
    """
    _require_group_window(stats, lam, envelope)
    m = np.asarray(stats.segment_lengths, dtype=float)[stats.segment_index]
    d = stats.depth.astype(float)
    t1 = 4.0 * (envelope * np.sqrt(m / 2.0) + lam) / m
    t2 = 50.0 * envelope / np.sqrt(m)
    t3 = 25.0 * math.sqrt(5.0) * envelope / np.sqrt(d)
    t4 = 125.0 * math.sqrt(envelope**3 / lam)
    return np.maximum(np.maximum(t1, t2), np.maximum(t3, t4))


def sum_squared_error_bound_group(
    stats: SignalStats, lam: float, envelope: float, n: int
) -> float:
    """Group bound on the *unnormalized* ``sum_i ||xhat_i - x_i||^2``."""
    _require_group_window(stats, lam, envelope)
    m = np.asarray(stats.segment_lengths, dtype=float)
    k = stats.num_segments
    return (
        6250.0 * envelope**2 * float(np.sum(np.log(m)))
        + 6000.0 * k * envelope**2
        + 32.0 * lam**2 * k / stats.harmonic_mean_length
        + 125.0**2 * envelope**6 * n / lam
    )


def detection_parameters(min_jump: float, min_segment: int, envelope: float) -> DetectionParams:
    """Scalar screening parameters from the jump/segment geometry.

    Requires ``min_jump * sqrt(min_segment) > 16 * envelope`` (strict);
    then ``C = min_jump*sqrt(W)/(8M) > 2``, ``lam = (C-1)*M*sqrt(W)``,
    ``offset = W/(4 C^2)`` and the guarantee ``W/(2 C^2) == 32 M^2/H^2``.
    """
    if not math.isfinite(min_jump):
        raise ValidationError("signal has no detectable jumps (single segment)")
    _check_positive(min_jump=min_jump, min_segment=min_segment, envelope=envelope)
    strength = min_jump * math.sqrt(min_segment)
    if not (strength > 16.0 * envelope):
        raise ValidationError(
            "signal too weak for the screening regime: "
            f"min_jump*sqrt(min_segment)={strength:.6g} <= 16*envelope={16 * envelope:.6g}"
        )
    c = strength / (8.0 * envelope)
    return DetectionParams(
        separation=c,
        lam=(c - 1.0) * envelope * math.sqrt(min_segment),
        offset=min_segment / (4.0 * c**2),
        dh_guarantee=min_segment / (2.0 * c**2),
        threshold=min_jump / 2.0,
    )


def detection_parameters_group(
    min_segment: int, envelope: float, separation: float
) -> GroupDetectionParams:
    """Group screening parameters for a chosen margin ratio ``separation > 1``.

    Prescribes the jump size ``H = 96*C*M / W^(2/3)`` the regime is designed
    for, with ``lam = (6C-2)*M*W^(2/3)``, ``offset = (5/(24C))*W^(1/3)`` and
    guarantee ``(5/(12C))*W^(1/3)``.
    """
    _check_positive(min_segment=min_segment, envelope=envelope)
    if not (separation > 1.0):
        raise ValidationError(f"separation must exceed 1, got {separation}")
    c = float(separation)
    w23 = float(min_segment) ** (2.0 / 3.0)
    w13 = float(min_segment) ** (1.0 / 3.0)
    min_jump = 96.0 * c * envelope / w23
    lam = (6.0 * c - 2.0) * envelope * w23
    window_hi = (7.0 * min_segment - math.sqrt(min_segment)) * envelope
    return GroupDetectionParams(
        separation=c,
        min_jump=min_jump,
        lam=lam,
        offset=(5.0 / (24.0 * c)) * w13,
        dh_guarantee=(5.0 / (12.0 * c)) * w13,
        threshold=min_jump / 2.0,
        lam_in_window=bool(625.0 * envelope <= lam < window_hi),
    )


def build_bound_profile(
    stats: SignalStats,
    sigma: float,
    t: float,
    lam: float,
    family: str = "gaussian",
    group: bool = False,
    p: int = 1,
) -> BoundProfile:
    """Assemble envelope, per-index bounds, and the aggregate bound."""
    n = stats.n
    if group:
        envelope = noise_envelope_group(sigma, n, t, p)
        per_index = elementwise_error_bound_group(stats, lam, envelope)
        aggregate = sum_squared_error_bound_group(stats, lam, envelope, n)
        regime = "group"
    else:
        envelope = noise_envelope_scalar(sigma, n, t, family)
        per_index = elementwise_error_bound(stats, lam, envelope)
        aggregate = mean_squared_error_bound(stats, lam, envelope, n)
        regime = "scalar"
    return BoundProfile(
        envelope=envelope,
        per_index=per_index,
        aggregate_bound=aggregate,
        confidence=1.0 - 1.0 / t**2,
        t=t,
        lam=lam,
        regime=regime,
    )
