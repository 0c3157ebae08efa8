"""Rate-quality curves, cross-over bitrates, and bitrate ladders.

Quality is interpolated monotonically against ln(bitrate): RD behavior
is near-linear in log rate and log-domain bisection stays
well-conditioned across the kbps-to-Mbps range.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import ContractError, DegenerateCurveError, ValidationError

#: The four streaming resolutions, smallest first: SD, HD, FHD, UHD.
LADDER_RESOLUTIONS = ((720, 480), (1280, 720), (1920, 1080), (3840, 2160))

METRICS = ("ypsnr", "vmaf")

CROSS_OVER_REL_TOL = 1e-3


@dataclass(frozen=True)
class RDPoint:
    bitrate: float  # kbps
    quality: float
    qp: int | None = None

    def __post_init__(self):
        if self.bitrate <= 0:
            raise ValidationError(f"bitrate must be positive, got {self.bitrate}")


@dataclass
class RDCurve:
    resolution: tuple
    metric: str
    points: list  # RDPoint, strictly increasing in bitrate and quality
    _interp: object = field(default=None, repr=False, compare=False)

    @property
    def min_bitrate(self):
        return self.points[0].bitrate

    @property
    def max_bitrate(self):
        return self.points[-1].bitrate

    def _interpolator(self):
        if self._interp is None:
            lb = np.log([p.bitrate for p in self.points])
            q = np.array([p.quality for p in self.points])
            self._interp = PchipInterpolator(lb, q)
        return self._interp


def build_rd_curve(samples, resolution, metric):
    """Sort samples by bitrate and keep only the Pareto frontier.

    A point is dropped when some other point has no higher bitrate and
    no lower quality.  The survivors are strictly increasing in both
    coordinates.
    """
    if metric not in METRICS:
        raise ValidationError(f"unknown metric {metric!r}")
    if len(samples) < 2:
        raise DegenerateCurveError(
            f"{resolution}/{metric}: need at least 2 samples, got {len(samples)}"
        )
    if metric == "vmaf":
        for p in samples:
            if not 0.0 <= p.quality <= 100.0:
                raise ValidationError(f"VMAF quality out of range: {p.quality}")
    ordered = sorted(samples, key=lambda p: (p.bitrate, -p.quality))
    kept = []
    best_quality = -math.inf
    for p in ordered:
        if p.quality > best_quality:
            kept.append(p)
            best_quality = p.quality
    if len(kept) < 2:
        raise DegenerateCurveError(
            f"{resolution}/{metric}: fewer than 2 points survive Pareto cleaning"
        )
    return RDCurve(resolution=tuple(resolution), metric=metric, points=kept)


def interpolate_quality(curve, bitrate):
    """Monotone piecewise-cubic quality at a bitrate inside the curve range."""
    if not curve.min_bitrate <= bitrate <= curve.max_bitrate:
        raise ContractError(
            f"bitrate {bitrate} outside curve range "
            f"[{curve.min_bitrate}, {curve.max_bitrate}]"
        )
    return float(curve._interpolator()(math.log(bitrate)))


def _quality_clamped(curve, bitrate):
    b = min(max(bitrate, curve.min_bitrate), curve.max_bitrate)
    return interpolate_quality(curve, b)


def cross_over(lower, higher, max_bitrate):
    """Bitrate where the higher-resolution curve overtakes the lower one.

    On the common bitrate range: the lowest-bitrate sign change of
    (higher - lower), bisected to 0.1% relative tolerance.  Higher
    dominating everywhere returns the higher curve's minimum bitrate;
    lower dominating everywhere returns max_bitrate.
    """
    if lower.metric != higher.metric:
        raise ContractError(
            f"metric mismatch: {lower.metric} vs {higher.metric}"
        )
    lo = max(lower.min_bitrate, higher.min_bitrate)
    hi = min(lower.max_bitrate, higher.max_bitrate)
    if lo > hi:
        # No overlap: ranges must at least be orderable.
        if higher.min_bitrate > lower.max_bitrate:
            return higher.min_bitrate
        raise ContractError(
            "curves have disjoint, non-orderable bitrate ranges"
        )
    llo, lhi = math.log(lo), math.log(hi)
    grid = np.linspace(llo, lhi, 513)
    diff = higher._interpolator()(grid) - lower._interpolator()(grid)
    if np.all(diff >= 0):
        return higher.min_bitrate
    if np.all(diff <= 0):
        return max_bitrate
    sign = np.sign(diff)
    idx = None
    for i in range(len(grid) - 1):
        if sign[i] == 0:
            return float(math.exp(grid[i]))
        if sign[i] * sign[i + 1] < 0:
            idx = i
            break
    if idx is None:
        return float(math.exp(grid[np.nonzero(sign == 0)[0][0]]))
    a, b = grid[idx], grid[idx + 1]
    fa = diff[idx]
    tol = math.log1p(CROSS_OVER_REL_TOL)
    while b - a > tol:
        m = 0.5 * (a + b)
        fm = higher._interpolator()(m) - lower._interpolator()(m)
        if fm == 0:
            return float(math.exp(m))
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return float(math.exp(0.5 * (a + b)))


@dataclass(frozen=True)
class CrossOverSet:
    p1: float
    p2: float
    p3: float
    metric: str

    def as_tuple(self):
        return (self.p1, self.p2, self.p3)


@dataclass(frozen=True)
class BitrateLadder:
    cross_overs: CrossOverSet
    resolutions: tuple = LADDER_RESOLUTIONS


def monotone_clamp(p1, p2, p3):
    """Forward clamping so P1 <= P2 <= P3."""
    p2 = max(p2, p1)
    p3 = max(p3, p2)
    return p1, p2, p3


def eel_ladder(curves, max_bitrate=None):
    """Exhaustive-encoding ladder from the four per-resolution curves.

    `curves` maps resolution tuples to RDCurve.  The default
    max_bitrate is the highest bitrate observed across all curves.
    """
    missing = [r for r in LADDER_RESOLUTIONS if r not in curves]
    if missing:
        raise ContractError(f"missing resolutions: {missing}")
    metrics = {curves[r].metric for r in LADDER_RESOLUTIONS}
    if len(metrics) != 1:
        raise ContractError(f"mixed metrics in ladder curves: {sorted(metrics)}")
    if max_bitrate is None:
        max_bitrate = max(curves[r].max_bitrate for r in LADDER_RESOLUTIONS)
    raw = []
    for lo_res, hi_res in zip(LADDER_RESOLUTIONS[:-1], LADDER_RESOLUTIONS[1:]):
        try:
            raw.append(cross_over(curves[lo_res], curves[hi_res], max_bitrate))
        except ContractError as exc:
            raise ContractError(f"{lo_res}-{hi_res}: {exc}") from exc
    p1, p2, p3 = monotone_clamp(*raw)
    return BitrateLadder(CrossOverSet(p1, p2, p3, metrics.pop()))


def hull_resolution_index(ladder, bitrate):
    """0..3 index of the resolution the hull rule selects at a bitrate."""
    p1, p2, p3 = ladder.cross_overs.as_tuple()
    if bitrate < p1:
        return 0
    if bitrate < p2:
        return 1
    if bitrate < p3:
        return 2
    return 3


def convex_hull(curves, ladder):
    """bitrate -> (resolution, quality) map induced by a ladder.

    Quality is read from the selected resolution's curve, with the
    query clamped to that curve's bitrate range.
    """

    def lookup(bitrate):
        res = ladder.resolutions[hull_resolution_index(ladder, bitrate)]
        return res, _quality_clamped(curves[res], bitrate)

    return lookup
