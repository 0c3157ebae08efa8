"""Live feature set: 40 low-complexity DCT-energy statistics per clip.

Four per-frame series are reduced with the same ten statistics each:
spatial energy E, temporal energy h, relative energy gradient eps, and
brightness BR.
"""

from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .errors import ContractError, LadderError, ValidationError
from .media_io import read_frames
from .stats import ten_stats

ENERGY_BLOCK = 32

_STAT_SUFFIXES = ("mean", "std", "min", "max", "p25", "p50", "p75", "iqr", "skw", "kur")

LIVE_FEATURE_NAMES = tuple(
    f"{stat}_{series}" for series in ("E", "h", "eps", "BR") for stat in _STAT_SUFFIXES
)


@dataclass(frozen=True)
class LiveFeatureVector:
    values: tuple

    def __post_init__(self):
        if len(self.values) != 40:
            raise ValidationError(f"expected 40 features, got {len(self.values)}")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("non-finite feature value")

    def as_array(self):
        return np.asarray(self.values, dtype=np.float64)


def _trimmed_plane(plane):
    """Float64 plane cropped to full 32x32 blocks, plus the tiling shape."""
    plane = np.asarray(plane, dtype=np.float64)
    h, w = plane.shape
    nh, nw = h // ENERGY_BLOCK, w // ENERGY_BLOCK
    if nh == 0 or nw == 0:
        raise ContractError(
            f"plane {w}x{h} smaller than one {ENERGY_BLOCK}x{ENERGY_BLOCK} block"
        )
    return plane[: nh * ENERGY_BLOCK, : nw * ENERGY_BLOCK], nh, nw


def _energies_from_trimmed(trimmed, nh, nw):
    # DCT over a strided 4-D view avoids materializing per-block copies.
    coef = sfft.dctn(
        trimmed.reshape(nh, ENERGY_BLOCK, nw, ENERGY_BLOCK),
        axes=(1, 3),
        norm="ortho",
    )
    np.abs(coef, out=coef)
    coef[:, 0, :, 0] = 0.0
    return coef.sum(axis=(1, 3)).reshape(-1) / (ENERGY_BLOCK * ENERGY_BLOCK)


def block_energies(luma):
    """Per-block texture energies: mean |AC coefficient| of the orthonormal DCT-II.

    Blocks are ordered row-major over the tiling.
    """
    return _energies_from_trimmed(*_trimmed_plane(luma))


def block_texture_energy(luma):
    """(E, br): mean block texture energy and mean luma of the tiled area."""
    trimmed, nh, nw = _trimmed_plane(luma)
    return (
        float(_energies_from_trimmed(trimmed, nh, nw).mean()),
        float(trimmed.mean()),
    )


def temporal_energy(prev_blocks, curr_blocks):
    """h: mean absolute difference of co-located block energies."""
    prev_blocks = np.asarray(prev_blocks, dtype=np.float64)
    curr_blocks = np.asarray(curr_blocks, dtype=np.float64)
    if prev_blocks.shape != curr_blocks.shape:
        raise ContractError("block tilings differ between frames")
    return float(np.abs(curr_blocks - prev_blocks).mean())


def energy_gradient(h_prev, h_curr):
    """eps = |h_curr - h_prev| / h_prev, with eps := 0 when h_prev = 0."""
    if h_prev < 0 or h_curr < 0:
        raise ContractError("temporal energies must be non-negative")
    if h_prev == 0.0:
        return 0.0
    return abs(h_curr - h_prev) / h_prev


def extract_live(clip):
    """Extract the 40-dimensional live feature vector of a clip.

    Frame 0 has no h value and the first two frames have no eps value;
    those series are statistics over the remaining frames only.
    """
    if clip.frame_count < 3:
        raise ValidationError(f"{clip.clip_id}: live features need >= 3 frames")
    e_series = []
    br_series = []
    h_series = []
    prev_blocks = None
    try:
        for y, _, _ in read_frames(clip):
            trimmed, nh, nw = _trimmed_plane(y)
            energies = _energies_from_trimmed(trimmed, nh, nw)
            e_series.append(float(energies.mean()))
            br_series.append(float(trimmed.mean()))
            if prev_blocks is not None:
                h_series.append(temporal_energy(prev_blocks, energies))
            prev_blocks = energies
    except LadderError as exc:
        raise type(exc)(f"{clip.clip_id}: {exc}") from exc
    eps_series = [
        energy_gradient(h_series[i - 1], h_series[i]) for i in range(1, len(h_series))
    ]
    values = []
    for series in (e_series, h_series, eps_series, br_series):
        values.extend(ten_stats(series))
    return LiveFeatureVector(tuple(values))
