"""Raw planar YUV420P (I420) reading/writing and Lanczos-3 resampling.

Frames are 8-bit only.  Dimensions always come from the manifest, never
from the file size (raw YUV carries no header); the file size is only
checked for consistency.
"""

import os
from dataclasses import dataclass

import numpy as np

from .errors import TruncatedFileError, ValidationError


@dataclass(frozen=True)
class VideoClip:
    """A raw 4:2:0 clip as declared by a manifest entry."""

    clip_id: str
    path: str
    width: int
    height: int
    fps: float
    frame_count: int
    bit_depth: int = 8
    pixel_format: str = "yuv420p"

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0 or self.width % 2 or self.height % 2:
            raise ValidationError(
                f"{self.clip_id}: dimensions must be even and positive, "
                f"got {self.width}x{self.height}"
            )
        if self.frame_count < 2:
            raise ValidationError(f"{self.clip_id}: frame_count must be >= 2")
        if self.bit_depth != 8:
            raise ValidationError(f"{self.clip_id}: only 8-bit supported")
        if self.pixel_format.lower() != "yuv420p":
            raise ValidationError(f"{self.clip_id}: only yuv420p supported")

    @property
    def frame_bytes(self):
        return self.width * self.height * 3 // 2

    @property
    def duration_seconds(self):
        return self.frame_count / self.fps


def read_frames(clip):
    """Yield (luma, cb, cr) uint8 planes for every frame of the clip.

    Chroma planes are (height/2, width/2).  A short file raises
    TruncatedFileError naming the failing frame index.
    """
    if not os.path.isfile(clip.path):
        raise ValidationError(f"{clip.clip_id}: file not found: {clip.path}")
    expected = clip.frame_count * clip.frame_bytes
    actual = os.path.getsize(clip.path)
    if actual > expected:
        raise ValidationError(
            f"{clip.clip_id}: file size {actual} exceeds header-implied {expected}"
        )
    w, h = clip.width, clip.height
    cw, ch = w // 2, h // 2
    with open(clip.path, "rb") as f:
        for i in range(clip.frame_count):
            buf = f.read(clip.frame_bytes)
            if len(buf) < clip.frame_bytes:
                raise TruncatedFileError(clip.path, i)
            raw = np.frombuffer(buf, dtype=np.uint8)
            y = raw[: w * h].reshape(h, w)
            cb = raw[w * h : w * h + cw * ch].reshape(ch, cw)
            cr = raw[w * h + cw * ch :].reshape(ch, cw)
            yield y, cb, cr


def write_frames(path, frames):
    """Write (luma, cb, cr) uint8 triples as an I420 file."""
    with open(path, "wb") as f:
        for y, cb, cr in frames:
            f.write(np.ascontiguousarray(y, dtype=np.uint8).tobytes())
            f.write(np.ascontiguousarray(cb, dtype=np.uint8).tobytes())
            f.write(np.ascontiguousarray(cr, dtype=np.uint8).tobytes())


def _lanczos3_kernel(t):
    t = np.abs(t)
    out = np.zeros_like(t)
    core = (t > 1e-12) & (t < 3.0)
    tc = t[core]
    out[core] = 3.0 * np.sin(np.pi * tc) * np.sin(np.pi * tc / 3.0) / (np.pi**2 * tc**2)
    out[t <= 1e-12] = 1.0
    return out


def _lanczos3_matrix(n_in, n_out):
    """Dense (n_out, n_in) row-normalized Lanczos-3 weight matrix.

    Centers map with the half-pixel convention; out-of-range taps are
    clamped to the edge sample.
    """
    scale = n_in / n_out
    centers = (np.arange(n_out) + 0.5) * scale - 0.5
    left = np.floor(centers).astype(np.int64) - 2
    taps = left[:, None] + np.arange(6)[None, :]
    w = _lanczos3_kernel(centers[:, None] - taps)
    w /= w.sum(axis=1, keepdims=True)
    taps = np.clip(taps, 0, n_in - 1)
    mat = np.zeros((n_out, n_in))
    rows = np.repeat(np.arange(n_out), 6)
    np.add.at(mat, (rows, taps.ravel()), w.ravel())
    return mat


def _round_half_away(x):
    return np.copysign(np.floor(np.abs(x) + 0.5), x)


def lanczos3_resample(plane, out_width, out_height):
    """Separable Lanczos-3 resample of a uint8 plane.

    Clamp-to-edge boundary; output rounded half away from zero and
    clamped to [0, 255].  Identity-size calls are bit-exact.
    """
    if out_width <= 0 or out_height <= 0:
        raise ValidationError(f"bad output dimensions {out_width}x{out_height}")
    plane = np.asarray(plane)
    in_h, in_w = plane.shape
    if (out_width, out_height) == (in_w, in_h):
        return plane.astype(np.uint8, copy=True)
    data = plane.astype(np.float64)
    if out_height != in_h:
        data = _lanczos3_matrix(in_h, out_height) @ data
    if out_width != in_w:
        data = data @ _lanczos3_matrix(in_w, out_width).T
    return np.clip(_round_half_away(data), 0, 255).astype(np.uint8)


def resample_clip_frames(frames, out_width, out_height):
    """Resample full 4:2:0 triples (luma and both chroma planes)."""
    for y, cb, cr in frames:
        yield (
            lanczos3_resample(y, out_width, out_height),
            lanczos3_resample(cb, out_width // 2, out_height // 2),
            lanczos3_resample(cr, out_width // 2, out_height // 2),
        )
