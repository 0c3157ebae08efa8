"""Synthetic clips and RD samples for desk-scale testing.

The rate model r(qp) = r0 * 2^((qp0 - qp) / 6) encodes the usual
"+6 QP halves the rate" rule, so ladders built from synthetic samples
have analytically known cross-overs when the noise is zero.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import ValidationError
from .media_io import VideoClip, write_frames
from .rd_core import LADDER_RESOLUTIONS, RDPoint

SYNTH_REF_QP = 32


@dataclass(frozen=True)
class ResolutionLaw:
    """q(r) = min(q_cap, a + b * ln r) + noise, rate anchored at QP 32."""

    q_cap: float
    intercept: float
    slope: float
    noise_sigma: float = 0.0
    rate_at_ref_qp: float = 1000.0

    def __post_init__(self):
        if self.slope <= 0:
            raise ValidationError("slope must be positive")


@dataclass(frozen=True)
class SynthParams:
    laws: dict  # resolution tuple -> ResolutionLaw
    seed: int = 0

    def __post_init__(self):
        caps = [self.laws[r].q_cap for r in sorted(self.laws, key=lambda t: t[0] * t[1])]
        if any(b < a for a, b in zip(caps, caps[1:])):
            raise ValidationError("quality caps must not decrease with resolution")


def synth_rd(params, qp_set):
    """Deterministic RD samples per resolution from the synthetic laws."""
    out = {}
    for i, resolution in enumerate(sorted(params.laws, key=lambda t: t[0] * t[1])):
        law = params.laws[resolution]
        rng = np.random.default_rng(np.random.SeedSequence([int(params.seed), i]))
        points = []
        for qp in qp_set:
            rate = law.rate_at_ref_qp * 2.0 ** ((SYNTH_REF_QP - qp) / 6.0)
            quality = min(law.q_cap, law.intercept + law.slope * math.log(rate))
            if law.noise_sigma > 0:
                quality += float(rng.normal(0.0, law.noise_sigma))
            points.append(RDPoint(bitrate=rate, quality=quality, qp=qp))
        out[resolution] = points
    return out


def synth_clip(path, clip_id, width, height, frames, texture_sigma, motion,
               seed, fps=60.0):
    """Write a seeded filtered-noise clip translated toroidally per frame.

    Returns the VideoClip record describing the written file.  Chroma is
    flat 128 (achromatic), so colorfulness-driven cases stay trivial.
    """
    if width % 2 or height % 2:
        raise ValidationError("dimensions must be even")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xC11F]))
    base = rng.normal(0.0, 1.0, size=(height, width))
    base = ndimage.gaussian_filter(base, sigma=1.5, mode="wrap")
    # Renormalize after smoothing so texture_sigma is the pixel std.
    base = base / max(base.std(), 1e-12) * texture_sigma + 128.0
    cb = np.full((height // 2, width // 2), 128, dtype=np.uint8)
    cr = cb

    def frame_iter():
        for t in range(frames):
            shift = int(round(motion * t))
            luma = np.roll(base, (shift, shift), axis=(0, 1))
            yield np.clip(np.rint(luma), 0, 255).astype(np.uint8), cb, cr

    write_frames(path, frame_iter())
    return VideoClip(
        clip_id=clip_id,
        path=str(path),
        width=width,
        height=height,
        fps=fps,
        frame_count=frames,
    )


@dataclass(frozen=True)
class CorpusClipSpec:
    """One synthetic clip plus its feature-coupled RD laws."""

    clip_id: str
    texture_sigma: float
    motion: float
    seed: int
    params: SynthParams = field(repr=False)


def corpus_specs(n_clips, seed, rd_noise_sigma=0.15):
    """Design a corpus whose cross-overs are driven by clip complexity.

    Texture and motion strengths are drawn per clip; the RD laws are
    derived so every cross-over sits at ln P_k = base_k + complexity,
    which the extracted features can recover.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xC0]))
    slopes = (2.0, 3.2, 4.6, 6.4)
    caps = (200.0, 210.0, 220.0, 230.0)
    specs = []
    for i in range(n_clips):
        texture = float(rng.uniform(2.0, 28.0))
        motion = float(rng.uniform(0.0, 4.0))
        complexity = math.log1p(texture) + 0.35 * motion
        ln_p = [5.0 + complexity, 6.2 + complexity, 7.4 + complexity]
        # Anchor the SD curve at 35 quality units at P1, then chain the
        # other intercepts so consecutive curves meet exactly at ln_p.
        intercepts = [35.0 - slopes[0] * ln_p[0]]
        for k in range(3):
            intercepts.append(
                intercepts[k] + (slopes[k] - slopes[k + 1]) * ln_p[k]
            )
        anchors = [
            math.exp(ln_p[0]),
            math.exp(0.5 * (ln_p[0] + ln_p[1])),
            math.exp(0.5 * (ln_p[1] + ln_p[2])),
            math.exp(ln_p[2] + 0.5),
        ]
        laws = {
            res: ResolutionLaw(
                q_cap=caps[k],
                intercept=intercepts[k],
                slope=slopes[k],
                noise_sigma=rd_noise_sigma,
                rate_at_ref_qp=anchors[k],
            )
            for k, res in enumerate(LADDER_RESOLUTIONS)
        }
        specs.append(
            CorpusClipSpec(
                clip_id=f"synth{i:04d}",
                texture_sigma=texture,
                motion=motion,
                seed=int(seed) * 100003 + i,
                params=SynthParams(laws=laws, seed=int(seed) * 7 + i),
            )
        )
    return specs
