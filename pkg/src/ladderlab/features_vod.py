"""VoD feature set: 30 spatio-temporal statistics per clip.

Per-frame descriptors: five GLCM texture descriptors, spatial
information (SI), colorfulness (CF), and a Laplacian noise estimate.
Per consecutive-pair descriptors: temporal coherence (TC) block
statistics, temporal information (TI), and normalized cross correlation
(NCC).  Sequence level mean/std (population) of each descriptor fill
slots F1..F30.
"""

from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft, ndimage

from . import stats
from .errors import ContractError, LadderError, ValidationError
from .media_io import read_frames

GLCM_LEVELS = 32
TC_BLOCK = 32

VOD_FEATURE_NAMES = (
    # GLCM: correlation, contrast, energy, homogeneity, entropy
    "meanGLCM_cor", "stdGLCM_cor",
    "meanGLCM_con", "stdGLCM_con",
    "meanGLCM_enr", "stdGLCM_enr",
    "meanGLCM_hom", "stdGLCM_hom",
    "meanGLCM_ent", "stdGLCM_ent",
    # TC block statistics
    "meanTC_mean", "meanTC_std",
    "stdTC_mean", "stdTC_std",
    "meanTC_skw", "stdTC_skw",
    "meanTC_kur", "stdTC_kur",
    "meanTC_entr", "stdTC_entr",
    "mean_SI", "std_SI",
    "mean_TI", "std_TI",
    "mean_CF", "std_CF",
    "mean_Noise", "std_Noise",
    "mean_NCC", "std_NCC",
)


@dataclass(frozen=True)
class VodFeatureVector:
    values: tuple

    def __post_init__(self):
        if len(self.values) != 30:
            raise ValidationError(f"expected 30 features, got {len(self.values)}")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("non-finite feature value")

    def as_array(self):
        return np.asarray(self.values, dtype=np.float64)


def glcm_descriptors(luma, offsets=((0, 1), (1, 0))):
    """(contrast, correlation, energy, homogeneity, entropy) of the luma plane.

    32 gray levels; by default offsets (0,1) and (1,0) pooled into one
    symmetric co-occurrence distribution; entropy base 2 with 0*log0 := 0.
    """
    luma = np.asarray(luma)
    if luma.shape[0] < 2 or luma.shape[1] < 2:
        raise ContractError("GLCM needs a plane of at least 2x2")
    q = (luma.astype(np.int64) >> 3) if luma.dtype == np.uint8 else (
        np.clip(luma, 0, 255).astype(np.int64) * GLCM_LEVELS // 256
    )
    h, w = q.shape
    counts = np.zeros(GLCM_LEVELS**2, dtype=np.int64)
    for di, dj in offsets:
        a = q[: h - di, : w - dj]
        b = q[di:, dj:]
        counts += np.bincount(
            (a * GLCM_LEVELS + b).ravel(), minlength=GLCM_LEVELS**2
        )
    m = counts.reshape(GLCM_LEVELS, GLCM_LEVELS).astype(np.float64)
    m = m + m.T
    p = m / m.sum()

    idx = np.arange(GLCM_LEVELS, dtype=np.float64)
    di = idx[:, None] - idx[None, :]
    contrast = float(np.sum(p * di**2))
    energy = float(np.sum(p**2))
    homogeneity = float(np.sum(p / (1.0 + di**2)))
    nz = p[p > 0]
    entropy = float(-np.sum(nz * np.log2(nz)))
    mu = float(np.sum(idx * p.sum(axis=1)))
    var = float(np.sum(idx**2 * p.sum(axis=1)) - mu**2)
    if var <= 1e-12:
        correlation = 1.0  # constant image: perfectly self-predictable
    else:
        cov = float(np.sum(p * idx[:, None] * idx[None, :]) - mu**2)
        correlation = cov / var
    return contrast, correlation, energy, homogeneity, entropy


def _block_half_spectra(plane):
    """Per-block magnitudes of the real-input FFT half spectrum.

    The full 32x32 magnitude spectrum is Hermitian-symmetric, so
    magnitudes are kept only for frequency columns 0..16; mirrored
    columns are accounted for by `_HALF_WEIGHTS` in the correlation.
    """
    plane = np.asarray(plane, dtype=np.float64)
    h, w = plane.shape
    nh, nw = h // TC_BLOCK, w // TC_BLOCK
    if nh == 0 or nw == 0:
        raise ContractError(
            f"plane {w}x{h} smaller than one {TC_BLOCK}x{TC_BLOCK} block"
        )
    v = plane[: nh * TC_BLOCK, : nw * TC_BLOCK].reshape(nh, TC_BLOCK, nw, TC_BLOCK)
    spec = sfft.rfftn(v, axes=(1, 3))
    return (
        np.abs(spec)
        .transpose(0, 2, 1, 3)
        .reshape(nh * nw, TC_BLOCK, TC_BLOCK // 2 + 1)
    )


def _half_weights():
    w = np.full((TC_BLOCK, TC_BLOCK // 2 + 1), 2.0)
    w[:, 0] = 1.0  # self-conjugate columns appear once in the full spectrum
    w[:, -1] = 1.0
    return w


_HALF_WEIGHTS = _half_weights()
_SPECTRUM_COUNT = TC_BLOCK * TC_BLOCK - 1  # full spectrum minus DC


def temporal_coherence(prev, curr):
    """(mean, std, skw, kur, entr) of per-block temporal coherence.

    TC of a block is the zero-mean normalized correlation between the
    DC-excluded FFT magnitude spectra of the co-located 32x32 blocks; a
    zero-variance spectrum makes that block's TC 1.  Entropy uses a
    16-bin histogram over [-1, 1].
    """
    prev = np.asarray(prev)
    curr = np.asarray(curr)
    if prev.shape != curr.shape:
        raise ContractError("temporal coherence needs equal-size planes")
    sa = _block_half_spectra(prev)
    sb = _block_half_spectra(curr)
    w = _HALF_WEIGHTS
    mean_a = ((sa * w).sum(axis=(1, 2)) - sa[:, 0, 0]) / _SPECTRUM_COUNT
    mean_b = ((sb * w).sum(axis=(1, 2)) - sb[:, 0, 0]) / _SPECTRUM_COUNT
    da = sa - mean_a[:, None, None]
    db = sb - mean_b[:, None, None]
    # the DC term is subtracted out of every weighted sum
    var_a = (w * da * da).sum(axis=(1, 2)) - da[:, 0, 0] ** 2
    var_b = (w * db * db).sum(axis=(1, 2)) - db[:, 0, 0] ** 2
    cov = (w * da * db).sum(axis=(1, 2)) - da[:, 0, 0] * db[:, 0, 0]
    na = np.sqrt(np.maximum(var_a, 0.0))
    nb = np.sqrt(np.maximum(var_b, 0.0))
    tc = np.ones(sa.shape[0])
    ok = (na > 1e-12) & (nb > 1e-12)
    tc[ok] = cov[ok] / (na[ok] * nb[ok])
    tc = np.clip(tc, -1.0, 1.0)
    return (
        float(tc.mean()),
        stats.pop_std(tc),
        stats.skewness(tc),
        stats.excess_kurtosis(tc),
        stats.histogram_entropy(tc, 16, (-1.0, 1.0)),
    )


_LAPLACIAN_DIFF = np.array([[1, -2, 1], [-2, 4, -2], [1, -2, 1]], dtype=np.float64)


def spatial_information(luma):
    """SI: population std of the Sobel gradient magnitude on interior pixels."""
    luma = np.asarray(luma, dtype=np.float64)
    if luma.shape[0] < 3 or luma.shape[1] < 3:
        raise ContractError("SI needs a plane of at least 3x3")
    # separable Sobel ([1,2,1] smoothing, [-1,0,1] difference) evaluated
    # only on the interior, where the boundary mode is irrelevant
    sx = luma[:-2] + 2.0 * luma[1:-1] + luma[2:]
    gx = sx[:, 2:] - sx[:, :-2]
    sy = luma[:, :-2] + 2.0 * luma[:, 1:-1] + luma[:, 2:]
    gy = sy[2:] - sy[:-2]
    return stats.pop_std(np.sqrt(gx * gx + gy * gy))


def temporal_information(prev, curr):
    """TI: population std of the frame difference."""
    prev = np.asarray(prev, dtype=np.float64)
    curr = np.asarray(curr, dtype=np.float64)
    if prev.shape != curr.shape:
        raise ContractError("TI needs equal-size planes")
    return stats.pop_std(curr - prev)


def yuv420_to_rgb(luma, cb, cr):
    """BT.709 limited-range YUV420 -> float RGB in [0, 255].

    Chroma is upsampled 2x by nearest neighbor.
    """
    # float32 is plenty for an 8-bit colorfulness statistic and halves
    # the memory traffic on large frames
    y = np.asarray(luma, dtype=np.float32)
    cbf = np.repeat(np.repeat(np.asarray(cb, dtype=np.float32), 2, 0), 2, 1)
    crf = np.repeat(np.repeat(np.asarray(cr, dtype=np.float32), 2, 0), 2, 1)
    if cbf.shape != y.shape or crf.shape != y.shape:
        raise ContractError("chroma planes are not half-size of luma")
    yp = (y - np.float32(16.0)) * np.float32(255.0 / 219.0)
    pb = (cbf - np.float32(128.0)) * np.float32(255.0 / 224.0)
    pr = (crf - np.float32(128.0)) * np.float32(255.0 / 224.0)
    r = yp + np.float32(1.5748) * pr
    g = yp - np.float32(0.18732427) * pb - np.float32(0.46812427) * pr
    b = yp + np.float32(1.8556) * pb
    return (
        np.clip(r, 0.0, 255.0),
        np.clip(g, 0.0, 255.0),
        np.clip(b, 0.0, 255.0),
    )


def colorfulness_rgb(r, g, b):
    """Hasler-Suesstrunk colorfulness of float RGB planes."""
    r = np.asarray(r)
    g = np.asarray(g)
    b = np.asarray(b)
    rg = r - g
    yb = 0.5 * (r + g) - b
    # accumulate the moments in float64 regardless of input dtype
    sigma = np.hypot(np.std(rg, dtype=np.float64), np.std(yb, dtype=np.float64))
    mu = np.hypot(np.mean(rg, dtype=np.float64), np.mean(yb, dtype=np.float64))
    return float(sigma + 0.3 * mu)


def colorfulness(luma, cb, cr):
    """CF of a 4:2:0 frame via nearest-neighbor chroma upsampling."""
    return colorfulness_rgb(*yuv420_to_rgb(luma, cb, cr))


def noise_estimate(luma):
    """Fast Laplacian noise sigma estimate.

    sigma = sqrt(pi/2) / (6 (W-2)(H-2)) * sum |L * I| with L the 3x3
    Laplacian-difference mask; the mask annihilates constant and linear
    fields so flat content scores 0.
    """
    luma = np.asarray(luma, dtype=np.float64)
    h, w = luma.shape
    if h < 3 or w < 3:
        raise ContractError("noise estimate needs a plane of at least 3x3")
    conv = ndimage.correlate(luma, _LAPLACIAN_DIFF, mode="nearest")[1:-1, 1:-1]
    return float(np.sqrt(np.pi / 2.0) * np.sum(np.abs(conv)) / (6.0 * (w - 2) * (h - 2)))


def ncc(prev, curr):
    """Zero-mean normalized cross correlation at zero displacement.

    Both planes constant -> 1; exactly one constant -> 0.
    """
    prev = np.asarray(prev, dtype=np.float64).ravel()
    curr = np.asarray(curr, dtype=np.float64).ravel()
    if prev.shape != curr.shape:
        raise ContractError("NCC needs equal-size planes")
    da = prev - prev.mean()
    db = curr - curr.mean()
    na = np.sqrt(np.sum(da * da))
    nb = np.sqrt(np.sum(db * db))
    if na <= 1e-12 and nb <= 1e-12:
        return 1.0
    if na <= 1e-12 or nb <= 1e-12:
        return 0.0
    return float(np.clip(np.sum(da * db) / (na * nb), -1.0, 1.0))


def _mean_std(values):
    v = np.asarray(values, dtype=np.float64)
    return float(v.mean()), stats.pop_std(v)


def extract_vod(clip):
    """Extract the 30-dimensional VoD feature vector of a clip."""
    per_frame = {k: [] for k in ("cor", "con", "enr", "hom", "ent", "si", "cf", "noise")}
    tc_stats = []
    ti_vals = []
    ncc_vals = []
    prev_luma = None
    try:
        for y, cb, cr in read_frames(clip):
            con, cor, enr, hom, ent = glcm_descriptors(y)
            per_frame["cor"].append(cor)
            per_frame["con"].append(con)
            per_frame["enr"].append(enr)
            per_frame["hom"].append(hom)
            per_frame["ent"].append(ent)
            per_frame["si"].append(spatial_information(y))
            per_frame["cf"].append(colorfulness(y, cb, cr))
            per_frame["noise"].append(noise_estimate(y))
            if prev_luma is not None:
                tc_stats.append(temporal_coherence(prev_luma, y))
                ti_vals.append(temporal_information(prev_luma, y))
                ncc_vals.append(ncc(prev_luma, y))
            prev_luma = y
    except LadderError as exc:
        raise type(exc)(f"{clip.clip_id}: {exc}") from exc

    tc = np.asarray(tc_stats, dtype=np.float64)  # columns: mean,std,skw,kur,entr
    values = []
    for key in ("cor", "con", "enr", "hom", "ent"):
        values.extend(_mean_std(per_frame[key]))
    for col in range(5):
        values.extend(_mean_std(tc[:, col]))
    # Table order interleaves mean/std per TC statistic: reorder from
    # (meanX, stdX) pairs to (meanA, meanB, stdA, stdB, ...) pattern.
    tc_block = values[10:20]
    values[10:20] = [
        tc_block[0], tc_block[2], tc_block[1], tc_block[3],
        tc_block[4], tc_block[5], tc_block[6], tc_block[7],
        tc_block[8], tc_block[9],
    ]
    values.extend(_mean_std(per_frame["si"]))
    values.extend(_mean_std(ti_vals))
    values.extend(_mean_std(per_frame["cf"]))
    values.extend(_mean_std(per_frame["noise"]))
    values.extend(_mean_std(ncc_vals))
    return VodFeatureVector(tuple(values))
