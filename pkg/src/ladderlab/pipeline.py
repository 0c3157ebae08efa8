"""Manifests, tabular interchange files, external drivers, and job running.

All interchange is line-oriented text (JSON-lines manifest, CSV tables)
so outputs diff cleanly and golden tests stay byte-stable.  Floats are
written with repr, which round-trips exactly.
"""

import concurrent.futures
import json
import os
import shlex
import subprocess
from dataclasses import dataclass

from .errors import DriverError, ValidationError
from .features_live import LIVE_FEATURE_NAMES
from .features_vod import VOD_FEATURE_NAMES
from .media_io import VideoClip
from .rd_core import (
    BitrateLadder,
    CrossOverSet,
    RDPoint,
    build_rd_curve,
)

RD_SAMPLE_HEADER = (
    "clip_id,codec,platform,width,height,qp,bitrate_kbps,quality_metric,quality_value"
)
LADDER_HEADER = "clip_id,codec,platform,metric,P1_kbps,P2_kbps,P3_kbps"

CODECS = ("avc", "hevc", "vvc")
PLATFORMS = ("software", "hardware")

DEFAULT_QP_SETS = {
    "avc": list(range(15, 46)),
    "hevc": list(range(15, 46)),
    "vvc": list(range(16, 49, 2)),
}


def _fmt(x):
    return repr(float(x))


@dataclass
class Manifest:
    clips: list  # VideoClip
    strata: dict  # clip_id -> stratum label (may be missing)

    def clip(self, clip_id):
        for c in self.clips:
            if c.clip_id == clip_id:
                return c
        raise ValidationError(f"clip {clip_id!r} not in manifest")


def load_manifest(path, check_files=True):
    """Read a JSON-lines manifest of clip records."""
    if not os.path.isfile(path):
        raise ValidationError(f"manifest not found: {path}")
    clips = []
    strata = {}
    seen = set()
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{lineno}: bad JSON: {exc}") from exc
            clip = VideoClip(
                clip_id=rec["clip_id"],
                path=rec["path"],
                width=int(rec["width"]),
                height=int(rec["height"]),
                fps=float(rec.get("fps", 60.0)),
                frame_count=int(rec["frame_count"]),
                pixel_format=rec.get("pixel_format", "yuv420p"),
            )
            if clip.clip_id in seen:
                raise ValidationError(f"{path}:{lineno}: duplicate clip_id {clip.clip_id!r}")
            seen.add(clip.clip_id)
            if check_files and not os.path.isfile(clip.path):
                raise ValidationError(f"{path}:{lineno}: missing file {clip.path}")
            clips.append(clip)
            if "stratum" in rec:
                strata[clip.clip_id] = str(rec["stratum"])
    return Manifest(clips=clips, strata=strata)


def save_manifest(path, manifest):
    with open(path, "w") as f:
        for c in manifest.clips:
            rec = {
                "clip_id": c.clip_id,
                "path": c.path,
                "width": c.width,
                "height": c.height,
                "fps": c.fps,
                "frame_count": c.frame_count,
                "pixel_format": c.pixel_format,
            }
            if c.clip_id in manifest.strata:
                rec["stratum"] = manifest.strata[c.clip_id]
            f.write(json.dumps(rec, sort_keys=True) + "\n")


@dataclass(frozen=True)
class EncoderProfile:
    codec: str
    platform: str
    qp_set: tuple
    preset: str
    encode_template: str
    metric_template: str
    fps: float = 60.0

    def __post_init__(self):
        if self.codec not in CODECS:
            raise ValidationError(f"unknown codec {self.codec!r}")
        if self.platform not in PLATFORMS:
            raise ValidationError(f"unknown platform {self.platform!r}")
        if not self.qp_set or list(self.qp_set) != sorted(set(self.qp_set)):
            raise ValidationError("qp_set must be non-empty and strictly increasing")


def load_profile(path):
    if not os.path.isfile(path):
        raise ValidationError(f"profile not found: {path}")
    with open(path) as f:
        doc = json.load(f)
    qp_set = doc.get("qp_set") or DEFAULT_QP_SETS[doc["codec"]]
    return EncoderProfile(
        codec=doc["codec"],
        platform=doc["platform"],
        qp_set=tuple(int(q) for q in qp_set),
        preset=doc.get("preset", "medium"),
        encode_template=doc["encode_template"],
        metric_template=doc["metric_template"],
        fps=float(doc.get("fps", 60.0)),
    )


def expand_template(template, **bindings):
    try:
        return template.format(**bindings)
    except KeyError as exc:
        raise ValidationError(f"unbound template placeholder {exc}") from exc


def _run_command(cmd):
    try:
        proc = subprocess.run(
            shlex.split(cmd), capture_output=True, text=True, check=False
        )
    except OSError as exc:
        raise DriverError(f"failed to launch: {exc}", command=cmd) from exc
    if proc.returncode != 0:
        raise DriverError(
            f"exit status {proc.returncode}\n  stderr: {proc.stderr.strip()}",
            command=cmd,
        )
    return proc.stdout


def run_encode(profile, clip, resolution, qp, workdir):
    """Encode one (clip, resolution, qp) point and measure rate/quality.

    Bitrate is bitstream bits divided by clip duration.  The metric
    command must print the quality value as the last whitespace token of
    its final non-empty stdout line.
    """
    width, height = resolution
    output = os.path.join(
        workdir, f"{clip.clip_id}_{width}x{height}_qp{qp}.bin"
    )
    enc_cmd = expand_template(
        profile.encode_template,
        input=clip.path,
        width=width,
        height=height,
        qp=qp,
        fps=profile.fps,
        output=output,
    )
    _run_command(enc_cmd)
    if not os.path.isfile(output):
        raise DriverError(f"encoder produced no output file {output}", command=enc_cmd)
    bits = os.path.getsize(output) * 8
    bitrate_kbps = bits / clip.duration_seconds / 1000.0

    met_cmd = expand_template(
        profile.metric_template,
        input=clip.path,
        width=width,
        height=height,
        qp=qp,
        fps=profile.fps,
        output=output,
    )
    stdout = _run_command(met_cmd)
    lines = [l for l in stdout.splitlines() if l.strip()]
    try:
        quality = float(lines[-1].split()[-1])
    except (IndexError, ValueError) as exc:
        raise DriverError(
            f"unparseable metric output: {stdout!r}", command=met_cmd
        ) from exc
    return RDPoint(bitrate=bitrate_kbps, quality=quality, qp=qp)


def parallel_map(fn, items, jobs):
    """Ordered map, optionally across processes.

    Results are collected in input order so the worker count never
    changes any output.
    """
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# CSV interchange


def write_feature_csv(path, kind, rows):
    """rows: iterable of (clip_id, vector); written sorted by clip_id."""
    names = VOD_FEATURE_NAMES if kind == "vod" else LIVE_FEATURE_NAMES
    with open(path, "w") as f:
        f.write("clip_id," + ",".join(f"F{i + 1}" for i in range(len(names))) + "\n")
        for clip_id, vec in sorted(rows, key=lambda r: r[0]):
            f.write(clip_id + "," + ",".join(_fmt(v) for v in vec.values) + "\n")


def read_feature_csv(path):
    """-> (feature column names, {clip_id: value list})."""
    if not os.path.isfile(path):
        raise ValidationError(f"feature file not found: {path}")
    with open(path) as f:
        header = f.readline().strip().split(",")
        if header[:1] != ["clip_id"]:
            raise ValidationError(f"{path}: bad feature header")
        names = header[1:]
        table = {}
        for line in f:
            parts = line.strip().split(",")
            if len(parts) != len(names) + 1:
                raise ValidationError(f"{path}: ragged row for {parts[0]!r}")
            table[parts[0]] = [float(v) for v in parts[1:]]
    return names, table


def write_rd_samples_csv(path, rows):
    """rows: (clip_id, codec, platform, (w, h), RDPoint, metric)."""
    keyed = sorted(
        rows, key=lambda r: (r[0], r[1], r[2], r[3][0] * r[3][1], r[5], r[4].qp or 0)
    )
    with open(path, "w") as f:
        f.write(RD_SAMPLE_HEADER + "\n")
        for clip_id, codec, platform, (w, h), point, metric in keyed:
            f.write(
                f"{clip_id},{codec},{platform},{w},{h},{point.qp if point.qp is not None else ''},"
                f"{_fmt(point.bitrate)},{metric},{_fmt(point.quality)}\n"
            )


def read_rd_samples_csv(path):
    """-> {(clip_id, codec, platform, metric): {resolution: [RDPoint]}}."""
    if not os.path.isfile(path):
        raise ValidationError(f"RD sample file not found: {path}")
    out = {}
    with open(path) as f:
        header = f.readline().strip()
        if header != RD_SAMPLE_HEADER:
            raise ValidationError(f"{path}: bad RD sample header")
        for line in f:
            parts = line.strip().split(",")
            if len(parts) != 9:
                raise ValidationError(f"{path}: ragged RD sample row")
            clip_id, codec, platform, w, h, qp, bitrate, metric, quality = parts
            key = (clip_id, codec, platform, metric)
            res = (int(w), int(h))
            out.setdefault(key, {}).setdefault(res, []).append(
                RDPoint(
                    bitrate=float(bitrate),
                    quality=float(quality),
                    qp=int(qp) if qp else None,
                )
            )
    return out


def build_curves(samples_by_key):
    """Group RD samples into Pareto-cleaned curves per key/resolution."""
    out = {}
    for key, by_res in samples_by_key.items():
        metric = key[3]
        out[key] = {
            res: build_rd_curve(points, res, metric)
            for res, points in by_res.items()
        }
    return out


def curve_filename(clip_id, codec, platform, metric):
    return f"{clip_id}__{codec}__{platform}__{metric}.json"


def write_curves_dir(dirpath, curves_by_key):
    os.makedirs(dirpath, exist_ok=True)
    for (clip_id, codec, platform, metric), by_res in sorted(curves_by_key.items()):
        doc = {
            "clip_id": clip_id,
            "codec": codec,
            "platform": platform,
            "metric": metric,
            "resolutions": {
                f"{w}x{h}": [
                    {"bitrate_kbps": p.bitrate, "quality": p.quality, "qp": p.qp}
                    for p in curve.points
                ]
                for (w, h), curve in sorted(by_res.items())
            },
        }
        path = os.path.join(dirpath, curve_filename(clip_id, codec, platform, metric))
        with open(path, "w") as f:
            json.dump(doc, f, sort_keys=True, indent=1)
            f.write("\n")


def read_curves_dir(dirpath):
    if not os.path.isdir(dirpath):
        raise ValidationError(f"curves directory not found: {dirpath}")
    out = {}
    for name in sorted(os.listdir(dirpath)):
        if not name.endswith(".json"):
            continue
        with open(os.path.join(dirpath, name)) as f:
            doc = json.load(f)
        key = (doc["clip_id"], doc["codec"], doc["platform"], doc["metric"])
        by_res = {}
        for res_str, pts in doc["resolutions"].items():
            w, h = (int(v) for v in res_str.split("x"))
            points = [
                RDPoint(
                    bitrate=p["bitrate_kbps"], quality=p["quality"], qp=p.get("qp")
                )
                for p in pts
            ]
            by_res[(w, h)] = build_rd_curve(points, (w, h), doc["metric"])
        out[key] = by_res
    return out


def write_ladders_csv(path, rows):
    """rows: (clip_id, codec, platform, BitrateLadder)."""
    with open(path, "w") as f:
        f.write(LADDER_HEADER + "\n")
        for clip_id, codec, platform, ladder in sorted(rows, key=lambda r: r[:3]):
            co = ladder.cross_overs
            f.write(
                f"{clip_id},{codec},{platform},{co.metric},"
                f"{_fmt(co.p1)},{_fmt(co.p2)},{_fmt(co.p3)}\n"
            )


def read_ladders_csv(path):
    """-> {(clip_id, codec, platform, metric): BitrateLadder}."""
    if not os.path.isfile(path):
        raise ValidationError(f"ladder file not found: {path}")
    out = {}
    with open(path) as f:
        header = f.readline().strip()
        if header != LADDER_HEADER:
            raise ValidationError(f"{path}: bad ladder header")
        for line in f:
            parts = line.strip().split(",")
            if len(parts) != 7:
                raise ValidationError(f"{path}: ragged ladder row")
            clip_id, codec, platform, metric, p1, p2, p3 = parts
            out[(clip_id, codec, platform, metric)] = BitrateLadder(
                CrossOverSet(float(p1), float(p2), float(p3), metric)
            )
    return out
