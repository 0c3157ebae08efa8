"""Command-line entry points for the ladder toolkit.

Exit codes: 0 success, 1 validation/usage error, 2 external tool failure.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from . import evaluation, learning, pipeline, rd_core, synth
from .errors import DriverError, LadderError, ValidationError
from .features_live import extract_live
from .features_vod import extract_vod


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def _add_common(p):
    p.add_argument("--jobs", type=int, default=1, help="worker count (never changes output)")
    p.add_argument("--seed", type=int, default=0)


def build_parser():
    parser = _Parser(prog="ladderlab")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("features", help="extract feature vectors from a manifest")
    p.add_argument("kind", choices=("vod", "live"))
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)

    p = sub.add_parser("rd", help="rate-distortion curve tools")
    rd_sub = p.add_subparsers(dest="rd_command", required=True)
    pb = rd_sub.add_parser("build", help="build Pareto-cleaned curves from samples")
    pb.add_argument("--samples", required=True)
    pb.add_argument("--out", required=True)
    _add_common(pb)

    p = sub.add_parser("hull", help="compute exhaustive-encoding ladders")
    p.add_argument("--curves", required=True)
    p.add_argument("--metric", choices=rd_core.METRICS, required=True)
    p.add_argument("--max-bitrate", type=float, default=None)
    p.add_argument("--out", required=True)
    _add_common(p)

    p = sub.add_parser("train", help="train a cross-over regressor")
    p.add_argument("--features", required=True)
    p.add_argument("--ladders", required=True)
    p.add_argument("--target", choices=learning.TARGET_IDS, required=True)
    p.add_argument("--model-kind", choices=learning.MODEL_KINDS, default="extratrees")
    p.add_argument("--n-trees", type=int, default=100)
    p.add_argument("--out", required=True)
    _add_common(p)

    p = sub.add_parser("select", help="recursive feature elimination report")
    p.add_argument("--features", required=True)
    p.add_argument("--ladders", required=True)
    p.add_argument("--target", choices=learning.TARGET_IDS, default="p3")
    p.add_argument("--model-kind", choices=learning.MODEL_KINDS, default="extratrees")
    p.add_argument("--out", required=True)
    _add_common(p)

    p = sub.add_parser("predict", help="predict ladders from feature vectors")
    p.add_argument("--model", action="append", required=True,
                   help="model file; repeat for p1/p2/p3")
    p.add_argument("--features", required=True)
    p.add_argument("--codec", default="avc")
    p.add_argument("--platform", default="software")
    p.add_argument("--out", required=True)
    _add_common(p)

    p = sub.add_parser("evaluate", help="score predicted ladders")
    p.add_argument("--pred", required=True)
    p.add_argument("--eel", required=True)
    p.add_argument("--sl-from-train", required=True,
                   help="training-set ladder CSV used to build the static ladder")
    p.add_argument("--curves", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)

    p = sub.add_parser("bdbr", help="BD-BR between two (rate, quality) sample sets")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    _add_common(p)

    p = sub.add_parser("encode", help="run the external encoder sweep")
    p.add_argument("--profile", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--workdir", default=".")
    p.add_argument("--metric-name", choices=rd_core.METRICS, default="ypsnr")
    p.add_argument("--out", required=True)
    _add_common(p)

    p = sub.add_parser("synth", help="synthetic oracles")
    synth_sub = p.add_subparsers(dest="synth_command", required=True)
    pr = synth_sub.add_parser("rd", help="synthetic RD samples for one clip")
    pr.add_argument("--params", required=True)
    pr.add_argument("--clip-id", default="synth")
    pr.add_argument("--qp-set", default="15:45", help="lo:hi[:step], inclusive")
    pr.add_argument("--codec", default="avc")
    pr.add_argument("--platform", default="software")
    pr.add_argument("--metric", choices=rd_core.METRICS, default="ypsnr")
    pr.add_argument("--out", required=True)
    _add_common(pr)
    pc = synth_sub.add_parser("clip", help="synthetic raw clip")
    pc.add_argument("--out", required=True)
    pc.add_argument("--clip-id", default="synth")
    pc.add_argument("--width", type=int, required=True)
    pc.add_argument("--height", type=int, required=True)
    pc.add_argument("--frames", type=int, required=True)
    pc.add_argument("--sigma", type=float, default=10.0)
    pc.add_argument("--motion", type=float, default=0.0)
    pc.add_argument("--fps", type=float, default=60.0)
    pc.add_argument("--manifest", default=None, help="manifest to append the clip to")
    _add_common(pc)

    return parser


_FEATURE_EXTRACTORS = {"vod": extract_vod, "live": extract_live}


def _extract_one(arg):
    kind, clip = arg
    return clip.clip_id, _FEATURE_EXTRACTORS[kind](clip)


def _cmd_features(args):
    manifest = pipeline.load_manifest(args.manifest)
    rows = pipeline.parallel_map(
        _extract_one, [(args.kind, c) for c in manifest.clips], args.jobs
    )
    pipeline.write_feature_csv(args.out, args.kind, rows)


def _cmd_rd_build(args):
    samples = pipeline.read_rd_samples_csv(args.samples)
    curves = pipeline.build_curves(samples)
    pipeline.write_curves_dir(args.out, curves)


def _cmd_hull(args):
    curves = pipeline.read_curves_dir(args.curves)
    rows = []
    for (clip_id, codec, platform, metric), by_res in sorted(curves.items()):
        if metric != args.metric:
            continue
        ladder = rd_core.eel_ladder(by_res, args.max_bitrate)
        rows.append((clip_id, codec, platform, ladder))
    if not rows:
        raise ValidationError(f"no curves found for metric {args.metric!r}")
    pipeline.write_ladders_csv(args.out, rows)


def _training_matrix(features_path, ladders_path, target):
    names, table = pipeline.read_feature_csv(features_path)
    ladders = pipeline.read_ladders_csv(ladders_path)
    combos = {k[1:] for k in ladders}
    if len(combos) != 1:
        raise ValidationError(
            f"ladder file mixes codec/platform/metric combinations: {sorted(combos)}"
        )
    codec, platform, metric = combos.pop()
    clip_ids = sorted(
        cid for (cid, *_rest) in ladders if cid in table
    )
    if not clip_ids:
        raise ValidationError("no clips shared between features and ladders")
    X = np.array([table[c] for c in clip_ids])
    attr = {"p1": "p1", "p2": "p2", "p3": "p3"}[target]
    y = np.array(
        [
            math.log(getattr(ladders[(c, codec, platform, metric)].cross_overs, attr))
            for c in clip_ids
        ]
    )
    return learning.TrainingMatrix(clip_ids, names, X, y), metric


def _cmd_train(args):
    matrix, metric = _training_matrix(args.features, args.ladders, args.target)
    hp = learning.Hyperparams(n_trees=args.n_trees, seed=args.seed)
    model = learning.train(matrix, hp, args.model_kind, args.target, metric)
    learning.save_model(model, args.out)


def _cmd_select(args):
    matrix, _ = _training_matrix(args.features, args.ladders, args.target)
    report = learning.rfe_select(
        matrix, kind=args.model_kind, seed=args.seed
    )
    with open(args.out, "w") as f:
        json.dump(
            {
                "kept": report.kept,
                "trace": [[n, plcc] for n, plcc in report.trace],
                "importances": report.importances,
            },
            f,
            sort_keys=True,
            indent=1,
        )
        f.write("\n")


def _cmd_predict(args):
    names, table = pipeline.read_feature_csv(args.features)
    models = {}
    metric = None
    for path in args.model:
        model = learning.load_model(path)
        models[model.target_id] = model
        metric = model.metric
    missing = [t for t in learning.TARGET_IDS if t not in models]
    if missing:
        raise ValidationError(f"no model provided for targets: {missing}")
    rows = []
    for clip_id in sorted(table):
        x = np.asarray(table[clip_id])[None, :]
        preds = [
            float(learning.predict(models[t], x, feature_names=names)[0])
            for t in learning.TARGET_IDS
        ]
        p1, p2, p3 = rd_core.monotone_clamp(*preds)
        ladder = rd_core.BitrateLadder(rd_core.CrossOverSet(p1, p2, p3, metric))
        rows.append((clip_id, args.codec, args.platform, ladder))
    pipeline.write_ladders_csv(args.out, rows)


def _cmd_evaluate(args):
    pred = pipeline.read_ladders_csv(args.pred)
    eel = pipeline.read_ladders_csv(args.eel)
    train_l = pipeline.read_ladders_csv(args.sl_from_train)
    curves = pipeline.read_curves_dir(args.curves)
    sl = evaluation.static_ladder([l.cross_overs for l in train_l.values()])
    pred_by_clip = {k[0]: v for k, v in pred.items()}
    eel_by_clip = {k[0]: v for k, v in eel.items() if k[0] in pred_by_clip}
    curves_by_clip = {k[0]: v for k, v in curves.items() if k[0] in pred_by_clip}
    report = evaluation.evaluate_method(pred_by_clip, eel_by_clip, sl, curves_by_clip)
    with open(args.out, "w") as f:
        json.dump(report.to_dict(), f, sort_keys=True, indent=1)
        f.write("\n")
    csv_path = os.path.splitext(args.out)[0] + ".csv"
    with open(csv_path, "w") as f:
        f.write("clip_id,bdbr_vs_eel,bdbr_vs_sl\n")
        for clip_id, vs_eel, vs_sl in report.per_clip_bdbr:
            f.write(f"{clip_id},{repr(vs_eel)},{repr(vs_sl)}\n")


def _read_rate_quality_csv(path):
    if not os.path.isfile(path):
        raise ValidationError(f"sample file not found: {path}")
    rows = []
    with open(path) as f:
        header = f.readline().strip().split(",")
        try:
            ri = header.index("bitrate_kbps")
            qi = header.index("quality_value")
        except ValueError as exc:
            raise ValidationError(
                f"{path}: need bitrate_kbps and quality_value columns"
            ) from exc
        for line in f:
            parts = line.strip().split(",")
            if parts == [""]:
                continue
            rows.append((float(parts[ri]), float(parts[qi])))
    return rows


def _cmd_bdbr(args):
    ref = _read_rate_quality_csv(args.ref)
    test = _read_rate_quality_csv(args.test)
    print(f"{evaluation.bd_rate(ref, test):.6f}")


def _encode_one(arg):
    profile, clip, resolution, qp, workdir = arg
    return pipeline.run_encode(profile, clip, resolution, qp, workdir)


def _cmd_encode(args):
    profile = pipeline.load_profile(args.profile)
    manifest = pipeline.load_manifest(args.manifest)
    os.makedirs(args.workdir, exist_ok=True)
    jobs_spec = [
        (clip, res, qp)
        for clip in manifest.clips
        for res in rd_core.LADDER_RESOLUTIONS
        for qp in profile.qp_set
    ]
    points = pipeline.parallel_map(
        _encode_one,
        [(profile, clip, res, qp, args.workdir) for clip, res, qp in jobs_spec],
        args.jobs,
    )
    rows = [
        (clip.clip_id, profile.codec, profile.platform, res, point, args.metric_name)
        for (clip, res, qp), point in zip(jobs_spec, points)
    ]
    pipeline.write_rd_samples_csv(args.out, rows)


def _parse_qp_set(spec):
    parts = [int(v) for v in spec.split(":")]
    if len(parts) == 2:
        lo, hi, step = parts[0], parts[1], 1
    elif len(parts) == 3:
        lo, hi, step = parts
    else:
        raise ValidationError(f"bad qp-set spec {spec!r}")
    return list(range(lo, hi + 1, step))


def _cmd_synth_rd(args):
    if not os.path.isfile(args.params):
        raise ValidationError(f"params file not found: {args.params}")
    with open(args.params) as f:
        doc = json.load(f)
    laws = {}
    for res_str, law in doc["resolutions"].items():
        w, h = (int(v) for v in res_str.split("x"))
        laws[(w, h)] = synth.ResolutionLaw(
            q_cap=float(law["q_cap"]),
            intercept=float(law["intercept"]),
            slope=float(law["slope"]),
            noise_sigma=float(law.get("noise_sigma", 0.0)),
            rate_at_ref_qp=float(law.get("rate_at_ref_qp", 1000.0)),
        )
    params = synth.SynthParams(laws=laws, seed=int(doc.get("seed", args.seed)))
    samples = synth.synth_rd(params, _parse_qp_set(args.qp_set))
    rows = [
        (args.clip_id, args.codec, args.platform, res, point, args.metric)
        for res, points in samples.items()
        for point in points
    ]
    pipeline.write_rd_samples_csv(args.out, rows)


def _cmd_synth_clip(args):
    clip = synth.synth_clip(
        args.out, args.clip_id, args.width, args.height, args.frames,
        args.sigma, args.motion, args.seed, fps=args.fps,
    )
    if args.manifest:
        existing = (
            pipeline.load_manifest(args.manifest)
            if os.path.isfile(args.manifest)
            else pipeline.Manifest(clips=[], strata={})
        )
        existing.clips.append(clip)
        pipeline.save_manifest(args.manifest, existing)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "features":
            _cmd_features(args)
        elif args.command == "rd":
            _cmd_rd_build(args)
        elif args.command == "hull":
            _cmd_hull(args)
        elif args.command == "train":
            _cmd_train(args)
        elif args.command == "select":
            _cmd_select(args)
        elif args.command == "predict":
            _cmd_predict(args)
        elif args.command == "evaluate":
            _cmd_evaluate(args)
        elif args.command == "bdbr":
            _cmd_bdbr(args)
        elif args.command == "encode":
            _cmd_encode(args)
        elif args.command == "synth":
            if args.synth_command == "rd":
                _cmd_synth_rd(args)
            else:
                _cmd_synth_clip(args)
    except DriverError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except LadderError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
