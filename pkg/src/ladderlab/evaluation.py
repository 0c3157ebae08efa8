"""Baselines, correlation metrics, ladder accuracy, and BD-BR reports."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, MetricUndefinedError
from .rd_core import CrossOverSet, convex_hull, hull_resolution_index, monotone_clamp
from .stats import pearson


def static_ladder(train_ladders):
    """SL baseline: per-point arithmetic mean of the training ladders."""
    if not train_ladders:
        raise ContractError("static ladder needs at least one training ladder")
    metrics = {l.metric for l in train_ladders}
    if len(metrics) != 1:
        raise ContractError(f"mixed metrics in training ladders: {sorted(metrics)}")
    p1 = float(np.mean([l.p1 for l in train_ladders]))
    p2 = float(np.mean([l.p2 for l in train_ladders]))
    p3 = float(np.mean([l.p3 for l in train_ladders]))
    return CrossOverSet(*monotone_clamp(p1, p2, p3), metric=metrics.pop())


def correlation_metrics(predicted, reference):
    """(R2, SROCC, PLCC) of predicted vs reference vectors.

    R2 = 1 - SSE/SST; SROCC is Pearson on average-tie ranks.  A
    constant reference makes SROCC/PLCC undefined and raises instead of
    returning NaN.
    """
    pred = np.asarray(predicted, dtype=np.float64)
    ref = np.asarray(reference, dtype=np.float64)
    if pred.shape != ref.shape or pred.ndim != 1:
        raise ContractError("predicted and reference must be equal-length vectors")
    if len(pred) < 3:
        raise ContractError("correlation metrics need at least 3 samples")
    sst = float(np.sum((ref - ref.mean()) ** 2))
    if sst <= 1e-12:
        raise MetricUndefinedError("constant reference vector")
    if float(np.std(pred)) <= 1e-12:
        # Constant predictions: rank/linear correlation degenerate to 0.
        plcc, srocc = 0.0, 0.0
    else:
        plcc = pearson(pred, ref)
        srocc = pearson(_average_ranks(pred), _average_ranks(ref))
    r2 = 1.0 - float(np.sum((pred - ref) ** 2)) / sst
    return r2, srocc, plcc


def _average_ranks(x):
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x), dtype=np.float64)
    sorted_x = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def default_accuracy_grid(ladders, n_points=100):
    """Log-spaced bitrates spanning the ladders' cross-over range +/-10%."""
    values = [v for l in ladders for v in l.cross_overs.as_tuple()]
    lo = min(values) / 1.1
    hi = max(values) * 1.1
    return np.exp(np.linspace(math.log(lo), math.log(hi), n_points))


def ladder_accuracy(predicted, reference, grid=None):
    """Fraction of grid bitrates where both hull rules pick the same resolution."""
    if grid is None:
        grid = default_accuracy_grid([predicted, reference])
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise ContractError("accuracy grid must be non-empty")
    hits = sum(
        hull_resolution_index(predicted, b) == hull_resolution_index(reference, b)
        for b in grid
    )
    return hits / len(grid)


def bd_rate(reference, test):
    """Bjontegaard delta rate of `test` vs `reference`, in percent.

    Classic variant: cubic polynomial fit of log10(rate) against
    quality per set, integrated over the common quality interval.
    Positive means the test set costs more rate at equal quality.
    """
    ref = np.asarray(reference, dtype=np.float64)
    tst = np.asarray(test, dtype=np.float64)
    for name, arr in (("reference", ref), ("test", tst)):
        if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 4:
            raise ContractError(f"{name}: need >= 4 (rate, quality) samples")
    lo = max(ref[:, 1].min(), tst[:, 1].min())
    hi = min(ref[:, 1].max(), tst[:, 1].max())
    if hi <= lo:
        raise ContractError(
            f"non-overlapping quality ranges: [{ref[:, 1].min()}, {ref[:, 1].max()}] "
            f"vs [{tst[:, 1].min()}, {tst[:, 1].max()}]"
        )
    poly_ref = np.polyfit(ref[:, 1], np.log10(ref[:, 0]), 3)
    poly_tst = np.polyfit(tst[:, 1], np.log10(tst[:, 0]), 3)
    int_ref = np.polyint(poly_ref)
    int_tst = np.polyint(poly_tst)
    avg_diff = (
        (np.polyval(int_tst, hi) - np.polyval(int_tst, lo))
        - (np.polyval(int_ref, hi) - np.polyval(int_ref, lo))
    ) / (hi - lo)
    return float(100.0 * (10.0**avg_diff - 1.0))


@dataclass
class EvalReport:
    """Per-iteration evaluation against the EEL ground truth and SL baseline."""

    per_target: dict  # "p1"/"p2"/"p3" -> {"r2", "srocc", "plcc"}
    accuracy: float
    bdbr_vs_eel: float
    bdbr_vs_sl: float
    per_clip_bdbr: list = field(default_factory=list)  # (clip_id, vs_eel, vs_sl)
    iterations: int = 1
    aggregation: str = "median"

    def to_dict(self):
        return {
            "per_target": self.per_target,
            "accuracy": self.accuracy,
            "bdbr_vs_eel": self.bdbr_vs_eel,
            "bdbr_vs_sl": self.bdbr_vs_sl,
            "per_clip_bdbr": [list(row) for row in self.per_clip_bdbr],
            "iterations": self.iterations,
            "aggregation": self.aggregation,
        }


def _ladder_rd_set(curves, ladder, grid):
    hull = convex_hull(curves, ladder)
    return np.array([(b, hull(b)[1]) for b in grid])


def evaluate_method(predicted_ladders, eel_ladders, sl_cross_overs, rd_curves,
                    grid=None):
    """Score predicted ladders against EEL ground truth and the SL baseline.

    All three ladder inputs are keyed by clip_id; `rd_curves` maps
    clip_id -> {resolution: RDCurve}.  Correlations are computed on
    ln(kbps) cross-overs; BD-BR samples each clip's hull at the grid.
    """
    clips = sorted(predicted_ladders)
    if sorted(eel_ladders) != clips:
        raise ContractError("predicted and EEL ladders cover different clips")
    missing = [c for c in clips if c not in rd_curves]
    if missing:
        raise ContractError(f"missing RD curves for clips: {missing}")

    per_target = {}
    for k, attr in (("p1", "p1"), ("p2", "p2"), ("p3", "p3")):
        pred = [math.log(getattr(predicted_ladders[c].cross_overs, attr)) for c in clips]
        ref = [math.log(getattr(eel_ladders[c].cross_overs, attr)) for c in clips]
        r2, srocc, plcc = correlation_metrics(pred, ref)
        per_target[k] = {"r2": r2, "srocc": srocc, "plcc": plcc}

    from .rd_core import BitrateLadder  # local import avoids cycle at module load

    sl_ladder = BitrateLadder(sl_cross_overs)
    accuracies = []
    per_clip = []
    for c in clips:
        try:
            pred_l = predicted_ladders[c]
            eel_l = eel_ladders[c]
            clip_grid = grid
            if clip_grid is None:
                clip_grid = default_accuracy_grid([pred_l, eel_l])
            accuracies.append(ladder_accuracy(pred_l, eel_l, clip_grid))
            curves = rd_curves[c]
            bd_grid = clip_grid if grid is not None else default_accuracy_grid(
                [pred_l, eel_l, sl_ladder]
            )
            eel_set = _ladder_rd_set(curves, eel_l, bd_grid)
            pred_set = _ladder_rd_set(curves, pred_l, bd_grid)
            sl_set = _ladder_rd_set(curves, sl_ladder, bd_grid)
            vs_eel = bd_rate(eel_set, pred_set)
            vs_sl = bd_rate(sl_set, pred_set)
            per_clip.append((c, vs_eel, vs_sl))
        except ContractError as exc:
            raise ContractError(f"clip {c}: {exc}") from exc

    return EvalReport(
        per_target=per_target,
        accuracy=float(np.mean(accuracies)),
        bdbr_vs_eel=float(np.mean([row[1] for row in per_clip])),
        bdbr_vs_sl=float(np.mean([row[2] for row in per_clip])),
        per_clip_bdbr=per_clip,
    )


def aggregate_reports(reports):
    """Median aggregation of per-iteration reports."""
    if not reports:
        raise ContractError("no reports to aggregate")
    per_target = {}
    for k in ("p1", "p2", "p3"):
        per_target[k] = {
            m: float(np.median([r.per_target[k][m] for r in reports]))
            for m in ("r2", "srocc", "plcc")
        }
    return EvalReport(
        per_target=per_target,
        accuracy=float(np.median([r.accuracy for r in reports])),
        bdbr_vs_eel=float(np.median([r.bdbr_vs_eel for r in reports])),
        bdbr_vs_sl=float(np.median([r.bdbr_vs_sl for r in reports])),
        per_clip_bdbr=[row for r in reports for row in r.per_clip_bdbr],
        iterations=len(reports),
    )
