"""Classification metrics: efficiency/rejection, ROC sweep, AUC, plots.

Signal efficiency is the fraction of truth pT > 2 GeV tracks kept
(probability >= threshold); background rejection is the fraction of
truth pileup discarded.  Raising the threshold therefore trades
efficiency for rejection: efficiency is non-increasing and rejection
non-decreasing in the threshold.

Report files are plain CSV and hand-rolled SVG so reruns are
byte-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tree import SingleClassDataset

__all__ = ["EvalReport", "evaluate", "roc_curve", "auc", "roc_csv", "roc_svg",
           "threshold_sweep"]


@dataclass(frozen=True)
class EvalReport:
    signal_efficiency: float
    background_rejection: float
    threshold: float
    n_signal: int
    n_background: int

    def row(self) -> str:
        return (f"{self.threshold:.6f},{self.signal_efficiency:.6f},"
                f"{self.background_rejection:.6f}")


def evaluate(probs, labels, threshold: float) -> EvalReport:
    """Classify signal iff probability >= threshold; compare to truth."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    sig = labels == 1
    bkg = ~sig
    if not sig.any() or not bkg.any():
        raise SingleClassDataset("evaluation set must contain both classes")
    kept = probs >= threshold
    return EvalReport(
        signal_efficiency=float(kept[sig].mean()),
        background_rejection=float((~kept[bkg]).mean()),
        threshold=threshold,
        n_signal=int(sig.sum()),
        n_background=int(bkg.sum()),
    )


def threshold_sweep(probs, labels, n_points: int = 100) -> list[EvalReport]:
    return [evaluate(probs, labels, t)
            for t in np.linspace(0.0, 1.0, n_points)]


def roc_curve(probs, labels):
    """(background efficiency, signal efficiency) points, threshold-descending."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    order = np.argsort(-probs, kind="stable")
    sig = (labels[order] == 1).astype(np.float64)
    bkg = 1.0 - sig
    tp = np.cumsum(sig) / max(sig.sum(), 1)
    fp = np.cumsum(bkg) / max(bkg.sum(), 1)
    return np.concatenate([[0.0], fp]), np.concatenate([[0.0], tp])


def auc(probs, labels) -> float:
    """Area under the ROC, computed rank-wise (Mann-Whitney)."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    pos = probs[labels == 1]
    neg = probs[labels != 1]
    if len(pos) == 0 or len(neg) == 0:
        raise SingleClassDataset("AUC needs both classes")
    order = np.argsort(np.concatenate([pos, neg]), kind="stable")
    ranks = np.empty(len(order), dtype=np.float64)
    ranks[order] = np.arange(1, len(order) + 1)
    # average ranks over ties
    allp = np.concatenate([pos, neg])
    sorted_vals = allp[order]
    i = 0
    sorted_ranks = ranks[order]
    while i < len(sorted_vals):
        j = i
        while j + 1 < len(sorted_vals) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        if j > i:
            sorted_ranks[i:j + 1] = sorted_ranks[i:j + 1].mean()
        i = j + 1
    ranks[order] = sorted_ranks
    r_pos = ranks[:len(pos)].sum()
    return float((r_pos - len(pos) * (len(pos) + 1) / 2) / (len(pos) * len(neg)))


def roc_csv(probs, labels, n_points: int = 100) -> str:
    lines = ["threshold,signal_efficiency,background_rejection"]
    for rep in threshold_sweep(probs, labels, n_points):
        lines.append(rep.row())
    return "\n".join(lines) + "\n"


def roc_svg(probs, labels) -> str:
    """Self-contained ROC plot; byte-deterministic for fixed inputs."""
    fp, tp = roc_curve(probs, labels)
    w, h, margin = 640, 480, 50

    def px(x):
        return margin + x * (w - 2 * margin)

    def py(y):
        return h - margin - y * (h - 2 * margin)

    step = max(1, len(fp) // 2000)
    pts = " ".join(f"{px(x):.1f},{py(y):.1f}"
                   for x, y in zip(fp[::step], tp[::step]))
    a = auc(probs, labels)
    return "\n".join([
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">',
        f'<rect width="{w}" height="{h}" fill="white"/>',
        f'<line x1="{px(0):.1f}" y1="{py(0):.1f}" x2="{px(1):.1f}" y2="{py(0):.1f}" stroke="black"/>',
        f'<line x1="{px(0):.1f}" y1="{py(0):.1f}" x2="{px(0):.1f}" y2="{py(1):.1f}" stroke="black"/>',
        f'<line x1="{px(0):.1f}" y1="{py(0):.1f}" x2="{px(1):.1f}" y2="{py(1):.1f}" stroke="#bbbbbb" stroke-dasharray="4"/>',
        f'<polyline points="{pts}" fill="none" stroke="#1f77b4" stroke-width="2"/>',
        f'<text x="{w // 2}" y="{h - 12}" text-anchor="middle">background efficiency</text>',
        f'<text x="14" y="{h // 2}" transform="rotate(-90 14 {h // 2})" text-anchor="middle">signal efficiency</text>',
        f'<text x="{px(0.62):.1f}" y="{py(0.08):.1f}">AUC = {a:.4f}</text>',
        "</svg>",
    ]) + "\n"
