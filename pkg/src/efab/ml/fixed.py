"""Fixed-point formats and the quantized tree model.

The hardware format is signed <28,19>: 28 total bits, 19 integer bits
including sign, 9 fraction bits, so the resolution is 2^-9 and
|value| < 2^18.  Quantization rounds to nearest (ties to even); the
score accumulation saturates on overflow.  Leaf values are stored with
the learning rate folded in and the classification threshold is mapped
to score space as logit(tau), so the quantized decision is a single
raw-integer comparison - the exact operation the compiled netlist runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .tree import Leaf, Split, TreeModel

__all__ = [
    "FxFormat", "FX28_19", "Overflow",
    "fx_quantize", "fx_value", "fx_add_sat",
    "QLeaf", "QSplit", "QuantTreeModel", "quantize",
    "quantize_features", "predict_quant",
]


class Overflow(Exception):
    pass


@dataclass(frozen=True)
class FxFormat:
    """Signed fixed point: ``width`` total bits, ``int_bits`` incl. sign."""

    width: int = 28
    int_bits: int = 19

    @property
    def frac_bits(self) -> int:
        return self.width - self.int_bits

    @property
    def min_raw(self) -> int:
        return -(1 << (self.width - 1))

    @property
    def max_raw(self) -> int:
        return (1 << (self.width - 1)) - 1

    @property
    def scale(self) -> int:
        return 1 << self.frac_bits


FX28_19 = FxFormat(28, 19)


def fx_quantize(value: float, fmt: FxFormat = FX28_19) -> int:
    """Round-to-nearest-even raw encoding; Overflow outside the range."""
    raw = round(value * fmt.scale)
    if not fmt.min_raw <= raw <= fmt.max_raw:
        raise Overflow(f"{value} does not fit <{fmt.width},{fmt.int_bits}>")
    return raw


def fx_value(raw: int, fmt: FxFormat = FX28_19) -> float:
    return raw / fmt.scale


def fx_add_sat(a: int, b: int, fmt: FxFormat = FX28_19) -> int:
    s = a + b
    if s > fmt.max_raw:
        return fmt.max_raw
    if s < fmt.min_raw:
        return fmt.min_raw
    return s


@dataclass
class QLeaf:
    value_raw: int  # learning_rate * leaf value, quantized


@dataclass
class QSplit:
    feature: int
    threshold_raw: int
    left: "QSplit | QLeaf"
    right: "QSplit | QLeaf"


@dataclass
class QuantTreeModel:
    fmt: FxFormat
    base_raw: int
    root: QSplit | QLeaf
    score_threshold_raw: int

    def internal_nodes(self) -> list[QSplit]:
        out = []
        def walk(node):
            if isinstance(node, QSplit):
                out.append(node)
                walk(node.left)
                walk(node.right)
        walk(self.root)
        return out

    def leaves(self) -> list[QLeaf]:
        out = []
        def walk(node):
            if isinstance(node, QLeaf):
                out.append(node)
            else:
                walk(node.left)
                walk(node.right)
        walk(self.root)
        return out

    def depth(self) -> int:
        def d(node):
            return 0 if isinstance(node, QLeaf) else 1 + max(d(node.left), d(node.right))
        return d(self.root)

    def leaf_scores(self) -> list[int]:
        """Saturating base + leaf for every leaf, in tree order."""
        return [fx_add_sat(self.base_raw, lf.value_raw, self.fmt)
                for lf in self.leaves()]


def quantize(model: TreeModel, threshold: float = 0.5,
             fmt: FxFormat = FX28_19) -> QuantTreeModel:
    """Quantize thresholds, leaf values (learning rate folded in), the
    base score, and the probability threshold mapped through logit."""
    if not 0 < threshold < 1:
        raise ValueError(f"probability threshold must be in (0,1), got {threshold}")

    def q(node):
        if isinstance(node, Leaf):
            return QLeaf(fx_quantize(model.learning_rate * node.value, fmt))
        return QSplit(node.feature, fx_quantize(node.threshold, fmt),
                      q(node.left), q(node.right))

    return QuantTreeModel(
        fmt=fmt,
        base_raw=fx_quantize(model.base_score, fmt),
        root=q(model.root),
        score_threshold_raw=fx_quantize(math.log(threshold / (1 - threshold)), fmt),
    )


def quantize_features(features, fmt: FxFormat = FX28_19) -> list[int]:
    return [fx_quantize(float(v), fmt) for v in features]


def predict_quant(qmodel: QuantTreeModel, raw_features) -> tuple[int, bool, float]:
    """Fixed-point descent: (score raw, decision, probability).

    Comparisons and the score sum happen entirely on raw encodings;
    decision is score >= score_threshold (1 keeps the track as signal).
    The probability is a software-side convenience conversion.
    """
    node = qmodel.root
    while isinstance(node, QSplit):
        node = node.left if raw_features[node.feature] <= node.threshold_raw else node.right
    score = fx_add_sat(qmodel.base_raw, node.value_raw, qmodel.fmt)
    prob = 1.0 / (1.0 + math.exp(-fx_value(score, qmodel.fmt)))
    return score, score >= qmodel.score_threshold_raw, prob
