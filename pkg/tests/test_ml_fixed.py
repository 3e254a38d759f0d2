import math
import random
from fractions import Fraction

import pytest

from efab.ml import (FX28_19, FxFormat, Leaf, Overflow, Split, TreeModel,
                     fx_quantize, fx_value, predict, predict_quant, quantize,
                     quantize_features)
from efab.ml.fixed import fx_add_sat


def test_format_constants():
    assert FX28_19.frac_bits == 9
    assert FX28_19.scale == 512
    assert FX28_19.max_raw == 2**27 - 1
    assert FX28_19.min_raw == -(2**27)


def test_reference_threshold_quantizes_to_252():
    raw = fx_quantize(0.4922)
    assert raw == 252
    assert fx_value(raw) == 0.4921875


def test_zero_maps_to_zero():
    assert fx_quantize(0.0) == 0


def test_logit_of_half_is_zero_threshold():
    model = TreeModel(0.0, 1.0, Leaf(0.0))
    q = quantize(model, threshold=0.5)
    assert q.score_threshold_raw == 0


def test_round_to_nearest_even_against_fraction_oracle():
    rng = random.Random(12)
    for _ in range(2000):
        value = rng.uniform(-1000, 1000)
        raw = fx_quantize(value)
        # oracle: exact rational rounding with ties to even
        frac = Fraction(value).limit_denominator(10**12) * 512
        lo = math.floor(frac)
        candidates = [lo, lo + 1]
        best = min(candidates, key=lambda c: (abs(frac - c), c % 2))
        assert raw == best, value


def test_overflow_raises():
    with pytest.raises(Overflow):
        fx_quantize(2**18)
    with pytest.raises(Overflow):
        fx_quantize(-(2**18) - 1)
    fx_quantize(2**18 - 1)  # in range


def test_saturating_add():
    assert fx_add_sat(FX28_19.max_raw, 1) == FX28_19.max_raw
    assert fx_add_sat(FX28_19.min_raw, -5) == FX28_19.min_raw
    assert fx_add_sat(100, 28) == 128


def test_single_leaf_gives_half_probability():
    model = TreeModel(0.0, 1.0, Leaf(0.0))
    q = quantize(model, threshold=0.5)
    score, decision, prob = predict_quant(q, [0] * 14)
    assert score == 0 and prob == 0.5 and decision  # score >= 0 keeps


def test_quantized_tie_goes_left():
    model = TreeModel(0.0, 1.0, Split(3, 0.5, Leaf(-1.0), Leaf(1.0)))
    q = quantize(model, threshold=0.5)
    raws = [0] * 14
    raws[3] = q.internal_nodes()[0].threshold_raw
    score, _, _ = predict_quant(q, raws)
    assert score == fx_quantize(-1.0)


def test_learning_rate_folded_into_leaves():
    model = TreeModel(0.25, 0.125, Leaf(2.0))
    q = quantize(model)
    assert q.leaves()[0].value_raw == fx_quantize(0.125 * 2.0)
    score, _, _ = predict_quant(q, [0] * 14)
    assert score == fx_quantize(0.25) + fx_quantize(0.25)


def test_quantized_model_matches_small_fmt():
    fmt = FxFormat(4, 2)  # 2 fraction bits, values in [-2, 2)
    model = TreeModel(0.25, 1.0, Split(0, 0.5, Leaf(-0.75), Leaf(0.75)))
    q = quantize(model, threshold=0.5, fmt=fmt)
    assert q.fmt == fmt
    node = q.internal_nodes()[0]
    assert node.threshold_raw == 2  # 0.5 * 4
    lo = predict_quant(q, [0] + [0] * 13)
    hi = predict_quant(q, [3] + [0] * 13)
    assert lo[0] == fx_quantize(0.25, fmt) + fx_quantize(-0.75, fmt)
    assert hi[0] == fx_quantize(0.25, fmt) + fx_quantize(0.75, fmt)


def test_real_and_quantized_agree_outside_band(hw_scale_model,
                                               hw_scale_quant, synth_split):
    """A real/quantized classification disagreement needs a cause within
    one quantization step: either the real score sits inside the band
    around the cut, or the vector rides within a step of some split
    threshold (so the two walks legitimately took different branches)."""
    _, (Xte, yte) = synth_split
    q = hw_scale_quant
    band = 2.0 ** -8
    tau_score = 0.0  # logit(0.5)
    for row in Xte[:1500]:
        real_score, _ = predict(hw_scale_model, row)
        raws = quantize_features(row)
        _, q_dec, _ = predict_quant(q, raws)
        real_dec = real_score >= tau_score
        if real_dec != q_dec:
            near_split = any(
                abs(row[n.feature] - fx_value(n.threshold_raw)) <= band
                for n in q.internal_nodes())
            assert abs(real_score - tau_score) <= band or near_split, \
                (row, real_score)


def test_quantize_features_round_trip_sign():
    raws = quantize_features([-1.5, 2.25] + [0.0] * 12)
    assert raws[0] == -768 and raws[1] == 1152
