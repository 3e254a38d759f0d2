"""Smart-pixel track handling, tree training, quantization and metrics."""

from .data import (Track, extract_features, load_tracks, make_dataset,
                   save_tracks, split_dataset, synth_track, tracks_to_features,
                   EmptyDataset)
from .tree import (DepthExceeded, FeatureIndexOutOfRange, Leaf, SchemaError,
                   SingleClassDataset, Split, TreeModel, export_model,
                   import_model, predict, predict_proba, train_tree)
from .fixed import (FX28_19, FxFormat, Overflow, QuantTreeModel, fx_quantize,
                    fx_value, predict_quant, quantize, quantize_features)
from .metrics import (EvalReport, auc, evaluate, roc_curve, roc_csv,
                      roc_svg, threshold_sweep)

__all__ = [
    "Track", "extract_features", "synth_track", "make_dataset",
    "split_dataset", "load_tracks", "save_tracks", "tracks_to_features",
    "EmptyDataset",
    "TreeModel", "Leaf", "Split", "train_tree", "predict", "predict_proba",
    "import_model", "export_model",
    "SchemaError", "DepthExceeded", "FeatureIndexOutOfRange", "SingleClassDataset",
    "FxFormat", "FX28_19", "Overflow", "QuantTreeModel",
    "fx_quantize", "fx_value", "quantize", "quantize_features", "predict_quant",
    "EvalReport", "evaluate", "auc", "roc_curve", "roc_csv", "roc_svg",
    "threshold_sweep",
]
