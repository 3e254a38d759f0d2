"""Track tensors, feature extraction and the synthetic track generator.

A track is an 8 x 21 x 13 charge tensor (200 ps time slices, 21 pixel
columns at 50 um, 13 pixel rows at 12.5 um) with the sensor offset y0
and the truth transverse momentum.  The 14-value feature vector is the
per-row charge profile summed over time and columns, plus y0 - the
y direction is the one bent by the field, so short support means a
stiff (high-pT) track.

The bundled generator is a stand-in for the external dataset: it lays
uniform charge along a y segment of length 1 + 8/pT pixels (rounded)
centred at y0, with 5% Gaussian amplitude noise.
"""

from __future__ import annotations

import gzip
from dataclasses import dataclass

import numpy as np

__all__ = [
    "T_SLICES", "X_PIXELS", "Y_PIXELS", "PT_CUT_GEV", "EmptyDataset",
    "Track", "extract_features", "synth_track", "make_dataset",
    "split_dataset", "tracks_to_features", "save_tracks", "load_tracks",
]

T_SLICES, X_PIXELS, Y_PIXELS = 8, 21, 13
PT_CUT_GEV = 2.0

_BASE_AMPLITUDE = 100.0  # charge units per covered pixel per time slice
_NOISE_FRACTION = 0.05


class EmptyDataset(Exception):
    pass


@dataclass
class Track:
    charge: np.ndarray  # (t, x, y), all entries >= 0
    y0: float
    pt_truth: float

    def __post_init__(self):
        self.charge = np.asarray(self.charge, dtype=np.float64)
        if self.charge.shape != (T_SLICES, X_PIXELS, Y_PIXELS):
            raise ValueError(f"charge tensor has shape {self.charge.shape}, "
                             f"expected {(T_SLICES, X_PIXELS, Y_PIXELS)}")
        if (self.charge < 0).any():
            raise ValueError("charge tensor has negative entries")

    @property
    def is_signal(self) -> bool:
        return self.pt_truth > PT_CUT_GEV


def extract_features(track: Track) -> np.ndarray:
    """y-profile (charge summed over time and columns) plus y0; 14 values."""
    profile = track.charge.sum(axis=(0, 1))
    return np.concatenate([profile, [track.y0]])


def synth_track(kind: str, rng) -> Track:
    """Generate one synthetic track; ``kind`` is 'signal' or 'background'.

    Deterministic for a given Generator state: signal pT ~ U(2, 10),
    background pT ~ U(0.2, 2); covered rows = round(1 + 8/pT) centred on
    y0 ~ U(-6, 6) rows and clipped to the sensor.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    if kind == "signal":
        pt = rng.uniform(2.0, 10.0)
    elif kind == "background":
        pt = rng.uniform(0.2, 2.0)
    else:
        raise ValueError(f"kind must be 'signal' or 'background', not {kind!r}")
    y0 = rng.uniform(-6.0, 6.0)
    length = int(round(1 + 8 / pt))
    centre = (Y_PIXELS - 1) / 2 + y0
    first = int(round(centre - (length - 1) / 2))
    rows = [y for y in range(first, first + length) if 0 <= y < Y_PIXELS]
    charge = np.zeros((T_SLICES, X_PIXELS, Y_PIXELS))
    x = X_PIXELS // 2
    for y in rows:
        amp = _BASE_AMPLITUDE * (1 + _NOISE_FRACTION * rng.standard_normal(T_SLICES))
        charge[:, x, y] = np.clip(amp, 0, None)
    return Track(charge, y0=y0, pt_truth=pt)


def make_dataset(n: int, seed: int = 0, signal_fraction: float = 0.5) -> list[Track]:
    """n synthetic tracks, signal/background interleaved deterministically."""
    rng = np.random.default_rng(seed)
    tracks = []
    for i in range(n):
        kind = "signal" if rng.uniform() < signal_fraction else "background"
        tracks.append(synth_track(kind, rng))
    return tracks


def split_dataset(tracks, fraction: float, seed: int = 0):
    """Disjoint, exhaustive, seeded split; |train| = round(fraction * N)."""
    if not tracks:
        raise EmptyDataset("cannot split an empty dataset")
    if not 0 < fraction < 1:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    order = list(range(len(tracks)))
    np.random.default_rng(seed).shuffle(order)
    n_train = round(fraction * len(tracks))
    train = [tracks[i] for i in order[:n_train]]
    test = [tracks[i] for i in order[n_train:]]
    return train, test


def tracks_to_features(tracks) -> tuple[np.ndarray, np.ndarray]:
    """Feature matrix (n, 14) and signal labels (1 = truth pT > 2 GeV)."""
    X = np.stack([extract_features(t) for t in tracks])
    y = np.array([1 if t.is_signal else 0 for t in tracks], dtype=np.int8)
    return X, y


def _open(path, mode: str):
    path = str(path)
    if path.endswith(".gz"):
        return gzip.open(path, mode + "t" if "b" not in mode else mode)
    return open(path, mode)


def save_tracks(path, tracks) -> None:
    """One track per line: 2184 charge values (t-major, then x, then y),
    then y0 and pT, whitespace-separated."""
    with _open(path, "w") as fh:
        for t in tracks:
            flat = " ".join(repr(float(v)) for v in t.charge.reshape(-1))
            fh.write(f"{flat} {float(t.y0)!r} {float(t.pt_truth)!r}\n")


def load_tracks(path) -> list[Track]:
    """Gzip-transparent reader for the track line format."""
    tracks = []
    with _open(path, "r") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            vals = line.split()
            if len(vals) != T_SLICES * X_PIXELS * Y_PIXELS + 2:
                raise ValueError(
                    f"{path}:{lineno}: expected {T_SLICES * X_PIXELS * Y_PIXELS + 2} "
                    f"values, got {len(vals)}")
            arr = np.array([float(v) for v in vals])
            charge = arr[:-2].reshape(T_SLICES, X_PIXELS, Y_PIXELS)
            tracks.append(Track(charge, y0=float(arr[-2]), pt_truth=float(arr[-1])))
    return tracks
