"""palette-tiny-v1: a pinned, deterministic image/text similarity model.

This is a self-contained stand-in for a large vision-language model, built
for environments where no pretrained weights can be downloaded. It scores
how well a phrase matches an image through a shared color-statistics space:

  image side   HSV histograms + brightness moments + an edge-density cue,
               computed on a 32x32 thumbnail.
  text side    every known concept word carries an anchor embedding, built
               by pushing a synthetic color-swatch prototype through the
               same image pipeline; unknown words hash to stable
               pseudo-random unit vectors, and a phrase embeds as the
               normalized mean of its word vectors.

Scores are cosine similarities, so they always land in [-1, 1]. All weights
are derived from the constants below; the model id pins them so recorded
golden responses stay meaningful.
"""

from __future__ import annotations

import hashlib
import io
import struct

import numpy as np
from PIL import Image, ImageDraw

MODEL_ID = "palette-tiny-v1"

THUMB = 32
HUE_BINS = 12
SAT_BINS = 4
VAL_BINS = 4
FEATURE_DIM = HUE_BINS + SAT_BINS + VAL_BINS + 3  # + mean, std, edge density

STOPWORDS = {"a", "an", "the", "photo", "of", "with", "and", "in", "on", "at"}

# Palette groups: the visual vocabulary of the model. RGB swatches.
_PALETTES: dict[str, list[tuple[int, int, int]]] = {
    "bright_warm": [(245, 240, 228), (226, 219, 205), (248, 248, 242), (206, 176, 136), (184, 188, 192)],
    "dark_gray": [(88, 88, 94), (118, 118, 124), (66, 66, 72), (139, 139, 134), (52, 52, 58)],
    "soft_warm": [(206, 181, 161), (231, 221, 201), (161, 131, 111), (241, 236, 226), (191, 161, 141)],
    "pale_cool": [(224, 234, 240), (199, 219, 230), (244, 247, 250), (179, 199, 210), (234, 240, 244)],
    "neutral_tan": [(214, 204, 189), (189, 179, 164), (229, 221, 209), (169, 159, 147), (204, 197, 184)],
    "wood": [(150, 108, 70), (120, 82, 50), (176, 134, 92), (96, 64, 38), (162, 120, 80)],
    "fabric": [(170, 140, 125), (140, 110, 100), (196, 170, 150), (115, 90, 80), (185, 158, 138)],
    "ceramic": [(246, 247, 248), (232, 236, 238), (250, 250, 251), (222, 227, 230), (240, 243, 245)],
    "appliance": [(176, 181, 186), (146, 151, 156), (202, 206, 210), (120, 125, 130), (88, 92, 96)],
    "glass": [(205, 225, 235), (178, 205, 220), (228, 240, 246), (152, 182, 200), (216, 232, 240)],
    "green": [(96, 140, 88), (70, 110, 64), (126, 166, 112), (52, 86, 48), (110, 150, 98)],
    "screen": [(40, 42, 48), (28, 30, 34), (58, 60, 68), (18, 20, 24), (48, 52, 58)],
}

# word -> palette group; this is the model's entire lexical knowledge.
_CONCEPTS: dict[str, str] = {
    "kitchen": "bright_warm",
    "garage": "dark_gray",
    "bedroom": "soft_warm",
    "bathroom": "pale_cool",
    "hallway": "neutral_tan",
    "office": "neutral_tan",
    "closet": "soft_warm",
    "balcony": "pale_cool",
    "foyer": "neutral_tan",
    "lounge": "soft_warm",
    "living": "soft_warm",
    "dining": "bright_warm",
    "laundry": "ceramic",
    "room": "neutral_tan",
    "stairs": "wood",
    "table": "wood",
    "chair": "wood",
    "bookshelf": "wood",
    "cabinet": "wood",
    "door": "wood",
    "doorway": "wood",
    "counter": "bright_warm",
    "couch": "fabric",
    "bed": "fabric",
    "rug": "fabric",
    "pillow": "fabric",
    "sink": "ceramic",
    "toilet": "ceramic",
    "shower": "ceramic",
    "bathtub": "ceramic",
    "refrigerator": "appliance",
    "stove": "appliance",
    "oven": "appliance",
    "washing": "appliance",
    "machine": "appliance",
    "lamp": "bright_warm",
    "television": "screen",
    "mirror": "glass",
    "window": "glass",
    "picture": "soft_warm",
    "plant": "green",
}


def _unit(v: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        out = np.zeros_like(v)
        out[0] = 1.0
        return out
    return v / norm


def _rgb_to_hsv(arr: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized RGB [0,1] -> (h in [0,1), s, v)."""
    r, g, b = arr[..., 0], arr[..., 1], arr[..., 2]
    mx = arr.max(axis=-1)
    mn = arr.min(axis=-1)
    delta = mx - mn
    h = np.zeros_like(mx)
    mask = delta > 1e-12
    rmax = mask & (mx == r)
    gmax = mask & (mx == g) & ~rmax
    bmax = mask & ~rmax & ~gmax
    h[rmax] = ((g - b)[rmax] / delta[rmax]) % 6.0
    h[gmax] = (b - r)[gmax] / delta[gmax] + 2.0
    h[bmax] = (r - g)[bmax] / delta[bmax] + 4.0
    h = h / 6.0
    s = np.where(mx > 1e-12, delta / np.maximum(mx, 1e-12), 0.0)
    return h, s, mx


def featurize_array(rgb: np.ndarray) -> np.ndarray:
    """Feature vector of an (H, W, 3) uint8 array; the shared embedding space."""
    arr = rgb.astype(np.float64) / 255.0
    h, s, v = _rgb_to_hsv(arr)

    hue_hist = np.zeros(HUE_BINS)
    bins = np.minimum((h * HUE_BINS).astype(int), HUE_BINS - 1)
    np.add.at(hue_hist, bins.reshape(-1), s.reshape(-1))  # saturation-weighted
    total = hue_hist.sum()
    if total > 0:
        hue_hist /= total

    sat_hist = np.histogram(s, bins=SAT_BINS, range=(0.0, 1.0))[0].astype(np.float64)
    sat_hist /= max(sat_hist.sum(), 1.0)
    val_hist = np.histogram(v, bins=VAL_BINS, range=(0.0, 1.0))[0].astype(np.float64)
    val_hist /= max(val_hist.sum(), 1.0)

    edge = 0.0
    if v.shape[0] > 1 and v.shape[1] > 1:
        edge = float(np.abs(np.diff(v, axis=0)).mean() + np.abs(np.diff(v, axis=1)).mean())

    return np.concatenate(
        [hue_hist, sat_hist, val_hist, [float(v.mean()), float(v.std()), edge]]
    )


def _prototype_image(palette: list[tuple[int, int, int]]) -> np.ndarray:
    """Stacked color stripes standing in for a canonical photo of the concept."""
    img = Image.new("RGB", (THUMB, THUMB))
    draw = ImageDraw.Draw(img)
    stripe = THUMB / len(palette)
    for i, color in enumerate(palette):
        draw.rectangle([0, int(i * stripe), THUMB, int((i + 1) * stripe)], fill=color)
    return np.asarray(img)


def _word_noise(word: str) -> np.ndarray:
    """Stable pseudo-random direction for a word, from its hash."""
    vals = np.empty(FEATURE_DIM)
    for k in range(FEATURE_DIM):
        digest = hashlib.sha256(f"palette-word|{word}|{k}".encode()).digest()
        (raw,) = struct.unpack(">Q", digest[:8])
        vals[k] = raw / 2.0**64 - 0.5
    return vals


class PaletteModel:
    """Deterministic embedder; all state derives from the module constants."""

    model_id = MODEL_ID

    def __init__(self):
        self._anchors: dict[str, np.ndarray] = {}
        for word, group in _CONCEPTS.items():
            base = featurize_array(_prototype_image(_PALETTES[group]))
            # small per-word offset so words sharing a palette never tie exactly
            self._anchors[word] = _unit(base + 0.02 * _word_noise(word))

    def embed_image_bytes(self, data: bytes) -> np.ndarray:
        with Image.open(io.BytesIO(data)) as img:
            rgb = img.convert("RGB").resize((THUMB, THUMB), Image.BILINEAR)
        return _unit(featurize_array(np.asarray(rgb)))

    def embed_text(self, sentence: str) -> np.ndarray:
        words = [w for w in sentence.lower().split() if w and w not in STOPWORDS]
        if not words:
            words = [sentence.lower().strip() or "blank"]
        vectors = []
        for word in words:
            anchor = self._anchors.get(word.strip(".,!?"))
            if anchor is None:
                vectors.append(_unit(_word_noise(word)))
            else:
                vectors.append(anchor)
        return _unit(np.mean(vectors, axis=0))

    def score(self, image_data: bytes, sentences: list[str]) -> list[float]:
        img = self.embed_image_bytes(image_data)
        return [float(np.clip(img @ self.embed_text(s), -1.0, 1.0)) for s in sentences]


def load_model(model_id: str) -> PaletteModel:
    if model_id != MODEL_ID:
        raise ValueError(f"unknown model {model_id!r}; this build ships {MODEL_ID!r}")
    return PaletteModel()
