"""Image and raster file I/O.

Label masks travel as paletted PNGs whose palette index IS the label id, so
a round-trip never remaps labels. Cloud membership rasters use 16-bit binary
PGM written by a tiny local codec (big-endian sample order per the netpbm
spec); writing through the same few lines everywhere keeps outputs
byte-reproducible.
"""
from __future__ import annotations

import colorsys
from pathlib import Path

import numpy as np
from PIL import Image


def load_rgb(path) -> np.ndarray:
    """Load an image as an (H, W, 3) uint8 sRGB array."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def save_rgb(path, rgb: np.ndarray) -> None:
    rgb = np.asarray(rgb, dtype=np.uint8)
    Image.fromarray(rgb, mode="RGB").save(path)


def label_palette(n: int = 256) -> np.ndarray:
    """Deterministic (n, 3) uint8 palette; index 0 is black.

    Colors walk the hue wheel by the golden angle so nearby labels stay
    visually distinct.
    """
    pal = np.zeros((n, 3), dtype=np.uint8)
    for i in range(1, n):
        h = (i * 0.6180339887498949) % 1.0
        r, g, b = colorsys.hsv_to_rgb(h, 0.65, 0.95)
        pal[i] = (round(r * 255), round(g * 255), round(b * 255))
    return pal


def save_labels(path, labels: np.ndarray) -> None:
    """Write a label image as a paletted PNG (pixel value == label id)."""
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() > 255:
        raise ValueError("label ids must fit in uint8 for palette storage")
    im = Image.fromarray(labels.astype(np.uint8), mode="P")
    im.putpalette(label_palette().flatten().tolist())
    im.save(path)


def load_labels(path) -> np.ndarray:
    """Read a label image; palette indices (or gray values) are label ids."""
    with Image.open(path) as im:
        if im.mode not in ("P", "L"):
            im = im.convert("L")
        return np.asarray(im, dtype=np.uint8).copy()


def write_pgm16(path, values: np.ndarray) -> None:
    """Write a uint16 array as binary PGM (P5, maxval 65535)."""
    values = np.asarray(values)
    if values.dtype != np.uint16:
        raise ValueError(f"expected uint16 samples, got {values.dtype}")
    h, w = values.shape
    header = f"P5\n{w} {h}\n65535\n".encode("ascii")
    Path(path).write_bytes(header + values.astype(">u2").tobytes())


def read_pgm16(path) -> np.ndarray:
    """Read a binary PGM written by write_pgm16."""
    data = Path(path).read_bytes()
    fields: list[bytes] = []
    pos = 0
    # magic, width, height, maxval; '#' comments allowed per the format
    while len(fields) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    if fields[0] != b"P5":
        raise ValueError(f"not a binary PGM: magic {fields[0]!r}")
    w, h, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    if maxval != 65535:
        raise ValueError(f"expected 16-bit samples, maxval {maxval}")
    raw = np.frombuffer(data, dtype=">u2", offset=pos, count=w * h)
    return raw.reshape(h, w).astype(np.uint16)
