"""Image file I/O and the CLI's grayscale/resizing policy."""
import logging
from pathlib import Path

import numpy as np
from PIL import Image

from .variations import resize_bilinear

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".pgm")
LUMA = np.array([0.299, 0.587, 0.114])


def load_gray(path):
    """Read a PNG/PGM file as a float64 gray image (luma for color input)."""
    with Image.open(path) as im:
        im.load()
        if im.mode in ("L", "I", "F", "I;16"):
            return np.asarray(im, dtype=np.float64)
        if im.mode == "LA":
            return np.asarray(im.getchannel("L"), dtype=np.float64)
        rgb = np.asarray(im.convert("RGB"), dtype=np.float64)
    return rgb @ LUMA


def to_side(img, side):
    """Resize to ``side`` x ``side`` unless already that size."""
    if img.shape == (side, side):
        return img
    return resize_bilinear(img, (side, side))


def load_face(path, side):
    return to_side(load_gray(path), side)


def save_gray(path, img):
    """Write an 8-bit gray image; the format follows the file suffix."""
    arr = np.clip(np.rint(np.asarray(img, dtype=np.float64)), 0, 255).astype(np.uint8)
    Image.fromarray(arr).save(path)


def expand_paths(paths):
    """Files as given; directories expand to their image files in lexicographic order."""
    out = []
    for p in map(Path, paths):
        if p.is_dir():
            out.extend(sorted((c for c in p.iterdir() if c.suffix.lower() in IMAGE_SUFFIXES), key=lambda c: c.name))
        else:
            out.append(p)
    return out
