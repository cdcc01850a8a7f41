"""Image, CSV and JSON files for run artifacts.

Images are 8-bit PNG, binary PPM (P6) or binary PGM (P5), picked by extension.
Values map linearly between 0..255 and [0, 1].
"""
import csv
import json
import logging
import math
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .exceptions import ImageFormatError

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".png", ".ppm", ".pgm"}


def read_image(path):
    path = Path(path)
    if path.suffix.lower() not in IMAGE_SUFFIXES:
        raise ImageFormatError(f"unsupported image extension {path.suffix!r} for {path}")
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode in ("L", "I;16", "I"):
                im = im.convert("L")
            elif im.mode != "RGB":
                im = im.convert("RGB")
            data = np.asarray(im, dtype=np.uint8)
    except (UnidentifiedImageError, OSError) as exc:
        raise ImageFormatError(f"cannot read image {path}: {exc}") from exc
    return data.astype(np.float64) / 255.0


def to_uint8(img):
    arr = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    return np.rint(arr * 255.0).astype(np.uint8)


def write_image(path, img):
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix not in IMAGE_SUFFIXES:
        raise ImageFormatError(f"unsupported image extension {suffix!r} for {path}")
    data = to_uint8(img)
    if suffix == ".pgm" and data.ndim == 3:
        raise ImageFormatError(f"PGM output needs a single-channel image, got shape {data.shape}")
    if suffix == ".ppm" and data.ndim == 2:
        data = np.repeat(data[:, :, None], 3, axis=2)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(data).save(path)
    logger.debug(f"Wrote image {path} ({data.shape})")
    return path


def _json_safe(value):
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if isinstance(value, (np.floating, np.integer)):
        return _json_safe(value.item())
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, Path):
        return str(value)
    return value


def dumps_json(data):
    return json.dumps(_json_safe(data), indent=2, sort_keys=True) + "\n"


def write_json(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_json(data))
    return path


def read_json(path):
    return json.loads(Path(path).read_text())


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        write_csv_rows(fh, header, rows)
    return path


def write_csv_rows(stream, header, rows):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_cell(v) for v in row])


def format_cell(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value
