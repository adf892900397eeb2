"""Binary PPM (P6) image reading and writing.

PPM is the interchange format for camera frames, pseudo-RGB renders, SAM
heatmaps, and mosaics: trivially parseable, no external codec.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import CorruptFileError, FormatError


def write_ppm(path: str | Path, image: np.ndarray) -> None:
    """Write an (H, W, 3) uint8 array as binary PPM."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) image, got shape {image.shape}")
    if image.dtype != np.uint8:
        raise ValueError(f"expected uint8 image, got {image.dtype}")
    h, w = image.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(image.tobytes())


def read_ppm(path: str | Path) -> np.ndarray:
    """Read a binary PPM into an (H, W, 3) uint8 array."""
    with open(path, "rb") as f:
        raw = f.read()
    if not raw.startswith(b"P6"):
        raise FormatError(f"{path}: not a binary PPM (missing P6 magic)")
    # Header: magic, width, height, maxval, each separated by whitespace,
    # '#' comments allowed between tokens.
    tokens: list[bytes] = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated PPM header")
        tokens.append(raw[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise FormatError(f"{path}: non-numeric PPM header field") from exc
    if maxval != 255:
        raise FormatError(f"{path}: only maxval 255 supported, got {maxval}")
    expected = w * h * 3
    payload = raw[pos : pos + expected]
    if len(payload) != expected:
        raise CorruptFileError(
            f"{path}: payload has {len(payload)} bytes, header implies {expected}"
        )
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w, 3).copy()
