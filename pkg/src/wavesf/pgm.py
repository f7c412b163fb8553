"""Binary PGM (netpbm P5) reader/writer, the package's only image codec.

Reads tolerate ``#`` comments anywhere in the header; writes emit a minimal
three-line header and never comments. Maxval above 255 (two-byte samples) is
rejected. Parse errors report the byte offset.
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class ImageGray:
    width: int
    height: int
    pixels: np.ndarray  # (height, width) uint8

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        if self.pixels.shape != (self.height, self.width):
            raise ValueError(
                f"pixel array {self.pixels.shape} does not match {self.height}x{self.width}"
            )


class PgmError(ValueError):
    pass


def _next_token(blob, offset):
    """Skip whitespace and # comments, return (token, offset past it)."""
    n = len(blob)
    while offset < n:
        ch = blob[offset]
        if ch in b" \t\r\n":
            offset += 1
        elif ch == ord("#"):
            while offset < n and blob[offset] != ord("\n"):
                offset += 1
        else:
            break
    if offset >= n:
        raise PgmError(f"unexpected end of header at offset {offset}")
    start = offset
    while offset < n and blob[offset] not in b" \t\r\n":
        offset += 1
    return blob[start:offset], offset


def read_pgm(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    magic, offset = _next_token(blob, 0)
    if magic == b"P2":
        raise PgmError("unsupported variant P2 (ASCII) at offset 0; only binary P5 is supported")
    if magic != b"P5":
        raise PgmError(f"bad magic {magic[:8]!r} at offset 0")
    fields = []
    for name in ("width", "height", "maxval"):
        token, offset = _next_token(blob, offset)
        try:
            value = int(token)
        except ValueError:
            raise PgmError(f"non-numeric {name} at offset {offset - len(token)}") from None
        if value <= 0:
            raise PgmError(f"non-positive {name} at offset {offset - len(token)}")
        fields.append(value)
    width, height, maxval = fields
    if maxval > 255:
        raise PgmError(f"maxval {maxval} > 255 at offset {offset - len(str(maxval))}")
    offset += 1  # single whitespace byte separating header from payload
    need = width * height
    if len(blob) - offset < need:
        raise PgmError(
            f"truncated payload at offset {offset}: need {need} bytes, have {len(blob) - offset}"
        )
    pixels = np.frombuffer(blob, dtype=np.uint8, count=need, offset=offset).reshape(height, width)
    return ImageGray(width, height, pixels.copy())


def write_pgm(img: ImageGray, path):
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(img.pixels.tobytes())
