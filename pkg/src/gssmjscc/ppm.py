"""Binary PPM (P6) image I/O, dependency-free.

Images are float arrays [3, H, W] in [0, 1]; files are 8-bit with
maxval 255. Parse errors carry the byte offset of the offending token.
write_ppm emits a canonical header, so write -> read -> write is
byte-identical.
"""

import numpy as np


class PpmError(ValueError):
    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


def _next_token(blob, pos):
    """Skip whitespace and # comments; return (token, next_pos)."""
    n = len(blob)
    while pos < n:
        c = blob[pos:pos + 1]
        if c == b"#":
            while pos < n and blob[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    if pos >= n:
        raise PpmError("unexpected end of header", pos)
    start = pos
    while pos < n and not blob[pos:pos + 1].isspace():
        pos += 1
    return blob[start:pos], pos


def read_ppm(path):
    with open(path, "rb") as f:
        blob = f.read()
    magic, pos = _next_token(blob, 0)
    if magic != b"P6":
        raise PpmError(f"not a binary PPM, magic {magic!r}", 0)
    fields = []
    for name in ("width", "height", "maxval"):
        tok, pos = _next_token(blob, pos)
        try:
            fields.append(int(tok))
        except ValueError:
            raise PpmError(f"non-numeric {name} {tok!r}",
                           pos - len(tok)) from None
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise PpmError(f"bad dimensions {width}x{height}", pos)
    if not 0 < maxval < 256:
        raise PpmError(f"maxval {maxval} outside 8-bit range", pos)
    if pos >= len(blob) or not blob[pos:pos + 1].isspace():
        raise PpmError("missing whitespace before pixel data", pos)
    pos += 1
    need = width * height * 3
    if len(blob) - pos < need:
        raise PpmError(
            f"truncated pixel data, need {need} bytes have {len(blob) - pos}",
            pos)
    raw = np.frombuffer(blob, dtype=np.uint8, count=need, offset=pos)
    img = raw.reshape(height, width, 3).transpose(2, 0, 1)
    return img.astype(np.float64) / maxval


def write_ppm(path, img):
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[0] != 3:
        raise ValueError("write_ppm expects a [3, H, W] array")
    data = np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)
    h, w = img.shape[1], img.shape[2]
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(data.transpose(1, 2, 0).tobytes())
