"""Image file IO: PNG (8/16-bit, grayscale/RGB) and binary PPM/PGM.

Files decode to float64 unit-interval arrays (sample / maxval) and encode by
round-half-up after clamping to [0, 1]. The PNG codec is intentionally
minimal: bit depths 8 and 16, color types 0 (gray) and 2 (RGB), no interlace,
no palette. The writer emits filter-0 scanlines; the reader understands all
five standard filters so files from other encoders load too.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


class ImageFormatError(ValueError):
    """Raised for files this codec cannot parse or represent."""


def _quantize(arr: np.ndarray, maxval: int) -> np.ndarray:
    arr = np.clip(np.asarray(arr, dtype=np.float64), 0.0, 1.0)
    q = np.floor(arr * maxval + 0.5)
    return q.astype(np.uint16 if maxval > 255 else np.uint8)


# ---------------------------------------------------------------------------
# PNG
# ---------------------------------------------------------------------------

def _png_chunk(ctype: bytes, data: bytes) -> bytes:
    return (
        struct.pack(">I", len(data))
        + ctype
        + data
        + struct.pack(">I", zlib.crc32(ctype + data) & 0xFFFFFFFF)
    )


def write_png(path: str | Path, arr: np.ndarray, bit_depth: int = 8) -> None:
    """Write (H,W) grayscale or (H,W,3) RGB unit-interval data as PNG."""
    if bit_depth not in (8, 16):
        raise ImageFormatError(f"unsupported PNG bit depth {bit_depth}")
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 2:
        color_type, channels = 0, 1
    elif arr.ndim == 3 and arr.shape[2] == 3:
        color_type, channels = 2, 3
    else:
        raise ImageFormatError(f"unsupported array shape {arr.shape}")

    maxval = (1 << bit_depth) - 1
    q = _quantize(arr, maxval).reshape(arr.shape[0], -1)
    if bit_depth == 16:
        raw = q.astype(">u2").tobytes()
    else:
        raw = q.astype(np.uint8).tobytes()

    height, width = arr.shape[0], arr.shape[1]
    stride = width * channels * (bit_depth // 8)
    scanlines = bytearray()
    for row in range(height):
        scanlines.append(0)  # filter type 0
        scanlines += raw[row * stride : (row + 1) * stride]

    ihdr = struct.pack(">IIBBBBB", width, height, bit_depth, color_type, 0, 0, 0)
    with open(path, "wb") as fh:
        fh.write(PNG_SIGNATURE)
        fh.write(_png_chunk(b"IHDR", ihdr))
        fh.write(_png_chunk(b"IDAT", zlib.compress(bytes(scanlines), 9)))
        fh.write(_png_chunk(b"IEND", b""))


def _paeth(a: int, b: int, c: int) -> int:
    p = a + b - c
    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    return b if pb <= pc else c


def _unfilter(data: bytes, height: int, stride: int, bpp: int) -> np.ndarray:
    out = np.zeros((height, stride), dtype=np.uint8)
    pos = 0
    for row in range(height):
        ftype = data[pos]
        line = np.frombuffer(data, dtype=np.uint8, count=stride, offset=pos + 1).copy()
        pos += 1 + stride
        prev = out[row - 1] if row > 0 else np.zeros(stride, dtype=np.uint8)
        if ftype == 0:
            out[row] = line
        elif ftype == 1:  # sub: cumulative within each byte lane
            for lane in range(bpp):
                out[row, lane::bpp] = np.cumsum(line[lane::bpp], dtype=np.uint64) & 0xFF
        elif ftype == 2:  # up
            out[row] = line + prev
        elif ftype == 3:  # average
            cur = out[row]
            for i in range(stride):
                left = int(cur[i - bpp]) if i >= bpp else 0
                cur[i] = (int(line[i]) + ((left + int(prev[i])) >> 1)) & 0xFF
        elif ftype == 4:  # paeth
            cur = out[row]
            for i in range(stride):
                left = int(cur[i - bpp]) if i >= bpp else 0
                upleft = int(prev[i - bpp]) if i >= bpp else 0
                cur[i] = (int(line[i]) + _paeth(left, int(prev[i]), upleft)) & 0xFF
        else:
            raise ImageFormatError(f"unknown PNG filter type {ftype}")
    return out


def read_png(path: str | Path) -> np.ndarray:
    """Read a PNG into float64 unit-interval data, (H,W) or (H,W,3)."""
    blob = Path(path).read_bytes()
    if not blob.startswith(PNG_SIGNATURE):
        raise ImageFormatError(f"{path}: not a PNG file")
    pos = len(PNG_SIGNATURE)
    ihdr = None
    idat = bytearray()
    while pos + 8 <= len(blob):
        length = struct.unpack(">I", blob[pos : pos + 4])[0]
        ctype = blob[pos + 4 : pos + 8]
        data = blob[pos + 8 : pos + 8 + length]
        crc = struct.unpack(">I", blob[pos + 8 + length : pos + 12 + length])[0]
        if zlib.crc32(ctype + data) & 0xFFFFFFFF != crc:
            raise ImageFormatError(f"{path}: CRC mismatch in {ctype!r} chunk")
        pos += 12 + length
        if ctype == b"IHDR":
            ihdr = struct.unpack(">IIBBBBB", data)
        elif ctype == b"IDAT":
            idat += data
        elif ctype == b"IEND":
            break
    if ihdr is None:
        raise ImageFormatError(f"{path}: missing IHDR")
    width, height, bit_depth, color_type, _comp, _filt, interlace = ihdr
    if bit_depth not in (8, 16) or color_type not in (0, 2) or interlace != 0:
        raise ImageFormatError(
            f"{path}: unsupported PNG (depth={bit_depth}, color={color_type}, "
            f"interlace={interlace})"
        )
    channels = 1 if color_type == 0 else 3
    bpp = channels * (bit_depth // 8)
    stride = width * bpp
    raw = zlib.decompress(bytes(idat))
    if len(raw) != height * (stride + 1):
        raise ImageFormatError(f"{path}: IDAT size mismatch")
    flat = _unfilter(raw, height, stride, bpp)
    if bit_depth == 16:
        samples = flat.reshape(height, width, channels, 2)
        values = samples[..., 0].astype(np.float64) * 256 + samples[..., 1]
        maxval = 65535.0
    else:
        values = flat.reshape(height, width, channels).astype(np.float64)
        maxval = 255.0
    out = values / maxval
    return out[:, :, 0] if channels == 1 else out


# ---------------------------------------------------------------------------
# PPM / PGM (binary)
# ---------------------------------------------------------------------------

def write_pnm(path: str | Path, arr: np.ndarray, bit_depth: int = 8) -> None:
    """Write binary PPM (P6, RGB) or PGM (P5, grayscale)."""
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 2:
        magic = b"P5"
    elif arr.ndim == 3 and arr.shape[2] == 3:
        magic = b"P6"
    else:
        raise ImageFormatError(f"unsupported array shape {arr.shape}")
    maxval = (1 << bit_depth) - 1
    q = _quantize(arr, maxval)
    header = b"%s\n%d %d\n%d\n" % (magic, arr.shape[1], arr.shape[0], maxval)
    body = q.astype(">u2").tobytes() if maxval > 255 else q.tobytes()
    Path(path).write_bytes(header + body)


def _pnm_tokens(blob: bytes, count: int, start: int) -> tuple[list[int], int]:
    tokens: list[int] = []
    pos = start
    while len(tokens) < count:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos : pos + 1] == b"#":
            while pos < len(blob) and blob[pos] != 0x0A:
                pos += 1
            continue
        end = pos
        while end < len(blob) and not blob[end : end + 1].isspace():
            end += 1
        if end == pos:
            raise ImageFormatError("truncated PNM header")
        tokens.append(int(blob[pos:end]))
        pos = end
    return tokens, pos + 1  # single whitespace after maxval


def read_pnm(path: str | Path) -> np.ndarray:
    """Read binary PPM/PGM into float64 unit-interval data."""
    blob = Path(path).read_bytes()
    magic = blob[:2]
    if magic not in (b"P5", b"P6"):
        raise ImageFormatError(f"{path}: not a binary PGM/PPM file")
    channels = 1 if magic == b"P5" else 3
    (width, height, maxval), pos = _pnm_tokens(blob, 3, 2)
    if maxval <= 0 or maxval > 65535:
        raise ImageFormatError(f"{path}: bad maxval {maxval}")
    n = width * height * channels
    if maxval > 255:
        data = np.frombuffer(blob, dtype=">u2", count=n, offset=pos).astype(np.float64)
    else:
        data = np.frombuffer(blob, dtype=np.uint8, count=n, offset=pos).astype(np.float64)
    out = data.reshape(height, width, channels) / float(maxval)
    return out[:, :, 0] if channels == 1 else out


# ---------------------------------------------------------------------------
# Format dispatch
# ---------------------------------------------------------------------------

def read_image(path: str | Path) -> np.ndarray:
    """Read PNG/PPM/PGM by magic bytes; (H,W,3) for color, (H,W) for gray."""
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head.startswith(PNG_SIGNATURE):
        return read_png(path)
    if head[:2] in (b"P5", b"P6"):
        return read_pnm(path)
    raise ImageFormatError(f"{path}: unrecognized image format")


def write_image(path: str | Path, arr: np.ndarray, bit_depth: int = 8) -> None:
    """Write by extension: .png, .ppm (P6), or .pgm (P5)."""
    suffix = Path(path).suffix.lower()
    if suffix == ".png":
        write_png(path, arr, bit_depth)
    elif suffix in (".ppm", ".pgm"):
        write_pnm(path, arr, bit_depth)
    else:
        raise ImageFormatError(f"{path}: unsupported output extension {suffix!r}")


def ensure_rgb(arr: np.ndarray) -> np.ndarray:
    """Expand a grayscale plane to (H,W,3); pass RGB through."""
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 2:
        return np.repeat(arr[:, :, None], 3, axis=2)
    return arr
