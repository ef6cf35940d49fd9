"""Shooting-condition metadata: extraction, normalization, clustering.

The condition vector holds six EXIF-derived scalars (ISO, exposure time,
f-number, APEX shutter speed, focal length, exposure bias). Missing fields
are stored as 0. Vectors come from JSON sidecar files or straight from a
JPEG's APP1/TIFF block; the JPEG reader covers only the six tags needed,
both byte orders, and SHORT/LONG/RATIONAL/SRATIONAL values.

The Lloyd/k-means++ core lives here because condition clustering is its
first consumer; the palette module reuses it for Lab major colors.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np


class ExifParseError(Exception):
    """Malformed sidecar JSON or corrupt EXIF/TIFF data."""


@dataclass(frozen=True)
class ExifVector:
    """The six shooting-condition scalars; unset fields are 0."""

    iso: float = 0.0
    exposure_time: float = 0.0
    fnumber: float = 0.0
    shutter_speed: float = 0.0
    focal_length: float = 0.0
    bias_value: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                self.iso,
                self.exposure_time,
                self.fnumber,
                self.shutter_speed,
                self.focal_length,
                self.bias_value,
            ],
            dtype=np.float64,
        )


FIELD_NAMES = tuple(f.name for f in fields(ExifVector))

# Tag ids for the six fields: ISOSpeedRatings, ExposureTime, FNumber,
# ShutterSpeedValue, FocalLength, ExposureBiasValue.
_TIFF_TAGS = {
    0x8827: "iso",
    0x829A: "exposure_time",
    0x829D: "fnumber",
    0x9201: "shutter_speed",
    0x920A: "focal_length",
    0x9204: "bias_value",
}
_EXIF_IFD_POINTER = 0x8769
_TYPE_SIZES = {1: 1, 2: 1, 3: 2, 4: 4, 5: 8, 6: 1, 7: 1, 8: 2, 9: 4, 10: 8}


def normalize(v: ExifVector) -> np.ndarray:
    """Per-dimension rescaling so all six coordinates carry similar weight.

    Exactly [iso/1000, exposure_time*1000, fnumber, shutter_speed,
    focal_length/10, bias_value].
    """
    return np.array(
        [
            v.iso / 1000.0,
            v.exposure_time * 1000.0,
            v.fnumber,
            v.shutter_speed,
            v.focal_length / 10.0,
            v.bias_value,
        ],
        dtype=np.float64,
    )


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------

def load_exif(source: str | Path) -> ExifVector:
    """Read the six condition fields from a JSON sidecar or a JPEG file.

    Absent fields/tags become 0. Raises :class:`ExifParseError` on malformed
    JSON, non-numeric values, or a corrupt EXIF block.
    """
    path = Path(source)
    blob = path.read_bytes()
    if blob[:2] == b"\xff\xd8":
        return _exif_from_jpeg(blob, path)
    return _exif_from_json(blob, path)


def _exif_from_json(blob: bytes, path: Path) -> ExifVector:
    try:
        record = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ExifParseError(f"{path}: malformed JSON sidecar: {exc}") from exc
    if not isinstance(record, dict):
        raise ExifParseError(f"{path}: sidecar must be a JSON object")
    values = {}
    for name in FIELD_NAMES:
        if name not in record:
            continue
        value = record[name]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ExifParseError(f"{path}: non-numeric value for field '{name}'")
        values[name] = float(value)
    return ExifVector(**values)


def _exif_from_jpeg(blob: bytes, path: Path) -> ExifVector:
    pos = 2
    while pos + 4 <= len(blob):
        if blob[pos] != 0xFF:
            raise ExifParseError(f"{path}: bad JPEG marker at offset {pos}")
        marker = blob[pos + 1]
        if marker == 0xFF:  # fill byte
            pos += 1
            continue
        if marker == 0xD9 or 0xD0 <= marker <= 0xD7:  # standalone markers
            pos += 2
            continue
        if marker == 0xDA:  # start of scan: APP1 must precede it
            break
        seglen = struct.unpack(">H", blob[pos + 2 : pos + 4])[0]
        if seglen < 2 or pos + 2 + seglen > len(blob):
            raise ExifParseError(f"{path}: truncated JPEG segment at offset {pos}")
        if marker == 0xE1 and blob[pos + 4 : pos + 10] == b"Exif\x00\x00":
            return _exif_from_tiff(blob[pos + 10 : pos + 2 + seglen], path)
        pos += 2 + seglen
    return ExifVector()  # no EXIF block: all-missing rule


def _exif_from_tiff(tiff: bytes, path: Path) -> ExifVector:
    if len(tiff) < 8:
        raise ExifParseError(f"{path}: truncated TIFF header")
    if tiff[:2] == b"II":
        endian = "<"
    elif tiff[:2] == b"MM":
        endian = ">"
    else:
        raise ExifParseError(f"{path}: bad TIFF byte order {tiff[:2]!r}")
    if struct.unpack(endian + "H", tiff[2:4])[0] != 42:
        raise ExifParseError(f"{path}: bad TIFF magic")
    ifd0 = struct.unpack(endian + "I", tiff[4:8])[0]

    values: dict[str, float] = {}
    exif_ptr = _read_ifd(tiff, ifd0, endian, values, path)
    if exif_ptr is not None:
        _read_ifd(tiff, exif_ptr, endian, values, path)
    return ExifVector(**values)


def _read_ifd(
    tiff: bytes, offset: int, endian: str, values: dict[str, float], path: Path
) -> int | None:
    if offset + 2 > len(tiff):
        raise ExifParseError(f"{path}: IFD offset out of bounds")
    count = struct.unpack(endian + "H", tiff[offset : offset + 2])[0]
    if offset + 2 + 12 * count > len(tiff):
        raise ExifParseError(f"{path}: truncated IFD")
    exif_ptr = None
    for i in range(count):
        base = offset + 2 + 12 * i
        tag, vtype, n = struct.unpack(endian + "HHI", tiff[base : base + 8])
        if tag == _EXIF_IFD_POINTER:
            exif_ptr = struct.unpack(endian + "I", tiff[base + 8 : base + 12])[0]
            continue
        field = _TIFF_TAGS.get(tag)
        if field is None:
            continue
        size = _TYPE_SIZES.get(vtype, 0) * n
        if size == 0 or n == 0:
            raise ExifParseError(f"{path}: bad type/count for field '{field}'")
        if size <= 4:
            payload = tiff[base + 8 : base + 8 + size]
        else:
            voff = struct.unpack(endian + "I", tiff[base + 8 : base + 12])[0]
            if voff + size > len(tiff):
                raise ExifParseError(f"{path}: value offset out of bounds for '{field}'")
            payload = tiff[voff : voff + size]
        values[field] = _decode_value(payload, vtype, endian, field, path)
    return exif_ptr


def _decode_value(
    payload: bytes, vtype: int, endian: str, field: str, path: Path
) -> float:
    # First value only; ISO is occasionally stored with count 2.
    if vtype == 3:  # SHORT
        return float(struct.unpack(endian + "H", payload[:2])[0])
    if vtype == 4:  # LONG
        return float(struct.unpack(endian + "I", payload[:4])[0])
    if vtype == 5:  # RATIONAL
        num, den = struct.unpack(endian + "II", payload[:8])
    elif vtype == 10:  # SRATIONAL
        num, den = struct.unpack(endian + "ii", payload[:8])
    else:
        raise ExifParseError(f"{path}: unsupported type {vtype} for field '{field}'")
    if den == 0:
        raise ExifParseError(f"{path}: zero denominator for field '{field}'")
    return num / den


# ---------------------------------------------------------------------------
# k-means (Lloyd with k-means++ seeding)
# ---------------------------------------------------------------------------

@dataclass
class KMeansResult:
    assignments: np.ndarray  # (N,) int cluster index per point
    centroids: np.ndarray  # (k, D)
    inertia_history: list[float]  # inertia after each assignment step
    n_iter: int


def _pairwise_sq(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centroids[None, :, :]
    return np.sum(diff * diff, axis=2)


def _kmeanspp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]), dtype=np.float64)
    centroids[0] = points[rng.integers(n)]
    closest = np.sum((points - centroids[0]) ** 2, axis=1)
    for j in range(1, k):
        total = closest.sum()
        if total <= 0.0:  # all remaining points coincide with a centroid
            centroids[j] = points[rng.integers(n)]
        else:
            r = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(closest), r, side="right"))
            idx = min(idx, n - 1)
            centroids[j] = points[idx]
        closest = np.minimum(closest, np.sum((points - centroids[j]) ** 2, axis=1))
    return centroids


def lloyd_kmeans(
    points: np.ndarray,
    k: int,
    seed: int,
    max_iter: int = 300,
    tol: float = 1e-9,
) -> KMeansResult:
    """Deterministic Lloyd iteration over (N, D) float points.

    Stops when the max centroid shift drops below `tol` or after `max_iter`
    rounds. Inertia is recorded after every assignment step and is
    non-increasing by construction; an emptied cluster is re-seeded at the
    point currently farthest from its assigned centroid.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError("points must be a non-empty (N, D) array")
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must be in [1, {n}]")

    rng = np.random.Generator(np.random.PCG64(seed))
    centroids = _kmeanspp_init(points, k, rng)
    history: list[float] = []
    assignments = np.zeros(n, dtype=np.int64)
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        d2 = _pairwise_sq(points, centroids)
        assignments = np.argmin(d2, axis=1)
        mindist = d2[np.arange(n), assignments]
        history.append(float(mindist.sum()))

        new_centroids = centroids.copy()
        for j in range(k):
            members = assignments == j
            if members.any():
                new_centroids[j] = points[members].mean(axis=0)
        # Re-seed empty clusters at the farthest point (deterministic order).
        taken: set[int] = set()
        for j in range(k):
            if not (assignments == j).any():
                order = np.argsort(-mindist, kind="stable")
                pick = next(int(i) for i in order if int(i) not in taken)
                taken.add(pick)
                new_centroids[j] = points[pick]

        shift = float(np.max(np.abs(new_centroids - centroids)))
        centroids = new_centroids
        if shift < tol:
            break

    # Final assignment against the converged centroids.
    d2 = _pairwise_sq(points, centroids)
    assignments = np.argmin(d2, axis=1)
    history.append(float(d2[np.arange(n), assignments].sum()))
    return KMeansResult(assignments, centroids, history, n_iter)


def kmeans_cluster(vectors, k: int, seed: int = 6) -> KMeansResult:
    """Cluster normalized condition vectors into k categories.

    `vectors` is a sequence of 6-vectors (or an (N,6) array). Same seed and
    input give bit-identical assignments and centroids.
    """
    points = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    return lloyd_kmeans(points, k, seed)
