"""Color-space conversions and perceptual distance.

All image functions take float64 arrays of shape (..., 3) — a single pixel,
a row, or a full H×W×3 image — and return a fresh array of the same shape.
Channel conventions:

* RGB: unit interval, order R,G,B (sRGB-encoded for the Lab path)
* YUV: Y in [0,1], U and V in [-0.5, 0.5] (the BT.601-style matrix below)
* HSV: H in degrees [0, 360), S and V in [0,1]; achromatic pixels get H=0, S=0
* Lab: CIE L*a*b* under D65, L in [0,100]

Everything here is pure and allocation-fresh; safe to call concurrently.
"""

from __future__ import annotations

import numpy as np

# Forward luminance/chrominance matrix, exactly as used throughout the
# pipeline.  The inverse is its numerical inverse, computed once.
RGB_TO_YUV_MATRIX = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.169, -0.331, 0.5],
        [0.5, -0.419, -0.081],
    ],
    dtype=np.float64,
)
YUV_TO_RGB_MATRIX = np.linalg.inv(RGB_TO_YUV_MATRIX)

LUMA_WEIGHTS = RGB_TO_YUV_MATRIX[0].copy()

# sRGB -> XYZ (D65). The reference white is defined self-consistently as the
# image of (1,1,1) under the same arithmetic, so the gray axis maps to
# a = b = 0 at float precision.
SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ],
    dtype=np.float64,
)
XYZ_TO_SRGB = np.linalg.inv(SRGB_TO_XYZ)

_LAB_DELTA = 6.0 / 29.0


def _split(img: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    img = np.asarray(img, dtype=np.float64)
    return img[..., 0], img[..., 1], img[..., 2]


def luma(img: np.ndarray) -> np.ndarray:
    """Y channel of the RGB->YUV map, shape (...,).

    The summation grouping (R and B first, then G) keeps (1,1,1) -> 1.0
    bitwise exact in float64 and is fixed so results never depend on
    evaluation order.
    """
    r, g, b = _split(img)
    return (0.299 * r + 0.114 * b) + 0.587 * g


def rgb_to_yuv(img: np.ndarray) -> np.ndarray:
    """Linear RGB->YUV per the 3x3 matrix above. No clamping."""
    r, g, b = _split(img)
    y = (0.299 * r + 0.114 * b) + 0.587 * g
    u = (-0.169 * r + -0.331 * g) + 0.5 * b
    v = (0.5 * r + -0.081 * b) + -0.419 * g
    return np.stack([y, u, v], axis=-1)


def yuv_to_rgb(img: np.ndarray) -> np.ndarray:
    """Inverse of :func:`rgb_to_yuv`; output clamped to [0, 1]."""
    y, u, v = _split(img)
    m = YUV_TO_RGB_MATRIX
    r = m[0, 0] * y + m[0, 1] * u + m[0, 2] * v
    g = m[1, 0] * y + m[1, 1] * u + m[1, 2] * v
    b = m[2, 0] * y + m[2, 1] * u + m[2, 2] * v
    return np.clip(np.stack([r, g, b], axis=-1), 0.0, 1.0)


def rgb_to_hsv(img: np.ndarray) -> np.ndarray:
    """Hexcone HSV with H in degrees [0, 360).

    Achromatic pixels (R = G = B) get H = 0 and S = 0 by convention.
    """
    r, g, b = _split(img)
    vmax = np.maximum(np.maximum(r, g), b)
    vmin = np.minimum(np.minimum(r, g), b)
    chroma = vmax - vmin

    with np.errstate(divide="ignore", invalid="ignore"):
        h = np.select(
            [chroma == 0.0, vmax == r, vmax == g],
            [
                0.0,
                60.0 * np.mod((g - b) / chroma, 6.0),
                60.0 * ((b - r) / chroma + 2.0),
            ],
            default=60.0 * ((r - g) / chroma + 4.0),
        )
        s = np.where(vmax > 0.0, chroma / np.where(vmax > 0.0, vmax, 1.0), 0.0)
    h = np.where(h >= 360.0, h - 360.0, h)
    return np.stack([h, s, vmax], axis=-1)


def hsv_to_rgb(img: np.ndarray) -> np.ndarray:
    """Inverse hexcone map; H taken in degrees, wrapped mod 360."""
    h, s, v = _split(img)
    hp = np.mod(h, 360.0) / 60.0
    c = v * s
    x = c * (1.0 - np.abs(np.mod(hp, 2.0) - 1.0))
    m = v - c
    zeros = np.zeros_like(c)
    sector = np.floor(hp).astype(np.int64) % 6
    r1 = np.choose(sector, [c, x, zeros, zeros, x, c])
    g1 = np.choose(sector, [x, c, c, x, zeros, zeros])
    b1 = np.choose(sector, [zeros, zeros, x, c, c, x])
    return np.stack([r1 + m, g1 + m, b1 + m], axis=-1)


def srgb_to_linear(v: np.ndarray) -> np.ndarray:
    """Piecewise sRGB transfer (gamma 2.4), extended sign-symmetrically so
    out-of-range inputs (pre-clamp network outputs) stay defined."""
    v = np.asarray(v, dtype=np.float64)
    a = np.abs(v)
    lin = np.where(a <= 0.04045, a / 12.92, ((a + 0.055) / 1.055) ** 2.4)
    return np.sign(v) * lin


def linear_to_srgb(v: np.ndarray) -> np.ndarray:
    """Inverse of :func:`srgb_to_linear` (same symmetric extension)."""
    v = np.asarray(v, dtype=np.float64)
    a = np.abs(v)
    enc = np.where(a <= 0.0031308, a * 12.92, 1.055 * a ** (1.0 / 2.4) - 0.055)
    return np.sign(v) * enc


def srgb_to_linear_grad(v: np.ndarray) -> np.ndarray:
    """d(srgb_to_linear)/dv; even in v under the symmetric extension."""
    a = np.abs(np.asarray(v, dtype=np.float64))
    return np.where(
        a <= 0.04045,
        1.0 / 12.92,
        (2.4 / 1.055) * ((a + 0.055) / 1.055) ** 1.4,
    )


def _xyz_from_linear(lin: np.ndarray) -> np.ndarray:
    r, g, b = lin[..., 0], lin[..., 1], lin[..., 2]
    m = SRGB_TO_XYZ
    x = m[0, 0] * r + m[0, 1] * g + m[0, 2] * b
    y = m[1, 0] * r + m[1, 1] * g + m[1, 2] * b
    z = m[2, 0] * r + m[2, 1] * g + m[2, 2] * b
    return np.stack([x, y, z], axis=-1)


LAB_WHITE = _xyz_from_linear(np.ones(3))


def lab_f(t: np.ndarray) -> np.ndarray:
    """CIE Lab companding function; linear branch also covers t <= 0."""
    t = np.asarray(t, dtype=np.float64)
    cube = _LAB_DELTA**3
    return np.where(
        t > cube,
        np.cbrt(np.where(t > cube, t, 1.0)),
        t / (3.0 * _LAB_DELTA**2) + 4.0 / 29.0,
    )


def lab_f_grad(t: np.ndarray) -> np.ndarray:
    """Derivative of :func:`lab_f`."""
    t = np.asarray(t, dtype=np.float64)
    cube = _LAB_DELTA**3
    safe = np.where(t > cube, t, 1.0)
    return np.where(
        t > cube,
        np.cbrt(safe) / (3.0 * safe),
        1.0 / (3.0 * _LAB_DELTA**2),
    )


def rgb_to_lab(img: np.ndarray) -> np.ndarray:
    """sRGB -> CIE Lab under D65. Total on any real input (see transfer
    extension); for valid RGB, L in [0,100] and gray maps to a = b = 0."""
    img = np.asarray(img, dtype=np.float64)
    xyz = _xyz_from_linear(srgb_to_linear(img))
    fx = lab_f(xyz[..., 0] / LAB_WHITE[0])
    fy = lab_f(xyz[..., 1] / LAB_WHITE[1])
    fz = lab_f(xyz[..., 2] / LAB_WHITE[2])
    l = 116.0 * fy - 16.0
    a = 500.0 * (fx - fy)
    b = 200.0 * (fy - fz)
    return np.stack([l, a, b], axis=-1)


def lab_to_rgb(img: np.ndarray) -> np.ndarray:
    """CIE Lab -> sRGB, clamped to [0, 1]."""
    l, a, b = _split(img)
    fy = (l + 16.0) / 116.0
    fx = fy + a / 500.0
    fz = fy - b / 200.0

    def finv(u: np.ndarray) -> np.ndarray:
        return np.where(
            u > _LAB_DELTA,
            u**3,
            3.0 * _LAB_DELTA**2 * (u - 4.0 / 29.0),
        )

    xyz = np.stack(
        [finv(fx) * LAB_WHITE[0], finv(fy) * LAB_WHITE[1], finv(fz) * LAB_WHITE[2]],
        axis=-1,
    )
    m = XYZ_TO_SRGB
    lin_r = m[0, 0] * xyz[..., 0] + m[0, 1] * xyz[..., 1] + m[0, 2] * xyz[..., 2]
    lin_g = m[1, 0] * xyz[..., 0] + m[1, 1] * xyz[..., 1] + m[1, 2] * xyz[..., 2]
    lin_b = m[2, 0] * xyz[..., 0] + m[2, 1] * xyz[..., 1] + m[2, 2] * xyz[..., 2]
    srgb = linear_to_srgb(np.stack([lin_r, lin_g, lin_b], axis=-1))
    return np.clip(srgb, 0.0, 1.0)


def delta_e(p1: np.ndarray, p2: np.ndarray) -> np.ndarray:
    """Euclidean distance in Lab: sqrt(dL^2 + da^2 + db^2).

    Accepts single pixels (returns a scalar) or stacks of them.
    """
    p1 = np.asarray(p1, dtype=np.float64)
    p2 = np.asarray(p2, dtype=np.float64)
    d = p1 - p2
    out = np.sqrt(np.sum(d * d, axis=-1))
    return float(out) if out.ndim == 0 else out
