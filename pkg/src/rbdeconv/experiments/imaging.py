"""Blur kernels, support masks, grayscale PGM I/O and the default test image.

Kernels are built on a small centred stencil and then embedded in the image
grid with their centre at pixel ``(0, 0)`` (periodic wrap-around), which is
the convention under which the 2-D DFT diagonalizes the blur.
"""
import numpy as np
from scipy import ndimage

_EPS = np.finfo(float).eps

KERNEL_KINDS = ("motion", "gaussian", "sin")


def motion_kernel(length, theta):
    """Linear motion blur of ``length`` pixels at angle ``theta`` degrees.

    Port of the classic ``fspecial('motion', len, theta)`` construction:
    each pixel gets weight ``max(1 - dist, 0)`` where ``dist`` is its
    distance to the motion segment (distance to the end point past the
    ends), then the stencil is normalized to unit sum.
    """
    length = max(1, int(length))
    half = (length - 1) / 2.0
    phi = np.mod(theta, 180.0) / 180.0 * np.pi
    cphi, sphi = np.cos(phi), np.sin(phi)
    xsign = np.sign(cphi)
    linewdt = 1.0

    sx = np.fix(half * cphi + linewdt * xsign - length * _EPS)
    sy = np.fix(half * sphi + linewdt - length * _EPS)
    xs = np.arange(0.0, sx + xsign, xsign) if xsign != 0 else np.array([0.0])
    ys = np.arange(0.0, sy + 1.0)
    x, y = np.meshgrid(xs, ys)

    dist = y * cphi - x * sphi
    rad = np.sqrt(x**2 + y**2)
    last = (rad >= half) & (np.abs(dist) <= linewdt)
    x2last = half - np.abs((x[last] + dist[last] * sphi) / cphi)
    dist[last] = np.sqrt(dist[last] ** 2 + x2last**2)
    dist = linewdt + _EPS - np.abs(dist)
    dist[dist < 0] = 0.0

    r, c = dist.shape
    k = np.zeros((2 * r - 1, 2 * c - 1))
    k[:r, :c] = dist[::-1, ::-1]
    k[r - 1 :, c - 1 :] = dist
    if cphi > 0:
        k = k[::-1]
    return k / k.sum()


def gaussian_kernel(cov=((1.0, 0.8), (0.8, 1.0)), length=7):
    """Anisotropic Gaussian with covariance ``(length / 6)^2 * cov``.

    Truncated outside Mahalanobis radius 3, on a ``(2 * length + 1)`` square
    stencil.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (2, 2) or not np.allclose(cov, cov.T):
        raise ValueError("covariance must be a symmetric 2x2 matrix")
    if np.linalg.eigvalsh(cov).min() <= 1e-12 * max(1.0, np.abs(cov).max()):
        raise ValueError("covariance must be positive definite")
    length = int(length)
    if length < 1:
        raise ValueError("kernel length must be >= 1")
    prec = np.linalg.inv(cov * (length / 6.0) ** 2)
    ax = np.arange(-length, length + 1, dtype=float)
    r, c = np.meshgrid(ax, ax, indexing="ij")
    q = prec[0, 0] * r * r + 2 * prec[0, 1] * r * c + prec[1, 1] * c * c
    k = np.where(q <= 9.0, np.exp(-0.5 * q), 0.0)
    return k / k.sum()


def sin_kernel(length=15, amplitude=None, samples_per_pixel=8):
    """Blur along one period of a sine curve.

    The path ``(t, a sin(2 pi t / length))`` for ``t`` in
    ``[-length/2, length/2]`` is sampled densely; every sample adds unit
    weight to the nearest pixel (rows = ``-a sin``, columns = ``t``). The
    default amplitude is ``length / 4``.
    """
    length = int(length)
    if length < 1:
        raise ValueError("kernel length must be >= 1")
    a = length / 4.0 if amplitude is None else float(amplitude)
    t = np.linspace(-length / 2.0, length / 2.0, samples_per_pixel * length + 1)
    cols = np.rint(t).astype(int)
    rows = np.rint(-a * np.sin(2 * np.pi * t / max(length, 1))).astype(int)
    rr = int(max(np.abs(rows).max(), 0))
    cc = int(np.abs(cols).max())
    k = np.zeros((2 * rr + 1, 2 * cc + 1))
    np.add.at(k, (rows + rr, cols + cc), 1.0)
    return k / k.sum()


def make_kernel(kind, length=12, theta=45.0, cov=((1.0, 0.8), (0.8, 1.0))):
    """Stencil for ``kind`` in :data:`KERNEL_KINDS`, odd-sized and centred."""
    if kind == "motion":
        return motion_kernel(length, theta)
    if kind == "gaussian":
        return gaussian_kernel(cov, length)
    if kind == "sin":
        return sin_kernel(length)
    raise ValueError(f"unknown kernel kind {kind!r}; choose from {KERNEL_KINDS}")


def dilate_support(mask, pixels):
    """Grow a boolean stencil mask by ``pixels`` (8-connected), padding as needed."""
    mask = np.asarray(mask, dtype=bool)
    pixels = int(pixels)
    if pixels < 0:
        raise ValueError("dilation must be >= 0")
    if pixels == 0:
        return mask.copy()
    padded = np.pad(mask, pixels)
    return ndimage.binary_dilation(padded, structure=np.ones((3, 3), bool), iterations=pixels)


def embed_centered(stencil, shape):
    """Place an odd-sized stencil on a grid of ``shape`` with its centre at ``(0, 0)``."""
    stencil = np.asarray(stencil)
    sr, sc = stencil.shape
    if sr % 2 == 0 or sc % 2 == 0:
        raise ValueError("stencil dimensions must be odd")
    if sr > shape[0] or sc > shape[1]:
        raise ValueError("stencil larger than the image grid")
    grid = np.zeros(shape, dtype=stencil.dtype)
    grid[:sr, :sc] = stencil
    return np.roll(grid, (-(sr // 2), -(sc // 2)), axis=(0, 1))


def blur(image, kernel_grid):
    """Periodic convolution of ``image`` with a kernel given on the same grid."""
    out = np.fft.ifft2(np.fft.fft2(image) * np.fft.fft2(kernel_grid))
    if np.isrealobj(image) and np.isrealobj(kernel_grid):
        return out.real
    return out


# ---------------------------------------------------------------- PGM


def read_pgm(path):
    """Read a binary (P5) 8-bit PGM file as floats in ``[0, 1]``."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError(f"{path}: truncated PGM header")
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    width, height, maxval = (int(t) for t in tokens[1:])
    if not 0 < maxval < 256:
        raise ValueError(f"{path}: only 8-bit PGM is supported (maxval {maxval})")
    pos += 1
    raw = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos)
    return raw.reshape(height, width).astype(float) / maxval


def write_pgm(path, image):
    """Write an image with values in ``[0, 1]`` as binary 8-bit PGM."""
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise ValueError("expected a 2-D grayscale image")
    pix = np.rint(np.clip(img, 0.0, 1.0) * 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (img.shape[1], img.shape[0]))
        fh.write(pix.tobytes())


def test_image(size=256):
    """The scikit-image ``camera`` photograph, block-averaged to ``size x size``."""
    from skimage import data

    img = data.camera().astype(float) / 255.0
    f = img.shape[0] // size
    if f < 1 or img.shape[0] % size or img.shape[1] != img.shape[0]:
        raise ValueError(f"cannot reduce a {img.shape} image to {size}x{size}")
    return img.reshape(size, f, size, f).mean(axis=(1, 3))
