"""Image tensors, grayscale conversion, thresholding and binary PNM I/O.

Images are numpy float64 arrays of shape (H, W, C) with values in [0, 1].
Single-channel feature maps are carried as 2-D (H, W) arrays.
"""

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np


LUMA = np.array([0.299, 0.587, 0.114])

ImageTensor = np.ndarray
BinaryImage = np.ndarray


class PnmFormatError(ValueError):
    pass


@dataclass(frozen=True)
class StructuringElement:
    offsets: Tuple[Tuple[int, int], ...]

    def __post_init__(self):
        offsets = tuple((int(dy), int(dx)) for dy, dx in self.offsets)
        if len(offsets) == 0:
            raise ValueError('structuring element must not be empty')
        if len(set(offsets)) != len(offsets):
            raise ValueError('structuring element offsets must be unique: %r' % (offsets,))
        object.__setattr__(self, 'offsets', offsets)

    @classmethod
    def square(cls, size=3):
        r = size // 2
        return cls(tuple((dy, dx) for dy in range(-r, size - r) for dx in range(-r, size - r)))

    @classmethod
    def cross(cls):
        return cls(((0, 0), (-1, 0), (1, 0), (0, -1), (0, 1)))

    @classmethod
    def origin(cls):
        return cls(((0, 0),))

    def reflect(self):
        return StructuringElement(tuple((-dy, -dx) for dy, dx in self.offsets))

    def contains_origin(self):
        return (0, 0) in self.offsets


def check_image(img, channels=None):
    """Validate an ImageTensor and return it as a float64 (H, W, C) array."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3:
        raise ValueError('image must have shape (H, W, C), got %r' % (img.shape,))
    h, w, c = img.shape
    if h < 1 or w < 1:
        raise ValueError('image must be at least 1x1, got %ix%i' % (h, w))
    if channels is not None and c not in channels:
        raise ValueError('unsupported channel count %i' % c)
    if not np.all(np.isfinite(img)) or img.min() < 0.0 or img.max() > 1.0:
        raise ValueError('image values must be finite and in [0, 1]')
    return img


def to_grayscale(img):
    img = check_image(img, channels=(1, 3))
    if img.shape[2] == 1:
        return img.copy()
    gray = img @ LUMA
    return np.clip(gray, 0.0, 1.0)[:, :, None]


def gray_plane(img):
    """Grayscale as a 2-D map; 2-D input is taken to be a single channel already."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        return check_image(img)[:, :, 0]
    return to_grayscale(img)[:, :, 0]


def threshold(img, t):
    if not 0.0 <= t <= 1.0:
        raise ValueError('threshold must be in [0, 1], got %r' % t)
    return check_image(img, channels=(1,))[:, :, 0] >= t


def grid_slices(h, w, g) -> List[Tuple[slice, slice]]:
    """Row-major floor-based G x G partition of an H x W raster."""
    if g < 1 or g > min(h, w):
        raise ValueError('grid %r out of range for %ix%i image' % (g, h, w))
    cells = []
    for i in range(g):
        rows = slice(i * h // g, (i + 1) * h // g)
        for j in range(g):
            cells.append((rows, slice(j * w // g, (j + 1) * w // g)))
    return cells


def _header_tokens(data: bytes, count: int):
    tokens = []
    pos = 0
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b'#':
            while pos < n and data[pos:pos + 1] not in (b'\n', b'\r'):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b'#':
            pos += 1
        if start == pos:
            raise PnmFormatError('truncated PNM header')
        tokens.append(data[start:pos].decode('ascii', errors='replace'))
    if pos >= n or not data[pos:pos + 1].isspace():
        raise PnmFormatError('PNM header must end with a single whitespace byte')
    return tokens, pos + 1


def decode_pnm(data: bytes):
    tokens, offset = _header_tokens(data, 4)
    magic, width, height, maxval = tokens
    if magic not in ('P5', 'P6'):
        raise PnmFormatError('unsupported PNM magic %r' % magic)
    try:
        width, height, maxval = int(width), int(height), int(maxval)
    except ValueError:
        raise PnmFormatError('non-integer PNM header field in %r' % (tokens,))
    if width < 1 or height < 1:
        raise PnmFormatError('PNM dimensions must be positive, got %ix%i' % (width, height))
    if maxval != 255:
        raise PnmFormatError('maxval must be 255, got %i' % maxval)
    channels = 1 if magic == 'P5' else 3
    expected = width * height * channels
    payload = data[offset:offset + expected]
    if len(payload) != expected:
        raise PnmFormatError('truncated PNM payload: expected %i bytes, got %i' % (expected, len(payload)))
    raw = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, channels)
    return raw.astype(np.float64) / 255.0


def encode_pnm(img) -> bytes:
    img = check_image(img, channels=(1, 3))
    h, w, c = img.shape
    magic = 'P5' if c == 1 else 'P6'
    raw = np.round(img * 255.0).astype(np.uint8)
    return ('%s %i %i 255\n' % (magic, w, h)).encode('ascii') + raw.tobytes()


def read_pnm(path):
    with open(path, 'rb') as f:
        data = f.read()
    return decode_pnm(data)


def write_pnm(img, path):
    data = encode_pnm(img)
    with open(path, 'wb') as f:
        f.write(data)
