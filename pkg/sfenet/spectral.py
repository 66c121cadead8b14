"""High-frequency phase features (Hifr).

Forward transform is unnormalized, the inverse carries 1/(HW), so
idft2(dft2(f)) == f. Bins within `radius` of the zero frequency (centered
coordinates) are treated as "central" and suppressed by the high-pass.
"""

from dataclasses import dataclass

import numpy as np

from sfenet.imagecore import gray_plane


ZERO_TOL = 1e-12


@dataclass(frozen=True)
class HighPassSpec:
    # negative radius disables the filter
    radius: int

    @classmethod
    def auto(cls, h, w):
        return cls(min(h, w) // 8)

    @classmethod
    def disabled(cls):
        return cls(-1)


def dft2(img):
    return np.fft.fft2(gray_plane(img))


def idft2(spec):
    return np.fft.ifft2(np.asarray(spec, dtype=np.complex128))


def central_mask(h, w, radius):
    """True for bins whose centered distance from DC is <= radius."""
    u = np.fft.fftfreq(h) * h
    v = np.fft.fftfreq(w) * w
    dist = np.sqrt(u[:, None] ** 2 + v[None, :] ** 2)
    return dist <= radius


def high_pass(spec, hp):
    spec = np.asarray(spec, dtype=np.complex128)
    h, w = spec.shape
    if hp.radius > min(h, w) / 2:
        raise ValueError('high-pass radius %i exceeds min(H, W)/2 for %ix%i spectrum' % (hp.radius, h, w))
    out = spec.copy()
    if hp.radius >= 0:
        out[central_mask(h, w, hp.radius)] = 0.0
    return out


def phase_only_spectrum(img, hp):
    """Unit-magnitude spectrum carrying the phase of the filtered transform; zero bins stay zero.

    Bins at or below ZERO_TOL times the largest unfiltered magnitude are
    round-off from the transform and count as zero, whatever the image scale.
    """
    spec = dft2(img)
    filtered = high_pass(spec, hp)
    magnitude = np.abs(filtered)
    out = np.zeros_like(filtered)
    nonzero = magnitude > ZERO_TOL * np.abs(spec).max()
    out[nonzero] = np.exp(1j * np.angle(filtered[nonzero]))
    return out


def phase_reconstruct(img, hp, normalize=True):
    g = np.real(idft2(phase_only_spectrum(img, hp)))
    if not normalize:
        return g
    lo, hi = g.min(), g.max()
    if hi - lo <= 0.0:
        return np.zeros_like(g)
    return np.clip((g - lo) / (hi - lo), 0.0, 1.0)
