"""Classic 2-D gradient noise, differentiable through dual scalars.

Permutation table is a seeded shuffle of 0..255; gradients are 8 unit
directions; interpolation uses the smoothstep fade t^2 (3 - 2t), which keeps
the field C^1 so the optimizer can differentiate the global cost. Raw output
is rescaled by sqrt(2) (the 2-D single-octave bound for unit gradients is
+-sqrt(2)/2) so values stay within [-1, 1].
"""
from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .rng import STREAM_PERLIN, stream

_SQRT2 = float(np.sqrt(2.0))
_GRADS = np.array(
    [
        (1.0, 0.0),
        (-1.0, 0.0),
        (0.0, 1.0),
        (0.0, -1.0),
        (_SQRT2 / 2, _SQRT2 / 2),
        (-_SQRT2 / 2, _SQRT2 / 2),
        (_SQRT2 / 2, -_SQRT2 / 2),
        (-_SQRT2 / 2, -_SQRT2 / 2),
    ]
)


def permutation_table(seed: int) -> np.ndarray:
    """Doubled 512-entry permutation of 0..255 for lattice hashing."""
    perm = stream(seed, STREAM_PERLIN).permutation(256)
    return np.concatenate([perm, perm])


def _fade(t):
    return t * t * (3.0 - 2.0 * t)


def _corner(perm, xi, yi, xf, yf):
    h = perm[perm[xi & 255] + (yi & 255)] & 7
    return xf * _GRADS[h, 0] + yf * _GRADS[h, 1]


def noise2(x, y, perm: np.ndarray):
    """Single-octave noise at (x, y); accepts plain or dual arrays."""
    xv, yv = np.asarray(ad.value_of(x)), np.asarray(ad.value_of(y))
    x0 = np.floor(xv).astype(int)
    y0 = np.floor(yv).astype(int)
    xf = x - x0
    yf = y - y0

    n00 = _corner(perm, x0, y0, xf, yf)
    n10 = _corner(perm, x0 + 1, y0, xf - 1.0, yf)
    n01 = _corner(perm, x0, y0 + 1, xf, yf - 1.0)
    n11 = _corner(perm, x0 + 1, y0 + 1, xf - 1.0, yf - 1.0)

    u = _fade(xf)
    v = _fade(yf)
    nx0 = n00 + u * (n10 - n00)
    nx1 = n01 + u * (n11 - n01)
    return (nx0 + v * (nx1 - nx0)) * _SQRT2


def fractal2(x, y, perm: np.ndarray, octaves: int, persistence: float = 0.5):
    """Octave sum normalized back into [-1, 1]."""
    if octaves < 1:
        raise ValueError("octaves must be >= 1")
    total = None
    norm = 0.0
    for o in range(octaves):
        freq = float(2**o)
        amp = persistence**o
        layer = noise2(x * freq, y * freq, perm) * amp
        total = layer if total is None else total + layer
        norm += amp
    return total * (1.0 / norm)
