"""Bezier curve evaluation, derivatives, curvature, and arc length.

All functions accept control points either as a plain ``(n+1, 2)`` float
array or as an :class:`railtrace.autodiff.Dual` of the same shape, so the
simulation loss can be differentiated straight through the geometry.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad

MAX_ORDER = 32
SPEED_EPS = 1e-9

# 4-point Gauss-Legendre nodes/weights on [-1, 1]
_GL_NODES = (
    -0.8611363115940526,
    -0.3399810435848563,
    0.3399810435848563,
    0.8611363115940526,
)
_GL_WEIGHTS = (
    0.3478548451374538,
    0.6521451548625461,
    0.6521451548625461,
    0.3478548451374538,
)

_BINOM: dict[int, np.ndarray] = {}


def _binomials(n: int) -> np.ndarray:
    if n > MAX_ORDER:
        raise ValueError(f"curve order {n} exceeds supported maximum {MAX_ORDER}")
    if n not in _BINOM:
        _BINOM[n] = np.array([float(math.comb(n, i)) for i in range(n + 1)])
    return _BINOM[n]


@dataclass
class CurveParams:
    """Control points of a Bezier curve; order is ``len(ctrl_points) - 1``."""

    ctrl_points: np.ndarray | ad.Dual

    def __post_init__(self):
        if np.shape(ad.value_of(self.ctrl_points))[0] < 2:
            raise ValueError("a Bezier curve needs at least 2 control points")
        _binomials(self.order)

    @property
    def order(self) -> int:
        return np.shape(ad.value_of(self.ctrl_points))[0] - 1


def _check_u(u: float) -> float:
    u = float(u)
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"curve parameter {u} outside [0, 1]")
    return u


def bernstein_weights(n: int, u: float) -> np.ndarray:
    """Bernstein basis values C(n,i) (1-u)^(n-i) u^i for i = 0..n."""
    binom = _binomials(n)
    i = np.arange(n + 1)
    return binom * (1.0 - u) ** (n - i) * u**i


def bernstein_matrix(n: int, us: np.ndarray) -> np.ndarray:
    return np.stack([bernstein_weights(n, u) for u in us])


def hodograph(ctrl):
    """Control points of the derivative curve: n * (P_{i+1} - P_i)."""
    n = np.shape(ad.value_of(ctrl))[0] - 1
    return (ctrl[1:] - ctrl[:-1]) * float(n)


def bezier_point(curve: CurveParams, u: float):
    """Point on the curve as the exact Bernstein sum."""
    u = _check_u(u)
    return ad.lincomb(bernstein_weights(curve.order, u), curve.ctrl_points)


def bezier_derivatives(curve: CurveParams, u: float):
    """First and second derivatives with respect to the curve parameter."""
    u = _check_u(u)
    n = curve.order
    d1 = hodograph(curve.ctrl_points)
    first = ad.lincomb(bernstein_weights(n - 1, u), d1)
    if n >= 2:
        second = ad.lincomb(bernstein_weights(n - 2, u), hodograph(d1))
    else:
        second = np.zeros(2)
    return first, second


def curvature_ex(curve: CurveParams, u: float):
    """Curvature |x'y'' - y'x''| / |v|^3 plus a degenerate-tangent flag."""
    first, second = bezier_derivatives(curve, u)
    speed2 = first[0] * first[0] + first[1] * first[1]
    speed = ad.sqrt(speed2)
    if ad.float_of(speed) <= SPEED_EPS:
        return 0.0, True
    cross = ad.absolute(first[0] * second[1] - first[1] * second[0])
    return cross / (speed * speed * speed), False


def curvature(curve: CurveParams, u: float):
    kappa, _ = curvature_ex(curve, u)
    return kappa


def _quadrature_params(N: int) -> tuple[np.ndarray, np.ndarray]:
    """Parameter values and weights for all N intervals, flattened."""
    half = 0.5 / N
    mids = (np.arange(N) + 0.5) / N
    us = (mids[:, None] + half * np.asarray(_GL_NODES)[None, :]).ravel()
    w = half * np.asarray(_GL_WEIGHTS)
    return us, w


def segment_lengths(curve: CurveParams, N: int):
    """Arc length of each of the N parameter intervals (4-pt Gauss-Legendre)."""
    if N < 1:
        raise ValueError("interval count must be >= 1")
    us, w = _quadrature_params(N)
    d1 = hodograph(curve.ctrl_points)
    tangents = ad.lincomb(bernstein_matrix(curve.order - 1, us), d1)  # (4N, 2)
    speed = ad.sqrt(tangents[:, 0] ** 2 + tangents[:, 1] ** 2).reshape(N, 4)
    return ad.asum(speed * w[None, :], axis=1)


def segment_length(curve: CurveParams, m: int, N: int):
    """Arc length of the m-th of N intervals."""
    if not 0 <= m < N:
        raise ValueError(f"interval index {m} outside 0..{N - 1}")
    a, b = m / N, (m + 1) / N
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    d1 = hodograph(curve.ctrl_points)
    n = curve.order
    total = 0.0
    for node, weight in zip(_GL_NODES, _GL_WEIGHTS):
        t = ad.lincomb(bernstein_weights(n - 1, mid + half * node), d1)
        total = total + (half * weight) * ad.sqrt(t[0] ** 2 + t[1] ** 2)
    return total


def sample_points(curve: CurveParams, us: np.ndarray):
    """Positions at many parameter values at once; shape (len(us), 2)."""
    return ad.lincomb(bernstein_matrix(curve.order, np.asarray(us)), curve.ctrl_points)


def sample_derivatives(curve: CurveParams, us: np.ndarray):
    """First/second derivatives at many parameter values; shapes (len(us), 2)."""
    us = np.asarray(us)
    n = curve.order
    d1 = hodograph(curve.ctrl_points)
    first = ad.lincomb(bernstein_matrix(n - 1, us), d1)
    if n >= 2:
        second = ad.lincomb(bernstein_matrix(n - 2, us), hodograph(d1))
    else:
        second = np.zeros((len(us), 2))
    return first, second


def curvature_profile(curve: CurveParams, us: np.ndarray):
    """Curvature at many parameter values; degenerate tangents give 0."""
    first, second = sample_derivatives(curve, us)
    speed2 = first[:, 0] ** 2 + first[:, 1] ** 2
    speed = ad.sqrt(speed2)
    degenerate = ad.value_of(speed) <= SPEED_EPS
    safe = ad.maximum(speed, SPEED_EPS)
    cross = ad.absolute(first[:, 0] * second[:, 1] - first[:, 1] * second[:, 0])
    kappa = cross / (safe * safe * safe)
    return ad.where(degenerate, np.zeros(len(us)), kappa)
