"""Forward-mode automatic differentiation with dense partial vectors.

A ``Dual`` carries a numpy value of any shape together with a partials
array holding one extra trailing axis of length P (the number of scalar
parameters). Arithmetic on the value side performs exactly the numpy
operations a plain evaluation would, so values computed under
differentiation are bit-identical to plain runs.

The module-level functions (``sqrt``, ``exp``, ``clip``, ...) dispatch on
type: they accept either plain numpy inputs or ``Dual`` and keep downstream
code generic over both.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

Plain = Union[float, int, np.ndarray, np.floating]
Scalar = Union["Dual", Plain]


class AutodiffError(ValueError):
    """Raised when a primitive would produce an invalid derivative or value."""

    def __init__(self, primitive: str, message: str, index: int | None = None):
        self.primitive = primitive
        self.index = index
        at = "" if index is None else f" at element {index}"
        super().__init__(f"{primitive}: {message}{at}")


def _first_bad(mask) -> int:
    return int(np.argmax(np.asarray(mask).ravel()))


def _vexpand(v):
    # align a value against a partials array (which has a trailing P axis)
    return v if np.ndim(v) == 0 else np.asarray(v)[..., None]


class Dual:
    """Value plus dense partial derivatives w.r.t. P parameters."""

    __slots__ = ("value", "partials")

    # make numpy defer to the reflected operators instead of building
    # object arrays when an ndarray is the left operand
    __array_ufunc__ = None
    __array_priority__ = 1000

    def __init__(self, value, partials):
        self.value = value
        self.partials = partials

    # -- construction -----------------------------------------------------

    @staticmethod
    def parameters(theta: np.ndarray) -> "Dual":
        """Lift a flat parameter vector; partials form the identity."""
        theta = np.asarray(theta, dtype=float)
        if theta.ndim != 1:
            raise AutodiffError("parameters", "theta must be a flat vector")
        return Dual(theta.copy(), np.eye(theta.size))

    @property
    def nparams(self) -> int:
        return self.partials.shape[-1]

    @property
    def shape(self):
        return np.shape(self.value)

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other: Scalar) -> "Dual":
        if isinstance(other, Dual):
            return Dual(self.value + other.value, self.partials + other.partials)
        return Dual(self.value + other, self.partials)

    def __radd__(self, other: Plain) -> "Dual":
        return Dual(other + self.value, self.partials)

    def __sub__(self, other: Scalar) -> "Dual":
        if isinstance(other, Dual):
            return Dual(self.value - other.value, self.partials - other.partials)
        return Dual(self.value - other, self.partials)

    def __rsub__(self, other: Plain) -> "Dual":
        return Dual(other - self.value, -self.partials)

    def __mul__(self, other: Scalar) -> "Dual":
        if isinstance(other, Dual):
            return Dual(
                self.value * other.value,
                self.partials * _vexpand(other.value) + _vexpand(self.value) * other.partials,
            )
        return Dual(self.value * other, self.partials * _vexpand(other))

    def __rmul__(self, other: Plain) -> "Dual":
        return Dual(other * self.value, _vexpand(other) * self.partials)

    def __truediv__(self, other: Scalar) -> "Dual":
        # value side uses true division so it stays bit-identical to plain
        # evaluation; only the partials go through the reciprocal
        if isinstance(other, Dual):
            if np.any(other.value == 0.0):
                raise AutodiffError("divide", "division by zero", _first_bad(other.value == 0.0))
            inv = 1.0 / other.value
            val = self.value / other.value
            return Dual(val, (self.partials - _vexpand(val) * other.partials) * _vexpand(inv))
        if np.any(np.asarray(other) == 0.0):
            raise AutodiffError("divide", "division by zero", _first_bad(np.asarray(other) == 0.0))
        inv = 1.0 / np.asarray(other)
        return Dual(self.value / other, self.partials * _vexpand(inv))

    def __rtruediv__(self, other: Plain) -> "Dual":
        if np.any(self.value == 0.0):
            raise AutodiffError("divide", "division by zero", _first_bad(self.value == 0.0))
        val = other / self.value
        return Dual(val, -_vexpand(val / self.value) * self.partials)

    def __neg__(self) -> "Dual":
        return Dual(-self.value, -self.partials)

    def __pow__(self, p: int) -> "Dual":
        if not isinstance(p, (int, np.integer)) or p < 1:
            raise AutodiffError("power", "only positive integer exponents are supported")
        val = self.value ** p
        return Dual(val, float(p) * _vexpand(self.value ** (p - 1)) * self.partials)

    # -- comparisons branch on values ---------------------------------------

    def __lt__(self, other):
        return self.value < value_of(other)

    def __le__(self, other):
        return self.value <= value_of(other)

    def __gt__(self, other):
        return self.value > value_of(other)

    def __ge__(self, other):
        return self.value >= value_of(other)

    # -- structure ----------------------------------------------------------

    def __getitem__(self, idx) -> "Dual":
        return Dual(self.value[idx], self.partials[idx])

    def reshape(self, *shape) -> "Dual":
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return Dual(self.value.reshape(shape), self.partials.reshape(shape + (self.nparams,)))

    def __repr__(self) -> str:
        return f"Dual(value={self.value!r})"


# -- generic functions over Dual or plain inputs -----------------------------


def value_of(x: Scalar):
    """Plain value of a possibly-dual quantity."""
    return x.value if isinstance(x, Dual) else x


def sqrt(x: Scalar) -> Scalar:
    if isinstance(x, Dual):
        if np.any(x.value < 0.0):
            raise AutodiffError("sqrt", "square root of negative", _first_bad(x.value < 0.0))
        root = np.sqrt(x.value)
        safe = np.where(root == 0.0, 1.0, root)
        return Dual(root, x.partials * _vexpand(0.5 / safe))
    if np.any(np.asarray(x) < 0.0):
        raise AutodiffError("sqrt", "square root of negative", _first_bad(np.asarray(x) < 0.0))
    return np.sqrt(x)


def exp(x: Scalar) -> Scalar:
    if isinstance(x, Dual):
        e = np.exp(x.value)
        return Dual(e, x.partials * _vexpand(e))
    return np.exp(x)


def absolute(x: Scalar) -> Scalar:
    # subgradient 0 at 0 (sign(0) == 0)
    if isinstance(x, Dual):
        return Dual(np.abs(x.value), x.partials * _vexpand(np.sign(x.value)))
    return np.abs(x)


def sign(x: Scalar):
    """Sign with zero derivative everywhere; returns a plain array."""
    return np.sign(value_of(x))


def clip(x: Scalar, lo: float, hi: float) -> Scalar:
    """Clamp with pass-through derivative strictly inside the bounds."""
    if isinstance(x, Dual):
        inside = (x.value > lo) & (x.value < hi)
        return Dual(np.clip(x.value, lo, hi), x.partials * _vexpand(np.where(inside, 1.0, 0.0)))
    return np.clip(x, lo, hi)


def maximum(a: Scalar, b: Scalar) -> Scalar:
    """Elementwise max; at ties the derivative of the first argument wins."""
    av, bv = value_of(a), value_of(b)
    take_a = av >= bv
    if not isinstance(a, Dual) and not isinstance(b, Dual):
        return np.maximum(a, b)
    val = np.maximum(av, bv)
    pa = a.partials if isinstance(a, Dual) else None
    pb = b.partials if isinstance(b, Dual) else None
    mask = _vexpand(np.where(take_a, 1.0, 0.0))
    if pa is not None and pb is not None:
        parts = pa * mask + pb * (1.0 - mask)
    elif pa is not None:
        parts = pa * mask
    else:
        parts = pb * (1.0 - mask)
    return Dual(val, parts)


def where(cond, a: Scalar, b: Scalar) -> Scalar:
    """Branch on a plain boolean condition."""
    av, bv = value_of(a), value_of(b)
    if not isinstance(a, Dual) and not isinstance(b, Dual):
        return np.where(cond, a, b)
    val = np.where(cond, av, bv)
    mask = _vexpand(np.where(cond, 1.0, 0.0))
    pa = a.partials if isinstance(a, Dual) else 0.0
    pb = b.partials if isinstance(b, Dual) else 0.0
    return Dual(val, pa * mask + pb * (1.0 - mask))


def lincomb(weights: np.ndarray, x: Scalar) -> Scalar:
    """Contract plain ``weights`` against the leading axis of ``x``."""
    if isinstance(x, Dual):
        return Dual(
            np.tensordot(weights, x.value, axes=1),
            np.tensordot(weights, x.partials, axes=1),
        )
    return np.tensordot(weights, x, axes=1)


def asum(x: Scalar, axis=None) -> Scalar:
    if isinstance(x, Dual):
        paxis = tuple(range(x.partials.ndim - 1)) if axis is None else axis
        return Dual(np.sum(x.value, axis=axis), np.sum(x.partials, axis=paxis))
    return np.sum(x, axis=axis)


def stack(items: Sequence[Scalar]) -> Scalar:
    if any(isinstance(it, Dual) for it in items):
        nparams = next(it.nparams for it in items if isinstance(it, Dual))
        vals = np.stack([np.asarray(value_of(it), dtype=float) for it in items])
        parts = np.stack([
            it.partials if isinstance(it, Dual)
            else np.zeros(np.shape(value_of(it)) + (nparams,))
            for it in items
        ])
        return Dual(vals, parts)
    return np.stack(items)


def float_of(x: Scalar) -> float:
    return float(value_of(x))


# -- gradient entry points ---------------------------------------------------


def grad(f: Callable[[Dual], Scalar], theta: np.ndarray) -> tuple[float, np.ndarray]:
    """Evaluate ``f`` and its gradient at a flat parameter vector.

    A plain (non-dual) output means the function is locally constant in the
    parameters (e.g. composed only of sign), giving a zero gradient.
    """
    theta = np.asarray(theta, dtype=float)
    out = f(Dual.parameters(theta))
    if not isinstance(out, Dual):
        return float(out), np.zeros(theta.size)
    val = float(out.value)
    g = np.asarray(out.partials, dtype=float).reshape(-1)
    if np.isnan(val):
        raise AutodiffError("grad", "NaN value")
    if np.any(np.isnan(g)):
        raise AutodiffError("grad", "NaN gradient", _first_bad(np.isnan(g)))
    return val, g


@dataclass
class GradCheckReport:
    """Central-difference comparison for every parameter component."""

    rel_errors: np.ndarray
    max_rel_error: float
    mean_rel_error: float
    flagged: list[int] = field(default_factory=list)

    def ok(self, tol: float) -> bool:
        return self.max_rel_error < tol


def check_gradient(
    f: Callable,
    theta: np.ndarray,
    h: float = 1e-5,
    flag_tol: float = 1e-4,
) -> GradCheckReport:
    """Compare ``grad`` against central finite differences of ``f``.

    ``f`` must accept either a Dual (for the analytic path) or a plain
    vector (for the difference quotients). Relative-error denominators are
    floored at 1e-8. Components exceeding ``flag_tol`` are listed in
    ``flagged`` rather than raised, since non-smooth primitives (sign, abs,
    clip at a boundary) legitimately disagree with finite differences.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    theta = np.asarray(theta, dtype=float)
    _, g = grad(f, theta)
    fd = np.empty_like(theta)
    for i in range(theta.size):
        step = np.zeros_like(theta)
        step[i] = h
        fd[i] = (float_of(f(theta + step)) - float_of(f(theta - step))) / (2.0 * h)
    denom = np.maximum(np.maximum(np.abs(g), np.abs(fd)), 1e-8)
    rel = np.abs(g - fd) / denom
    return GradCheckReport(
        rel_errors=rel,
        max_rel_error=float(np.max(rel)) if rel.size else 0.0,
        mean_rel_error=float(np.mean(rel)) if rel.size else 0.0,
        flagged=[int(i) for i in np.nonzero(rel >= flag_tol)[0]],
    )
