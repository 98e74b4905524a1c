"""2x2 frequency-response algebra in the (a,c) and quadrature bases.

An :class:`ACMatrix` stores the doubled representation of a phase-sensitive
element,

    [[G_a(w),        G_c(w)       ],
     [conj(G_c(-w)), conj(G_a(-w))]]

acting on (A(w), A^dagger(-w)).  A :class:`QuadMatrix` is the same map in the
(x, p) basis.  Entries may be scalars or equally shaped numpy arrays, so a
whole frequency grid travels as one object.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import kernels
from .errors import PointOnCurve, RefinementRequired

# J maps (a, c) amplitudes to (x, p); sqrt(2) J is unitary.
J = 0.5 * np.array([[1.0, 1.0], [-1j, 1j]])
J_INV = np.array([[1.0, 1j], [1.0, -1j]])


def _as(x):
    return np.asarray(x, dtype=complex) if np.ndim(x) else complex(x)


@dataclass(frozen=True)
class ACMatrix:
    aa: Any
    ac: Any
    ca: Any
    cc: Any
    omega: Any = 0.0

    @classmethod
    def from_pair(cls, g_a: Callable, g_c: Callable, omega) -> "ACMatrix":
        """Build the doubled matrix from evaluators of G_a and G_c."""
        w = np.asarray(omega, dtype=float)
        return cls(
            aa=_as(g_a(w)),
            ac=_as(g_c(w)),
            ca=_as(np.conj(g_c(-w))),
            cc=_as(np.conj(g_a(-w))),
            omega=omega,
        )

    @classmethod
    def identity(cls, omega=0.0) -> "ACMatrix":
        one = np.ones_like(np.asarray(omega, dtype=complex)) if np.ndim(omega) else 1.0 + 0j
        return cls(one, 0 * one, 0 * one, one, omega)

    def stack(self) -> np.ndarray:
        """Entries as an array of shape (..., 2, 2)."""
        return _stack(self.aa, self.ac, self.ca, self.cc)

    def trace(self):
        return self.aa + self.cc

    def det(self):
        return self.aa * self.cc - self.ac * self.ca

    def __matmul__(self, other: "ACMatrix") -> "ACMatrix":
        return ACMatrix(
            self.aa * other.aa + self.ac * other.ca,
            self.aa * other.ac + self.ac * other.cc,
            self.ca * other.aa + self.cc * other.ca,
            self.ca * other.ac + self.cc * other.cc,
            self.omega,
        )


@dataclass(frozen=True)
class QuadMatrix:
    xx: Any
    xp: Any
    px: Any
    pp: Any
    omega: Any = 0.0

    @classmethod
    def diag(cls, gx, gp, omega=0.0) -> "QuadMatrix":
        return cls(_as(gx), 0j * _as(gx), 0j * _as(gx), _as(gp), omega)

    def stack(self) -> np.ndarray:
        return _stack(self.xx, self.xp, self.px, self.pp)

    def trace(self):
        return self.xx + self.pp

    def det(self):
        return self.xx * self.pp - self.xp * self.px


def _stack(a, b, c, d):
    a, b, c, d = np.broadcast_arrays(*(np.asarray(v, dtype=complex) for v in (a, b, c, d)))
    return np.stack([np.stack([a, b], -1), np.stack([c, d], -1)], -2)


def _unstack(m, cls, omega):
    vals = [m[..., 0, 0], m[..., 0, 1], m[..., 1, 0], m[..., 1, 1]]
    if m.ndim == 2:
        vals = [complex(v) for v in vals]
    return cls(*vals, omega=omega)


def to_quadrature_basis(m: ACMatrix) -> QuadMatrix:
    """Similarity transform J m J^-1; trace and determinant are preserved."""
    return _unstack(J @ m.stack() @ J_INV, QuadMatrix, m.omega)


def from_quadrature_basis(q: QuadMatrix) -> ACMatrix:
    return _unstack(J_INV @ q.stack() @ J, ACMatrix, q.omega)


def check_symmetry(f: Callable, grid, tol: float = 1e-9) -> bool:
    """True iff conj(f(-w)) matches f(w) on every grid point.

    The tolerance is relative to max(1, |f(w)|), so it is absolute for
    responses of order one and relative for large resonant gains.
    """
    w = np.atleast_1d(np.asarray(grid, dtype=float))
    if w.size == 0:
        raise ValueError("grid must be non-empty")
    if tol <= 0:
        raise ValueError("tol must be positive")
    plus = np.asarray(f(w), dtype=complex)
    minus = np.asarray(f(-w), dtype=complex)
    err = np.abs(np.conj(minus) - plus)
    return bool(np.all(err <= tol * np.maximum(1.0, np.abs(plus))))


def rotation(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def svd_gain(m: QuadMatrix):
    """Closed-form singular values of a 2x2 quadrature matrix.

    Returns ``(theta, g_x, g_p, phi)`` with ``g_x >= g_p >= 0``.  The singular
    values come from the eigenvalues of m m^H and are exact for any complex
    matrix.  The rotation angles assume a real matrix: ``theta`` aligns the
    major output axis and ``phi`` is read from U(-theta) m.  Then
    ``m == U(theta) diag(g_x, g_p) U(phi)`` holds exactly when m is real with
    det m >= 0; a real matrix with negative determinant needs a reflection the
    rotation form cannot express.  Degenerate singular values give theta = 0.
    Works elementwise on array-valued matrices.
    """
    xx, xp, px, pp = (np.asarray(v, dtype=complex) for v in (m.xx, m.xp, m.px, m.pp))
    h11 = np.abs(xx) ** 2 + np.abs(xp) ** 2
    h22 = np.abs(px) ** 2 + np.abs(pp) ** 2
    h12 = xx * np.conj(px) + xp * np.conj(pp)
    half = 0.5 * (h11 + h22)
    rad = np.sqrt((0.5 * (h11 - h22)) ** 2 + np.abs(h12) ** 2)
    g_x = np.sqrt(half + rad)
    absdet = np.abs(xx * pp - xp * px)
    with np.errstate(invalid="ignore", divide="ignore"):
        g_p = np.where(g_x > 0, absdet / np.where(g_x > 0, g_x, 1.0), 0.0)
    g_p = np.minimum(g_p, g_x)
    degenerate = rad <= 1e-14 * np.maximum(half, 1e-300)
    theta = np.where(degenerate, 0.0, 0.5 * np.arctan2(2.0 * h12.real, (h11 - h22)))
    c, s = np.cos(theta), np.sin(theta)
    # first row of U(-theta) m = g_x [cos phi, -sin phi]
    n11 = (c * xx + s * px).real
    n12 = (c * xp + s * pp).real
    phi = np.arctan2(-n12, n11)
    if np.ndim(theta) == 0:
        return float(theta), float(g_x), float(g_p), float(phi)
    return theta, g_x, g_p, phi


@dataclass(frozen=True)
class ComplexTrace:
    """Samples of a complex function on a strictly increasing frequency grid."""

    omega: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        w = np.asarray(self.omega, dtype=float)
        v = np.asarray(self.values, dtype=complex)
        if w.shape != v.shape or w.ndim != 1:
            raise ValueError("omega and values must be 1-D arrays of equal length")
        if w.size > 1 and not np.all(np.diff(w) > 0):
            raise ValueError("omega must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ValueError("trace values must be finite")
        object.__setattr__(self, "omega", w)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.omega.size


def closure_angle(first: complex, last: complex, mode: str = "chord") -> float:
    """Angle swept when the open trace is closed from ``last`` back to ``first``.

    ``chord`` takes the short way round (a straight segment that does not
    pass over the point).  ``principal`` closes through the slit plane,
    Arg(first) - Arg(last); use it when both ends are known to stay off the
    negative real axis, as in a passive tail.
    """
    if mode == "chord":
        return float(np.angle(first * np.conj(last)))
    if mode == "principal":
        return float(np.angle(first) - np.angle(last))
    if mode == "none":
        return 0.0
    raise ValueError(f"unknown closure mode {mode!r}")


def winding_number(
    trace: ComplexTrace,
    point: complex = 0j,
    *,
    closure: str = "chord",
    max_angle: float = math.pi / 2,
    tol: float = 1e-12,
) -> int:
    """Signed count of counter-clockwise turns of ``trace`` around ``point``.

    The trace is treated as closed (see :func:`closure_angle`).  Consecutive
    samples must subtend less than ``max_angle`` at the point, otherwise
    :class:`RefinementRequired` is raised so the caller can densify.
    """
    v = trace.values
    if v.size == 0:
        return 0
    total, amax, dmin = kernels.winding_stats(v, point)
    if dmin <= tol:
        raise PointOnCurve(f"trace passes within {dmin:.3g} of {point}")
    if amax >= max_angle:
        raise RefinementRequired(f"segment subtends {amax:.3f} rad >= {max_angle:.3f}")
    total += closure_angle(v[0] - point, v[-1] - point, closure)
    return int(round(total / (2 * math.pi)))
