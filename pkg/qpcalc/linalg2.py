"""Exact 2x2 linear algebra at software precision.

Everything here works on :class:`Mat2`, a frozen 2x2 matrix of mpmath complex entries, and uses closed forms only:
the SL(2,R) <-> SU(1,1) Cayley maps, the elliptic normal form of an su(1,1) element, a quantitative Schur
triangularization of its exponential, and matrix exp/log via the Cayley-Hamilton identity e^A = e^{tr/2}(cosh chi I +
sinh(chi)/chi A_0). Operations round at the ambient mpmath precision; wrap calls in ``mp.workprec(bits)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Union

import numpy as np
from mpmath import mp, mpc, mpf

if TYPE_CHECKING:
    from collections.abc import Sequence

KINDS = ("sl2R", "su11", "general")

Scalar = Union[int, float, complex, mpf, mpc]

# Largest ||X|| + ||Y|| for which the product log is guaranteed to exist and stay small.
BCH_RADIUS = math.log(2) / 2


def _c(x: Scalar) -> mpc:
    return mpc(x)


@dataclass(frozen=True)
class Mat2:
    """A 2x2 complex matrix [[a, b], [c, d]] with a class tag.

    Args:
        a, b, c, d: Entries.
        kind: One of KINDS. Tags are informational; they are kept through products of like kinds.
    """

    a: mpc
    b: mpc
    c: mpc
    d: mpc
    kind: str = "general"

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"Unrecognized kind={self.kind!r}, must be one of {KINDS}")
        for name in "abcd":
            object.__setattr__(self, name, _c(getattr(self, name)))

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[Scalar]], kind: str = "general") -> Mat2:
        """Build from [[a, b], [c, d]]."""
        (a, b), (c, d) = rows
        return cls(a, b, c, d, kind)

    @classmethod
    def identity(cls, kind: str = "general") -> Mat2:
        return cls(1, 0, 0, 1, kind)

    @classmethod
    def zeros(cls) -> Mat2:
        return cls(0, 0, 0, 0)

    @classmethod
    def diag(cls, x: Scalar, y: Scalar, kind: str = "general") -> Mat2:
        return cls(x, 0, 0, y, kind)

    @classmethod
    def from_numpy(cls, arr: np.ndarray, kind: str = "general") -> Mat2:
        """Build from a (2, 2) array."""
        arr = np.asarray(arr)
        return cls(complex(arr[0, 0]), complex(arr[0, 1]), complex(arr[1, 0]), complex(arr[1, 1]), kind)

    def _kind_with(self, other: Mat2) -> str:
        return self.kind if self.kind == other.kind else "general"

    def __matmul__(self, other: Mat2) -> Mat2:
        return Mat2(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
            self._kind_with(other),
        )

    def __add__(self, other: Mat2) -> Mat2:
        return Mat2(self.a + other.a, self.b + other.b, self.c + other.c, self.d + other.d)

    def __sub__(self, other: Mat2) -> Mat2:
        return Mat2(self.a - other.a, self.b - other.b, self.c - other.c, self.d - other.d)

    def __neg__(self) -> Mat2:
        return Mat2(-self.a, -self.b, -self.c, -self.d, self.kind)

    def __mul__(self, s: Scalar) -> Mat2:
        return Mat2(self.a * s, self.b * s, self.c * s, self.d * s)

    __rmul__ = __mul__

    @property
    def entries(self) -> tuple[mpc, mpc, mpc, mpc]:
        return self.a, self.b, self.c, self.d

    def det(self) -> mpc:
        return self.a * self.d - self.b * self.c

    def trace(self) -> mpc:
        return self.a + self.d

    def inverse(self) -> Mat2:
        """Closed-form inverse via the adjugate."""
        det = self.det()
        if det == 0:
            raise ValueError("Singular matrix has no inverse")
        return Mat2(self.d / det, -self.b / det, -self.c / det, self.a / det, self.kind)

    def dagger(self) -> Mat2:
        """Conjugate transpose."""
        return Mat2(mp.conj(self.a), mp.conj(self.c), mp.conj(self.b), mp.conj(self.d))

    def frobenius2(self) -> mpf:
        return sum(abs(x) ** 2 for x in self.entries)

    def spectral_norm(self) -> mpf:
        """Spectral norm from sigma_max^2 = (F + sqrt(F^2 - 4 |det|^2)) / 2 with F the squared Frobenius norm."""
        f = self.frobenius2()
        disc = f * f - 4 * abs(self.det()) ** 2
        return mp.sqrt((f + mp.sqrt(max(disc, 0))) / 2)

    def max_abs(self) -> mpf:
        return max(abs(x) for x in self.entries)

    def is_su11(self, tol: float = 1e-12) -> bool:
        """Check A* J A = J for J = diag(1, -1)."""
        j = Mat2.diag(1, -1)
        return (self.dagger() @ j @ self - j).max_abs() <= tol

    def is_real(self, tol: float = 1e-12) -> bool:
        return max(abs(mp.im(x)) for x in self.entries) <= tol

    def to_numpy(self) -> np.ndarray:
        """complex128 copy."""
        return np.array([[complex(self.a), complex(self.b)], [complex(self.c), complex(self.d)]])

    def as_dict(self) -> dict[str, Any]:
        """Debug dump with entries as [re, im] string pairs at full precision."""
        return {
            "kind": self.kind,
            "entries": [[[mp.nstr(mp.re(x), mp.dps), mp.nstr(mp.im(x), mp.dps)] for x in row] for row in self.rows()],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict())

    def rows(self) -> tuple[tuple[mpc, mpc], tuple[mpc, mpc]]:
        return (self.a, self.b), (self.c, self.d)


def bracket(x: Mat2, y: Mat2) -> Mat2:
    """Commutator [X, Y] = XY - YX."""
    return x @ y - y @ x


def su11_algebra(t: Scalar, z: Scalar) -> Mat2:
    """The su(1,1) element [[i t, z], [conj z, -i t]]."""
    z = _c(z)
    return Mat2(1j * _c(t), z, mp.conj(z), -1j * _c(t), "general")


def cayley(b: Mat2, tol: float = 1e-12) -> Mat2:
    """Map a traceless real matrix [[x, y+z], [y-z, -x]] to [[i z, x - i y], [x + i y, -i z]].

    This is the Lie algebra isomorphism sl(2,R) -> su(1,1) induced by conjugation with
    M = (1/sqrt(2i)) [[1, -i], [1, i]].

    Args:
        b: Traceless real 2x2 matrix.
        tol: Tolerance on |trace| and imaginary parts, relative to the largest entry.

    Returns:
        su(1,1) element.
    """
    scale = max(b.max_abs(), 1)
    if abs(b.trace()) > tol * scale:
        raise ValueError(f"cayley expects a traceless matrix, got trace={mp.nstr(b.trace(), 8)}")
    if not b.is_real(tol * scale):
        raise ValueError("cayley expects a real matrix")
    x = mp.re(b.a)
    y = (mp.re(b.b) + mp.re(b.c)) / 2
    z = (mp.re(b.b) - mp.re(b.c)) / 2
    return Mat2(1j * z, x - 1j * y, x + 1j * y, -1j * z, "general")


# C maps counterclockwise rotations R(phi) to diag(e^{i phi}, e^{-i phi}).
_C_ROWS = ((1, 1j), (1, -1j))
_C_INV_ROWS = ((0.5, 0.5), (-0.5j, 0.5j))


def to_su11(a: Mat2) -> Mat2:
    """Group isomorphism SL(2,R) -> SU(1,1), A -> C A C^{-1} with C = [[1, i], [1, -i]]."""
    c, c_inv = Mat2.from_rows(_C_ROWS), Mat2.from_rows(_C_INV_ROWS)
    res = c @ a @ c_inv
    return Mat2(*res.entries, kind="su11")


def to_sl2r(w: Mat2) -> Mat2:
    """Inverse of :func:`to_su11`."""
    c, c_inv = Mat2.from_rows(_C_ROWS), Mat2.from_rows(_C_INV_ROWS)
    res = c_inv @ w @ c
    return Mat2(*res.entries, kind="sl2R")


def to_sl2r_array(w: np.ndarray) -> np.ndarray:
    """Vectorized :func:`to_sl2r` on (..., 2, 2) complex arrays; returns the real part."""
    c = np.array(_C_ROWS, dtype=complex)
    c_inv = np.array(_C_INV_ROWS, dtype=complex)
    return np.real(c_inv @ w @ c)


def exp2(a: Mat2) -> Mat2:
    """Closed-form matrix exponential e^A = e^{tr/2} (cosh chi I + sinh(chi)/chi A_0), chi^2 = -det A_0."""
    tau = a.trace() / 2
    a0 = a - Mat2.identity() * tau
    chi = mp.sqrt(-a0.det())
    sinhc = mp.mpf(1) if chi == 0 else mp.sinh(chi) / chi
    scale = mp.exp(tau)
    return (Mat2.identity() * mp.cosh(chi) + a0 * sinhc) * scale


def log2(w: Mat2) -> Mat2:
    """Principal matrix logarithm with eigen-rotation in (-pi, pi].

    For det W = 1 and W_0 = W - (tr W / 2) I, sinh^2 chi = -det W_0. Near the identity log W = asinh(s)/s W_0 with
    s^2 = -det W_0, which keeps full relative accuracy for small logarithms; otherwise chi = acosh(tr W / 2) and
    log W = chi / sinh(chi) W_0.

    Raises:
        ValueError: when an eigenvalue sits on the branch cut (W = -I + nilpotent).
    """
    det = w.det()
    if det == 0:
        raise ValueError("log of a singular matrix")
    root = mp.sqrt(det)
    w1 = w * (1 / root)
    half_tr = w1.trace() / 2
    w0 = w1 - Mat2.identity() * half_tr
    if mp.re(half_tr) >= 0:
        s = mp.sqrt(-w0.det())
        factor = mp.mpf(1) if s == 0 else mp.asinh(s) / s
    else:
        chi = mp.acosh(half_tr)
        sinh = mp.sinh(chi)
        if abs(sinh) <= mp.mpf(2) ** (8 - mp.prec):
            raise ValueError("log undefined: eigenvalue -1 lies on the branch cut")
        factor = chi / sinh
    res = w0 * factor
    if det != 1:
        res = res + Mat2.identity() * (mp.log(det) / 2)
    return res


@dataclass(frozen=True)
class NormalFormResult:
    """Conjugator D in SU(1,1) with D^{-1} A D = diag(i rho, -i rho) for A = [[i t, z], [conj z, -i t]].

    ``phi`` is the angle with tan 2 phi = -|z| / rho and ``two_phi_phase`` the phase 2 varphi = arg z - pi/2.
    """

    D: Mat2
    rho: mpf
    phi: mpf
    two_phi_phase: mpf

    @property
    def norm2(self) -> mpf:
        """||D||^2, equal to (t + |z|) / rho."""
        return self.D.spectral_norm() ** 2


def elliptic_normal_form(t: Scalar, z: Scalar, *, rho: Scalar | None = None) -> NormalFormResult:
    """Diagonalize an elliptic su(1,1) element inside SU(1,1).

    D = (cos 2 phi)^{-1/2} [[cos phi, e^{i 2 varphi} sin phi], [e^{-i 2 varphi} sin phi, cos phi]].

    Args:
        t: Real diagonal coefficient, t > |z|.
        z: Off-diagonal entry.
        rho: Optional exact eigen-rotation sqrt(t^2 - |z|^2). Pass it when t and |z| nearly cancel.

    Raises:
        ValueError: for parabolic or hyperbolic input (t <= |z|).

    Returns:
        NormalFormResult
    """
    t = mp.re(_c(t))
    z = _c(z)
    r = abs(z)
    if t <= r:
        raise ValueError(f"elliptic_normal_form needs t > |z|, got t={mp.nstr(t, 8)}, |z|={mp.nstr(r, 8)}")
    rho = mp.sqrt(t * t - r * r) if rho is None else mp.re(_c(rho))
    if r == 0:
        return NormalFormResult(Mat2.identity("su11"), rho, mp.mpf(0), mp.mpf(0))
    phi = mp.atan2(-r, rho) / 2
    two_varphi = mp.arg(z) - mp.pi / 2
    scale = 1 / mp.sqrt(mp.cos(2 * phi))
    e = mp.expj(two_varphi)
    c, s = mp.cos(phi) * scale, mp.sin(phi) * scale
    d = Mat2(c, e * s, mp.conj(e) * s, c, "su11")
    return NormalFormResult(d, rho, phi, two_varphi)


def schur_upper(t: Scalar, z: Scalar) -> tuple[Mat2, mpf, mpc]:
    """Unitary triangularization of exp([[i t, z], [conj z, -i t]]).

    The first column of U is the unit eigenvector (cos phi, e^{-i 2 varphi} sin phi) of the generator and the
    second column completes it to SU(2), so U^{-1} exp(A) U = [[e^{i rho}, nu], [0, e^{-i rho}]] with
    |nu| = 2 |z| sin(rho) / rho, hence |z| <= |nu| <= 2 |z| for rho in (0, pi/2].

    Raises:
        ValueError: when rho = sqrt(t^2 - |z|^2) is outside (0, pi/2].

    Returns:
        (U, rho, nu)
    """
    t = mp.re(_c(t))
    z = _c(z)
    r = abs(z)
    if t < r:
        raise ValueError("schur_upper needs t >= |z|")
    rho = mp.sqrt(t * t - r * r)
    if not 0 < rho <= mp.pi / 2:
        raise ValueError(f"rho={mp.nstr(rho, 8)} outside (0, pi/2]")
    if r == 0:
        return Mat2.identity(), rho, mpc(0)
    nf = elliptic_normal_form(t, z, rho=rho)
    u1 = (mp.cos(nf.phi), mp.expj(-nf.two_phi_phase) * mp.sin(nf.phi))
    u = Mat2(u1[0], -mp.conj(u1[1]), u1[1], mp.conj(u1[0]))
    tri = u.dagger() @ exp2(su11_algebra(t, z)) @ u
    return u, rho, tri.b


def bch_log(x: Mat2, y: Mat2) -> Mat2:
    """Z with e^X e^Y = e^Z, by taking the logarithm of the product (no truncated series).

    Extra working bits, about -log2(||X|| + ||Y||), keep the result relatively accurate when both are tiny.

    Raises:
        ValueError: if ||X|| + ||Y|| >= (log 2) / 2.

    Returns:
        Z with ||Z|| <= 2 (||X|| + ||Y||).
    """
    size = x.spectral_norm() + y.spectral_norm()
    if size >= BCH_RADIUS:
        raise ValueError(f"||X|| + ||Y|| = {mp.nstr(size, 8)} must be below (log 2)/2")
    if size == 0:
        return Mat2.zeros()
    extra = max(0, int(mp.ceil(-mp.log(size, 2)))) + 16
    with mp.extraprec(extra):
        z = log2(exp2(x) @ exp2(y))
    return Mat2(*(+v for v in z.entries))
