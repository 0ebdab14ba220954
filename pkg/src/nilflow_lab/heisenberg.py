"""Reduced Heisenberg group H^g, its standard lattice and deformed frames.

Coordinates are (x, y, z) in R^g x R^g x R with the polarized law

    (x, y, z) . (x', y', z') = (x + x', y + y', z + z' + x . y')

so that the group commutator of exp(s X_i) and exp(t Y_i) is exp(st Z),
matching [X_i, Y_j] = delta_ij Z. The standard lattice is
Z^g x Z^g x (1/2)Z and the nilmanifold is M = H^g / Gamma (right cosets).
"""

from dataclasses import dataclass

import numpy as np

from . import _numerics
from .errors import InvalidArgumentError

CENTRAL_PERIOD = 0.5


def _vec(v, name="vector"):
    a = np.array(v, dtype=float, ndmin=1)
    if a.ndim != 1:
        raise InvalidArgumentError(f"{name} must be one-dimensional, got shape {a.shape}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GroupElement:
    """A point (x, y, z) of the reduced Heisenberg group."""

    x: np.ndarray
    y: np.ndarray
    z: float

    def __post_init__(self):
        x = _vec(self.x, "x")
        y = _vec(self.y, "y")
        if x.shape != y.shape or x.size < 1:
            raise InvalidArgumentError(
                f"x and y must have equal length g >= 1, got {x.size} and {y.size}"
            )
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", float(self.z))

    @property
    def g(self):
        return self.x.size

    @classmethod
    def identity(cls, g):
        return cls(np.zeros(g), np.zeros(g), 0.0)

    def __mul__(self, other):
        return multiply(self, other)

    def as_array(self):
        return np.concatenate([self.x, self.y, [self.z]])

    def allclose(self, other, atol=1e-12):
        return bool(np.allclose(self.as_array(), other.as_array(), rtol=0.0, atol=atol))

    def __repr__(self):
        return f"GroupElement(x={self.x.tolist()}, y={self.y.tolist()}, z={self.z!r})"


@dataclass(frozen=True, eq=False)
class LieAlgebraVector:
    """a . X + b . Y + c Z in the standard basis."""

    a: np.ndarray
    b: np.ndarray
    c: float = 0.0

    def __post_init__(self):
        a = _vec(self.a, "a")
        b = _vec(self.b, "b")
        if a.shape != b.shape or a.size < 1:
            raise InvalidArgumentError("coefficient vectors a and b must have equal length g >= 1")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", float(self.c))

    @property
    def g(self):
        return self.a.size

    @classmethod
    def basis_x(cls, g, i):
        a = np.zeros(g)
        a[i] = 1.0
        return cls(a, np.zeros(g), 0.0)

    @classmethod
    def basis_y(cls, g, i):
        b = np.zeros(g)
        b[i] = 1.0
        return cls(np.zeros(g), b, 0.0)

    @classmethod
    def central(cls, g, c=1.0):
        return cls(np.zeros(g), np.zeros(g), c)

    def __add__(self, other):
        _check_same_g(self, other)
        return LieAlgebraVector(self.a + other.a, self.b + other.b, self.c + other.c)

    def __sub__(self, other):
        return self + (-1.0) * other

    def __rmul__(self, s):
        return LieAlgebraVector(s * self.a, s * self.b, s * self.c)

    def __mul__(self, s):
        return self.__rmul__(s)

    def as_array(self):
        return np.concatenate([self.a, self.b, [self.c]])


def _check_same_g(u, v):
    if u.g != v.g:
        raise InvalidArgumentError(f"dimension mismatch: g={u.g} vs g={v.g}")


def bracket(u, v):
    """Lie bracket; always central: (a_u . b_v - a_v . b_u) Z."""
    _check_same_g(u, v)
    return LieAlgebraVector.central(u.g, float(u.a @ v.b - v.a @ u.b))


# Array kernels. x, y have shape (..., g) and z shape (...); used by the
# dynamics module to push many points at once.

def multiply_arrays(x1, y1, z1, x2, y2, z2):
    return x1 + x2, y1 + y2, z1 + z2 + np.sum(x1 * y2, axis=-1)


def exp_arrays(a, b, c):
    return a, b, c + 0.5 * np.sum(a * b, axis=-1)


def reduce_arrays(x, y, z):
    """Right-multiply by the lattice element bringing (x, y) into [0,1)^2g."""
    n = np.floor(x)
    m = np.floor(y)
    # (x, y, z) . (-n, -m, 0) = (x - n, y - m, z - x . m)
    zr = z - np.sum(x * m, axis=-1)
    xr = _numerics.mod(x - n, 1.0)
    yr = _numerics.mod(y - m, 1.0)
    return xr, yr, _numerics.mod(zr, CENTRAL_PERIOD)


def multiply(a, b):
    """Group product under the x . y' polarization."""
    _check_same_g(a, b)
    x, y, z = multiply_arrays(a.x, a.y, a.z, b.x, b.y, b.z)
    return GroupElement(x, y, z)


def inverse(a):
    # (x, y, z)^{-1} = (-x, -y, -z + x . y)
    return GroupElement(-a.x, -a.y, -a.z + float(a.x @ a.y))


def commutator(a, b):
    return multiply(multiply(multiply(a, b), inverse(a)), inverse(b))


def exp_map(v):
    """exp(a.X + b.Y + cZ) = (a, b, c + a.b/2); exact for a step-2 group."""
    x, y, z = exp_arrays(v.a, v.b, v.c)
    return GroupElement(x.copy(), y.copy(), float(z))


def log_map(p):
    return LieAlgebraVector(p.x.copy(), p.y.copy(), p.z - 0.5 * float(p.x @ p.y))


def bch_check(u, v):
    """Max-norm distance between exp(u) exp(v) and exp(u + v + [u, v]/2)."""
    lhs = multiply(exp_map(u), exp_map(v))
    rhs = exp_map(u + v + 0.5 * bracket(u, v))
    return float(np.max(np.abs(lhs.as_array() - rhs.as_array())))


def lattice_reduce(a):
    """Representative of the right coset a.Gamma in [0,1)^g x [0,1)^g x [0,1/2)."""
    x, y, z = reduce_arrays(a.x, a.y, np.asarray(a.z))
    return GroupElement(x, y, float(z))


def in_lattice(p, atol=1e-10):
    """True if p lies in Z^g x Z^g x (1/2)Z up to ``atol``."""
    xy = np.concatenate([p.x, p.y])
    if np.max(np.abs(xy - np.round(xy)), initial=0.0) > atol:
        return False
    return abs(2.0 * p.z - round(2.0 * p.z)) <= 2.0 * atol


def standard_symplectic_form(g):
    eye = np.eye(g)
    zero = np.zeros((g, g))
    return np.block([[zero, eye], [-eye, zero]])


@dataclass(frozen=True, eq=False)
class Frame:
    """Deformed frame (X_i^alpha, Y_i^alpha, Z).

    ``x_block[:, i]`` holds the (x, y) coefficients of X_i^alpha in the
    standard basis and ``y_block[:, i]`` those of Y_i^alpha; both have
    shape (2g, g). The optional central coefficients let callers build
    frames X_i + w_i Z that differ from a pure symplectic frame by an
    inner automorphism.
    """

    x_block: np.ndarray
    y_block: np.ndarray
    x_central: np.ndarray = None
    y_central: np.ndarray = None

    def __post_init__(self):
        xb = np.array(self.x_block, dtype=float)
        yb = np.array(self.y_block, dtype=float)
        if xb.ndim != 2 or xb.shape[0] != 2 * xb.shape[1] or yb.shape != xb.shape:
            raise InvalidArgumentError("frame blocks must both have shape (2g, g)")
        g = xb.shape[1]
        xc = np.zeros(g) if self.x_central is None else _vec(self.x_central, "x_central")
        yc = np.zeros(g) if self.y_central is None else _vec(self.y_central, "y_central")
        if xc.size != g or yc.size != g:
            raise InvalidArgumentError("central coefficient vectors must have length g")
        for arr in (xb, yb):
            arr.setflags(write=False)
        object.__setattr__(self, "x_block", xb)
        object.__setattr__(self, "y_block", yb)
        object.__setattr__(self, "x_central", np.array(xc))
        object.__setattr__(self, "y_central", np.array(yc))

    @property
    def g(self):
        return self.x_block.shape[1]

    @classmethod
    def standard(cls, g):
        eye = np.eye(2 * g)
        return cls(eye[:, :g], eye[:, g:])

    @classmethod
    def from_vectors(cls, x_vectors, y_vectors):
        xs = list(x_vectors)
        ys = list(y_vectors)
        xb = np.column_stack([np.concatenate([v.a, v.b]) for v in xs])
        yb = np.column_stack([np.concatenate([v.a, v.b]) for v in ys])
        return cls(xb, yb, [v.c for v in xs], [v.c for v in ys])

    @property
    def matrix(self):
        """2g x 2g matrix whose columns are X_1..X_g, Y_1..Y_g."""
        return np.hstack([self.x_block, self.y_block])

    @property
    def x_vectors(self):
        g = self.g
        return [
            LieAlgebraVector(self.x_block[:g, i], self.x_block[g:, i], self.x_central[i])
            for i in range(g)
        ]

    @property
    def y_vectors(self):
        g = self.g
        return [
            LieAlgebraVector(self.y_block[:g, i], self.y_block[g:, i], self.y_central[i])
            for i in range(g)
        ]

    @property
    def z_vector(self):
        return LieAlgebraVector.central(self.g)

    @property
    def x_part(self):
        """g x g matrix; column i is the X-coefficient vector of X_i^alpha."""
        return self.x_block[: self.g]

    @property
    def y_part(self):
        return self.x_block[self.g:]

    def is_symplectic(self, tol=1e-10):
        m = self.matrix
        j = standard_symplectic_form(self.g)
        return bool(np.max(np.abs(m.T @ j @ m - j)) <= tol)

    def then(self, other):
        """Frame obtained by expressing ``other``'s frame in this frame's basis.

        frame_transform(alpha @ beta) == frame_transform(alpha).then(frame_transform(beta))
        """
        m = other.matrix @ self.matrix
        g = self.g
        return Frame(m[:, :g], m[:, g:])


def frame_transform(alpha):
    """Frame (X_i^alpha, Y_i^alpha, Z) = alpha^{-1}(X_i, Y_i, Z)."""
    from .symplectic import as_symplectic

    alpha = as_symplectic(alpha)
    inv = alpha.inverse().matrix
    g = alpha.g
    return Frame(inv[:, :g], inv[:, g:])


def as_frame(obj):
    """Accept a Frame or anything convertible to a SymplecticMatrix."""
    if isinstance(obj, Frame):
        return obj
    return frame_transform(obj)


def generator_sum(frame, coeffs):
    """Algebra vector sum_i coeffs[i] X_i^alpha for the first len(coeffs) generators."""
    coeffs = _vec(coeffs, "flow time")
    if coeffs.size > frame.g:
        raise InvalidArgumentError(f"at most g={frame.g} flow times allowed, got {coeffs.size}")
    g = frame.g
    ab = frame.x_block[:, : coeffs.size] @ coeffs
    c = float(frame.x_central[: coeffs.size] @ coeffs)
    return LieAlgebraVector(ab[:g], ab[g:], c)
