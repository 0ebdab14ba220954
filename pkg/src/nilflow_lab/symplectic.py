"""Symplectic matrices, Siegel upper half space, heights and renormalization.

A frame matrix alpha in Sp(2g, R) is attached to the Siegel point
alpha^T . (i I_g); this is the identification of the double coset
K_g \\ Sp(2g, R) / Sp(2g, Z) with Sp(2g, Z) \\ H_g under which
Hgt of alpha is the inverse squared covolume-normalised shortest vector
of the lattice alpha Z^2g. Heights along r_{-t} alpha then stay bounded
exactly when the frame is of bounded type.
"""

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import InvalidArgumentError, NilflowError, NumericSingularityError
from .heisenberg import standard_symplectic_form

SYMPLECTIC_TOL = 1e-10
GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


def is_symplectic(m, tol=SYMPLECTIC_TOL):
    """True iff M^T J M = J to ``tol`` (max-abs entry).

    The tolerance is relative to max(1, |M|^2) so that strongly
    renormalized matrices with entries near e^{20} still qualify.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidArgumentError(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] % 2:
        raise InvalidArgumentError(f"symplectic matrices have even dimension, got {m.shape[0]}")
    j = standard_symplectic_form(m.shape[0] // 2)
    scale = max(1.0, float(np.max(np.abs(m))) ** 2)
    return bool(np.max(np.abs(m.T @ j @ m - j)) <= tol * scale)


@dataclass(frozen=True, eq=False)
class SymplecticMatrix:
    """A 2g x 2g real symplectic matrix with blocks (A B; C D)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if not is_symplectic(m):
            raise InvalidArgumentError("matrix is not symplectic to tolerance 1e-10")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def g(self):
        return self.matrix.shape[0] // 2

    @property
    def A(self):
        return self.matrix[: self.g, : self.g]

    @property
    def B(self):
        return self.matrix[: self.g, self.g:]

    @property
    def C(self):
        return self.matrix[self.g:, : self.g]

    @property
    def D(self):
        return self.matrix[self.g:, self.g:]

    @classmethod
    def identity(cls, g):
        return cls(np.eye(2 * g))

    @classmethod
    def from_blocks(cls, A, B, C, D):
        return cls(np.block([[A, B], [C, D]]))

    def inverse(self):
        # M^{-1} = -J M^T J for symplectic M
        j = standard_symplectic_form(self.g)
        return SymplecticMatrix(-j @ self.matrix.T @ j)

    def transpose(self):
        return SymplecticMatrix(self.matrix.T)

    def __matmul__(self, other):
        return SymplecticMatrix(self.matrix @ as_symplectic(other).matrix)

    def __repr__(self):
        return f"SymplecticMatrix(g={self.g}, matrix={self.matrix.tolist()})"


def as_symplectic(obj):
    if isinstance(obj, SymplecticMatrix):
        return obj
    return SymplecticMatrix(obj)


@dataclass(frozen=True, eq=False)
class SiegelPoint:
    """Z = X + iY with X, Y symmetric and Y positive definite."""

    Z: np.ndarray

    def __post_init__(self):
        z = np.array(self.Z, dtype=complex, ndmin=2)
        if z.ndim != 2 or z.shape[0] != z.shape[1]:
            raise InvalidArgumentError(f"Siegel point must be a square matrix, got {z.shape}")
        if np.max(np.abs(z - z.T)) > 1e-12 * max(1.0, np.max(np.abs(z))):
            raise InvalidArgumentError("Siegel point must be symmetric")
        y = z.imag
        if np.linalg.eigvalsh(0.5 * (y + y.T))[0] <= 0.0:
            raise InvalidArgumentError("imaginary part must be positive definite")
        z.setflags(write=False)
        object.__setattr__(self, "Z", z)

    @property
    def g(self):
        return self.Z.shape[0]

    @property
    def real_part(self):
        return self.Z.real

    @property
    def imag_part(self):
        return self.Z.imag

    @classmethod
    def base(cls, g):
        return cls(1j * np.eye(g))


def _as_siegel(z):
    if isinstance(z, SiegelPoint):
        return z
    return SiegelPoint(z)


def _moebius_batch(m, z):
    """(AZ + B)(CZ + D)^{-1} for a stack z of shape (n, g, g)."""
    g = z.shape[-1]
    a, b, c, d = m[:g, :g], m[:g, g:], m[g:, :g], m[g:, g:]
    num = a @ z + b
    den = c @ z + d
    # Z' = num den^{-1}  <=>  den^T Z'^T = num^T
    out = np.linalg.solve(np.swapaxes(den, -1, -2), np.swapaxes(num, -1, -2))
    out = np.swapaxes(out, -1, -2)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def moebius_action(m, z):
    """Apply M = (A B; C D) to Z: (AZ + B)(CZ + D)^{-1}."""
    m = as_symplectic(m)
    z = _as_siegel(z)
    if m.g != z.g:
        raise InvalidArgumentError(f"dimension mismatch: M has g={m.g}, Z has g={z.g}")
    den = m.C @ z.Z + m.D
    # smallest singular value measured against the size of the terms that produced it
    scale = np.linalg.norm(m.C, 2) * np.linalg.norm(z.Z, 2) + np.linalg.norm(m.D, 2)
    if np.linalg.svd(den, compute_uv=False)[-1] <= 1e-14 * max(scale, 1e-300):
        raise NumericSingularityError("CZ + D is numerically singular")
    out = (m.A @ z.Z + m.B) @ np.linalg.inv(den)
    skew = np.max(np.abs(out - out.T))
    if skew > 1e-8 * max(1.0, np.max(np.abs(out))):
        raise NumericSingularityError(f"Moebius image lost symmetry (residue {skew:.3g})")
    return SiegelPoint(0.5 * (out + out.T))


def siegel_point(alpha):
    """Point of H_g attached to the frame matrix alpha: alpha^T . (i I)."""
    alpha = as_symplectic(alpha)
    return moebius_action(alpha.transpose(), SiegelPoint.base(alpha.g))


def height(z):
    """hgt(Z) = det Im Z."""
    z = _as_siegel(z)
    return float(np.linalg.det(z.imag_part))


def reduce_upper_half_plane(z, max_steps=10_000):
    """SL(2, Z) reduction of a point of the upper half plane.

    Returns the reduced point and the number of inversions used.
    """
    z = complex(z)
    if z.imag <= 0.0:
        raise InvalidArgumentError("point must lie in the upper half plane")
    inversions = 0
    for _ in range(max_steps):
        z = complex(z.real - round(z.real), z.imag)
        if abs(z) >= 1.0 - 1e-15:
            return z, inversions
        z = -1.0 / z
        inversions += 1
    raise NilflowError("SL(2,Z) reduction did not converge")


def _lll_gram(gram, delta=0.75):
    """Unimodular U with U G U^T LLL-reduced (rows of U are the new basis)."""
    n = gram.shape[0]
    u = np.eye(n)
    g = gram.copy()

    def gso():
        mu = np.zeros((n, n))
        bstar = np.zeros(n)
        for i in range(n):
            for j in range(i):
                mu[i, j] = (g[i, j] - sum(mu[j, k] * mu[i, k] * bstar[k] for k in range(j))) / bstar[j]
            bstar[i] = g[i, i] - sum(mu[i, k] ** 2 * bstar[k] for k in range(i))
        return mu, bstar

    k = 1
    for _ in range(1000):
        if k >= n:
            break
        mu, bstar = gso()
        for j in range(k - 1, -1, -1):
            q = round(mu[k, j])
            if q:
                e = np.eye(n)
                e[k, j] = -q
                u = e @ u
                g = e @ g @ e.T
                mu, bstar = gso()
        if bstar[k] >= (delta - mu[k, k - 1] ** 2) * bstar[k - 1]:
            k += 1
        else:
            p = np.eye(n)
            p[[k, k - 1]] = p[[k - 1, k]]
            u = p @ u
            g = p @ g @ p.T
            k = max(k - 1, 1)
    return u


@functools.lru_cache(maxsize=None)
def _static_generators(g):
    """Fixed Sp(2g, Z) letters: translations, inversions, GL(g, Z) moves."""
    eye = np.eye(g)
    zero = np.zeros((g, g))
    gens = []
    for i in range(g):
        for j in range(i, g):
            s = np.zeros((g, g))
            s[i, j] = s[j, i] = 1.0
            for sign in (1.0, -1.0):
                gens.append(np.block([[eye, sign * s], [zero, eye]]))
    gens.append(np.block([[zero, -eye], [eye, zero]]))
    if g > 1:
        for k in range(g):
            a = eye.copy()
            a[k, k] = 0.0
            b = np.zeros((g, g))
            b[k, k] = -1.0
            gens.append(np.block([[a, b], [-b, a]]))
        for i in range(g):
            for j in range(g):
                if i == j:
                    continue
                for sign in (1.0, -1.0):
                    u = eye.copy()
                    u[i, j] = sign
                    gens.append(np.block([[u, zero], [zero, np.linalg.inv(u).T]]))
    return tuple(gens)


def _dedupe(states):
    key = np.round(np.concatenate([states.real.reshape(len(states), -1),
                                   states.imag.reshape(len(states), -1)], axis=1), 9)
    _, idx = np.unique(key, axis=0, return_index=True)
    return states[np.sort(idx)]


def word_search_max_height(z, depth=8, beam=64):
    """Largest height found over Sp(2g, Z) words of length <= ``depth``.

    Letters are the fixed generators above plus two state-dependent
    words: rounding the real part to the nearest integral symmetric
    matrix, and LLL-reducing the imaginary part by a GL(g, Z) move.
    Each level keeps the ``beam`` best distinct states, ranked by height
    and then by the size of the real part. The result is a certified
    lower bound for Hgt.
    """
    z = _as_siegel(z)
    g = z.g
    gens = _static_generators(g)
    frontier = z.Z[None].copy()
    best = height(z)
    for _ in range(depth):
        children = [_moebius_batch(m, frontier) for m in gens]
        children.append(frontier - np.round(frontier.real))
        if g > 1:
            reduced = []
            for s in frontier:
                u = _lll_gram(s.imag)
                reduced.append(u @ s @ u.T)
            children.append(np.array(reduced))
        states = np.concatenate(children)
        hts = np.linalg.det(states.imag).real
        ok = np.isfinite(hts) & (hts > 0)
        states, hts = states[ok], hts[ok]
        if states.size == 0:
            break
        best = max(best, float(hts.max()))
        xnorm = np.sum(np.abs(states.real), axis=(1, 2))
        order = np.lexsort((xnorm, -np.round(hts, 12)))
        states = _dedupe(states[order])
        hts = np.linalg.det(states.imag).real
        xnorm = np.sum(np.abs(states.real), axis=(1, 2))
        order = np.lexsort((xnorm, -np.round(hts, 12)))
        frontier = states[order][:beam]
    return best


def max_height(z, depth=8):
    """Hgt(Z): exact for g = 1, a word-search lower bound for g >= 2."""
    z = _as_siegel(z)
    if z.g == 1:
        reduced, _ = reduce_upper_half_plane(z.Z[0, 0])
        return reduced.imag
    return word_search_max_height(z, depth=depth)


@dataclass(frozen=True, eq=False)
class RenormalizationDirection:
    """Flow times ``t`` along the diagonal generators with 0-based ``indices``."""

    indices: tuple
    t: np.ndarray

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        t = np.array(self.t, dtype=float, ndmin=1)
        if len(set(idx)) != len(idx):
            raise InvalidArgumentError(f"renormalization indices must be distinct, got {idx}")
        if t.shape != (len(idx),):
            raise InvalidArgumentError("need exactly one flow time per index")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "t", t)

    @property
    def d(self):
        return len(self.indices)

    @classmethod
    def leading(cls, t):
        t = np.array(t, dtype=float, ndmin=1)
        return cls(tuple(range(t.size)), t)


def renormalization_matrix(g, direction):
    """exp(sum_k t_k delta_hat_{i_k}) = diag(e^tau, e^-tau)."""
    if any(i < 0 or i >= g for i in direction.indices):
        raise InvalidArgumentError(f"indices {direction.indices} out of range for g={g}")
    tau = np.zeros(g)
    tau[list(direction.indices)] = direction.t
    return np.diag(np.concatenate([np.exp(tau), np.exp(-tau)]))


def renormalize(alpha, direction):
    """r_t alpha = exp(sum_k t_k delta_hat_{i_k}) alpha."""
    alpha = as_symplectic(alpha)
    if not isinstance(direction, RenormalizationDirection):
        direction = RenormalizationDirection.leading(direction)
    return SymplecticMatrix(renormalization_matrix(alpha.g, direction) @ alpha.matrix)


def renormalized_height(alpha, t, depth=8):
    """Hgt of the Siegel point of r_{-t} alpha (leading indices)."""
    alpha = as_symplectic(alpha)
    r = renormalize(alpha, RenormalizationDirection.leading(-np.asarray(t, dtype=float)))
    return max_height(siegel_point(r), depth=depth)


def _trapezoid_axis(cutoff, step):
    n = int(math.floor(cutoff / step + 1e-12))
    nodes = [k * step for k in range(n + 1)]
    if cutoff - nodes[-1] > 1e-12 * max(1.0, cutoff):
        nodes.append(cutoff)
    nodes = np.array(nodes)
    if nodes.size == 1:
        return nodes, np.zeros(1)
    h = np.diff(nodes)
    w = np.zeros(nodes.size)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return nodes, w


def dc_integral(alpha, d, cutoff, step=0.05, depth=8):
    """Trapezoid value of int_[0,cutoff]^d e^{-|t|_1/2} Hgt(r_{-t} alpha)^{1/4} dt."""
    alpha = as_symplectic(alpha)
    if not 1 <= d <= alpha.g:
        raise InvalidArgumentError(f"rank d={d} must satisfy 1 <= d <= g={alpha.g}")
    if cutoff < 0 or step <= 0:
        raise InvalidArgumentError("need cutoff >= 0 and step > 0")
    if cutoff == 0:
        return 0.0
    nodes, weights = _trapezoid_axis(cutoff, step)

    @functools.lru_cache(maxsize=None)
    def integrand(idx):
        t = nodes[list(idx)]
        return math.exp(-0.5 * t.sum()) * renormalized_height(alpha, t, depth) ** 0.25

    total = 0.0
    for idx in np.ndindex(*([nodes.size] * d)):
        w = float(np.prod(weights[list(idx)]))
        if w:
            total += w * integrand(idx)
    return total


def log_law_profile(alpha, d, t_max, samples, depth=8, direction=None):
    """(|t|, log Hgt(r_{-t} alpha)) along a ray in the positive cone.

    The ray defaults to the diagonal direction (1, ..., 1)/sqrt(d).
    """
    alpha = as_symplectic(alpha)
    if t_max <= 0 or samples < 2:
        raise InvalidArgumentError("need t_max > 0 and samples >= 2")
    if not 1 <= d <= alpha.g:
        raise InvalidArgumentError(f"rank d={d} must satisfy 1 <= d <= g={alpha.g}")
    u = np.ones(d) if direction is None else np.asarray(direction, dtype=float)
    if u.shape != (d,) or np.any(u < 0) or not np.any(u > 0):
        raise InvalidArgumentError("direction must be a nonzero vector in the closed positive cone")
    u = u / np.linalg.norm(u)
    out = []
    for s in np.linspace(0.0, t_max, samples):
        out.append((float(s), math.log(renormalized_height(alpha, s * u, depth))))
    return out


def log_law_slope(profile, t_min=math.e):
    """Empirical limsup of log Hgt / log |t| over profile points with |t| >= t_min."""
    vals = [lh / math.log(t) for t, lh in profile if t >= t_min]
    if not vals:
        raise InvalidArgumentError("no profile points beyond t_min")
    return max(vals)


# Named frames.

def identity_preset(g):
    return SymplecticMatrix.identity(g)


def golden_rotations(g):
    """Rotation numbers frac(k * golden mean), k = 1..g; all of bounded type."""
    return np.array([math.modf(k * GOLDEN)[0] for k in range(1, g + 1)])


def golden_preset(g):
    """Frame (I 0; -diag(rho) I): X_i^alpha = X_i + rho_i Y_i with golden rho."""
    rho = golden_rotations(g)
    eye = np.eye(g)
    return SymplecticMatrix.from_blocks(eye, np.zeros((g, g)), -np.diag(rho), eye)


def random_preset(g, seed):
    """exp of a random element of sp(2g) with entries uniform in [-1, 1]."""
    rng = np.random.default_rng(seed)
    a = rng.uniform(-1.0, 1.0, (g, g))
    b = rng.uniform(-1.0, 1.0, (g, g))
    c = rng.uniform(-1.0, 1.0, (g, g))
    b = np.triu(b) + np.triu(b, 1).T
    c = np.triu(c) + np.triu(c, 1).T
    x = np.block([[a, b], [c, -a.T]])
    m = linalg.expm(x)
    return SymplecticMatrix(m)


PRESETS = {
    "identity": "identity frame (rational; heights grow like e^{2|t|})",
    "golden": "X_i + rho_i Y_i with rho_i = frac(i * golden mean); bounded type",
    "random(SEED)": "exp of a seeded random element of sp(2g), entries uniform in [-1, 1]",
}
