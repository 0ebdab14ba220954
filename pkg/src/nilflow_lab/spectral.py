"""Characters on the transverse torus, dual orbits, invariant distributions and chi/theta.

Composing a character with an iterate of the skew-shift gives

    e_{m,n} o A^j = c_j e_{m + nK sum_i j_i v_i, n},   c_j = e_{m,n}(A^j(0, 0)),

so the invariant distribution of the orbit of (m, n) normalised by
D(e_{m,n}) = 1 takes the value conj(c_j) on the j-th orbit label and 0
off the orbit. Phases are read off the closed-form iterate.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, signal, special

from . import _numerics
from .dynamics import DEFAULT_K, skew_iterate_many
from .errors import InvalidArgumentError, TruncationInsufficientError


@dataclass(frozen=True)
class CharacterLabel:
    """Label (m, n) of the character e(m.y + nKz)."""

    m: tuple
    n: int
    K: float = DEFAULT_K

    def __post_init__(self):
        m = tuple(int(v) for v in np.atleast_1d(self.m))
        if not m:
            raise InvalidArgumentError("m must have length g >= 1")
        if self.K <= 0:
            raise InvalidArgumentError("K must be positive")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "K", float(self.K))

    @property
    def g(self):
        return len(self.m)

    def key(self):
        return self.m, self.n

    def reduced(self):
        """Representative with m reduced modulo K|n| (when K|n| is an integer)."""
        if self.n == 0:
            return self
        mod = self.K * abs(self.n)
        if abs(mod - round(mod)) > 1e-12:
            raise InvalidArgumentError("K|n| must be an integer to reduce m")
        mod = int(round(mod))
        return CharacterLabel(tuple(v % mod for v in self.m), self.n, self.K)


def _as_label(obj, K=DEFAULT_K):
    if isinstance(obj, CharacterLabel):
        return obj
    m, n = obj
    return CharacterLabel(m, n, K)


def character_eval(label, p):
    """e_{m,n}(y, z) = exp(2 pi i (m.y + nKz))."""
    y, z = p
    y = np.asarray(y, dtype=float)
    phase = y @ np.array(label.m, dtype=float) + label.n * label.K * np.asarray(z, dtype=float)
    return _numerics.expi(phase)


@dataclass(frozen=True, eq=False)
class DualOrbit:
    """Labels of a truncated dual orbit; ``indices[k]`` is the iterate giving ``labels[k]``."""

    seed: CharacterLabel
    shift_vectors: np.ndarray
    truncation: int
    labels: tuple
    indices: np.ndarray

    def __len__(self):
        return len(self.labels)

    def keys(self):
        return [lab.key() for lab in self.labels]


def _shift_vectors(A, seed):
    sv = seed.n * seed.K * A.v
    if np.max(np.abs(sv - np.round(sv)), initial=0.0) > 1e-9:
        raise InvalidArgumentError("nK v_i must be integral for the dual orbit to stay on the character lattice")
    return np.round(sv).astype(np.int64)


def dual_orbit(A, seed, J):
    """Labels (m + nK sum_i j_i v_i, n) for j in [-J, J]^d; the seed alone when n = 0."""
    seed = _as_label(seed, A.K)
    if J < 0:
        raise InvalidArgumentError("truncation radius J must be >= 0")
    if seed.g != A.g:
        raise InvalidArgumentError(f"label has g={seed.g}, skew-shift has g={A.g}")
    if seed.n == 0:
        return DualOrbit(seed, np.zeros((A.d, A.g), dtype=np.int64), J, (seed,), np.zeros((1, A.d), dtype=np.int64))
    sv = _shift_vectors(A, seed)
    js = np.array(list(np.ndindex(*([2 * J + 1] * A.d))), dtype=np.int64) - J
    ms = np.array(seed.m, dtype=np.int64)[None, :] + js @ sv
    if len({tuple(r) for r in ms}) != len(ms):
        raise InvalidArgumentError("orbit labels repeat inside the box (shift vectors are dependent)")
    labels = tuple(CharacterLabel(tuple(r), seed.n, seed.K) for r in ms)
    return DualOrbit(seed, sv, J, labels, js)


def orbit_phases(A, seed, js):
    """c_j = e_seed(A^j(0, 0)) for iterate vectors js of shape (n, d)."""
    seed = _as_label(seed, A.K)
    ys, zs = skew_iterate_many(A, np.zeros(A.g), 0.0, js)
    return character_eval(seed, (ys, zs))


def displayed_phases(A, seed, js):
    """The closed-form phase with binomial term nK tau_i C(j_i, 2) and no cross terms."""
    seed = _as_label(seed, A.K)
    js = np.asarray(js, dtype=np.int64).reshape(-1, A.d)
    nk = seed.n * seed.K
    total = np.zeros(js.shape[0])
    for i in range(A.d):
        lin = np.array(seed.m, dtype=float) @ A.rho[i] + nk * A.tau[i]
        total += _numerics.frac_mul(lin, js[:, i])
        total += _numerics.frac_mul(nk * A.tau[i], js[:, i] * (js[:, i] - 1) // 2)
    return _numerics.expi(-total)


def _orbit_index(A, seed, sv, label):
    """Integer j with label = seed + j . sv, or None if the label is off the orbit."""
    if label.n != seed.n or label.g != seed.g:
        return None
    diff = np.array(label.m, dtype=float) - np.array(seed.m, dtype=float)
    if seed.n == 0:
        return np.zeros(A.d, dtype=np.int64) if not np.any(diff) else None
    j, *_ = np.linalg.lstsq(sv.T.astype(float), diff, rcond=None)
    jr = np.round(j).astype(np.int64)
    if np.any(sv.T @ jr != diff.astype(np.int64)):
        return None
    return jr


def invariant_distribution(A, seed, f_hat, J, with_displayed_phase=False):
    """Truncated D_{m,n}(f) = sum_{|j| <= J} conj(c_j) f_hat(label_j).

    ``f_hat`` maps labels (CharacterLabel or (m, n) pairs) to coefficients.
    Raises TruncationInsufficientError if a supported label lies on the
    orbit but outside the box.
    """
    seed = _as_label(seed, A.K)
    coeffs = {}
    for lab, c in dict(f_hat).items():
        lab = _as_label(lab, seed.K)
        coeffs[lab.key()] = coeffs.get(lab.key(), 0.0) + complex(c)
    sv = _shift_vectors(A, seed) if seed.n else np.zeros((A.d, A.g), dtype=np.int64)
    hits_j, hits_c = [], []
    for key, c in coeffs.items():
        if c == 0:
            continue
        j = _orbit_index(A, seed, sv, CharacterLabel(key[0], key[1], seed.K))
        if j is None:
            continue
        if np.max(np.abs(j), initial=0) > J:
            raise TruncationInsufficientError(
                f"label {key} sits at orbit index {j.tolist()}, outside the box of radius {J}"
            )
        hits_j.append(j)
        hits_c.append(c)
    if not hits_j:
        return (0j, 0j) if with_displayed_phase else 0j
    js = np.array(hits_j)
    cs = np.array(hits_c)
    value = _numerics.complex_fsum(np.conj(orbit_phases(A, seed, js)) * cs)
    if with_displayed_phase:
        return value, _numerics.complex_fsum(displayed_phases(A, seed, js) * cs)
    return value


def compose_with_shift(A, f_hat, i, K=None):
    """Fourier coefficients of f o A_i for f = sum f_hat(l) e_l."""
    out = {}
    y0 = np.zeros(A.g)
    zi = skew_iterate_many(A, y0, 0.0, np.eye(A.d, dtype=np.int64)[i])
    for lab, c in dict(f_hat).items():
        lab = _as_label(lab, A.K if K is None else K)
        phase = complex(character_eval(lab, (zi[0][0], zi[1][0])))
        shift = lab.n * lab.K * A.v[i]
        m2 = tuple(int(v) for v in np.round(np.array(lab.m) + shift))
        key = (m2, lab.n)
        out[key] = out.get(key, 0.0) + complex(c) * phase
    return out


def coboundary(A, phi_hats):
    """Fourier coefficients of sum_i (-1)^{i} (Phi_i o A_i - Phi_i) for i = 0..d-1."""
    out = {}
    for i, phi in enumerate(phi_hats):
        sign = 1.0 if i % 2 == 0 else -1.0
        for key, c in compose_with_shift(A, phi, i).items():
            out[key] = out.get(key, 0.0) + sign * c
        for lab, c in dict(phi).items():
            key = _as_label(lab, A.K).key()
            out[key] = out.get(key, 0.0) - sign * complex(c)
    return out


# chi and theta

_SERIES_CUTOFF = 1e-4


def _chi1(u):
    u = np.asarray(u, dtype=float)
    small = np.abs(u) < _SERIES_CUTOFF
    safe = np.where(small, 1.0, u)
    direct = np.expm1(1j * safe) / (1j * safe)
    # (e^{iu} - 1)/(iu) = 1 + iu/2 - u^2/6 - iu^3/24 + ...
    series = 1.0 + 0.5j * u - u ** 2 / 6.0 - 1j * u ** 3 / 24.0
    return np.where(small, series, direct)


def chi_modular(u):
    """prod_j (e^{i u_j} - 1)/(i u_j), equal to 1 at u_j = 0."""
    u = np.asarray(u, dtype=float)
    if u.ndim == 0:
        return complex(_chi1(u))
    return np.prod(_chi1(u), axis=-1)


def theta_field(T, u):
    """vol(U(T))^{1/2} chi(T * u)."""
    T = np.array(T, dtype=float, ndmin=1)
    if np.any(T <= 0):
        raise InvalidArgumentError("T must be positive")
    u = np.asarray(u, dtype=float)
    return math.sqrt(float(np.prod(T))) * chi_modular(T * u)


def _chi_sq_tail(a):
    """int_a^inf 2(1 - cos u)/u^2 du for a > 0."""
    si, _ = special.sici(a)
    return 2.0 / a - 2.0 * math.cos(a) / a + 2.0 * (math.pi / 2.0 - si)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


def _panels(lo, hi, width):
    n = max(1, int(math.ceil((hi - lo) / width)))
    edges = np.linspace(lo, hi, n + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * np.diff(edges)
    nodes = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    weights = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return nodes, weights


def chi_l2_norm_sq(d=1, cutoff=50.0):
    """||chi||^2 over R^d: adaptive quadrature on [0, cutoff] plus the exact tail."""
    f = lambda u: 2.0 * (1.0 - math.cos(u)) / (u * u) if u > 1e-4 else 1.0 - u * u / 12.0
    head, _ = integrate.quad(f, 0.0, cutoff, limit=500, epsabs=1e-14, epsrel=1e-13)
    return (2.0 * (head + _chi_sq_tail(cutoff))) ** d


def theta_field_norm_sq(T, cycles=200):
    """||theta_field(T, .)||^2 over R^d by panel quadrature in u plus the exact tail."""
    T = np.array(T, dtype=float, ndmin=1)
    total = 1.0
    for t in T:
        hi = 2.0 * math.pi * cycles / t
        nodes, w = _panels(0.0, hi, math.pi / t)
        vals = np.abs(theta_field([t], nodes[:, None])) ** 2
        # the tail of t |chi(t u)|^2 beyond hi is the chi tail beyond t * hi
        total *= 2.0 * (float(w @ vals) + _chi_sq_tail(t * hi))
    return total


@dataclass(frozen=True, eq=False)
class TestFunction:
    """Product test function f(x) = prod_j f_j(x_j), each f_j sampled on a uniform grid.

    ``samples[j]`` holds f_j(start + k * step); ``tail_bound`` bounds |f_j|
    outside the grid and must also bound the samples in the outer tenth
    of the grid.
    """

    __test__ = False  # not a pytest class

    start: float
    step: float
    samples: tuple
    tail_bound: float

    def __post_init__(self):
        s = self.samples
        if isinstance(s, np.ndarray) and s.ndim == 1:
            s = (s,)
        s = tuple(np.asarray(a, dtype=complex) for a in s)
        if self.step <= 0 or any(a.ndim != 1 or a.size < 8 for a in s):
            raise InvalidArgumentError("need step > 0 and at least 8 samples per axis")
        for a in s:
            edge = max(1, a.size // 10)
            if max(np.max(np.abs(a[:edge])), np.max(np.abs(a[-edge:]))) > self.tail_bound:
                raise InvalidArgumentError("samples near the grid edge exceed the declared tail bound")
        object.__setattr__(self, "samples", s)

    @property
    def d(self):
        return len(self.samples)

    @classmethod
    def from_callable(cls, funcs, start, stop, step, tail_bound):
        if callable(funcs):
            funcs = (funcs,)
        x = np.arange(start, stop + 0.5 * step, step)
        return cls(start, step, tuple(np.asarray(fn(x), dtype=complex) for fn in funcs), tail_bound)

    def fourier(self, j, xi):
        """Trapezoid transform int f_j(x) e^{-i xi x} dx; zero beyond the Nyquist frequency."""
        a = self.samples[j]
        x = self.start + self.step * np.arange(a.size)
        xi = np.asarray(xi, dtype=float)
        out = np.zeros(xi.shape, dtype=complex)
        inside = np.abs(xi) <= math.pi / self.step
        flat = xi[inside]
        res = np.empty(flat.size, dtype=complex)
        for s in range(0, flat.size, 4096):
            blk = flat[s:s + 4096]
            res[s:s + 4096] = self.step * (np.exp(-1j * np.outer(blk, x)) @ a)
        out[inside] = res
        return out

    def lebesgue(self):
        return complex(np.prod([self.fourier(j, np.zeros(1))[0] for j in range(self.d)]))

    def support_frequency(self, j, rel=1e-16):
        """Frequency beyond which the transform is negligible (capped at Nyquist)."""
        nyq = math.pi / self.step
        grid = np.linspace(0.0, nyq, 2049)
        mag = np.abs(self.fourier(j, grid)) + np.abs(self.fourier(j, -grid))
        big = np.nonzero(mag > rel * max(mag.max(), 1e-300))[0]
        return nyq if big.size == 0 else min(nyq, grid[min(big[-1] + 1, grid.size - 1)])


def _panel_fourier(f, j, lo, width, count, scale):
    """f_j^ at (lo + (k + (1 + x_g)/2) width) / scale for all panels k and GL nodes x_g.

    For a fixed Gauss node the frequencies form an arithmetic progression,
    so each row is one chirp-z transform of the samples.
    """
    a = f.samples[j]
    x = f.start + f.step * np.arange(a.size)
    dxi = width / scale
    w = np.exp(-1j * dxi * f.step)
    out = np.empty((count, _GL_NODES.size), dtype=complex)
    for q, node in enumerate(_GL_NODES):
        xi0 = (lo + 0.5 * (1.0 + node) * width) / scale
        # sum_n a_n e^{-i (xi0 + k dxi) x_n} = e^{-i k dxi x_0} sum_n (a_n e^{-i xi0 x_n}) w^{nk}
        row = signal.czt(a * np.exp(-1j * xi0 * x), m=count, w=w, a=1.0)
        out[:, q] = f.step * row * np.exp(-1j * dxi * f.start * np.arange(count))
    xi = (lo + (np.arange(count)[:, None] + 0.5 * (1.0 + _GL_NODES[None, :])) * width) / scale
    out[np.abs(xi) > math.pi / f.step] = 0.0
    return out


def l2_convergence_check(f, Tseq):
    """|| vol^{-1/2} int_U(T) f(. + t) dt - theta_T Leb(f) ||_{L^2(R^d)} for each T.

    Fourier side: (2 pi)^{-d} int |chi(nu)|^2 |f^(nu / T) - f^(0)|^2 dnu.
    For product f the squared modulus expands into three separable terms.
    """
    out = []
    cuts = [f.support_frequency(j) for j in range(f.d)]
    for T in Tseq:
        T = np.array(T, dtype=float, ndmin=1)
        if T.size != f.d or np.any(T <= 0):
            raise InvalidArgumentError("each T must be a positive vector of length d")
        aa, ab, bb = 1.0, 1.0 + 0j, 1.0
        for j, t in enumerate(T):
            b = complex(f.fourier(j, np.zeros(1))[0])
            count = max(1, int(math.ceil(2.0 * t * cuts[j] / math.pi)))
            lo = -0.5 * count * math.pi
            nodes = (lo + (np.arange(count)[:, None] + 0.5 * (1.0 + _GL_NODES[None, :])) * math.pi)
            w = np.broadcast_to(0.5 * math.pi * _GL_WEIGHTS, nodes.shape)
            chi2 = np.abs(_chi1(nodes)) ** 2
            a = _panel_fourier(f, j, lo, math.pi, count, t)
            aa *= float(np.sum(w * chi2 * np.abs(a) ** 2))
            ab *= complex(np.sum(w * chi2 * a)) * np.conj(b)
            bb *= 2.0 * math.pi * abs(b) ** 2
        err2 = (aa - 2.0 * ab.real + bb) / (2.0 * math.pi) ** f.d
        out.append(math.sqrt(max(err2, 0.0)))
    return out
