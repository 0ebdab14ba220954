"""Theta sums, empirical Bufetov estimators, limit distributions and L^2 profiles."""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _numerics
from .dynamics import SkewShift, birkhoff_integral, return_map, skew_iterate_many
from .errors import BudgetExceededError, InvalidArgumentError
from .heisenberg import CENTRAL_PERIOD, GroupElement, as_frame
from .spectral import CharacterLabel, character_eval

THETA_BUDGET = 10 ** 8
DEFAULT_QUANTILES = (0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99)


@dataclass(frozen=True, eq=False)
class ThetaParams:
    """Quadratic form Q, linear form l and cube side N of a theta sum."""

    Q: np.ndarray
    l: np.ndarray
    N: int

    def __post_init__(self):
        q = np.array(self.Q, dtype=float, ndmin=2)
        l = np.array(self.l, dtype=float, ndmin=1)
        if q.shape[0] != q.shape[1] or l.shape != (q.shape[0],):
            raise InvalidArgumentError("Q must be g x g and l of length g")
        if np.max(np.abs(q - q.T)) > 1e-12:
            raise InvalidArgumentError("Q must be symmetric to 1e-12")
        if int(self.N) != self.N or self.N < 1:
            raise InvalidArgumentError("N must be a positive integer")
        object.__setattr__(self, "Q", q)
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "N", int(self.N))

    @property
    def g(self):
        return self.Q.shape[0]


@dataclass(frozen=True)
class DistributionSummary:
    count: int
    mean: float
    variance: float
    quantiles: tuple
    support_radius: float
    histogram: tuple
    seed: int

    @classmethod
    def from_samples(cls, samples, seed, bins=20, probs=DEFAULT_QUANTILES):
        x = np.asarray(samples, dtype=float).ravel()
        if x.size == 0:
            raise InvalidArgumentError("no samples to summarise")
        mean = math.fsum(x) / x.size
        var = math.fsum((x - mean) ** 2) / (x.size - 1) if x.size > 1 else 0.0
        qs = tuple((float(p), float(v)) for p, v in zip(probs, np.quantile(x, probs)))
        lo, hi = float(x.min()), float(x.max())
        if hi == lo:
            lo, hi = lo - 0.5, hi + 0.5
        counts, edges = np.histogram(x, bins=bins, range=(lo, hi))
        centers = 0.5 * (edges[:-1] + edges[1:])
        hist = tuple((float(c), int(k)) for c, k in zip(centers, counts))
        return cls(int(x.size), float(mean), float(var), qs, float(np.max(np.abs(x))), hist, int(seed))

    @property
    def stdev(self):
        return math.sqrt(self.variance)

    @property
    def standard_error(self):
        return self.stdev / math.sqrt(self.count)

    def as_dict(self):
        return {
            "count": self.count,
            "mean": self.mean,
            "variance": self.variance,
            "quantiles": [list(q) for q in self.quantiles],
            "support_radius": self.support_radius,
            "histogram": [list(h) for h in self.histogram],
            "seed": self.seed,
        }


@dataclass(frozen=True, eq=False)
class TSequence:
    """Increasing rectangle sides T_1 <= T_2 <= ... (component-wise)."""

    entries: tuple

    def __post_init__(self):
        rows = tuple(np.array(e, dtype=float, ndmin=1) for e in self.entries)
        if not rows:
            raise InvalidArgumentError("T sequence must not be empty")
        d = rows[0].size
        for prev, cur in zip(rows, rows[1:]):
            if cur.size != d or np.any(cur < prev):
                raise InvalidArgumentError("T sequence entries must share d and grow component-wise")
        if any(np.any(r <= 0) for r in rows):
            raise InvalidArgumentError("T sequence entries must be positive")
        object.__setattr__(self, "entries", rows)

    @classmethod
    def geometric(cls, T0, count, ratio=math.sqrt(10.0), d=1):
        T0 = np.broadcast_to(np.array(T0, dtype=float, ndmin=1), (d,))
        return cls(tuple(T0 * ratio ** k for k in range(count)))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


# theta sums

def _lattice_chunks(N, g, chunk=1 << 20):
    """Blocks of points of [0, N]^g (as int64 arrays of shape (n, g))."""
    total = (N + 1) ** g
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        pts = np.empty((idx.size, g), dtype=np.int64)
        for k in range(g - 1, -1, -1):
            pts[:, k] = idx % (N + 1)
            idx = idx // (N + 1)
        yield pts


def _quadratic_phase(Q, pts):
    """frac(n^T Q n) without forming large products in floating point."""
    g = Q.shape[0]
    acc = np.zeros(pts.shape[0])
    for i in range(g):
        acc += _numerics.frac_mul(Q[i, i], pts[:, i] * pts[:, i])
        for j in range(i + 1, g):
            acc += _numerics.frac_mul(2.0 * Q[i, j], pts[:, i] * pts[:, j])
    return _numerics.frac(acc)


def _linear_phase(l, pts):
    acc = np.zeros(pts.shape[0])
    for i in range(l.size):
        acc += _numerics.frac_mul(l[i], pts[:, i])
    return acc


def _check_budget(N, g, budget):
    if (N + 1) ** g > budget:
        raise BudgetExceededError(
            f"theta sum needs {(N + 1) ** g} terms, over the budget of {budget}; "
            "use g = 1 with a smaller N or a recursive evaluation"
        )


def theta_sum(p, budget=THETA_BUDGET):
    """N^{-g/2} sum_{n in [0, N]^g} e(Q[n] + l(n)) with correctly rounded accumulation."""
    _check_budget(p.N, p.g, budget)
    re, im = [], []
    for pts in _lattice_chunks(p.N, p.g):
        ph = 2.0 * np.pi * _numerics.frac(_quadratic_phase(p.Q, pts) + _linear_phase(p.l, pts))
        re.append(math.fsum(np.cos(ph)))
        im.append(math.fsum(np.sin(ph)))
    scale = p.N ** (p.g / 2.0)
    return complex(math.fsum(re) / scale, math.fsum(im) / scale)


def theta_sums_many(Q, ls, N, budget=THETA_BUDGET):
    """theta_sum for many linear forms sharing Q and N (g = 1 fast path)."""
    Q = np.array(Q, dtype=float, ndmin=2)
    ls = np.array(ls, dtype=float).reshape(-1, Q.shape[0])
    g = Q.shape[0]
    _check_budget(N, g, budget)
    if g != 1:
        return np.array([theta_sum(ThetaParams(Q, l, N), budget) for l in ls])
    n = np.arange(N + 1, dtype=np.int64)
    quad = _quadratic_phase(Q, n[:, None])
    out = np.empty(ls.shape[0], dtype=complex)
    scale = math.sqrt(N)
    for k, l in enumerate(ls[:, 0]):
        ph = 2.0 * np.pi * _numerics.frac(quad + _numerics.frac_mul(l, n))
        out[k] = complex(math.fsum(np.cos(ph)), math.fsum(np.sin(ph))) / scale
    return out


def theta_distribution(Q, N, samples, seed):
    """Summary of |theta_sum| over linear forms l uniform in [0, 1)^g."""
    if samples < 1:
        raise InvalidArgumentError("samples must be >= 1")
    Q = np.array(Q, dtype=float, ndmin=2)
    rng = np.random.default_rng(seed)
    ls = rng.random((samples, Q.shape[0]))
    vals = np.abs(theta_sums_many(Q, ls, N))
    return DistributionSummary.from_samples(vals, seed), vals


# Bufetov estimator and limit distributions

def _check_zero_mean(f):
    for m, n, c in f.terms:
        if n == 0 and not any(m) and c != 0:
            raise InvalidArgumentError("observable must have zero mean (no trivial character)")


def bufetov_estimate(alpha, m, T, f, quad=None):
    """The Birkhoff integral of a zero-mean observable, used as the empirical functional."""
    _check_zero_mean(f)
    return birkhoff_integral(alpha, m, T, f, quad)


def sample_basepoint(g, seed, index):
    """Haar-uniform point of the fundamental window, seeded by (seed, index)."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))
    u = rng.random(2 * g + 1)
    return GroupElement(u[:g], u[g:2 * g], CENTRAL_PERIOD * u[2 * g])


def limit_distribution_experiment(alpha, f, Tseq, samples, seed, threads=1, return_samples=False):
    """Summaries of E_T(f) = vol(U(T))^{-1/2} <P_{U(T)} m, omega_f> over random m, per T."""
    if samples < 10:
        raise InvalidArgumentError("samples must be >= 10")
    if not isinstance(Tseq, TSequence):
        Tseq = TSequence(tuple(Tseq))
    _check_zero_mean(f)
    frame = as_frame(alpha)
    g = frame.g

    def one(i):
        m = sample_basepoint(g, seed, i)
        return [birkhoff_integral(frame, m, T, f) / math.sqrt(float(np.prod(T))) for T in Tseq]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, range(samples)))
    else:
        rows = [one(i) for i in range(samples)]
    values = np.array(rows, dtype=complex)  # (samples, len(Tseq))
    summaries = [DistributionSummary.from_samples(values[:, k].real, seed) for k in range(len(Tseq))]
    if return_samples:
        return summaries, values
    return summaries


# transverse L^2 profiles

def _as_skew(obj, d):
    if isinstance(obj, SkewShift):
        return obj
    return return_map(obj, d)


def _return_grid(A, T):
    T = np.array(T, dtype=float, ndmin=1)
    if T.shape != (A.d,):
        raise InvalidArgumentError(f"T must have length d={A.d}")
    counts = T / A.t_ret
    if np.any(np.abs(counts - np.round(counts)) > 1e-9 * np.maximum(1.0, counts)) or np.any(counts < 0.5):
        raise InvalidArgumentError("each T_i must be a positive integer multiple of t_Ret,i")
    counts = np.round(counts).astype(int)
    return np.array(list(np.ndindex(*counts)), dtype=np.int64)


def transverse_l2_norm(A, terms, T, over_z=True, z=0.0):
    """|| sum_j sum_terms c e_label o A^j || by Parseval over composed labels.

    With ``over_z`` the norm is taken in L^2 of the whole transverse torus;
    otherwise in L^2(T^g, dy) at the fixed central coordinate ``z``.
    """
    js = _return_grid(A, T)
    coeffs = {}
    for label, c in terms:
        if not isinstance(label, CharacterLabel):
            label = CharacterLabel(label[0], label[1], A.K)
        ys, zs = skew_iterate_many(A, np.zeros(A.g), 0.0, js)
        phases = character_eval(label, (ys, zs)) * complex(c)
        shifts = np.round(label.n * label.K * (js @ A.v)).astype(np.int64)
        ms = np.array(label.m, dtype=np.int64)[None, :] + shifts
        if not over_z:
            phases = phases * _numerics.expi(label.n * label.K * z)
        for row, ph in zip(ms, phases):
            key = tuple(row) if not over_z else (tuple(row), label.n)
            coeffs.setdefault(key, []).append(ph)
    return math.sqrt(math.fsum(abs(_numerics.complex_fsum(v)) ** 2 for v in coeffs.values()))


def transverse_l2_profile(alpha, label, T, d=None):
    """|| sum over the return grid of e_label o A^j ||_{L^2(T^g, dy)}."""
    if not isinstance(label, CharacterLabel):
        label = CharacterLabel(*label)
    T = np.array(T, dtype=float, ndmin=1)
    A = _as_skew(alpha, d or T.size)
    return transverse_l2_norm(A, [(label, 1.0)], T, over_z=False)


# skew-shift sums as theta sums (g = d = 1)

def skew_theta_params(A, label, p, N):
    """Theta parameters and constant phase c with e_label(A^k p) = e(c + Q k^2 + l k)."""
    if A.g != 1 or A.d != 1:
        raise InvalidArgumentError("the theta bridge is stated for g = d = 1")
    if not isinstance(label, CharacterLabel):
        label = CharacterLabel(label[0], label[1], A.K)
    y, z = p
    y = float(np.atleast_1d(y)[0])
    m = label.m[0]
    nk = label.n * label.K
    rho, v, tau = A.rho[0, 0], A.v[0, 0], A.tau[0]
    q = 0.5 * nk * v * rho
    lin = m * rho + nk * tau + nk * v * y - q
    const = m * y + nk * z
    return ThetaParams([[q]], [lin], N), const


def skew_birkhoff_sum(A, label, p, N):
    """sum_{k=0}^{N} e_label(A^k p) through the closed-form iterate."""
    if not isinstance(label, CharacterLabel):
        label = CharacterLabel(label[0], label[1], A.K)
    js = np.arange(N + 1, dtype=np.int64)[:, None]
    ys, zs = skew_iterate_many(A, p[0], p[1], js)
    return character_eval(label, (ys, zs))
