"""The R^d action P^{d,alpha} on M, Birkhoff integrals and the return map.

The flow acts by left multiplication, P_x m = exp(sum x_i X_i^alpha) m,
followed by right reduction into the fundamental window.

Observables live on the transverse torus T^{g+1} = {(0, y, z)} and are
pulled back to M through flow coordinates: a reduced point m with
x-coordinate x~ is written uniquely as exp(sum s_i X_i^alpha) xi(m) with
xi(m) on the section, s = F_x^{-1} x~, where F_x is the x-part of the
X^alpha columns. Along an orbit xi only changes when some x-coordinate
crosses an integer, so f(P_x m) is piecewise constant in x and Birkhoff
integrals over rectangles reduce to exact cell sums.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _numerics
from .errors import DegenerateFrameError, InvalidArgumentError, ToleranceNotMetError
from .heisenberg import (
    CENTRAL_PERIOD,
    Frame,
    GroupElement,
    as_frame,
    exp_arrays,
    exp_map,
    generator_sum,
    multiply_arrays,
    reduce_arrays,
)
from .symplectic import as_symplectic

DEFAULT_K = 1.0 / CENTRAL_PERIOD


@dataclass(frozen=True, eq=False)
class Rectangle:
    """Standard rectangle U(T) = [0, T_1] x ... x [0, T_d] based at ``base``."""

    T: np.ndarray
    base: GroupElement

    def __post_init__(self):
        t = np.array(self.T, dtype=float, ndmin=1)
        if t.ndim != 1 or np.any(~np.isfinite(t)) or np.any(t <= 0):
            raise InvalidArgumentError(f"side lengths must be positive, got {t.tolist()}")
        object.__setattr__(self, "T", t)

    @property
    def d(self):
        return self.T.size

    @property
    def volume(self):
        return float(np.prod(self.T))


@dataclass(frozen=True, eq=False)
class Observable:
    """Finite character sum f(y, z) = sum c e(m.y + nKz) on the transverse torus.

    ``terms`` is a sequence of (m, n, c) with m an integer g-vector.
    """

    terms: tuple
    K: float = DEFAULT_K

    def __post_init__(self):
        clean = []
        g = None
        for term in self.terms:
            m, n, c = term
            m = tuple(int(v) for v in np.atleast_1d(m))
            if g is None:
                g = len(m)
            elif len(m) != g:
                raise InvalidArgumentError("all character labels must have the same g")
            c = complex(c)
            if not np.isfinite(c):
                raise InvalidArgumentError("coefficients must be finite")
            clean.append((m, int(n), c))
        if not clean:
            raise InvalidArgumentError("an observable needs at least one term (use a zero coefficient)")
        if self.K <= 0:
            raise InvalidArgumentError("K must be positive")
        object.__setattr__(self, "terms", tuple(clean))
        object.__setattr__(self, "K", float(self.K))

    @property
    def g(self):
        return len(self.terms[0][0])

    @classmethod
    def character(cls, m, n, coeff=1.0, K=DEFAULT_K):
        return cls(((m, n, coeff),), K)

    @classmethod
    def constant(cls, g, value=1.0, K=DEFAULT_K):
        return cls((((0,) * g, 0, value),), K)

    @property
    def mean(self):
        """Haar average, the coefficient of the trivial character."""
        return sum(c for m, n, c in self.terms if n == 0 and not any(m))

    def labels(self):
        return [(m, n) for m, n, _ in self.terms]

    def evaluate_torus(self, y, z):
        """f(y, z); y has shape (..., g), z shape (...)."""
        y = np.asarray(y, dtype=float)
        z = np.asarray(z, dtype=float)
        out = np.zeros(z.shape, dtype=complex)
        for m, n, c in self.terms:
            if c == 0:
                continue
            phase = y @ np.array(m, dtype=float) + n * self.K * z
            out = out + c * _numerics.expi(phase)
        return out


@dataclass(frozen=True)
class Quadrature:
    """Refinement policy for the non-exact (sheared, d >= 3) integration path."""

    rtol: float = 1e-8
    min_points_per_unit: int = 2
    max_levels: int = 8

    def __post_init__(self):
        if self.rtol <= 0 or self.min_points_per_unit < 2 or self.max_levels < 1:
            raise InvalidArgumentError("need rtol > 0, min_points_per_unit >= 2, max_levels >= 1")


@dataclass(frozen=True, eq=False)
class SkewShift:
    """Commuting skew-shifts A_i(y, z) = (y + rho_i, z + tau_i + v_i . y) on T^g x R/K^{-1}Z.

    ``rho`` and ``v`` have shape (d, g); ``tau`` and ``t_ret`` shape (d,).
    """

    rho: np.ndarray
    v: np.ndarray
    tau: np.ndarray
    t_ret: np.ndarray
    K: float = DEFAULT_K
    commute_tol: float = field(default=1e-12, repr=False)

    def __post_init__(self):
        rho = np.array(self.rho, dtype=float, ndmin=2)
        v = np.array(self.v, dtype=float, ndmin=2)
        tau = np.array(self.tau, dtype=float, ndmin=1)
        t_ret = np.array(self.t_ret, dtype=float, ndmin=1)
        d = rho.shape[0]
        if v.shape != rho.shape or tau.shape != (d,) or t_ret.shape != (d,):
            raise InvalidArgumentError("inconsistent skew-shift shapes")
        if np.any(t_ret <= 0) or self.K <= 0:
            raise InvalidArgumentError("return times and K must be positive")
        for name, arr in (("rho", rho), ("v", v), ("tau", tau), ("t_ret", t_ret)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "K", float(self.K))
        defect = self.commutation_defect()
        if defect > self.commute_tol * max(1.0, float(np.max(np.abs(v)) * np.max(np.abs(rho)))):
            raise InvalidArgumentError(f"component maps do not commute (defect {defect:.3g})")

    @property
    def g(self):
        return self.rho.shape[1]

    @property
    def d(self):
        return self.rho.shape[0]

    @property
    def central_period(self):
        return 1.0 / self.K

    def commutation_defect(self):
        """max_{j,k} |v_j . rho_k - v_k . rho_j|; zero iff the A_i commute."""
        m = self.v @ self.rho.T
        return float(np.max(np.abs(m - m.T), initial=0.0))

    def apply(self, p, i=0):
        """One step of A_i."""
        y, z = p
        y = np.asarray(y, dtype=float)
        y2 = _numerics.frac(y + self.rho[i])
        z2 = _numerics.mod(z + self.tau[i] + float(self.v[i] @ y), self.central_period)
        return y2, float(z2)


def _frame_and_check(alpha, d=None):
    frame = as_frame(alpha)
    if d is not None and not 1 <= d <= frame.g:
        raise InvalidArgumentError(f"need 1 <= d <= g={frame.g}, got d={d}")
    return frame


def _flow_arrays(frame, x0, y0, z0, xs):
    """exp(sum xs_i X_i^alpha) . (x0, y0, z0), reduced; xs has shape (n, d)."""
    d = xs.shape[-1]
    g = frame.g
    ab = xs @ frame.x_block[:, :d].T
    c = xs @ frame.x_central[:d]
    ex, ey, ez = exp_arrays(ab[..., :g], ab[..., g:], c)
    x, y, z = multiply_arrays(ex, ey, ez, x0, y0, z0)
    return reduce_arrays(x, y, z)


def flow(alpha, m, x):
    """P_x m = lattice_reduce(exp(sum x_i X_i^alpha) m)."""
    frame = as_frame(alpha)
    x = np.array(x, dtype=float, ndmin=1)
    if x.ndim != 1 or x.size > frame.g or m.g != frame.g:
        raise InvalidArgumentError(f"flow time of length {x.size} and point with g={m.g} do not fit g={frame.g}")
    xr, yr, zr = _flow_arrays(frame, m.x, m.y, np.float64(m.z), x[None, :])
    return GroupElement(xr[0], yr[0], float(zr[0]))


def _section_arrays(frame, x, y, z):
    """Flow-coordinate projection of reduced points onto the section x = 0."""
    fx = frame.x_part
    if abs(np.linalg.det(fx)) < 1e-12:
        raise DegenerateFrameError("x-part of the X^alpha frame is singular; flow coordinates undefined")
    s = np.linalg.solve(fx, np.atleast_2d(x).T).T.reshape(np.shape(x))
    ab = -s @ frame.x_block.T
    c = -s @ frame.x_central
    g = frame.g
    ex, ey, ez = exp_arrays(ab[..., :g], ab[..., g:], c)
    _, ys, zs = multiply_arrays(ex, ey, ez, x, y, z)
    # x-part is now zero, so shifting y by integers leaves z alone
    return _numerics.frac(ys), _numerics.mod(zs, CENTRAL_PERIOD)


def section_point(alpha, m):
    """Section point xi(m) = (y, z) of a point of M."""
    frame = as_frame(alpha)
    x, y, z = reduce_arrays(m.x, m.y, np.float64(m.z))
    ys, zs = _section_arrays(frame, x, y, z)
    return ys, float(zs)


def observable_at(alpha, f, m):
    """f pulled back to M: f(xi(m))."""
    ys, zs = section_point(alpha, m)
    return complex(f.evaluate_torus(ys, zs))


def _evaluate_flow(frame, f, m, xs):
    x, y, z = _flow_arrays(frame, m.x, m.y, np.float64(m.z), xs)
    ys, zs = _section_arrays(frame, x, y, z)
    return f.evaluate_torus(ys, zs)


def _axis_breakpoints(rate, start, length):
    """Times in (0, length) at which start + rate * t crosses an integer."""
    if rate == 0.0:
        return np.empty(0)
    end = start + rate * length
    lo, hi = min(start, end), max(start, end)
    ks = np.arange(np.floor(lo) + 1.0, np.ceil(hi))
    t = (ks - start) / rate
    return t[(t > 0.0) & (t < length)]


def _cells(points, length):
    nodes = np.unique(np.concatenate([[0.0], points, [length]]))
    return 0.5 * (nodes[:-1] + nodes[1:]), np.diff(nodes)


def _line_integral(frame, f, m0, axis, length, batch):
    """Exact integrals of f along X_axis^alpha for many start offsets.

    ``batch`` has shape (n, d): flow offsets of the segment starts.
    """
    fx = frame.x_part
    d = batch.shape[1]
    out = np.zeros(batch.shape[0], dtype=complex)
    for row, off in enumerate(batch):
        x0, _, _ = _flow_arrays(frame, m0.x, m0.y, np.float64(m0.z), off[None, :])
        bps = [_axis_breakpoints(fx[k, axis], x0[0, k], length) for k in range(frame.g)]
        mids, widths = _cells(np.concatenate(bps), length)
        xs = np.repeat(off[None, :], mids.size, axis=0)
        xs[:, axis] += mids
        vals = _evaluate_flow(frame, f, m0, xs[:, :d])
        out[row] = _numerics.complex_fsum(widths * vals)
    return out


def _is_aligned(fx_d):
    """Each x-coordinate is moved by at most one of the d generators."""
    return bool(np.all(np.count_nonzero(fx_d, axis=1) <= 1))


def birkhoff_integral(alpha, m, T, f, quad=None):
    """int_{U(T)} f(P_x m) dx.

    Exact cell sums whenever the hyperplanes where f(P_x m) jumps are
    axis-parallel (always for d = 1) or d = 2. Otherwise the last axis is
    integrated exactly and the remaining ones by composite midpoint with
    dyadic refinement, raising ToleranceNotMetError if two successive
    levels disagree beyond ``quad.rtol``.
    """
    frame = as_frame(alpha)
    rect = T if isinstance(T, Rectangle) else Rectangle(T, m)
    T = rect.T
    d = T.size
    if d > frame.g or m.g != frame.g or f.g != frame.g:
        raise InvalidArgumentError("dimension mismatch between frame, point, rectangle and observable")
    quad = quad or Quadrature()
    fx = frame.x_part
    m = GroupElement(*reduce_arrays(m.x, m.y, np.float64(m.z)))
    if _is_aligned(fx[:, :d]):
        return _aligned_integral(frame, f, m, T)
    if d == 2:
        return _planar_integral(frame, f, m, T)
    return _refined_integral(frame, f, m, T, quad)


def _aligned_integral(frame, f, m, T):
    fx = frame.x_part
    d = T.size
    axes_mids, axes_w = [], []
    for i in range(d):
        bps = [_axis_breakpoints(fx[k, i], m.x[k], T[i]) for k in range(frame.g) if fx[k, i] != 0]
        mids, w = _cells(np.concatenate(bps) if bps else np.empty(0), T[i])
        axes_mids.append(mids)
        axes_w.append(w)
    grids = np.meshgrid(*axes_mids, indexing="ij")
    xs = np.stack([gr.ravel() for gr in grids], axis=-1)
    wgrid = np.meshgrid(*axes_w, indexing="ij")
    w = np.prod(np.stack([gr.ravel() for gr in wgrid], axis=-1), axis=-1)
    total = 0.0 + 0.0j
    chunk = 200_000
    parts = []
    for s in range(0, xs.shape[0], chunk):
        vals = _evaluate_flow(frame, f, m, xs[s:s + chunk])
        parts.append(w[s:s + chunk] * vals)
    total = _numerics.complex_fsum(np.concatenate(parts))
    return total


def _planar_integral(frame, f, m, T):
    """d = 2 with sheared jump lines: the inner integral is piecewise
    linear in x_1 between projections of line intersections, so the
    midpoint rule on each piece is exact."""
    fx = frame.x_part[:, :2]
    lines = []  # (a, b, c): a x1 + b x2 = c
    lines += [(1.0, 0.0, 0.0), (1.0, 0.0, T[0]), (0.0, 1.0, 0.0), (0.0, 1.0, T[1])]
    for k in range(frame.g):
        a, b = fx[k]
        if a == 0 and b == 0:
            continue
        corners = [m.x[k] + a * u + b * w for u in (0, T[0]) for w in (0, T[1])]
        for lvl in np.arange(np.floor(min(corners)), np.ceil(max(corners)) + 1.0):
            lines.append((a, b, lvl - m.x[k]))
    L = np.array(lines)
    a1, b1, c1 = L[:, None, 0], L[:, None, 1], L[:, None, 2]
    a2, b2, c2 = L[None, :, 0], L[None, :, 1], L[None, :, 2]
    det = a1 * b2 - a2 * b1
    with np.errstate(divide="ignore", invalid="ignore"):
        x1 = (c1 * b2 - c2 * b1) / det
        x2 = (a1 * c2 - a2 * c1) / det
    ok = np.abs(det) > 1e-14
    ok &= (x1 >= -1e-12) & (x1 <= T[0] + 1e-12) & (x2 >= -1e-12) & (x2 <= T[1] + 1e-12)
    cuts = np.clip(x1[ok], 0.0, T[0])
    # vertical lines (b = 0) are jump lines themselves
    vert = L[(L[:, 1] == 0) & (L[:, 0] != 0)]
    cuts = np.concatenate([cuts, np.clip(vert[:, 2] / vert[:, 0], 0.0, T[0])])
    mids, widths = _cells(cuts[(cuts > 0) & (cuts < T[0])], T[0])
    offs = np.zeros((mids.size, 2))
    offs[:, 0] = mids
    inner = _line_integral(frame, f, m, 1, T[1], offs)
    return _numerics.complex_fsum(widths * inner)


def _refined_integral(frame, f, m, T, quad):
    d = T.size
    outer = T[:-1]
    n = np.maximum(quad.min_points_per_unit * np.ceil(outer), 1).astype(int)
    prev = None
    for _ in range(quad.max_levels):
        axes = [(np.arange(k) + 0.5) * (L / k) for k, L in zip(n, outer)]
        grids = np.meshgrid(*axes, indexing="ij")
        offs = np.zeros((grids[0].size, d))
        for i, gr in enumerate(grids):
            offs[:, i] = gr.ravel()
        inner = _line_integral(frame, f, m, d - 1, T[-1], offs)
        cur = _numerics.complex_fsum(inner) * float(np.prod(outer / n))
        if prev is not None:
            scale = max(abs(cur), float(np.prod(T)) * 1e-3)
            if abs(cur - prev) <= quad.rtol * scale:
                return cur
        prev = cur
        n = 2 * n
    raise ToleranceNotMetError(
        f"midpoint refinement did not reach rtol={quad.rtol} within {quad.max_levels} levels",
        coarse=prev if prev is not None else None,
        fine=cur,
    )


def return_map(alpha, d):
    """Skew-shift data of the first return of X_1^alpha..X_d^alpha to the section.

    Requires X_i^alpha = c_i X_i + (Y, Z terms) for i < d, i.e. each of
    the first d generators moves only its own x-coordinate. Then
    t_Ret,i = 1/|c_i|, rho_i = t_Ret,i * (Y-part of X_i^alpha),
    v_i = sign(c_i) e_i and tau_i = t_Ret,i w_i + sign(c_i) rho_{i,i} / 2.
    """
    frame = _frame_and_check(alpha, d)
    g = frame.g
    fx = frame.x_part
    fy = frame.y_part
    rho = np.zeros((d, g))
    v = np.zeros((d, g))
    tau = np.zeros(d)
    t_ret = np.zeros(d)
    for i in range(d):
        c = fx[i, i]
        off = np.delete(fx[:, i], i)
        if c == 0.0 or np.any(off != 0.0):
            raise DegenerateFrameError(
                f"generator {i} has no first return to the transverse torus "
                f"(x-part {fx[:, i].tolist()} is not a nonzero multiple of e_{i})"
            )
        sigma = np.sign(c)
        t_ret[i] = 1.0 / abs(c)
        rho[i] = t_ret[i] * fy[:, i]
        v[i, i] = sigma
        tau[i] = t_ret[i] * frame.x_central[i] + 0.5 * sigma * rho[i, i]
    return SkewShift(_numerics.frac(rho), v, tau, t_ret, DEFAULT_K)


def _binom2(j):
    j = np.asarray(j, dtype=np.int64)
    return j * (j - 1) // 2


def _int_times(q, k, period):
    """(q * k) mod period for real q and integer k, without losing the fraction."""
    return period * _numerics.frac_mul(np.asarray(q, dtype=float) / period, k)


def skew_iterate(A, p, j):
    """A^j(p) = A_1^{j_1} ... A_d^{j_d}(p) by the closed form."""
    y, z = p
    y = np.array(y, dtype=float, ndmin=1)
    j = np.array(j, dtype=np.int64, ndmin=1)
    if j.shape != (A.d,) or y.shape != (A.g,):
        raise InvalidArgumentError("iterate vector must have length d and y length g")
    per = A.central_period
    ydst = _numerics.frac(y + sum(_numerics.frac_mul(A.rho[i], j[i]) for i in range(A.d)))
    terms = [float(z)]
    for i in range(A.d):
        terms.append(float(_int_times(A.tau[i], j[i], per)))
        terms.append(float(_int_times(A.v[i] @ y, j[i], per)))
        terms.append(float(_int_times(A.v[i] @ A.rho[i], _binom2(j[i]), per)))
        for k in range(i + 1, A.d):
            terms.append(float(_int_times(A.v[k] @ A.rho[i], j[i] * j[k], per)))
    zdst = _numerics.mod(sum(_numerics.mod(np.array(terms), per)), per)
    return ydst, float(zdst)


def skew_iterate_many(A, y, z, js):
    """Vectorised closed form for one start point and iterate vectors js of shape (n, d)."""
    js = np.asarray(js, dtype=np.int64).reshape(-1, A.d)
    y = np.asarray(y, dtype=float)
    per = A.central_period
    yd = np.broadcast_to(y, (js.shape[0], A.g)).copy()
    zd = np.full(js.shape[0], float(z))
    for i in range(A.d):
        yd += _numerics.frac_mul(A.rho[i][None, :], js[:, i:i + 1])
        zd += _int_times(A.tau[i], js[:, i], per)
        zd += _int_times(A.v[i] @ y, js[:, i], per)
        zd += _int_times(A.v[i] @ A.rho[i], _binom2(js[:, i]), per)
        for k in range(i + 1, A.d):
            zd += _int_times(A.v[k] @ A.rho[i], js[:, i] * js[:, k], per)
    return _numerics.frac(yd), _numerics.mod(zd, per)


def iterate_literal(A, p, i, steps):
    """Orbit p, A_i p, ..., A_i^steps p by repeated composition.

    The lifted y = y0 + s rho_i is accumulated with Kahan compensation
    and split into a reduced part and an integer part; the z-increments
    tau_i + v_i . y are formed from those pieces, reduced, and summed
    with compensation, so round-off does not drift over long orbits.
    """
    y0, z0 = p
    y0 = np.array(y0, dtype=float, ndmin=1)
    per = A.central_period
    ys = np.empty((steps + 1, A.g))
    zs = np.empty(steps + 1)
    yacc = _numerics.KahanAccumulator(y0)
    zacc = _numerics.KahanAccumulator(float(z0))
    ys[0], zs[0] = _numerics.frac(y0), _numerics.mod(z0, per)
    for s in range(1, steps + 1):
        ylift = yacc.total - yacc._c
        whole = np.floor(ylift)
        yred = ylift - whole
        inc = A.tau[i] + float(A.v[i] @ yred)
        inc += float(np.sum(_int_times(A.v[i], whole.astype(np.int64), per)))
        zacc.add(_numerics.mod(inc, per))
        yacc.add(A.rho[i])
        ys[s] = _numerics.frac(yacc.total - yacc._c)
        zs[s] = _numerics.mod(zacc.total - zacc._c, per)
    return ys, zs


def numeric_first_return(alpha, p, i, t_max=None):
    """First return of the X_i^alpha flow from a section point, found by root bracketing.

    Returns (time, section point). Used as an independent oracle for
    ``return_map``.
    """
    from scipy.optimize import brentq

    frame = as_frame(alpha)
    y, z = p
    xi = GroupElement(np.zeros(frame.g), y, z)
    rate = frame.x_part[:, i]
    if not np.any(rate):
        raise DegenerateFrameError(f"generator {i} does not move the x-coordinates")
    k = int(np.argmax(np.abs(rate)))
    target = np.sign(rate[k])
    t_hi = t_max or 2.0 / abs(rate[k])

    def crossing(t):
        x = np.zeros(frame.g)
        x[i] = t
        ab = frame.x_block[:, : frame.g] @ x
        return ab[k] - target

    t = brentq(crossing, 0.0, t_hi, xtol=1e-14, rtol=1e-15)
    ab = frame.x_block[:, i] * t
    if np.max(np.abs(ab[: frame.g] - np.round(ab[: frame.g]))) > 1e-9:
        raise DegenerateFrameError("flow crossing is not a return to the transverse torus")
    # land without re-reducing: the crossing sits on the window boundary, so
    # strip the integer x-part with a lattice element and project directly
    x = np.zeros(frame.g)
    x[i] = t
    landed = exp_map(generator_sum(frame, x)) * xi
    landed = landed * GroupElement(-np.round(landed.x), np.zeros(frame.g), 0.0)
    ys, zs = _section_arrays(frame, landed.x, landed.y, np.float64(landed.z))
    return t, (ys, float(zs))


def return_time(alpha, xi, t_x, y_x=None):
    """Return-time vector t(xi) = D t_x + C (y - y_x) from the blocks of alpha."""
    alpha = as_symplectic(alpha)
    if abs(np.linalg.det(alpha.A)) < 1e-14:
        raise DegenerateFrameError("det A = 0: the section is not transverse")
    y, _ = xi
    y = np.array(y, dtype=float, ndmin=1)
    t_x = np.array(t_x, dtype=float, ndmin=1)
    y_x = np.zeros(alpha.g) if y_x is None else np.array(y_x, dtype=float, ndmin=1)
    if y.shape != (alpha.g,) or t_x.shape != (alpha.g,) or y_x.shape != (alpha.g,):
        raise InvalidArgumentError("y, t_x and y_x must have length g")
    return alpha.D @ t_x + alpha.C @ (y - y_x)


def vertex_decomposition(T1, T2):
    """The 2^d sub-rectangles of U(T1 + T2): (offset, sides) pairs."""
    T1 = np.array(T1, dtype=float, ndmin=1)
    T2 = np.array(T2, dtype=float, ndmin=1)
    out = []
    for mask in np.ndindex(*([2] * T1.size)):
        mask = np.array(mask, dtype=bool)
        out.append((np.where(mask, T1, 0.0), np.where(mask, T2, T1)))
    return out


def cocycle_sum(alpha, m, T1, T2, f, quad=None):
    """sum over vertices of the integral over the sub-rectangle P_offset m + U(sides)."""
    frame = as_frame(alpha)
    total = []
    for off, sides in vertex_decomposition(T1, T2):
        base = flow(frame, m, off) if np.any(off) else m
        total.append(birkhoff_integral(frame, base, sides, f, quad))
    return _numerics.complex_fsum(total)
