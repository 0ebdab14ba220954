"""Acceptance criteria 1 to 10, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py`` (the lines are printed even
when output capture is on) or directly with ``python tests/test_acceptance.py``.
"""

import math
import sys
import time

import numpy as np
import pytest

from nilflow_lab import cli
from nilflow_lab import dynamics as dy
from nilflow_lab import experiments as ex
from nilflow_lab import heisenberg as h
from nilflow_lab import spectral as spc
from nilflow_lab import symplectic as sp
from nilflow_lab.dynamics import Observable
from nilflow_lab.heisenberg import GroupElement, LieAlgebraVector
from nilflow_lab.spectral import CharacterLabel, TestFunction

PHI = (1 + math.sqrt(5)) / 2


class Report:
    def __init__(self, number, title, limit_s):
        self.number, self.title, self.limit_s = number, title, limit_s
        self.checks = []

    def check(self, name, ok, detail=""):
        self.checks.append((name, bool(ok), detail))

    def line(self, elapsed):
        ok = all(c[1] for c in self.checks) and elapsed < self.limit_s
        failed = [f"{n} ({d})" for n, good, d in self.checks if not good]
        if elapsed >= self.limit_s:
            failed.append(f"runtime {elapsed:.1f}s over {self.limit_s}s")
        details = "; ".join(d for _, _, d in self.checks if d)
        status = "PASS" if ok else "FAIL"
        text = f"[{status}] criterion {self.number:2d} {self.title}: {details} [{elapsed:.2f}s < {self.limit_s}s]"
        if failed:
            text += " FAILED: " + "; ".join(failed)
        return ok, text


def emit(text, capsys=None):
    if capsys is not None:
        with capsys.disabled():
            print("\n" + text)
    else:
        print(text)


def run_criterion(fn, capsys=None):
    rep = fn.__report__()
    start = time.perf_counter()
    fn(rep)
    ok, text = rep.line(time.perf_counter() - start)
    emit(text, capsys)
    return ok, text


def criterion(number, title, limit_s):
    def wrap(fn):
        fn.__report__ = lambda: Report(number, title, limit_s)
        return fn
    return wrap


def rand_vec(rng, g):
    return LieAlgebraVector(rng.uniform(-2, 2, g), rng.uniform(-2, 2, g), rng.uniform(-2, 2))


def rand_elem(rng, g):
    return GroupElement(rng.uniform(-3, 3, g), rng.uniform(-3, 3, g), rng.uniform(-3, 3))


@criterion(1, "group exactness", 1.0)
def c1(rep):
    rng = np.random.default_rng(1)
    bch = assoc = inv = 0.0
    for k in range(1000):
        g = 1 + k % 3
        bch = max(bch, h.bch_check(rand_vec(rng, g), rand_vec(rng, g)))
        a, b, c = rand_elem(rng, g), rand_elem(rng, g), rand_elem(rng, g)
        assoc = max(assoc, float(np.max(np.abs(((a * b) * c).as_array() - (a * (b * c)).as_array()))))
        e = GroupElement.identity(g)
        inv = max(inv, float(np.max(np.abs((a * h.inverse(a)).as_array() - e.as_array()))),
                  float(np.max(np.abs((h.inverse(a) * a).as_array() - e.as_array()))))
    rep.check("BCH", bch <= 1e-12, f"max BCH residual {bch:.1e}")
    rep.check("associativity", assoc <= 1e-12, f"associativity {assoc:.1e}")
    rep.check("inverse", inv <= 1e-12, f"inverse {inv:.1e}")


@criterion(2, "height correctness", 30.0)
def c2(rep):
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(1000):
        z = complex(rng.uniform(-2, 2), rng.uniform(0.05, 20))
        exact = sp.max_height([[z]])
        found = sp.word_search_max_height(sp.SiegelPoint([[z]]), depth=14)
        worst = max(worst, abs(exact - found) / exact)
    rep.check("reduction vs word search", worst <= 1e-9, f"g=1 reduction vs depth-14 search {worst:.1e}")
    violations, ratio = 0, 0.0
    for k in range(1000):
        alpha = sp.random_preset(1, 20_000 + k)
        t = rng.uniform(0, 3, 1)
        lhs = sp.renormalized_height(alpha, t)
        rhs = math.exp(2 * t.sum()) * sp.max_height(sp.siegel_point(alpha))
        ratio = max(ratio, lhs / rhs)
        violations += lhs > rhs * (1 + 1e-6)
    rep.check("scaling inequality", violations == 0, f"{violations} violations in 1000 pairs (max ratio {ratio:.3f})")


@criterion(3, "renormalization identity", 30.0)
def c3(rep):
    rng = np.random.default_rng(3)
    f = Observable((([1], 0, 1.0), ([2], 1, 0.5 - 0.25j), ([-3], -2, 0.3)))
    worst = 0.0
    for k in range(50):
        alpha = sp.random_preset(1, 300 + k)
        m = GroupElement(rng.random(1), rng.random(1), 0.5 * rng.random())
        T = np.exp(rng.uniform(0, 3, 1))
        t = rng.uniform(-1.5, 1.5, 1)
        lhs = dy.birkhoff_integral(sp.renormalize(alpha, t), m, T, f)
        rhs = math.exp(t.sum()) * dy.birkhoff_integral(alpha, m, np.exp(-t) * T, f)
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), 1e-12))
    rep.check("identity", worst <= 1e-8, f"50 cases, max relative deviation {worst:.1e}")


@criterion(4, "skew-shift closed form vs literal iteration", 1.0)
def c4(rep):
    A = dy.return_map(sp.golden_preset(1), 1)
    p = ([0.123456789], 0.3141592653)
    ys, zs = dy.iterate_literal(A, p, 0, 10_000)
    cy, cz = dy.skew_iterate_many(A, p[0], p[1], np.arange(10_001)[:, None])
    from nilflow_lab._numerics import circle_distance

    worst = max(float(np.max(circle_distance(ys, cy, 1.0))), float(np.max(circle_distance(zs, cz, A.central_period))))
    rep.check("agreement", worst <= 1e-9, f"10^4 iterates, max disagreement {worst:.1e}")


@criterion(5, "obstruction calculus", 5.0)
def c5(rep):
    rng = np.random.default_rng(5)
    cob, phase_err, mod_err, off = 0.0, 0.0, 0.0, 0
    for A in (dy.return_map(sp.golden_preset(1), 1), dy.return_map(sp.golden_preset(2), 2),
              dy.return_map(sp.random_preset(1, 77), 1)):
        seed = CharacterLabel(tuple(rng.integers(-3, 4, A.g)), 1)
        orb = spc.dual_orbit(A, seed, 4)
        phis = [{lab: complex(*rng.normal(size=2)) for lab, j in zip(orb.labels, orb.indices) if np.max(np.abs(j)) <= 3}
                for _ in range(A.d)]
        cob = max(cob, abs(spc.invariant_distribution(A, seed, spc.coboundary(A, phis), 4)))
        for lab, j in zip(orb.labels, orb.indices):
            if np.any(j < 0):
                continue
            val = spc.invariant_distribution(A, seed, {lab: 1.0}, 4)
            # literal composition: e_seed(A^j p) / e_lab(p) at a random p
            p = (rng.random(A.g), A.central_period * rng.random())
            q = p
            for i in reversed(range(A.d)):
                for _ in range(int(j[i])):
                    q = A.apply(q, i)
            c = complex(spc.character_eval(seed, q) / spc.character_eval(lab, p))
            phase_err = max(phase_err, abs(val - np.conj(c)))
            mod_err = max(mod_err, abs(abs(val) - 1))
        for bad in (CharacterLabel(tuple(np.array(seed.m) + 1), 1), CharacterLabel(seed.m, 2), CharacterLabel(seed.m, 0)):
            off += spc.invariant_distribution(A, seed, {bad: 1.0}, 4) != 0
    rep.check("coboundaries", cob <= 1e-10, f"coboundary residual {cob:.1e}")
    rep.check("phases", phase_err <= 1e-10, f"phase error {phase_err:.1e}")
    rep.check("unit modulus", mod_err <= 1e-10, f"modulus error {mod_err:.1e}")
    rep.check("off orbit", off == 0, f"{off} nonzero off-orbit values")


@criterion(6, "chi/theta suite", 30.0)
def c6(rep):
    chi = abs(spc.chi_l2_norm_sq(1) - 2 * math.pi)
    rep.check("chi norm", chi <= 1e-6, f"|chi|^2 - 2pi = {chi:.1e}")
    theta = max(abs(spc.theta_field_norm_sq([t]) - spc.theta_field_norm_sq([1.0])) for t in (0.5, 2.0, 10.0, 100.0, 1000.0))
    rep.check("theta norm", theta <= 1e-6, f"theta norm spread {theta:.1e}")
    f = TestFunction.from_callable(lambda x: np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi), -12.0, 12.0, 0.01, 1e-15)
    errs = spc.l2_convergence_check(f, [[10.0], [100.0], [1000.0]])
    rep.check("decreasing", errs[0] > errs[1] > errs[2], "errors " + ", ".join(f"{e:.4f}" for e in errs))
    rep.check("small at 1e3", errs[2] < 0.05)


@criterion(7, "theta sums", 60.0)
def c7(rep):
    exact = ex.theta_sum(ex.ThetaParams([[0.0]], [0.0], 100))
    rep.check("Q = 0", exact == 10.1, f"Q=0 N=100 gives {exact.real!r}")
    alt = max(abs(ex.theta_sum(ex.ThetaParams([[0.5]], [0.0], N)) - (1 / math.sqrt(N) if N % 2 == 0 else 0.0))
              for N in (99, 100, 1001, 1000))
    rep.check("alternating", alt <= 1e-14, f"alternating error {alt:.1e}")
    a, _ = ex.theta_distribution([[PHI / 2]], 10**4, 1000, seed=0)
    b, _ = ex.theta_distribution([[PHI / 2]], 10**5, 1000, seed=0)
    change = abs(b.support_radius - a.support_radius) / a.support_radius
    rep.check("support radius", change < 0.1,
              f"support radius {a.support_radius:.3f} -> {b.support_radius:.3f} ({100 * change:.1f}%)")


@criterion(8, "cocycle additivity", 10.0)
def c8(rep):
    rng = np.random.default_rng(8)
    f = Observable((([1, 0], 0, 1.0), ([0, 1], 1, 0.5), ([1, -1], -1, 0.25j)))
    worst = 0.0
    for alpha in (sp.golden_preset(2), sp.random_preset(2, 1), sp.random_preset(2, 2)):
        for d in (1, 2):
            for _ in range(3):
                m = GroupElement(rng.random(2), rng.random(2), 0.5 * rng.random())
                T1, T2 = rng.uniform(0.5, 4, d), rng.uniform(0.5, 4, d)
                whole = dy.birkhoff_integral(alpha, m, T1 + T2, f)
                worst = max(worst, abs(whole - dy.cocycle_sum(alpha, m, T1, T2, f)) / max(1.0, abs(whole)))
    rep.check("additivity", worst <= 1e-8, f"d in {{1,2}}, max deviation {worst:.1e}")


@criterion(9, "limit distribution experiment", 300.0)
def c9(rep):
    f = Observable((([1], 0, 1.0), ([0], 1, 1.0)))
    Ts = [[10.0], [100.0], [1000.0], [10000.0]]
    s = ex.limit_distribution_experiment(sp.golden_preset(1), f, Ts, 1000, seed=42)
    means_ok = all(abs(x.mean) <= 3 * x.standard_error for x in s)
    rep.check("means", means_ok, "mean/SE " + ", ".join(f"{x.mean / x.standard_error:+.2f}" for x in s))
    var = abs(s[3].variance - s[2].variance) / s[2].variance
    rep.check("variance", var < 0.1, f"variance change {100 * var:.1f}%")
    sup = (s[3].support_radius - s[2].support_radius) / s[2].support_radius
    rep.check("support", sup < 0.1, f"support growth {100 * sup:.1f}%")


@criterion(10, "determinism", 30.0)
def c10(rep, tmp=None):
    import tempfile
    from pathlib import Path

    texts = [
        "[experiment]\nkind = limit-dist\nalpha = golden\nseed = 42\n[params]\nT = [[10.0], [100.0]]\nsamples = 50\n",
        "[experiment]\nkind = theta\nseed = 3\n[params]\nQ = [[0.8090169943749475]]\nN = 1000\nsamples = 20\n",
        "[experiment]\nkind = heights\nalpha = random(4)\n[params]\nt_max = 4.0\nsamples = 9\n",
    ]
    same = 0
    with tempfile.TemporaryDirectory() as td:
        for k, text in enumerate(texts):
            cfg = cli.parse_config(text)
            outs = []
            for rerun in range(2):
                d = Path(td) / f"{k}-{rerun}"
                cli.run(cfg, d)
                outs.append((d / f"{cfg.output['name']}.csv").read_bytes())
            same += outs[0] == outs[1]
    rep.check("byte identical", same == len(texts), f"{same}/{len(texts)} configs byte-identical on rerun")


CRITERIA = [c1, c2, c3, c4, c5, c6, c7, c8, c9, c10]


@pytest.mark.parametrize("fn", CRITERIA, ids=[f"criterion_{k}" for k in range(1, 11)])
def test_acceptance(fn, capsys):
    ok, text = run_criterion(fn, capsys)
    assert ok, text


if __name__ == "__main__":
    results = [run_criterion(fn)[0] for fn in CRITERIA]
    sys.exit(0 if all(results) else 1)
