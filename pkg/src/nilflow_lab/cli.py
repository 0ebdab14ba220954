"""Command line front end: ``nilflow-lab run|check|presets``.

Config files are line oriented::

    # comment
    [experiment]
    kind = theta            # heights | dc | birkhoff | return-map | obstruction | theta | limit-dist | chi
    g = 1
    d = 1
    alpha = identity        # identity | golden | random(SEED) | [[...], ...] matrix literal
    seed = 0

    [params]
    Q = [[0.0]]
    N = 100

    [output]
    dir = out
    name = theta

Values are Python literals (numbers, lists, tuples, complex numbers);
anything that is not a literal is taken as a bare string.
"""

import argparse
import ast
import csv
import io
import json
import math
import re
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from . import dynamics, experiments, spectral, symplectic
from .errors import (
    BudgetExceededError,
    DegenerateFrameError,
    InvalidArgumentError,
    NilflowError,
    ToleranceNotMetError,
    TruncationInsufficientError,
)
from .heisenberg import GroupElement

SCHEMA_VERSION = 1
KINDS = ("heights", "dc", "birkhoff", "return-map", "obstruction", "theta", "limit-dist", "chi")

EXPERIMENT_KEYS = {
    "kind": None,
    "g": 1,
    "d": 1,
    "alpha": "identity",
    "seed": 0,
    "threads": 1,
    "depth": 8,
}

# kind -> {key: default}; None means required
PARAM_DEFAULTS = {
    "heights": {"t_max": 5.0, "samples": 51},
    "dc": {"cutoffs": [10.0], "step": 0.05},
    "birkhoff": {"T": None, "basepoint": None, "terms": None},
    "return-map": {},
    "obstruction": {"label": None, "J": 3},
    "theta": {"Q": None, "l": None, "N": None, "samples": 1},
    "limit-dist": {"T": [[10.0], [100.0], [1000.0]], "samples": 100, "terms": None},
    "chi": {"u_max": 20.0, "points": 201},
}
OUTPUT_KEYS = {"dir": ".", "name": None}


class ConfigError(Exception):
    """Validation failure; ``errors`` is a list of (line, message)."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__(self.one_line())

    def one_line(self):
        return "; ".join(f"line {ln}: {msg}" if ln else msg for ln, msg in self.errors)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    g: int = 1
    d: int = 1
    alpha: object = "identity"
    seed: int = 0
    threads: int = 1
    depth: int = 8
    params: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)


def _parse_value(raw):
    raw = raw.strip()
    try:
        return ast.literal_eval(raw)
    except (ValueError, SyntaxError, MemoryError, RecursionError):
        return raw


_SECTION = re.compile(r"^\[([A-Za-z_-]+)\]$")


def _tokenize(text):
    """Yield (line number, section, key, value, raw) for every assignment."""
    errors = []
    entries = []
    section = None
    for ln, line in enumerate(text.splitlines(), start=1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        mt = _SECTION.match(s)
        if mt:
            section = mt.group(1).lower()
            if section not in ("experiment", "params", "output"):
                errors.append((ln, f"unknown section [{section}]"))
            continue
        if "=" not in s:
            errors.append((ln, f"expected 'key = value', got {s!r}"))
            continue
        key, raw = (p.strip() for p in s.split("=", 1))
        if not key:
            errors.append((ln, "empty key"))
            continue
        if section is None:
            errors.append((ln, f"key {key!r} appears before any [section]"))
            continue
        entries.append((ln, section, key, _parse_value(raw)))
    return entries, errors


def _is_int(v):
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool)


def _is_num(v):
    return _is_int(v) or isinstance(v, float)


def parse_config(text):
    """Parse and validate a config document; raises ConfigError with all problems."""
    entries, errors = _tokenize(text)
    exp, params, out = {}, {}, {}
    lines = {}
    for ln, section, key, val in entries:
        target = {"experiment": exp, "params": params, "output": out}.get(section)
        if target is None:
            continue
        if key in target:
            errors.append((ln, f"duplicate key {key!r}"))
        target[key] = val
        lines[(section, key)] = ln
    for key in exp:
        if key not in EXPERIMENT_KEYS:
            errors.append((lines[("experiment", key)], f"unknown key {key!r} in [experiment]"))
    for key in out:
        if key not in OUTPUT_KEYS:
            errors.append((lines[("output", key)], f"unknown key {key!r} in [output]"))
    kind = exp.get("kind")
    if kind is None:
        errors.append((0, "missing required key 'kind' in [experiment]"))
        raise ConfigError(errors)
    if kind not in KINDS:
        errors.append((lines[("experiment", "kind")], f"kind must be one of {', '.join(KINDS)}; got {kind!r}"))
        raise ConfigError(errors)
    where = lambda sec, key: lines.get((sec, key), 0)
    full = {k: exp.get(k, v) for k, v in EXPERIMENT_KEYS.items()}
    for key in ("g", "d", "seed", "threads", "depth"):
        if not _is_int(full[key]):
            errors.append((where("experiment", key), f"{key} must be an integer, got {full[key]!r}"))
    typed = all(_is_int(full[k]) for k in ("g", "d", "seed", "threads", "depth"))
    if typed:
        if full["g"] < 1:
            errors.append((where("experiment", "g"), "g must be >= 1"))
        if not 1 <= full["d"] <= max(full["g"], 1):
            errors.append((where("experiment", "d"), f"range violation: d = {full['d']} must satisfy 1 <= d <= g = {full['g']}"))
        if full["threads"] < 1:
            errors.append((where("experiment", "threads"), "threads must be >= 1"))
        if full["depth"] < 0:
            errors.append((where("experiment", "depth"), "depth must be >= 0"))
        if full["seed"] < 0 or full["seed"] >= 2 ** 64:
            errors.append((where("experiment", "seed"), "seed must be a 64-bit unsigned integer"))
    alpha_err = _check_alpha(full["alpha"], full["g"] if _is_int(full["g"]) else 1)
    if alpha_err:
        errors.append((where("experiment", "alpha"), alpha_err))
    defaults = PARAM_DEFAULTS[kind]
    for key in params:
        if key not in defaults:
            errors.append((lines[("params", key)], f"unknown key {key!r} for kind {kind}"))
    merged = {}
    missing = False
    for key, default in defaults.items():
        if key in params:
            merged[key] = params[key]
        elif default is None and not _optional(kind, key):
            errors.append((0, f"missing required key {key!r} in [params] for kind {kind}"))
            missing = True
        else:
            merged[key] = default
    if typed and not missing and 1 <= full["d"] <= full["g"]:
        for key, msg in _check_params(kind, merged, full):
            errors.append((where("params", key), msg))
    output = {"dir": out.get("dir", OUTPUT_KEYS["dir"]), "name": out.get("name", kind)}
    for key in ("dir", "name"):
        if not isinstance(output[key], str):
            output[key] = str(output[key])
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(kind=kind, params=merged, output=output, **{k: full[k] for k in EXPERIMENT_KEYS if k != "kind"})


def _optional(kind, key):
    return (kind, key) in {("birkhoff", "basepoint"), ("birkhoff", "terms"), ("theta", "l"),
                           ("limit-dist", "terms")}


_RANDOM = re.compile(r"^random\((\d+)\)$")


def _check_alpha(alpha, g):
    if isinstance(alpha, str):
        if alpha in ("identity", "golden") or _RANDOM.match(alpha):
            return None
        return f"alpha must be identity, golden, random(SEED) or a matrix literal; got {alpha!r}"
    try:
        m = np.array(alpha, dtype=float)
    except (TypeError, ValueError):
        return "alpha matrix literal must be numeric"
    if m.shape != (2 * g, 2 * g):
        return f"alpha must be {2 * g}x{2 * g} for g = {g}, got shape {m.shape}"
    if not symplectic.is_symplectic(m):
        return "alpha matrix literal is not symplectic to 1e-10"
    return None


def _vector(v, length=None):
    try:
        a = np.array(v, dtype=float)
    except (TypeError, ValueError):
        return None
    if a.ndim != 1 or (length is not None and a.size != length):
        return None
    return a


def _check_terms(terms, g):
    try:
        obs = dynamics.Observable(tuple(terms))
    except (TypeError, ValueError, InvalidArgumentError) as exc:
        return f"terms must be a list of (m, n, coefficient) triples: {exc}"
    if obs.g != g:
        return f"terms have g = {obs.g}, expected g = {g}"
    return None


def _check_params(kind, p, e):
    g, d = e["g"], e["d"]
    bad = []
    if kind == "heights":
        if not _is_num(p["t_max"]) or p["t_max"] <= 0:
            bad.append(("t_max", "t_max must be > 0"))
        if not _is_int(p["samples"]) or p["samples"] < 2:
            bad.append(("samples", "samples must be an integer >= 2"))
    elif kind == "dc":
        cut = _vector(p["cutoffs"])
        if cut is None or cut.size == 0 or np.any(cut < 0):
            bad.append(("cutoffs", "cutoffs must be a non-empty list of numbers >= 0"))
        if not _is_num(p["step"]) or p["step"] <= 0:
            bad.append(("step", "step must be > 0"))
    elif kind == "birkhoff":
        T = _vector(p["T"], d)
        if T is None or np.any(T <= 0):
            bad.append(("T", f"T must be a list of {d} positive numbers"))
        if p["basepoint"] is not None:
            bp = _vector(p["basepoint"], 2 * g + 1)
            if bp is None:
                bad.append(("basepoint", f"basepoint must be a list of {2 * g + 1} numbers (x, y, z)"))
        if p["terms"] is not None:
            msg = _check_terms(p["terms"], g)
            if msg:
                bad.append(("terms", msg))
    elif kind == "obstruction":
        lab = p["label"]
        ok = isinstance(lab, (list, tuple)) and len(lab) == 2 and _vector(lab[0], g) is not None and _is_int(lab[1])
        if not ok:
            bad.append(("label", f"label must be ((m_1..m_{g}), n)"))
        if not _is_int(p["J"]) or p["J"] < 0:
            bad.append(("J", "J must be an integer >= 0"))
    elif kind == "theta":
        try:
            Q = np.array(p["Q"], dtype=float, ndmin=2)
        except (TypeError, ValueError):
            Q = None
        if Q is None or Q.shape != (g, g) or np.max(np.abs(Q - Q.T)) > 1e-12:
            bad.append(("Q", f"Q must be a symmetric {g}x{g} matrix"))
        if p["l"] is not None and _vector(p["l"], g) is None:
            bad.append(("l", f"l must be a list of {g} numbers"))
        if not _is_int(p["N"]) or p["N"] < 1:
            bad.append(("N", "N must be an integer >= 1"))
        if not _is_int(p["samples"]) or p["samples"] < 1:
            bad.append(("samples", "samples must be an integer >= 1"))
    elif kind == "limit-dist":
        try:
            experiments.TSequence(tuple(p["T"]))
            rows = [np.atleast_1d(np.array(t, dtype=float)) for t in p["T"]]
            if any(r.shape != (d,) for r in rows):
                raise InvalidArgumentError("")
        except (TypeError, ValueError, InvalidArgumentError):
            bad.append(("T", f"T must be an increasing list of positive length-{d} vectors"))
        if not _is_int(p["samples"]) or p["samples"] < 10:
            bad.append(("samples", "samples must be an integer >= 10"))
        if p["terms"] is not None:
            msg = _check_terms(p["terms"], g)
            if msg:
                bad.append(("terms", msg))
    elif kind == "chi":
        if not _is_num(p["u_max"]) or p["u_max"] <= 0:
            bad.append(("u_max", "u_max must be > 0"))
        if not _is_int(p["points"]) or p["points"] < 2:
            bad.append(("points", "points must be an integer >= 2"))
    return bad


def format_config(cfg):
    """Config document that parses back to ``cfg``."""
    lines = ["[experiment]"]
    for key in EXPERIMENT_KEYS:
        lines.append(f"{key} = {_format_value(getattr(cfg, key))}")
    lines.append("")
    lines.append("[params]")
    for key, val in cfg.params.items():
        if val is None:
            continue
        lines.append(f"{key} = {_format_value(val)}")
    lines.append("")
    lines.append("[output]")
    for key in OUTPUT_KEYS:
        lines.append(f"{key} = {_format_value(cfg.output[key])}")
    return "\n".join(lines) + "\n"


def _format_value(v):
    if isinstance(v, str):
        # bare strings only when they cannot be mistaken for a literal or comment
        if "#" in v or _parse_value(v) != v or v != v.strip():
            return repr(v)
        return v
    return repr(v)


# building library objects from a config

def resolve_alpha(alpha, g):
    if isinstance(alpha, str):
        if alpha == "identity":
            return symplectic.identity_preset(g)
        if alpha == "golden":
            return symplectic.golden_preset(g)
        return symplectic.random_preset(g, int(_RANDOM.match(alpha).group(1)))
    return symplectic.SymplecticMatrix(np.array(alpha, dtype=float))


def _default_terms(g):
    zero = (0,) * g
    return ((zero, 1, 1.0), (zero, -1, 1.0))


def _fmt(x):
    return format(float(x), ".17g")


def _run_kind(cfg):
    """Returns (header, rows, stats)."""
    p = cfg.params
    g, d = cfg.g, cfg.d
    alpha = resolve_alpha(cfg.alpha, g)
    kind = cfg.kind
    if kind == "heights":
        prof = symplectic.log_law_profile(alpha, d, float(p["t_max"]), p["samples"], depth=cfg.depth)
        t = np.array([a for a, _ in prof])
        lh = np.array([b for _, b in prof])
        slope = float(np.polyfit(t, lh, 1)[0])
        return ["t", "log_hgt"], [[a, b] for a, b in prof], {
            "fitted_slope": slope,
            "max_log_hgt": float(lh.max()),
            "roth_threshold": 2.0 * d / (g + 1),
        }
    if kind == "dc":
        rows = [[c, symplectic.dc_integral(alpha, d, float(c), float(p["step"]), cfg.depth)] for c in p["cutoffs"]]
        return ["cutoff", "dc_integral"], rows, {"last_value": rows[-1][1]}
    if kind == "birkhoff":
        f = dynamics.Observable(tuple(p["terms"])) if p["terms"] is not None else dynamics.Observable(_default_terms(g))
        if p["basepoint"] is not None:
            bp = np.array(p["basepoint"], dtype=float)
            m = GroupElement(bp[:g], bp[g:2 * g], bp[2 * g])
        else:
            m = experiments.sample_basepoint(g, cfg.seed, 0)
        val = dynamics.birkhoff_integral(alpha, m, p["T"], f)
        T = np.array(p["T"], dtype=float)
        header = [f"T_{i}" for i in range(d)] + ["re", "im"]
        return header, [list(T) + [val.real, val.imag]], {"volume": float(np.prod(T)), "abs": abs(val)}
    if kind == "return-map":
        A = dynamics.return_map(alpha, d)
        header = ["i", "t_ret", "tau"] + [f"rho_{k}" for k in range(g)] + [f"v_{k}" for k in range(g)]
        rows = [[i, A.t_ret[i], A.tau[i], *A.rho[i], *A.v[i]] for i in range(d)]
        return header, rows, {"commutation_defect": A.commutation_defect(), "K": A.K}
    if kind == "obstruction":
        A = dynamics.return_map(alpha, d)
        seed = spectral.CharacterLabel(tuple(p["label"][0]), p["label"][1], A.K)
        orb = spectral.dual_orbit(A, seed, p["J"])
        rows = []
        for lab, j in zip(orb.labels, orb.indices):
            val, displayed = spectral.invariant_distribution(A, seed, {lab: 1.0}, p["J"], with_displayed_phase=True)
            rows.append([*lab.m, lab.n, *j, val.real, val.imag, displayed.real, displayed.imag])
        header = [f"m_{k}" for k in range(g)] + ["n"] + [f"j_{i}" for i in range(d)] + ["re", "im", "displayed_re", "displayed_im"]
        gap = max(abs(complex(r[-4], r[-3]) - complex(r[-2], r[-1])) for r in rows)
        return header, rows, {"orbit_size": len(orb), "max_gap_to_displayed_phase": gap}
    if kind == "theta":
        Q = np.array(p["Q"], dtype=float, ndmin=2)
        if p["l"] is not None or p["samples"] == 1:
            l = np.zeros(g) if p["l"] is None else np.array(p["l"], dtype=float)
            val = experiments.theta_sum(experiments.ThetaParams(Q, l, p["N"]))
            return ["N", "re", "im", "abs"], [[p["N"], val.real, val.imag, abs(val)]], {"abs": abs(val)}
        summary, vals = experiments.theta_distribution(Q, p["N"], p["samples"], cfg.seed)
        rows = [[i, v] for i, v in enumerate(vals)]
        return ["sample", "abs"], rows, summary.as_dict()
    if kind == "limit-dist":
        f = dynamics.Observable(tuple(p["terms"])) if p["terms"] is not None else dynamics.Observable(_default_terms(g))
        Ts = experiments.TSequence(tuple(p["T"]))
        summaries, vals = experiments.limit_distribution_experiment(
            alpha, f, Ts, p["samples"], cfg.seed, threads=cfg.threads, return_samples=True
        )
        header = ["sample", "t_index"] + [f"T_{i}" for i in range(d)] + ["re", "im"]
        rows = []
        for i in range(vals.shape[0]):
            for k, T in enumerate(Ts):
                rows.append([i, k, *T, vals[i, k].real, vals[i, k].imag])
        return header, rows, {"summaries": [s.as_dict() for s in summaries]}
    if kind == "chi":
        u = np.linspace(-float(p["u_max"]), float(p["u_max"]), p["points"])
        vals = spectral.chi_modular(np.repeat(u[:, None], d, axis=1))
        rows = [[a, v.real, v.imag, abs(v) ** 2] for a, v in zip(u, vals)]
        return ["u", "re", "im", "abs2"], rows, {"l2_norm_sq": spectral.chi_l2_norm_sq(d), "target": (2 * math.pi) ** d}
    raise InvalidArgumentError(f"unhandled kind {kind}")


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([str(int(v)) if _is_int(v) else _fmt(v) for v in row])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def run(cfg, out_dir=None):
    """Run one experiment; returns (exit code, message). Writes <name>.csv and <name>.json."""
    start = time.perf_counter()
    try:
        header, rows, stats = _run_kind(cfg)
    except (InvalidArgumentError, DegenerateFrameError) as exc:
        return 2, f"validation error: {exc}"
    except (BudgetExceededError, ToleranceNotMetError, TruncationInsufficientError) as exc:
        return 3, f"budget or tolerance error: {exc}"
    except NilflowError as exc:
        return 3, f"numerical error: {exc}"
    wall = time.perf_counter() - start
    target = Path(out_dir if out_dir is not None else cfg.output["dir"])
    name = cfg.output["name"]
    summary = {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "kind": cfg.kind,
        "seed": cfg.seed,
        "config": format_config(cfg),
        "stats": _jsonable(stats),
        "rows": len(rows),
        "wall_time_s": wall,
    }
    try:
        target.mkdir(parents=True, exist_ok=True)
        (target / f"{name}.csv").write_text(_csv_text(header, rows), encoding="utf-8")
        (target / f"{name}.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        return 4, f"cannot write output to {target}: {exc.strerror or exc}"
    return 0, str(target / f"{name}.csv")


def _load(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError([(0, f"cannot read config {path}: {exc}")])
    return parse_config(text)


def _fail(code, msg):
    print(f"nilflow-lab: {' '.join(str(msg).split())}", file=sys.stderr)
    return code


def main(argv=None):
    ap = argparse.ArgumentParser(prog="nilflow-lab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    pr = sub.add_parser("run", help="run an experiment config")
    pr.add_argument("config")
    pr.add_argument("--out", help="output directory (overrides [output] dir)")
    pr.add_argument("--threads", type=int, help="worker threads (overrides config)")
    pr.add_argument("--seed", type=int, help="random seed (overrides config)")
    pc = sub.add_parser("check", help="validate a config without running it")
    pc.add_argument("config")
    sub.add_parser("presets", help="list named alpha presets")
    args = ap.parse_args(argv)

    if args.command == "presets":
        for name, desc in symplectic.PRESETS.items():
            print(f"{name}\t{desc}")
        return 0
    try:
        cfg = _load(args.config)
    except ConfigError as exc:
        return _fail(2, exc.one_line())
    if args.command == "check":
        print("ok")
        return 0
    changes = {}
    if args.threads is not None:
        if args.threads < 1:
            return _fail(2, "--threads must be >= 1")
        changes["threads"] = args.threads
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            return _fail(2, "--seed must be a 64-bit unsigned integer")
        changes["seed"] = args.seed
    if changes:
        cfg = replace(cfg, **changes)
    code, msg = run(cfg, args.out)
    if code:
        return _fail(code, msg)
    print(msg)
    return 0


if __name__ == "__main__":
    sys.exit(main())
