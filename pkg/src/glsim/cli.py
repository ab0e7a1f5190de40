"""Command line front end: ``glsim simulate | experiment | check``.

Configuration is a JSON document with the sections ``domain``, ``params``,
``scheme``, ``feedback``, ``initial``, ``output`` and ``experiment``; every
section and key is optional and missing entries take the defaults in
:data:`DEFAULTS`. Unknown keys are rejected and all problems are reported
together.
"""

import argparse
import copy
import json
import logging
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from . import experiments as exps
from .diagnostics import CSV_COLUMNS, decay_rate_fit
from .errors import ConfigError, InsufficientData, NumericalFailure, ParseError, ValidationError
from .geometry import SPHERE_MEASURE, build_grid, geometric_condition_check
from .model import (ModelParams, assumption_check, compatibility_residual, compile_profile, custom_feedback,
                    identity_feedback, saturating_feedback)
from .stepper import SchemeConfig, incompatible_data, run

log = logging.getLogger("glsim")

JSON_SCHEMA = exps.REPORT_SCHEMA

DEFAULTS = {
    "domain": {"N": 1, "r0": 0.0, "r1": 1.0, "M": 128},
    "params": {"lambda": 1.0, "alpha": 1.0, "kappa": 0.0, "beta": 0.0, "gamma": 0.0, "p": 3.0},
    "scheme": {"bc_variant": "dynamic", "dt": 1e-3, "T": 1.0, "boundary_order": 2, "nonlinear_treatment": "ab2"},
    "feedback": {"family": "identity", "m": 1.0, "M": 1.0, "phi": None},
    "initial": {"family": None, "parameters": {}, "seed": 0, "noise": 0.0},
    "output": {"csv_path": None, "json_path": None, "sample_stride": 1},
    "experiment": {},
}

INITIAL_PARAMETERS = {
    "bump": {"amplitude": 1.0, "center": 0.45, "width": 0.35},
    "hump": {"amplitude": 1.0, "power": 3.0},
    "mode": {"k": 1.0, "amplitude": 1.0},
    "file": {"path": None},
}

EXPERIMENT_OPTIONS = {
    "linear": {"T_long", "forced_T"},
    "stabilization": {"gamma_values", "window", "bound_tol", "max_workers"},
    "inviscid": {"epsilon_list", "slope_range", "max_workers"},
    "equivalence": {"levels", "min_order", "max_workers"},
    "manufactured": {"levels", "k", "amplitude", "min_order", "max_workers"},
    "energy": {"levels", "min_order", "max_workers"},
}

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


@dataclass
class RunConfig:
    """Validated configuration with every default filled in."""

    domain: dict
    params: dict
    scheme: dict
    feedback: dict
    initial: dict
    output: dict
    experiment: dict

    def to_dict(self):
        return {k: copy.deepcopy(getattr(self, k)) for k in DEFAULTS}

    def grid(self):
        d = self.domain
        return build_grid(d["N"], d["r0"], d["r1"], d["M"])

    def model(self):
        p = self.params
        return ModelParams(lam=p["lambda"], alpha=p["alpha"], kappa=p["kappa"], beta=p["beta"],
                           gamma=p["gamma"], p=p["p"], N=self.domain["N"])

    def feedback_spec(self):
        fb = self.feedback
        if fb["family"] == "identity":
            return identity_feedback()
        if fb["family"] == "saturating":
            return saturating_feedback(fb["m"], fb["M"])
        return custom_feedback(fb["phi"], fb["m"], fb["M"])

    def scheme_config(self):
        s = self.scheme
        return SchemeConfig(dt=s["dt"], T=s["T"], bc_variant=s["bc_variant"], boundary_order=s["boundary_order"],
                            nonlinear_treatment=s["nonlinear_treatment"], feedback=self.feedback_spec())

    def initial_factory(self, default="bump"):
        """Callable ``(grid, params) -> field`` for the configured initial data."""
        ini = self.initial
        family = ini["family"] or default
        par = {**INITIAL_PARAMETERS[family], **ini["parameters"]}
        noise, seed = ini["noise"], ini["seed"]

        def make(grid, params):
            if family == "bump":
                u = exps.bump_initial(grid, par["amplitude"], par["center"], par["width"])
            elif family == "hump":
                u = exps.hump_initial(grid, par["amplitude"], par["power"])
            elif family == "mode":
                u = exps.mode_initial(grid, par["k"], par["amplitude"])
            else:
                u = load_field(par["path"], grid)
            if noise:
                u = u + exps.random_compatible(grid, params, seed, scale=noise)
            return u

        return make

    def initial_field(self, grid, params, default="bump"):
        return self.initial_factory(default)(grid, params)


def load_field(path, grid):
    """Read initial data from ``.npy`` or a JSON list of numbers / [re, im] pairs."""
    path = Path(path)
    try:
        if path.suffix == ".npy":
            data = np.load(path)
        else:
            raw = json.loads(path.read_text())
            data = np.array([complex(*v) if isinstance(v, list) else complex(v) for v in raw])
    except (OSError, ValueError, TypeError) as exc:
        raise ValidationError([("initial.parameters.path", f"cannot read {path}: {exc}")]) from exc
    data = np.asarray(data, dtype=complex)
    if data.shape != (grid.size,):
        raise ValidationError([("initial.parameters.path", f"field has shape {data.shape}, grid needs {grid.size}")])
    return data


# -- validation ---------------------------------------------------------------------


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


class _Collector:
    def __init__(self):
        self.problems = []

    def add(self, key, msg):
        self.problems.append((key, msg))


def _merge(defaults, given, prefix, col):
    out = copy.deepcopy(defaults)
    if not isinstance(given, dict):
        col.add(prefix, f"must be an object, got {type(given).__name__}")
        return out
    for k, v in given.items():
        if k not in defaults:
            col.add(f"{prefix}.{k}", "unknown key")
        else:
            out[k] = v
    return out


def _check_domain(d, col):
    N = d["N"]
    if not isinstance(N, int) or isinstance(N, bool) or N not in SPHERE_MEASURE:
        col.add("domain.N", f"must be 1, 2 or 3, got {N!r}")
        N = None
    r0, r1 = d["r0"], d["r1"]
    ok0, ok1 = _is_number(r0), _is_number(r1)
    if not ok0 or r0 < 0:
        col.add("domain.r0", f"must be a number >= 0, got {r0!r}")
    elif N is not None and N >= 2 and r0 == 0:
        col.add("domain.r0", f"N={N} needs an annulus: r0 must be > 0")
    if not ok1:
        col.add("domain.r1", f"must be a finite number, got {r1!r}")
    elif ok0 and r1 <= r0:
        col.add("domain.r1", f"must exceed r0={r0}")
    M = d["M"]
    if not isinstance(M, int) or isinstance(M, bool) or M < 4:
        col.add("domain.M", f"must be an integer >= 4, got {M!r}")


def _check_params(p, col):
    checks = {
        "lambda": (lambda v: v >= 0, "must be >= 0"),
        "alpha": (lambda v: v > 0, "must be > 0 (the dispersive coefficient is required to be positive)"),
        "kappa": (lambda v: v >= 0, "must be >= 0"),
        "beta": (None, None),
        "gamma": (None, None),
        "p": (lambda v: v >= 2, "must be >= 2"),
    }
    for key, (cond, msg) in checks.items():
        v = p[key]
        if not _is_number(v):
            col.add(f"params.{key}", f"must be a finite number, got {v!r}")
        elif cond is not None and not cond(v):
            col.add(f"params.{key}", f"{msg}, got {v!r}")


def _check_scheme(s, col):
    if s["bc_variant"] not in ("dynamic", "wentzell"):
        col.add("scheme.bc_variant", f"must be 'dynamic' or 'wentzell', got {s['bc_variant']!r}")
    dt, T = s["dt"], s["T"]
    if not _is_number(dt) or dt <= 0:
        col.add("scheme.dt", f"must be a number > 0, got {dt!r}")
    if not _is_number(T) or T <= 0:
        col.add("scheme.T", f"must be a number > 0, got {T!r}")
    elif _is_number(dt) and dt > 0 and T < dt:
        col.add("scheme.T", f"must be >= dt={dt}")
    if s["boundary_order"] not in (1, 2) or isinstance(s["boundary_order"], bool):
        col.add("scheme.boundary_order", f"must be 1 or 2, got {s['boundary_order']!r}")
    if s["nonlinear_treatment"] not in ("ab2", "picard1"):
        col.add("scheme.nonlinear_treatment", f"must be 'ab2' or 'picard1', got {s['nonlinear_treatment']!r}")


def _check_feedback(fb, col):
    fam = fb["family"]
    if fam not in ("identity", "saturating", "custom"):
        col.add("feedback.family", f"must be identity, saturating or custom, got {fam!r}")
        return
    if fam == "identity":
        return
    m, M = fb["m"], fb["M"]
    if not _is_number(m) or m <= 0:
        col.add("feedback.m", f"must be a number > 0, got {m!r}")
    if not _is_number(M):
        col.add("feedback.M", f"must be a finite number, got {M!r}")
    elif _is_number(m) and M < m:
        col.add("feedback.M", f"must be >= m={m}")
    if fam == "custom":
        if not isinstance(fb["phi"], str):
            col.add("feedback.phi", "custom feedback needs an expression in s, e.g. \"1 + 1/(1+s)\"")
        else:
            try:
                phi = compile_profile(fb["phi"])
                float(phi(1.0))
            except (ValueError, SyntaxError, TypeError, ArithmeticError) as exc:
                col.add("feedback.phi", f"invalid expression: {exc}")


def _check_initial(ini, col):
    fam = ini["family"]
    if fam is not None and fam not in INITIAL_PARAMETERS:
        col.add("initial.family", f"must be one of {sorted(INITIAL_PARAMETERS)}, got {fam!r}")
        fam = None
    par = ini["parameters"]
    if not isinstance(par, dict):
        col.add("initial.parameters", "must be an object")
        par = {}
    allowed = INITIAL_PARAMETERS.get(fam or "bump")
    for k, v in par.items():
        key = f"initial.parameters.{k}"
        if k not in allowed:
            col.add(key, "unknown key for this family")
        elif k == "path":
            if not isinstance(v, str):
                col.add(key, "must be a file path")
        elif not _is_number(v):
            col.add(key, f"must be a finite number, got {v!r}")
    if fam == "file" and not isinstance(par.get("path"), str):
        col.add("initial.parameters.path", "the file family needs a path")
    if fam == "bump":
        w = par.get("width", 0.35)
        if _is_number(w) and w <= 0:
            col.add("initial.parameters.width", "must be > 0")
    seed = ini["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        col.add("initial.seed", f"must be a nonnegative integer, got {seed!r}")
    if not _is_number(ini["noise"]) or ini["noise"] < 0:
        col.add("initial.noise", f"must be a number >= 0, got {ini['noise']!r}")


def _check_output(out, col):
    for key in ("csv_path", "json_path"):
        if out[key] is not None and not isinstance(out[key], str):
            col.add(f"output.{key}", "must be a path string or null")
    st = out["sample_stride"]
    if not isinstance(st, int) or isinstance(st, bool) or st < 1:
        col.add("output.sample_stride", f"must be an integer >= 1, got {st!r}")


def _check_experiment(ex, col):
    known = set().union(*EXPERIMENT_OPTIONS.values())
    for k in ex:
        if k not in known:
            col.add(f"experiment.{k}", "unknown key")


def parse_config(text):
    """Parse and validate a JSON configuration; raise ParseError or ValidationError."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ParseError("configuration must be a JSON object")
    col = _Collector()
    for k in raw:
        if k not in DEFAULTS:
            col.add(k, "unknown section")
    sections = {}
    for name, defaults in DEFAULTS.items():
        given = raw.get(name, {})
        if name == "experiment":
            sections[name] = copy.deepcopy(given) if isinstance(given, dict) else {}
            if not isinstance(given, dict):
                col.add(name, "must be an object")
        else:
            sections[name] = _merge(defaults, given, name, col)
    _check_domain(sections["domain"], col)
    _check_params(sections["params"], col)
    _check_scheme(sections["scheme"], col)
    _check_feedback(sections["feedback"], col)
    _check_initial(sections["initial"], col)
    _check_output(sections["output"], col)
    _check_experiment(sections["experiment"], col)
    if col.problems:
        raise ValidationError(col.problems)
    d = sections["domain"]
    for k in ("r0", "r1"):
        d[k] = float(d[k])
    for k in ("lambda", "alpha", "kappa", "beta", "gamma", "p"):
        sections["params"][k] = float(sections["params"][k])
    for k in ("dt", "T"):
        sections["scheme"][k] = float(sections["scheme"][k])
    return RunConfig(**sections)


def load_config(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_config(text)


# -- output ---------------------------------------------------------------------------


def format_float(x):
    return "%.17g" % (x + 0.0)  # + 0.0 folds -0.0 into 0


def write_csv(path, rows):
    """Write the ledger rows (dict of equal-length arrays) with LF endings."""
    lines = [",".join(CSV_COLUMNS)]
    n = len(rows["t"])
    for i in range(n):
        lines.append(",".join(format_float(float(rows[c][i])) for c in CSV_COLUMNS))
    data = "\n".join(lines) + "\n"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(data)


def dump_json(obj):
    return json.dumps(exps._plain(obj), indent=2, allow_nan=False) + "\n"


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def sampled_rows(ledger, steps):
    cols = ledger.columns()
    idx = np.asarray(steps, dtype=int)
    return {c: cols[c][idx] for c in CSV_COLUMNS}


def _safe(x):
    """Finite floats pass through; anything else becomes null in JSON."""
    x = float(x)
    return x if math.isfinite(x) else None


def simulation_summary(cfg, grid, params, traj, ledger, u0, runtime=None):
    cols = ledger.columns()
    final = {c: _safe(cols[c][-1]) for c in CSV_COLUMNS}
    t = cols["t"]
    T = t[-1]
    try:
        sel = t >= T / 4
        fit = decay_rate_fit(t[sel], cols["F"][sel])
        decay = {"rate": fit.rate, "r_squared": fit.r_squared, "window": [T / 4, T], "samples": fit.n_used}
    except InsufficientData as exc:
        decay = {"rate": None, "reason": str(exc)}
    V, E = cols["V_norm"], cols["E"]
    violations = {
        "V_norm_max_increase": max(0.0, float(np.max(np.diff(V)))) if len(V) > 1 else 0.0,
        "E_max_increase": max(0.0, float(np.max(np.diff(E)))) if len(E) > 1 else 0.0,
        "compatibility_residual": compatibility_residual(u0, grid, params),
    }
    return {
        "schema": JSON_SCHEMA,
        "command": "simulate",
        "version": __version__,
        "config": cfg.to_dict(),
        "steps": int(traj.steps[-1]),
        "final": final,
        "decay_fit": decay,
        "violations": violations,
        "runtime": runtime,
    }


# -- commands ------------------------------------------------------------------------------


def cmd_simulate(cfg, csv_path=None, json_path=None, timing=False, out=None):
    out = out or sys.stdout
    grid = cfg.grid()
    params = cfg.model()
    scheme = cfg.scheme_config()
    u0 = cfg.initial_field(grid, params)
    stride = cfg.output["sample_stride"]

    def progress(n, t, u):
        if log.isEnabledFor(logging.DEBUG):
            log.debug("step %d t=%.6g max|u|=%.6g", n, t, float(np.max(np.abs(u))))

    start = time.perf_counter()
    traj, ledger = run(grid, params, scheme, u0, sample_stride=stride, callback=progress)
    runtime = time.perf_counter() - start
    csv_path = csv_path or cfg.output["csv_path"]
    json_path = json_path or cfg.output["json_path"]
    if csv_path:
        write_csv(csv_path, sampled_rows(ledger, traj.steps))
    summary = simulation_summary(cfg, grid, params, traj, ledger, u0, runtime if timing else None)
    text = dump_json(summary)
    if json_path:
        _write_text(json_path, text)
    else:
        out.write(text)
    return EXIT_OK


def _experiment_kwargs(name, cfg):
    opts = cfg.experiment
    bad = [k for k in opts if k not in EXPERIMENT_OPTIONS[name]]
    if bad:
        raise ValidationError([(f"experiment.{k}", f"not an option of the {name!r} study") for k in bad])
    kw = dict(opts)
    for key in ("T_long", "window", "slope_range"):
        if key in kw:
            kw[key] = tuple(kw[key])
    return kw


def run_experiment(name, cfg):
    """Dispatch one study from a configuration; returns the ExperimentReport."""
    if name not in exps.STUDIES:
        raise ValidationError([("experiment", f"unknown study {name!r}; choose from {sorted(exps.STUDIES)}")])
    kw = _experiment_kwargs(name, cfg)
    grid = cfg.grid()
    params = cfg.model()
    scheme = cfg.scheme_config()
    given = cfg.initial["family"] is not None or cfg.initial["noise"] > 0
    if name == "inviscid":
        problems = []
        if grid.N != 2:
            problems.append(("domain.N", "the inviscid study needs N = 2"))
        if params.p != 3:
            problems.append(("params.p", "the inviscid study needs p = 3"))
        if params.beta <= 0:
            problems.append(("params.beta", "the inviscid study needs beta > 0"))
        if problems:
            raise ValidationError(problems)
    factory = cfg.initial_factory() if given else None
    if name in ("equivalence", "manufactured", "energy"):
        if given and cfg.initial["family"] == "file":
            raise ValidationError([("initial.family", "refinement studies need analytic initial data")])
        if name == "manufactured":
            return exps.manufactured_solution_study(grid, params, scheme, **kw)
        if name == "equivalence":
            return exps.equivalence_study(grid, params, u0=factory, scheme=scheme, **kw)
        return exps.energy_monotonicity_study(grid, params, scheme, u0=factory, **kw)
    u0 = factory(grid, params) if given else None
    if name == "linear":
        return exps.linear_suite(grid, params, scheme, u0=u0, **kw)
    if name == "stabilization":
        if "gamma_values" not in kw:
            kw["gamma_values"] = (params.gamma,)
        return exps.stabilization_study(grid, params, scheme, u0=u0, **kw)
    return exps.inviscid_study(grid, params, scheme, u0=u0, **kw)


def cmd_experiment(name, cfg, json_path=None, timing=False, out=None):
    out = out or sys.stdout
    report = run_experiment(name, cfg)
    if not timing:
        report.wall_time = None
    doc = report.to_dict()
    doc["config"] = cfg.to_dict()
    text = dump_json(doc)
    path = json_path or cfg.output["json_path"]
    if path:
        _write_text(path, text)
    else:
        out.write(text)
    for key, chk in report.checks.items():
        log.info("%s: %s %s %s %s -> %s", key, chk.metric, chk.value, chk.relation, chk.threshold,
                 "pass" if chk.passed else "FAIL")
    return EXIT_OK if report.passed else EXIT_NUMERIC


def cmd_check(cfg, out=None):
    out = out or sys.stdout
    grid = cfg.grid()
    params = cfg.model()
    spec = cfg.feedback_spec()
    rep = assumption_check(spec)
    u0 = cfg.initial_field(grid, params)
    bad, cc = incompatible_data(u0, grid, params)
    geo = geometric_condition_check(grid)
    out.write(f"feedback ({spec.family}): {'pass' if rep.passed else 'FAIL'}\n")
    for k, v in rep.as_dict().items():
        out.write(f"  {k} = {v}\n")
    flag = "ok" if not bad else "WARNING: incompatible initial data"
    out.write(f"compatibility residual: {format_float(cc)} ({flag})\n")
    out.write(f"geometric condition: {'holds' if geo.holds else 'fails'} "
              f"(Gamma0 {format_float(geo.gamma0_product)}, Gamma1 {format_float(geo.gamma1_product)}, "
              f"x0 {format_float(geo.x0)})\n")
    return EXIT_OK if rep.passed else EXIT_NUMERIC


# -- entry point ---------------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="glsim", description=__doc__.splitlines()[0])
    parser.add_argument("--verbose", action="store_true", help="per-step progress and check details on stderr")
    parser.add_argument("--version", action="version", version=f"glsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sim = sub.add_parser("simulate", help="run one simulation")
    sim.add_argument("config")
    sim.add_argument("--csv", dest="csv_path", help="time series output (overrides output.csv_path)")
    sim.add_argument("--json", dest="json_path", help="summary output (overrides output.json_path)")
    sim.add_argument("--timing", action="store_true", help="record wall-clock runtime (breaks byte-identity)")
    ex = sub.add_parser("experiment", help="run a verification study")
    ex.add_argument("name", help=", ".join(sorted(exps.STUDIES)))
    ex.add_argument("config")
    ex.add_argument("--json", dest="json_path", help="report output (overrides output.json_path)")
    ex.add_argument("--timing", action="store_true", help="record wall-clock time in the report")
    chk = sub.add_parser("check", help="check feedback assumptions, compatibility and geometry")
    chk.add_argument("config")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.csv_path, args.json_path, args.timing)
        if args.command == "experiment":
            return cmd_experiment(args.name, cfg, args.json_path, args.timing)
        return cmd_check(cfg)
    except ValidationError as exc:
        print("configuration error:", file=sys.stderr)
        for key, msg in exc.problems:
            print(f"  {key}: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, InsufficientData) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
