"""Command-line front end.

    fracnls <subcommand> [--param value ...] [--config FILE] [--seed S] [--output-dir DIR] [--workers W]

Parameters come from (lowest to highest precedence) built-in defaults, a
``key = value`` config file and command-line flags.  Every run writes
``report.csv`` and ``manifest.json`` (plus any tables) into the output
directory, prints a summary, and exits 0 iff all pass flags are true, 3 when
the run completed but a check failed, 2 on invalid input and 1 on runtime
failure.
"""

import argparse
import math
import os
import sys
import time

import numpy as np

from . import experiments as ex
from . import rng as rngmod
from .dynamics import EquationVariant, conservation_report, evolve, single_mode_solution
from .gibbs import alpha_N, sample_mu, sample_mu_batch, sample_rho, weighted_mean
from .report import ExperimentReport, Table
from .spectral import FourierState, mass_batch

ENV_OUTPUT_DIR = "FRACNLS_OUTPUT_DIR"


class ConfigError(ValueError):
    pass


def _intlist(s):
    return [int(v) for v in str(s).replace(" ", "").split(",") if v]


def _floatlist(s):
    return [float(v) for v in str(s).replace(" ", "").split(",") if v]


def _strlist(s):
    return [v.strip() for v in str(s).split(",") if v.strip()]


def _bool(s):
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt_float(s):
    return None if str(s).lower() in ("none", "") else float(s)


def _dt_policy(s):
    return "auto" if str(s) == "auto" else float(s)


# subcommand -> {param: (parser, default, help)}
PARAMS = {
    "sample": {
        "alpha": (float, 1.5, "dispersion exponent"),
        "N": (int, 8, "Galerkin cutoff"),
        "count": (int, 10, "number of samples"),
        "measure": (str, "mu", "mu or rho"),
        "mode": (str, "rejection", "rho sampler: rejection or importance"),
    },
    "evolve": {
        "alpha": (float, 1.5, "dispersion exponent"),
        "N": (int, 8, "Galerkin cutoff"),
        "T": (float, 1.0, "final time"),
        "dt": (float, 1e-3, "time step"),
        "scheme": (str, "rk4", "rk4 or strang"),
        "variant": (str, "truncated", "truncated, renormalized or wick"),
        "modes": (str, None, 'initial data, e.g. "k=1,c=1;k=-2,c=0.5+0.1j" (default: a Gaussian sample)'),
        "stride": (int, 1, "record every stride-th step"),
        "drift_tol": (float, 1e-8, "relative drift flagged above this"),
    },
    "invariance": {
        "alpha": (float, 1.5, "dispersion exponent"),
        "N": (int, 8, "Galerkin cutoff"),
        "T": (float, 1.0, "evolution time"),
        "ensemble": (int, 2000, "ensemble size"),
        "observables": (_strlist, None, "mass,l4,abs2:<n>,sobolev:<s>"),
        "mode": (str, "rejection", "rho sampler: rejection or importance"),
        "dt": (_opt_float, None, "time step (default: halving study)"),
        "z": (float, 3.0, "per-observable z threshold"),
    },
    "converge": {
        "alpha": (float, 1.5, "dispersion exponent"),
        "sigma": (float, 0.2, "Sobolev index of the Cauchy table"),
        "N_list": (_intlist, [8, 16, 32, 64], "cutoffs"),
        "T": (float, 0.5, "time horizon"),
        "dt_policy": (_dt_policy, "auto", "'auto' or a maximal time step"),
        "n_out": (int, 50, "output times"),
        "tol": (float, 1e-8, "drift tolerance of the halving study"),
        "nonlinear": (_bool, True, "false: exact linear flow"),
        "seeds": (_intlist, None, "several master seeds (default: --seed)"),
    },
    "converge-renorm": {
        "alpha": (float, 0.95, "dispersion exponent"),
        "sigma": (float, -0.05, "Sobolev index of the Cauchy table"),
        "N_list": (_intlist, [8, 16, 32, 64], "cutoffs"),
        "T": (float, 0.5, "time horizon"),
        "dt_policy": (_dt_policy, "auto", "'auto' or a maximal time step"),
        "n_out": (int, 50, "output times"),
        "tol": (float, 1e-8, "drift tolerance of the halving study"),
        "seeds": (_intlist, None, "several master seeds (default: --seed)"),
    },
    "measure": {
        "alpha": (float, 0.95, "dispersion exponent"),
        "p": (float, 2.0, "Lebesgue exponent in omega"),
        "M_list": (_intlist, [8, 16, 32, 64], "lower cutoffs M (N = 2M)"),
        "trials": (int, 10_000, "Monte Carlo trials"),
        "sigma": (float, 0.5, "H^-sigma norm of F_N - F_M"),
    },
    "tails": {
        "kind": (str, "both", "strichartz, ld or both"),
        "alpha": (float, 1.5, "dispersion exponent of the Strichartz tail"),
        "q": (float, 4.0, "space-time Lebesgue exponent"),
        "T": (float, 0.5, "time half-width"),
        "R_grid": (_floatlist, None, "thresholds R (default: automatic)"),
        "trials": (int, 10_000, "Strichartz-tail trials"),
        "K": (int, 8, "mode cutoff of the random series"),
        "ld_alpha": (float, 0.9, "dispersion exponent of the large-deviation test"),
        "M": (int, 16, "lower cutoff"),
        "N": (int, 64, "upper cutoff"),
        "lambda_grid": (_floatlist, None, "thresholds lambda (default: automatic)"),
        "ld_trials": (int, 100_000, "large-deviation trials"),
    },
    "counting": {
        "alphas": (_floatlist, [1.2, 1.5, 1.8], "dispersion exponents"),
        "N_list": (_intlist, [8, 16, 32, 64, 128, 256, 512], "dyadic scales"),
        "r": (float, 0.5, "half-width of the level window"),
        "queries": (int, 200, "sampled (a, l) queries per N"),
        "n_max": (int, 64, "resonance scan range (0 to skip)"),
    },
    "strichartz": {
        "alpha": (float, 1.5, "dispersion exponent"),
        "N_list": (_intlist, [8, 16, 32, 64, 128, 256], "dyadic scales"),
        "samples": (int, 2, "Gaussian test functions per N"),
        "bilinear": (_bool, False, "also run the bilinear probe"),
        "M_list": (_intlist, [2, 4, 8, 16], "low scales of the bilinear probe"),
        "N_bilinear": (int, 64, "high scale of the bilinear probe"),
    },
    "bourgain": {
        "alpha": (float, 1.5, "dispersion exponent"),
        "N": (int, 8, "Galerkin cutoff"),
        "s": (float, 0.0, "Sobolev index"),
        "b": (float, 0.4, "modulation index"),
        "T": (float, 20.0, "window length"),
        "dt": (float, 1e-3, "time step"),
        "stride": (int, 10, "output stride"),
    },
    "recurrence": {
        "alpha": (float, 1.5, "dispersion exponent"),
        "N": (int, 1, "Galerkin cutoff"),
        "sigma": (float, 0.2, "Sobolev index of the distance"),
        "T_max": (float, 1e4, "time horizon"),
        "threshold": (float, 0.1, "recurrence threshold"),
        "stride": (int, 10, "output stride"),
        "dt": (float, 0.01, "time step"),
    },
    "identities": {
        "alpha": (float, 1.5, "dispersion exponent"),
        "N": (int, 8, "Galerkin cutoff"),
        "samples": (int, 1000, "Gaussian samples"),
    },
}


# --------------------------------------------------------------------------
# validation


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def _check_alpha(a, name="alpha"):
    _require(0.5 < a <= 2, f"{name}: must lie in (1/2, 2], got {a}")


def validate(cmd, p):
    """Module preconditions, checked before any compute."""
    for key in ("alpha", "ld_alpha"):
        if key in p:
            _check_alpha(p[key], key)
    for key in ("N", "count", "ensemble", "trials", "ld_trials", "samples", "stride", "n_out", "queries", "K", "M", "N_bilinear"):
        if key in p and p[key] is not None:
            lo = 0 if key in ("N", "M", "K") else 1
            _require(p[key] >= lo, f"{key}: must be >= {lo}, got {p[key]}")
    for key in ("dt", "T", "T_max", "threshold", "r", "tol", "drift_tol"):
        if key in p and p[key] is not None and not (cmd == "evolve" and key == "T"):
            _require(p[key] > 0, f"{key}: must be positive, got {p[key]}")
    for key in ("N_list", "M_list"):
        if key in p:
            _require(len(p[key]) >= 1 and all(v >= 1 for v in p[key]), f"{key}: needs positive integers")
    if cmd == "sample":
        _require(p["measure"] in ("mu", "rho"), "measure: must be mu or rho")
        _require(p["mode"] in ("rejection", "importance"), "mode: must be rejection or importance")
    if cmd == "evolve":
        _require(p["scheme"] in ("rk4", "strang"), "scheme: must be rk4 or strang")
        _require(p["variant"] in ("truncated", "renormalized", "wick"), "variant: unknown equation variant")
        if p["modes"] is not None:
            for k, _ in parse_modes(p["modes"]):
                _require(abs(k) <= p["N"], f"modes: mode {k} lies outside E_{p['N']}")
    if cmd == "invariance":
        _require(p["mode"] in ("rejection", "importance"), "mode: must be rejection or importance")
        for name in p["observables"] or []:
            kind, _, arg = name.partition(":")
            _require(name in ("mass", "l4") or kind in ("abs2", "sobolev"), f"observables: unknown observable {name!r}")
            if kind == "abs2":
                _require(abs(int(arg)) <= p["N"], f"observables: mode {arg} outside E_N")
    if cmd in ("converge", "converge-renorm"):
        _require(p["sigma"] < (p["alpha"] - 1) / 2, f"sigma: must be below (alpha-1)/2 = {(p['alpha'] - 1) / 2:g}")
    if cmd == "converge-renorm":
        _require(7 / 8 < p["alpha"] <= 1, "alpha: the renormalized regime needs alpha in (7/8, 1]")
    if cmd == "measure":
        _require(p["sigma"] > 1.5 * (1 - p["alpha"]), "sigma: must exceed 3(1-alpha)/2")
        _require(p["p"] >= 1, "p: must be >= 1")
    if cmd == "tails":
        _require(p["kind"] in ("both", "strichartz", "ld"), "kind: must be strichartz, ld or both")
        _require(2 <= p["q"] < math.inf, "q: must lie in [2, inf)")
        _require(p["T"] <= 1, "T: must be <= 1")
        _require(p["M"] < p["N"], "M: must be below N")
    if cmd == "counting":
        for a in p["alphas"]:
            _require(1 < a < 2, f"alphas: {a} not in (1, 2)")
        _require(p["r"] >= 0.01, "r: must be >= 1/100")
        _require(0 <= p["n_max"] <= 512, "n_max: must lie in [0, 512]")
    if cmd == "bourgain":
        _require(p["T"] >= 4 * p["dt"] * p["stride"], "T: window shorter than 4 output strides")


# --------------------------------------------------------------------------
# config handling


def read_config(path, allowed):
    """Parse ``key = value`` lines ('#' comments); unknown keys are errors."""
    out = {}
    try:
        fh = open(path)
    except OSError as e:
        raise ConfigError(f"config: cannot read {path}: {e.strerror}") from None
    with fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, _, val = (s.strip() for s in line.partition("="))
            key = key.replace("-", "_")
            if key == "seed":
                out[key] = val
                continue
            if key not in allowed:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = (val, f"{path}:{lineno}")
    return out


def _convert(key, raw, parser, where):
    try:
        return parser(raw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: field {key!r}: {e}") from None


def build_parser():
    ap = argparse.ArgumentParser(prog="fracnls", description="Fractional NLS simulator and verification harness.")
    sub = ap.add_subparsers(dest="cmd", required=True, metavar="subcommand")
    for cmd, params in PARAMS.items():
        sp = sub.add_parser(cmd, help=f"run the {cmd} experiment", argument_default=argparse.SUPPRESS)
        sp.add_argument("--config", help="key = value configuration file")
        sp.add_argument("--seed", type=str, help="64-bit master seed (default 0)")
        sp.add_argument("--output-dir", dest="output_dir", help=f"output directory (default ${ENV_OUTPUT_DIR} or ./fracnls-out)")
        sp.add_argument("--workers", type=int, help="worker processes (default: available cores)")
        sp.add_argument("--quiet", action="store_true", help="only print the pass/fail line")
        for key, (_, default, text) in params.items():
            flags = [f"--{key}"] + ([f"--{key.replace('_', '-')}"] if "_" in key else [])
            sp.add_argument(*flags, dest=key, type=str, help=f"{text} (default {default})")
    return ap


def resolve(args):
    """Merge defaults, config file and flags; returns (cmd, params, seed, outdir, workers)."""
    cmd = args.cmd
    spec = PARAMS[cmd]
    ns = vars(args)
    params = {k: v[1] for k, v in spec.items()}
    seed_raw = "0"
    if "config" in ns:
        cfg = read_config(ns["config"], spec)
        seed_raw = cfg.pop("seed", seed_raw)
        for k, (raw, where) in cfg.items():
            params[k] = _convert(k, raw, spec[k][0], where)
    for k in spec:
        if k in ns:
            params[k] = _convert(k, ns[k], spec[k][0], f"--{k}")
    seed_raw = ns.get("seed", seed_raw)
    try:
        seed = int(str(seed_raw), 0)
    except ValueError:
        raise ConfigError(f"seed: not an integer: {seed_raw!r}") from None
    if not 0 <= seed < 2**64:
        raise ConfigError("seed: must be a 64-bit unsigned integer")
    outdir = ns.get("output_dir") or os.path.join(os.environ.get(ENV_OUTPUT_DIR, "fracnls-out"), cmd)
    workers = ns.get("workers", os.cpu_count() or 1)
    if workers < 1:
        raise ConfigError("workers: must be >= 1")
    return cmd, params, seed, outdir, workers


# --------------------------------------------------------------------------
# subcommands that are not plain experiment calls


def parse_modes(text):
    """'k=1,c=1;k=-2,c=0.5+0.1j' -> [(1, 1+0j), (-2, 0.5+0.1j)]."""
    out = []
    for part in str(text).split(";"):
        part = part.strip()
        if not part:
            continue
        pairs = [kv.split("=", 1) for kv in part.replace(" ", "").split(",")]
        fields = dict(kv for kv in pairs if len(kv) == 2)
        if len(pairs) != 2 or set(fields) != {"k", "c"}:
            raise ConfigError(f"modes: each entry needs exactly k=<int>,c=<complex>, got {part!r}")
        try:
            out.append((int(fields["k"]), complex(fields["c"].replace("i", "j"))))
        except ValueError as e:
            raise ConfigError(f"modes: {e}") from None
    if not out:
        raise ConfigError("modes: empty mode list")
    return out


def run_evolve(p, seed, outdir):
    t_start = time.perf_counter()
    N = p["N"]
    c = np.zeros(2 * N + 1, dtype=complex)
    modes = parse_modes(p["modes"]) if p["modes"] is not None else None
    if modes:
        for k, amp in modes:
            c[k + N] += amp
    else:
        c = sample_mu_batch(seed, p["alpha"], N, 1, tag="evolve")[0]
    eq = EquationVariant.make(p["variant"], p["alpha"], N)
    traj = evolve(FourierState(c, cutoff_N=N), eq, p["T"], p["dt"], p["scheme"], p["stride"], p["drift_tol"])
    rep = ExperimentReport("evolve", dict(p), seed)
    r = conservation_report(traj)
    rep.add("max_rel_drift_mass", r["max_rel_drift_mass"], tolerance=p["drift_tol"],
            passed=r["max_rel_drift_mass"] <= p["drift_tol"], probe="mass conservation")
    rep.add("max_rel_drift_energy", r["max_rel_drift_energy"], tolerance=p["drift_tol"],
            passed=r["max_rel_drift_energy"] <= p["drift_tol"], probe="energy conservation")
    if modes and len(modes) == 1:
        k, amp = modes[0]
        exact = single_mode_solution(amp, k, p["alpha"], traj.times, p["variant"], eq.renorm_constant)
        others = np.delete(traj.states, k + N, axis=1)
        err = float(max(np.max(np.abs(traj.states[:, k + N] - exact)), np.max(np.abs(others), initial=0.0)))
        rep.add("closed_form_error", err, tolerance=1e-8, passed=err <= 1e-8, probe="single-mode exact solution")
    os.makedirs(outdir, exist_ok=True)
    traj.write(os.path.join(outdir, "trajectory.csv"), os.path.join(outdir, "trajectory.json"))
    rep.runtime = time.perf_counter() - t_start
    return rep


def run_sample(p, seed, outdir, workers):
    t_start = time.perf_counter()
    alpha, N, count = p["alpha"], p["N"], p["count"]
    rep = ExperimentReport("sample", dict(p), seed)
    rows = []
    masses, lws = [], []
    for i in range(count):
        gen = rngmod.stream(seed, i, "sample")
        if p["measure"] == "mu":
            c, lw, acc = sample_mu(gen, alpha, N).coeffs, 0.0, True
        else:
            s = sample_rho(gen, alpha, N, mode=p["mode"])
            c, lw, acc = s.state.coeffs, s.log_weight, s.accepted
        masses.append(float(mass_batch(c)))
        lws.append(lw)
        for n, z in zip(range(-N, N + 1), c):
            rows.append((i, n, z.real, z.imag, lw, acc))
    rep.tables["samples"] = Table(("index", "n", "re", "im", "log_weight", "accepted"), rows)
    logw = np.array(lws) if p["measure"] == "rho" and p["mode"] == "importance" else None
    m, se = weighted_mean(masses, logw) if count > 1 else (masses[0], float("nan"))
    if p["measure"] == "mu" and count > 1:
        target = alpha_N(alpha, N)
        rep.add("mean_mass", m, se, target, 4 * se, abs(m - target) <= 4 * se, "E_mu ||Pi_N u||^2 = alpha_N")
    else:
        rep.add("mean_mass", m, se, probe="sample mean of the mass")
    rep.runtime = time.perf_counter() - t_start
    return rep


def dispatch(cmd, p, seed, outdir, workers):
    if cmd == "evolve":
        return run_evolve(p, seed, outdir)
    if cmd == "sample":
        return run_sample(p, seed, outdir, workers)
    if cmd == "invariance":
        return ex.invariance_experiment(p["alpha"], p["N"], p["T"], p["ensemble"], p["observables"], seed, p["mode"], p["dt"],
                                        z=p["z"], workers=workers)
    if cmd == "converge":
        return ex.cauchy_convergence_experiment(p["alpha"], p["sigma"], p["N_list"], p["T"], p["dt_policy"], p["seeds"] or seed,
                                                p["n_out"], p["tol"], p["nonlinear"], workers=workers)
    if cmd == "converge-renorm":
        return ex.renormalized_convergence_experiment(p["alpha"], p["sigma"], p["N_list"], p["T"], p["seeds"] or seed,
                                                      p["dt_policy"], p["n_out"], p["tol"], workers=workers)
    if cmd == "measure":
        return ex.measure_construction_experiment(p["alpha"], p["p"], p["M_list"], p["trials"], seed, p["sigma"], workers=workers)
    if cmd == "tails":
        return ex.tails_experiment(p["alpha"], p["q"], p["T"], p["R_grid"], p["trials"], seed, p["K"], p["ld_alpha"], p["M"],
                                   p["N"], p["lambda_grid"], p["ld_trials"], p["kind"], workers=workers)
    if cmd == "counting":
        return ex.counting_experiment(p["alphas"], p["N_list"], p["r"], p["queries"], p["n_max"], seed)
    if cmd == "strichartz":
        return ex.strichartz_experiment(p["alpha"], p["N_list"], p["samples"], seed, p["bilinear"], p["M_list"], p["N_bilinear"])
    if cmd == "bourgain":
        return ex.bourgain_experiment(p["alpha"], p["N"], p["s"], p["b"], p["T"], p["dt"], p["stride"], seed)
    if cmd == "recurrence":
        return ex.recurrence_experiment(p["alpha"], p["N"], p["sigma"], p["T_max"], p["threshold"], p["stride"], seed, p["dt"])
    if cmd == "identities":
        return ex.identities_experiment(p["alpha"], p["N"], seed, p["samples"], workers=workers)
    raise ConfigError(f"unknown subcommand {cmd!r}")


def run(argv=None):
    """Parse argv, run, write outputs; returns the process exit code."""
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        cmd, params, seed, outdir, workers = resolve(args)
        validate(cmd, params)
    except ConfigError as e:
        print(f"fracnls {args.cmd}: invalid configuration: {e}", file=sys.stderr)
        return 2
    try:
        rep = dispatch(cmd, params, seed, outdir, workers)
        rep.notes["run"] = {
            "subcommand": cmd,
            "argv": list(argv) if argv is not None else sys.argv[1:],
            "workers": workers,
            "output_dir": outdir,
        }
        rep.write(outdir)
    except ConfigError as e:
        print(f"fracnls {cmd}: invalid configuration: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # runtime failure: report and exit 1
        print(f"fracnls {cmd}: error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    if getattr(args, "quiet", False):
        print(f"{rep.name}: {'PASS' if rep.passed else 'FAIL'}")
    else:
        print(rep.summary())
        print(f"outputs in {outdir}")
    return 0 if rep.passed else 3


def main():
    sys.exit(run())
