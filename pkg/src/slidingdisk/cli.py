"""Command-line front end.

``slidingdisk <subcommand> --config FILE --out DIR [--seed N] [--threads N]``

Each subcommand writes its artifacts under ``DIR`` and prints a one-line JSON
summary.  Exit codes: 0 success, 2 configuration or validation error, 3
numerical failure (details in ``DIR/diagnostics.json``).  Artifacts depend
only on the config and the master seed, never on the thread count.
"""
import argparse
from concurrent.futures import ThreadPoolExecutor
import dataclasses
import json
import math
import os
import sys

import numpy as np

from . import config as cfgmod
from .conditions import build_control, lambda_jacobian, random_pairs, verify_control, zeta_point
from .controls import BumpBasis, ControlPath
from .disk import State, to_y
from .errors import ConfigError, NumericalFailure, SynthesisFailure, ValidationError
from .integrate import n_steps_for, simulate, thread_count
from .noise import LevyCharacteristics, reflection_series, sample_increments, tube_probability
from .seeds import derive_seed
from .stats import gibbs_check, msd_two_level, power_law_fit, write_check_rows

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


def _num(v):
    v = float(v)
    return v if math.isfinite(v) else None


def _write(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)
        if not text.endswith("\n"):
            fh.write("\n")


def _driving_noise(cfg):
    chars = cfg.noise()
    return chars if chars is not None else LevyCharacteristics.brownian(cfg.get("noise", "dim"))


def cmd_simulate(cfg, seed, threads):
    p = cfg.disk_params()
    traj = simulate(
        cfg.start_state(), p, cfg.scheme(), cfg.get("integrator", "T"), cfg.noise(), seed,
        stride=cfg.get("integrator", "stride"),
    )
    final = traj.states[-1]
    summary = {"steps": int(n_steps_for(cfg.get("integrator", "T"), cfg.get("integrator", "h"))),
               "final_state": [_num(v) for v in final]}
    return summary, [("trajectory.csv", traj.to_csv)]


def cmd_msd(cfg, seed, threads):
    p = cfg.disk_params()
    spec = cfg.ensemble()
    series = msd_two_level(spec, p, cfg.scheme(), seed, cfg.get("ensemble", "centering"), threads)
    summary = {"observable": series.observable, "t_last": _num(series.times[-1]),
               "msd_over_t": _num(series.msd[-1] / series.times[-1])}
    artifacts = [("msd.csv", series.to_csv)]
    window = (cfg.get("ensemble", "fit.t0"), cfg.get("ensemble", "fit.t1"))
    if window[1] <= series.times[-1] + 1e-9:
        fit = power_law_fit(series, window)
        summary["exponent"] = _num(fit.exponent)
        artifacts.append(("fit.json", lambda path: _write(path, fit.to_json())))
    return summary, artifacts


def cmd_gibbs_check(cfg, seed, threads):
    p = cfg.disk_params()
    rows = gibbs_check(p, cfg.get("gibbs", "n"), cfg.scheme(), cfg.get("gibbs", "T"), seed, threads)
    summary = {"rows": len(rows), "all_pass": all(r.passed for r in rows)}
    return summary, [("gibbs.csv", lambda path: write_check_rows(rows, path))]


def cmd_control(cfg, seed, threads):
    p = cfg.disk_params()
    sig = p.sigma_ratio
    start = to_y(State(*cfg.get("control", "start")), sig)
    target = to_y(State(*cfg.get("control", "target")), sig)
    ctrl = build_control(
        start, target, p, cfg.get("control", "t_total"), cfg.get("control", "n_knots"),
        cfg.get("control", "eps"), seed=seed, gain=cfg.get("control", "gain"),
        n_starts=cfg.get("control", "n_starts"),
    )
    dist, ok = verify_control(start, ctrl, target, p, cfg.get("control", "eps"))
    summary = {"distance": _num(dist), "verified": bool(ok)}
    return summary, [("control.json", lambda path: _write(path, ctrl.to_json()))]


def cmd_control_suite(cfg, seed, threads):
    """Seeded start/target sweep; one record per pair, merged in index order."""
    p = cfg.disk_params()
    get = lambda k: cfg.get("control", k)  # noqa: E731
    pairs = random_pairs(derive_seed(seed, "pairs"), get("suite.n"), p.sigma_ratio, get("suite.offset"))

    def solve(i):
        start, target = pairs[i]
        rec = {"index": i, "start": start.as_array().tolist(), "target": target.as_array().tolist()}
        try:
            ctrl = build_control(
                start, target, p, get("t_total"), get("n_knots"), get("eps"),
                seed=derive_seed(seed, "pair", i), gain=get("gain"), n_starts=get("n_starts"),
            )
        except SynthesisFailure as err:
            rec.update(verified=False, distance=_num(err.best_distance), control=None)
            return rec
        dist, ok = verify_control(start, ctrl, target, p, get("eps"))
        rec.update(verified=bool(ok), distance=_num(dist), control=json.loads(ctrl.to_json()))
        return rec

    with ThreadPoolExecutor(thread_count(threads)) as pool:
        records = list(pool.map(solve, range(len(pairs))))
    n_ok = sum(r["verified"] for r in records)
    summary = {"pairs": len(records), "verified": n_ok, "all_verified": n_ok == len(records)}
    text = json.dumps(records, sort_keys=True)
    return summary, [("control_suite.json", lambda path: _write(path, text))]


def cmd_jacobian(cfg, seed, threads):
    p = cfg.disk_params()
    t = cfg.get("jacobian", "t")
    a = zeta_point(p, cfg.get("jacobian", "x0"))
    rep = lambda_jacobian(
        a, ControlPath.zero(t), BumpBasis(t), t, p, h=cfg.get("jacobian", "h"), delta=cfg.get("jacobian", "delta"),
    )
    summary = {"rank": rep.rank, "condition_number": _num(rep.condition_number)}
    return summary, [("jacobian.json", lambda path: _write(path, rep.to_json()))]


def cmd_noise_sample(cfg, seed, threads):
    chars = _driving_noise(cfg)
    T, h = cfg.get("integrator", "T"), cfg.get("integrator", "h")
    n = n_steps_for(T, h)
    stream = sample_increments(chars, h * np.arange(n + 1), seed)
    summary = {"steps": n, "dim": chars.dim, "endpoint": [_num(v) for v in stream.path()[-1]]}
    return summary, [("noise.csv", stream.to_csv)]


def cmd_tube(cfg, seed, threads):
    chars = _driving_noise(cfg)
    eps, horizon = cfg.get("tube", "epsilon"), cfg.get("tube", "horizon")
    phi = cfg.tube_path()
    est = tube_probability(chars, phi, eps, horizon, cfg.get("tube", "n_samples"), seed)
    out = {k: (_num(v) if isinstance(v, float) else v) for k, v in dataclasses.asdict(est).items()}
    plain = chars.dim == 1 and np.array_equal(chars.gauss, np.eye(1)) and chars.is_brownian and not chars.drift.any()
    if plain and not np.any(phi.values):
        out["oracle"] = reflection_series(eps, horizon)
    summary = {"probability": out["probability"], "stderr": out["stderr"]}
    return summary, [("tube.json", lambda path: _write(path, json.dumps(out, sort_keys=True)))]


COMMANDS = {
    "simulate": cmd_simulate,
    "msd": cmd_msd,
    "gibbs-check": cmd_gibbs_check,
    "control": cmd_control,
    "control-suite": cmd_control_suite,
    "jacobian": cmd_jacobian,
    "noise-sample": cmd_noise_sample,
    "tube": cmd_tube,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="slidingdisk", description="Sliding-disk simulations and ergodicity checks.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="INI configuration file")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="override [seed] master")
        sp.add_argument("--threads", type=int, default=None, help="worker threads (env SLIDINGDISK_THREADS)")
    return ap


def _diagnostics(err):
    d = {"error": type(err).__name__, "message": str(err)}
    for attr in ("best_distance", "diagnostics", "step", "key"):
        if getattr(err, attr, None) is not None:
            d[attr] = getattr(err, attr)
    return d


def run(command, config_path, out_dir, seed=None, threads=None):
    """Execute one subcommand; returns ``(exit_code, summary)``."""
    summary = {"command": command}
    try:
        if command not in COMMANDS:
            raise ConfigError(f"unknown subcommand {command!r}")
        cfg = cfgmod.load(config_path)
        if seed is not None:
            try:
                cfg = cfg.with_seed(seed)
            except ValueError as err:
                raise ConfigError(f"bad --seed: {err}", "seed.master") from err
        if threads is not None and threads < 1:
            raise ConfigError("--threads must be >= 1", "threads")
        os.makedirs(out_dir, exist_ok=True)
        sub_seed = derive_seed(cfg.master_seed, command)
        result, artifacts = COMMANDS[command](cfg, sub_seed, threads)
        # single writer, after all computation
        for name, writer in artifacts:
            writer(os.path.join(out_dir, name))
        summary.update(status="ok", master_seed=cfg.master_seed, artifacts=[a for a, _ in artifacts], **result)
        return EXIT_OK, summary
    except ValidationError as err:
        summary.update(status="invalid", error=type(err).__name__, message=str(err))
        if getattr(err, "key", None):
            summary["key"] = err.key
        return EXIT_INVALID, summary
    except NumericalFailure as err:
        summary.update(status="numerical_failure", error=type(err).__name__, message=str(err))
        try:
            os.makedirs(out_dir, exist_ok=True)
            _write(os.path.join(out_dir, "diagnostics.json"), json.dumps(_diagnostics(err), sort_keys=True, default=str))
            summary["artifacts"] = ["diagnostics.json"]
        except OSError:
            pass
        return EXIT_NUMERICAL, summary


def main(argv=None):
    args = build_parser().parse_args(argv)
    code, summary = run(args.command, args.config, args.out, args.seed, args.threads)
    print(json.dumps(summary, sort_keys=True, default=str))
    if code != EXIT_OK:
        print(f"error: {summary.get('message')}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
