"""Command-line front end: ``ndcorr {simulate,correlate,energy,reconstruct,demo}``.

Exit codes: 0 success, 1 validation error, 2 numerical failure,
3 a result outside its acceptance tolerance.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import DEFAULT_DEMO, ConfigError, RunConfig, load_config, parse_config, validate
from .correlation import (convergence_study, cross_correlate, ensemble_seeds, noise_record,
                          record_length)
from .energy import decay_report, make_weights
from .io import provenance, write_csv, write_json
from .noise import GENERATOR
from .profile import decay_constants, make_profile
from .reconstruction import (deconvolve_impulse_response, impulse_response_from_noise,
                             reconstruct_profile)
from .solver import SimGrid, bump_trace, simulate

log = logging.getLogger("ndcorr")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_TOLERANCE = 0, 1, 2, 3
OUT_ENV = "NDCORR_OUT"
DIRECT_TOL, NOISE_TOL = 0.05, 0.15


class ToleranceFailure(Exception):
    pass


class Run:
    """Shared state of one command: config, output directory, manifest."""

    def __init__(self, cfg: RunConfig, out: Path, command: str):
        self.cfg = cfg
        self.out = out
        self.command = command
        self.stages: dict = {}

    def stage(self, name):
        run = self

        class _Stage:
            def __enter__(self):
                self.t = time.perf_counter()
                self.files = []
                self.flags = {}
                return self

            def write(self, filename, header, columns, **meta):
                side = provenance(run.cfg.hash, name, **meta)
                write_csv(run.out / filename, header, columns, side)
                self.files += [filename, str(Path(filename).with_suffix(".json"))]

            def __exit__(self, *exc):
                run.stages[name] = {"outputs": self.files, "passed": self.flags,
                                    "seconds": round(time.perf_counter() - self.t, 3)}
                return False

        return _Stage()

    def manifest(self):
        write_json(self.out / "manifest.json", {
            "config_hash": self.cfg.hash, "version": __version__,
            "command": self.command, "config": self.cfg.data, "stages": self.stages})


def _profile(cfg: RunConfig):
    try:
        return make_profile(cfg.section("profile"))
    except (ValueError, OSError) as exc:
        raise cfg.error(f"invalid profile: {exc}", "profile") from None


def _grid(cfg: RunConfig, profile) -> SimGrid:
    g = cfg.section("grid")
    dx = g["dx"] if "dx" in g else g["L"] / g["nx"]
    grid = SimGrid.from_spacing(g["L"], dx, g["t_max"], g["cfl"])
    if not grid.L > profile.x_plus + 2 * grid.dx:
        raise cfg.error(f"grid.L = {grid.L} must exceed x_plus + 2 dx", "grid", "L")
    return grid


def _input(cfg: RunConfig, grid: SimGrid):
    s = cfg.section("input") or {"start": 0.1, "width": 0.5, "mass": 1.0}
    return bump_trace(s.get("start", 0.1), s.get("width", 0.5), grid.dt, grid.nt,
                      mass=s.get("mass", 1.0))


def _delta(cfg: RunConfig, dt: float) -> float:
    return cfg.section("noise").get("delta", 10 * dt)


def cmd_simulate(run: Run) -> int:
    cfg = run.cfg
    p = _profile(cfg)
    g = _grid(cfg, p)
    f = _input(cfg, g)
    every = cfg.section("output").get("field_every", 0)
    with run.stage("simulate") as st:
        r = simulate(p, g, f, store_field=every > 0, decimate=max(every, 1))
        meta = {"grid": {"L": g.L, "nx": g.nx, "dx": g.dx, "dt": g.dt, "nt": g.nt,
                         "cfl": g.cfl}, "profile": cfg.section("profile")}
        st.write("trace.csv", ["t", "value"], [r.dirichlet_trace.times, r.dirichlet_trace.samples],
                 **meta)
        if every > 0:
            tt, xx = np.meshgrid(r.field_times, g.x, indexing="ij")
            st.write("field.csv", ["x", "t", "w"], [xx.ravel(), tt.ravel(), r.field.ravel()],
                     **meta)
        log.info("simulate: %d steps, trace written to %s", g.nt, run.out / "trace.csv")
    return EXIT_OK


def cmd_correlate(run: Run) -> int:
    cfg = run.cfg
    p = _profile(cfg)
    g = _grid(cfg, p)
    c = cfg.section("correlation")
    seed = cfg.section("noise")["seed"]
    delta = _delta(cfg, g.dt)
    lags = (c["lag_min"], c["lag_max"])
    need = record_length(c["T_list"][-1], lags, g.dt, delta)
    if need > g.t_max + 1e-9:
        raise cfg.error(f"largest T needs t_max >= {need:.6g} (burn-in and lags included); "
                        f"grid.t_max = {g.t_max:.6g}", "correlation", "T_list")
    with run.stage("correlate") as st:
        w, f, d = noise_record(p, g.L, g.dx, seed, g.t_max, delta, g.cfl)
        for T in c["T_list"]:
            est = cross_correlate(d, w, lags, T, burn_in=delta, forcing=f, n_blocks=c["blocks"])
            st.write(f"kernel_T{T:g}.csv", ["lag", "value", "variance"],
                     [est.lags, est.values, est.variance_estimates],
                     T=T, seed=seed, generator=GENERATOR, delta=delta)
            pos = est.lags > 0
            log.info("T=%g: mean kernel over positive lags %.4f", T, est.values[pos].mean())
        seeds = [seed] + ensemble_seeds(seed, c["seeds"] - 1) if c["seeds"] > 1 else [seed]
        study = convergence_study(p, c["T_list"], seeds, lags, g.L, g.dx, delta, g.cfl)
        st.write("convergence.csv", ["T", "mean_error", "std_error"],
                 [list(study.T_list), study.mean_error, study.std_error],
                 seeds=list(seeds))
        write_json(run.out / "convergence_summary.json", {
            **provenance(cfg.hash, "correlate"), "T_list": list(study.T_list),
            "mean_error": study.mean_error, "ratios": study.mean_error / study.mean_error[0],
            "seeds": list(seeds)})
        st.files.append("convergence_summary.json")
    return EXIT_OK


def cmd_energy(run: Run) -> int:
    cfg = run.cfg
    p = _profile(cfg)
    g = _grid(cfg, p)
    t_end = cfg.section("energy").get("t_max")
    if t_end is not None:
        if t_end > g.t_max:
            raise cfg.error("energy.t_max exceeds grid.t_max", "energy", "t_max")
        g = SimGrid(g.L, g.nx, int(round(t_end / g.dt)), g.cfl)
    f = _input(cfg, g)
    supp = f.support()
    tau0 = cfg.section("energy").get("tau0")
    if tau0 is None:
        tau0 = supp[1] + g.dt if supp else 0.0
    tau0 = round(tau0 / g.dt) * g.dt
    if supp is not None and tau0 < supp[1]:
        raise cfg.error(f"energy.tau0 = {tau0} lies inside the input support", "energy", "tau0")
    with run.stage("energy") as st:
        r = simulate(p, g, f)
        dc = decay_constants(p, g.dx)
        rep = decay_report(r, make_weights(dc), tau0)
        n = len(rep.times)
        bound = np.where(rep.times >= tau0, rep.bound, np.nan)
        st.write("energy.csv", ["t", "energy", "boundary_gap", "bound"],
                 [rep.times, rep.energy, rep.boundary_gap[:n], bound])
        st.flags = {"decay": rep.decay_ok, "envelope": rep.envelope_ok, "bound": rep.bound_ok,
                    "bound_rigorous": rep.bound_rigorous_ok, "lemma": rep.lemma_ok}
        write_json(run.out / "energy_summary.json", {
            **provenance(cfg.hash, "energy"), "lambda": dc.lam, "M": dc.M, "ell": dc.ell,
            "fitted_rate": rep.fitted_rate, "K": rep.K_constant, "C": rep.C_constant,
            "tau0": tau0, "trivial": rep.trivial, "pass": rep.passed, "flags": st.flags})
        st.files.append("energy_summary.json")
        log.info("energy: lambda=%.5g fitted=%.5g pass=%s", dc.lam, rep.fitted_rate, rep.passed)
    if not rep.passed:
        raise ToleranceFailure("energy decay certificate failed")
    return EXIT_OK


def _write_reconstruction(st, name, res, meta):
    cols = [res.a_grid, res.area_integral, res.A_rec, res.condition_numbers]
    header = ["a", "Phi", "A_rec", "condition"]
    if res.error_rel is not None:
        cols.append(res.error_rel)
        header.append("error_rel")
    st.write(name, header, cols, **meta)


def cmd_reconstruct(run: Run, mode: str | None = None) -> int:
    cfg = run.cfg
    p = _profile(cfg)
    g = _grid(cfg, p)
    rc = cfg.section("reconstruction")
    mode = mode or rc["mode"]
    a_max = rc["a_max"]
    da = rc.get("da")
    truth = p if rc["compare"] else None
    tik = rc["tikhonov"]
    if mode == "direct":
        span = 2 * a_max + rc["pulse_width"] + 6 * g.dt
        if span > g.t_max + 1e-9:
            raise cfg.error(f"a_max = {a_max} needs h up to lag {2 * a_max:g}; grid.t_max = "
                            f"{g.t_max:g} is too short", "reconstruction", "a_max")
        gd = SimGrid(g.L, g.nx, int(math.ceil(span / g.dt)) + 1, g.cfl)
        with run.stage(f"reconstruct-{mode}") as st:
            ir = deconvolve_impulse_response(p, gd, rc["pulse_width"],
                                             0.0 if isinstance(tik, str) else float(tik))
            st.write("impulse_response.csv", ["t", "h"], [ir.lags, ir.h], source=ir.source,
                     condition=ir.condition, residual=ir.residual)
            res = reconstruct_profile(ir, a_max, da, truth)
            _write_reconstruction(st, "reconstruction.csv", res, {"mode": mode})
            err = res.error_linf
            tol = rc.get("tolerance", DIRECT_TOL)
    else:
        if "noise" not in cfg.data:
            raise cfg.error("from-noise mode needs a 'noise' section")
        seed = cfg.section("noise")["seed"]
        delta = _delta(cfg, g.dt)
        lag_max = 2 * a_max + 0.1
        if cfg.has("correlation"):
            lag_max = max(lag_max, cfg.section("correlation")["lag_max"])
        T = rc["T"]
        need = record_length(T, (-0.5, lag_max), g.dt, delta)
        if need > g.t_max + 1e-9:
            raise cfg.error(f"reconstruction.T = {T:g} needs t_max >= {need:.6g}",
                            "reconstruction", "T")
        seeds = [seed] + (ensemble_seeds(seed, rc["seeds"] - 1) if rc["seeds"] > 1 else [])
        errs = []
        reg = None if tik == 0 else tik
        with run.stage(f"reconstruct-{mode}") as st:
            for i, s in enumerate(seeds):
                ir, _ = impulse_response_from_noise(p, s, T, lag_max, g.L, g.dx, delta,
                                                    regularization=reg)
                res = reconstruct_profile(ir, a_max, da, truth)
                suffix = f"_seed{i}"
                st.write(f"impulse_response{suffix}.csv", ["t", "h"], [ir.lags, ir.h],
                         source=ir.source, seed=s, T=T)
                _write_reconstruction(st, f"reconstruction{suffix}.csv", res,
                                      {"mode": mode, "seed": s, "T": T})
                errs.append(res.error_linf)
                log.info("seed %d: max relative error %s", s, res.error_linf)
            err = float(np.median(errs)) if truth is not None else None
            tol = rc.get("tolerance", NOISE_TOL)
            write_json(run.out / "reconstruction_summary.json", {
                **provenance(cfg.hash, "reconstruct"), "seeds": seeds, "errors": errs,
                "median_error": err, "tolerance": tol})
            st.files.append("reconstruction_summary.json")
    if truth is None:
        return EXIT_OK
    run.stages[f"reconstruct-{mode}"]["passed"] = {"error_linf": err <= tol}
    log.info("reconstruct (%s): error %.4g, tolerance %.3g", mode, err, tol)
    if err > tol:
        raise ToleranceFailure(f"reconstruction error {err:.4g} exceeds {tol}")
    return EXIT_OK


def cmd_demo(run: Run) -> int:
    """Noise -> correlate -> impulse response -> reconstruct -> compare."""
    cmd_simulate(run)
    cmd_energy(run)
    cmd_correlate(run)
    cmd_reconstruct(run, "direct")
    cmd_reconstruct(run, "from-noise")
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "correlate": cmd_correlate, "energy": cmd_energy,
            "reconstruct": cmd_reconstruct, "demo": cmd_demo}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ndcorr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML run configuration")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--seed-override", type=int, help="replace noise.seed")
    common.add_argument("--quiet", action="store_true", help="only report errors")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common], help=COMMANDS[name].__doc__)
        if name == "reconstruct":
            sp.add_argument("--mode", choices=("direct", "from-noise"))
    return parser


def _prepare(args) -> Run:
    if args.config is None:
        if args.command != "demo":
            raise ConfigError(f"'{args.command}' needs --config")
        cfg = parse_config(DEFAULT_DEMO, "<demo>")
    else:
        cfg = load_config(args.config)
    if args.seed_override is not None:
        cfg.data.setdefault("noise", {})
        if not isinstance(cfg.data["noise"], dict):
            cfg.data["noise"] = {}
        cfg.data["noise"]["seed"] = args.seed_override
    validate(cfg, args.command)
    out = args.out or os.environ.get(OUT_ENV) or cfg.section("output").get("dir") or "ndcorr_out"
    return Run(cfg, Path(out), args.command)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr, force=True)
    run = None
    try:
        run = _prepare(args)
        fn = COMMANDS[args.command]
        code = fn(run, args.mode) if args.command == "reconstruct" else fn(run)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except ToleranceFailure as exc:
        log.error("tolerance failure: %s", exc)
        code = EXIT_TOLERANCE
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        log.error("numerical failure: %s", exc)
        code = EXIT_NUMERIC
    except ValueError as exc:
        log.error("invalid input: %s", exc)
        code = EXIT_CONFIG
    if run is not None:
        run.manifest()
    return code


if __name__ == "__main__":
    sys.exit(main())
