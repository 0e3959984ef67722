"""Command-line interface.

Subcommands::

    famlvm simulate  --scenario mixed --families 500 --seed 1 --out DIR
    famlvm fit       --data data.csv --scheme PX2_HC --iterations 25000 ...
    famlvm select    --draws draws.csv --threshold 0.5 [--fdr 0.05]
    famlvm bf        --data data.csv --target loading:4 --seed 1 --out DIR
    famlvm replicate --scenario mixed --replicates 20 --workers 4 ...
    famlvm diag      --draws draws.csv [--params lambda_1,alpha_2]

Exit codes: 0 success, 2 configuration problems, 3 data validation
failures, 4 numerical breakdowns. Flags override config-file values, which
override built-in defaults; config values can themselves be overridden by
``FAMLVM_<SECTION>_<KEY>`` environment variables.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import io as fio
from .dataset import impute_missing
from .diagnostics import ess, hpdi, summarize_replicates
from .exceptions import (ConfigError, DfTooSmall, FamlvmError,
                         NotPositiveDefinite, NumericalBreakdown)
from .params import PriorConfig
from .rng import RngHandle, derive_stream
from .sampler import SamplerConfig, run_chain
from .selection import (PathPlan, fdr_select, log_bayes_factor,
                        posterior_inclusion_probability, select_phenotypes)
from .simulate import SCENARIOS, simulate_scenario

EXIT_OK, EXIT_CONFIG, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3, 4


def _build_parser():
    p = argparse.ArgumentParser(prog="famlvm",
                                description="Two-part latent variable model "
                                            "for longitudinal family data")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="INI config file")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--workers", type=int, default=None)

    sp = sub.add_parser("simulate", help="simulate a scenario dataset")
    common(sp)
    sp.add_argument("--scenario", choices=sorted(SCENARIOS), default=None)
    sp.add_argument("--families", type=int, default=None)
    sp.add_argument("--timepoints", type=int, default=None)

    sp = sub.add_parser("fit", help="run one MCMC chain on a dataset")
    common(sp)
    sp.add_argument("--data", required=True)
    sp.add_argument("--scheme", choices=("SG", "PX_HC", "PX2_HC"),
                    default=None)
    sp.add_argument("--iterations", type=int, default=None)
    sp.add_argument("--burn-in", type=int, default=None)
    sp.add_argument("--thin", type=int, default=None)
    sp.add_argument("--independence", action="store_true")
    sp.add_argument("--spike-slab", action="store_true")

    sp = sub.add_parser("select", help="phenotype selection from draws")
    common(sp)
    sp.add_argument("--draws", required=True)
    sp.add_argument("--threshold", type=float, default=None)
    sp.add_argument("--fdr", type=float, default=None)

    sp = sub.add_parser("bf", help="path-sampling Bayes factor")
    common(sp)
    sp.add_argument("--data", required=True)
    sp.add_argument("--target", required=True,
                    help="loading:<j> or covariate:<k1,k2,...> (1-based)")
    sp.add_argument("--scheme", choices=("SG", "PX_HC", "PX2_HC"),
                    default=None)
    sp.add_argument("--burn-in", type=int, default=None)
    sp.add_argument("--keep", type=int, default=None)

    sp = sub.add_parser("replicate", help="simulate-and-fit replicates")
    common(sp)
    sp.add_argument("--scenario", choices=sorted(SCENARIOS), default=None)
    sp.add_argument("--replicates", type=int, default=None)
    sp.add_argument("--families", type=int, default=None)
    sp.add_argument("--timepoints", type=int, default=None)
    sp.add_argument("--scheme", choices=("SG", "PX_HC", "PX2_HC"),
                    default=None)
    sp.add_argument("--iterations", type=int, default=None)
    sp.add_argument("--burn-in", type=int, default=None)
    sp.add_argument("--thin", type=int, default=None)

    sp = sub.add_parser("diag", help="chain diagnostics")
    common(sp)
    sp.add_argument("--draws", required=True)
    sp.add_argument("--params", help="comma-separated column names")
    return p


class _Settings:
    """Layered settings: CLI flag > env-overridden config value > default."""

    def __init__(self, args, section):
        self.args = args
        self.section = section
        self.flat = fio.load_config(args.config) if args.config else {}
        self.digest = fio.config_digest(args.config) if args.config else None

    def get(self, name, default, cast=str):
        value = getattr(self.args, name.replace("-", "_"), None)
        if value is not None and value is not False:
            return value
        key = f"{self.section}.{name.replace('-', '_')}"
        if key in self.flat:
            raw = self.flat[key]
            try:
                if cast is bool:
                    return raw.strip().lower() in ("1", "true", "yes", "on")
                return cast(raw)
            except ValueError as exc:
                raise ConfigError(f"bad config value {key}={raw!r}") from exc
        return default


def _outdir(args):
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def _manifest(settings, out, **fields):
    fio.write_manifest(os.path.join(out, "manifest.json"),
                       command=" ".join(sys.argv[1:]),
                       config_sha256=settings.digest, **fields)


def _parse_target(spec):
    kind, _, rest = spec.partition(":")
    try:
        if kind == "loading":
            return ("loading", int(rest) - 1)
        if kind == "covariate":
            return ("covariate", tuple(int(t) - 1 for t in rest.split(",")))
    except ValueError:
        pass
    raise ConfigError(f"bad --target {spec!r}; use loading:<j> or "
                      "covariate:<k1,k2,...>")


def _cmd_simulate(args):
    s = _Settings(args, "simulate")
    scenario = s.get("scenario", "mixed")
    seed = s.get("seed", 0, int)
    n_fam = s.get("families", 500, int)
    t = s.get("timepoints", 5, int)
    out = _outdir(args)
    d, truth = simulate_scenario(scenario, RngHandle(seed), n_families=n_fam,
                                 t_points=t)
    fio.write_dataset_csv(d, os.path.join(out, "data.csv"))
    fio.write_truth_json(truth, os.path.join(out, "truth.json"))
    _manifest(s, out, seed=seed, scenario=scenario, families=n_fam,
              timepoints=t, outputs=["data.csv", "truth.json"])
    print(f"simulated scenario {scenario!r}: {d.n_rows} rows, "
          f"{d.n_families()} families -> {out}/data.csv")
    return EXIT_OK


def _cmd_fit(args):
    s = _Settings(args, "fit")
    seed = s.get("seed", 0, int)
    cfg = SamplerConfig(
        scheme=s.get("scheme", "PX2_HC"),
        iterations=s.get("iterations", 25000, int),
        burn_in=s.get("burn-in", 5000, int),
        thin=s.get("thin", 1, int),
        independence_mode=s.get("independence", False, bool))
    priors = PriorConfig(spike_slab_enabled=s.get("spike-slab", False, bool))
    d = impute_missing(fio.read_dataset_csv(args.data))
    chain = run_chain(d, priors, cfg, RngHandle(seed))
    out = _outdir(args)
    fio.write_draws_csv(chain, os.path.join(out, "draws.csv"))
    lines = ["parameter,mean,sd,hpdi95_lo,hpdi95_hi,ess"]
    for k, name in enumerate(chain.names):
        col = chain.draws[:, k]
        sd = col.std(ddof=1) if len(col) > 1 else 0.0
        if np.ptp(col) > 0:
            lo, hi = hpdi(col, 0.95)
            n_eff = "%.17g" % ess(col)
        else:
            lo = hi = col[0]
            n_eff = ""
        lines.append(",".join([name] + ["%.17g" % v
                                        for v in (col.mean(), sd, lo, hi)]
                              + [n_eff]))
    fio.atomic_write_text(os.path.join(out, "summary.csv"),
                          "\n".join(lines) + "\n")
    _manifest(s, out, seed=seed, data=args.data, scheme=cfg.scheme,
              iterations=cfg.iterations, burn_in=cfg.burn_in, thin=cfg.thin,
              independence=cfg.independence_mode,
              wall_time=chain.wall_time, outputs=["draws.csv", "summary.csv"])
    print(f"fit {cfg.scheme}: {chain.draws.shape[0]} retained draws "
          f"in {chain.wall_time:.1f}s -> {out}/draws.csv")
    return EXIT_OK


def _cmd_select(args):
    s = _Settings(args, "select")
    names, draws = fio.read_draws_csv(args.draws)
    omega = [(int(n.split("_")[1]), k) for k, n in enumerate(names)
             if n.startswith("omega_")]
    omega.sort()
    pip = np.array([draws[:, k].mean() for _, k in omega])
    fdr = s.get("fdr", None, float)
    if fdr is not None:
        mask, realized = fdr_select(pip, fdr)
        rule = {"rule": "fdr", "rate": fdr, "realized": realized}
    else:
        thr = s.get("threshold", 0.5, float)
        mask = select_phenotypes(pip, thr)
        rule = {"rule": "threshold", "threshold": thr}
    result = {"pip": pip.tolist(), "selected": mask.astype(int).tolist(),
              **rule}
    for j, (p, m) in enumerate(zip(pip, mask), start=1):
        print(f"phenotype {j}: PIP={p:.4f} {'SELECTED' if m else '-'}")
    if args.out:
        out = _outdir(args)
        fio.atomic_write_text(os.path.join(out, "selection.json"),
                              json.dumps(result, indent=2) + "\n")
        _manifest(s, out, draws=args.draws, outputs=["selection.json"])
    return EXIT_OK


def _cmd_bf(args):
    s = _Settings(args, "bf")
    seed = s.get("seed", 0, int)
    target = _parse_target(args.target)
    plan = PathPlan(burn_in=s.get("burn-in", 200, int),
                    keep=s.get("keep", 300, int))
    d = impute_missing(fio.read_dataset_csv(args.data))
    scheme = s.get("scheme", "PX2_HC" if d.binary.any() else "PX_HC")
    result = log_bayes_factor(d, PriorConfig(), target, RngHandle(seed),
                              scheme=scheme, plan=plan)
    print(f"log BF [{args.target}] = {result.log_bf:.3f} "
          f"(MC se {result.se:.3f})")
    if args.out:
        out = _outdir(args)
        fio.write_bf_json(result, os.path.join(out, "bf.json"))
        _manifest(s, out, seed=seed, data=args.data, target=args.target,
                  scheme=scheme, outputs=["bf.json"])
    return EXIT_OK


def _one_replicate(rep, scenario, n_fam, t, cfg, seed):
    d, truth = simulate_scenario(
        scenario, RngHandle(seed, derive_stream(replicate=rep)),
        n_families=n_fam, t_points=t)
    chain = run_chain(impute_missing(d), PriorConfig(), cfg,
                      RngHandle(seed, derive_stream(replicate=rep, chain=1)))
    return chain.posterior_mean(), truth


def _cmd_replicate(args):
    s = _Settings(args, "replicate")
    seed = s.get("seed", 0, int)
    scenario = s.get("scenario", "mixed")
    reps = s.get("replicates", 20, int)
    n_fam = s.get("families", 500, int)
    t = s.get("timepoints", 5, int)
    workers = s.get("workers", 1, int)
    cfg = SamplerConfig(scheme=s.get("scheme", "PX2_HC"),
                        iterations=s.get("iterations", 10000, int),
                        burn_in=s.get("burn-in", 2000, int),
                        thin=s.get("thin", 1, int))
    jobs = [(r, scenario, n_fam, t, cfg, seed) for r in range(reps)]
    if workers > 1:
        from joblib import Parallel, delayed
        results = Parallel(n_jobs=workers)(
            delayed(_one_replicate)(*j) for j in jobs)
    else:
        results = [_one_replicate(*j) for j in jobs]
    truth = results[0][1]
    truth_flat = {}
    for j, v in enumerate(truth.lam, start=1):
        truth_flat[f"lambda_{j}"] = v
    for k, v in enumerate(truth.alpha, start=1):
        truth_flat[f"alpha_{k}"] = v
    summary = {}
    for name, tv in truth_flat.items():
        est = np.array([m[name] for m, _ in results])
        summary[name] = {"truth": float(tv),
                         **summarize_replicates(est, tv)}
    for name, stats in summary.items():
        print(f"{name}: mean={stats['mean']:.4f} bias={stats['bias']:+.4f} "
              f"rmse={stats['rmse']:.4f}")
    if args.out:
        out = _outdir(args)
        fio.atomic_write_text(os.path.join(out, "summary.json"),
                              json.dumps(summary, indent=2) + "\n")
        _manifest(s, out, seed=seed, scenario=scenario, replicates=reps,
                  outputs=["summary.json"])
    return EXIT_OK


def _cmd_diag(args):
    s = _Settings(args, "diag")
    names, draws = fio.read_draws_csv(args.draws)
    wanted = (args.params.split(",") if args.params else names)
    report = {}
    for name in wanted:
        if name not in names:
            raise ConfigError(f"no column {name!r} in {args.draws}")
        col = draws[:, names.index(name)]
        entry = {"mean": float(col.mean()),
                 "sd": float(col.std(ddof=1)) if len(col) > 1 else 0.0}
        if np.ptp(col) > 0:
            entry["ess"] = ess(col)
            lo, hi = hpdi(col, 0.95)
            entry["hpdi95"] = [lo, hi]
        report[name] = entry
        essval = entry.get("ess")
        print(f"{name}: mean={entry['mean']:.4f} sd={entry['sd']:.4f}"
              + (f" ess={essval:.0f}" if essval else ""))
    if args.out:
        out = _outdir(args)
        fio.atomic_write_text(os.path.join(out, "diag.json"),
                              json.dumps(report, indent=2) + "\n")
        _manifest(s, out, draws=args.draws, outputs=["diag.json"])
    return EXIT_OK


_COMMANDS = {"simulate": _cmd_simulate, "fit": _cmd_fit,
             "select": _cmd_select, "bf": _cmd_bf,
             "replicate": _cmd_replicate, "diag": _cmd_diag}


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalBreakdown, NotPositiveDefinite, DfTooSmall) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (FamlvmError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
