"""Command-line driver: ``segal-lab <subcommand> [options]``.

Every run writes a JSON report (schema 1) and exits with
0 when all residuals are within tolerance, 1 on a tolerance failure and
2 on a configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field

from . import checks

SCHEMA = 1
DEFAULT_SEED = 12345
DEFAULT_REPORT = "segal_report.json"

log = logging.getLogger("segal_lab")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    subcommand: str
    m: float = 1.0
    R: float = 1.0
    L: float = 1.0
    L1: float = 1.0
    L2: float = 1.0
    n_max: int = 16
    seed: int = DEFAULT_SEED
    regime: str = "truncated"
    out: str = DEFAULT_REPORT
    # subcommand specifics
    M: float = 1.0
    dims: list = field(default_factory=lambda: [1, 2, 3, 4, 5])
    draws: int = 50
    t_points: int = 64
    samples: int = 100_000
    chains: int = 4
    lam: float = 0.1
    csv: str | None = None

    def validate(self):
        if not (self.m > 0 and self.R > 0 and self.L > 0 and self.L1 > 0 and self.L2 > 0):
            raise ConfigError("m, R, L, L1, L2 must be positive")
        if self.n_max < 1:
            raise ConfigError("--n-max must be >= 1")
        if self.regime not in ("truncated", "zeta"):
            raise ConfigError("--regime must be 'truncated' or 'zeta'")
        if self.t_points < 4 or self.t_points % 2:
            raise ConfigError("--t-points must be an even number >= 4")
        if self.samples < 1000:
            raise ConfigError("--samples must be at least 1000 for a reported run")
        if self.chains < 1:
            raise ConfigError("--chains must be >= 1")
        if any(d not in (1, 2, 3, 4, 5) for d in self.dims):
            raise ConfigError("--dims entries must lie in 1..5")
        if self.M < 0:
            raise ConfigError("--M must be non-negative")
        if self.lam < 0:
            raise ConfigError("--lam must be non-negative (P bounded below)")


def _run_kakutani(c: RunConfig):
    m = 0.0 if c.m == c.M else c.m
    return checks.check_kakutani(m=min(m, c.M), M=max(m, c.M), dims=tuple(c.dims), R=c.R)


def _run_mc(c: RunConfig):
    res = checks.check_mc(m=c.m, R=c.R, L=c.L, n_max=c.n_max, lam=c.lam, samples=c.samples, seed=c.seed, chains=c.chains)
    if c.csv:
        from .interacting import MCConfig, fk_log_weight, Ordering, sample_gff_torus, write_trace_csv

        cfg = MCConfig(m=c.m, R=c.R, L=c.L, n_max=c.n_max, P=(0, 0, 0, 0, c.lam), n_samples=c.samples, seed=c.seed)
        g = sample_gff_torus(cfg, c.seed, size=min(c.samples, 4096))
        write_trace_csv(c.csv, fk_log_weight(g, cfg.P, Ordering.at_cutoff(cfg)), ("index", "log_weight"))
    return res


RUNNERS = {
    "kakutani": _run_kakutani,
    "dtn-verify": lambda c: checks.check_dtn(),
    "det-glue": lambda c: checks.check_det_glue(m=c.m, R=c.R, n_max=min(c.n_max, 16), draws=c.draws, seed=c.seed),
    "anomaly": lambda c: checks.check_anomaly(m=c.m, R=c.R, L1=c.L1, L2=c.L2 if c.L2 != c.L1 else c.L1 + 0.7, n_max=max(c.n_max, 8)),
    "wick-test": lambda c: checks.check_wick(seed=c.seed),
    "sew-free": lambda c: checks.check_sew(m=c.m, R=c.R, L1=c.L1, L2=c.L2, n_max=c.n_max),
    "trace-check": lambda c: checks.check_trace(m=c.m, R=c.R, L=c.L, n_max=c.n_max),
    "disintegrate": lambda c: checks.check_disintegration(m=c.m, R=c.R, L=c.L, n_max=c.n_max, t_points=c.t_points, seed=c.seed),
    "mc-torus": _run_mc,
    "halfdensity": lambda c: checks.check_halfdensity(seed=c.seed),
}
SUITE = ["dtn-verify", "sew-free", "trace-check", "det-glue", "anomaly", "disintegrate",
         "kakutani", "wick-test", "halfdensity", "mc-torus"]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file whose keys mirror the long flags (flags win)")
    common.add_argument("--m", type=float, help="mass (default 1)")
    common.add_argument("--R", type=float, help="circle radius (default 1)")
    common.add_argument("--L", type=float, help="cylinder height / torus t-circumference (default 1)")
    common.add_argument("--L1", type=float, help="first cylinder height (default 1)")
    common.add_argument("--L2", type=float, help="second cylinder height (default 1)")
    common.add_argument("--n-max", dest="n_max", type=int, help="theta-mode cutoff (default 16)")
    common.add_argument("--seed", type=int, help=f"RNG seed (default {DEFAULT_SEED}, or $SEGAL_SEED)")
    common.add_argument("--regime", choices=["truncated", "zeta"], help="determinant regime label")
    common.add_argument("--out", help=f"report path (default {DEFAULT_REPORT})")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="segal-lab", description="Sewing-identity verification for free and P(phi)_2 fields on flat cylinders.")
    sub = p.add_subparsers(dest="subcommand", required=True)
    for name in ["dtn-verify", "det-glue", "anomaly", "wick-test", "sew-free", "trace-check",
                 "disintegrate", "mc-torus", "kakutani", "halfdensity", "suite"]:
        sp = sub.add_parser(name, parents=[common])
        if name in ("kakutani", "suite"):
            sp.add_argument("--M", type=float, help="second mass (default 1; first is --m, or 0 if equal)")
            sp.add_argument("--dims", type=int, nargs="+", help="dimensions d for the model spectrum n^(2/d)")
        if name in ("det-glue", "suite"):
            sp.add_argument("--draws", type=int, help="random geometries (default 50)")
        if name in ("disintegrate", "suite"):
            sp.add_argument("--t-points", dest="t_points", type=int, help="t-grid points on the double (default 64)")
        if name in ("mc-torus", "suite"):
            sp.add_argument("--samples", type=int, help="Monte Carlo samples per run (default 100000)")
            sp.add_argument("--chains", type=int, help="independent chains (default 4)")
            sp.add_argument("--lam", type=float, help="quartic coupling (default 0.1)")
            sp.add_argument("--csv", help="write a log-weight trace CSV here")
    return p


def resolve_config(ns: argparse.Namespace, environ=os.environ) -> RunConfig:
    """defaults < $SEGAL_SEED < config file < explicit flags."""
    values = {}
    env_seed = environ.get("SEGAL_SEED")
    if env_seed is not None:
        try:
            values["seed"] = int(env_seed)
        except ValueError:
            raise ConfigError(f"SEGAL_SEED must be an integer, got {env_seed!r}") from None
    if ns.config:
        try:
            with open(ns.config) as fh:
                file_values = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {ns.config}: {exc}") from None
        if not isinstance(file_values, dict):
            raise ConfigError("config file must hold a JSON object")
        known = set(RunConfig.__dataclass_fields__) - {"subcommand"}
        for k, v in file_values.items():
            key = k.replace("-", "_")
            if key not in known:
                raise ConfigError(f"unknown config key {k!r}")
            values[key] = v
    for k, v in vars(ns).items():
        if k in ("config", "subcommand", "verbose") or v is None:
            continue
        values[k] = v
    try:
        cfg = RunConfig(ns.subcommand, **values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    cfg.validate()
    return cfg


def _clean(x):
    """Make a value JSON-safe and deterministic."""
    if isinstance(x, float):
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if hasattr(x, "item"):
        return _clean(x.item())
    return x


def write_report(path: str, report: dict) -> None:
    with open(path, "w") as fh:
        json.dump(_clean(report), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out_from_argv(argv) -> str:
    for i, a in enumerate(argv):
        if a == "--out" and i + 1 < len(argv):
            return argv[i + 1]
        if a.startswith("--out="):
            return a.split("=", 1)[1]
    return DEFAULT_REPORT


def run(argv=None, environ=os.environ) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage (or help)
        code = int(exc.code or 0)
        if code:
            out = _out_from_argv(argv if argv is not None else sys.argv[1:])
            write_report(out, {"schema": SCHEMA, "command": None, "error": "invalid command line", "pass": False, "results": []})
        return code
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    out = ns.out or DEFAULT_REPORT
    report = {"schema": SCHEMA, "command": ns.subcommand}
    try:
        cfg = resolve_config(ns, environ)
        out = cfg.out
    except ConfigError as exc:
        report.update({"error": str(exc), "pass": False, "results": []})
        write_report(out, report)
        print(f"segal-lab: configuration error: {exc}", file=sys.stderr)
        return 2
    params = asdict(cfg)
    params.pop("out")
    report["params"] = params
    names = SUITE if cfg.subcommand == "suite" else [cfg.subcommand]
    results = []
    for name in names:
        log.info("running %s", name)
        try:
            res = RUNNERS[name](cfg)
        except ValueError as exc:
            report.update({"error": f"{name}: {exc}", "pass": False, "results": results})
            write_report(out, report)
            print(f"segal-lab: configuration error in {name}: {exc}", file=sys.stderr)
            return 2
        for r in res:
            r["group"] = name
        results.extend(res)
    ok = all(r["pass"] for r in results)
    report["results"] = results
    report["pass"] = ok
    write_report(out, report)
    for r in results:
        print(f"{'PASS' if r['pass'] else 'FAIL'}  {r['check']:<34} residual={r['residual']:.3e}  tol={r['tolerance']:.1e}  [{r['regime']}]")
    print(f"report written to {out}")
    return 0 if ok else 1


def main(argv=None) -> int:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
