"""Command line entry point ``fraclab``.

Every subcommand reads the same configuration (see :mod:`fraclab.config`)
and writes under ``<output>/<subcommand>/``.  The output directory comes
from ``--output``, then ``FRACLAB_OUTPUT_DIR``, then ``run.output``.
Exit status is 0 on success, 1 when a check or budget fails and 2 when
the input is rejected.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from fraclab.checks import run_verify
from fraclab.commutator import higher_commutator
from fraclab.config import ExperimentConfig, RunConfig, load_config
from fraclab.errors import ConfigError, FraclabError
from fraclab.fracint import fractional_integral, k_alpha_profile, l_alpha, riesz_kernel
from fraclab.grid import GridFunction, enumerate_balls
from fraclab.gridio import write_csv
from fraclab.harness import (
    ExperimentSetup,
    RatioReport,
    commutator_experiment,
    hls_experiment,
    inclusion_experiment,
    morrey_experiment,
    refinement_study,
)
from fraclab.norms import bmo_norm, campanato_L_norm, campanato_norm, morrey_norm
from fraclab.semigroup import apply_semigroup, family_by_name

ENV_OUTPUT = "FRACLAB_OUTPUT_DIR"
SUBCOMMANDS = ("evolve", "fracint", "commutator", "norm", "kernel-profile", "verify", "report")


def output_dir(cfg: RunConfig, flag: str | None, sub: str) -> Path:
    base = flag or os.environ.get(ENV_OUTPUT) or cfg.output
    path = Path(base) / sub
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _setup(cfg: RunConfig) -> ExperimentSetup:
    return ExperimentSetup(cfg.grid, cfg.ladder, cfg.seed, cfg.kernel, cfg.quad)


def _member(setup: ExperimentSetup, label: str, role: str | None = None) -> GridFunction:
    for r in ([role] if role else ["f", "b"]):
        corpus = setup.corpus(r)
        if label in corpus.labels:
            return corpus[label].values
    raise ConfigError(f"unknown corpus member '{label}'", key=f"task.{role or 'f'}")


def _operator(cfg: RunConfig, setup: ExperimentSetup):
    alpha, route = cfg.task["alpha"], cfg.task["route"]
    if route == "riesz":
        return lambda g: fractional_integral(g, alpha)
    if route == "semigroup":
        return lambda g: l_alpha(g, alpha, setup.K, cfg.quad)
    raise ConfigError("route must be riesz or semigroup", key="task.route")


# {{{ subcommands

def cmd_evolve(cfg: RunConfig, out: Path) -> int:
    s = _setup(cfg)
    g = apply_semigroup(_member(s, cfg.task["f"], "f"), cfg.task["t"], s.K)
    write_csv(g, out / f"evolve-{cfg.grid.N}.csv")
    return 0


def cmd_fracint(cfg: RunConfig, out: Path) -> int:
    s = _setup(cfg)
    g = _operator(cfg, s)(_member(s, cfg.task["f"], "f"))
    write_csv(g, out / f"fracint-{cfg.grid.N}.csv")
    return 0


def cmd_commutator(cfg: RunConfig, out: Path) -> int:
    s = _setup(cfg)
    g = higher_commutator(
        _member(s, cfg.task["b"], "b"), _member(s, cfg.task["f"], "f"), cfg.task["m"], _operator(cfg, s)
    )
    write_csv(g, out / f"commutator-{cfg.grid.N}.csv")
    return 0


def cmd_norm(cfg: RunConfig, out: Path) -> int:
    s = _setup(cfg)
    f = _member(s, cfg.task["f"])
    balls = s.balls
    name, p, beta = cfg.task["norm"], cfg.task["p"], cfg.task["beta"]
    ladder = {"r_min": cfg.ladder.r_min, "ratio": cfg.ladder.ratio, "count": cfg.ladder.count,
              "stride": cfg.ladder.stride}
    if name == "morrey":
        est = morrey_norm(f, p, beta, balls, ladder)
    elif name == "campanato":
        est = campanato_norm(f, p, beta, balls, ladder)
    elif name == "bmo":
        est = bmo_norm(f, balls, ladder)
    elif name == "campanato_L":
        est = campanato_L_norm(f, p, beta, balls, s.K, ladder=ladder)
    else:
        raise ConfigError("norm must be morrey, campanato, bmo or campanato_L", key="task.norm")
    _write_json(out / f"norm-{cfg.grid.N}.json", est.to_dict())
    return 0


def cmd_kernel_profile(cfg: RunConfig, out: Path) -> int:
    spec = cfg.grid
    K = family_by_name(cfg.kernel, spec.dim)
    alpha = cfg.task["alpha"]
    r = np.geomspace(spec.h, spec.L / 2, cfg.task["points"])
    riesz = riesz_kernel(spec.dim, alpha, r)
    k = k_alpha_profile(K, alpha, r, cfg.quad)
    with open(out / f"kernel-profile-{spec.N}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r", "riesz", "k_alpha", "ratio"])
        for row in zip(r, riesz, k, k / riesz):
            w.writerow([repr(float(v)) for v in row])
    return 0


def cmd_verify(cfg: RunConfig, out: Path) -> int:
    checks = run_verify(cfg.kernel, cfg.seed)
    _write_json(out / "summary.json", {"suite": "verify", "checks": [c.to_dict() for c in checks]})
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: observed {c.observed:.3e}, budget {c.budget:g}")
    return 0 if all(c.passed for c in checks) else 1


def experiment_runner(exp: ExperimentConfig, setup: ExperimentSetup):
    """``N -> RatioReport`` for one configured experiment."""
    p = exp.params

    def run(N: int) -> RatioReport:
        s = setup.at(N)
        fc = s.corpus("f")
        if exp.kind == "commutator":
            return commutator_experiment(
                exp.index_set, fc, s.corpus("b"), s.balls, s.K, p["target"], s.quad, name=exp.name
            )
        if exp.kind == "inclusion":
            rep = inclusion_experiment(fc, p["p"], p["gamma"], s.K, s.balls)
        elif exp.kind == "hls":
            rep = hls_experiment(p["alpha"], p["p"], fc, p["route"], s.K, s.quad)
        else:
            rep = morrey_experiment(p["alpha"], p["p"], p["beta"], fc, s.balls, p["route"], s.K, s.quad)
        return RatioReport(exp.name, rep.params, rep.rows, rep.skipped, rep.N, rep.fingerprint,
                           rep.index_set, rep.flags)

    return run


def cmd_report(cfg: RunConfig, out: Path) -> int:
    setup = _setup(cfg)
    checks, summaries = [], []
    for exp in cfg.experiments:
        stab, reports = refinement_study(exp.name, experiment_runner(exp, setup), cfg.resolutions, exp.budget)
        for rep in reports:
            (out / f"{exp.name}-{rep.N}.csv").write_text(rep.to_csv(), encoding="utf-8")
        ok = stab.status != "fail"
        checks.append({"name": exp.name, "pass": ok, "observed": stab.drift, "budget": exp.budget})
        summaries.append({**reports[-1].summary(stab.drift, ok), "max_ratios": list(stab.max_ratios),
                          "resolutions": list(stab.resolutions), "status": stab.status,
                          "skipped": [len(r.skipped) for r in reports]})
        drift = "n/a" if stab.drift is None else f"{stab.drift:.3%}"
        print(f"{'PASS' if ok else 'FAIL'} {exp.name}: max ratios {list(stab.max_ratios)}, drift {drift}")
    _write_json(out / "summary.json", {"suite": "report", "checks": checks, "experiments": summaries})
    return 0 if all(c["pass"] for c in checks) else 1

# }}}


COMMANDS = {
    "evolve": cmd_evolve,
    "fracint": cmd_fracint,
    "commutator": cmd_commutator,
    "norm": cmd_norm,
    "kernel-profile": cmd_kernel_profile,
    "verify": cmd_verify,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fraclab", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=SUBCOMMANDS)
    ap.add_argument("-c", "--config", help="configuration file (defaults if omitted)")
    ap.add_argument("-o", "--output", help=f"output directory (overrides {ENV_OUTPUT} and run.output)")
    ap.add_argument("-s", "--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                    help="override one configuration key; may be repeated")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.set)
        out = output_dir(cfg, args.output, args.command)
        return COMMANDS[args.command](cfg, out)
    except (FraclabError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
