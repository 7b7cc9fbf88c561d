"""Command-line front end: simulate, phase1, phase2, phase3, all.

Every command is deterministic given its inputs and --seed: CSV/JSON
artifacts are byte-identical across reruns and SVG figures text-identical.
Exit codes: 0 success, 1 runtime/model error, 2 usage or configuration
error. Option precedence is CLI flag > config file > built-in default; the
config file is a flat ``key = value`` text file using the long option names
with underscores (e.g. ``threshold_split = train``).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import causal, evaluation, glmm, plots, scoring, synthdata
from .data_model import DatasetError, label_responses, parse_dataset, read_sites_csv
from .pooled import GROUPINGS, annotate_risk

log = logging.getLogger("trapscore")


class UsageError(Exception):
    """Configuration problem; maps to exit code 2."""


DEFAULTS = {
    "seed": 0,
    "m": 0.9,
    "nu": "fixed:0.5",
    "grouping": "trap_week",
    "threshold_split": "test",
    "out": "out",
    "n_boot": 500,
    "outcome": "score",
    "exposures": "",
    "radius_km": 1.5,
    "lead_weeks": 2,
    "skip_invalid": False,
    "n_traps": 60,
    "pools": "",
    "sites": "",
    "cases": "",
    "dag": "",
}

_COERCE = {
    "seed": int,
    "m": float,
    "n_boot": int,
    "radius_km": float,
    "lead_weeks": int,
    "n_traps": int,
    "skip_invalid": lambda v: str(v).strip().lower() in ("1", "true", "yes"),
}


def _read_config_file(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"config file not found: {p}")
    values = {}
    for lineno, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{p} line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in DEFAULTS:
            raise UsageError(f"{p} line {lineno}: unknown option {key!r}")
        values[key] = _COERCE.get(key, str)(value.strip())
    return values


def _merge_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(_read_config_file(args.config))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _validate(cfg: dict) -> None:
    if not 0.0 < cfg["m"] <= 1.0:
        raise UsageError(f"--m must lie in (0, 1], got {cfg['m']}")
    if cfg["grouping"] not in GROUPINGS:
        raise UsageError(f"--grouping must be one of {GROUPINGS}")
    if cfg["threshold_split"] not in evaluation.THRESHOLD_SPLITS:
        raise UsageError(f"--threshold-split must be one of {evaluation.THRESHOLD_SPLITS}")
    if cfg["outcome"] not in ("score", "score_prime"):
        raise UsageError("--outcome must be 'score' or 'score_prime'")
    if cfg["n_boot"] < 100:
        raise UsageError("--n-boot must be at least 100")
    nu = cfg["nu"]
    if nu != "grid" and not (nu.startswith("fixed:") and _is_float(nu[6:])):
        raise UsageError(f"--nu must be 'grid' or 'fixed:<value>', got {nu!r}")


def _is_float(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def _fit_config(cfg: dict) -> glmm.FitConfig:
    if cfg["nu"] == "grid":
        return glmm.FitConfig(profile_nu=True)
    return glmm.FitConfig(nu=float(cfg["nu"][6:]))


def _require_files(cfg: dict, keys) -> None:
    for key in keys:
        value = cfg.get(key)
        if not value:
            raise UsageError(f"--{key} is required for this command")
        if not Path(value).exists():
            raise UsageError(f"input file not found: {value}")


def _load_dataset(cfg: dict):
    _require_files(cfg, ("pools", "sites", "cases"))
    ds = parse_dataset(cfg["pools"], cfg["sites"], cfg["cases"], skip_invalid=cfg["skip_invalid"])
    ds = label_responses(ds, radius_km=cfg["radius_km"], lead_weeks=cfg["lead_weeks"])
    return annotate_risk(ds, grouping=cfg["grouping"])


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(cfg: dict) -> None:
    out = _out_dir(cfg)
    world = synthdata.default_world_config(seed=cfg["seed"], n_traps=cfg["n_traps"])
    dataset, truth = synthdata.generate_world(world)
    synthdata.write_world(out, dataset, truth)
    (out / "dag.txt").write_text(
        "# synthetic world: population drives trap quality, canopy is inert\n"
        "pop_total -> score\n"
        "canopy_pct -> score\n"
    )
    log.info(
        "simulated %d traps, %d pools, %d cases -> %s",
        len(dataset.sites), len(dataset.pools), len(dataset.cases), out,
    )


def cmd_phase1(cfg: dict) -> None:
    out = _out_dir(cfg)
    dataset = _load_dataset(cfg)
    fit_config = _fit_config(cfg)

    log.info("fitting full-data model (%d pools, %d sites)", len(dataset.pools), len(dataset.sites))
    model = glmm.fit(dataset, fit_config)
    log.info(
        "fit done in %d objective evaluations: log-likelihood %.4f, range %.3f km, variance %.4f",
        model.n_evals, model.log_likelihood, model.matern.rho, model.matern.sigma2,
    )
    glmm.save_model(model, out / "model.json")

    result = evaluation.cross_validate(
        dataset, fit_config, m=cfg["m"], seed=cfg["seed"], threshold_split=cfg["threshold_split"]
    )
    evaluation.write_confusion_csv(out / "cv_confusions.csv", result.confusions)
    evaluation.write_roc_csv(out / "roc_points.csv", result.fold_rocs)
    plots.save_svg(plots.roc_figure(result.fold_rocs), out / "roc_curves.svg")
    log.info("phase1 artifacts written to %s", out)


def cmd_phase2(cfg: dict) -> None:
    out = _out_dir(cfg)
    confusion_path = out / "cv_confusions.csv"
    if not confusion_path.exists():
        raise UsageError(f"{confusion_path} not found: run the phase1 command first")
    _require_files(cfg, ("sites",))

    confusions = evaluation.read_confusion_csv(confusion_path)
    report = scoring.score_report(confusions, m=cfg["m"])
    sites = read_sites_csv(cfg["sites"], skip_invalid=cfg["skip_invalid"])
    scoring.write_scores_csv(out / "scores.csv", report, sites)
    _write_json(out / "score_summary.json", report.summary)

    weighted = [c.score for c in report.scorecards if c.score is not None]
    if weighted:
        plots.save_svg(plots.score_histogram_figure(weighted, cfg["m"]), out / "score_histogram.svg")
    else:
        log.warning("no traps have a defined sensitivity: histogram omitted")

    table = {s.trap_id: s for s in sites}
    points = [
        (table[c.trap_id].longitude, table[c.trap_id].latitude, c.score)
        for c in report.scorecards
        if c.trap_id in table
    ]
    plots.save_svg(plots.score_map_figure(points, cfg["m"]), out / "score_map.svg")
    log.info("phase2 artifacts written to %s", out)


def cmd_phase3(cfg: dict) -> None:
    out = _out_dir(cfg)
    scores_path = out / "scores.csv"
    if not scores_path.exists():
        raise UsageError(f"{scores_path} not found: run the phase2 command first")
    _require_files(cfg, ("sites", "dag"))

    dag = causal.load_dag(cfg["dag"])
    sites = read_sites_csv(cfg["sites"], skip_invalid=cfg["skip_invalid"])
    scorecards = scoring.read_scores_csv(scores_path, m=cfg["m"])

    covariate_names = set()
    for s in sites:
        covariate_names.update(s.covariates)
    if cfg["exposures"]:
        exposures = [e.strip() for e in cfg["exposures"].split(",") if e.strip()]
    else:
        exposures = sorted(
            n for n in dag.nodes
            if n != "score" and n not in dag.hidden and n in covariate_names
        )
        if not exposures:
            raise UsageError("no DAG node matches a sites.csv covariate column; use --exposures")
    for e in exposures:
        if e not in covariate_names:
            raise UsageError(f"exposure {e!r} is not a covariate column in {cfg['sites']}")

    config = causal.Phase3Config(n_boot=cfg["n_boot"], seed=cfg["seed"], outcome=cfg["outcome"])
    results = causal.run_phase3(scorecards, sites, dag, exposures, config)

    summary = {}
    for name, res in sorted(results.items()):
        summary[name] = {
            "identifiable": res.identifiable,
            "adjustment_set": list(res.adjustment_set) if res.adjustment_set is not None else None,
            "minimal_sets": [list(s) for s in res.minimal_sets],
            "n_boot": cfg["n_boot"],
            "outcome": cfg["outcome"],
        }
        if not res.identifiable:
            log.warning("exposure %s: not identifiable from observed nodes", name)
            continue
        est = res.estimate
        with open(out / f"adrf_{name}.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["exposure", "x", "mu", "se"])
            for x, mu, se in zip(est.grid, est.mu, est.se):
                w.writerow([name, repr(float(x)), repr(float(mu)), repr(float(se))])
        plots.save_svg(
            plots.adrf_figure(est, name, outcome_label=cfg["outcome"]),
            out / f"adrf_{name}.svg",
        )
    _write_json(out / "phase3_summary.json", summary)
    log.info("phase3 artifacts written to %s", out)


def cmd_all(cfg: dict) -> None:
    cmd_phase1(cfg)
    cmd_phase2(cfg)
    cmd_phase3(cfg)


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trapscore",
        description="Score surveillance trap sites and analyze what drives the score.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--out", help="output directory (default: out)")
    common.add_argument("--seed", type=int, help="random seed (default: 0)")
    common.add_argument("--m", type=float, help="sensitivity weight in (0, 1] (default: 0.9)")

    inputs = argparse.ArgumentParser(add_help=False)
    inputs.add_argument("--pools", help="pools.csv path")
    inputs.add_argument("--sites", help="sites.csv path")
    inputs.add_argument("--cases", help="cases.csv path")
    inputs.add_argument("--dag", help="DAG edge-list path")
    inputs.add_argument("--nu", help="'fixed:<value>' or 'grid' (default: fixed:0.5)")
    inputs.add_argument("--grouping", choices=GROUPINGS, help="risk grouping (default: trap_week)")
    inputs.add_argument(
        "--threshold-split", dest="threshold_split", choices=evaluation.THRESHOLD_SPLITS,
        help="split used to pick the classification threshold (default: test)",
    )
    inputs.add_argument("--radius-km", dest="radius_km", type=float, help="labelling radius (default: 1.5)")
    inputs.add_argument("--lead-weeks", dest="lead_weeks", type=int, help="labelling lead (default: 2)")
    inputs.add_argument("--n-boot", dest="n_boot", type=int, help="bootstrap replicates (default: 500)")
    inputs.add_argument("--outcome", choices=("score", "score_prime"), help="phase-3 outcome column")
    inputs.add_argument("--exposures", help="comma-separated exposure covariates (default: DAG nodes)")
    inputs.add_argument(
        "--skip-invalid", dest="skip_invalid", action="store_const", const=True,
        help="drop invalid CSV rows with a warning instead of aborting",
    )

    sim = sub.add_parser("simulate", parents=[common], help="write a synthetic dataset directory")
    sim.add_argument("--n-traps", dest="n_traps", type=int, help="number of traps (default: 60)")

    sub.add_parser("phase1", parents=[common, inputs], help="fit + cross-validate the spatial model")
    sub.add_parser("phase2", parents=[common, inputs], help="score traps from phase1 confusions")
    sub.add_parser("phase3", parents=[common, inputs], help="causal dose-response of the score")
    sub.add_parser("all", parents=[common, inputs], help="phase1 + phase2 + phase3")
    return parser


COMMANDS = {
    "simulate": cmd_simulate,
    "phase1": cmd_phase1,
    "phase2": cmd_phase2,
    "phase3": cmd_phase3,
    "all": cmd_all,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _merge_config(args)
        _validate(cfg)
        COMMANDS[args.command](cfg)
        return 0
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except DatasetError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except causal.DagError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (glmm.GlmmError, evaluation.FoldFitError, causal.CausalModelError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
