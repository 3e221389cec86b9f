"""Command-line entry point.

Every subcommand reads an optional JSON config (``--config``), validates it
and writes its artifacts to the configured paths. Failures print one JSON
object ``{"error": ..., "message": ...}`` on stderr and exit nonzero.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .amg import amg_solve
from .config import (
    ConfigError,
    amg_config,
    load_config,
    network_spec,
    split_spec,
    suite_config,
    timing_policy,
    train_config,
)
from .dataset import collect_curves, machine_tag, read_dataset, split_dataset, write_dataset
from .evaluate import aggregate, evaluate_problems, write_report
from .nn import load_checkpoint, save_checkpoint, train, write_history_csv
from .problems import generate_suite, read_suite, write_suite
from .sparse import read_matrix_market
from .tuner import CalibrationResult, calibrate_sigma_bar, predict_curve, sigma_hat, tune_matrix

EXIT_FAILURE = 1
EXIT_CONFIG = 2


def bundled_matrix_path() -> Path:
    """Path of the packaged 8x8x8 interior-node Poisson matrix."""
    return Path(str(resources.files("amgtune").joinpath("data/poisson8.mtx")))


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("AMG_THREADS", "1")))
    except ValueError:
        raise ConfigError("AMG_THREADS must be an integer") from None


def _require(cfg: dict, key: str) -> str:
    path = cfg["paths"].get(key)
    if not path:
        raise ConfigError(f"paths.{key} is required for this command")
    return path


def _write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _emit(obj) -> None:
    json.dump(obj, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _sigma_bar(cfg: dict) -> float:
    if cfg["tuner"].get("sigma_bar") is not None:
        return float(cfg["tuner"]["sigma_bar"])
    path = _require(cfg, "calibration")
    with open(path, encoding="utf-8") as fh:
        return CalibrationResult.from_dict(json.load(fh)).sigma_bar


def cmd_gen_problems(cfg, args):
    out = _require(cfg, "suite_dir")
    insts = generate_suite(suite_config(cfg))
    manifest = write_suite(out, insts)
    _emit({"problems": len(insts), "manifest": str(manifest)})


def cmd_collect(cfg, args):
    insts = read_suite(_require(cfg, "suite_dir"))
    out = _require(cfg, "dataset")
    d = cfg["dataset"]
    policy = timing_policy(cfg)
    curves = collect_curves(insts, amg_config(cfg), policy, m=d["m"], window=d["window"],
                            degree=d["degree"], review_threshold=d["review_threshold"],
                            workers=max(d["workers"], _threads()), tag=machine_tag())
    write_dataset(out, curves)
    flagged = [{"problem_id": c.problem_id, "degenerate": c.degenerate,
                "nonconverged_points": int(np.sum(c.nonconverged))}
               for c in curves if c.review_flag]
    review = str(out) + ".review.json"
    _write_json(review, {"flagged": flagged, "review_threshold": d["review_threshold"],
                         "timing_mode": policy.mode, "budget_seconds": policy.budget_seconds})
    _emit({"curves": len(curves), "flagged": len(flagged), "dataset": str(out), "review": review})


def cmd_train(cfg, args):
    curves = read_dataset(_require(cfg, "dataset"))
    tr, va, _ = split_dataset(curves, split_spec(cfg))
    spec = network_spec(cfg)
    tcfg = train_config(cfg)
    init = None
    if cfg["paths"].get("init_from"):
        init, _ = load_checkpoint(cfg["paths"]["init_from"])
    params, hist = train(tr, va, spec, tcfg, init=init)
    ckpt = _require(cfg, "checkpoint")
    save_checkpoint(ckpt, params, {"train": tcfg.to_dict(), "best_epoch": hist.best_epoch,
                                   "best_val_loss": hist.val_loss[hist.best_epoch],
                                   "epochs_run": len(hist.epoch)})
    history = cfg["paths"].get("history") or str(ckpt) + ".history.csv"
    write_history_csv(history, hist)
    _emit({"checkpoint": str(ckpt), "history": history, "best_epoch": hist.best_epoch,
           "best_val_loss": hist.val_loss[hist.best_epoch]})


def cmd_calibrate(cfg, args):
    params, _ = load_checkpoint(_require(cfg, "checkpoint"))
    _, va, _ = split_dataset(read_dataset(_require(cfg, "dataset")), split_spec(cfg))
    va = [c for c in va if cfg["train"]["include_flagged"] or not c.review_flag]
    if not va:
        raise ValueError("validation split is empty")
    sig = [sigma_hat(predict_curve(params, c.V_hat, c.p, c.log2_n1)) for c in va]
    res = calibrate_sigma_bar(sig, [c.problem_id for c in va])
    out = _require(cfg, "calibration")
    _write_json(out, res.to_dict())
    _emit({"sigma_bar": res.sigma_bar, "elbow_index": res.elbow, "calibration": str(out)})


def _load_matrix(args):
    if not args.matrix:
        raise ConfigError("--matrix is required")
    return read_matrix_market(args.matrix)


def cmd_tune(cfg, args):
    ckpt = _require(cfg, "checkpoint")
    A = _load_matrix(args)
    params, _ = load_checkpoint(ckpt)
    res = tune_matrix(A, params, _sigma_bar(cfg), args.p, cfg["tuner"]["default_theta"])
    if args.out:
        res.write_json(args.out)
    if args.curve_csv:
        res.write_curve_csv(args.curve_csv)
    _emit(res.to_dict())


def cmd_solve(cfg, args):
    A = _load_matrix(args)
    f = np.atleast_1d(np.loadtxt(args.rhs)) if args.rhs else np.ones(A.n_rows)
    tuned = None
    if args.auto:
        params, _ = load_checkpoint(_require(cfg, "checkpoint"))
        tuned = tune_matrix(A, params, _sigma_bar(cfg), args.p, cfg["tuner"]["default_theta"])
        theta = tuned.theta_star
    else:
        theta = args.theta if args.theta is not None else amg_config(cfg).theta
    u, stats = amg_solve(A, f, None, amg_config(cfg).with_theta(theta))
    if tuned is not None:
        stats.tuner_seconds = tuned.seconds
    if args.solution:
        np.savetxt(args.solution, u, fmt="%.17g")
    out = stats.to_dict()
    if tuned is not None:
        out["tune"] = {k: v for k, v in tuned.to_dict().items() if k != "curve"}
    _emit(out)
    if not stats.converged:
        raise RuntimeError(f"solver did not converge in {stats.iterations} iterations "
                           f"(relative residual {stats.relative_residual:.3e})")


def cmd_eval(cfg, args):
    params, _ = load_checkpoint(_require(cfg, "checkpoint"))
    curves = read_dataset(_require(cfg, "dataset"))
    _, _, te = split_dataset(curves, split_spec(cfg))
    insts = {i.problem_id: i for i in read_suite(_require(cfg, "suite_dir"))}
    missing = [c.problem_id for c in te if c.problem_id not in insts]
    if missing:
        raise ValueError(f"test problems missing from suite: {missing[:5]}")
    sb = _sigma_bar(cfg)
    baseline = cfg["tuner"]["baseline_theta"]
    records = evaluate_problems([insts[c.problem_id] for c in te], te, params, sb,
                                amg_config(cfg), timing_policy(cfg), baseline)
    summary = aggregate(records, baseline, sb)
    out = _require(cfg, "report_dir")
    write_report(out, summary, records)
    _emit({"report_dir": str(out), **summary.to_dict()})


def cmd_export_plots(cfg, args):
    curves = read_dataset(_require(cfg, "dataset"))
    out = args.out or str(_require(cfg, "dataset")) + ".curves.csv"
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["problem_id", "theta", "t_raw_mean", "t_smoothed", "t_normalized",
                    "nonconverged", "review_flag"])
        for c in curves:
            for j, th in enumerate(c.theta_grid):
                w.writerow([c.problem_id, repr(float(th)), repr(float(c.t_raw_mean[j])),
                            repr(float(c.t_smoothed[j])), repr(float(c.t_normalized[j])),
                            int(c.nonconverged[j]), int(c.review_flag)])
    _emit({"csv": out, "curves": len(curves)})


COMMANDS = {
    "gen-problems": cmd_gen_problems,
    "collect": cmd_collect,
    "train": cmd_train,
    "calibrate": cmd_calibrate,
    "tune": cmd_tune,
    "solve": cmd_solve,
    "eval": cmd_eval,
    "export-plots": cmd_export_plots,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="amgtune", description="Learned strength-threshold tuning for AMG.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="override the top-level seed")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-problems", parents=[common], help="write a problem suite")
    p.add_argument("--out", help="suite directory (paths.suite_dir)")
    p.add_argument("--count", type=int)

    p = sub.add_parser("collect", parents=[common], help="threshold sweeps -> dataset")
    p.add_argument("--suite", help="suite directory (paths.suite_dir)")
    p.add_argument("--out", help="dataset file (paths.dataset)")
    p.add_argument("--mode", choices=["cost_model", "wallclock"])

    p = sub.add_parser("train", parents=[common], help="train the cost network")
    p.add_argument("--dataset")
    p.add_argument("--out", help="checkpoint file (paths.checkpoint)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--freeze-conv", action="store_true")
    p.add_argument("--init-from", help="checkpoint to start from")

    p = sub.add_parser("calibrate", parents=[common], help="uncertainty threshold from validation split")
    p.add_argument("--checkpoint")
    p.add_argument("--dataset")
    p.add_argument("--out", help="calibration file (paths.calibration)")

    for name, hlp in (("tune", "predict the threshold for a matrix"),
                      ("solve", "solve a MatrixMarket system")):
        p = sub.add_parser(name, parents=[common], help=hlp)
        p.add_argument("--matrix", help="MatrixMarket file")
        p.add_argument("--checkpoint")
        p.add_argument("--calibration")
        p.add_argument("--sigma-bar", type=float)
        p.add_argument("--p", type=int, default=1, help="FE degree fed to the network")
        if name == "tune":
            p.add_argument("--out", help="TuneResult JSON")
            p.add_argument("--curve-csv", help="predicted curve as CSV")
        else:
            p.add_argument("--rhs", help="right-hand side, one value per line (default: ones)")
            p.add_argument("--solution", help="write the solution vector here")
            g = p.add_mutually_exclusive_group()
            g.add_argument("--theta", type=float)
            g.add_argument("--auto", action="store_true", help="select theta with the network")

    p = sub.add_parser("eval", parents=[common], help="performance report on the test split")
    p.add_argument("--suite")
    p.add_argument("--dataset")
    p.add_argument("--checkpoint")
    p.add_argument("--calibration")
    p.add_argument("--out", help="report directory (paths.report_dir)")

    p = sub.add_parser("export-plots", parents=[common], help="dataset curves as CSV")
    p.add_argument("--dataset")
    p.add_argument("--out")
    return ap


def _overrides(args) -> dict:
    paths = {}
    o: dict = {"paths": paths}
    get = lambda name: getattr(args, name, None)  # noqa: E731
    cmd = args.command
    out_key = {"gen-problems": "suite_dir", "collect": "dataset", "train": "checkpoint",
               "calibrate": "calibration", "eval": "report_dir"}.get(cmd)
    if out_key and get("out"):
        paths[out_key] = get("out")
    for flag, key in (("suite", "suite_dir"), ("dataset", "dataset"), ("checkpoint", "checkpoint"),
                      ("calibration", "calibration"), ("init_from", "init_from")):
        if get(flag):
            paths[key] = get(flag)
    if get("seed") is not None:
        o["seed"] = get("seed")
    if get("count") is not None:
        o["problems"] = {"count": get("count")}
    if get("mode"):
        o["dataset"] = {"mode": get("mode")}
    train_o = {}
    if get("epochs") is not None:
        train_o["max_epochs"] = get("epochs")
    if get("freeze_conv"):
        train_o["freeze_conv"] = True
    if train_o:
        o["train"] = train_o
    if get("sigma_bar") is not None:
        o["tuner"] = {"sigma_bar": get("sigma_bar")}
    return o


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        cfg = load_config(args.config, _overrides(args))
        COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        json.dump({"error": "ConfigError", "message": str(exc), "command": args.command}, sys.stderr)
        sys.stderr.write("\n")
        return EXIT_CONFIG
    except Exception as exc:  # reported as machine-readable JSON
        json.dump({"error": type(exc).__name__, "message": str(exc), "command": args.command,
                   "seconds": time.perf_counter() - t0}, sys.stderr)
        sys.stderr.write("\n")
        return EXIT_FAILURE
    return 0


if __name__ == "__main__":
    sys.exit(main())
