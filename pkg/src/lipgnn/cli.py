"""Command-line entry point: ``lipgnn <subcommand>``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
Progress goes to stderr; every artifact is written under ``--out``. Wall-clock
timestamps appear only in the ``run.log`` sidecar and the trace's seconds column.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import config as configmod
from .constraints import check_feasibility, scenario_sample_size
from .gnn import load_checkpoint, save_checkpoint
from .plotting import plot_profile, plot_sweep
from .robustness import RobustnessReport, profile_frequency_response, run_sweep
from .tasks import write_dataset
from .training import TrainTrace, TrainingDiverged, train

log = logging.getLogger("lipgnn")


class UsageError(Exception):
    pass


def _prepare_out(out, force: bool) -> Path:
    path = Path(out)
    if path.exists() and any(path.iterdir()) and not force:
        raise UsageError(f"output directory {path} exists and is not empty (use --force)")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _attach_sidecar(out: Path) -> None:
    handler = logging.FileHandler(out / "run.log", mode="a")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    log.addHandler(handler)


def cmd_gen_data(args) -> int:
    cfg = configmod.load(args.config, args.seed)
    out = _prepare_out(args.out, args.force)
    _attach_sidecar(out)
    ds = configmod.build_dataset(cfg)
    write_dataset(out, ds)
    configmod.dump(cfg, out / "config.resolved.json")
    log.info("wrote %d samples on %d graph(s) to %s", ds.y.size, len(ds.operators), out)
    return 0


def _fmt(v) -> str:
    return "n/a" if v is None else f"{v:.3e}"


def cmd_train(args) -> int:
    cfg = configmod.load(args.config, args.seed)
    if args.resume and not Path(args.resume).is_file():
        raise UsageError(f"checkpoint {args.resume} not found")
    out = _prepare_out(args.out, args.force or bool(args.resume))
    _attach_sidecar(out)
    ds = configmod.dataset_from(cfg, args.data)
    method = cfg["train"]["method"]
    spec = configmod.build_constraint(cfg, ds) if method == "lipschitz" else None
    tcfg = configmod.build_train_config(cfg, spec)
    start, trace = 0, None
    if args.resume:
        model, meta = load_checkpoint(args.resume)
        start = int(meta["epochs_done"])
        trace = TrainTrace.from_dict(meta["trace"])
        log.info("resuming from %s at epoch %d", args.resume, start)
    else:
        model = configmod.build_model(cfg, ds)
    try:
        model, trace = train(model, ds.subset("train"), tcfg, start, trace, log=log.info)
    except TrainingDiverged as exc:
        exc.trace.to_csv(out / "trace.csv")
        log.error("training aborted: %s", exc)
        return 1
    meta = {"method": method, "epochs_done": tcfg.epochs, "config": cfg,
            "trace": trace.as_dict(),
            "constraint": spec.to_dict() if spec is not None else None}
    save_checkpoint(out / "checkpoint.json", model, meta)
    trace.to_csv(out / "trace.csv")
    configmod.dump(cfg, out / "config.resolved.json")
    report = {"method": method, "violation": None, "response_violation": None}
    if spec is not None:
        spec.save(out / "constraint.json")
        grid = cfg["profile"]["grid_points"] if spec.kind == "scenario" else None
        rep = check_feasibility(model, spec, grid, tcfg.layer_bounds)
        report.update(violation=rep.box_violation, response_violation=rep.max_violation,
                      grid_violation_fraction=rep.grid_violation_fraction,
                      bound_c=rep.bound_c, free_directions=rep.free_directions)
    (out / "feasibility.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"method {method}: max violation {_fmt(report['violation'])} "
          f"(response {_fmt(report['response_violation'])})")
    return 0


def _load_models(paths) -> tuple[dict, dict]:
    models, metas = {}, {}
    for p in paths:
        if not Path(p).is_file():
            raise UsageError(f"checkpoint {p} not found")
        model, meta = load_checkpoint(p)
        name = meta.get("method") or Path(p).stem
        base, k = name, 2
        while name in models:
            name = f"{base}_{k}"
            k += 1
        models[name], metas[name] = model, meta
    return models, metas


def cmd_eval(args) -> int:
    cfg = configmod.load(args.config, args.seed)
    models, _ = _load_models(args.checkpoints)
    out = _prepare_out(args.out, args.force)
    _attach_sidecar(out)
    ds = configmod.dataset_from(cfg, args.data)
    data = ds.subset("test")
    report = None
    for sweep in configmod.build_sweeps(cfg):
        log.info("%s sweep over %s", sweep.perturbation, list(sweep.magnitudes))
        part = run_sweep(models, data, sweep, workers=args.threads)
        if report is None:
            report = part
        else:
            report.extend(part)
    if report is None:
        report = RobustnessReport([], {}, "accuracy")
    report.to_csv(out / "report.csv")
    (out / "report.json").write_text(json.dumps(
        {"clean": report.clean, "metric": report.metric, "metadata": report.metadata},
        indent=2, sort_keys=True) + "\n")
    configmod.dump(cfg, out / "config.resolved.json")
    if report.rows:
        plot_sweep(report, out / "report")
    for name, value in report.clean.items():
        print(f"{name}: clean {report.metric} {value:.4f}")
    return 0


def cmd_freq_response(args) -> int:
    models, metas = _load_models(args.checkpoints)
    bounds = {}
    interval = None
    for name, meta in metas.items():
        spec = meta.get("constraint")
        if spec:
            bounds[name] = spec["bound_c"]
            interval = interval or spec.get("interval")
    if args.bound is not None:
        bounds = {name: args.bound for name in models}
    if args.a is not None or args.b is not None:
        if args.a is None or args.b is None:
            raise UsageError("--a and --b must be given together")
        interval = (args.a, args.b)
    if interval is None:
        raise UsageError("no interval in the checkpoints; pass --a and --b")
    out = _prepare_out(args.out, args.force)
    _attach_sidecar(out)
    prof = profile_frequency_response(models, tuple(interval), args.grid, bounds)
    prof.to_csv(out / "profile.csv")
    plot_profile(prof, out / "profile")
    summary = {name: {"max_h_star": float(v.max()),
                      "bound": prof.bounds.get(name),
                      "grid_violation_fraction": prof.violation.get(name)}
               for name, v in prof.h_star.items()}
    (out / "profile.json").write_text(json.dumps(
        {"interval": list(interval), "grid_points": args.grid, "models": summary},
        indent=2, sort_keys=True) + "\n")
    for name, s in summary.items():
        frac = s["grid_violation_fraction"]
        extra = "" if frac is None else f", violation fraction {frac:.4f}"
        print(f"{name}: max H* {s['max_h_star']:.4f}{extra}")
    return 0


def cmd_scenario_sample_size(args) -> int:
    print(scenario_sample_size(args.epsilon, args.delta, args.K))
    return 0


def _open_unit(text: str) -> float:
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"must be in (0, 1), got {v}")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lipgnn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", help="JSON run config (defaults used when omitted)")
        p.add_argument("--out", required=out_required, help="output directory")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--threads", type=_positive_int, default=1, help="worker cap")
        p.add_argument("--force", action="store_true", help="write into a non-empty --out")

    p = sub.add_parser("gen-data", help="generate a dataset directory")
    common(p)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train one model")
    common(p)
    p.add_argument("--data", help="dataset directory from gen-data")
    p.add_argument("--resume", help="checkpoint to continue from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="robustness sweeps over checkpoints")
    common(p)
    p.add_argument("--data", help="dataset directory from gen-data")
    p.add_argument("checkpoints", nargs="+")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("freq-response", help="max frequency response profile")
    common(p)
    p.add_argument("--a", type=float, help="interval start")
    p.add_argument("--b", type=float, help="interval end")
    p.add_argument("--grid", type=_positive_int, default=1001, help="grid points")
    p.add_argument("--bound", type=float, help="bound c applied to every model")
    p.add_argument("checkpoints", nargs="+")
    p.set_defaults(func=cmd_freq_response)

    p = sub.add_parser("scenario-sample-size", help="VC sample-size bound m(eps, delta, K)")
    p.add_argument("--epsilon", type=_open_unit, required=True)
    p.add_argument("--delta", type=_open_unit, required=True)
    p.add_argument("-K", "--taps", dest="K", type=_positive_int, required=True)
    p.set_defaults(func=cmd_scenario_sample_size)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not log.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(message)s"))
        log.addHandler(handler)
        log.setLevel(logging.INFO)
        log.propagate = False
    try:
        return args.func(args)
    except (UsageError, ValueError) as exc:
        print(f"lipgnn: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"lipgnn: failed: {exc}", file=sys.stderr)
        return 1
    finally:
        for h in list(log.handlers):
            if isinstance(h, logging.FileHandler):
                log.removeHandler(h)
                h.close()


if __name__ == "__main__":
    sys.exit(main())
