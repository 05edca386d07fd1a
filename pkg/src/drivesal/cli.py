"""Command-line front end.

Thin client over the library: each subcommand resolves a flat key=value
configuration (defaults < --config file < flags), echoes the effective
values into its output directory, and calls one library entry point. All
failures print a single machine-parsable line::

    drivesal: error: <message>

and exit nonzero (2 for usage/config/runtime errors, 1 for a gradient-check
failure).
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from drivesal import config as cfgmod
from drivesal.diffcore.gradcheck import DEFAULT_TOL, run_gradcheck_suite, suite_passes
from drivesal.diffcore.optim import SgdConfig
from drivesal.errors import DriveSalError
from drivesal.evalreport import (
    compare_models,
    constant_baseline_mse,
    evaluate_mse,
    export_saliency_pairs,
)
from drivesal.gazeprep.dataset import (
    DatasetConfig,
    SessionSource,
    build_dataset_to_dir,
    read_manifest,
)
from drivesal.imio import atomic_write_bytes
from drivesal.nets import (
    AgentSpec,
    Net1Spec,
    RoadSalSpec,
    load_checkpoint,
    net1_forward,
    normalize_map,
    roadsal_forward,
    upsample_map,
)
from drivesal.simworld import run_session, track_from_name
from drivesal.trainer import (
    TrainConfig,
    load_driver_data,
    session_arrays,
    train_agents,
    train_attention_unsupervised,
    train_driver,
    train_roadsal,
)

ERROR_PREFIX = "drivesal: error:"

SIMULATE_KEYS = {
    "track": (str, "default"),
    "frames": (int, 100),
    "resolution": (int, 227),
    "frame_rate_hz": (float, 10.0),
    "gaze_rate_hz": (float, 50.0),
    "seed": (int, 0),
}

GAZE_PREP_KEYS = {
    "input_size": (int, 96),
    "target_size": (int, 48),
    "train_fraction": (float, 0.8),
    "seed": (int, 0),
    "augment": (bool, True),
}

TRAIN_KEYS = {
    "epochs": (int, 10),
    "seed": (int, 0),
    "learning_rate": (float, 1e-3),
    "momentum": (float, 0.9),
    "decay": (float, 0.005),
    "batch_size": (int, 300),
    "micro_batch": (int, 30),
}

ATTN_KEYS = dict(TRAIN_KEYS, lambda1=(float, 0.1), lambda2=(float, 1.0),
                 sparsity_variant=(str, "squared"))

EVALUATE_KEYS = {"micro_batch": (int, 30)}
EXPORT_KEYS = {"count": (int, 8), "micro_batch": (int, 30)}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports errors on one line instead of a usage dump."""

    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _add_config_flags(parser, schema):
    parser.add_argument("--config", metavar="FILE",
                        help="key=value file; explicit flags override it")
    for key, (kind, default) in schema.items():
        parser.add_argument("--" + key.replace("_", "-"), dest=key, default=None,
                            metavar=key.upper(),
                            help=f"{kind.__name__} (default {cfgmod.format_value(default)})")


def _resolve(args, schema):
    file_values = cfgmod.read_kv_file(args.config) if args.config else None
    flags = {k: getattr(args, k) for k in schema if getattr(args, k) is not None}
    return cfgmod.resolve_config(schema, file_values, flags)


def _train_config(values, **extra):
    return TrainConfig(
        sgd=SgdConfig(learning_rate=values["learning_rate"],
                      momentum=values["momentum"],
                      decay=values["decay"],
                      batch_size=values["batch_size"]),
        epochs=values["epochs"], seed=values["seed"],
        micro_batch=values["micro_batch"], **extra)


def _print_report(role, report):
    print(f"[{role}] epochs={len(report.train_losses)} "
          f"final_train_loss={report.train_losses[-1]!r} "
          f"final_heldout_loss={report.heldout_losses[-1]!r}"
          if report.train_losses else f"[{role}] zero-epoch run (init saved)")


def cmd_simulate(args):
    values = _resolve(args, SIMULATE_KEYS)
    track = track_from_name(values["track"])
    log = run_session(track, values["frames"],
                      frame_rate_hz=values["frame_rate_hz"],
                      gaze_rate_hz=values["gaze_rate_hz"],
                      seed=values["seed"], resolution=values["resolution"],
                      out_dir=args.out)
    cfgmod.write_config_echo(args.out, values)
    print(f"wrote {len(log.frame_times)} frames, {len(log.gaze)} gaze samples to {args.out}")
    return 0


def cmd_gaze_prep(args):
    values = _resolve(args, GAZE_PREP_KEYS)
    dcfg = DatasetConfig(input_size=values["input_size"],
                         target_size=values["target_size"],
                         train_fraction=values["train_fraction"],
                         seed=values["seed"], augment=values["augment"])
    sources = [SessionSource.from_dir(d) for d in args.session]
    build_dataset_to_dir(sources, args.out, dcfg)
    cfgmod.write_config_echo(args.out, values)
    counts = read_manifest(args.out)["counts"]
    print(f"dataset at {args.out}: {counts['train']} train / {counts['test']} test, "
          f"{counts['dropped_frames']} frames dropped")
    return 0


def cmd_train_roadsal(args):
    values = _resolve(args, TRAIN_KEYS)
    input_size = int(read_manifest(args.data)["config"]["input_size"])
    report = train_roadsal(args.data, _train_config(values), args.out,
                           spec=RoadSalSpec(input_size=input_size))
    cfgmod.write_config_echo(args.out, values)
    _print_report("roadsal", report)
    return 0


def cmd_train_driver(args):
    values = _resolve(args, TRAIN_KEYS)
    spec = AgentSpec()
    data = load_driver_data(args.session, input_size=spec.input_size,
                            heldout_dirs=args.heldout)
    report = train_driver(data, _train_config(values), args.out, spec=spec)
    cfgmod.write_config_echo(args.out, values)
    _print_report("net2", report)
    return 0


def cmd_train_attn(args):
    values = _resolve(args, ATTN_KEYS)
    net2_spec, _, _ = load_checkpoint(args.net2)
    data = load_driver_data(args.session, input_size=net2_spec.input_size)
    cfg = _train_config(values, lambda1=values["lambda1"], lambda2=values["lambda2"],
                        sparsity_variant=values["sparsity_variant"])
    report = train_attention_unsupervised(args.net2, data, cfg, args.out,
                                          net1_spec=Net1Spec())
    cfgmod.write_config_echo(args.out, values)
    _print_report("net1", report)
    print(f"final mean attention: {report.extra['final_mean_attention']!r}")
    return 0


def cmd_train_agents(args):
    values = _resolve(args, TRAIN_KEYS)
    roadsal_spec, _, _ = load_checkpoint(args.roadsal)
    spec = AgentSpec(input_size=roadsal_spec.input_size)
    data = load_driver_data(args.session, input_size=spec.input_size,
                            heldout_dirs=args.heldout)
    reports = train_agents(args.roadsal, args.net1, data, _train_config(values),
                           args.out, spec=spec)
    cfgmod.write_config_echo(args.out, values)
    for name in sorted(reports):
        _print_report(name, reports[name])
    return 0


def cmd_evaluate(args):
    values = _resolve(args, EVALUATE_KEYS)
    micro = values["micro_batch"]
    agents = {name: os.path.join(args.agents, name, "checkpoint")
              for name in ("model1", "model2", "model3")}
    spec, _, _ = load_checkpoint(agents["model1"])
    images, actions = session_arrays(args.session, input_size=spec.input_size)
    results = [
        evaluate_mse(agents["model1"], "raw", images, actions,
                     model="model1", micro=micro),
        evaluate_mse(agents["model2"], "roadsal", images, actions,
                     attention=args.roadsal, model="model2", micro=micro),
        evaluate_mse(agents["model3"], "net1", images, actions,
                     attention=args.net1, model="model3", micro=micro),
    ]
    report = compare_models(results)
    table = report.table_text
    if args.train_session:
        _, train_actions = session_arrays(args.train_session, input_size=spec.input_size)
        baseline = constant_baseline_mse(train_actions, actions)
        beaten = all(r.combined_mse < baseline for r in results)
        table += (f"constant mean-action baseline: {baseline:.6f} "
                  f"({'beaten by all models' if beaten else 'NOT beaten by all models'})\n")
    os.makedirs(args.out, exist_ok=True)
    atomic_write_bytes(os.path.join(args.out, "comparison.txt"), table.encode())
    atomic_write_bytes(os.path.join(args.out, "comparison.csv"), report.csv_text.encode())
    cfgmod.write_config_echo(args.out, values)
    print(table, end="")
    return 0


def cmd_export_pairs(args):
    values = _resolve(args, EXPORT_KEYS)
    spec, params, _ = load_checkpoint(args.net)
    if spec.kind == "roadsal":
        size = spec.input_size
    elif spec.kind == "net1":
        size = int(args.size)
    else:
        raise DriveSalError(f"export-pairs needs a roadsal or net1 checkpoint, got {spec.kind}")
    images, _ = session_arrays(args.session, input_size=size)
    images = images[:values["count"]]
    maps = []
    for start in range(0, len(images), values["micro_batch"]):
        chunk = images[start:start + values["micro_batch"]]
        if spec.kind == "roadsal":
            raw = roadsal_forward(spec, params, chunk).values
            maps.extend(normalize_map(m) for m in raw)
        else:
            maps.extend(net1_forward(spec, params, chunk).values)
    paths = export_saliency_pairs(images, np.asarray(maps), args.out)
    cfgmod.write_config_echo(args.out, values)
    print(f"wrote {len(paths)} saliency pairs to {args.out}")
    return 0


def cmd_gradcheck(args):
    report = run_gradcheck_suite(n_seeds=args.seeds)
    width = max(len(name) for name in report)
    for name in sorted(report):
        err = report[name]
        verdict = "PASS" if err < DEFAULT_TOL else "FAIL"
        print(f"{name:{width}s}  max_rel_err={err:.3e}  {verdict}")
    if not suite_passes(report):
        print(f"{len([e for e in report.values() if e >= DEFAULT_TOL])} operator(s) "
              f"exceeded tolerance {DEFAULT_TOL:g}")
        return 1
    print(f"all {len(report)} operators within tolerance {DEFAULT_TOL:g}")
    return 0


def cmd_serve(args):
    import uvicorn

    from drivesal.service.app import create_app

    uvicorn.run(create_app(sessions_dir=args.sessions_dir), host=args.host,
                port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="drivesal",
                     description="gaze-saliency driving models: simulate, prepare, "
                                 "train, evaluate, serve")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND",
                               parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("simulate",
                       help="drive the scripted expert and record a session")
    p.add_argument("--out", required=True, metavar="DIR")
    _add_config_flags(p, SIMULATE_KEYS)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("gaze-prep",
                       help="align gaze, build saliency targets, split and write a dataset")
    p.add_argument("--session", required=True, action="append", metavar="DIR",
                   help="session directory (repeatable)")
    p.add_argument("--out", required=True, metavar="DIR")
    _add_config_flags(p, GAZE_PREP_KEYS)
    p.set_defaults(func=cmd_gaze_prep)

    p = sub.add_parser("train-roadsal",
                       help="train the coarse saliency predictor on a gaze dataset")
    p.add_argument("--data", required=True, metavar="DIR", help="gaze-prep output")
    p.add_argument("--out", required=True, metavar="DIR")
    _add_config_flags(p, TRAIN_KEYS)
    p.set_defaults(func=cmd_train_roadsal)

    p = sub.add_parser("train-driver",
                       help="behavior-clone the driver net on recorded actions")
    p.add_argument("--session", required=True, action="append", metavar="DIR")
    p.add_argument("--heldout", action="append", metavar="DIR",
                   help="held-out session directory (repeatable)")
    p.add_argument("--out", required=True, metavar="DIR")
    _add_config_flags(p, TRAIN_KEYS)
    p.set_defaults(func=cmd_train_driver)

    p = sub.add_parser("train-attn",
                       help="train the attention net against a frozen driver")
    p.add_argument("--net2", required=True, metavar="CKPT",
                   help="frozen driver checkpoint directory")
    p.add_argument("--session", required=True, action="append", metavar="DIR")
    p.add_argument("--out", required=True, metavar="DIR")
    _add_config_flags(p, ATTN_KEYS)
    p.set_defaults(func=cmd_train_attn)

    p = sub.add_parser("train-agents",
                       help="train model1/model2/model3 drivers with shared settings")
    p.add_argument("--roadsal", required=True, metavar="CKPT")
    p.add_argument("--net1", required=True, metavar="CKPT")
    p.add_argument("--session", required=True, action="append", metavar="DIR")
    p.add_argument("--heldout", action="append", metavar="DIR")
    p.add_argument("--out", required=True, metavar="DIR")
    _add_config_flags(p, TRAIN_KEYS)
    p.set_defaults(func=cmd_train_agents)

    p = sub.add_parser("evaluate",
                       help="score the three models on a held-out session")
    p.add_argument("--agents", required=True, metavar="DIR",
                   help="train-agents output (model1/ model2/ model3/)")
    p.add_argument("--roadsal", required=True, metavar="CKPT")
    p.add_argument("--net1", required=True, metavar="CKPT")
    p.add_argument("--session", required=True, metavar="DIR", help="held-out session")
    p.add_argument("--train-session", metavar="DIR",
                   help="training session, enables the constant-baseline row")
    p.add_argument("--out", required=True, metavar="DIR")
    _add_config_flags(p, EVALUATE_KEYS)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("export-pairs",
                       help="write original|map|multiplied side-by-side images")
    p.add_argument("--net", required=True, metavar="CKPT",
                   help="roadsal or net1 checkpoint directory")
    p.add_argument("--session", required=True, metavar="DIR")
    p.add_argument("--size", default=96, metavar="PX",
                   help="frame resolution for a net1 checkpoint (default 96)")
    p.add_argument("--out", required=True, metavar="DIR")
    _add_config_flags(p, EXPORT_KEYS)
    p.set_defaults(func=cmd_export_pairs)

    p = sub.add_parser("gradcheck",
                       help="numeric gradient check of every operator; exit 1 on failure")
    p.add_argument("--seeds", type=int, default=10, metavar="N")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("serve",
                       help="run the capture service (one live session at a time)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--sessions-dir", default="sessions", metavar="DIR",
                   help="where finished sessions are written")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"{ERROR_PREFIX} {exc}", file=sys.stderr)
        return 2
    except (DriveSalError, OSError, ValueError) as exc:
        print(f"{ERROR_PREFIX} {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
