import argparse
import json
import os
import sys
from dataclasses import replace

from coop_forecaster.Association.labels_io import read_labels, write_labels
from coop_forecaster.Association.pseudo_labels import generate_pseudo_labels
from coop_forecaster.config import RunConfig, load_config, save_config
from coop_forecaster.Evaluation.ablation import needs_retraining, parse_switch, scalability_sweep
from coop_forecaster.Evaluation.baseline import ConstantVelocityForecaster
from coop_forecaster.Evaluation.harness import cooperation_sweep, droploss_harness, evaluate, latency_harness
from coop_forecaster.Model.base_forecaster import Forecaster
from coop_forecaster.Model.network import NO_ABLATION, AblationSwitches, V2XGraphForecaster, init_params
from coop_forecaster.Numerics.checkpoint import load_checkpoint
from coop_forecaster.Scenario.dataset import split_dataset
from coop_forecaster.Scenario.generator import generate_dataset
from coop_forecaster.Scenario.scenario_io import read_scenarios, write_scenarios
from coop_forecaster.Training.trainer import Trainer
from coop_forecaster.Utils.errors import ConfigError, CoopForecasterError
from coop_forecaster.Utils.history_logger import read_history
from coop_forecaster.Utils.logger import Logger
from coop_forecaster.Utils.report_logger import ReportLogger, format_table
from coop_forecaster.Utils.visualizer import plot_history, plot_scenario


def _csv_list(text: str, cast, flag: str) -> tuple:
    try:
        return tuple(cast(item.strip()) for item in text.split(",") if item.strip())
    except ValueError:
        raise ConfigError(f"{flag}: cannot parse {text!r}") from None


def _require_file(path: str, flag: str) -> str:
    if not path or not os.path.isfile(path):
        raise ConfigError(f"{flag}: file not found: {path}")
    return path


def _prepare_output(folder: str, config: RunConfig) -> Logger:
    """Create the output folder, attach its app.log and echo the resolved config."""
    folder = folder or "."
    os.makedirs(folder, exist_ok=True)
    logger = Logger(os.path.join(folder, 'app.log'))
    save_config(config, os.path.join(folder, 'resolved_config.json'))
    return logger


def _load_forecaster(args, config: RunConfig, switches: AblationSwitches = NO_ABLATION) -> Forecaster:
    if getattr(args, "baseline", False):
        return ConstantVelocityForecaster()
    ckpt = _require_file(args.ckpt or config.paths.checkpoint, "--ckpt")
    params = load_checkpoint(ckpt, expected=init_params(config.model))
    return V2XGraphForecaster(params, config.model, switches)


def _write_reports(folder: str, records: list[dict]) -> None:
    report = ReportLogger(os.path.join(folder, 'report.csv'))
    for record in records:
        report.log_report(record)
    report.close()
    print(format_table(report.table()))


# =============================================================================
# COMMANDS
# =============================================================================


def cmd_gen(args, config: RunConfig) -> None:
    if args.seed is not None:
        config = replace(config, gen=replace(config.gen, seed=args.seed))
    config.validate()
    logger = _prepare_output(os.path.dirname(args.out), config)
    scenarios = generate_dataset(config.gen, args.n, config.gen.seed)
    count = write_scenarios(scenarios, args.out)
    logger.log_event(f"Wrote {count} scenarios to {args.out}")


def cmd_labels(args, config: RunConfig) -> None:
    overrides = {}
    if args.tau_iou is not None:
        overrides["tau_iou"] = args.tau_iou
    if args.eps_length is not None:
        overrides["eps_length"] = args.eps_length
    config = replace(config, labels=replace(config.labels, **overrides))
    config.validate()
    logger = _prepare_output(os.path.dirname(args.out), config)
    scenarios = read_scenarios(_require_file(args.data, "--data"))
    all_labels = [generate_pseudo_labels(scenario, config.labels) for scenario in scenarios]
    write_labels(all_labels, args.out)
    positives = sum(len(labels.positives()) for labels in all_labels)
    logger.log_event(f"Wrote pseudo labels for {len(all_labels)} scenarios ({positives} positive pairs) to {args.out}")


def cmd_train(args, config: RunConfig) -> None:
    train_overrides = {}
    for name in ("fraction", "seed", "epochs", "batch_size"):
        if getattr(args, name) is not None:
            train_overrides[name] = getattr(args, name)
    switches, disturbance = parse_switch(args.ablate) if args.ablate else (NO_ABLATION, 0.0)
    if disturbance > 0:
        train_overrides["label_disturbance"] = disturbance
    model = replace(config.model, d=args.d) if args.d is not None else config.model
    config = replace(config, model=model, train=replace(config.train, **train_overrides))
    config.validate()

    out_folder = os.path.dirname(args.out) or "."
    logger = _prepare_output(out_folder, config)
    scenarios = read_scenarios(_require_file(args.data or config.paths.data, "--data"))
    labels = read_labels(_require_file(args.labels or config.paths.labels, "--labels"))
    val_path = args.val_data or config.paths.val_data
    if val_path:
        train_set, val_set = scenarios, read_scenarios(_require_file(val_path, "--val-data"))
    elif config.train.val_split > 0:
        train_set, val_set = split_dataset(scenarios, (1.0 - config.train.val_split, config.train.val_split),
                                           config.train.seed)
    else:
        train_set, val_set = scenarios, []
    logger.log_event(f"Loaded {len(train_set)} training and {len(val_set)} validation scenarios")

    if args.scalability:
        fractions = _csv_list(args.scalability, float, "--scalability")
        results = scalability_sweep(config, out_folder, train_set, val_set, labels, fractions)
        _write_reports(out_folder, [result.as_record(setting, fraction) for setting, fraction, result in results])
        return

    trainer = Trainer(out_folder, config.model, config.train, config.eval, switches, checkpoint_path=args.out)
    trainer.fit(train_set, val_set, labels)
    plot_history(read_history(trainer.history_filename), os.path.join(out_folder, 'history.svg'))


def cmd_eval(args, config: RunConfig) -> None:
    eval_overrides = {}
    if args.miss_threshold is not None:
        eval_overrides["miss_threshold"] = args.miss_threshold
    if args.mask_views is not None:
        eval_overrides["mask_views"] = _csv_list(args.mask_views, str, "--mask-views")
    if args.all_agents:
        eval_overrides["target_only"] = False
    config = replace(config, eval=replace(config.eval, **eval_overrides))
    config.validate()

    switches = NO_ABLATION
    if args.ablate:
        switches, disturbance = parse_switch(args.ablate)
        if needs_retraining(switches, disturbance):
            raise ConfigError(f"--ablate: {args.ablate!r} retrains the model; run it through `train --ablate`")

    out_folder = args.reports or config.paths.reports
    logger = _prepare_output(out_folder, config)
    scenarios = read_scenarios(_require_file(args.data or config.paths.data, "--data"))
    forecaster = _load_forecaster(args, config, switches)

    if args.coop_sweep:
        results = cooperation_sweep(forecaster, scenarios, config.eval)
        records = [result.as_record("cooperation", setting) for setting, result in results.items()]
    else:
        result = evaluate(forecaster, scenarios, config.eval)
        records = [result.as_record("eval", args.ablate or "")]
        result.metrics.breakdown.to_csv(os.path.join(out_folder, 'breakdown.csv'), index=False)
    logger.log_event(f"Evaluated {forecaster.name} on {len(scenarios)} scenarios")
    _write_reports(out_folder, records)


def cmd_robust(args, config: RunConfig) -> None:
    eval_overrides = {}
    if args.latency is not None:
        eval_overrides["latency_frames"] = _csv_list(args.latency, int, "--latency")
    if args.drop is not None:
        eval_overrides["drop_ratios"] = _csv_list(args.drop, float, "--drop")
    if args.seed is not None:
        eval_overrides["seed"] = args.seed
    config = replace(config, eval=replace(config.eval, **eval_overrides))
    config.validate()

    out_folder = args.reports or config.paths.reports
    logger = _prepare_output(out_folder, config)
    scenarios = read_scenarios(_require_file(args.data or config.paths.data, "--data"))
    forecaster = _load_forecaster(args, config)

    if args.latency is not None:
        results = latency_harness(forecaster, scenarios, config.eval.latency_frames, config.eval)
        records = [result.as_record("latency", k) for k, result in results.items()]
    else:
        results = droploss_harness(forecaster, scenarios, config.eval.drop_ratios, config.eval.seed, config.eval)
        records = [result.as_record("droploss", ratio) for ratio, result in results.items()]
    logger.log_event(f"Robustness sweep of {forecaster.name} on {len(scenarios)} scenarios")
    _write_reports(out_folder, records)


def cmd_viz(args, config: RunConfig) -> None:
    logger = _prepare_output(args.out, config)
    scenarios = read_scenarios(_require_file(args.data or config.paths.data, "--data"))
    forecaster = _load_forecaster(args, config) if args.ckpt else None
    for scenario in scenarios:
        forecast = forecaster.predict(scenario) if forecaster is not None else None
        plot_scenario(scenario, os.path.join(args.out, f"scenario_{scenario.scenario_id}.svg"), forecast)
    logger.log_event(f"Rendered {len(scenarios)} scenarios into {args.out}")


# =============================================================================
# ENTRY POINT
# =============================================================================


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coop_forecaster", description="Cooperative V2X motion forecasting")
    parser.add_argument("--config", help="JSON config file (default: $COOP_FORECASTER_CONFIG)")
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen", help="generate synthetic scenarios")
    gen.add_argument("--out", required=True)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--seed", type=int)
    gen.set_defaults(func=cmd_gen)

    labels = commands.add_parser("labels", help="derive pseudo association labels")
    labels.add_argument("--data", required=True)
    labels.add_argument("--out", required=True)
    labels.add_argument("--tau-iou", type=float)
    labels.add_argument("--eps-length", type=int)
    labels.set_defaults(func=cmd_labels)

    train = commands.add_parser("train", help="train the graph forecaster")
    train.add_argument("--data")
    train.add_argument("--val-data")
    train.add_argument("--labels")
    train.add_argument("--out", required=True, help="checkpoint path")
    train.add_argument("--fraction", type=float)
    train.add_argument("--ablate", help="e.g. no_mfg, mask_coop_in_cig+no_alg, disturb_labels(0.25)")
    train.add_argument("--seed", type=int)
    train.add_argument("--epochs", type=int)
    train.add_argument("--batch-size", type=int)
    train.add_argument("--d", type=int)
    train.add_argument("--scalability", help="comma list of dataset fractions to sweep")
    train.set_defaults(func=cmd_train)

    evaluation = commands.add_parser("eval", help="evaluate a checkpoint or the baseline")
    evaluation.add_argument("--data")
    evaluation.add_argument("--ckpt")
    evaluation.add_argument("--baseline", action="store_true", help="constant-velocity baseline")
    evaluation.add_argument("--miss-threshold", type=float)
    evaluation.add_argument("--mask-views", help="comma list of view kinds to empty")
    evaluation.add_argument("--all-agents", action="store_true")
    evaluation.add_argument("--coop-sweep", action="store_true")
    evaluation.add_argument("--ablate", help="evaluation-time switch")
    evaluation.add_argument("--reports")
    evaluation.set_defaults(func=cmd_eval)

    robust = commands.add_parser("robust", help="latency and data-loss robustness sweeps")
    robust.add_argument("--data")
    robust.add_argument("--ckpt")
    robust.add_argument("--baseline", action="store_true")
    sweep = robust.add_mutually_exclusive_group(required=True)
    sweep.add_argument("--latency", help="comma list of dropped frames, each in {0, 1, 2}")
    sweep.add_argument("--drop", help="comma list of per-frame drop ratios")
    robust.add_argument("--seed", type=int)
    robust.add_argument("--reports")
    robust.set_defaults(func=cmd_robust)

    viz = commands.add_parser("viz", help="render scenarios as SVG")
    viz.add_argument("--data")
    viz.add_argument("--ckpt")
    viz.add_argument("--out", required=True)
    viz.set_defaults(func=cmd_viz)
    return parser


def _error_record(exc: Exception, exit_code: int) -> str:
    return json.dumps({"error": type(exc).__name__, "exit_code": exit_code, "message": str(exc)})


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        args.func(args, config)
    except CoopForecasterError as exc:
        print(_error_record(exc, exc.exit_code), file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001
        print(_error_record(exc, 1), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
