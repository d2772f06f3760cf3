"""Command-line workbench: collect open-loop data, train inverse controllers,
run them in closed loop, and compare them.

Exit codes: 0 success, 1 usage/config error, 2 I/O error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import control as ctl
from . import experiment as exp
from . import mlp
from . import training as tr
from .plant import MotorParams
from .svg import write_line_chart

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_NUMERIC = 3


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class NetworkSpec:
    layer_sizes: tuple = (5, 10, 1)
    activations: tuple = ("tanh", "linear")
    init_seed: int = 0
    init_scale: float = 0.5


@dataclass(frozen=True)
class TrainerSpec:
    algorithm: str  # "lm" | "br" | "early_stop"
    config: object  # LmConfig | BrConfig | EarlyStopConfig


@dataclass(frozen=True)
class EvaluationSpec:
    profile: ctl.ReferenceProfile = ctl.DEFAULT_PROFILE
    seeds: tuple = tuple(range(10))


@dataclass(frozen=True)
class WorkbenchConfig:
    plant: MotorParams = field(default_factory=MotorParams)
    experiment: exp.StepExperimentConfig = field(default_factory=exp.StepExperimentConfig)
    network: NetworkSpec = field(default_factory=NetworkSpec)
    trainer: TrainerSpec = field(
        default_factory=lambda: TrainerSpec("lm", tr.LmConfig())
    )
    evaluation: EvaluationSpec = field(default_factory=EvaluationSpec)
    output_dir: str = "out"


# --- config parsing --------------------------------------------------------

_LM_KEYS = (
    "lambda_init",
    "lambda_increase",
    "lambda_decrease",
    "lambda_max",
    "max_epochs",
    "goal_ed",
)
_BR_KEYS = ("alpha_init", "beta_init", "reestimate_every")
_ES_KEYS = ("validation_fraction", "patience", "split_seed")


def _check_keys(mapping, allowed, section):
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in '{section}': {', '.join(unknown)}")


def _build_dataclass(cls, mapping, section):
    names = [f.name for f in dataclasses.fields(cls)]
    _check_keys(mapping, names, section)
    try:
        return cls(**mapping)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid '{section}' configuration: {exc}") from exc


def _build_trainer(mapping):
    _check_keys(mapping, ("algorithm",) + _LM_KEYS + _BR_KEYS + _ES_KEYS, "trainer")
    algorithm = mapping.get("algorithm", "lm")
    lm_kwargs = {k: mapping[k] for k in _LM_KEYS if k in mapping}
    try:
        lm_cfg = tr.LmConfig(**lm_kwargs)
        if algorithm == "lm":
            extra = set(mapping) & set(_BR_KEYS + _ES_KEYS)
            if extra:
                raise ConfigError(f"key(s) {sorted(extra)} not valid for trainer 'lm'")
            return TrainerSpec("lm", lm_cfg)
        if algorithm == "br":
            extra = set(mapping) & set(_ES_KEYS)
            if extra:
                raise ConfigError(f"key(s) {sorted(extra)} not valid for trainer 'br'")
            kwargs = {k: mapping[k] for k in _BR_KEYS if k in mapping}
            return TrainerSpec("br", tr.BrConfig(lm=lm_cfg, **kwargs))
        if algorithm == "early_stop":
            extra = set(mapping) & set(_BR_KEYS)
            if extra:
                raise ConfigError(
                    f"key(s) {sorted(extra)} not valid for trainer 'early_stop'"
                )
            kwargs = {k: mapping[k] for k in _ES_KEYS if k in mapping}
            return TrainerSpec("early_stop", tr.EarlyStopConfig(lm=lm_cfg, **kwargs))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid 'trainer' configuration: {exc}") from exc
    raise ConfigError(f"unknown trainer algorithm '{algorithm}' (use lm, br, early_stop)")


def _build_evaluation(mapping):
    _check_keys(mapping, ("profile", "seeds"), "evaluation")
    profile = ctl.DEFAULT_PROFILE
    if "profile" in mapping:
        steps = []
        for i, entry in enumerate(mapping["profile"]):
            if not isinstance(entry, dict):
                raise ConfigError("evaluation.profile entries must be mappings")
            _check_keys(entry, ("level", "duration"), f"evaluation.profile[{i}]")
            try:
                steps.append((float(entry["level"]), int(entry["duration"])))
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(
                    f"evaluation.profile[{i}] needs numeric 'level' and 'duration'"
                ) from exc
        try:
            profile = ctl.ReferenceProfile(tuple(steps))
        except ValueError as exc:
            raise ConfigError(f"invalid evaluation.profile: {exc}") from exc
    seeds = tuple(int(s) for s in mapping.get("seeds", range(10)))
    if not seeds:
        raise ConfigError("evaluation.seeds must be nonempty")
    return EvaluationSpec(profile, seeds)


def load_config(path=None) -> WorkbenchConfig:
    raw = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        raw = yaml.safe_load(text) or {}
        if not isinstance(raw, dict):
            raise ConfigError("config file must contain a mapping at top level")
    _check_keys(
        raw,
        ("plant", "experiment", "network", "trainer", "evaluation", "output_dir"),
        "config",
    )
    net_raw = dict(raw.get("network", {}))
    if "layer_sizes" in net_raw:
        net_raw["layer_sizes"] = tuple(int(n) for n in net_raw["layer_sizes"])
    if "activations" in net_raw:
        net_raw["activations"] = tuple(net_raw["activations"])
    return WorkbenchConfig(
        plant=_build_dataclass(MotorParams, raw.get("plant", {}), "plant"),
        experiment=_build_dataclass(
            exp.StepExperimentConfig, raw.get("experiment", {}), "experiment"
        ),
        network=_build_dataclass(NetworkSpec, net_raw, "network"),
        trainer=_build_trainer(raw.get("trainer", {})),
        evaluation=_build_evaluation(raw.get("evaluation", {})),
        output_dir=str(raw.get("output_dir", "out")),
    )


def _apply_overrides(config, args) -> WorkbenchConfig:
    if args.out is not None:
        config = dataclasses.replace(config, output_dir=args.out)
    if args.seed is not None:
        config = dataclasses.replace(
            config,
            experiment=dataclasses.replace(config.experiment, seed=args.seed),
            network=dataclasses.replace(config.network, init_seed=args.seed),
        )
    return config


def _ensure_outdir(config) -> Path:
    out = Path(config.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory '{out}' is not writable: {exc}") from exc
    return out


# --- commands --------------------------------------------------------------


def cmd_collect(config, args) -> int:
    out = _ensure_outdir(config)
    log = exp.run_step_experiment(config.plant, config.experiment)
    path = out / "iolog.csv"
    exp.save_iolog(log, path)
    print(f"wrote {path}: {len(log)} samples")
    print(f"u range [{log.u.min():.4f}, {log.u.max():.4f}] V")
    print(f"y range [{log.y.min():.4f}, {log.y.max():.4f}] V")
    if args.svg:
        write_line_chart(out / "iolog.svg", {"u": log.u, "y": log.y},
                         title="open-loop step experiment", ylabel="volts")
    return EXIT_OK


def _train_once(net, dataset, trainer: TrainerSpec):
    if trainer.algorithm == "lm":
        return tr.train_lm(net, dataset, trainer.config)
    if trainer.algorithm == "br":
        return tr.train_br(net, dataset, trainer.config)
    return tr.train_early_stopping(net, dataset, trainer.config)


def cmd_train(config, args) -> int:
    out = _ensure_outdir(config)
    iolog_path = Path(args.iolog) if args.iolog else out / "iolog.csv"
    try:
        log = exp.load_iolog(iolog_path, config.plant.ts)
    except OSError as exc:
        raise ConfigError(f"cannot read I/O log: {exc}") from exc
    dataset = exp.build_inverse_dataset(log)
    net = mlp.init_weights(
        config.network.layer_sizes,
        config.network.activations,
        config.network.init_seed,
        config.network.init_scale,
    )
    report_path = out / "train_report.csv"
    try:
        trained, report = _train_once(net, dataset, config.trainer)
    except tr.TrainingDivergedError as exc:
        exc.report.to_csv(report_path)
        print(f"training diverged: {exc}", file=sys.stderr)
        print(f"partial report in {report_path}", file=sys.stderr)
        return EXIT_NUMERIC
    net_path = out / "controller.net"
    mlp.save_network(net_path, trained, dataset.input_scaling, dataset.target_scaling)
    report.to_csv(report_path)
    final = report.records[-1] if report.records else None
    print(f"wrote {net_path} and {report_path}")
    if final is not None:
        print(f"final E_D = {final.ed:.6e}, E_W = {final.ew:.6e}")
    print(f"stop reason: {report.stop_reason.value}")
    if args.svg and report.records:
        series = {"E_D": [r.ed for r in report.records]}
        if any(r.val_ed is not None for r in report.records):
            series["val E_D"] = [r.val_ed for r in report.records]
        write_line_chart(out / "train_errors.svg", series,
                         title="training error per epoch", ylabel="E_D")
    return EXIT_OK


def _load_controller(path):
    try:
        net, in_scaling, out_scaling = mlp.load_network(path)
    except OSError as exc:
        raise ConfigError(f"cannot read network file: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    try:
        return ctl.NeuralController(net, in_scaling, out_scaling)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def cmd_control(config, args) -> int:
    out = _ensure_outdir(config)
    plant = config.plant
    if args.oracle:
        plant = dataclasses.replace(plant, noise_sigma=0.0)
        controller = ctl.analytic_inverse_controller(plant)
    else:
        if args.network is None:
            raise ConfigError("control needs a network file (or --oracle)")
        controller = _load_controller(args.network)
    profile = config.evaluation.profile
    rows = []
    for seed in config.evaluation.seeds:
        try:
            trace = ctl.run_closed_loop(plant, controller, profile, seed)
        except ctl.ControllerDivergedError as exc:
            ctl.trace_to_csv(exc.trace, out / f"trace_{seed}.csv")
            print(f"seed {seed}: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        ctl.trace_to_csv(trace, out / f"trace_{seed}.csv")
        idx = ctl.compute_indices(trace)
        rows.append((seed, idx))
        print(
            f"seed {seed}: mean_abs_error = {idx.mean_abs_error:.6f} V, "
            f"control_effort = {idx.control_effort:.6f} V"
        )
        if args.svg:
            write_line_chart(out / f"trace_{seed}.svg",
                             {"r": trace.r, "y": trace.y},
                             title=f"closed loop, seed {seed}", ylabel="volts")
            write_line_chart(out / f"effort_{seed}.svg", {"u": trace.u},
                             title=f"control effort, seed {seed}", ylabel="volts")
    with open(out / "indices.csv", "w", newline="") as fh:
        fh.write("seed,mean_abs_error,control_effort\n")
        for seed, idx in rows:
            fh.write(f"{seed},{idx.mean_abs_error!r},{idx.control_effort!r}\n")
    print(f"wrote {out / 'indices.csv'}")
    return EXIT_OK


def cmd_compare(config, args) -> int:
    if len(args.networks) < 2:
        raise ConfigError("need at least two network files to compare")
    out = _ensure_outdir(config)
    controllers = [(path, _load_controller(path)) for path in args.networks]
    report = ctl.compare_controllers(
        config.plant, controllers, config.evaluation.profile, config.evaluation.seeds
    )
    report.to_csv(out / "comparison.csv")
    print(report.format_table())
    print(f"wrote {out / 'comparison.csv'}")
    return EXIT_OK


# --- entry point -----------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    # usage errors are exit code 1 per the workbench contract
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _make_parser():
    parser = _Parser(prog="servoneuro", description=__doc__)
    parser.add_argument("--config", help="path to YAML workbench configuration")
    parser.add_argument("--seed", type=int, help="override experiment and init seeds")
    parser.add_argument("--out", help="override output directory")
    parser.add_argument("--svg", action="store_true", help="also write SVG charts")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("collect", help="run the open-loop step experiment")
    p_train = sub.add_parser("train", help="train an inverse controller")
    p_train.add_argument("--iolog", help="I/O log CSV (default <out>/iolog.csv)")
    p_control = sub.add_parser("control", help="run a controller in closed loop")
    p_control.add_argument("network", nargs="?", help="serialized network file")
    p_control.add_argument(
        "--oracle", action="store_true",
        help="use the built-in analytic inverse on the noise-free plant",
    )
    p_compare = sub.add_parser("compare", help="compare trained controllers")
    p_compare.add_argument("networks", nargs="*", help="serialized network files")
    return parser


_COMMANDS = {
    "collect": cmd_collect,
    "train": cmd_train,
    "control": cmd_control,
    "compare": cmd_compare,
}


def main(argv=None) -> int:
    parser = _make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    try:
        config = _apply_overrides(load_config(args.config), args)
        return _COMMANDS[args.command](config, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (tr.TrainingDivergedError, ctl.ControllerDivergedError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
