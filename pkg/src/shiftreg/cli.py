"""Command-line entry point: dataset preparation, training runs, sweeps,
and report formatting.

Exit codes: 0 on success, 1 on runtime failure (diverged trials,
non-convergence), 2 on usage or input errors. A key=value config file can
supply any knob; explicit flags win over the file, the file wins over
defaults, and unknown keys are rejected before any compute starts.
"""

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from .datasets import (
    DatasetManifest,
    citation_label_names,
    load_cache,
    load_citation_text,
    make_uniform_splits,
    save_cache,
)
from .errors import ConvergenceError, InputError, TrainingDiverged
from .experiment import SWEEP_AXES, TrainConfig, run_trials, sweep
from .figures import plot_comparison, plot_loss_curves, plot_sweep
from .reports import (
    comparison_table,
    format_f1,
    load_report,
    read_key_value_config,
    write_config_snapshot,
    write_report_csv,
    write_report_json,
    write_sweep_csv,
)


def _bandwidth(text):
    return "median" if text == "median" else float(text)


# every knob a training run understands: config-file key -> (cast, default)
KNOBS = {
    "model": (str, "appnp"),
    "lam": (float, 0.0),
    "beta": (float, 0.0),
    "alpha": (float, 0.1),
    "propagation_steps": (int, 10),
    "hidden": (int, 64),
    "dropout_rate": (float, 0.5),
    "learning_rate": (float, 0.01),
    "weight_decay": (float, 5e-4),
    "max_epochs": (int, 1000),
    "patience": (int, 100),
    "seed": (int, 0),
    "epsilon": (float, 0.0),
    "per_class_train": (int, 20),
    "val_size": (int, 500),
    "test_size": (int, 1000),
    "split_seed": (int, 0),
    "reg_target": (str, "all_unlabeled"),
    "reg_inputs": (str, "probs"),
    "reg_sample_cap": (int, 2048),
    "num_moments": (int, 5),
    "mmd_kernel": (str, "rbf"),
    "mmd_bandwidth": (_bandwidth, "median"),
    "trials": (int, 10),
    "jobs": (int, 1),
}

REG_TARGET_ALIASES = {"all": "all_unlabeled", "test": "test_only"}


def resolve_dataset(ref):
    """Accept a cache file path, a directory holding exactly one cache, or
    a bare name looked up as <SHIFTREG_DATA_DIR>/<name>.bin."""
    if not ref:
        raise InputError("no dataset given (use --dataset or the dataset config key)")
    path = Path(ref)
    if path.is_file():
        return path
    if path.is_dir():
        caches = sorted(path.glob("*.bin"))
        if len(caches) != 1:
            raise InputError(
                f"{ref}: expected exactly one .bin cache in the directory, "
                f"found {len(caches)}"
            )
        return caches[0]
    root = os.environ.get("SHIFTREG_DATA_DIR", "")
    if root:
        named = Path(root) / f"{ref}.bin"
        if named.is_file():
            return named
    raise InputError(
        f"dataset {ref!r} not found (checked the path itself and SHIFTREG_DATA_DIR)"
    )


def _cast_knob(key, text):
    cast = KNOBS[key][0]
    try:
        return cast(text)
    except ValueError as exc:
        raise InputError(f"config key {key!r}: cannot parse {text!r}") from exc


def _resolve_knobs(ns, extra_allowed=()):
    """Merge explicit flags over config-file values over defaults."""
    file_cfg = read_key_value_config(ns.config) if ns.config else {}
    allowed = set(KNOBS) | {"dataset"} | set(extra_allowed)
    unknown = sorted(set(file_cfg) - allowed)
    if unknown:
        raise InputError(f"unknown config keys: {', '.join(unknown)}")
    knobs = {}
    for key in KNOBS:
        flag_value = getattr(ns, key, None)
        if flag_value is not None:
            knobs[key] = flag_value
        elif key in file_cfg:
            knobs[key] = _cast_knob(key, file_cfg[key])
        else:
            knobs[key] = KNOBS[key][1]
    knobs["reg_target"] = REG_TARGET_ALIASES.get(knobs["reg_target"], knobs["reg_target"])
    dataset_ref = ns.dataset if ns.dataset is not None else file_cfg.get("dataset")
    return knobs, dataset_ref, file_cfg


def _train_config(knobs):
    fields = {k: v for k, v in knobs.items() if k not in ("trials", "jobs", "split_seed")}
    return TrainConfig(**fields)


def _load_training_inputs(knobs, dataset_ref):
    dataset_path = resolve_dataset(dataset_ref)
    g, meta = load_cache(dataset_path)
    masks = make_uniform_splits(
        g, knobs["per_class_train"], knobs["val_size"], knobs["test_size"],
        seed=knobs["split_seed"],
    )
    return dataset_path, g, meta, masks


def _snapshot(out_dir, knobs, dataset_path, extra=None):
    mapping = dict(knobs)
    mapping["dataset"] = str(dataset_path)
    if extra:
        mapping.update(extra)
    write_config_snapshot(out_dir / "config.snapshot", mapping)


def _report_failures(failures):
    for failure in failures:
        print(f"trial seed {failure['seed']} diverged: {failure['error']}",
              file=sys.stderr)


def cmd_prepare(ns):
    manifest = DatasetManifest(name=ns.name, content_path=ns.content,
                               cites_path=ns.cites)
    g = load_citation_text(manifest)
    names = citation_label_names(manifest)
    out_dir = Path(ns.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cache = out_dir / f"{ns.name}.bin"
    save_cache(cache, g, ns.name, label_names=names)
    print(f"{ns.name}: n={g.num_nodes} m={g.num_edges} d={g.num_features} "
          f"num_classes={g.num_classes}")
    print(f"wrote {cache}")
    return 0


def cmd_train(ns):
    knobs, dataset_ref, _ = _resolve_knobs(ns)
    cfg = _train_config(knobs)
    dataset_path, g, meta, masks = _load_training_inputs(knobs, dataset_ref)
    cfg = replace(cfg, dataset=meta["name"])

    agg = run_trials(cfg, g, masks, n_trials=knobs["trials"], jobs=knobs["jobs"])

    out_dir = Path(ns.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = write_report_json(out_dir / "report.json", agg)
    write_report_csv(out_dir / "report.csv", agg)
    _snapshot(out_dir, knobs, dataset_path)
    plot_loss_curves(report, out_dir / "loss_curves.png")

    print(f"F1: {format_f1(agg.f1_mean, agg.f1_std)}")
    if agg.failures:
        _report_failures(agg.failures)
        return 1
    return 0


def _parse_values(text):
    if text is None:
        raise InputError("no sweep values given (use --values or the values config key)")
    items = [chunk.strip() for chunk in text.split(",") if chunk.strip()]
    if not items:
        raise InputError("sweep needs at least one value")
    try:
        return [float(item) for item in items]
    except ValueError as exc:
        raise InputError(f"cannot parse sweep values {text!r}") from exc


def cmd_sweep(ns):
    knobs, dataset_ref, file_cfg = _resolve_knobs(ns, extra_allowed=("axis", "values"))
    axis = ns.axis if ns.axis is not None else file_cfg.get("axis")
    if axis is None:
        raise InputError("no sweep axis given (use --axis or the axis config key)")
    if axis not in SWEEP_AXES:
        raise InputError(f"sweep axis must be one of {sorted(SWEEP_AXES)}, got {axis!r}")
    values_text = ns.values if ns.values is not None else file_cfg.get("values")
    values = _parse_values(values_text)

    cfg = _train_config(knobs)
    dataset_path, g, meta, masks = _load_training_inputs(knobs, dataset_ref)
    cfg = replace(cfg, dataset=meta["name"])

    rows = sweep(cfg, axis, values, g, masks, n_trials=knobs["trials"],
                 jobs=knobs["jobs"])

    out_dir = Path(ns.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(out_dir / "sweep.csv", axis, rows)
    _snapshot(out_dir, knobs, dataset_path,
              extra={"axis": axis, "values": ",".join(repr(v) for v in values)})
    plot_sweep(axis, rows, out_dir / "sweep.png")

    failed = False
    for value, agg in rows:
        print(f"{axis}={value:g} F1: {format_f1(agg.f1_mean, agg.f1_std)}")
        if agg.failures:
            _report_failures(agg.failures)
            failed = True
    return 1 if failed else 0


def _resolve_report(ref):
    path = Path(ref)
    if path.is_dir():
        path = path / "report.json"
    if not path.is_file():
        raise InputError(f"report not found: {ref}")
    return path


def cmd_report(ns):
    reports = [load_report(_resolve_report(ref)) for ref in ns.inputs]
    table = comparison_table(reports, ns.format)
    if ns.out is None:
        print(table, end="")
        return 0
    out_dir = Path(ns.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    table_path = out_dir / f"comparison.{ns.format}"
    table_path.write_text(table)
    plot_comparison(reports, out_dir / "comparison.png")
    print(f"wrote {table_path}")
    print(f"wrote {out_dir / 'comparison.png'}")
    return 0


def _add_run_flags(parser):
    parser.add_argument("--dataset", help="cache file, directory, or name under SHIFTREG_DATA_DIR")
    parser.add_argument("--config", help="key=value file merged beneath explicit flags")
    parser.add_argument("--model", choices=["appnp", "gcn"])
    parser.add_argument("--lambda", dest="lam", type=float,
                        help="CMD penalty weight")
    parser.add_argument("--beta", type=float, help="MMD penalty weight")
    parser.add_argument("--alpha", type=float, help="teleport probability")
    parser.add_argument("--propagation-steps", type=int)
    parser.add_argument("--hidden", type=int)
    parser.add_argument("--dropout-rate", type=float)
    parser.add_argument("--learning-rate", type=float)
    parser.add_argument("--weight-decay", type=float)
    parser.add_argument("--max-epochs", type=int)
    parser.add_argument("--patience", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--epsilon", type=float, help="training-set bias strength")
    parser.add_argument("--per-class-train", type=int)
    parser.add_argument("--val-size", type=int)
    parser.add_argument("--test-size", type=int)
    parser.add_argument("--split-seed", type=int)
    parser.add_argument("--reg-target", choices=["all", "test", "all_unlabeled", "test_only"])
    parser.add_argument("--reg-inputs", choices=["probs", "logits"])
    parser.add_argument("--reg-sample-cap", type=int)
    parser.add_argument("--num-moments", type=int)
    parser.add_argument("--mmd-kernel", choices=["rbf", "linear"])
    parser.add_argument("--mmd-bandwidth", type=_bandwidth)
    parser.add_argument("--trials", type=int, help="number of trials to aggregate")
    parser.add_argument("--jobs", type=int, help="parallel trials")
    parser.add_argument("--out", required=True, help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="shiftreg",
        description="Graph node classification under biased training splits.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="parse citation text files into a binary cache")
    p.add_argument("--content", required=True, help="node lines: id features... label")
    p.add_argument("--cites", required=True, help="edge lines: cited citing")
    p.add_argument("--name", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="run a multi-trial training experiment")
    _add_run_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="run trials across one swept hyperparameter")
    _add_run_flags(p)
    p.add_argument("--axis", choices=sorted(SWEEP_AXES))
    p.add_argument("--values", help="comma-separated numbers")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="render a comparison table from report JSONs")
    p.add_argument("--in", dest="inputs", nargs="+", required=True,
                   help="report.json files or directories holding one")
    p.add_argument("--format", choices=["md", "csv"], default="md")
    p.add_argument("--out", help="directory for the table and figure; prints to stdout when absent")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        return ns.func(ns)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (TrainingDiverged, ConvergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
