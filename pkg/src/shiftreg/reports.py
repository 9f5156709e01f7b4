"""Serialization of experiment results: JSON reports, flat CSV tables,
plot-ready sweep tables, comparison tables, and config snapshots.

Files written here are byte-deterministic for a fixed config and seed, so
re-running a command must reproduce them exactly. Wall-clock timings are
therefore kept out of every file and reported on the terminal instead.
"""

import csv
import io
import json

from .errors import InputError

REQUIRED_REPORT_KEYS = ("config", "f1_mean", "f1_std", "trials", "failures")


def format_f1(mean: float, std: float) -> str:
    """Table presentation of a score: percent, two decimals, mean ± std."""
    return f"{100.0 * mean:.2f} ± {100.0 * std:.2f}"


def report_to_dict(agg) -> dict:
    """Full-fidelity view of an AggregateReport minus wall times."""
    return {
        "config": dict(agg.config),
        "f1_mean": agg.f1_mean,
        "f1_std": agg.f1_std,
        "f1_pretty": format_f1(agg.f1_mean, agg.f1_std),
        "trials": [
            {
                "seed": t.seed,
                "test_f1": t.test_f1,
                "best_epoch": t.best_epoch,
                "num_epochs": len(t.epoch_total),
                "epoch_ce": t.epoch_ce,
                "epoch_cmd": t.epoch_cmd,
                "epoch_mmd": t.epoch_mmd,
                "epoch_total": t.epoch_total,
            }
            for t in agg.trials
        ],
        "failures": list(agg.failures),
    }


def write_report_json(path, agg) -> dict:
    data = report_to_dict(agg)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return data


def load_report(path) -> dict:
    """Read back a report JSON, checking the schema before use."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise InputError(f"{path}: report must be a JSON object")
    missing = [k for k in REQUIRED_REPORT_KEYS if k not in data]
    if missing:
        raise InputError(f"{path}: missing report keys {missing}")
    return data


def write_report_csv(path, agg):
    """One-row flat summary: config knobs plus mean, std, and trial count."""
    cfg = agg.config
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["dataset", "model", "lam", "beta", "epsilon", "f1_mean", "f1_std",
             "n_trials", "n_failures"]
        )
        writer.writerow(
            [cfg.get("dataset", ""), cfg["model"], repr(cfg["lam"]),
             repr(cfg["beta"]), repr(cfg["epsilon"]), repr(agg.f1_mean),
             repr(agg.f1_std), len(agg.trials), len(agg.failures)]
        )


def write_sweep_csv(path, axis: str, rows):
    """Plot-ready table, one row per swept value: axis, value, f1_mean, f1_std."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["axis", "value", "f1_mean", "f1_std"])
        for value, agg in rows:
            writer.writerow([axis, repr(float(value)), repr(agg.f1_mean),
                             repr(agg.f1_std)])


def config_label(config: dict) -> str:
    """Row identity of a run in comparison tables: model plus penalty and
    bias knobs."""
    return (
        f"{config['model']} lam={config['lam']:g} beta={config['beta']:g} "
        f"eps={config['epsilon']:g}"
    )


def comparison_table(reports, fmt: str = "md") -> str:
    """Cross-dataset comparison: one row per config, one column per
    dataset, cells showing mean ± std in percent.

    Rows and columns appear in first-encounter order. The same config on
    the same dataset twice is ambiguous and rejected.
    """
    if fmt not in ("md", "csv"):
        raise InputError(f"format must be md or csv, got {fmt!r}")
    if not reports:
        raise InputError("no reports to compare")
    rows = []
    cols = []
    cells = {}
    for rep in reports:
        label = config_label(rep["config"])
        dataset = rep["config"].get("dataset") or "unnamed"
        if label not in rows:
            rows.append(label)
        if dataset not in cols:
            cols.append(dataset)
        if (label, dataset) in cells:
            raise InputError(
                f"two reports describe {label!r} on dataset {dataset!r}"
            )
        cells[(label, dataset)] = (rep["f1_mean"], rep["f1_std"])

    if fmt == "md":
        lines = ["| config | " + " | ".join(cols) + " |",
                 "| --- |" + " --- |" * len(cols)]
        for label in rows:
            entries = [
                format_f1(*cells[(label, d)]) if (label, d) in cells else "-"
                for d in cols
            ]
            lines.append("| " + label + " | " + " | ".join(entries) + " |")
        return "\n".join(lines) + "\n"

    buf = io.StringIO()
    writer = csv.writer(buf)
    header = ["config"]
    for d in cols:
        header += [f"{d}_mean", f"{d}_std"]
    writer.writerow(header)
    for label in rows:
        row = [label]
        for d in cols:
            if (label, d) in cells:
                mean, std = cells[(label, d)]
                row += [f"{100.0 * mean:.2f}", f"{100.0 * std:.2f}"]
            else:
                row += ["", ""]
        writer.writerow(row)
    return buf.getvalue()


def write_config_snapshot(path, mapping: dict):
    """Flat key=value lines, sorted by key; the same format the CLI accepts
    back as a config file, so a snapshot reproduces its run."""
    lines = []
    for key in sorted(mapping):
        value = mapping[key]
        text = value if isinstance(value, str) else repr(value)
        if "\n" in text or "=" in text:
            raise InputError(f"snapshot value for {key!r} is not representable")
        lines.append(f"{key}={text}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_key_value_config(path) -> dict:
    """Parse a flat key=value file: one pair per line, '#' starts a
    comment, blank lines ignored. Values stay strings; the consumer casts."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InputError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, value = line.split("=", 1)
            key = key.strip()
            if not key:
                raise InputError(f"{path}:{lineno}: empty key")
            if key in out:
                raise InputError(f"{path}:{lineno}: duplicate key {key!r}")
            out[key] = value.strip()
    return out
