"""Pipeline command line: simulate -> extract -> cluster -> order -> label
-> train -> classify, plus a standalone heatmap renderer.

Every subcommand consumes and produces files only, so any stage can be
rerun in isolation. One master seed fans out into per-stage seeds by
hashing the stage name, so changing one stage's structure never perturbs
another stage's randomness. Exit codes: 0 ok, 2 configuration or
validation error, 3 empty result (no scenarios found).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import classify as clf
from . import ordering, scenarios, xmurf
from .dataset import (
    ParseError,
    load_dataset,
    load_labeled_dataset,
    load_matrix,
    save_dataset,
    save_labeled_dataset,
    save_matrix,
)
from .sim import RoadConfig, SimConfigError, SimParams, run_simulation, save_trace, load_trace

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_EMPTY = 3

DEFAULT_CONFIG = {
    "road": {"n_l": 3, "lane_width": 3.5, "n_vpl": 10, "speed_limit": 33.3, "d_il_max": 80.0},
    "sim": {"dt": 0.05, "duration": 400.0, "runs": 5, "seed": None, "target_resample_mean": 20.0},
    "xmurf": {"b_trees": 100, "seed": None},
    "ordering": {"linkage": "average", "optimal_leaf_order": False},
    "classify": {"b_trees": 100, "ratio": 0.75, "seed": None},
    "paths": {"workdir": "out"},
}


def stage_seed(master: int, label: str, k: int | None = None) -> int:
    """Derive a stage seed from the master seed and a fixed stage label."""
    word = int.from_bytes(hashlib.sha256(label.encode("ascii")).digest()[:4], "big")
    key = (word,) if k is None else (word, k)
    ss = np.random.SeedSequence(entropy=master, spawn_key=key)
    return int(ss.generate_state(1, np.uint64)[0])


def load_config(path: str | None) -> dict:
    cfg = json.loads(json.dumps(DEFAULT_CONFIG))  # deep copy
    if path:
        user = json.loads(Path(path).read_text())
        for section, values in user.items():
            if section not in cfg:
                raise ValueError(f"unknown config section {section!r}")
            if not isinstance(values, dict):
                raise ValueError(f"config section {section!r} must be an object")
            for key, val in values.items():
                if key not in cfg[section]:
                    raise ValueError(f"unknown config key {section}.{key}")
                cfg[section][key] = val
    return cfg


def _workdir(cfg: dict, args) -> Path:
    out = Path(args.out or cfg["paths"]["workdir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _master_seed(cfg: dict, args, stage: str) -> int:
    if args.seed is not None:
        return args.seed
    configured = cfg[stage].get("seed")
    if configured is not None:
        return int(configured)
    return 0


def cmd_simulate(cfg: dict, args) -> int:
    out = _workdir(cfg, args)
    road = RoadConfig(**cfg["road"])
    sim_cfg = cfg["sim"]
    master = _master_seed(cfg, args, "sim")
    for k in range(int(sim_cfg["runs"])):
        params = SimParams(
            dt=float(sim_cfg["dt"]),
            duration=float(sim_cfg["duration"]),
            seed=stage_seed(master, "sim", k),
            target_resample_mean=float(sim_cfg["target_resample_mean"]),
        )
        trace = run_simulation(road, params)
        save_trace(trace, out / f"trace_{k}.jsonl")
    print(f"simulated {sim_cfg['runs']} run(s) into {out}")
    return EXIT_OK


def cmd_extract(cfg: dict, args) -> int:
    out = _workdir(cfg, args)
    trace_paths = sorted(out.glob("trace_*.jsonl"))
    pairs = [(p.stem, load_trace(p)) for p in trace_paths]
    dataset, meta = scenarios.scenarios_to_dataset(pairs)
    if dataset.n_rows == 0:
        print("no scenarios found", file=sys.stderr)
        return EXIT_EMPTY
    save_dataset(dataset, out / "scenarios.csv")
    (out / "scenarios_meta.json").write_text(json.dumps(meta) + "\n")
    print(f"extracted {dataset.n_rows} scenarios from {len(pairs)} trace(s)")
    return EXIT_OK


def cmd_cluster(cfg: dict, args) -> int:
    out = _workdir(cfg, args)
    dataset = load_dataset(args.input or out / "scenarios.csv")
    if dataset.n_rows < 2:
        print("need at least 2 scenarios to cluster", file=sys.stderr)
        return EXIT_CONFIG
    seed = stage_seed(_master_seed(cfg, args, "xmurf"), "xmurf")
    forest = xmurf.fit(dataset, int(args.b_trees or cfg["xmurf"]["b_trees"]), seed)
    matrix = xmurf.proximity_matrix(forest, dataset)
    save_matrix(matrix, out / "proximity.raw", fmt="raw")
    save_matrix(matrix, out / "proximity.csv", fmt="csv")
    xmurf.save_forest(forest, out / "forest.json")
    print(f"clustered M={dataset.n_rows} with B={forest.n_trees}")
    return EXIT_OK


def cmd_order(cfg: dict, args) -> int:
    out = _workdir(cfg, args)
    matrix = load_matrix(args.input or out / "proximity.raw", fmt="raw")
    dend = ordering.linkage(matrix, method=cfg["ordering"]["linkage"])
    if cfg["ordering"]["optimal_leaf_order"]:
        perm = ordering.optimal_leaf_order(dend, matrix)
    else:
        perm = ordering.leaf_order(dend)
    p_ordered = ordering.reorder(matrix, perm)
    ordering.save_dendrogram(dend, out / "dendrogram.json")
    ordering.save_permutation(perm, out / "permutation.json")
    save_matrix(p_ordered, out / "proximity_ordered.raw", fmt="raw")
    save_matrix(p_ordered, out / "proximity_ordered.csv", fmt="csv")
    ordering.render_heatmap(p_ordered, out / "heatmap.ppm")
    print(f"seriation done for M={matrix.size}")
    return EXIT_OK


def cmd_label(cfg: dict, args) -> int:
    out = _workdir(cfg, args)
    dataset = load_dataset(args.input or out / "scenarios.csv")
    perm = ordering.load_permutation(out / "permutation.json")
    ranges = ordering.load_cluster_ranges(args.ranges)
    p_ordered = load_matrix(out / "proximity_ordered.raw", fmt="raw")
    for entry in ordering.range_report(p_ordered, ranges):
        print(
            f"range [{entry['start']}, {entry['end']}] label={entry['label']} "
            f"size={entry['size']} mean_similarity={entry['mean_similarity']:.3f}"
        )
    labeled = ordering.apply_cluster_ranges(dataset, perm, ranges)
    save_labeled_dataset(labeled, out / "labeled.csv")
    print(f"labeled {labeled.base.n_rows} of {dataset.n_rows} scenarios")
    return EXIT_OK


def cmd_train(cfg: dict, args) -> int:
    out = _workdir(cfg, args)
    labeled = load_labeled_dataset(args.input or out / "labeled.csv")
    seed = stage_seed(_master_seed(cfg, args, "classify"), "clf")
    forest = clf.fit_classifier(labeled, int(args.b_trees or cfg["classify"]["b_trees"]), seed)
    thresholds = clf.oob_thresholds(forest, labeled)
    clf.save_model(forest, thresholds, out / "model.json")
    kb = ", ".join(f"{c}={v:.3f}" for c, v in thresholds.kappa_bar.items())
    print(f"trained B={forest.n_trees} on {labeled.base.n_rows} rows; kappa_bar: {kb}")
    return EXIT_OK


def cmd_classify(cfg: dict, args) -> int:
    out = _workdir(cfg, args)
    forest, thresholds = clf.load_model(args.model or out / "model.json")
    if thresholds is None:
        print("model file carries no thresholds; retrain first", file=sys.stderr)
        return EXIT_CONFIG
    dataset = load_dataset(args.input or out / "scenarios.csv")
    ratio = float(args.ratio if args.ratio is not None else cfg["classify"]["ratio"])
    out_path = Path(args.output) if args.output else out / "predictions.csv"
    n_assigned = 0
    with open(out_path, "w", newline="\n") as fh:
        fh.write("id,label,vote_fraction,threshold_used\n")
        for i in range(dataset.n_rows):
            label, fraction, threshold = clf.predict_detail(forest, thresholds, dataset.values[i], ratio)
            n_assigned += label is not None
            fh.write(
                f"{dataset.ids[i]},{label if label is not None else clf.UNASSIGNED},"
                f"{fraction:.17g},{threshold:.17g}\n"
            )
    print(f"assigned {n_assigned}/{dataset.n_rows} at ratio {ratio}")
    return EXIT_OK


def cmd_render(cfg: dict, args) -> int:
    matrix = load_matrix(args.matrix, fmt=args.format)
    ordering.render_heatmap(matrix, args.output)
    print(f"rendered {matrix.size}x{matrix.size} heatmap to {args.output}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scenforest", description=__doc__)
    parser.add_argument("--config", help="JSON config file (defaults built in)")
    parser.add_argument("--seed", type=int, help="master seed overriding configured stage seeds")
    parser.add_argument("--threads", type=int, default=1, help="reserved; stages run deterministically")
    parser.add_argument("--out", help="working directory for pipeline artifacts")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate", help="run seeded traffic simulations")
    sub.add_parser("extract", help="detect scenarios in traces and emit the feature CSV")

    p = sub.add_parser("cluster", help="fit the unsupervised forest and write the proximity matrix")
    p.add_argument("--input", help="scenario CSV (default <out>/scenarios.csv)")
    p.add_argument("--b-trees", type=int, dest="b_trees")

    p = sub.add_parser("order", help="seriate the proximity matrix and render the heatmap")
    p.add_argument("--input", help="raw matrix path (default <out>/proximity.raw)")

    p = sub.add_parser("label", help="materialize cluster labels from a range file")
    p.add_argument("--input", help="scenario CSV (default <out>/scenarios.csv)")
    p.add_argument("--ranges", required=True, help="JSON list of {start, end, label}")

    p = sub.add_parser("train", help="train the classifier on the labeled CSV")
    p.add_argument("--input", help="labeled CSV (default <out>/labeled.csv)")
    p.add_argument("--b-trees", type=int, dest="b_trees")

    p = sub.add_parser("classify", help="predict labels with the withdraw rule")
    p.add_argument("--input", help="feature CSV to classify (default <out>/scenarios.csv)")
    p.add_argument("--model", help="model JSON (default <out>/model.json)")
    p.add_argument("--ratio", type=float, help="threshold ratio (default from config)")
    p.add_argument("--output", help="predictions CSV (default <out>/predictions.csv)")

    p = sub.add_parser("render", help="render any matrix file as a PPM heatmap")
    p.add_argument("--matrix", required=True)
    p.add_argument("--format", choices=("csv", "raw"), default="raw")
    p.add_argument("--output", required=True)
    return parser


_COMMANDS = {
    "simulate": cmd_simulate,
    "extract": cmd_extract,
    "cluster": cmd_cluster,
    "order": cmd_order,
    "label": cmd_label,
    "train": cmd_train,
    "classify": cmd_classify,
    "render": cmd_render,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        return _COMMANDS[args.command](cfg, args)
    except (SimConfigError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
