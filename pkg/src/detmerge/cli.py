"""Command line: ``detmerge generate | run | plot | inspect``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import io as dio
from .errors import DetMergeError, EmptyCorpus, MalformedInput
from .experiment import GridCell, load_grid, run_grid
from .hdbscan import Embedding, HdbscanConfig, hdbscan_cluster
from .clustering import cluster_sample_set
from .plots import emit_plots
from .synthgen import GenConfig, generate_corpus, load_scene_specs, sample_scenes

EXIT_OK = 0
EXIT_MALFORMED = 2
EXIT_PARTIAL = 3

SPATIAL_COLUMNS = ("method", "affinity", "theta", "image_id", "regime", "gt_iou", "total_variance")

log = logging.getLogger("detmerge")


def _fmt(value) -> str:
    return f"{value:.6f}" if isinstance(value, float) else str(value)


def cmd_generate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = GenConfig(seed=args.seed, n_samples=args.samples, scenes_per_regime=args.scenes_per_regime)
    if args.scenes:
        specs, classes = load_scene_specs(args.scenes)
        config = GenConfig(seed=args.seed, n_samples=args.samples, classes=classes)
    else:
        specs = sample_scenes(args.profile, config, args.images)
    corpus = generate_corpus(specs, config, name=args.name)
    dio.write_corpus(out / "corpus.jsonl", corpus.sample_sets, corpus.manifest)
    dio.write_ground_truth(out / "gt.jsonl", corpus.ground_truth)
    print(f"wrote {len(corpus.sample_sets)} images to {out / 'corpus.jsonl'} and {out / 'gt.jsonl'}")
    return EXIT_OK


def cmd_run(args) -> int:
    sample_sets, manifest = dio.load_corpus(args.corpus)
    if not sample_sets:
        raise EmptyCorpus(f"{args.corpus}: no images")
    gts = dio.load_ground_truth(args.gt, manifest)
    cells = load_grid(args.grid)
    kinds = ("entropy", "spatial") if args.uncertainty == "both" else (args.uncertainty,)
    results = run_grid(sample_sets, gts, cells, kinds, jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = [row for r in results for row in r.rows]
    dio.write_report(rows, out / "report.csv")
    with open(out / "spatial.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SPATIAL_COLUMNS)
        for r in results:
            for rec in r.spatial:
                writer.writerow([_fmt(rec[k]) for k in SPATIAL_COLUMNS])
    failures = [{"cell": r.cell.to_json(), "error": r.error} for r in results if r.error]
    failure_path = out / "failures.json"
    if failures:
        failure_path.write_text(json.dumps(failures, indent=2) + "\n", encoding="utf-8")
        print(f"{len(failures)} of {len(cells)} grid cells failed; see {failure_path}", file=sys.stderr)
    elif failure_path.exists():
        failure_path.unlink()
    print(f"wrote {len(rows)} rows to {out / 'report.csv'}")
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_plot(args) -> int:
    rows = dio.read_report(args.report)
    if not rows:
        raise MalformedInput(f"{args.report}: no rows to plot")
    spatial = None
    if args.spatial:
        with open(args.spatial, newline="", encoding="utf-8") as fh:
            spatial = list(csv.DictReader(fh))
    for path in emit_plots(rows, args.out, spatial):
        print(path)
    return EXIT_OK


def cmd_inspect(args) -> int:
    sample_sets, _ = dio.load_corpus(args.corpus)
    chosen = [s for s in sample_sets if args.image is None or s.image_id == args.image]
    if not chosen:
        raise MalformedInput(f"image {args.image!r} not in corpus")
    cell = GridCell(args.method, args.affinity, args.theta)
    dump = []
    for s in chosen:
        if cell.method == "HDBSCAN":
            clusters = hdbscan_cluster(s, Embedding(cell.affinity), HdbscanConfig.default_for(s.n_samples))
        elif cell.method == "Standard":
            clusters = []
        else:
            clusters = cluster_sample_set(s, cell.cluster_config())
        observations = cell.observations(s)
        dump.append({
            "image_id": s.image_id,
            "regime": s.regime.value,
            "n_samples": s.n_samples,
            "n_detections": len(s.detections()),
            "clusters": [
                {"size": len(c), "box": list(c.box.as_tuple()), "winning_label": c.winning_label,
                 "samples": sorted(c.sample_mask)}
                for c in clusters
            ],
            "observations": [
                {"box": list(o.box.as_tuple()), "label": o.winning_label, "score": o.winning_score,
                 "members": o.member_count, "entropy": o.entropy, "spatial_variance": o.spatial_variance}
                for o in observations
            ],
        })
    json.dump(dump, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="detmerge", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a seeded synthetic corpus and its ground truth")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--profile", default="default")
    g.add_argument("--images", type=int, default=None, help="total images (default: profile shares)")
    g.add_argument("--scenes-per-regime", type=int, default=10)
    g.add_argument("--samples", type=int, default=20, help="forward passes per image")
    g.add_argument("--scenes", default=None, help="JSON scene spec file (overrides --profile)")
    g.add_argument("--name", default="synthetic")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="evaluate the affinity/clustering grid")
    r.add_argument("--corpus", required=True)
    r.add_argument("--gt", required=True)
    r.add_argument("--grid", default="paper-default", help="'paper-default' or a JSON grid file")
    r.add_argument("--uncertainty", choices=("entropy", "spatial", "both"), default="both")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--seed", type=int, default=0, help="accepted for symmetry; the run is deterministic")
    r.add_argument("--jobs", type=int, default=1)
    r.set_defaults(func=cmd_run)

    p = sub.add_parser("plot", help="render SVG figures from a report")
    p.add_argument("--report", required=True)
    p.add_argument("--spatial", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    i = sub.add_parser("inspect", help="dump clusters and observations per image")
    i.add_argument("--corpus", required=True)
    i.add_argument("--image", default=None)
    i.add_argument("--method", default="BSAS")
    i.add_argument("--affinity", default="IoU+SL")
    i.add_argument("--theta", type=float, default=0.95)
    i.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (MalformedInput, EmptyCorpus) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except DetMergeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
