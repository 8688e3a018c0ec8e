"""Command-line entry point.

Subcommands: embed, sweep, gen-data, curvature, metrics, plot. Exit codes:
0 success, 1 usage error, 2 runtime failure. Flag precedence is
command line > config file > built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import dataio
from .curvature import edge_curvatures
from .embed import Embedding
from .metrics import (
    centroid_triplet_accuracy,
    connectivity_diagnostic,
    knn_classifier_accuracy,
    random_triplet_accuracy,
    MetricsReport,
)
from .neighbors import fuzzy_weights, knn_exact
from .pipeline import (
    PipelineConfig,
    PipelineError,
    config_from_params,
    run_pipeline,
    stage_seed,
    sweep,
)
from .plotting import plot_scatter
from .rectify import jaccard_many

USAGE_ERROR = 1
RUNTIME_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _read_config_file(path: str) -> dict:
    """Read key=value lines, or a JSON object (a run manifest also works)."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if path.endswith(".json"):
        obj = json.loads(text)
        if isinstance(obj, dict) and "params" in obj:
            obj = obj["params"]
        return {k: v for k, v in obj.items() if v is not None}
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"bad config line {line!r} (expected key=value)")
        key, val = line.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def _add_pipeline_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key=value file or JSON manifest with defaults")
    p.add_argument("--input", help="input point-cloud CSV")
    p.add_argument("--label-column", help="header name of the label column")
    p.add_argument(
        "--generator",
        choices=["swiss_roll", "s_curve", "trefoil", "three_rings"],
        help="synthetic dataset instead of --input",
    )
    p.add_argument("--n", type=int, help="sample count (per ring for three_rings)")
    p.add_argument("--noise-sd", type=float, help="Gaussian noise std for generators")
    p.add_argument("--n-bridge", type=int, help="bridge points per gap (three_rings)")
    p.add_argument("--bridge-noise-sd", type=float, help="bridge jitter (three_rings)")
    p.add_argument("--k", type=int, help="neighbor count")
    p.add_argument("--approx-knn", action="store_true", default=None,
                   help="use the approximate neighbor search")
    p.add_argument("--delta", type=float, help="Jaccard threshold")
    p.add_argument("--alpha", type=float, help="random-walk laziness in [0,1]")
    p.add_argument("--strength", type=float, help="base tanh strength S")
    p.add_argument("--dynamic-strength", choices=["on", "off"],
                   help="estimate S from the curvature distribution")
    p.add_argument("--target-tanh", type=float, help="dynamic strength target T")
    p.add_argument("--beta", type=float, help="intra-cluster suppression in [0,1]")
    p.add_argument("--eps-floor", type=float, help="noise-branch weight floor")
    p.add_argument("--epochs", type=int, help="layout epochs")
    p.add_argument("--min-dist", type=float, help="layout kernel min distance")
    p.add_argument("--seed", type=int, help="run seed (fans out per stage)")
    p.add_argument("--rectify", choices=["on", "off", "identity"],
                   help="off bypasses curvature entirely")
    p.add_argument("--solver", choices=["sinkhorn", "exact"], help="transport solver")
    p.add_argument("--reg", type=float, help="Sinkhorn regularization override")
    p.add_argument("--out", help="output directory")


_FLAG_TO_PARAM = {
    "input": "input",
    "label_column": "label-column",
    "generator": "generator",
    "n": "n",
    "noise_sd": "noise-sd",
    "n_bridge": "n-bridge",
    "bridge_noise_sd": "bridge-noise-sd",
    "k": "k",
    "approx_knn": "approx-knn",
    "delta": "delta",
    "alpha": "alpha",
    "strength": "strength",
    "dynamic_strength": "dynamic-strength",
    "target_tanh": "target-tanh",
    "beta": "beta",
    "eps_floor": "eps-floor",
    "epochs": "epochs",
    "min_dist": "min-dist",
    "seed": "seed",
    "rectify": "rectify",
    "solver": "solver",
    "reg": "reg",
}


def _resolve_config(args) -> PipelineConfig:
    params: dict = {}
    if args.config:
        params.update(_read_config_file(args.config))
    for attr, key in _FLAG_TO_PARAM.items():
        val = getattr(args, attr, None)
        if val is not None:
            params[key] = val
    if "input" not in params and "generator" not in params:
        raise ValueError("one of --input or --generator is required")
    if "input" in params and "generator" in params:
        raise ValueError("--input and --generator are mutually exclusive")
    return config_from_params(
        params,
        out_dir=args.out,
        plot=getattr(args, "plot", False),
        report=getattr(args, "report", False),
    )


def _load_embedding_csv(path: str):
    cloud = dataio.load_csv(path)
    labels = None
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    if header and header[-1] == "label":
        labels = cloud.points[:, -1].astype(np.int64)
        coords = cloud.points[:, :-1]
    else:
        coords = cloud.points
    return Embedding(coords), labels


def _cmd_embed(args) -> int:
    config = _resolve_config(args)
    if config.out_dir is None:
        raise ValueError("--out is required")
    embedding, report = run_pipeline(config)
    print(f"wrote {config.out_dir}/embedding.csv ({embedding.n} x {embedding.dim})")
    print(report.to_json())
    return 0


def _cmd_sweep(args) -> int:
    config = _resolve_config(args)
    if config.out_dir is None:
        raise ValueError("--out is required")
    grid: dict = {}
    if args.delta_grid:
        grid["delta"] = [float(v) for v in args.delta_grid.split(",")]
    if args.k_grid:
        grid["k"] = [int(v) for v in args.k_grid.split(",")]
    if not grid:
        raise ValueError("sweep needs --delta-grid and/or --k-grid")
    rows = sweep(config, grid)
    failures = sum(1 for r in rows if r["status"] != "ok")
    print(f"swept {len(rows)} runs ({failures} failed); wrote {config.out_dir}/summary.csv")
    return 0


def _cmd_gen_data(args) -> int:
    if args.generator is None:
        raise ValueError("--generator is required")
    if args.out is None:
        raise ValueError("--out is required")
    seed = stage_seed(args.seed if args.seed is not None else 0, "data")
    n = args.n if args.n is not None else 1000
    noise = args.noise_sd if args.noise_sd is not None else 0.0
    if args.generator == "three_rings":
        cloud = dataio.gen_three_rings(
            n,
            args.n_bridge if args.n_bridge is not None else 10,
            args.bridge_noise_sd if args.bridge_noise_sd is not None else 0.03,
            seed,
        )
    else:
        cloud = dataio.GENERATORS[args.generator](n, noise, seed)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "data.csv")
    dataio.save_csv(cloud, path)
    print(f"wrote {path} ({cloud.n} x {cloud.dim})")
    return 0


def _cmd_curvature(args) -> int:
    config = _resolve_config(args)
    if config.out_dir is None:
        raise ValueError("--out is required")
    from .pipeline import _load_data

    cloud = _load_data(config)
    index = knn_exact(cloud, config.k)
    graph = fuzzy_weights(index)
    curvatures = edge_curvatures(graph, cloud, config.alpha, config.reg, config.solver)
    jac = jaccard_many(index, graph.ei, graph.ej)
    os.makedirs(config.out_dir, exist_ok=True)
    path = os.path.join(config.out_dir, "curvature.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("i,j,w,w1,kappa,jaccard\n")
        for e, c in enumerate(curvatures):
            fh.write(
                f"{c.i},{c.j},{float(graph.w[e])!r},{float(c.w1)!r},"
                f"{float(c.kappa)!r},{float(jac[e])!r}\n"
            )
    print(f"wrote {path} ({len(curvatures)} edges)")
    return 0


def _cmd_metrics(args) -> int:
    if args.input is None or args.embedding is None:
        raise ValueError("--input and --embedding are required")
    if args.out is None:
        raise ValueError("--out is required")
    cloud = dataio.load_csv(args.input, args.label_column)
    emb, emb_labels = _load_embedding_csv(args.embedding)
    labels = cloud.labels if cloud.labels is not None else emb_labels
    if emb.n != cloud.n:
        raise ValueError("embedding and cloud row counts differ")
    seed = stage_seed(args.seed if args.seed is not None else 0, "metrics")
    rte, rte_sd = random_triplet_accuracy(cloud, emb, seed=seed)
    cte = None
    knn_acc = None
    if labels is not None and len(np.unique(labels)) >= 3:
        lab_cloud = dataio.PointCloud(cloud.points, labels, cloud.name)
        cte = centroid_triplet_accuracy(lab_cloud, emb, seed=seed)
    if labels is not None:
        counts = np.bincount(labels - labels.min())
        if counts[counts > 0].min() >= 5:
            knn_acc = knn_classifier_accuracy(emb, labels, k=args.k or 5, seed=seed)
    comps, frac = connectivity_diagnostic(emb, k=10)
    report = MetricsReport(
        rte=rte,
        rte_stddev=rte_sd,
        cte=cte,
        knn_acc=knn_acc,
        components=comps,
        largest_fraction=frac,
        params={"seed": args.seed or 0, "metric_k": args.k or 5},
    )
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "metrics.json")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report.to_json() + "\n")
    print(report.to_json())
    return 0


def _cmd_plot(args) -> int:
    if args.embedding is None:
        raise ValueError("--embedding is required")
    if args.out is None:
        raise ValueError("--out is required")
    emb, labels = _load_embedding_csv(args.embedding)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "plot.svg")
    plot_scatter(emb, labels, path)
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="jorcumap", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_embed = sub.add_parser("embed", help="run the full embedding pipeline")
    _add_pipeline_flags(p_embed)
    p_embed.add_argument("--plot", action="store_true", help="also write plot.svg")
    p_embed.add_argument(
        "--report", action="store_true", help="also write rectification-report.csv"
    )
    p_embed.set_defaults(fn=_cmd_embed)

    p_sweep = sub.add_parser("sweep", help="run a parameter grid")
    _add_pipeline_flags(p_sweep)
    p_sweep.add_argument("--delta-grid", help="comma-separated Jaccard thresholds")
    p_sweep.add_argument("--k-grid", help="comma-separated neighbor counts")
    p_sweep.set_defaults(fn=_cmd_sweep)

    p_gen = sub.add_parser("gen-data", help="write a synthetic dataset CSV")
    _add_pipeline_flags(p_gen)
    p_gen.set_defaults(fn=_cmd_gen_data)

    p_curv = sub.add_parser("curvature", help="dump the per-edge curvature report")
    _add_pipeline_flags(p_curv)
    p_curv.set_defaults(fn=_cmd_curvature)

    p_metrics = sub.add_parser("metrics", help="score an embedding against a cloud")
    _add_pipeline_flags(p_metrics)
    p_metrics.add_argument("--embedding", help="embedding CSV to score")
    p_metrics.set_defaults(fn=_cmd_metrics)

    p_plot = sub.add_parser("plot", help="render an embedding CSV as SVG")
    _add_pipeline_flags(p_plot)
    p_plot.add_argument("--embedding", help="embedding CSV to draw")
    p_plot.set_defaults(fn=_cmd_plot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR
    except (ValueError, OSError) as exc:
        # config problems are usage errors; failures inside stages are not
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
