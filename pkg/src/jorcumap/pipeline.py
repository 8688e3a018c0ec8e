"""End-to-end pipeline: data -> graph -> curvature -> rectify -> layout -> metrics.

Artifacts (embedding.csv, metrics.json, run-manifest.json, optional plot and
rectification report) are written with deterministic bytes so reruns with the
same seed are directly diffable.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import os
import platform
from dataclasses import dataclass, field, replace

import numpy as np

from . import dataio
from .curvature import edge_curvatures
from .embed import Embedding, LayoutConfig, optimize, pca_init
from .metrics import (
    MetricsReport,
    centroid_triplet_accuracy,
    connectivity_diagnostic,
    knn_classifier_accuracy,
    random_triplet_accuracy,
)
from .neighbors import fuzzy_weights, knn_approx, knn_exact
from .plotting import plot_scatter
from .rectify import RectifierConfig, rectify_edges, resolve_strength

MODE_JORC = "jorc"
MODE_BASELINE = "baseline"
MODE_IDENTITY = "identity"


class PipelineError(RuntimeError):
    """A pipeline stage failed; carries the stage name and the cause."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def stage_seed(seed: int, stage: str) -> int:
    """Derive a per-stage seed from the run seed, stable across processes."""
    digest = hashlib.sha256(f"{seed}:{stage}".encode()).digest()
    return int.from_bytes(digest[:8], "little") & (2**63 - 1)


@dataclass
class PipelineConfig:
    """Resolved configuration of one pipeline run.

    Exactly one of ``input_path`` / ``generator`` selects the data source.
    ``rectify`` is "on", "off" (baseline; curvature never runs), or
    "identity" (curvature runs but weights pass through unchanged, an
    ablation hook).
    """

    input_path: str | None = None
    label_column: str | None = None
    generator: str | None = None
    n: int = 1000
    noise_sd: float = 0.0
    n_bridge: int = 10
    bridge_noise_sd: float = 0.03
    k: int = 15
    approx_knn: bool = False
    rectify: str = "on"
    rectifier: RectifierConfig = field(default_factory=RectifierConfig)
    alpha: float = 0.5
    reg: float | None = None
    solver: str = "sinkhorn"
    layout: LayoutConfig = field(default_factory=LayoutConfig)
    metric_k: int = 5
    metric_folds: int = 5
    connectivity_k: int = 10
    seed: int = 0
    out_dir: str | None = None
    plot: bool = False
    report: bool = False

    def __post_init__(self):
        if (self.input_path is None) == (self.generator is None):
            raise ValueError("exactly one of input_path or generator is required")
        if self.rectify not in ("on", "off", "identity"):
            raise ValueError("rectify must be on, off, or identity")
        if self.solver not in ("sinkhorn", "exact"):
            raise ValueError("solver must be sinkhorn or exact")

    @property
    def mode(self) -> str:
        return {"on": MODE_JORC, "off": MODE_BASELINE, "identity": MODE_IDENTITY}[
            self.rectify
        ]


def _load_data(config: PipelineConfig) -> dataio.PointCloud:
    if config.input_path is not None:
        return dataio.load_csv(config.input_path, config.label_column)
    seed = stage_seed(config.seed, "data")
    if config.generator == "three_rings":
        return dataio.gen_three_rings(
            config.n, config.n_bridge, config.bridge_noise_sd, seed
        )
    if config.generator not in dataio.GENERATORS:
        raise ValueError(f"unknown generator {config.generator!r}")
    return dataio.GENERATORS[config.generator](config.n, config.noise_sd, seed)


@dataclass
class PipelineResult:
    cloud: dataio.PointCloud
    index: object
    graph: object
    curvatures: list | None
    strength: float | None
    rect_rows: list | None
    embedding: Embedding
    report: MetricsReport


def _run_stages(
    config: PipelineConfig,
    cloud=None,
    index=None,
    graph=None,
    curvatures=None,
) -> PipelineResult:
    """Execute the pipeline, reusing any precomputed stage outputs."""

    def run(stage, fn):
        try:
            return fn()
        except PipelineError:
            raise
        except Exception as exc:
            raise PipelineError(stage, exc) from exc

    if cloud is None:
        cloud = run("data", lambda: _load_data(config))
    if index is None:
        if config.approx_knn:
            index = run(
                "knn", lambda: knn_approx(cloud, config.k, stage_seed(config.seed, "knn"))
            )
        else:
            index = run("knn", lambda: knn_exact(cloud, config.k))
    if graph is None:
        graph = run("fuzzy", lambda: fuzzy_weights(index))

    strength = None
    rect_rows = None
    layout_graph = graph
    if config.rectify != "off":
        if curvatures is None:
            curvatures = run(
                "curvature",
                lambda: edge_curvatures(
                    graph, cloud, config.alpha, config.reg, config.solver
                ),
            )
        if config.rectify == "identity":
            def identity_rows():
                new_graph, rows = rectify_edges(graph, curvatures, index, config.rectifier)
                rows = [
                    (i, j, w, kap, jac, "identity", w) for (i, j, w, kap, jac, _, _) in rows
                ]
                return graph, rows
            layout_graph, rect_rows = run("rectify", identity_rows)
        else:
            strength = run(
                "rectify", lambda: resolve_strength(curvatures, config.rectifier)
            )
            layout_graph, rect_rows = run(
                "rectify",
                lambda: rectify_edges(
                    graph, curvatures, index, config.rectifier, strength
                ),
            )

    init = run(
        "init", lambda: pca_init(cloud, config.layout.d, stage_seed(config.seed, "init"))
    )
    layout_cfg = replace(config.layout, seed=stage_seed(config.seed, "layout"))
    embedding = run("layout", lambda: optimize(layout_graph, init, layout_cfg))

    def compute_metrics():
        mseed = stage_seed(config.seed, "metrics")
        rte, rte_sd = random_triplet_accuracy(cloud, embedding, seed=mseed)
        cte = None
        knn_acc = None
        if cloud.labels is not None:
            if len(np.unique(cloud.labels)) >= 3:
                cte = centroid_triplet_accuracy(cloud, embedding, seed=mseed)
            counts = np.bincount(cloud.labels - cloud.labels.min())
            if counts[counts > 0].min() >= config.metric_folds:
                knn_acc = knn_classifier_accuracy(
                    embedding,
                    cloud.labels,
                    config.metric_k,
                    config.metric_folds,
                    seed=mseed,
                )
        comps, frac = connectivity_diagnostic(embedding, config.connectivity_k)
        return MetricsReport(
            rte=rte,
            rte_stddev=rte_sd,
            cte=cte,
            knn_acc=knn_acc,
            components=comps,
            largest_fraction=frac,
            params={
                "n_triplets": 5 * cloud.n,
                "repeats": 5,
                "metric_k": config.metric_k,
                "folds": config.metric_folds,
                "connectivity_k": config.connectivity_k,
                "seed": config.seed,
            },
        )

    report = run("metrics", compute_metrics)
    return PipelineResult(
        cloud, index, graph, curvatures, strength, rect_rows, embedding, report
    )


def config_params(config: PipelineConfig) -> dict:
    """Flat manifest dict keyed by CLI flag names (without leading dashes)."""
    r, l = config.rectifier, config.layout
    return {
        "input": config.input_path,
        "label-column": config.label_column,
        "generator": config.generator,
        "n": config.n,
        "noise-sd": config.noise_sd,
        "n-bridge": config.n_bridge,
        "bridge-noise-sd": config.bridge_noise_sd,
        "k": config.k,
        "approx-knn": config.approx_knn,
        "rectify": config.rectify,
        "delta": r.delta,
        "eps-floor": r.eps_floor,
        "strength": r.s_base,
        "beta": r.beta,
        "dynamic-strength": "on" if r.dynamic_strength else "off",
        "target-tanh": r.target_tanh,
        "ratio-low": r.ratio_low,
        "ratio-high": r.ratio_high,
        "alpha": config.alpha,
        "reg": config.reg,
        "solver": config.solver,
        "d": l.d,
        "epochs": l.n_epochs,
        "learning-rate": l.learning_rate,
        "min-dist": l.min_dist,
        "spread": l.spread,
        "negative-sample-rate": l.negative_sample_rate,
        "metric-k": config.metric_k,
        "metric-folds": config.metric_folds,
        "connectivity-k": config.connectivity_k,
        "seed": config.seed,
    }


def _as_bool(value) -> bool:
    if isinstance(value, str):
        return value.strip().lower() in ("1", "true", "yes", "on")
    return bool(value)


def config_from_params(params: dict, out_dir=None, plot=False, report=False) -> PipelineConfig:
    """Inverse of :func:`config_params`; unknown keys are rejected."""
    known = set(config_params(PipelineConfig(generator="swiss_roll")))
    unknown = set(params) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    p = dict(params)
    rect = RectifierConfig(
        delta=float(p.get("delta", 0.1)),
        eps_floor=float(p.get("eps-floor", 1e-5)),
        s_base=float(p.get("strength", 2.0)),
        beta=float(p.get("beta", 0.9)),
        dynamic_strength=str(p.get("dynamic-strength", "off")) == "on",
        target_tanh=float(p.get("target-tanh", 0.9)),
        ratio_low=float(p.get("ratio-low", 0.05)),
        ratio_high=float(p.get("ratio-high", 0.30)),
    )
    layout = LayoutConfig(
        d=int(p.get("d", 2)),
        n_epochs=int(p.get("epochs", 500)),
        learning_rate=float(p.get("learning-rate", 1.0)),
        min_dist=float(p.get("min-dist", 0.1)),
        spread=float(p.get("spread", 1.0)),
        negative_sample_rate=int(p.get("negative-sample-rate", 5)),
    )
    reg = p.get("reg")
    return PipelineConfig(
        input_path=p.get("input"),
        label_column=p.get("label-column"),
        generator=p.get("generator"),
        n=int(p.get("n", 1000)),
        noise_sd=float(p.get("noise-sd", 0.0)),
        n_bridge=int(p.get("n-bridge", 10)),
        bridge_noise_sd=float(p.get("bridge-noise-sd", 0.03)),
        k=int(p.get("k", 15)),
        approx_knn=_as_bool(p.get("approx-knn", False)),
        rectify=str(p.get("rectify", "on")),
        rectifier=rect,
        alpha=float(p.get("alpha", 0.5)),
        reg=None if reg is None else float(reg),
        solver=str(p.get("solver", "sinkhorn")),
        layout=layout,
        metric_k=int(p.get("metric-k", 5)),
        metric_folds=int(p.get("metric-folds", 5)),
        connectivity_k=int(p.get("connectivity-k", 10)),
        seed=int(p.get("seed", 0)),
        out_dir=out_dir,
        plot=plot,
        report=report,
    )


def _versions() -> dict:
    import numba
    import scipy

    from . import __version__

    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
        "jorcumap": __version__,
    }


def write_embedding_csv(embedding: Embedding, path, labels=None) -> None:
    header = [f"dim{i}" for i in range(embedding.dim)]
    if labels is not None:
        header.append("label")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for r in range(embedding.n):
            cells = [repr(float(v)) for v in embedding.coords[r]]
            if labels is not None:
                cells.append(str(int(labels[r])))
            fh.write(",".join(cells) + "\n")


def write_manifest(config: PipelineConfig, path) -> None:
    obj = {"mode": config.mode, "params": config_params(config), "versions": _versions()}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _write_rect_report(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("i,j,w,kappa,jaccard,branch,w_new\n")
        for i, j, w, kap, jac, branch, w_new in rows:
            fh.write(f"{i},{j},{w!r},{kap!r},{jac!r},{branch},{w_new!r}\n")


def run_pipeline(config: PipelineConfig) -> tuple[Embedding, MetricsReport]:
    """Run all stages and, when ``out_dir`` is set, write the artifacts.

    On any stage failure the partial outputs are removed and a
    :class:`PipelineError` naming the stage propagates.
    """
    created: list[str] = []
    try:
        result = _run_stages(config)
        if config.out_dir is not None:
            try:
                os.makedirs(config.out_dir, exist_ok=True)

                def out(name):
                    p = os.path.join(config.out_dir, name)
                    created.append(p)
                    return p

                write_embedding_csv(
                    result.embedding, out("embedding.csv"), result.cloud.labels
                )
                with open(out("metrics.json"), "w", encoding="utf-8", newline="\n") as fh:
                    fh.write(result.report.to_json() + "\n")
                write_manifest(config, out("run-manifest.json"))
                if config.plot:
                    plot_scatter(result.embedding, result.cloud.labels, out("plot.svg"))
                if config.report and result.rect_rows is not None:
                    _write_rect_report(result.rect_rows, out("rectification-report.csv"))
            except Exception as exc:
                raise PipelineError("write", exc) from exc
        return result.embedding, result.report
    except PipelineError:
        for p in created:
            if os.path.exists(p):
                os.remove(p)
        raise


def sweep(base: PipelineConfig, grid: dict) -> list[dict]:
    """Run the pipeline over the Cartesian product of ``grid`` value lists.

    The data, neighbor, fuzzy-graph, and curvature stages are reused across
    runs whenever the grid leaves their parameters untouched. Failures are
    recorded per run and the sweep continues. Writes ``summary.csv`` (and
    per-run artifact directories) under ``base.out_dir`` when set.
    """
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ValueError("grid must provide at least one non-empty value list")
    allowed = {"delta", "k", "alpha", "strength", "seed", "beta"}
    unknown = set(grid) - allowed
    if unknown:
        raise ValueError(f"unsupported sweep parameters: {sorted(unknown)}")

    keys = sorted(grid)
    combos = list(itertools.product(*(grid[k] for k in keys)))

    base_cloud = _load_data(base)
    knn_cache: dict = {}
    graph_cache: dict = {}
    curv_cache: dict = {}

    rows: list[dict] = []
    for run_id, combo in enumerate(combos):
        override = dict(zip(keys, combo))
        rect = replace(
            base.rectifier,
            delta=float(override.get("delta", base.rectifier.delta)),
            s_base=float(override.get("strength", base.rectifier.s_base)),
            beta=float(override.get("beta", base.rectifier.beta)),
        )
        cfg = replace(
            base,
            k=int(override.get("k", base.k)),
            alpha=float(override.get("alpha", base.alpha)),
            seed=int(override.get("seed", base.seed)),
            rectifier=rect,
            out_dir=None,
        )
        row = {"run": run_id, **{k: override[k] for k in keys}}
        try:
            kk = cfg.k
            if kk not in knn_cache:
                try:
                    knn_cache[kk] = (
                        knn_approx(base_cloud, kk, stage_seed(cfg.seed, "knn"))
                        if cfg.approx_knn
                        else knn_exact(base_cloud, kk)
                    )
                    graph_cache[kk] = fuzzy_weights(knn_cache[kk])
                except Exception as exc:
                    raise PipelineError("knn", exc) from exc
            curv_key = (kk, cfg.alpha, cfg.reg, cfg.solver)
            curvatures = None
            if cfg.rectify != "off":
                if curv_key not in curv_cache:
                    try:
                        curv_cache[curv_key] = edge_curvatures(
                            graph_cache[kk], base_cloud, cfg.alpha, cfg.reg, cfg.solver
                        )
                    except Exception as exc:
                        raise PipelineError("curvature", exc) from exc
                curvatures = curv_cache[curv_key]
            result = _run_stages(
                cfg,
                cloud=base_cloud,
                index=knn_cache[kk],
                graph=graph_cache[kk],
                curvatures=curvatures,
            )
            branches = (
                [r[5] for r in result.rect_rows] if result.rect_rows is not None else []
            )
            row.update(
                status="ok",
                error="",
                mode=cfg.mode,
                strength_used=result.strength,
                n_edges=result.graph.edge_count,
                n_boost=branches.count("boost"),
                n_suppress=branches.count("suppress"),
                n_cut=branches.count("cut"),
                rte=result.report.rte,
                rte_stddev=result.report.rte_stddev,
                cte=result.report.cte,
                knn_acc=result.report.knn_acc,
                components=result.report.components,
                largest_fraction=result.report.largest_fraction,
            )
            if base.out_dir is not None:
                run_dir = os.path.join(base.out_dir, f"run_{run_id:03d}")
                os.makedirs(run_dir, exist_ok=True)
                write_embedding_csv(
                    result.embedding,
                    os.path.join(run_dir, "embedding.csv"),
                    base_cloud.labels,
                )
                write_manifest(replace(cfg, out_dir=None), os.path.join(run_dir, "run-manifest.json"))
        except PipelineError as exc:
            row.update(status="error", error=str(exc))
        rows.append(row)

    if base.out_dir is not None:
        os.makedirs(base.out_dir, exist_ok=True)
        columns = [
            "run",
            *keys,
            "status",
            "error",
            "mode",
            "strength_used",
            "n_edges",
            "n_boost",
            "n_suppress",
            "n_cut",
            "rte",
            "rte_stddev",
            "cte",
            "knn_acc",
            "components",
            "largest_fraction",
        ]
        with open(
            os.path.join(base.out_dir, "summary.csv"), "w", encoding="utf-8", newline="\n"
        ) as fh:
            fh.write(",".join(columns) + "\n")
            for row in rows:
                cells = []
                for c in columns:
                    v = row.get(c, "")
                    if isinstance(v, float):
                        cells.append(repr(v))
                    elif v is None:
                        cells.append("")
                    else:
                        cells.append(str(v))
                fh.write(",".join(cells) + "\n")
    return rows
