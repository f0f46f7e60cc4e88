"""End-to-end run: real clustering suite, CTGAN per conditioning algorithm,
synthetic re-clustering, score comparison and report emission."""

from __future__ import annotations

import contextlib
import hashlib
import json
import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import plotting
from .cluster import ClusterAssignment, agglomerative_fit, dbscan_fit, kmeans_fit
from .config import ALGORITHMS, RunConfig
from .ctgan import ctgan_sample, ctgan_train
from .dataio import (
    Dataset,
    NormalizationParams,
    generate_toy_telemetry,
    inverse_normalize,
    load_csv,
    minmax_normalize,
    strip_quasi_identifiers,
    write_csv,
)
from .errors import AnonymixerError, ContractError
from .ghmm import ghmm_decode, ghmm_fit
from .metrics import (
    METRIC_NAMES,
    ValidationScores,
    encode_float,
    score_all,
    select_dbscan_params,
    select_kmeans_k,
)
from .pca import PcaModel, components_for_variance, pca_fit, pca_transform

log = logging.getLogger(__name__)

EPS_DIV = 1e-12
REPORT_FORMAT = 1

__all__ = [
    "RunConfig", "AlgorithmResult", "Comparison", "SimilarityReport", "load_input",
    "run_clustering_suite", "anonymize", "assess_similarity", "run_pipeline",
]


@contextlib.contextmanager
def stage(name: str):
    """Tag any toolkit error escaping the block with ``name`` (innermost tag wins)."""
    try:
        yield
    except AnonymixerError as exc:
        if exc.stage is None:
            exc.stage = name
        raise


# ------------------------------------------------------------ data


@dataclass(frozen=True, eq=False)
class PreparedData:
    raw: Dataset
    normalized: Dataset
    params: NormalizationParams


def load_input(config: RunConfig) -> PreparedData:
    """Load (or generate), drop quasi-identifiers and min-max normalise."""
    with stage("ingest"):
        if config.toy is not None:
            t = config.toy
            raw, _ = generate_toy_telemetry(t.seed, t.n, t.k, t.m, t.separation, t.with_identifiers)
        else:
            raw = load_csv(config.data_path, config.schema)
        clean = strip_quasi_identifiers(raw)
        if clean.labels is not None:
            # a label column in the input is not used for clustering
            clean = Dataset(tuple(c for c in clean.schema if c.kind != "discrete_label"), clean.values)
        normalized, params = minmax_normalize(clean)
    log.info("loaded %d rows x %d continuous columns", normalized.n_rows, normalized.n_features)
    return PreparedData(raw, normalized, params)


class MetricSpace:
    """Maps normalised data into the space where clustering and scoring happen.

    ``full`` is the identity. ``pca`` projects onto the real data's leading
    components covering ``variance_fraction`` of the variance; synthetic data is
    projected with the same (real-fitted) model.
    """

    def __init__(self, config: RunConfig, real: Dataset):
        self.kind = config.metric_space
        self.model: PcaModel | None = None
        if self.kind == "pca":
            p = components_for_variance(real, config.variance_fraction)
            self.model = pca_fit(real, p)

    @property
    def n_components(self):
        return None if self.model is None else int(self.model.components.shape[0])

    def __call__(self, data: Dataset) -> Dataset:
        if self.model is None:
            return data
        return pca_transform(self.model, data)


# ------------------------------------------------------------ clustering suite


@dataclass(eq=False)
class AlgorithmResult:
    assignment: ClusterAssignment
    scores: ValidationScores
    selection: dict = field(default_factory=dict)


def _cluster_one(alg, x, config: RunConfig, seed: int):
    if alg == "kmeans":
        k, sweep = select_kmeans_k(x, config.k_min, min(config.k_max, x.n_rows - 1), seed=seed)
        _, assignment = kmeans_fit(x, k, seed=seed)
        return assignment, {"k": k, "silhouette_sweep": [[kk, encode_float(s)] for kk, s in sweep]}
    if alg == "dbscan":
        params, _ = select_dbscan_params(x, config.eps_grid, config.minpts_grid, config.dbscan_max_noise)
        return dbscan_fit(x, params), {"eps": params.eps, "min_pts": params.min_pts}
    if alg == "ghmm":
        model, fit_log = ghmm_fit(x, config.ghmm_states, seed=seed)
        return ghmm_decode(model, x), {"states": config.ghmm_states, "iterations": len(fit_log) - 1,
                                       "log_likelihood": encode_float(fit_log[-1])}
    if alg == "agglomerative":
        _, assignment = agglomerative_fit(x, config.agglomerative_k)
        return assignment, {"k": config.agglomerative_k}
    raise ContractError(f"unknown algorithm {alg!r}")


def run_clustering_suite(data: Dataset, config: RunConfig, side: str = "real") -> dict:
    """Cluster ``data`` with every configured algorithm and score each partition.

    ``side`` ("real" or "synth") only selects the per-stage seeds and error tags.
    """
    out = {}
    for alg in config.algorithms:
        tag = f"cluster_{side}_{alg}"
        with stage(tag):
            assignment, selection = _cluster_one(alg, data, config, config.seed(tag))
            scores = score_all(data, assignment)
        selection["n_clusters"] = assignment.n_clusters
        selection["noise_rows"] = assignment.noise_count
        log.info("%s: %d clusters, silhouette %.4f", tag, assignment.n_clusters, scores.silhouette)
        out[alg] = AlgorithmResult(assignment, scores, selection)
    return out


# ------------------------------------------------------------ anonymisation


def anonymize(data: Dataset, labels: ClusterAssignment, config: RunConfig, algorithm: str = "kmeans"):
    """Train a CTGAN conditioned on ``labels`` and sample a synthetic table.

    Returns ``(synthetic, model, training_log)``. The synthetic table has as many
    rows as ``data`` has non-noise rows unless ``config.synthetic_rows`` is set.
    """
    with stage(f"ctgan_{algorithm}"):
        model, train_log = ctgan_train(data, labels, config.ctgan, seed=config.seed(f"ctgan_{algorithm}"),
                                       feature_names=data.continuous_names)
    n = config.synthetic_rows
    if n is None:
        n = data.n_rows - labels.noise_count
    with stage(f"sample_{algorithm}"):
        synthetic = ctgan_sample(model, n, seed=config.seed(f"sample_{algorithm}"))
    return synthetic, model, train_log


# ------------------------------------------------------------ comparison


def _deviation(r: float, s: float):
    if r == s:
        return 0.0, 0.0
    if math.isinf(r) or math.isinf(s):
        return math.inf, math.inf
    d = abs(r - s)
    return d, d / max(abs(r), EPS_DIV)


@dataclass(frozen=True, eq=False)
class Comparison:
    real: ValidationScores
    synthetic: ValidationScores
    abs_dev: tuple
    rel_dev: tuple
    preserved: bool | None

    def to_dict(self) -> dict:
        d = {
            "real": self.real.to_dict(),
            "synthetic": self.synthetic.to_dict(),
            "abs_deviation": dict(zip(METRIC_NAMES, map(encode_float, self.abs_dev))),
            "rel_deviation": dict(zip(METRIC_NAMES, map(encode_float, self.rel_dev))),
        }
        if self.preserved is not None:
            d["preserved"] = self.preserved
        return d


@dataclass(eq=False)
class SimilarityReport:
    comparisons: dict  # algorithm -> Comparison
    threshold: float | None = None
    provenance: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)  # algorithm -> extra per-run facts

    def payload(self) -> dict:
        algs = {}
        for alg, comp in self.comparisons.items():
            entry = comp.to_dict()
            entry.update(self.details.get(alg, {}))
            algs[alg] = entry
        return {
            "format": REPORT_FORMAT,
            "threshold": self.threshold,
            "algorithms": algs,
            "provenance": self.provenance,
        }

    def payload_json(self) -> str:
        return json.dumps(self.payload(), sort_keys=True, indent=2, allow_nan=False)

    def payload_hash(self) -> str:
        return hashlib.sha256(self.payload_json().encode("utf-8")).hexdigest()

    def to_json(self, generated_at: str | None = None) -> str:
        doc = {
            "generated_at": generated_at,
            "payload_sha256": self.payload_hash(),
            "payload": self.payload(),
        }
        return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def assess_similarity(real_scores: dict, synth_scores: dict, threshold: float | None = None) -> SimilarityReport:
    """Per-algorithm absolute and relative deviations between two score maps."""
    if set(real_scores) != set(synth_scores):
        raise ContractError(
            f"algorithm keys differ: real {sorted(real_scores)} vs synthetic {sorted(synth_scores)}"
        )
    order = [a for a in ALGORITHMS if a in real_scores] + sorted(set(real_scores) - set(ALGORITHMS))
    comps = {}
    for alg in order:
        r, s = real_scores[alg], synth_scores[alg]
        devs = [_deviation(a, b) for a, b in zip(r.as_tuple(), s.as_tuple())]
        abs_dev = tuple(d[0] for d in devs)
        rel_dev = tuple(d[1] for d in devs)
        preserved = None if threshold is None else all(d <= threshold for d in rel_dev)
        comps[alg] = Comparison(r, s, abs_dev, rel_dev, preserved)
    return SimilarityReport(comps, threshold)


# ------------------------------------------------------------ full run


class _Artifacts:
    def __init__(self, out_dir: Path):
        self.dir = out_dir
        self.files: list[str] = []

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.dir / name


def _write_projection(path, scores: Dataset, labels):
    cols = scores.continuous_names
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(cols + ["label"]) + "\n")
        for row, lab in zip(scores.values, labels):
            fh.write(",".join(f"{v:.12g}" for v in row) + f",{int(lab)}\n")


def run_pipeline(config: RunConfig, out_dir) -> SimilarityReport:
    """Run every stage and write the artifacts into ``out_dir``.

    On failure an ``INCOMPLETE`` marker naming the failed stage is written and no
    ``report.json`` is produced.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    marker = out / "INCOMPLETE"
    stale = out / "report.json"
    for p in (marker, stale):
        if p.exists():
            p.unlink()
    started = time.perf_counter()
    try:
        report = _run(config, out)
    except AnonymixerError as exc:
        marker.write_text(f"stage: {exc.stage}\nerror: {exc}\n", encoding="utf-8")
        raise
    log.info("pipeline finished in %.1f s", time.perf_counter() - started)
    return report


def _run(config: RunConfig, out: Path) -> SimilarityReport:
    art = _Artifacts(out)
    data = load_input(config)
    real = data.normalized
    with stage("metric_space"):
        space = MetricSpace(config, real)
    real_space = space(real)
    real_results = run_clustering_suite(real_space, config, "real")

    with stage("pca_view"):
        view = pca_fit(real, min(config.pca_components, real.n_features))

    synth_results, details, checkpoints, noise, synth_rows = {}, {}, {}, {}, {}
    for alg in config.algorithms:
        labels = real_results[alg].assignment
        synthetic, model, train_log = anonymize(real, labels, config, alg)
        synth_space = space(synthetic)
        suite = run_clustering_suite(synth_space, _single(config, alg), "synth")
        synth_results[alg] = suite[alg]
        checkpoints[alg] = model.checkpoint_hash()
        synth_rows[alg] = synthetic.n_rows
        noise[alg] = {"real": labels.noise_count, "synthetic": suite[alg].assignment.noise_count,
                      "dropped_before_training": train_log.dropped_noise_rows}
        details[alg] = {
            "selection": {"real": real_results[alg].selection, "synthetic": suite[alg].selection},
            "conditioned_scores": _conditioned_scores(synth_space, synthetic),
            "training": {"steps": len(train_log), "final_gen_loss": train_log.gen_loss[-1],
                         "final_disc_loss": train_log.disc_loss[-1]},
        }
        with stage(f"emit_{alg}"):
            _emit(art, alg, data, synthetic, view, labels, suite[alg].assignment, train_log)

    report = assess_similarity(
        {a: r.scores for a, r in real_results.items()},
        {a: r.scores for a, r in synth_results.items()},
        config.threshold,
    )
    report.details = details
    report.provenance = {
        "config_hash": config.config_hash(),
        "root_seed": config.root_seed,
        "seeds": config.seeds(),
        "metric_space": config.metric_space,
        "metric_space_components": space.n_components,
        "data": {"rows": real.n_rows, "columns": real.continuous_names,
                 "source": "toy" if config.toy is not None else Path(config.data_path).name},
        "noise_rows": noise,
        "synthetic_rows": synth_rows,
        "checkpoint_sha256": checkpoints,
        "artifacts": sorted(art.files + ["report.json"]),
    }
    stamp = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    (out / "report.json").write_text(report.to_json(stamp), encoding="utf-8")
    return report


def _single(config: RunConfig, alg: str) -> RunConfig:
    return replace(config, algorithms=(alg,))


def _conditioned_scores(space_data: Dataset, synthetic: Dataset):
    """Scores of the synthetic table under its conditioning labels (audit only)."""
    try:
        return score_all(space_data, ClusterAssignment.from_labels(synthetic.labels)).to_dict()
    except AnonymixerError:
        return None


def _emit(art, alg, data: PreparedData, synthetic: Dataset, view: PcaModel, real_labels, synth_labels, train_log):
    write_csv(inverse_normalize(synthetic, data.params), art.path(f"synthetic_{alg}.csv"))
    real_xy = pca_transform(view, data.normalized)
    synth_xy = pca_transform(view, synthetic.values)
    _write_projection(art.path(f"pca_real_{alg}.csv"), real_xy, real_labels.labels)
    _write_projection(art.path(f"pca_synth_{alg}.csv"), synth_xy, synth_labels.labels)
    plotting.scatter_2d(art.path(f"pca_real_{alg}.svg"), real_xy.values[:, :2], real_labels.labels,
                        f"{alg}: real data")
    plotting.scatter_2d(art.path(f"pca_synth_{alg}.svg"), synth_xy.values[:, :2], synth_labels.labels,
                        f"{alg}: synthetic data (re-clustered)")
    train_log.write_csv(art.path(f"loss_{alg}.csv"))
    plotting.loss_curves(art.path(f"loss_{alg}.svg"), train_log.step, train_log.gen_loss, train_log.disc_loss,
                         f"CTGAN losses, conditioned on {alg}")
