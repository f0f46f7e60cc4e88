"""Command-line entry point.

Exit codes: 0 success, 1 usage error (bad flag, missing config file), 2 data or
contract error, 3 numeric error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import plotting
from .config import ALGORITHMS, METRIC_SPACES, ConfigFileError, RunConfig, ToySpec, load_config, \
    parse_float_list, parse_int_list, render_config
from .ctgan import CtganModel, ctgan_sample
from .dataio import (
    NormalizationParams,
    generate_toy_telemetry,
    inverse_normalize,
    load_csv,
    schema_from_mapping,
    write_csv,
    write_labels_csv,
)
from .errors import AnonymixerError, ParameterError
from .metrics import METRIC_NAMES, encode_float
from .pipeline import MetricSpace, anonymize, assess_similarity, load_input, run_clustering_suite, run_pipeline, stage

log = logging.getLogger("anonymixer")

LOG_LEVELS = {"quiet": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _common_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("run options")
    g.add_argument("--config", metavar="PATH", help="INI run configuration (default: built-in toy config)")
    g.add_argument("--seed", type=int, metavar="N", help="root seed; per-stage seeds derive from it")
    g.add_argument("--out", metavar="DIR", default="anonymixer-out", help="output directory (default: %(default)s)")
    g.add_argument("--algorithm", metavar="ALG",
                   help=f"clustering algorithm(s), comma separated, from {', '.join(ALGORITHMS)}")
    g.add_argument("--k-min", type=int, metavar="K", help="smallest k in the K-means sweep")
    g.add_argument("--k-max", type=int, metavar="K", help="largest k in the K-means sweep")
    g.add_argument("--eps-grid", metavar="LIST", help="DBSCAN eps values, comma separated")
    g.add_argument("--minpts-grid", metavar="LIST", help="DBSCAN minPts values, comma separated")
    g.add_argument("--states", type=int, metavar="S", help="number of GHMM states")
    g.add_argument("--epochs", type=int, metavar="N", help="CTGAN training epochs")
    g.add_argument("--batch", type=int, metavar="N", help="CTGAN batch size")
    g.add_argument("--metric-space", choices=METRIC_SPACES, help="cluster and score on full or PCA-reduced data")
    g.add_argument("--threshold", type=float, metavar="R",
                   help="relative deviation at or below which a metric counts as preserved")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = _Parser(prog="anonymixer", description="Clustering-validated synthetic telemetry generation.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    def add(name, help_text):
        return sub.add_parser(name, parents=[common], help=help_text, description=help_text)

    add("ingest", "load, strip quasi-identifiers and normalise; writes normalized.csv and normalization.json")
    add("cluster", "run the clustering suite on the real data and print selections and scores")
    add("train", "train a CTGAN conditioned on one algorithm's labels; writes the checkpoint and loss curve")
    syn = add("synthesize", "sample synthetic rows from a trained checkpoint")
    syn.add_argument("--rows", type=int, metavar="N", help="rows to sample (default: real non-noise count)")
    add("evaluate", "re-cluster a synthetic table and compare its scores with the real data")
    add("report", "print the score table of an existing report.json and check its payload hash")
    add("run-all", "full pipeline: cluster, train, synthesize, re-cluster, compare, emit artifacts")
    toy = add("gen-toy", "write a toy telemetry CSV and a matching config file")
    toy.add_argument("--rows", type=int, default=400, metavar="N", help="rows (default: %(default)s)")
    toy.add_argument("--dims", type=int, default=15, metavar="M", help="continuous columns (default: %(default)s)")
    toy.add_argument("--blobs", type=int, default=2, metavar="K", help="number of blobs (default: %(default)s)")
    toy.add_argument("--separation", type=float, default=10.0, metavar="D",
                     help="minimum centroid distance (default: %(default)s)")
    return parser


# ------------------------------------------------------------ config resolution


def _algorithms(text):
    algs = tuple(a.strip() for a in text.split(",") if a.strip())
    if "all" in algs:
        return ALGORITHMS
    return algs


def resolve_config(args) -> RunConfig:
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = RunConfig(toy=ToySpec())
    ctgan = {}
    if args.epochs is not None:
        ctgan["epochs"] = args.epochs
    if args.batch is not None:
        ctgan["batch_size"] = args.batch
    return cfg.with_overrides(
        root_seed=args.seed,
        algorithms=_algorithms(args.algorithm) if args.algorithm else None,
        k_min=args.k_min,
        k_max=args.k_max,
        eps_grid=parse_float_list(args.eps_grid) if args.eps_grid else None,
        minpts_grid=parse_int_list(args.minpts_grid) if args.minpts_grid else None,
        ghmm_states=args.states,
        metric_space=args.metric_space,
        threshold=args.threshold,
        ctgan=ctgan,
    )


def _single_algorithm(cfg: RunConfig, command: str) -> str:
    if len(cfg.algorithms) != 1:
        raise ParameterError(f"{command} needs exactly one --algorithm (got {', '.join(cfg.algorithms)})")
    return cfg.algorithms[0]


# ------------------------------------------------------------ output helpers


def _fmt(v):
    return encode_float(v) if isinstance(v, float) and not np.isfinite(v) else f"{v:.6g}"


def _score_row(name, scores):
    vals = scores.as_tuple()
    return f"  {name:<14} " + "  ".join(f"{_fmt(v):>14}" for v in vals)


def _header():
    return f"  {'':<14} " + "  ".join(f"{m:>14}" for m in METRIC_NAMES)


def _out_dir(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise AnonymixerError(f"cannot create output directory {str(out)!r}: {exc.strerror}", stage="output")
    if not os.access(out, os.W_OK):
        raise AnonymixerError(f"output directory {str(out)!r} is not writable", stage="output")
    return out


def _summary(cfg: RunConfig):
    print(f"config hash: {cfg.config_hash()}")


# ------------------------------------------------------------ commands


def cmd_ingest(args, cfg):
    out = _out_dir(args)
    data = load_input(cfg)
    dropped = [c.name for c in data.raw.schema if c.kind == "quasi_identifier"]
    write_csv(data.normalized, out / "normalized.csv")
    (out / "normalization.json").write_text(json.dumps(data.params.to_dict(), indent=2) + "\n", encoding="utf-8")
    print(f"rows: {data.normalized.n_rows}")
    print(f"continuous columns: {data.normalized.n_features}")
    print(f"dropped quasi-identifiers: {', '.join(dropped) if dropped else '(none)'}")
    constant = int(data.params.constant.sum())
    if constant:
        print(f"constant columns mapped to 0: {constant}")
    print(f"wrote {out / 'normalized.csv'}")


def _real_suite(cfg):
    data = load_input(cfg)
    space = MetricSpace(cfg, data.normalized)
    return data, space, run_clustering_suite(space(data.normalized), cfg, "real")


def cmd_cluster(args, cfg):
    out = _out_dir(args)
    _, _, results = _real_suite(cfg)
    print(_header())
    for alg, res in results.items():
        print(_score_row(alg, res.scores))
    for alg, res in results.items():
        sel = res.selection
        print(f"\n{alg}: {sel['n_clusters']} clusters, {sel['noise_rows']} noise rows")
        if alg == "kmeans":
            print(f"selected k: {sel['k']}")
            print("  k  silhouette")
            for k, s in sel["silhouette_sweep"]:
                print(f"{k:>3}  {_fmt(s) if isinstance(s, float) else s}")
            plotting.silhouette_sweep(out / "silhouette_sweep.svg", sel["silhouette_sweep"], "K-means silhouette sweep")
        elif alg == "dbscan":
            print(f"selected eps {sel['eps']:g}, minPts {sel['min_pts']}")
        write_labels_csv(res.assignment.labels, out / f"labels_{alg}.csv")
        (out / f"scores_{alg}.json").write_text(
            json.dumps({"scores": res.scores.to_dict(), "selection": sel}, indent=2, sort_keys=True) + "\n",
            encoding="utf-8")


def cmd_train(args, cfg):
    out = _out_dir(args)
    alg = _single_algorithm(cfg, "train")
    data, _, results = _real_suite(cfg)
    labels = results[alg].assignment
    synthetic, model, train_log = anonymize(data.normalized, labels, cfg, alg)
    model.save(out / f"ctgan_{alg}.json")
    (out / "normalization.json").write_text(json.dumps(data.params.to_dict(), indent=2) + "\n", encoding="utf-8")
    train_log.write_csv(out / f"loss_{alg}.csv")
    plotting.loss_curves(out / f"loss_{alg}.svg", train_log.step, train_log.gen_loss, train_log.disc_loss,
                         f"CTGAN losses, conditioned on {alg}")
    print(f"trained on {data.normalized.n_rows - labels.noise_count} rows "
          f"({train_log.dropped_noise_rows} noise rows dropped), {len(train_log)} steps")
    print(f"final losses: generator {train_log.gen_loss[-1]:.4f}, discriminator {train_log.disc_loss[-1]:.4f}")
    print(f"checkpoint sha256: {model.checkpoint_hash()}")
    print(f"wrote {out / f'ctgan_{alg}.json'}")


def _load_checkpoint(out: Path, alg: str):
    path = out / f"ctgan_{alg}.json"
    if not path.exists():
        raise AnonymixerError(f"no checkpoint {str(path)!r}; run 'train' first", stage="synthesize")
    try:
        model = CtganModel.load(path)
        params = NormalizationParams.from_dict(json.loads((out / "normalization.json").read_text(encoding="utf-8")))
    except (OSError, ValueError, KeyError) as exc:
        raise AnonymixerError(f"cannot read checkpoint in {str(out)!r}: {exc}", stage="synthesize") from None
    return model, params


def cmd_synthesize(args, cfg):
    out = _out_dir(args)
    alg = _single_algorithm(cfg, "synthesize")
    model, params = _load_checkpoint(out, alg)
    n = args.rows if args.rows is not None else cfg.synthetic_rows
    if n is None:
        n = model.n_train_rows
    with stage(f"sample_{alg}"):
        synthetic = ctgan_sample(model, n, seed=cfg.seed(f"sample_{alg}"))
    write_csv(inverse_normalize(synthetic, params), out / f"synthetic_{alg}.csv")
    print(f"sampled {n} rows, labels {np.bincount(synthetic.labels, minlength=model.label_count).tolist()}")
    print(f"wrote {out / f'synthetic_{alg}.csv'}")


def cmd_evaluate(args, cfg):
    out = _out_dir(args)
    alg = _single_algorithm(cfg, "evaluate")
    path = out / f"synthetic_{alg}.csv"
    if not path.exists():
        raise AnonymixerError(f"no synthetic table {str(path)!r}; run 'synthesize' first", stage="evaluate")
    data, space, real = _real_suite(cfg)
    names = data.normalized.continuous_names
    schema = schema_from_mapping({**{n: "continuous" for n in names}, "label": "discrete_label"})
    with stage("evaluate"):
        synth_raw = load_csv(path, schema)
        span = np.where(data.params.max > data.params.min, data.params.max - data.params.min, 1.0)
        synth = synth_raw.with_values((synth_raw.values - data.params.min) / span)
    synth_results = run_clustering_suite(space(synth), cfg, "synth")
    report = assess_similarity({alg: real[alg].scores}, {alg: synth_results[alg].scores}, cfg.threshold)
    _print_report(report.payload())
    (out / f"evaluation_{alg}.json").write_text(report.payload_json() + "\n", encoding="utf-8")


def _print_report(payload):
    print(_header())
    for alg, entry in payload["algorithms"].items():
        for side in ("real", "synthetic"):
            vals = [entry[side][m] for m in METRIC_NAMES]
            print(f"  {alg + ' ' + side[:5]:<14} " + "  ".join(f"{_fmt(float(v)):>14}" for v in vals))
        rel = [entry["rel_deviation"][m] for m in METRIC_NAMES]
        line = f"  {'rel. dev.':<14} " + "  ".join(f"{_fmt(float(v)):>14}" for v in rel)
        if "preserved" in entry:
            line += "   preserved" if entry["preserved"] else "   NOT preserved"
        print(line)


def cmd_report(args, cfg):
    path = Path(args.out) / "report.json"
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError:
        raise AnonymixerError(f"no report at {str(path)!r}; run 'run-all' first", stage="report") from None
    except ValueError as exc:
        raise AnonymixerError(f"{str(path)!r} is not valid JSON: {exc}", stage="report") from None
    payload = doc.get("payload", {})
    digest = hashlib.sha256(json.dumps(payload, sort_keys=True, indent=2).encode("utf-8")).hexdigest()
    if digest != doc.get("payload_sha256"):
        raise AnonymixerError("payload hash does not match; the report was modified", stage="report")
    _print_report(payload)
    prov = payload.get("provenance", {})
    print(f"metric space: {prov.get('metric_space')}")
    print(f"generated at: {doc.get('generated_at')}")
    print(f"config hash: {prov.get('config_hash')}")


def cmd_run_all(args, cfg):
    out = _out_dir(args)
    report = run_pipeline(cfg, out)
    _print_report(report.payload())
    print(f"artifacts in {out}")


def cmd_gen_toy(args, cfg):
    out = _out_dir(args)
    seed = args.seed if args.seed is not None else 1
    raw, truth = generate_toy_telemetry(seed, args.rows, args.blobs, args.dims, args.separation, with_identifiers=True)
    write_csv(raw, out / "toy.csv")
    write_labels_csv(truth, out / "toy_truth.csv", name="blob")
    toy_cfg = replace(cfg, schema=raw.schema, data_path="toy.csv", toy=None)
    (out / "toy.conf").write_text(render_config(toy_cfg), encoding="utf-8")
    print(f"wrote {out / 'toy.csv'} ({args.rows} rows, {args.dims} features, {args.blobs} blobs)")
    print(f"wrote {out / 'toy.conf'}")


COMMANDS = {
    "ingest": cmd_ingest,
    "cluster": cmd_cluster,
    "train": cmd_train,
    "synthesize": cmd_synthesize,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
    "run-all": cmd_run_all,
    "gen-toy": cmd_gen_toy,
}


def _setup_logging():
    level_name = os.environ.get("ANONYMIXER_LOG", "info").strip().lower()
    level = LOG_LEVELS.get(level_name, logging.INFO)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("anonymixer")
    root.handlers[:] = [handler]
    root.setLevel(level)
    root.propagate = False
    if level_name not in LOG_LEVELS:
        log.warning("ANONYMIXER_LOG=%r not recognised; using info", level_name)


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = resolve_config(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except ConfigFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except AnonymixerError as exc:
        if exc.stage is None:
            exc.stage = "config"
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    try:
        if args.command != "report":
            _summary(cfg)
        COMMANDS[args.command](args, cfg)
    except AnonymixerError as exc:
        if exc.stage is None:
            exc.stage = args.command
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: [io] {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
