"""Run configuration: INI file parsing, flag overrides, per-stage seeds and hashing.

Config file layout::

    [schema]          column = continuous | quasi_identifier | discrete_label
    [data]            path = telemetry.csv   (or toy = yes plus toy_* keys)
    [pipeline]        algorithms, k_min, k_max, eps_grid, minpts_grid, ghmm_states, ...
    [ctgan]           any CtganConfig field
    [seeds]           root = 0, plus optional per-stage overrides (stage = seed)
"""

from __future__ import annotations

import configparser
import hashlib
import io
import json
import zlib
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .ctgan import CtganConfig
from .dataio import schema_from_mapping
from .errors import ParameterError, SchemaError

ALGORITHMS = ("kmeans", "dbscan", "ghmm", "agglomerative")
METRIC_SPACES = ("full", "pca")

DEFAULT_EPS_GRID = (0.01, 0.02, 0.038, 0.05, 0.075, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5,
                    0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.9, 1.0)
DEFAULT_MINPTS_GRID = (3, 5, 10)


class ConfigFileError(ParameterError):
    """Config file missing or unreadable; the CLI maps this to a usage error."""


def stage_seed(root: int, tag: str) -> int:
    """Deterministic per-stage seed: root seed plus the CRC-32 of the stage tag."""
    return (int(root) + zlib.crc32(tag.encode("utf-8"))) % 2 ** 32


@dataclass(frozen=True)
class ToySpec:
    seed: int = 1
    n: int = 400
    k: int = 2
    m: int = 15
    separation: float = 10.0
    with_identifiers: bool = False


@dataclass(frozen=True)
class RunConfig:
    schema: tuple = ()
    data_path: str | None = None
    toy: ToySpec | None = None
    algorithms: tuple = ALGORITHMS
    k_min: int = 2
    k_max: int = 10
    eps_grid: tuple = DEFAULT_EPS_GRID
    minpts_grid: tuple = DEFAULT_MINPTS_GRID
    dbscan_max_noise: float | None = 0.05  # None: no cap on the noise share
    ghmm_states: int = 3
    agglomerative_k: int = 2
    pca_components: int = 2
    metric_space: str = "full"
    variance_fraction: float = 0.95
    synthetic_rows: int | None = None  # None: real non-noise count
    threshold: float | None = None
    root_seed: int = 0
    seed_overrides: tuple = ()  # ((stage, seed), ...)
    ctgan: CtganConfig = field(default_factory=CtganConfig)

    def __post_init__(self):
        algs = tuple(self.algorithms)
        if not algs:
            raise ParameterError("algorithm set must not be empty")
        bad = [a for a in algs if a not in ALGORITHMS]
        if bad:
            raise ParameterError(f"unknown algorithm(s) {bad}; choose from {list(ALGORITHMS)}")
        # canonical order so the hash does not depend on how the set was written
        object.__setattr__(self, "algorithms", tuple(a for a in ALGORITHMS if a in algs))
        if self.metric_space not in METRIC_SPACES:
            raise ParameterError(f"metric_space must be one of {METRIC_SPACES}, got {self.metric_space!r}")
        if not 2 <= self.k_min <= self.k_max:
            raise ParameterError(f"need 2 <= k_min <= k_max (got {self.k_min}, {self.k_max})")
        if not self.eps_grid or not self.minpts_grid:
            raise ParameterError("DBSCAN grids must not be empty")
        if self.threshold is not None and not self.threshold >= 0:
            raise ParameterError("threshold must be a non-negative relative deviation")
        if self.data_path is None and self.toy is None:
            raise ParameterError("config needs [data] path or [data] toy = yes")
        object.__setattr__(self, "eps_grid", tuple(float(e) for e in self.eps_grid))
        object.__setattr__(self, "minpts_grid", tuple(int(p) for p in self.minpts_grid))
        object.__setattr__(self, "seed_overrides", tuple(sorted((str(k), int(v)) for k, v in self.seed_overrides)))

    def seed(self, stage: str) -> int:
        return dict(self.seed_overrides).get(stage, stage_seed(self.root_seed, stage))

    def stages(self) -> list[str]:
        """Every stochastic stage this run will use, in execution order."""
        out = []
        for alg in self.algorithms:
            out.append(f"cluster_real_{alg}")
        for alg in self.algorithms:
            out += [f"ctgan_{alg}", f"sample_{alg}", f"cluster_synth_{alg}"]
        return out

    def seeds(self) -> dict:
        return {s: self.seed(s) for s in self.stages()}

    def to_dict(self) -> dict:
        return {
            "schema": [[c.name, c.kind] for c in self.schema],
            "data_path": self.data_path,
            "toy": None if self.toy is None else asdict(self.toy),
            "algorithms": list(self.algorithms),
            "k_min": self.k_min,
            "k_max": self.k_max,
            "eps_grid": list(self.eps_grid),
            "minpts_grid": list(self.minpts_grid),
            "dbscan_max_noise": self.dbscan_max_noise,
            "ghmm_states": self.ghmm_states,
            "agglomerative_k": self.agglomerative_k,
            "pca_components": self.pca_components,
            "metric_space": self.metric_space,
            "variance_fraction": self.variance_fraction,
            "synthetic_rows": self.synthetic_rows,
            "threshold": self.threshold,
            "root_seed": self.root_seed,
            "seed_overrides": [list(p) for p in self.seed_overrides],
            "ctgan": self.ctgan.to_dict(),
        }

    def canonical(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()

    def with_overrides(self, **kw) -> "RunConfig":
        """Replace fields whose override value is not None. ``ctgan`` takes a dict of fields."""
        kw = {k: v for k, v in kw.items() if v is not None}
        ctgan_kw = kw.pop("ctgan", None)
        cfg = replace(self, **kw)
        if ctgan_kw:
            cfg = replace(cfg, ctgan=replace(cfg.ctgan, **ctgan_kw))
        return cfg


def _split_list(text, cast):
    items = [t.strip() for t in text.replace(";", ",").split(",")]
    try:
        return tuple(cast(t) for t in items if t)
    except ValueError as exc:
        raise ParameterError(f"cannot parse list {text!r}: {exc}") from None


def parse_float_list(text: str) -> tuple:
    return _split_list(text, float)


def parse_int_list(text: str) -> tuple:
    return _split_list(text, int)


def _get(section, key, cast, default):
    if key not in section:
        return default
    raw = section[key].strip()
    if raw.lower() in ("", "none"):
        return None
    try:
        if cast is bool:
            return section.getboolean(key)
        return cast(raw)
    except ValueError:
        raise ParameterError(f"[{section.name}] {key}: cannot parse {raw!r}") from None


_CTGAN_TUPLES = ("generator_hidden", "discriminator_hidden")


def _ctgan_from_section(section) -> CtganConfig:
    base = CtganConfig()
    kw = {}
    known = {f.name: f for f in fields(CtganConfig)}
    for key in section:
        if key not in known:
            raise ParameterError(f"[ctgan] unknown key {key!r}")
        if key in _CTGAN_TUPLES:
            kw[key] = parse_int_list(section[key])
            continue
        default = getattr(base, key)
        cast = type(default) if default is not None else float
        kw[key] = _get(section, key, cast, default)
    return replace(base, **kw)


_PIPELINE_KEYS = {
    "algorithms", "k_min", "k_max", "eps_grid", "minpts_grid", "dbscan_max_noise", "ghmm_states", "agglomerative_k",
    "pca_components", "metric_space", "variance_fraction", "synthetic_rows", "threshold",
}


def parse_config(text: str, base_dir: Path | None = None) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str  # keep column-name case
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ParameterError(f"malformed config: {exc}") from None
    known = {"schema", "data", "pipeline", "ctgan", "seeds"}
    extra = set(cp.sections()) - known
    if extra:
        raise ParameterError(f"unknown config section(s) {sorted(extra)}")

    schema = schema_from_mapping(dict(cp["schema"])) if cp.has_section("schema") else ()

    data = cp["data"] if cp.has_section("data") else {}
    data_path = toy = None
    if data:
        if _get(data, "toy", bool, False):
            toy = ToySpec(
                seed=_get(data, "toy_seed", int, 1),
                n=_get(data, "toy_n", int, 400),
                k=_get(data, "toy_k", int, 2),
                m=_get(data, "toy_m", int, 15),
                separation=_get(data, "toy_separation", float, 10.0),
                with_identifiers=_get(data, "toy_identifiers", bool, False),
            )
        elif "path" in data:
            p = Path(data["path"].strip())
            if base_dir is not None and not p.is_absolute():
                p = base_dir / p
            data_path = str(p)
    if data_path is not None and not schema:
        raise SchemaError("a CSV data path needs a [schema] section")

    kw = {}
    if cp.has_section("pipeline"):
        sec = cp["pipeline"]
        unknown = set(sec) - _PIPELINE_KEYS
        if unknown:
            raise ParameterError(f"[pipeline] unknown key(s) {sorted(unknown)}")
        if "algorithms" in sec:
            kw["algorithms"] = tuple(a.strip() for a in sec["algorithms"].split(",") if a.strip())
        if "eps_grid" in sec:
            kw["eps_grid"] = parse_float_list(sec["eps_grid"])
        if "minpts_grid" in sec:
            kw["minpts_grid"] = parse_int_list(sec["minpts_grid"])
        for key in ("k_min", "k_max", "ghmm_states", "agglomerative_k", "pca_components", "synthetic_rows"):
            if key in sec:
                kw[key] = _get(sec, key, int, None)
        for key in ("variance_fraction", "threshold", "dbscan_max_noise"):
            if key in sec:
                kw[key] = _get(sec, key, float, None)
        if "metric_space" in sec:
            kw["metric_space"] = sec["metric_space"].strip()

    ctgan = _ctgan_from_section(cp["ctgan"]) if cp.has_section("ctgan") else CtganConfig()

    root, overrides = 0, []
    if cp.has_section("seeds"):
        for key in cp["seeds"]:
            val = _get(cp["seeds"], key, int, None)
            if key == "root":
                root = val
            else:
                overrides.append((key, val))

    return RunConfig(schema=tuple(schema), data_path=data_path, toy=toy, root_seed=root,
                     seed_overrides=tuple(overrides), ctgan=ctgan, **kw)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigFileError(f"cannot read config file {str(path)!r}: {exc.strerror}", stage="config") from None
    return parse_config(text, base_dir=path.parent)


def render_config(cfg: RunConfig) -> str:
    """Inverse of :func:`parse_config` (up to formatting)."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    if cfg.schema:
        cp["schema"] = {c.name: c.kind for c in cfg.schema}
    if cfg.toy is not None:
        t = cfg.toy
        cp["data"] = {
            "toy": "yes", "toy_seed": str(t.seed), "toy_n": str(t.n), "toy_k": str(t.k),
            "toy_m": str(t.m), "toy_separation": repr(t.separation),
            "toy_identifiers": "yes" if t.with_identifiers else "no",
        }
    elif cfg.data_path is not None:
        cp["data"] = {"path": cfg.data_path}
    cp["pipeline"] = {
        "algorithms": ", ".join(cfg.algorithms),
        "k_min": str(cfg.k_min), "k_max": str(cfg.k_max),
        "eps_grid": ", ".join(repr(e) for e in cfg.eps_grid),
        "minpts_grid": ", ".join(str(p) for p in cfg.minpts_grid),
        "dbscan_max_noise": "none" if cfg.dbscan_max_noise is None else repr(cfg.dbscan_max_noise),
        "ghmm_states": str(cfg.ghmm_states), "agglomerative_k": str(cfg.agglomerative_k),
        "pca_components": str(cfg.pca_components), "metric_space": cfg.metric_space,
        "variance_fraction": repr(cfg.variance_fraction),
        "synthetic_rows": "none" if cfg.synthetic_rows is None else str(cfg.synthetic_rows),
        "threshold": "none" if cfg.threshold is None else repr(cfg.threshold),
    }
    ct = {}
    for key, val in cfg.ctgan.to_dict().items():
        if isinstance(val, list):
            ct[key] = ", ".join(str(v) for v in val)
        else:
            ct[key] = "none" if val is None else repr(val) if isinstance(val, float) else str(val)
    cp["ctgan"] = ct
    cp["seeds"] = {"root": str(cfg.root_seed), **{k: str(v) for k, v in cfg.seed_overrides}}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()

