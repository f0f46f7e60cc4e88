"""Conditional tabular GAN.

Continuous columns are encoded with a per-column Gaussian mixture (one-hot mode
plus a scaled offset alpha in [-1, 1]); cluster labels are the conditional
vector. Training alternates a discriminator step on
``log D(x|c) + log(1 - D(G(z|c)|c))`` with a non-saturating generator step on
``-log D(G(z|c)|c)`` plus cross-entropy between ``c`` and the generated label
segment.

Generator outputs are tanh for alpha and Gumbel-softmax for mode indicators, so
fake mode vectors are close to one-hot like real ones. The discriminator sees the
condition in place of the generated label segment; only the cross-entropy term
trains that segment. The returned generator is an exponential moving average of
the trained weights.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .cluster import as_matrix, kmeans_fit
from .dataio import NOISE, ColumnSpec, Dataset, DISCRETE_LABEL
from .errors import NumericError, ParameterError, ShapeError
from .neural import AdamState, DenseNetwork, adam_step, backward, build_network, forward

log = logging.getLogger(__name__)

SIGMA_FLOOR = 1e-4
PRUNE_WEIGHT = 0.005
ALPHA_SCALE = 4.0
_PROB_EPS = 1e-12
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


# ------------------------------------------------------------ mode-specific normalisation


@dataclass(frozen=True, eq=False)
class ColumnModes:
    weights: np.ndarray
    means: np.ndarray
    stds: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.weights.size

    def log_responsibility(self, x: np.ndarray) -> np.ndarray:
        """Unnormalised log(pi_k N(x; mu_k, sigma_k)) for each value and mode."""
        z = (x[:, None] - self.means[None, :]) / self.stds[None, :]
        return np.log(self.weights)[None, :] - 0.5 * z * z - np.log(self.stds)[None, :] - _HALF_LOG_2PI


@dataclass(frozen=True, eq=False)
class ModeSpecificNormalizer:
    columns: tuple
    prune_threshold: float = PRUNE_WEIGHT

    @property
    def n_columns(self) -> int:
        return len(self.columns)

    def segments(self):
        """Generator output segments for the continuous part of an encoded row."""
        segs = []
        for col in self.columns:
            segs.append(("tanh", 1))
            segs.append(("softmax", col.n_modes))
        return segs

    @property
    def width(self) -> int:
        return sum(1 + c.n_modes for c in self.columns)

    def bounds(self):
        lo = np.array([(c.means - ALPHA_SCALE * c.stds).min() for c in self.columns])
        hi = np.array([(c.means + ALPHA_SCALE * c.stds).max() for c in self.columns])
        return lo, hi

    def to_dict(self) -> dict:
        return {
            "prune_threshold": self.prune_threshold,
            "columns": [
                {"weights": c.weights.tolist(), "means": c.means.tolist(), "stds": c.stds.tolist()}
                for c in self.columns
            ],
        }

    @classmethod
    def from_dict(cls, d) -> "ModeSpecificNormalizer":
        cols = tuple(
            ColumnModes(np.asarray(c["weights"], float), np.asarray(c["means"], float), np.asarray(c["stds"], float))
            for c in d["columns"]
        )
        return cls(cols, float(d.get("prune_threshold", PRUNE_WEIGHT)))


def _gmm_em(x, k, seed, max_iter=200, tol=1e-9):
    """1-D Gaussian mixture by EM, seeded from k-means. Returns (weights, means, stds, loglik)."""
    _, assign = kmeans_fit(x[:, None], k, seed=seed)
    lab = assign.labels
    w = np.bincount(lab, minlength=k) / x.size
    mu = np.array([x[lab == j].mean() for j in range(k)])
    sd = np.array([x[lab == j].std() for j in range(k)])
    sd = np.maximum(sd, SIGMA_FLOOR)
    prev = -math.inf
    ll = prev
    for _ in range(max_iter):
        col = ColumnModes(w, mu, sd)
        logr = col.log_responsibility(x)
        top = logr.max(axis=1, keepdims=True)
        r = np.exp(logr - top)
        tot = r.sum(axis=1, keepdims=True)
        ll = float((np.log(tot) + top).sum())
        r /= tot
        nk = r.sum(axis=0)
        live = nk > 0
        w = nk / x.size
        mu = np.where(live, (r * x[:, None]).sum(axis=0) / np.where(live, nk, 1.0), mu)
        var = (r * (x[:, None] - mu[None, :]) ** 2).sum(axis=0) / np.where(live, nk, 1.0)
        sd = np.maximum(np.sqrt(var), SIGMA_FLOOR)
        keep = w > 0
        w, mu, sd = w[keep], mu[keep], sd[keep]
        if ll - prev < tol * max(1.0, abs(ll)):
            break
        prev = ll
    return w, mu, sd, ll


def fit_column_modes(x: np.ndarray, max_modes: int = 10, seed: int = 0,
                     prune_threshold: float = PRUNE_WEIGHT) -> ColumnModes:
    """Pick the mixture order by BIC over 1..max_modes, then prune light modes."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ParameterError("cannot fit modes on an empty column")
    n_distinct = np.unique(x).size
    if n_distinct == 1:
        return ColumnModes(np.ones(1), np.array([float(x[0])]), np.array([SIGMA_FLOOR]))
    best = None
    for k in range(1, min(max_modes, n_distinct) + 1):
        w, mu, sd, ll = _gmm_em(x, k, seed)
        n_par = 3 * w.size - 1
        bic = -2.0 * ll + n_par * math.log(x.size)
        if best is None or bic < best[0]:
            best = (bic, w, mu, sd)
    _, w, mu, sd = best
    keep = w >= prune_threshold
    if not keep.any():
        keep = w == w.max()
    w, mu, sd = w[keep] / w[keep].sum(), mu[keep], sd[keep]
    order = np.argsort(mu, kind="stable")
    return ColumnModes(w[order], mu[order], sd[order])


def fit_mode_normalizer(data, max_modes: int = 10, seed: int = 0,
                        prune_threshold: float = PRUNE_WEIGHT) -> ModeSpecificNormalizer:
    x = as_matrix(data)
    if max_modes < 1:
        raise ParameterError("max_modes must be >= 1")
    if x.shape[1] == 0:
        raise ParameterError("no continuous columns to normalise")
    if x.shape[0] == 0:
        raise ParameterError("cannot fit modes on empty columns")
    cols = tuple(fit_column_modes(x[:, j], max_modes, seed + j, prune_threshold) for j in range(x.shape[1]))
    return ModeSpecificNormalizer(cols, prune_threshold)


@dataclass(frozen=True, eq=False)
class EncodedRow:
    alphas: np.ndarray
    modes: tuple  # one-hot vector per column
    label: np.ndarray  # one-hot over labels

    def to_vector(self) -> np.ndarray:
        parts = []
        for a, m in zip(self.alphas, self.modes):
            parts.append([a])
            parts.append(m)
        parts.append(self.label)
        return np.concatenate([np.asarray(p, float) for p in parts])


def _one_hot(idx, width):
    out = np.zeros((np.size(idx), width))
    out[np.arange(np.size(idx)), idx] = 1.0
    return out


def encode_matrix(normalizer: ModeSpecificNormalizer, x: np.ndarray, labels, label_count: int,
                  rng: np.random.Generator) -> np.ndarray:
    """Encode many rows at once. Modes are sampled in proportion to responsibility."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != normalizer.n_columns:
        raise ShapeError(f"expected {normalizer.n_columns} columns, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NumericError("cannot encode non-finite values")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= label_count):
        raise ParameterError(f"labels must lie in 0..{label_count - 1}")
    parts = []
    for j, col in enumerate(normalizer.columns):
        logr = col.log_responsibility(x[:, j])
        p = np.exp(logr - logr.max(axis=1, keepdims=True))
        p /= p.sum(axis=1, keepdims=True)
        u = rng.random(x.shape[0])
        k = np.minimum((np.cumsum(p, axis=1) < u[:, None]).sum(axis=1), col.n_modes - 1)
        alpha = np.clip((x[:, j] - col.means[k]) / (ALPHA_SCALE * col.stds[k]), -1.0, 1.0)
        parts.append(alpha[:, None])
        parts.append(_one_hot(k, col.n_modes))
    parts.append(_one_hot(labels, label_count))
    return np.hstack(parts)


def encode_row(normalizer: ModeSpecificNormalizer, row, label: int, label_count: int,
               rng: np.random.Generator) -> EncodedRow:
    vec = encode_matrix(normalizer, np.asarray(row, float)[None, :], [label], label_count, rng)[0]
    return split_encoded(normalizer, vec, label_count)


def split_encoded(normalizer: ModeSpecificNormalizer, vec, label_count: int) -> EncodedRow:
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape != (normalizer.width + label_count,):
        raise ShapeError(f"encoded width {vec.shape} != {normalizer.width + label_count}")
    alphas, modes, pos = [], [], 0
    for col in normalizer.columns:
        alphas.append(vec[pos])
        modes.append(vec[pos + 1:pos + 1 + col.n_modes])
        pos += 1 + col.n_modes
    return EncodedRow(np.array(alphas), tuple(modes), vec[pos:])


def decode_matrix(normalizer: ModeSpecificNormalizer, enc: np.ndarray, label_count: int):
    """Inverse of :func:`encode_matrix`; soft one-hots resolve by argmax."""
    enc = np.asarray(enc, dtype=np.float64)
    if enc.ndim != 2 or enc.shape[1] != normalizer.width + label_count:
        raise ShapeError(f"encoded width {enc.shape} != {normalizer.width + label_count}")
    out = np.empty((enc.shape[0], normalizer.n_columns))
    pos = 0
    for j, col in enumerate(normalizer.columns):
        alpha = np.clip(enc[:, pos], -1.0, 1.0)
        k = enc[:, pos + 1:pos + 1 + col.n_modes].argmax(axis=1)
        out[:, j] = col.means[k] + ALPHA_SCALE * col.stds[k] * alpha
        pos += 1 + col.n_modes
    labels = enc[:, pos:].argmax(axis=1) if label_count else np.zeros(enc.shape[0], np.int64)
    return out, labels


def decode_row(normalizer: ModeSpecificNormalizer, encoded, label_count: int | None = None):
    if isinstance(encoded, EncodedRow):
        label_count = encoded.label.size
        encoded = encoded.to_vector()
    rows, labels = decode_matrix(normalizer, np.asarray(encoded, float)[None, :], label_count)
    return rows[0], int(labels[0])


# ------------------------------------------------------------ model, config, log


@dataclass(frozen=True)
class CtganConfig:
    """Training hyper-parameters.

    ``lr`` is the generator rate; the discriminator uses ``discriminator_lr`` (None
    means the same rate). A faster discriminator plus an averaged generator
    (``generator_ema``) keeps the plain non-saturating loss from collapsing variance.
    """

    noise_dim: int = 64
    generator_hidden: tuple = (128, 128)
    discriminator_hidden: tuple = (128, 128)
    lr: float = 1e-4
    discriminator_lr: float | None = 4e-4
    beta1: float = 0.5
    beta2: float = 0.9
    batch_size: int = 64
    epochs: int = 300
    max_modes: int = 10
    discriminator_steps: int = 3
    gumbel_tau: float = 0.2
    generator_ema: float = 0.99  # 0 disables weight averaging

    def __post_init__(self):
        ints = ("noise_dim", "batch_size", "epochs", "max_modes", "discriminator_steps")
        bad = [k for k in ints if int(getattr(self, k)) < 1]
        if bad:
            raise ParameterError(f"CTGAN config: {', '.join(bad)} must be >= 1")
        if any(int(h) < 1 for h in (*self.generator_hidden, *self.discriminator_hidden)):
            raise ParameterError("CTGAN config: hidden layer widths must be >= 1")
        if not self.lr > 0 or (self.discriminator_lr is not None and not self.discriminator_lr > 0):
            raise ParameterError("CTGAN config: learning rates must be positive")
        if not 0 <= self.generator_ema < 1 or not self.gumbel_tau > 0:
            raise ParameterError("CTGAN config: need 0 <= generator_ema < 1 and gumbel_tau > 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["generator_hidden"] = list(self.generator_hidden)
        d["discriminator_hidden"] = list(self.discriminator_hidden)
        return d

    @classmethod
    def from_dict(cls, d) -> "CtganConfig":
        d = dict(d)
        for key in ("generator_hidden", "discriminator_hidden"):
            if key in d:
                d[key] = tuple(int(v) for v in d[key])
        return cls(**d)


@dataclass(eq=False)
class CtganModel:
    generator: DenseNetwork
    discriminator: DenseNetwork
    normalizer: ModeSpecificNormalizer
    noise_dim: int
    label_count: int
    label_freqs: np.ndarray
    feature_names: tuple
    label_name: str = "label"
    config: CtganConfig = field(default_factory=CtganConfig)
    n_train_rows: int = 0

    @property
    def row_width(self) -> int:
        return self.normalizer.width + self.label_count

    def to_dict(self) -> dict:
        return {
            "noise_dim": self.noise_dim,
            "label_count": self.label_count,
            "label_freqs": self.label_freqs.tolist(),
            "feature_names": list(self.feature_names),
            "label_name": self.label_name,
            "config": self.config.to_dict(),
            "n_train_rows": self.n_train_rows,
            "normalizer": self.normalizer.to_dict(),
            "generator": self.generator.to_dict(),
            "discriminator": self.discriminator.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def checkpoint_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_json(), encoding="utf-8")
        return path

    @classmethod
    def from_dict(cls, d) -> "CtganModel":
        return cls(
            DenseNetwork.from_dict(d["generator"]),
            DenseNetwork.from_dict(d["discriminator"]),
            ModeSpecificNormalizer.from_dict(d["normalizer"]),
            int(d["noise_dim"]),
            int(d["label_count"]),
            np.asarray(d["label_freqs"], float),
            tuple(d["feature_names"]),
            d.get("label_name", "label"),
            CtganConfig.from_dict(d.get("config", {})),
            int(d.get("n_train_rows", 0)),
        )

    @classmethod
    def load(cls, path) -> "CtganModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class TrainingLog:
    step: list = field(default_factory=list)
    epoch: list = field(default_factory=list)
    gen_loss: list = field(default_factory=list)
    disc_loss: list = field(default_factory=list)
    disc_real: list = field(default_factory=list)  # mean D(x|c) on the real batch
    dropped_noise_rows: int = 0

    def __len__(self):
        return len(self.step)

    def append(self, step, epoch, g, d, d_real):
        self.step.append(step)
        self.epoch.append(epoch)
        self.gen_loss.append(g)
        self.disc_loss.append(d)
        self.disc_real.append(d_real)

    def write_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "epoch", "gen_loss", "disc_loss"])
            for row in zip(self.step, self.epoch, self.gen_loss, self.disc_loss):
                w.writerow([row[0], row[1], repr(float(row[2])), repr(float(row[3]))])
        return path


# ------------------------------------------------------------ training


def _build_networks(width, label_count, segments, config: CtganConfig, rng):
    g_sizes = [config.noise_dim + label_count, *config.generator_hidden, width]
    g_acts = ["relu"] * len(config.generator_hidden) + ["linear"]
    gen = build_network(g_sizes, g_acts, rng)
    d_sizes = [width + label_count, *config.discriminator_hidden, 1]
    d_acts = ["relu"] * len(config.discriminator_hidden) + ["sigmoid"]
    disc = build_network(d_sizes, d_acts, rng)
    return gen, disc


def _output_activation(logits, segments, tau, rng):
    """tanh on alpha entries, Gumbel-softmax on mode segments, softmax on the label.

    The last segment is the label; it gets a plain softmax (no noise, tau 1) because
    it only feeds the cross-entropy term.
    """
    out = np.empty_like(logits)
    start = 0
    last = len(segments) - 1
    for i, (kind, width) in enumerate(segments):
        sl = slice(start, start + width)
        start += width
        if kind == "tanh":
            out[:, sl] = np.tanh(logits[:, sl])
            continue
        z = logits[:, sl]
        if i != last:
            z = (z - np.log(-np.log(rng.uniform(1e-20, 1.0, size=z.shape)))) / tau
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        out[:, sl] = e / e.sum(axis=1, keepdims=True)
    return out


def _output_backward(out, grad, segments, tau):
    res = np.empty_like(grad)
    start = 0
    last = len(segments) - 1
    for i, (kind, width) in enumerate(segments):
        sl = slice(start, start + width)
        start += width
        g, a = grad[:, sl], out[:, sl]
        if kind == "tanh":
            res[:, sl] = g * (1.0 - a * a)
        else:
            res[:, sl] = a * (g - (g * a).sum(axis=1, keepdims=True)) / (1.0 if i == last else tau)
    return res


def _sample_conditions(by_label, batch, rng):
    label_count = len(by_label)
    cond = rng.integers(label_count, size=batch)
    idx = np.empty(batch, dtype=np.int64)
    for lab in range(label_count):
        sel = np.flatnonzero(cond == lab)
        if sel.size:
            rows = by_label[lab]
            idx[sel] = rows[rng.integers(rows.size, size=sel.size)]
    return cond, idx


def ctgan_train(data, labels, config: CtganConfig | None = None, seed: int = 0,
                feature_names=None, label_name: str = "label", on_epoch=None):
    """Adversarial training for ``config.epochs`` epochs of ``ceil(n / batch)`` steps.

    Rows labelled -1 are dropped first (count kept in the log). All randomness comes
    from one generator seeded with ``seed``.
    """
    config = config or CtganConfig()
    x = as_matrix(data)
    if feature_names is None:
        feature_names = data.continuous_names if isinstance(data, Dataset) else [f"feat_{j:02d}" for j in range(x.shape[1])]
    lab = labels.labels if hasattr(labels, "labels") else np.asarray(labels, dtype=np.int64)
    if lab.shape != (x.shape[0],):
        raise ShapeError(f"{lab.shape[0]} labels for {x.shape[0]} rows")
    keep = lab != NOISE
    dropped = int((~keep).sum())
    x, lab = x[keep], lab[keep]
    n = x.shape[0]
    if n == 0:
        raise ParameterError("no labelled rows left after dropping noise")
    if n < config.batch_size:
        raise ParameterError(f"need at least batch_size={config.batch_size} rows, have {n}")
    label_count = int(lab.max()) + 1
    counts = np.bincount(lab, minlength=label_count)
    if (counts == 0).any():
        missing = np.flatnonzero(counts == 0).tolist()
        raise ParameterError(f"labels {missing} have no rows after noise removal")

    rng = np.random.default_rng(seed)
    normalizer = fit_mode_normalizer(x, config.max_modes, seed=int(rng.integers(2 ** 31)))
    enc = encode_matrix(normalizer, x, lab, label_count, rng)
    width = normalizer.width + label_count
    segments = normalizer.segments() + [("softmax", label_count)]
    gen, disc = _build_networks(width, label_count, segments, config, rng)
    g_opt = AdamState.for_network(gen, config.beta1, config.beta2)
    d_opt = AdamState.for_network(disc, config.beta1, config.beta2)
    by_label = [np.flatnonzero(lab == c) for c in range(label_count)]
    eye = np.eye(label_count)
    label_slice = slice(normalizer.width, width)

    batch = config.batch_size
    d_lr = config.lr if config.discriminator_lr is None else config.discriminator_lr
    steps_per_epoch = math.ceil(n / batch)
    train_log = TrainingLog(dropped_noise_rows=dropped)
    ema = gen.copy() if config.generator_ema > 0 else None
    step = 0
    for epoch in range(config.epochs):
        for _ in range(steps_per_epoch):
            # discriminator
            for _ in range(config.discriminator_steps):
                cond, idx = _sample_conditions(by_label, batch, rng)
                c = eye[cond]
                z = rng.standard_normal((batch, config.noise_dim))
                logits, _ = forward(gen, np.hstack([z, c]))
                fake = _output_activation(logits, segments, config.gumbel_tau, rng)
                fake[:, label_slice] = c
                d_in = np.vstack([np.hstack([enc[idx], c]), np.hstack([fake, c])])
                d_out, d_cache = forward(disc, d_in)
                d_real = np.clip(d_out[:batch, 0], _PROB_EPS, 1.0 - _PROB_EPS)
                d_fake = np.clip(d_out[batch:, 0], _PROB_EPS, 1.0 - _PROB_EPS)
                loss_d = -(np.log(d_real).mean() + np.log1p(-d_fake).mean())
                grad = np.concatenate([-1.0 / (batch * d_real), 1.0 / (batch * (1.0 - d_fake))])[:, None]
                adam_step(disc, backward(disc, d_cache, grad), d_opt, d_lr)

            # generator
            cond = rng.integers(label_count, size=batch)
            c = eye[cond]
            z = rng.standard_normal((batch, config.noise_dim))
            logits, g_cache = forward(gen, np.hstack([z, c]))
            fake = _output_activation(logits, segments, config.gumbel_tau, rng)
            g_in = np.hstack([fake, c])
            g_in[:, label_slice] = c
            d_out, d_cache = forward(disc, g_in)
            d_gen = np.clip(d_out[:, 0], _PROB_EPS, 1.0)
            soft = np.clip(fake[:, label_slice], _PROB_EPS, 1.0)
            ce = -(c * np.log(soft)).sum(axis=1).mean()
            loss_g = -np.log(d_gen).mean() + ce
            d_grads = backward(disc, d_cache, (-1.0 / (batch * d_gen))[:, None])
            g_grad = d_grads.input[:, :width].copy()
            g_grad[:, label_slice] = 0.0
            g_grad[:, label_slice] += -c / (batch * soft)
            g_grad = _output_backward(fake, g_grad, segments, config.gumbel_tau)
            adam_step(gen, backward(gen, g_cache, g_grad), g_opt, config.lr)
            if ema is not None:
                for pe, pg in zip(ema.parameters(), gen.parameters()):
                    pe *= config.generator_ema
                    pe += (1.0 - config.generator_ema) * pg

            if not (math.isfinite(loss_d) and math.isfinite(loss_g)):
                raise NumericError(f"non-finite loss at step {step} (epoch {epoch})")
            train_log.append(step, epoch, float(loss_g), float(loss_d), float(d_real.mean()))
            step += 1
        if on_epoch is not None:
            on_epoch(epoch, gen)
        if epoch % 50 == 0 or epoch == config.epochs - 1:
            log.debug("epoch %d: gen %.4f disc %.4f", epoch, train_log.gen_loss[-1], train_log.disc_loss[-1])

    model = CtganModel(
        gen if ema is None else ema, disc, normalizer, config.noise_dim, label_count, counts / counts.sum(),
        tuple(feature_names), label_name, config, n,
    )
    return model, train_log


# ------------------------------------------------------------ sampling


def _generate(model: CtganModel, cond: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((cond.size, model.noise_dim))
    c = np.eye(model.label_count)[cond]
    logits, _ = forward(model.generator, np.hstack([z, c]))
    segments = model.normalizer.segments() + [("softmax", model.label_count)]
    return _output_activation(logits, segments, model.config.gumbel_tau, rng)


def _draw_conditions(model, n, condition, rng):
    if condition is not None:
        if not 0 <= condition < model.label_count:
            raise ParameterError(f"condition {condition} outside 0..{model.label_count - 1}")
        return np.full(n, int(condition), dtype=np.int64)
    return rng.choice(model.label_count, size=n, p=model.label_freqs)


def ctgan_sample(model: CtganModel, n: int, condition: int | None = None, seed: int = 0) -> Dataset:
    """Draw ``n`` synthetic rows.

    Without ``condition`` the labels follow the training label frequencies. The
    label column holds the conditioning label (the generated label segment is
    replaced by the condition before decoding).
    """
    if n < 0:
        raise ParameterError("n must be non-negative")
    rng = np.random.default_rng(seed)
    cond = _draw_conditions(model, n, condition, rng)
    schema = tuple(ColumnSpec(name) for name in model.feature_names) + (ColumnSpec(model.label_name, DISCRETE_LABEL),)
    if n == 0:
        return Dataset(schema, np.empty((0, len(model.feature_names))), np.empty(0, np.int64))
    raw = _generate(model, cond, rng)
    raw[:, model.normalizer.width:] = np.eye(model.label_count)[cond]
    values, labels = decode_matrix(model.normalizer, raw, model.label_count)
    return Dataset(schema, values, labels)


def label_agreement(model: CtganModel, n: int, seed: int = 0) -> float:
    """Fraction of generated rows whose own label segment argmax equals the condition."""
    rng = np.random.default_rng(seed)
    cond = _draw_conditions(model, n, None, rng)
    raw = _generate(model, cond, rng)
    _, labels = decode_matrix(model.normalizer, raw, model.label_count)
    return float((labels == cond).mean())
