"""Gaussian hidden Markov model with diagonal covariances.

The whole table is one observation sequence in row order. Fitting is Baum-Welch
with per-step scaling; decoding is Viterbi in log space.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass

import numpy as np

from .cluster import ClusterAssignment, as_matrix, kmeans_fit
from .errors import NumericError, ParameterError, ShapeError

log = logging.getLogger(__name__)

VAR_FLOOR = 1e-6
LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class GhmmModel:
    n_states: int
    initial_probs: np.ndarray
    transition: np.ndarray
    means: np.ndarray
    diag_vars: np.ndarray

    @property
    def n_features(self) -> int:
        return self.means.shape[1]

    def permuted(self, order) -> "GhmmModel":
        order = np.asarray(order)
        return GhmmModel(
            self.n_states,
            self.initial_probs[order],
            self.transition[np.ix_(order, order)],
            self.means[order],
            self.diag_vars[order],
        )

    def to_dict(self) -> dict:
        return {
            "n_states": self.n_states,
            "initial_probs": self.initial_probs.tolist(),
            "transition": self.transition.tolist(),
            "means": self.means.tolist(),
            "diag_vars": self.diag_vars.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d) -> "GhmmModel":
        return cls(
            int(d["n_states"]),
            np.asarray(d["initial_probs"], float),
            np.asarray(d["transition"], float),
            np.asarray(d["means"], float),
            np.asarray(d["diag_vars"], float),
        )


def _check_dims(model, x):
    if x.shape[1] != model.n_features:
        raise ShapeError(f"model expects {model.n_features} features, data has {x.shape[1]}")


def emission_logpdf(model: GhmmModel, x: np.ndarray) -> np.ndarray:
    """``(n, S)`` matrix of per-state diagonal-Gaussian log densities."""
    var = model.diag_vars
    quad = ((x[:, None, :] - model.means[None, :, :]) ** 2 / var[None, :, :]).sum(-1)
    return -0.5 * (quad + np.log(var).sum(-1)[None, :] + x.shape[1] * LOG_2PI)


def _forward_backward(model, x, need_backward=True):
    logb = emission_logpdf(model, x)
    shift = logb.max(axis=1, keepdims=True)
    b = np.exp(logb - shift)
    n, s = b.shape
    a = model.transition
    alpha = np.empty((n, s))
    scale = np.empty(n)
    prev = model.initial_probs * b[0]
    for t in range(n):
        if t:
            prev = (alpha[t - 1] @ a) * b[t]
        c = prev.sum()
        if not (c > 0 and math.isfinite(c)):
            raise NumericError(f"forward recursion underflowed at row {t}")
        scale[t] = c
        alpha[t] = prev / c
    loglik = float(np.log(scale).sum() + shift.sum())
    if not need_backward:
        return loglik, None, None
    beta = np.empty((n, s))
    beta[-1] = 1.0
    xi = np.zeros((s, s))
    for t in range(n - 2, -1, -1):
        w = b[t + 1] * beta[t + 1] / scale[t + 1]
        beta[t] = a @ w
        xi += np.outer(alpha[t], w) * a
    gamma = alpha * beta
    return loglik, gamma, xi


def ghmm_loglik(model: GhmmModel, data) -> float:
    x = as_matrix(data)
    _check_dims(model, x)
    return _forward_backward(model, x, need_backward=False)[0]


def _initial_model(x, n_states, seed):
    _, assign = kmeans_fit(x, n_states, seed=seed)
    means = np.empty((n_states, x.shape[1]))
    var = np.empty_like(means)
    overall = x.var(axis=0)
    for s in range(n_states):
        rows = x[assign.labels == s]
        means[s] = rows.mean(axis=0)
        var[s] = rows.var(axis=0) if rows.shape[0] > 1 else overall
    var = np.maximum(var, VAR_FLOOR)
    pi = np.full(n_states, 1.0 / n_states)
    trans = 0.5 * np.eye(n_states) + 0.5 / n_states
    return GhmmModel(n_states, pi, trans, means, var)


def _m_step(model, x, gamma, xi):
    gsum = gamma.sum(axis=0)
    means = model.means.copy()
    var = model.diag_vars.copy()
    for s in range(model.n_states):
        if gsum[s] <= 0:
            continue
        w = gamma[:, s]
        means[s] = w @ x / gsum[s]
        var[s] = w @ (x - means[s]) ** 2 / gsum[s]
    var = np.maximum(var, VAR_FLOOR)
    pi = gamma[0] / gamma[0].sum()
    trans = model.transition.copy()
    rows = xi.sum(axis=1)
    ok = rows > 0
    trans[ok] = xi[ok] / rows[ok, None]
    return GhmmModel(model.n_states, pi, trans, means, var)


def ghmm_fit(data, n_states: int = 3, seed: int = 0, max_iter: int = 100, tol: float = 1e-6):
    """Baum-Welch fit. ``fit_log[i]`` is the log-likelihood of the i-th parameter set.

    The first entry belongs to the k-means initialisation and the last to the
    returned model.
    """
    x = as_matrix(data)
    n = x.shape[0]
    if n_states < 1 or n_states > n:
        raise ParameterError(f"n_states must satisfy 1 <= n_states <= n (got {n_states}, n={n})")
    model = _initial_model(x, n_states, seed)
    ll, gamma, xi = _forward_backward(model, x)
    fit_log = [ll]
    for it in range(max_iter):
        model = _m_step(model, x, gamma, xi)
        new_ll, gamma, xi = _forward_backward(model, x)
        fit_log.append(new_ll)
        if not math.isfinite(new_ll):
            raise NumericError(f"log-likelihood became non-finite at iteration {it + 1}")
        if new_ll - ll < tol:
            break
        ll = new_ll
    log.debug("ghmm converged after %d iterations, loglik %.6f", len(fit_log) - 1, fit_log[-1])
    return model, fit_log


def viterbi_path(model: GhmmModel, data) -> np.ndarray:
    x = as_matrix(data)
    _check_dims(model, x)
    logb = emission_logpdf(model, x)
    with np.errstate(divide="ignore"):
        log_a = np.log(model.transition)
        delta = np.log(model.initial_probs) + logb[0]
    n, s = logb.shape
    back = np.zeros((n, s), dtype=np.int64)
    for t in range(1, n):
        cand = delta[:, None] + log_a
        back[t] = cand.argmax(axis=0)
        delta = cand[back[t], np.arange(s)] + logb[t]
    path = np.empty(n, dtype=np.int64)
    path[-1] = int(delta.argmax())
    for t in range(n - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path


def path_logprob(model: GhmmModel, data, path) -> float:
    """Joint log-probability of observations and a given state path."""
    x = as_matrix(data)
    logb = emission_logpdf(model, x)
    path = np.asarray(path)
    with np.errstate(divide="ignore"):
        lp = math.log(model.initial_probs[path[0]]) if model.initial_probs[path[0]] > 0 else -math.inf
        lp += float(np.log(model.transition[path[:-1], path[1:]]).sum())
    return lp + float(logb[np.arange(x.shape[0]), path].sum())


def ghmm_decode(model: GhmmModel, data) -> ClusterAssignment:
    """Viterbi labels. States never visited are squeezed out, preserving state order."""
    path = viterbi_path(model, data)
    used = np.unique(path)
    remap = np.full(model.n_states, -1, dtype=np.int64)
    remap[used] = np.arange(used.size)
    return ClusterAssignment(remap[path], int(used.size), False)
