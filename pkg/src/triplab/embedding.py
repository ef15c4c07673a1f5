"""Ordinal embedding: GNMDS, STE, t-STE, and SOE on one batch optimizer.

Every method minimizes a loss over item coordinates so that answered triplets
come out satisfied.  For a record (a; y, z) answered "closer to y", write
D_ay and D_az for squared Euclidean distances and d_ay, d_az for plain ones:

- GNMDS:  sum max(0, D_ay - D_az + margin)
- STE:    sum -log p,  p = exp(-D_ay) / (exp(-D_ay) + exp(-D_az))
- t-STE:  sum -log p,  p = K_ay / (K_ay + K_az),
          K = (1 + D/alpha)^(-(alpha+1)/2), alpha defaulting to d-1 (1 in 1-D)
- SOE:    sum max(0, margin + d_ay - d_az)^2

The optimizer is full-batch gradient descent with backtracking step halving:
the step starts at the configured learning rate each iteration and halves
(at most 50 times) until the loss decreases, which makes the recorded loss
sequence non-increasing by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .core import AnswerSet, Triplet
from .errors import DivergenceError
from .oracle import judge_triplets
from .rng import substream

METHODS = ("GNMDS", "STE", "tSTE", "SOE")
_METHOD_ALIASES = {m.lower(): m for m in METHODS} | {"t-ste": "tSTE", "t_ste": "tSTE"}

_TINY = 1e-30
_DIST_FLOOR = 1e-12
MAX_HALVINGS = 50


def normalize_method(name: str) -> str:
    try:
        return _METHOD_ALIASES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown embedding method {name!r}, expected one of {METHODS}") from None


@dataclass(frozen=True)
class EmbedConfig:
    """Optimizer and loss settings shared by all four methods.

    `restarts=None` picks 10 random initializations for small problems
    (n <= 20) and 3 otherwise.  `alpha=None` uses the heavy-tail default
    d - 1 (or 1 when d = 1) for t-STE.
    """

    d: int = 2
    max_iters: int = 2000
    learning_rate: float = 1.0
    tolerance: float = 1e-7
    restarts: int | None = None
    margin: float = 0.1
    alpha: float | None = None
    init_scale: float = 0.1

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"embedding dimension must be >= 1, got {self.d}")
        if self.margin <= 0:
            raise ValueError(f"margin must be positive, got {self.margin}")
        if self.alpha is not None and self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.restarts is not None and self.restarts < 1:
            raise ValueError(f"restarts must be >= 1, got {self.restarts}")
        if self.max_iters < 1 or self.learning_rate <= 0 or self.tolerance < 0:
            raise ValueError("bad optimizer settings")

    def effective_alpha(self) -> float:
        if self.alpha is not None:
            return float(self.alpha)
        return 1.0 if self.d == 1 else float(self.d - 1)

    def effective_restarts(self, n: int) -> int:
        if self.restarts is not None:
            return self.restarts
        return 10 if n <= 20 else 3

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "max_iters": self.max_iters,
            "learning_rate": self.learning_rate,
            "tolerance": self.tolerance,
            "restarts": self.restarts,
            "margin": self.margin,
            "alpha": self.alpha,
            "init_scale": self.init_scale,
        }


@dataclass(frozen=True)
class Embedding:
    """An n x d coordinate assignment produced by one of the methods."""

    coords: np.ndarray
    method: str
    final_loss: float
    seed: int
    iterations_used: int
    unconstrained: tuple[int, ...] = ()
    provenance: str = ""

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[1] < 1:
            raise ValueError(f"coords must be n x d with d >= 1, got {coords.shape}")
        if not np.all(np.isfinite(coords)):
            raise ValueError("embedding coordinates must be finite")
        coords = coords.copy()
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def d(self) -> int:
        return self.coords.shape[1]


# ---------------------------------------------------------------------------
# Losses and gradients
# ---------------------------------------------------------------------------

def _near_far(records: AnswerSet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split records into (anchor, judged-nearer, judged-farther) id arrays."""
    anchors, lefts, rights, values = records.to_arrays()
    near = np.where(values == 1, lefts, rights)
    far = np.where(values == 1, rights, lefts)
    return anchors, near, far


def _scatter_rows(n: int, idx: np.ndarray, rows: np.ndarray, out: np.ndarray) -> None:
    for k in range(rows.shape[1]):
        out[:, k] += np.bincount(idx, weights=rows[:, k], minlength=n)


def _pair_diffs(coords, anchors, near, far):
    dn = coords[anchors] - coords[near]
    df = coords[anchors] - coords[far]
    return dn, df


def _loss_gnmds(coords, anchors, near, far, cfg, need_grad):
    dn, df = _pair_diffs(coords, anchors, near, far)
    D_n = np.einsum("ij,ij->i", dn, dn)
    D_f = np.einsum("ij,ij->i", df, df)
    h = D_n - D_f + cfg.margin
    active = h > 0
    loss = float(np.sum(h[active]))
    if not need_grad:
        return loss, None
    grad = np.zeros_like(coords)
    if np.any(active):
        a = anchors[active]
        gn = 2.0 * dn[active]
        gf = 2.0 * df[active]
        _scatter_rows(coords.shape[0], a, gn - gf, grad)
        _scatter_rows(coords.shape[0], near[active], -gn, grad)
        _scatter_rows(coords.shape[0], far[active], gf, grad)
    return loss, grad


def _loss_ste(coords, anchors, near, far, cfg, need_grad):
    dn, df = _pair_diffs(coords, anchors, near, far)
    D_n = np.einsum("ij,ij->i", dn, dn)
    D_f = np.einsum("ij,ij->i", df, df)
    u = D_n - D_f
    # -log p = softplus(u), evaluated stably
    loss = float(np.sum(np.logaddexp(0.0, u)))
    if not need_grad:
        return loss, None
    s = _sigmoid(u)  # d softplus / du = 1 - p
    grad = np.zeros_like(coords)
    gn = (2.0 * s)[:, None] * dn
    gf = (2.0 * s)[:, None] * df
    _scatter_rows(coords.shape[0], anchors, gn - gf, grad)
    _scatter_rows(coords.shape[0], near, -gn, grad)
    _scatter_rows(coords.shape[0], far, gf, grad)
    return loss, grad


def _loss_tste(coords, anchors, near, far, cfg, need_grad):
    alpha = cfg.effective_alpha()
    dn, df = _pair_diffs(coords, anchors, near, far)
    D_n = np.einsum("ij,ij->i", dn, dn)
    D_f = np.einsum("ij,ij->i", df, df)
    expo = -(alpha + 1.0) / 2.0
    log_kn = expo * np.log1p(D_n / alpha)
    log_kf = expo * np.log1p(D_f / alpha)
    # -log p = softplus(log K_af - log K_an)
    u = log_kf - log_kn
    loss = float(np.sum(np.logaddexp(0.0, u)))
    if not need_grad:
        return loss, None
    one_minus_p = _sigmoid(u)
    cn = one_minus_p * (alpha + 1.0) / (2.0 * (alpha + D_n))
    cf = -one_minus_p * (alpha + 1.0) / (2.0 * (alpha + D_f))
    grad = np.zeros_like(coords)
    gn = (2.0 * cn)[:, None] * dn
    gf = (2.0 * cf)[:, None] * df
    _scatter_rows(coords.shape[0], anchors, gn + gf, grad)
    _scatter_rows(coords.shape[0], near, -gn, grad)
    _scatter_rows(coords.shape[0], far, -gf, grad)
    return loss, grad


def _loss_soe(coords, anchors, near, far, cfg, need_grad):
    dn, df = _pair_diffs(coords, anchors, near, far)
    d_n = np.sqrt(np.einsum("ij,ij->i", dn, dn))
    d_f = np.sqrt(np.einsum("ij,ij->i", df, df))
    h = cfg.margin + d_n - d_f
    active = h > 0
    loss = float(np.sum(h[active] ** 2))
    if not need_grad:
        return loss, None
    grad = np.zeros_like(coords)
    if np.any(active):
        ha = h[active]
        # unit vectors; coincident points get a zero subgradient direction
        un = dn[active] / np.maximum(d_n[active], _DIST_FLOOR)[:, None]
        uf = df[active] / np.maximum(d_f[active], _DIST_FLOOR)[:, None]
        gn = (2.0 * ha)[:, None] * un
        gf = (2.0 * ha)[:, None] * uf
        a = anchors[active]
        _scatter_rows(coords.shape[0], a, gn - gf, grad)
        _scatter_rows(coords.shape[0], near[active], -gn, grad)
        _scatter_rows(coords.shape[0], far[active], gf, grad)
    return loss, grad


def _sigmoid(u: np.ndarray) -> np.ndarray:
    out = np.empty_like(u)
    pos = u >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-u[pos]))
    eu = np.exp(u[~pos])
    out[~pos] = eu / (1.0 + eu)
    return out


_LOSS_FNS: dict[str, Callable] = {
    "GNMDS": _loss_gnmds,
    "STE": _loss_ste,
    "tSTE": _loss_tste,
    "SOE": _loss_soe,
}


def loss_and_gradient(
    method: str,
    coords: np.ndarray,
    records: AnswerSet,
    cfg: EmbedConfig,
) -> tuple[float, np.ndarray]:
    """Loss and its exact analytic gradient, summed over canonical records."""
    method = normalize_method(method)
    coords = np.asarray(coords, dtype=np.float64)
    if not np.all(np.isfinite(coords)):
        raise ValueError("coords must be finite")
    if len(records) == 0:
        return 0.0, np.zeros_like(coords)
    anchors, near, far = _near_far(records)
    loss, grad = _LOSS_FNS[method](coords, anchors, near, far, cfg, True)
    return loss, grad


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------

def _descend(eval_fn, x0: np.ndarray, cfg: EmbedConfig) -> tuple[np.ndarray, float, int]:
    """Backtracking gradient descent; returns (coords, loss, iterations)."""
    x = x0
    loss, grad = eval_fn(x, True)
    if not np.isfinite(loss):
        raise DivergenceError("non-finite loss at initialization", 0)
    iterations = 0
    for it in range(1, cfg.max_iters + 1):
        lr = cfg.learning_rate
        cand = None
        cand_loss = np.inf
        for _ in range(MAX_HALVINGS + 1):
            trial = x - lr * grad
            trial_loss, _ = eval_fn(trial, False)
            if np.isfinite(trial_loss) and trial_loss < loss:
                cand, cand_loss = trial, trial_loss
                break
            lr *= 0.5
        if cand is None:
            break  # no descent direction left at any step size
        rel_drop = (loss - cand_loss) / max(loss, _TINY)
        x, loss = cand, cand_loss
        iterations = it
        if rel_drop < cfg.tolerance:
            break
        _, grad = eval_fn(x, True)
        if not np.all(np.isfinite(grad)):
            raise DivergenceError("non-finite gradient", it)
    return x, loss, iterations


def embed(records: AnswerSet, method: str, cfg: EmbedConfig, seed: int) -> Embedding:
    """Fit an embedding to answered triplets, best of several random restarts.

    Deterministic given (records, method, cfg, seed).  Items that appear in
    no record keep their random initial coordinates and are listed in the
    result's `unconstrained` field.
    """
    method = normalize_method(method)
    if len(records) == 0:
        raise ValueError("cannot embed an empty answer set")
    n = records.items.n
    anchors, near, far = _near_far(records)
    loss_fn = _LOSS_FNS[method]

    def eval_fn(x, need_grad):
        return loss_fn(x, anchors, near, far, cfg, need_grad)

    seen = np.zeros(n, dtype=bool)
    seen[anchors] = True
    seen[near] = True
    seen[far] = True
    unconstrained = tuple(int(i) for i in np.flatnonzero(~seen))

    best: tuple[np.ndarray, float, int] | None = None
    for restart in range(cfg.effective_restarts(n)):
        rng = substream(seed, "embed", restart)
        x0 = rng.normal(scale=cfg.init_scale, size=(n, cfg.d))
        result = _descend(eval_fn, x0, cfg)
        if best is None or result[1] < best[1]:
            best = result
    coords, final_loss, iterations = best
    return Embedding(
        coords=coords,
        method=method,
        final_loss=final_loss,
        seed=seed,
        iterations_used=iterations,
        unconstrained=unconstrained,
        provenance=records.provenance,
    )


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------

def predict(e: Embedding, t: Triplet) -> "Answer":
    """Answer a triplet from embedded coordinates (same tie rule as the oracle)."""
    from .core import Answer

    value = predict_many(e, np.asarray([t.anchor]), np.asarray([t.left]), np.asarray([t.right]))
    return Answer(int(value[0]), source=f"embedding:{e.method}")


def predict_many(e: Embedding, anchors, lefts, rights) -> np.ndarray:
    return judge_triplets(e.coords, np.asarray(anchors), np.asarray(lefts), np.asarray(rights))


def satisfied_fraction(e: Embedding, records: AnswerSet) -> float:
    """Fraction of records whose answers the embedding reproduces."""
    anchors, lefts, rights, values = records.to_arrays()
    return float(np.mean(predict_many(e, anchors, lefts, rights) == values))


# ---------------------------------------------------------------------------
# Export / import
# ---------------------------------------------------------------------------

def export_embedding(path: str | Path, e: Embedding) -> None:
    """Write `item_id,c0,...` rows plus a JSON metadata sidecar (`<path>.meta.json`)."""
    path = Path(path)
    with path.open("w") as fh:
        fh.write("item_id," + ",".join(f"c{k}" for k in range(e.d)) + "\n")
        for i in range(e.n):
            fh.write(str(i) + "," + ",".join(repr(float(v)) for v in e.coords[i]) + "\n")
    meta = {
        "method": e.method,
        "d": e.d,
        "seed": e.seed,
        "final_loss": e.final_loss,
        "iterations_used": e.iterations_used,
        "unconstrained": list(e.unconstrained),
        "provenance": e.provenance,
    }
    Path(str(path) + ".meta.json").write_text(json.dumps(meta, indent=2) + "\n")


def read_embedding(path: str | Path) -> Embedding:
    path = Path(path)
    meta = json.loads(Path(str(path) + ".meta.json").read_text())
    rows: list[list[float]] = []
    with path.open() as fh:
        next(fh)  # header
        for line in fh:
            cells = line.strip().split(",")
            rows.append([float(c) for c in cells[1:]])
    return Embedding(
        coords=np.asarray(rows),
        method=meta["method"],
        final_loss=meta["final_loss"],
        seed=meta["seed"],
        iterations_used=meta["iterations_used"],
        unconstrained=tuple(meta["unconstrained"]),
        provenance=meta.get("provenance", ""),
    )
