"""AdaBoost.R2 (Drucker) over depth-limited regression trees.

Each round fits a tree to a weighted bootstrap resample, scores it on every
training row with a loss normalised by the round's largest absolute error,
and shrinks the weights of well-predicted rows by ``beta ** (1 - loss)``.
Predictions are the weighted median of the learners, weighted by
``ln(1 / beta)``.

Random streams come from ``numpy.random.PCG64`` seeded through
``numpy.random.SeedSequence``; the identifier is stored with every model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import EmptyEnsemble, EmptyTrainingSet, MalformedRecord, NoLearnerAccepted

RNG_ALGORITHM = "numpy.PCG64+SeedSequence"
LOSSES = ("linear", "square", "exponential")
BETA_FLOOR = 1e-10
TARGET_ORDER = ("dbp", "map", "sbp")


@dataclass(frozen=True)
class BoostParams:
    rounds: int = 100
    max_depth: int = 4
    min_leaf: int = 5
    loss: str = "linear"

    def __post_init__(self):
        if self.rounds < 1 or self.max_depth < 0 or self.min_leaf < 1:
            raise ValueError("rounds >= 1, max_depth >= 0 and min_leaf >= 1 required")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}")


# ---------------------------------------------------------------------------
# regression tree


@dataclass(eq=False)
class RegressionTree:
    """Binary tree in flat preorder arrays; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    max_depth: int
    min_leaf: int

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @property
    def depth(self) -> int:
        def walk(i):
            if self.feature[i] < 0:
                return 0
            return 1 + max(walk(self.left[i]), walk(self.right[i]))

        return walk(0)

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return self.value[node]
            go_left = X[rows[inner], f[inner]] <= self.threshold[node[inner]]
            node[inner] = np.where(go_left, self.left[node[inner]], self.right[node[inner]])


def _best_split(Xs, ys, ws, min_leaf):
    """Search all features at once over presorted node rows.

    ``Xs, ys, ws`` are (k, m) arrays: row f holds the node's samples sorted by
    feature f. Returns (sse, feature, threshold) of the lowest weighted SSE,
    first feature then lowest threshold on ties, or None.
    """
    k, m = Xs.shape
    W = np.cumsum(ws, axis=1)
    S1 = np.cumsum(ws * ys, axis=1)
    S2 = np.cumsum(ws * ys * ys, axis=1)
    Wl, S1l, S2l = W[:, :-1], S1[:, :-1], S2[:, :-1]
    Wr, S1r, S2r = W[:, -1:] - Wl, S1[:, -1:] - S1l, S2[:, -1:] - S2l
    with np.errstate(divide="ignore", invalid="ignore"):
        sse_l = np.where(Wl > 0, S2l - S1l * S1l / Wl, 0.0)
        sse_r = np.where(Wr > 0, S2r - S1r * S1r / Wr, 0.0)
    sse = np.maximum(sse_l, 0.0) + np.maximum(sse_r, 0.0)
    left_n = np.arange(1, m)
    valid = (Xs[:, :-1] < Xs[:, 1:]) & (left_n >= min_leaf) & (m - left_n >= min_leaf)
    if not valid.any():
        return None
    sse = np.where(valid, sse, np.inf)
    # the same partition reached through different sort orders can differ by an ulp,
    # so near-equal SSEs count as ties; row-major first means lowest feature, then position
    best = sse.min()
    flat = int(np.argmax(sse.ravel() <= best + 1e-12 * max(1.0, abs(best))))
    f, j = divmod(flat, m - 1)
    lo, hi = Xs[f, j], Xs[f, j + 1]
    thr = 0.5 * (lo + hi)
    if not (lo <= thr < hi):
        thr = lo
    return float(sse[f, j]), f, float(thr)


def tree_fit(X, y, w=None, max_depth: int = 4, min_leaf: int = 5) -> RegressionTree:
    """Greedy least-squares tree; every leaf predicts the weighted mean of its rows."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n = y.size
    if n == 0 or X.shape[0] != n:
        raise EmptyTrainingSet("tree needs at least one row with matching targets")
    w = np.full(n, 1.0 / n) if w is None else np.asarray(w, dtype=np.float64)
    if w.shape != (n,) or (w < 0).any():
        raise ValueError("weights must be non-negative, one per row")

    # presort once; ties in x are ordered by (y, w) so the result ignores row order
    orders = np.stack([np.lexsort((w, y, X[:, f])) for f in range(X.shape[1])])
    feature, threshold, left, right, value = [], [], [], [], []

    def leaf_value(mask):
        wm, ym = w[mask], y[mask]
        if ym.max() == ym.min():
            return float(ym[0])  # exact, so a perfect learner has D == 0
        tot = wm.sum()
        return float(np.sort(wm * ym).sum() / tot) if tot > 0 else float(np.sort(ym).mean())

    def grow(mask, depth):
        me = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(leaf_value(mask))
        count = int(mask.sum())
        ym = y[mask]
        if depth >= max_depth or count < 2 * min_leaf or ym.max() == ym.min():
            return me
        node_orders = orders[mask[orders]].reshape(orders.shape[0], count)
        Xs = np.take_along_axis(X.T, node_orders, axis=1)
        mu = value[me]
        found = _best_split(Xs, y[node_orders] - mu, w[node_orders], min_leaf)
        if found is None:
            return me
        sse, f, thr = found
        wm = w[mask]
        parent = float(np.sum(wm * (ym - mu) ** 2))
        if not sse < parent:
            return me
        go_left = X[:, f] <= thr
        feature[me] = f
        threshold[me] = thr
        left[me] = grow(mask & go_left, depth + 1)
        right[me] = grow(mask & ~go_left, depth + 1)
        return me

    grow(np.ones(n, dtype=bool), 0)
    return RegressionTree(
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(value, dtype=np.float64),
        max_depth,
        min_leaf,
    )


# ---------------------------------------------------------------------------
# boosting


@dataclass(eq=False)
class BoostEnsemble:
    learners: list[RegressionTree]
    betas: list[float]
    target: str = ""
    params: BoostParams = field(default_factory=BoostParams)
    seed: int = 0
    rng_algorithm: str = RNG_ALGORITHM

    @property
    def rounds_completed(self) -> int:
        return len(self.learners)

    @property
    def learner_weights(self) -> np.ndarray:
        return np.log(1.0 / np.asarray(self.betas))

    def predict(self, X) -> np.ndarray:
        return adaboost_predict(self, X)


def weighted_bootstrap(w: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw len(w) row indices with replacement, P(i) = w_i."""
    cdf = np.cumsum(w)
    u = rng.random(w.size) * cdf[-1]
    return np.minimum(np.searchsorted(cdf, u, side="right"), w.size - 1)


def _loss(e: np.ndarray, D: float, kind: str) -> np.ndarray:
    r = e / D
    if kind == "linear":
        return r
    if kind == "square":
        return r * r
    return 1.0 - np.exp(-r)


def adaboost_fit(
    X,
    y,
    rounds: int = 100,
    max_depth: int = 4,
    min_leaf: int = 5,
    seed=0,
    loss: str = "linear",
    resample: Callable[[np.ndarray, np.random.Generator], np.ndarray] | None = None,
    trace: list | None = None,
) -> BoostEnsemble:
    """Fit AdaBoost.R2.

    ``resample(w, rng)`` overrides the weighted bootstrap (used by tests to
    replay draws); ``trace``, if given, receives one dict per round with the
    weights, errors, average loss and beta.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n = y.size
    if n == 0 or X.shape[0] != n:
        raise EmptyTrainingSet("no training rows")
    if n < 2:
        raise EmptyTrainingSet("AdaBoost.R2 needs at least two rows")
    params = BoostParams(rounds, max_depth, min_leaf, loss)
    rng = np.random.Generator(np.random.PCG64(seed))
    draw = resample or weighted_bootstrap
    w = np.full(n, 1.0 / n)
    learners, betas = [], []
    for t in range(rounds):
        idx = draw(w, rng)
        tree = tree_fit(X[idx], y[idx], None, max_depth, min_leaf)
        e = np.abs(tree.predict(X) - y)
        D = float(e.max())
        step = {"round": t, "weights": w.copy(), "indices": np.asarray(idx), "errors": e, "max_error": D}
        if D == 0.0:
            learners.append(tree)
            betas.append(BETA_FLOOR)
            step.update(avg_loss=0.0, beta=BETA_FLOOR, accepted=True, new_weights=w.copy())
            if trace is not None:
                trace.append(step)
            break
        lo = _loss(e, D, loss)
        avg = float(np.dot(w, lo))
        step.update(losses=lo, avg_loss=avg)
        if avg >= 0.5:
            step.update(accepted=False)
            if trace is not None:
                trace.append(step)
            if not learners:
                raise NoLearnerAccepted(f"first round average loss {avg:.4f} >= 0.5")
            break
        beta = max(avg / (1.0 - avg), BETA_FLOOR)
        w = w * beta ** (1.0 - lo)
        w /= w.sum()
        learners.append(tree)
        betas.append(beta)
        step.update(beta=beta, accepted=True, new_weights=w.copy())
        if trace is not None:
            trace.append(step)
    return BoostEnsemble(learners, betas, params=params, seed=seed if isinstance(seed, int) else 0)


def weighted_median(predictions, weights) -> np.ndarray:
    """Row-wise weighted median of ``predictions`` (n, T) with learner ``weights`` (T,).

    Returns the smallest prediction whose cumulative weight reaches half the
    total; an exact half resolves to the lower value.
    """
    P = np.atleast_2d(np.asarray(predictions, dtype=np.float64))
    wts = np.asarray(weights, dtype=np.float64)
    order = np.argsort(P, axis=1, kind="stable")
    sorted_p = np.take_along_axis(P, order, axis=1)
    cum = np.cumsum(wts[order], axis=1)
    half = 0.5 * cum[:, -1:]
    # relative slack so exact ties survive rounding in the cumulative sum
    reached = cum >= half * (1.0 - 1e-12)
    pick = np.argmax(reached, axis=1)
    return sorted_p[np.arange(P.shape[0]), pick]


def adaboost_predict(model: BoostEnsemble, X) -> np.ndarray:
    if not model.learners:
        raise EmptyEnsemble("ensemble has no learners")
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    preds = np.column_stack([t.predict(X) for t in model.learners])
    out = weighted_median(preds, model.learner_weights)
    return out[0] if single else out


def derive_seeds(seed: int, count: int = 3) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(count)


def train_targets(X, labels: dict, params: BoostParams = BoostParams(), seed: int = 0) -> dict:
    """Fit one ensemble per target (dbp, map, sbp) with independent derived seeds."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        raise EmptyTrainingSet("empty reduced dataset")
    out = {}
    for name, ss in zip(TARGET_ORDER, derive_seeds(seed, len(TARGET_ORDER))):
        model = adaboost_fit(
            X, labels[name], params.rounds, params.max_depth, params.min_leaf, ss, params.loss
        )
        model.target = name
        model.seed = seed
        out[name] = model
    return out


# ---------------------------------------------------------------------------
# text serialisation


def format_ensemble(model: BoostEnsemble) -> str:
    p = model.params
    lines = [
        f"{model.target},{p.rounds},{p.max_depth},{p.min_leaf},{model.seed}",
        f"loss={p.loss},rng={model.rng_algorithm},learners={model.rounds_completed}",
    ]
    for tree in model.learners:
        lines.append(f"tree,{tree.n_nodes}")
        # arrays are already in preorder
        for i in range(tree.n_nodes):
            if tree.feature[i] < 0:
                lines.append(f"L,{float(tree.value[i])!r}")
            else:
                lines.append(f"S,{int(tree.feature[i])},{float(tree.threshold[i])!r},{float(tree.value[i])!r}")
    lines.append("betas," + ",".join(repr(float(b)) for b in model.betas))
    return "\n".join(lines) + "\n"


def _parse_tree(lines, max_depth, min_leaf) -> RegressionTree:
    feature, threshold, value = [], [], []
    for ln in lines:
        f = ln.split(",")
        if f[0] == "L":
            feature.append(-1)
            threshold.append(0.0)
            value.append(float(f[1]))
        elif f[0] == "S":
            feature.append(int(f[1]))
            threshold.append(float(f[2]))
            value.append(float(f[3]))
        else:
            raise MalformedRecord(f"bad tree node line {ln!r}")
    n = len(feature)
    left = np.full(n, -1, dtype=np.int64)
    right = np.full(n, -1, dtype=np.int64)

    def link(i):
        if feature[i] < 0:
            return i + 1
        left[i] = i + 1
        nxt = link(i + 1)
        right[i] = nxt
        return link(nxt)

    if link(0) != n:
        raise MalformedRecord("tree preorder dump is inconsistent")
    return RegressionTree(
        np.asarray(feature, dtype=np.int64), np.asarray(threshold), left, right,
        np.asarray(value), max_depth, min_leaf,
    )


def parse_ensemble(lines: list[str]) -> tuple[BoostEnsemble, int]:
    """Parse one ensemble block starting at lines[0]; returns it and the lines consumed."""
    try:
        target, T, depth, min_leaf, seed = lines[0].split(",")
        meta = dict(kv.split("=", 1) for kv in lines[1].split(","))
        params = BoostParams(int(T), int(depth), int(min_leaf), meta["loss"])
        pos = 2
        learners = []
        for _ in range(int(meta["learners"])):
            tag, count = lines[pos].split(",")
            if tag != "tree":
                raise MalformedRecord(f"expected tree header, got {lines[pos]!r}")
            count = int(count)
            learners.append(_parse_tree(lines[pos + 1 : pos + 1 + count], params.max_depth, params.min_leaf))
            pos += 1 + count
        f = lines[pos].split(",")
        if f[0] != "betas":
            raise MalformedRecord("missing betas line")
        betas = [float(v) for v in f[1:]]
    except (ValueError, IndexError, KeyError) as exc:
        raise MalformedRecord(f"bad ensemble block: {exc}") from exc
    if len(betas) != len(learners):
        raise MalformedRecord("betas and learners disagree in count")
    model = BoostEnsemble(learners, betas, target, params, int(seed), meta.get("rng", RNG_ALGORITHM))
    return model, pos + 1


def save_ensembles(models: dict, path) -> None:
    Path(path).write_text("".join(format_ensemble(models[t]) for t in TARGET_ORDER if t in models))


def load_ensembles(path) -> dict:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    out = {}
    pos = 0
    while pos < len(lines):
        model, used = parse_ensemble(lines[pos:])
        out[model.target] = model
        pos += used
    return out
