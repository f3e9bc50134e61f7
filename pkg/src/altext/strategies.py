"""Query strategies behind one selection contract.

Every strategy consumes a :class:`QueryRequest` and returns a
:class:`QueryResult` whose ``selected`` list holds ``k`` distinct unlabeled
dataset indices. Scores always mean "larger = more informative" and ties are
broken by the smaller dataset index, so deterministic strategies are fully
reproducible and stochastic ones are reproducible given the request RNG.

Identifiers: random, least_confidence, prediction_entropy, breaking_ties,
cal, badge, kmeans, dal, seals, egl, egl_word, egl_sm, greedy_coreset,
lightweight_coreset. Any of them accepts the ``subsample=<m>`` modifier
(for example ``"badge+subsample=5000"``), which restricts the candidate set
to a uniform seeded sample before the strategy runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .classification import ClassifierCapabilities, train_softmax_head
from .corpus import Dataset, PoolState, MULTI_LABEL, SINGLE_LABEL
from .rng import Rng

PROBA_CLAMP = 1e-8


class StrategyError(ValueError):
    """Invalid request: size, capability, or label-mode mismatch."""


@dataclass
class QueryRequest:
    classifier: object
    dataset: Dataset
    pools: PoolState
    k: int
    rng: Rng
    params: dict = field(default_factory=dict)


@dataclass
class QueryResult:
    selected: list[int]
    scores: Optional[dict[int, float]] = None


def _top_k(candidates: np.ndarray, scores: np.ndarray, k: int) -> list[int]:
    """k candidates with the largest scores, ties broken by smaller index."""
    order = np.lexsort((candidates, -scores))
    return [int(candidates[i]) for i in order[:k]]


def _score_result(candidates: np.ndarray, scores: np.ndarray, k: int) -> QueryResult:
    selected = _top_k(candidates, scores, k)
    return QueryResult(selected, {int(c): float(s) for c, s in zip(candidates, scores)})


# ---------------------------------------------------------------------------
# confidence-based scoring
# ---------------------------------------------------------------------------

def uncertainty_scores(proba: np.ndarray, mode: str, label_mode: str = SINGLE_LABEL) -> np.ndarray:
    """Informativeness from class probabilities; larger = more uncertain.

    Single-label rows are treated as one categorical distribution:
    least_confidence = 1 - max_c p_c, entropy = -sum_c p_c ln p_c, and
    breaking_ties = 1 - (p_(1) - p_(2)). Multi-label rows are per-class
    Bernoulli distributions with each mode averaged over classes.
    """
    P = np.asarray(proba, dtype=np.float64)
    if P.ndim != 2 or P.shape[1] < 2:
        raise StrategyError("probability matrix needs at least 2 classes")
    if label_mode == SINGLE_LABEL:
        if mode == "least_confidence":
            return 1.0 - P.max(axis=1)
        if mode == "entropy":
            return -np.where(P > 0, P * np.log(np.where(P > 0, P, 1.0)), 0.0).sum(axis=1)
        if mode == "margin":
            top2 = -np.partition(-P, 1, axis=1)[:, :2]
            return 1.0 - (top2[:, 0] - top2[:, 1])
        raise StrategyError(f"unknown uncertainty mode {mode!r}")
    if mode == "least_confidence":
        return (1.0 - np.maximum(P, 1.0 - P)).mean(axis=1)
    if mode == "entropy":
        def h(q):
            return -np.where(q > 0, q * np.log(np.where(q > 0, q, 1.0)), 0.0)
        return (h(P) + h(1.0 - P)).mean(axis=1)
    if mode == "margin":
        return 1.0 - np.abs(2.0 * P - 1.0).mean(axis=1)
    raise StrategyError(f"unknown uncertainty mode {mode!r}")


def query_random(req: QueryRequest, candidates: np.ndarray) -> QueryResult:
    picks = req.rng.sample_indices(len(candidates), req.k)
    return QueryResult([int(candidates[i]) for i in picks])


def _make_confidence(mode: str):
    def query(req: QueryRequest, candidates: np.ndarray) -> QueryResult:
        P = req.classifier.predict_proba(req.dataset, candidates)
        scores = uncertainty_scores(P, mode, req.dataset.label_space.mode)
        return _score_result(candidates, scores, req.k)

    return query


# ---------------------------------------------------------------------------
# contrastive active learning
# ---------------------------------------------------------------------------

def _clamped_rows(P: np.ndarray, label_mode: str) -> np.ndarray:
    if label_mode == SINGLE_LABEL:
        Q = np.clip(P, PROBA_CLAMP, None)
        return Q / Q.sum(axis=1, keepdims=True)
    return np.clip(P, PROBA_CLAMP, 1.0 - PROBA_CLAMP)


def query_cal(req: QueryRequest, candidates: np.ndarray) -> QueryResult:
    """Mean KL divergence from the nearest labeled neighbors' predictions."""
    kn = int(req.params.get("neighbors", 10))
    labeled = np.array(req.pools.labeled, dtype=np.int64)
    if len(labeled) == 0:
        raise StrategyError("cal requires at least one labeled example")
    kn = min(kn, len(labeled))
    emb_u = req.classifier.embed(req.dataset, candidates)
    emb_l = req.classifier.embed(req.dataset, labeled)
    mode = req.dataset.label_space.mode
    P_u = _clamped_rows(req.classifier.predict_proba(req.dataset, candidates), mode)
    P_l = _clamped_rows(req.classifier.predict_proba(req.dataset, labeled), mode)
    d2 = ((emb_u[:, None, :] - emb_l[None, :, :]) ** 2).sum(axis=2)
    scores = np.empty(len(candidates), dtype=np.float64)
    label_order = np.arange(len(labeled))
    for i in range(len(candidates)):
        nearest = np.lexsort((label_order, d2[i]))[:kn]
        q = P_l[nearest]
        p = P_u[i]
        if mode == SINGLE_LABEL:
            kl = (q * (np.log(q) - np.log(p)[None, :])).sum(axis=1)
        else:
            kl = (
                q * (np.log(q) - np.log(p)[None, :])
                + (1 - q) * (np.log(1 - q) - np.log(1 - p)[None, :])
            ).mean(axis=1)
        scores[i] = kl.mean()
    return _score_result(candidates, scores, req.k)


# ---------------------------------------------------------------------------
# k-means++ seeding, BADGE, embedding k-means
# ---------------------------------------------------------------------------

def kmeans_pp_seeding(X: np.ndarray, k: int, rng: Rng) -> list[int]:
    """k distinct row indices by k-means++ sampling.

    The first index is uniform (one `randint` draw); every further index is
    drawn proportionally to the squared Euclidean distance to the chosen set
    (one `random()` draw mapped through the cumulative weights). When every
    remaining row sits at distance zero, the draw falls back to uniform over
    the remaining positions in ascending order.
    """
    n = len(X)
    if not 1 <= k <= n:
        raise StrategyError(f"cannot seed {k} centers from {n} rows")
    X = np.asarray(X, dtype=np.float64)
    first = rng.randint(n)
    chosen = [first]
    d2 = ((X - X[first]) ** 2).sum(axis=1)
    d2[first] = 0.0
    for _ in range(k - 1):
        total = float(d2.sum())
        if total > 0.0:
            idx = rng.weighted_index(d2)
        else:
            remaining = [i for i in range(n) if i not in set(chosen)]
            idx = remaining[rng.randint(len(remaining))]
        chosen.append(idx)
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(axis=1))
        d2[idx] = 0.0
    return chosen


def query_badge(req: QueryRequest, candidates: np.ndarray) -> QueryResult:
    G = req.classifier.gradient_embedding(req.dataset, candidates)
    picks = kmeans_pp_seeding(G, req.k, req.rng)
    return QueryResult([int(candidates[i]) for i in picks])


def _lloyd(X: np.ndarray, centers: np.ndarray, iterations: int) -> np.ndarray:
    for _ in range(iterations):
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assign = np.argmin(d2, axis=1)
        for c in range(len(centers)):
            members = assign == c
            if members.any():
                centers[c] = X[members].mean(axis=0)
    return centers


def query_embedding_kmeans(req: QueryRequest, candidates: np.ndarray) -> QueryResult:
    """Cluster the unlabeled embeddings into k groups, pick one per centroid."""
    iterations = int(req.params.get("iterations", 20))
    X = req.classifier.embed(req.dataset, candidates)
    seed_rows = kmeans_pp_seeding(X, req.k, req.rng)
    centers = _lloyd(X, X[seed_rows].copy(), iterations)
    selected: list[int] = []
    taken = np.zeros(len(candidates), dtype=bool)
    positions = np.arange(len(candidates))
    for c in range(req.k):
        d2 = ((X - centers[c]) ** 2).sum(axis=1)
        open_pos = positions[~taken]
        best = open_pos[np.lexsort((candidates[open_pos], d2[open_pos]))[0]]
        taken[best] = True
        selected.append(int(candidates[best]))
    return QueryResult(selected)


# ---------------------------------------------------------------------------
# discriminative active learning
# ---------------------------------------------------------------------------

def query_dal(req: QueryRequest, candidates: np.ndarray) -> QueryResult:
    """Iteratively pick the candidates a discriminator rates most 'unlabeled'."""
    r = int(req.params.get("sub_iterations", 3))
    if r < 1:
        raise StrategyError("dal needs at least one sub-iteration")
    labeled = np.array(req.pools.labeled, dtype=np.int64)
    if len(labeled) == 0:
        raise StrategyError("dal requires at least one labeled example")
    emb_l = req.classifier.embed(req.dataset, labeled)
    emb_u = req.classifier.embed(req.dataset, candidates)
    per = math.ceil(req.k / r)
    selected_pos: list[int] = []
    open_mask = np.ones(len(candidates), dtype=bool)
    config = req.classifier.config
    for _ in range(r):
        if len(selected_pos) >= req.k:
            break
        head_seed = req.rng.spawn_seed()
        open_pos = np.flatnonzero(open_mask)
        X = np.vstack([emb_l, emb_u[selected_pos], emb_u[open_pos]])
        y = np.zeros(len(X), dtype=np.int64)
        y[len(emb_l) + len(selected_pos):] = 1
        W, b = train_softmax_head(X, y, 2, config, head_seed)
        z = emb_u[open_pos] @ W + b
        p_unlabeled = np.exp(z[:, 1]) / np.exp(z).sum(axis=1)
        take = min(per, req.k - len(selected_pos), len(open_pos))
        order = np.lexsort((candidates[open_pos], -p_unlabeled))
        for j in order[:take]:
            pos = int(open_pos[j])
            selected_pos.append(pos)
            open_mask[pos] = False
    return QueryResult([int(candidates[p]) for p in selected_pos[: req.k]])


# ---------------------------------------------------------------------------
# SEALS
# ---------------------------------------------------------------------------

def seals_restrict(
    labeled_X: np.ndarray, unlabeled_X: np.ndarray, k_neighbors: int, min_size: int
) -> list[int]:
    """Positions of the union of each labeled row's nearest unlabeled rows.

    Exact Euclidean search. When the union is smaller than `min_size`, it is
    padded with the unlabeled rows nearest to the labeled centroid.
    """
    n = len(unlabeled_X)
    kn = min(k_neighbors, n)
    d2 = ((labeled_X[:, None, :] - unlabeled_X[None, :, :]) ** 2).sum(axis=2)
    positions = np.arange(n)
    chosen: set[int] = set()
    for row in d2:
        nearest = np.lexsort((positions, row))[:kn]
        chosen.update(int(p) for p in nearest)
    if len(chosen) < min_size:
        centroid = labeled_X.mean(axis=0)
        dc = ((unlabeled_X - centroid) ** 2).sum(axis=1)
        for p in np.lexsort((positions, dc)):
            if len(chosen) >= min_size:
                break
            chosen.add(int(p))
    return sorted(chosen)


def query_seals(req: QueryRequest, candidates: np.ndarray) -> QueryResult:
    ks = int(req.params.get("neighbors", 10))
    base_mode = req.params.get("base", "margin")
    labeled = np.array(req.pools.labeled, dtype=np.int64)
    if len(labeled) == 0:
        raise StrategyError("seals requires at least one labeled example")
    emb_l = req.classifier.embed(req.dataset, labeled)
    emb_u = req.classifier.embed(req.dataset, candidates)
    restricted = candidates[seals_restrict(emb_l, emb_u, ks, req.k)]
    P = req.classifier.predict_proba(req.dataset, restricted)
    scores = uncertainty_scores(P, base_mode, req.dataset.label_space.mode)
    return _score_result(restricted, scores, req.k)


# ---------------------------------------------------------------------------
# expected gradient length
# ---------------------------------------------------------------------------

def _make_egl(group: str):
    def query(req: QueryRequest, candidates: np.ndarray) -> QueryResult:
        norms = req.classifier.egl_gradient_norms(req.dataset, candidates, group)
        P = req.classifier.predict_proba(req.dataset, candidates)
        scores = (P * norms).sum(axis=1)
        return _score_result(candidates, scores, req.k)

    return query


# ---------------------------------------------------------------------------
# coresets
# ---------------------------------------------------------------------------

def greedy_coreset(
    labeled_X: np.ndarray, unlabeled_X: np.ndarray, k: int
) -> tuple[list[int], list[float]]:
    """k-center greedy: repeatedly take the position farthest from the
    covered set (labeled rows plus earlier picks), ties to the smaller
    position. Returns (positions, covering distances at pick time)."""
    n = len(unlabeled_X)
    if not 1 <= k <= n:
        raise StrategyError(f"cannot select {k} of {n} candidates")
    d2 = ((unlabeled_X[:, None, :] - labeled_X[None, :, :]) ** 2).sum(axis=2).min(axis=1)
    picks: list[int] = []
    dists: list[float] = []
    for _ in range(k):
        best = int(np.argmax(d2))  # argmax takes the first maximum: smaller position wins ties
        picks.append(best)
        dists.append(math.sqrt(float(d2[best])))
        d2 = np.minimum(d2, ((unlabeled_X - unlabeled_X[best]) ** 2).sum(axis=1))
        d2[best] = -np.inf
    return picks, dists


def query_greedy_coreset(req: QueryRequest, candidates: np.ndarray) -> QueryResult:
    labeled = np.array(req.pools.labeled, dtype=np.int64)
    if len(labeled) == 0:
        raise StrategyError("greedy_coreset requires at least one labeled example")
    emb_l = req.classifier.embed(req.dataset, labeled)
    emb_u = req.classifier.embed(req.dataset, candidates)
    picks, dists = greedy_coreset(emb_l, emb_u, req.k)
    selected = [int(candidates[p]) for p in picks]
    return QueryResult(selected, {s: d for s, d in zip(selected, dists)})


def lightweight_coreset_weights(X: np.ndarray) -> np.ndarray:
    """Sampling distribution q(x) = 1/(2n) + d(x, mean)^2 / (2 sum d^2)."""
    n = len(X)
    mu = X.mean(axis=0)
    d2 = ((X - mu) ** 2).sum(axis=1)
    total = float(d2.sum())
    if total <= 0.0:
        return np.full(n, 1.0 / n)
    return 1.0 / (2.0 * n) + d2 / (2.0 * total)


def lightweight_coreset(X: np.ndarray, k: int, rng: Rng) -> tuple[list[int], np.ndarray]:
    """k distinct positions sampled without replacement proportionally to the
    lightweight-coreset weights, renormalizing after each draw."""
    n = len(X)
    if not 1 <= k <= n:
        raise StrategyError(f"cannot select {k} of {n} candidates")
    q = lightweight_coreset_weights(X)
    weights = q.copy()
    picks: list[int] = []
    for _ in range(k):
        idx = rng.weighted_index(weights)
        picks.append(int(idx))
        weights[idx] = 0.0
    return picks, q


def query_lightweight_coreset(req: QueryRequest, candidates: np.ndarray) -> QueryResult:
    emb_u = req.classifier.embed(req.dataset, candidates)
    picks, q = lightweight_coreset(emb_u, req.k, req.rng)
    selected = [int(candidates[p]) for p in picks]
    return QueryResult(selected, {int(c): float(w) for c, w in zip(candidates, q)})


# ---------------------------------------------------------------------------
# registry and entry point
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StrategySpec:
    name: str
    fn: Callable[[QueryRequest, np.ndarray], QueryResult]
    requires: ClassifierCapabilities
    multi_label_ok: bool = False
    needs_labeled: bool = False


STRATEGIES: dict[str, StrategySpec] = {
    s.name: s
    for s in [
        StrategySpec("random", query_random, ClassifierCapabilities(), multi_label_ok=True),
        StrategySpec(
            "least_confidence",
            _make_confidence("least_confidence"),
            ClassifierCapabilities(probabilities=True),
            multi_label_ok=True,
        ),
        StrategySpec(
            "prediction_entropy",
            _make_confidence("entropy"),
            ClassifierCapabilities(probabilities=True),
            multi_label_ok=True,
        ),
        StrategySpec(
            "breaking_ties",
            _make_confidence("margin"),
            ClassifierCapabilities(probabilities=True),
            multi_label_ok=True,
        ),
        StrategySpec(
            "cal",
            query_cal,
            ClassifierCapabilities(probabilities=True, embeddings=True),
            multi_label_ok=True,
            needs_labeled=True,
        ),
        StrategySpec("badge", query_badge, ClassifierCapabilities(gradient_embeddings=True)),
        StrategySpec("kmeans", query_embedding_kmeans, ClassifierCapabilities(embeddings=True)),
        StrategySpec(
            "dal",
            query_dal,
            ClassifierCapabilities(embeddings=True),
            needs_labeled=True,
        ),
        StrategySpec(
            "seals",
            query_seals,
            ClassifierCapabilities(probabilities=True, embeddings=True),
            needs_labeled=True,
        ),
        StrategySpec("egl", _make_egl("full"), ClassifierCapabilities(per_group_gradients=True)),
        StrategySpec(
            "egl_word", _make_egl("word"), ClassifierCapabilities(per_group_gradients=True)
        ),
        StrategySpec("egl_sm", _make_egl("softmax"), ClassifierCapabilities(per_group_gradients=True)),
        StrategySpec(
            "greedy_coreset",
            query_greedy_coreset,
            ClassifierCapabilities(embeddings=True),
            needs_labeled=True,
        ),
        StrategySpec(
            "lightweight_coreset",
            query_lightweight_coreset,
            ClassifierCapabilities(embeddings=True),
        ),
    ]
}


def resolve_strategy(spec_string: str) -> tuple[str, dict]:
    """Parse `name` or `name+subsample=<m>` into (name, extra params)."""
    parts = spec_string.split("+")
    name = parts[0].strip()
    if name not in STRATEGIES:
        raise StrategyError(f"unknown strategy {name!r}")
    params: dict = {}
    for mod in parts[1:]:
        key, _, value = mod.partition("=")
        if key.strip() != "subsample" or not value:
            raise StrategyError(f"unknown strategy modifier {mod!r}")
        params["subsample"] = int(value)
    return name, params


def validate_strategy(name: str, classifier_capabilities: ClassifierCapabilities, label_mode: str) -> StrategySpec:
    spec = STRATEGIES.get(name)
    if spec is None:
        raise StrategyError(f"unknown strategy {name!r}")
    if not classifier_capabilities.provides(spec.requires):
        raise StrategyError(f"classifier lacks a capability required by {name!r}")
    if label_mode == MULTI_LABEL and not spec.multi_label_ok:
        raise StrategyError(f"strategy {name!r} supports single-label data only")
    return spec


def run_query(name: str, req: QueryRequest) -> QueryResult:
    """Validate the request, apply candidate subsampling, run the strategy."""
    spec = validate_strategy(name, req.classifier.capabilities, req.dataset.label_space.mode)
    if req.k < 1:
        raise StrategyError("batch size must be at least 1")
    if req.k > req.pools.n_unlabeled:
        raise StrategyError(
            f"batch size {req.k} exceeds unlabeled pool of {req.pools.n_unlabeled}"
        )
    if spec.needs_labeled and req.pools.n_labeled == 0:
        raise StrategyError(f"strategy {name!r} requires at least one labeled example")
    candidates = np.array(req.pools.unlabeled, dtype=np.int64)
    m = req.params.get("subsample")
    if m is not None:
        m = int(m)
        if m < req.k:
            raise StrategyError(f"subsample size {m} is smaller than batch size {req.k}")
        if m < len(candidates):
            picks = req.rng.sample_indices(len(candidates), m)
            candidates = np.sort(candidates[picks])
    result = spec.fn(req, candidates)
    _validate_result(result, candidates, req.k)
    return result


def _validate_result(result: QueryResult, candidates: np.ndarray, k: int) -> None:
    if len(result.selected) != k or len(set(result.selected)) != k:
        raise StrategyError("strategy returned a wrong-sized or duplicated selection")
    pool = set(int(c) for c in candidates)
    if any(i not in pool for i in result.selected):
        raise StrategyError("strategy selected an index outside the candidate set")
