"""Strategy contract tests with independent brute-force oracles."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from altext.classification import EmbedAvgLinear, TrainConfig
from altext.corpus import PoolState
from altext.rng import Rng
from altext.strategies import (
    QueryRequest,
    StrategyError,
    STRATEGIES,
    greedy_coreset,
    kmeans_pp_seeding,
    lightweight_coreset,
    lightweight_coreset_weights,
    run_query,
    seals_restrict,
    uncertainty_scores,
)

from conftest import FakeClassifier, make_dataset


def _request(clf, dataset, labeled, unlabeled, k, seed=0, params=None):
    return QueryRequest(
        classifier=clf,
        dataset=dataset,
        pools=PoolState(labeled, unlabeled),
        k=k,
        rng=Rng(seed),
        params=params or {},
    )


# ---------------------------------------------------------------------------
# random
# ---------------------------------------------------------------------------

@pytest.mark.forced_example
def test_random_returns_whole_pool_when_k_equals_pool():
    ds = make_dataset(6)
    req = _request(FakeClassifier(), ds, [0, 1], [2, 3, 4, 5], k=4)
    result = run_query("random", req)
    assert sorted(result.selected) == [2, 3, 4, 5]


@pytest.mark.forced_example
def test_random_fixed_seed_reproducible():
    ds = make_dataset(30)
    picks = [
        run_query("random", _request(FakeClassifier(), ds, [0], list(range(1, 30)), k=5, seed=77)).selected
        for _ in range(2)
    ]
    assert picks[0] == picks[1]


@pytest.mark.forced_example
def test_random_uniform_within_five_sigma():
    ds = make_dataset(11)
    pools = PoolState([0], list(range(1, 11)))
    rng = Rng(123)
    counts = {i: 0 for i in range(1, 11)}
    draws = 100_000
    req = QueryRequest(FakeClassifier(), ds, pools, k=1, rng=rng)
    for _ in range(draws):
        counts[run_query("random", req).selected[0]] += 1
    expected = draws / 10
    sigma = math.sqrt(draws * 0.1 * 0.9)
    for c in counts.values():
        assert abs(c - expected) <= 5 * sigma


def test_random_rejects_oversized_batch():
    ds = make_dataset(4)
    with pytest.raises(StrategyError, match="exceeds"):
        run_query("random", _request(FakeClassifier(), ds, [0], [1, 2, 3], k=5))


# ---------------------------------------------------------------------------
# uncertainty scores
# ---------------------------------------------------------------------------

@pytest.mark.forced_example
def test_uncertainty_certain_row_scores_zero():
    P = np.array([[1.0, 0.0]])
    assert uncertainty_scores(P, "least_confidence")[0] == 0.0
    assert uncertainty_scores(P, "entropy")[0] == 0.0
    assert uncertainty_scores(P, "margin")[0] == 0.0


@pytest.mark.forced_example
def test_uncertainty_uniform_row_closed_forms():
    P = np.array([[0.5, 0.5]])
    assert uncertainty_scores(P, "entropy")[0] == pytest.approx(math.log(2), abs=1e-5)
    assert uncertainty_scores(P, "least_confidence")[0] == pytest.approx(0.5)
    assert uncertainty_scores(P, "margin")[0] == pytest.approx(1.0)


@pytest.mark.forced_example
def test_uncertainty_ranks_flatter_rows_higher():
    P = np.array([[0.6, 0.4], [0.9, 0.1]])
    for mode in ("least_confidence", "entropy", "margin"):
        s = uncertainty_scores(P, mode)
        assert s[0] > s[1]


def test_uncertainty_rejects_single_class():
    with pytest.raises(StrategyError):
        uncertainty_scores(np.array([[1.0]]), "entropy")


def test_uncertainty_multilabel_modes():
    P = np.array([[0.5, 1.0], [0.0, 1.0]])
    lc = uncertainty_scores(P, "least_confidence", "multi_label")
    assert lc[0] == pytest.approx(0.25)  # mean(0.5, 0.0)
    assert lc[1] == pytest.approx(0.0)
    ent = uncertainty_scores(P, "entropy", "multi_label")
    assert ent[0] == pytest.approx(math.log(2) / 2)
    assert ent[1] == pytest.approx(0.0)
    margin = uncertainty_scores(P, "margin", "multi_label")
    assert margin[0] == pytest.approx(0.5)  # 1 - mean(|0|, |1|)
    assert margin[1] == pytest.approx(0.0)


@given(
    st.lists(
        st.lists(st.floats(min_value=1e-6, max_value=1.0), min_size=3, max_size=3),
        min_size=1,
        max_size=20,
    )
)
@settings(max_examples=100)
def test_uncertainty_score_bounds(rows):
    P = np.array(rows)
    P = P / P.sum(axis=1, keepdims=True)
    C = P.shape[1]
    ent = uncertainty_scores(P, "entropy")
    assert np.all(ent >= -1e-12) and np.all(ent <= math.log(C) + 1e-12)
    margin = uncertainty_scores(P, "margin")
    assert np.all(margin >= -1e-12) and np.all(margin <= 1 + 1e-12)
    lc = uncertainty_scores(P, "least_confidence")
    assert np.all(lc >= -1e-12) and np.all(lc <= 1 - 1 / C + 1e-12)


# ---------------------------------------------------------------------------
# confidence-based selection
# ---------------------------------------------------------------------------

@pytest.mark.forced_example
@pytest.mark.parametrize("strategy", ["least_confidence", "prediction_entropy", "breaking_ties"])
def test_confidence_selects_most_uncertain(strategy):
    ds = make_dataset(2)
    clf = FakeClassifier(proba=[[0.9, 0.1], [0.6, 0.4]])
    result = run_query(strategy, _request(clf, ds, [], [0, 1], k=1))
    assert result.selected == [1]


@pytest.mark.forced_example
def test_confidence_tie_break_prefers_smaller_index():
    ds = make_dataset(3)
    clf = FakeClassifier(proba=[[0.7, 0.3], [0.7, 0.3], [0.7, 0.3]])
    result = run_query("breaking_ties", _request(clf, ds, [2], [0, 1], k=2))
    assert result.selected == [0, 1]


def _manual_uncertainty(row, mode):
    p = np.asarray(row)
    if mode == "least_confidence":
        return 1.0 - p.max()
    if mode == "entropy":
        return float(-(p[p > 0] * np.log(p[p > 0])).sum())
    top = np.sort(p)[::-1]
    return 1.0 - (top[0] - top[1])


@pytest.mark.forced_example
@pytest.mark.parametrize("strategy,mode", [
    ("least_confidence", "least_confidence"),
    ("prediction_entropy", "entropy"),
    ("breaking_ties", "margin"),
])
def test_confidence_matches_full_sort_oracle(strategy, mode):
    gen = np.random.default_rng(5)
    n, C, k = 40, 4, 7
    P = gen.dirichlet(np.ones(C), size=n)
    ds = make_dataset(n, n_classes=C)
    clf = FakeClassifier(proba=P)
    unlabeled = list(range(n))
    result = run_query(strategy, _request(clf, ds, [], unlabeled, k=k))
    oracle = sorted(unlabeled, key=lambda i: (-_manual_uncertainty(P[i], mode), i))[:k]
    assert result.selected == oracle


# ---------------------------------------------------------------------------
# contrastive active learning
# ---------------------------------------------------------------------------

@pytest.mark.forced_example
def test_cal_identical_distributions_score_zero():
    ds = make_dataset(3)
    clf = FakeClassifier(
        proba=[[0.3, 0.7], [0.3, 0.7], [0.3, 0.7]],
        embeddings=[[0.0], [1.0], [2.0]],
    )
    result = run_query("cal", _request(clf, ds, [0, 1], [2], k=1))
    assert result.scores[2] == pytest.approx(0.0, abs=1e-12)


@pytest.mark.forced_example
def test_cal_single_extreme_neighbor_scores_ln2():
    ds = make_dataset(2)
    clf = FakeClassifier(proba=[[1.0, 0.0], [0.5, 0.5]], embeddings=[[0.0], [0.1]])
    result = run_query("cal", _request(clf, ds, [0], [1], k=1))
    # direct KL evaluation with the clamp-then-renormalize rule; the exact
    # clamping effect is about 1.9e-7, so the score sits within 1e-6 of ln 2
    q = np.clip([1.0, 0.0], 1e-8, None)
    q = q / q.sum()
    expected = float((q * np.log(q / np.array([0.5, 0.5]))).sum())
    assert result.scores[1] == pytest.approx(expected, rel=1e-12)
    assert result.scores[1] == pytest.approx(math.log(2), abs=1e-6)


@pytest.mark.forced_example
def test_cal_matches_exhaustive_oracle():
    gen = np.random.default_rng(9)
    n, C = 25, 3
    P = gen.dirichlet(np.ones(C), size=n)
    X = gen.normal(size=(n, 4))
    labeled = list(range(8))
    unlabeled = list(range(8, n))
    kn = 4
    ds = make_dataset(n, n_classes=C)
    clf = FakeClassifier(proba=P, embeddings=X)
    result = run_query("cal", _request(clf, ds, labeled, unlabeled, k=5, params={"neighbors": kn}))

    # oracle: all-pairs distances, clamped and renormalized KL, full sort
    clamped = np.clip(P, 1e-8, None)
    clamped = clamped / clamped.sum(axis=1, keepdims=True)
    scores = {}
    for i in unlabeled:
        dists = [(np.linalg.norm(X[i] - X[j]), pos) for pos, j in enumerate(labeled)]
        nearest = [labeled[pos] for _, pos in sorted(dists, key=lambda t: (t[0], t[1]))[:kn]]
        kls = [
            float((clamped[j] * (np.log(clamped[j]) - np.log(clamped[i]))).sum())
            for j in nearest
        ]
        scores[i] = sum(kls) / len(kls)
    oracle = sorted(unlabeled, key=lambda i: (-scores[i], i))[:5]
    assert result.selected == oracle
    for i in unlabeled:
        assert result.scores[i] == pytest.approx(scores[i], rel=1e-9)


def test_cal_requires_labeled_examples():
    ds = make_dataset(3)
    clf = FakeClassifier(proba=[[0.5, 0.5]] * 3, embeddings=[[0.0]] * 3)
    with pytest.raises(StrategyError):
        run_query("cal", _request(clf, ds, [], [0, 1, 2], k=1))


# ---------------------------------------------------------------------------
# k-means++ seeding
# ---------------------------------------------------------------------------

@pytest.mark.forced_example
def test_kmeans_pp_two_far_points_selects_both():
    X = np.array([[0.0, 0.0], [10.0, 10.0]])
    for seed in range(10):
        assert sorted(kmeans_pp_seeding(X, 2, Rng(seed))) == [0, 1]


@pytest.mark.forced_example
def test_kmeans_pp_k_equals_rows_selects_all():
    X = np.arange(10, dtype=np.float64).reshape(5, 2)
    assert sorted(kmeans_pp_seeding(X, 5, Rng(3))) == list(range(5))


def _kmeans_pp_reference(X, k, rng):
    """Independent re-implementation consuming the identical stream."""
    n = len(X)
    chosen = [rng.randint(n)]
    d2 = [float(((X[i] - X[chosen[0]]) ** 2).sum()) for i in range(n)]
    d2[chosen[0]] = 0.0
    while len(chosen) < k:
        total = sum(d2)
        if total > 0:
            r = rng.random() * total
            acc = 0.0
            idx = n - 1
            for j, w in enumerate(d2):
                acc += w
                if r < acc:
                    idx = j
                    break
        else:
            remaining = [i for i in range(n) if i not in chosen]
            idx = remaining[rng.randint(len(remaining))]
        chosen.append(idx)
        for i in range(n):
            d2[i] = min(d2[i], float(((X[i] - X[idx]) ** 2).sum()))
        d2[idx] = 0.0
    return chosen


@pytest.mark.forced_example
def test_kmeans_pp_matches_reference_trace():
    gen = np.random.default_rng(11)
    X = gen.normal(size=(50, 3))
    for seed in range(20):
        assert kmeans_pp_seeding(X, 8, Rng(seed)) == _kmeans_pp_reference(X, 8, Rng(seed))


def test_kmeans_pp_uniform_fallback_on_duplicates():
    X = np.ones((6, 2))
    picks = kmeans_pp_seeding(X, 4, Rng(5))
    assert len(set(picks)) == 4


# ---------------------------------------------------------------------------
# BADGE
# ---------------------------------------------------------------------------

@pytest.mark.forced_example
def test_badge_zero_gradient_row_trace():
    """Trace with a fixed seed: a zero-gradient candidate among identical
    nonzero rows. Once a nonzero row is chosen, the duplicates collapse to
    distance zero, all remaining mass sits on the zero-gradient row (so it is
    drawn next), and the final pick exercises the uniform fallback."""
    ds = make_dataset(4)
    G = np.array([[0.0, 0.0], [3.0, 4.0], [3.0, 4.0], [3.0, 4.0]])
    clf = FakeClassifier(gradients=G)
    seed = next(
        s for s in range(100)
        if Rng(s).randint(4) != 0  # first pick lands on a nonzero row
    )
    result = run_query("badge", _request(clf, ds, [], [0, 1, 2, 3], k=3, seed=seed))
    assert len(set(result.selected)) == 3
    assert result.selected[0] != 0
    assert result.selected[1] == 0  # concentrated distance mass
    assert result.selected == [
        int(i) for i in
        _kmeans_pp_reference(G, 3, Rng(seed))
    ]


@pytest.mark.forced_example
def test_badge_identical_candidates_any_k_valid():
    ds = make_dataset(5)
    clf = FakeClassifier(gradients=np.ones((5, 3)))
    result = run_query("badge", _request(clf, ds, [], list(range(5)), k=3, seed=2))
    assert len(set(result.selected)) == 3
    assert set(result.selected) <= set(range(5))


@pytest.mark.forced_example
def test_badge_k1_is_uniform_seeded_draw():
    ds = make_dataset(6)
    clf = FakeClassifier(gradients=np.arange(12, dtype=float).reshape(6, 2))
    req = _request(clf, ds, [], list(range(6)), k=1, seed=31)
    expected = req.rng.clone().randint(6)
    assert run_query("badge", req).selected == [expected]


def test_badge_rejects_multilabel():
    ds = make_dataset(4, mode="multi_label", labels=[(0,), (1,), (0, 1), ()])
    clf = FakeClassifier(gradients=np.ones((4, 2)))
    with pytest.raises(StrategyError, match="single-label"):
        run_query("badge", _request(clf, ds, [], list(range(4)), k=2))


# ---------------------------------------------------------------------------
# embedding k-means
# ---------------------------------------------------------------------------

@pytest.mark.forced_example
def test_kmeans_k_equals_pool_selects_everything():
    ds = make_dataset(5)
    clf = FakeClassifier(embeddings=np.arange(10, dtype=float).reshape(5, 2))
    result = run_query("kmeans", _request(clf, ds, [], list(range(5)), k=5, seed=4))
    assert sorted(result.selected) == list(range(5))


@pytest.mark.forced_example
def test_kmeans_two_clusters_one_pick_each():
    gen = np.random.default_rng(8)
    a = gen.normal(loc=-10, scale=0.3, size=(50, 2))
    b = gen.normal(loc=+10, scale=0.3, size=(50, 2))
    X = np.vstack([a, b])
    ds = make_dataset(100)
    clf = FakeClassifier(embeddings=X)
    result = run_query("kmeans", _request(clf, ds, [], list(range(100)), k=2, seed=1))
    sides = {int(i >= 50) for i in result.selected}
    assert sides == {0, 1}


@pytest.mark.forced_example
def test_kmeans_seeded_determinism():
    gen = np.random.default_rng(2)
    X = gen.normal(size=(30, 3))
    ds = make_dataset(30)
    clf = FakeClassifier(embeddings=X)
    runs = [
        run_query("kmeans", _request(clf, ds, [], list(range(30)), k=6, seed=9)).selected
        for _ in range(2)
    ]
    assert runs[0] == runs[1]


# ---------------------------------------------------------------------------
# discriminative active learning
# ---------------------------------------------------------------------------

@pytest.mark.forced_example
def test_dal_r1_reduces_to_single_fit_top_k():
    gen = np.random.default_rng(3)
    X = gen.normal(size=(20, 4))
    ds = make_dataset(20)
    clf = FakeClassifier(embeddings=X)
    labeled, unlabeled = [0, 1, 2], list(range(3, 20))
    result = run_query("dal", _request(clf, ds, labeled, unlabeled, k=4, seed=6,
                                       params={"sub_iterations": 1}))

    # oracle: one discriminator fit with the same derived seed, then top-k
    from altext.classification import train_softmax_head, softmax
    rng = Rng(6)
    head_seed = rng.spawn_seed()
    stack = np.vstack([X[labeled], X[unlabeled]])
    y = np.array([0] * len(labeled) + [1] * len(unlabeled))
    W, b = train_softmax_head(stack, y, 2, clf.config, head_seed)
    p1 = softmax(X[unlabeled] @ W + b)[:, 1]
    oracle = [u for _, u in sorted(zip(-p1, unlabeled))][:4]
    assert result.selected == oracle


@pytest.mark.forced_example
def test_dal_k_not_exceeding_r_yields_singletons():
    gen = np.random.default_rng(4)
    X = gen.normal(size=(12, 3))
    ds = make_dataset(12)
    clf = FakeClassifier(embeddings=X)
    result = run_query("dal", _request(clf, ds, [0], list(range(1, 12)), k=2, seed=1,
                                       params={"sub_iterations": 5}))
    assert len(result.selected) == 2 == len(set(result.selected))


@pytest.mark.forced_example
def test_dal_prefers_far_candidates_across_seeds():
    gen = np.random.default_rng(12)
    near = gen.normal(loc=-2, scale=0.3, size=(20, 4))
    far = gen.normal(loc=+2, scale=0.3, size=(20, 4))
    labeled_pts = gen.normal(loc=-2, scale=0.3, size=(10, 4))
    X = np.vstack([labeled_pts, near, far])
    ds = make_dataset(50)
    clf = FakeClassifier(embeddings=X)
    labeled = list(range(10))
    unlabeled = list(range(10, 50))
    center = X[labeled].mean(axis=0)
    dists = {i: np.linalg.norm(X[i] - center) for i in unlabeled}
    median = np.median(list(dists.values()))
    for seed in range(10):
        result = run_query("dal", _request(clf, ds, labeled, unlabeled, k=6, seed=seed))
        picked = np.mean([dists[i] for i in result.selected])
        assert picked > median


# ---------------------------------------------------------------------------
# SEALS
# ---------------------------------------------------------------------------

@pytest.mark.forced_example
def test_seals_restrict_nearest_two_in_one_dimension():
    labeled_X = np.array([[0.0]])
    unlabeled_X = np.array([[1.0], [2.0], [100.0]])
    assert seals_restrict(labeled_X, unlabeled_X, k_neighbors=2, min_size=1) == [0, 1]


@pytest.mark.forced_example
def test_seals_restrict_whole_pool_when_neighbors_large():
    labeled_X = np.array([[0.0], [5.0]])
    unlabeled_X = np.array([[1.0], [2.0], [3.0]])
    assert seals_restrict(labeled_X, unlabeled_X, k_neighbors=10, min_size=1) == [0, 1, 2]


@pytest.mark.forced_example
def test_seals_restrict_matches_knn_oracle():
    gen = np.random.default_rng(6)
    L = gen.normal(size=(7, 3))
    U = gen.normal(size=(30, 3))
    ks = 4
    got = seals_restrict(L, U, k_neighbors=ks, min_size=1)
    expected = set()
    for row in L:
        dists = sorted(range(len(U)), key=lambda j: (np.linalg.norm(U[j] - row), j))
        expected.update(dists[:ks])
    assert got == sorted(expected)


def test_seals_pads_to_batch_size():
    labeled_X = np.array([[0.0]])
    unlabeled_X = np.array([[1.0], [2.0], [3.0], [4.0]])
    got = seals_restrict(labeled_X, unlabeled_X, k_neighbors=1, min_size=3)
    assert got == [0, 1, 2]  # padded by distance to the labeled centroid


def test_seals_selection_uses_breaking_ties_on_restricted_set():
    X = np.array([[0.0], [1.0], [2.0], [50.0], [60.0]])
    P = np.array([[0.5, 0.5], [0.9, 0.1], [0.55, 0.45], [0.5, 0.5], [0.5, 0.5]])
    ds = make_dataset(5)
    clf = FakeClassifier(proba=P, embeddings=X)
    result = run_query("seals", _request(clf, ds, [0], [1, 2, 3, 4], k=1,
                                         params={"neighbors": 2}))
    # candidates restricted to {1, 2}; 2 is more uncertain
    assert result.selected == [2]


# ---------------------------------------------------------------------------
# expected gradient length
# ---------------------------------------------------------------------------

@pytest.mark.forced_example
def test_egl_one_hot_scores_zero_and_never_beats_uncertain():
    ds = make_dataset(2)
    egl = {"full": np.array([[0.0, 0.0], [1.0, 2.0]])}
    clf = FakeClassifier(proba=[[1.0, 0.0], [0.5, 0.5]], egl=egl)
    result = run_query("egl", _request(clf, ds, [], [0, 1], k=1))
    assert result.selected == [1]
    assert result.scores[0] == 0.0


@pytest.mark.forced_example
def test_egl_sm_closed_form_score():
    ds = make_dataset(1)
    norm = math.sqrt(0.5)  # ||[0.5, -0.5]|| * sqrt(0 + 1)
    clf = FakeClassifier(proba=[[0.5, 0.5]], egl={"softmax": np.array([[norm, norm]])})
    result = run_query("egl_sm", _request(clf, ds, [], [0], k=1))
    assert result.scores[0] == pytest.approx(0.70711, abs=1e-5)


@pytest.mark.forced_example
def test_egl_ranking_matches_finite_difference_oracle():
    from test_gradients import _distinct_token_corpus, _fd_group_norms

    ds = _distinct_token_corpus(14, 25, seed=7)
    model = EmbedAvgLinear(ds.label_space, TrainConfig(epochs=2, seed=7), dim=4)
    labeled = list(range(4))
    unlabeled = list(range(4, 14))
    model.fit(ds, labeled, [ds.labels[i] for i in labeled])
    P = model.predict_proba(ds, unlabeled)
    for variant, group_pos in (("egl", 2), ("egl_word", 1), ("egl_sm", 0)):
        result = run_query(variant, _request(model, ds, labeled, unlabeled, k=3))
        scores = {}
        for pos, i in enumerate(unlabeled):
            groups = [_fd_group_norms(model, ds.token_ids[i], c) for c in range(P.shape[1])]
            scores[i] = sum(P[pos, c] * groups[c][group_pos] for c in range(P.shape[1]))
        oracle = sorted(unlabeled, key=lambda i: (-scores[i], i))[:3]
        assert result.selected == oracle


def test_egl_requires_capability():
    ds = make_dataset(3)
    clf = FakeClassifier(proba=[[0.5, 0.5]] * 3)
    with pytest.raises(StrategyError, match="capability"):
        run_query("egl", _request(clf, ds, [], [0, 1, 2], k=1))


# ---------------------------------------------------------------------------
# greedy coreset
# ---------------------------------------------------------------------------

@pytest.mark.forced_example
def test_greedy_coreset_hand_trace():
    labeled_X = np.array([[0.0]])
    unlabeled_X = np.array([[1.0], [5.0], [6.0]])
    picks, dists = greedy_coreset(labeled_X, unlabeled_X, k=2)
    # farthest first (6.0, distance 6); then 1.0 vs 5.0 tie at distance 1,
    # smaller position wins
    assert picks == [2, 0]
    assert dists == pytest.approx([6.0, 1.0])


@pytest.mark.forced_example
def test_greedy_coreset_k1_is_farthest_point():
    gen = np.random.default_rng(14)
    L = gen.normal(size=(4, 2))
    U = gen.normal(size=(20, 2))
    picks, _ = greedy_coreset(L, U, k=1)
    mins = [min(np.linalg.norm(u - l) for l in L) for u in U]
    assert picks[0] == int(np.argmax(mins))


def _greedy_oracle(L, U, k):
    """Independent re-implementation of the max-min greedy rule."""
    covered = [row for row in L]
    remaining = list(range(len(U)))
    picks = []
    for _ in range(k):
        best, best_d = None, -1.0
        for j in remaining:
            d = min(float(np.linalg.norm(U[j] - c)) for c in covered)
            if d > best_d + 1e-15:
                best, best_d = j, d
        picks.append(best)
        covered.append(U[best])
        remaining.remove(best)
    return picks


@pytest.mark.forced_example
def test_greedy_coreset_matches_brute_force():
    gen = np.random.default_rng(21)
    for trial in range(40):
        n = 2 + int(gen.integers(11))
        k = 1 + int(gen.integers(min(3, n)))
        L = gen.normal(size=(1 + int(gen.integers(3)), 2))
        U = gen.normal(size=(n, 2))
        picks, _ = greedy_coreset(L, U, k)
        assert picks == _greedy_oracle(L, U, k)


def test_greedy_coreset_stepwise_optimality():
    gen = np.random.default_rng(30)
    L = gen.normal(size=(3, 2))
    U = gen.normal(size=(200, 2))
    picks, dists = greedy_coreset(L, U, k=5)
    covered = [row for row in L]
    for step, (p, d) in enumerate(zip(picks, dists)):
        for j in range(len(U)):
            if j in picks[: step + 1]:
                continue
            min_d = min(float(np.linalg.norm(U[j] - c)) for c in covered)
            assert min_d <= d + 1e-9
        covered.append(U[p])


# ---------------------------------------------------------------------------
# lightweight coreset
# ---------------------------------------------------------------------------

@pytest.mark.forced_example
def test_lightweight_weights_symmetric_pair():
    q = lightweight_coreset_weights(np.array([[-1.0], [1.0]]))
    assert q == pytest.approx([0.5, 0.5])


@pytest.mark.forced_example
def test_lightweight_weights_uniform_when_identical():
    q = lightweight_coreset_weights(np.ones((4, 2)))
    assert q == pytest.approx([0.25] * 4)


def test_lightweight_draws_distinct():
    gen = np.random.default_rng(3)
    X = gen.normal(size=(12, 2))
    picks, q = lightweight_coreset(X, 5, Rng(8))
    assert len(set(picks)) == 5
    assert q.sum() == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# subsampling wrapper
# ---------------------------------------------------------------------------

@pytest.mark.forced_example
def test_subsample_identity_when_m_covers_pool():
    ds = make_dataset(10)
    clf = FakeClassifier(proba=np.tile([0.6, 0.4], (10, 1)))
    a = run_query("breaking_ties", _request(clf, ds, [], list(range(10)), k=3))
    b = run_query("breaking_ties", _request(clf, ds, [], list(range(10)), k=3,
                                            params={"subsample": 100}))
    assert a.selected == b.selected


@pytest.mark.forced_example
def test_subsample_deterministic():
    ds = make_dataset(40)
    clf = FakeClassifier()
    picks = [
        run_query("random", _request(clf, ds, [], list(range(40)), k=4, seed=5,
                                     params={"subsample": 10})).selected
        for _ in range(2)
    ]
    assert picks[0] == picks[1]


@pytest.mark.forced_example
def test_subsample_composition_uniform_frequency():
    ds = make_dataset(10)
    clf = FakeClassifier()
    pools = PoolState([], list(range(10)))
    rng = Rng(77)
    req = QueryRequest(clf, ds, pools, k=1, rng=rng, params={"subsample": 5})
    draws = 20_000
    counts = {i: 0 for i in range(10)}
    for _ in range(draws):
        counts[run_query("random", req).selected[0]] += 1
    sigma = math.sqrt(draws * 0.1 * 0.9)
    for c in counts.values():
        assert abs(c - draws / 10) <= 5 * sigma


def test_subsample_smaller_than_k_errors():
    ds = make_dataset(10)
    with pytest.raises(StrategyError, match="subsample"):
        run_query("random", _request(FakeClassifier(), ds, [], list(range(10)), k=5,
                                     params={"subsample": 3}))


def test_strategy_modifier_parsing():
    from altext.strategies import resolve_strategy
    assert resolve_strategy("badge+subsample=500") == ("badge", {"subsample": 500})
    assert resolve_strategy("random") == ("random", {})
    with pytest.raises(StrategyError):
        resolve_strategy("nope")
    with pytest.raises(StrategyError):
        resolve_strategy("random+frobnicate=1")


# ---------------------------------------------------------------------------
# cross-cutting invariants
# ---------------------------------------------------------------------------

def _full_stub(n, seed=0, C=3):
    gen = np.random.default_rng(seed)
    P = gen.dirichlet(np.ones(C), size=n)
    X = gen.normal(size=(n, 4))
    G = gen.normal(size=(n, C * 4))
    egl = {g: np.abs(gen.normal(size=(n, C))) for g in ("full", "word", "softmax")}
    return FakeClassifier(proba=P, embeddings=X, gradients=G, egl=egl)


@pytest.mark.parametrize("strategy", sorted(STRATEGIES))
def test_every_strategy_returns_k_distinct_unlabeled(strategy):
    n = 26
    ds = make_dataset(n, n_classes=3)
    clf = _full_stub(n, seed=1)
    labeled = [0, 5, 9]
    unlabeled = [i for i in range(n) if i not in labeled]
    for k in (1, 4):
        result = run_query(strategy, _request(clf, ds, labeled, unlabeled, k=k, seed=3))
        assert len(result.selected) == k == len(set(result.selected))
        assert set(result.selected) <= set(unlabeled)


@pytest.mark.parametrize("strategy", sorted(STRATEGIES))
def test_stochastic_strategies_reproducible(strategy):
    n = 18
    ds = make_dataset(n, n_classes=3)
    clf = _full_stub(n, seed=2)
    labeled = [1, 2]
    unlabeled = [i for i in range(n) if i not in labeled]
    a = run_query(strategy, _request(clf, ds, labeled, unlabeled, k=3, seed=11))
    b = run_query(strategy, _request(clf, ds, labeled, unlabeled, k=3, seed=11))
    assert a.selected == b.selected


def test_top_k_scale_invariance():
    from altext.strategies import _top_k
    gen = np.random.default_rng(1)
    candidates = np.arange(30)
    scores = gen.normal(size=30) ** 2
    base = _top_k(candidates, scores, 6)
    assert base == _top_k(candidates, scores * 17.5, 6)


@pytest.mark.parametrize("strategy", ["least_confidence", "prediction_entropy",
                                      "breaking_ties", "cal", "greedy_coreset"])
def test_deterministic_strategies_permutation_equivariant(strategy):
    n = 20
    gen = np.random.default_rng(40)
    P = gen.dirichlet(np.ones(3), size=n)
    X = gen.normal(size=(n, 3))
    perm = list(gen.permutation(n))
    ds = make_dataset(n, n_classes=3)
    labeled = [0, 3, 7]
    unlabeled = [i for i in range(n) if i not in labeled]

    base = run_query(strategy, _request(FakeClassifier(proba=P, embeddings=X), ds,
                                        labeled, unlabeled, k=4))
    # permuted world: row perm[i] holds what row i used to
    P2 = np.empty_like(P)
    X2 = np.empty_like(X)
    for old, new in enumerate(perm):
        P2[new] = P[old]
        X2[new] = X[old]
    mapped = run_query(strategy, _request(FakeClassifier(proba=P2, embeddings=X2), ds,
                                          [perm[i] for i in labeled],
                                          [perm[i] for i in unlabeled], k=4))
    assert sorted(mapped.selected) == sorted(perm[i] for i in base.selected)


def test_seals_restriction_permutation_equivariant():
    gen = np.random.default_rng(41)
    L = gen.normal(size=(5, 3))
    U = gen.normal(size=(15, 3))
    base = seals_restrict(L, U, k_neighbors=3, min_size=1)
    perm = list(gen.permutation(15))
    U2 = np.empty_like(U)
    for old, new in enumerate(perm):
        U2[new] = U[old]
    mapped = seals_restrict(L, U2, k_neighbors=3, min_size=1)
    assert sorted(mapped) == sorted(perm[p] for p in base)


def test_multilabel_rejection_for_geometric_strategies():
    n = 8
    ds = make_dataset(n, mode="multi_label", labels=[(0,), (1,), (0, 1), (), (0,), (1,), (0,), ()])
    clf = _full_stub(n, seed=5, C=2)
    for strategy in ("badge", "kmeans", "dal", "seals", "egl", "egl_word", "egl_sm",
                     "greedy_coreset", "lightweight_coreset"):
        with pytest.raises(StrategyError, match="single-label"):
            run_query(strategy, _request(clf, ds, [0, 1], list(range(2, n)), k=2))
    for strategy in ("random", "least_confidence", "prediction_entropy", "breaking_ties", "cal"):
        result = run_query(strategy, _request(clf, ds, [0, 1], list(range(2, n)), k=2))
        assert len(result.selected) == 2
