import numpy as np
import pytest

from tidylearn.posegraph import (
    COV_FLOOR,
    Gmm,
    SpanningTree,
    bic,
    edge_cost,
    em_fit,
    fit_pose_graph,
    global_cost,
    pose_graph_to_json,
    sample_and_score,
    select_tree,
    tidy,
)
from tidylearn.scenes import DataError, ObjectInstance, Scene


def scene_of(positions, names=None):
    names = names or [f"o{i}" for i in range(len(positions))]
    return Scene("t", [ObjectInstance(n, np.asarray(p, float))
                       for n, p in zip(names, positions)])


def planted_scenes(layout, n_scenes, sigma, seed, mirror_fraction=0.0):
    rng = np.random.default_rng(seed)
    layout = np.asarray(layout, float)
    scenes = []
    for s in range(n_scenes):
        base = layout.copy()
        if rng.random() < mirror_fraction:
            base[:, 0] = -base[:, 0]
        offset = rng.uniform(-1, 1, size=2)  # cost is translation-invariant
        scenes.append(scene_of(base + offset + rng.normal(0, sigma, base.shape)))
    return scenes


# -- Gmm basics ------------------------------------------------------------------


def test_gmm_validates_weights_and_floor():
    with pytest.raises(ValueError):
        Gmm(np.array([0.5, 0.6]), np.zeros((2, 2)), np.stack([np.eye(2)] * 2))
    with pytest.raises(ValueError):
        Gmm(np.array([1.0]), np.zeros((1, 2)), np.array([[[1e-9, 0], [0, 1e-9]]]))


def test_gmm_density_integrates_to_one_monte_carlo():
    gmm = Gmm(np.array([0.4, 0.6]),
              np.array([[-0.5, 0.0], [0.5, 0.2]]),
              np.stack([np.eye(2) * 0.01, np.eye(2) * 0.02]))
    # grid integral over a box that captures nearly all the mass
    xs = np.linspace(-1.5, 1.5, 301)
    ys = np.linspace(-1.0, 1.2, 301)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    cell = (xs[1] - xs[0]) * (ys[1] - ys[0])
    integral = gmm.pdf(pts).sum() * cell
    assert abs(integral - 1.0) < 0.05


def test_gmm_negation_mirrors_means():
    gmm = Gmm(np.array([1.0]), np.array([[0.3, -0.4]]), np.array([np.eye(2) * 0.1]))
    neg = gmm.negated()
    np.testing.assert_allclose(neg.means, [[-0.3, 0.4]])
    np.testing.assert_allclose(neg.covariances, gmm.covariances)


def test_gmm_sampling_matches_moments():
    gmm = Gmm(np.array([1.0]), np.array([[1.0, -2.0]]), np.array([np.eye(2) * 0.04]))
    draws = gmm.sample(20000, np.random.default_rng(0))
    np.testing.assert_allclose(draws.mean(axis=0), [1.0, -2.0], atol=0.01)
    np.testing.assert_allclose(draws.var(axis=0), [0.04, 0.04], rtol=0.05)


# -- EM ---------------------------------------------------------------------------


def test_em_single_component_closed_form():
    rng = np.random.default_rng(1)
    pts = rng.normal(size=(40, 2)) * [0.5, 0.2] + [1.0, -1.0]
    gmm, _, _ = em_fit(pts, 1, np.random.default_rng(0))
    np.testing.assert_allclose(gmm.means[0], pts.mean(axis=0), atol=1e-9)
    expected_cov = np.cov(pts.T, bias=True)
    np.testing.assert_allclose(gmm.covariances[0], expected_cov, atol=1e-8)


def test_em_identical_points_hits_floor():
    pts = np.tile([0.5, 0.5], (10, 1))
    gmm, _, _ = em_fit(pts, 1, np.random.default_rng(0))
    vals = np.linalg.eigvalsh(gmm.covariances[0])
    np.testing.assert_allclose(vals, COV_FLOOR, atol=1e-12)


def test_em_rejects_k_above_point_count():
    with pytest.raises(ValueError):
        em_fit(np.zeros((2, 2)), 3, np.random.default_rng(0))


def test_em_loglik_monotone_and_recovers_planted_clusters():
    rng = np.random.default_rng(7)
    a = rng.normal(size=(60, 2)) * 0.1 + [1.0, 0.0]
    b = rng.normal(size=(60, 2)) * 0.1 + [-1.0, 0.0]
    pts = np.vstack([a, b])
    gmm, final, history = em_fit(pts, 2, np.random.default_rng(3))
    diffs = np.diff(history)
    assert (diffs >= -1e-9).all()
    means = gmm.means[np.argsort(gmm.means[:, 0])]
    np.testing.assert_allclose(means, [[-1.0, 0.0], [1.0, 0.0]], atol=0.05)


def test_em_monotone_across_many_seeds():
    rng = np.random.default_rng(11)
    for trial in range(20):
        pts = rng.normal(size=(30, 2)) * rng.uniform(0.05, 0.5)
        pts[15:] += rng.uniform(-2, 2, size=2)
        for k in (1, 2, 3):
            _, _, history = em_fit(pts, k, np.random.default_rng(trial))
            assert (np.diff(history) >= -1e-9).all()


# -- BIC ---------------------------------------------------------------------------


def test_bic_single_point_is_minus_two_loglik():
    pts = np.array([[0.0, 0.0]])
    gmm = Gmm(np.array([1.0]), np.zeros((1, 2)), np.array([np.eye(2)]))
    assert bic(gmm, pts) == pytest.approx(-2.0 * float(gmm.log_pdf(pts)[0]))


def test_bic_prefers_one_component_for_tight_cluster():
    rng = np.random.default_rng(5)
    pts = rng.normal(size=(50, 2)) * 0.05
    g1, _, _ = em_fit(pts, 1, np.random.default_rng(0))
    g2, _, _ = em_fit(pts, 2, np.random.default_rng(0))
    assert bic(g1, pts) < bic(g2, pts)


def test_bic_prefers_two_components_for_bimodal():
    rng = np.random.default_rng(6)
    pts = np.vstack([rng.normal(size=(50, 2)) * 0.1 + [1.0, 0.0],
                     rng.normal(size=(50, 2)) * 0.1 + [-1.0, 0.0]])
    g1, _, _ = em_fit(pts, 1, np.random.default_rng(0))
    g2, _, _ = em_fit(pts, 2, np.random.default_rng(0))
    assert bic(g2, pts) < bic(g1, pts)


def test_bic_rejects_empty_points():
    gmm = Gmm(np.array([1.0]), np.zeros((1, 2)), np.array([np.eye(2)]))
    with pytest.raises(ValueError):
        bic(gmm, np.zeros((0, 2)))


# -- pose graph fitting ---------------------------------------------------------------


def test_identical_scenes_fit_floored_single_modes():
    scenes = [scene_of([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]) for _ in range(5)]
    model = fit_pose_graph(scenes, rng=0)
    for (i, j), gmm in model.edges.items():
        assert gmm.k == 1
        np.testing.assert_allclose(
            np.linalg.eigvalsh(gmm.covariances[0]), COV_FLOOR, atol=1e-10)


def test_planted_mixture_selects_two_modes():
    rng = np.random.default_rng(0)
    scenes = []
    for s in range(40):
        sign = 1.0 if s % 2 == 0 else -1.0
        pos = np.array([[0.0, 0.0], [sign * 1.0, 0.0]]) + rng.normal(0, 0.1, (2, 2))
        scenes.append(scene_of(pos))
    model = fit_pose_graph(scenes, rng=1)
    gmm = model.edge(0, 1)
    assert gmm.k == 2
    means = gmm.means[np.argsort(gmm.means[:, 0])]
    np.testing.assert_allclose(means, [[-1.0, 0.0], [1.0, 0.0]], atol=0.05)


def test_edge_antisymmetry():
    scenes = planted_scenes([[0.0, 0.0], [0.4, 0.1], [-0.2, 0.3]], 12, 0.05, 3)
    model = fit_pose_graph(scenes, rng=2)
    for i in range(3):
        for j in range(3):
            if i != j:
                np.testing.assert_allclose(model.edge(j, i).means,
                                           -model.edge(i, j).means, atol=1e-9)


def test_fit_rejects_bad_input():
    with pytest.raises(DataError):
        fit_pose_graph([scene_of([[0.0, 0.0], [1.0, 1.0]])])
    with pytest.raises(DataError):
        fit_pose_graph([scene_of([[0.0, 0.0]], names=["a"]),
                        scene_of([[0.0, 0.0]], names=["b"])])


# -- costs -------------------------------------------------------------------------


def test_edge_cost_closed_form_at_mode():
    gmm = Gmm(np.array([1.0]), np.zeros((1, 2)), np.array([np.eye(2)]))
    assert edge_cost(gmm, np.zeros(2)) == pytest.approx(np.log(2 * np.pi), abs=1e-12)


def test_cost_increases_away_from_modes():
    scenes = planted_scenes([[0.0, 0.0], [0.5, 0.0]], 10, 0.02, 1)
    model = fit_pose_graph(scenes, rng=0)
    tidy_arr = np.array([[0.0, 0.0], [0.5, 0.0]])
    messy = np.array([[0.0, 0.0], [5.0, 5.0]])
    assert global_cost(messy, model) > global_cost(tidy_arr, model)


def test_two_object_global_cost_is_single_edge():
    scenes = planted_scenes([[0.0, 0.0], [0.5, 0.0]], 10, 0.02, 1)
    model = fit_pose_graph(scenes, rng=0)
    arr = np.array([[0.1, 0.0], [0.4, 0.2]])
    expected = edge_cost(model.edge(0, 1), arr[1] - arr[0])
    assert global_cost(arr, model) == pytest.approx(expected, abs=1e-12)


# -- spanning tree ------------------------------------------------------------------


def test_two_object_tree_is_single_edge():
    scenes = planted_scenes([[0.0, 0.0], [0.5, 0.0]], 8, 0.02, 1)
    model = fit_pose_graph(scenes, rng=0)
    tree = select_tree(model)
    assert len(tree.edges) == 1


def test_tightest_edge_enters_tree():
    # objects 0-1 locked together, 2 loose relative to both
    rng = np.random.default_rng(4)
    scenes = []
    for _ in range(20):
        p0 = rng.uniform(-1, 1, 2)
        p1 = p0 + [0.3, 0.0] + rng.normal(0, 0.005, 2)
        p2 = p0 + rng.normal(0, 0.5, 2)
        scenes.append(scene_of([p0, p1, p2]))
    model = fit_pose_graph(scenes, rng=5)
    tree = select_tree(model)
    assert (0, 1) in tree.edges or (1, 0) in tree.edges


def test_tree_structure_validated():
    with pytest.raises(ValueError):
        SpanningTree(root=0, edges=[(1, 2)])  # parent not yet placed
    tree = SpanningTree(root=0, edges=[(0, 1), (1, 2)])
    assert len(tree.edges) == 2


def test_tree_is_acyclic_spanning_for_random_models():
    scenes = planted_scenes([[0.0, 0.0], [0.4, 0.0], [0.0, 0.4], [0.4, 0.4]],
                            15, 0.05, 9)
    model = fit_pose_graph(scenes, rng=1)
    tree = select_tree(model)
    assert len(tree.edges) == 3  # n-1 edges, construction enforces acyclicity


# -- sampling & scoring ----------------------------------------------------------------


def test_zero_variance_edges_give_identical_candidates():
    layout = np.array([[0.0, 0.0], [0.5, 0.0], [0.0, 0.5]])
    scenes = [scene_of(layout) for _ in range(5)]
    model = fit_pose_graph(scenes, rng=0)
    tree = select_tree(model)
    cands = sample_and_score(model, tree, pop_size=50, rng=1)
    spread = cands.arrangements.std(axis=0).max()
    assert spread < 1e-2  # floored covariance leaves ~1e-3 sampling noise
    np.testing.assert_allclose(cands.scores.sum(), 1.0, atol=1e-9)


def test_scores_normalised():
    scenes = planted_scenes([[0.0, 0.0], [0.4, 0.1], [-0.3, 0.2]], 12, 0.03, 2)
    model = fit_pose_graph(scenes, rng=0)
    cands = sample_and_score(model, select_tree(model), pop_size=200, rng=3)
    np.testing.assert_allclose(cands.scores.sum(), 1.0, atol=1e-9)
    assert (cands.scores >= 0).all()
    assert (np.diff(cands.scores) <= 1e-12).all()  # sorted best first


def test_bimodal_scene_best_candidate_hits_a_mode():
    layout = np.array([[0.0, 0.0], [0.4, 0.0], [0.0, 0.3], [0.4, 0.3]])
    scenes = planted_scenes(layout, 40, 0.01, 11, mirror_fraction=0.5)
    model = fit_pose_graph(scenes, rng=1)
    tree = select_tree(model)
    cands = sample_and_score(model, tree, pop_size=1000, rng=7)
    best = cands.best()
    rel = best - best[0]
    mirrored = layout.copy()
    mirrored[:, 0] = -mirrored[:, 0]
    err_plain = np.linalg.norm(rel - (layout - layout[0]), axis=1).max()
    err_mirror = np.linalg.norm(rel - (mirrored - mirrored[0]), axis=1).max()
    assert min(err_plain, err_mirror) < 0.05


def test_pop_size_validated():
    scenes = planted_scenes([[0.0, 0.0], [0.5, 0.0]], 8, 0.02, 1)
    model = fit_pose_graph(scenes, rng=0)
    with pytest.raises(ValueError):
        sample_and_score(model, select_tree(model), pop_size=0, rng=0)


def test_tidy_beats_median_candidate_cost():
    layout = np.array([[0.0, 0.0], [0.4, 0.1], [-0.2, 0.3], [0.1, -0.3]])
    scenes = planted_scenes(layout, 25, 0.03, 5)
    model = fit_pose_graph(scenes, rng=2)
    tree = select_tree(model)
    cands = sample_and_score(model, tree, pop_size=300, rng=9)
    best_cost = global_cost(cands.best(), model)
    median_cost = global_cost(cands.arrangements[len(cands.arrangements) // 2], model)
    assert best_cost <= median_cost + 1e-9


def test_tidy_beats_training_mean_arrangement_on_bimodal_data():
    layout = np.array([[0.0, 0.0], [0.5, 0.0], [0.0, 0.4]])
    scenes = planted_scenes(layout, 30, 0.02, 6, mirror_fraction=0.5)
    model = fit_pose_graph(scenes, rng=3)
    arrangement = tidy(model, pop_size=500, rng=4)
    assert global_cost(arrangement, model) <= global_cost(model.object_means, model)


def test_tidy_root_anchored_and_reproducible():
    layout = np.array([[0.2, 0.1], [0.6, 0.1], [0.2, 0.5]])
    scenes = planted_scenes(layout, 20, 0.02, 8)
    model = fit_pose_graph(scenes, rng=1)
    tree = select_tree(model)
    a = tidy(model, tree, pop_size=200, rng=5)
    b = tidy(model, tree, pop_size=200, rng=5)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_allclose(a[tree.root], model.object_means[tree.root], atol=1e-12)


def test_export_shape():
    scenes = planted_scenes([[0.0, 0.0], [0.4, 0.0], [0.0, 0.4]], 10, 0.02, 3)
    model = fit_pose_graph(scenes, rng=0)
    tree = select_tree(model)
    payload = pose_graph_to_json(model, tree)
    assert payload["kind"] == "pose-graph"
    assert len(payload["edges"]) == 3  # unordered pairs
    assert payload["tree"]["root"] in payload["objects"]
