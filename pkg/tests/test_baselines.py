import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tidylearn.baselines import (
    BaselineConfig,
    BaselineContext,
    knn_place,
    knn_scene_projection,
    mean_with_offset,
    nearest_neighbour,
    static_position,
    user_copy,
    weighted_knn,
)
from tidylearn.scenes import (
    DataError,
    Dataset,
    ObjectInstance,
    Scene,
    TemplateSpec,
    UserRecord,
)
from tidylearn.semantics import load_bundled_table
from tidylearn.synth import generate_dataset


@pytest.fixture(scope="module")
def table():
    return load_bundled_table()


def scene_of(template, names, positions):
    return Scene(template, [ObjectInstance(n, np.asarray(p, float))
                            for n, p in zip(names, positions)])


def simple_ctx(train_positions, names=("fork", "knife"), template="t", seed=0,
               user_positions=None, table=None, extent=(-1, 1, -1, 1)):
    users = [UserRecord(f"u{i}", [scene_of(template, names, pos)])
             for i, pos in enumerate(train_positions)]
    registry = {template: TemplateSpec(template, list(names), extent=extent)}
    ds = Dataset(users, registry)
    user_scene = scene_of(template, names,
                          user_positions if user_positions is not None
                          else train_positions[0])
    return BaselineContext(ds, [user_scene], seed=seed, table=table)


def test_mean_position_hand_example():
    ctx = simple_ctx([[[0.0, 0.0], [1.0, 1.0]], [[2.0, 0.0], [1.0, 1.0]]])
    out = static_position("mean", ctx, "t", "fork")
    np.testing.assert_allclose(out, [1.0, 0.0])


def test_mean_position_unknown_object():
    ctx = simple_ctx([[[0.0, 0.0], [1.0, 1.0]]])
    with pytest.raises(DataError):
        static_position("mean", ctx, "t", "xylophone")


def test_mean_position_translation_equivariance():
    base = [[[0.1, 0.2], [0.9, -0.4]], [[0.5, 0.0], [0.3, 0.3]]]
    shift = np.array([0.7, -1.3])
    shifted = [[(np.asarray(p) + shift).tolist() for p in scene] for scene in base]
    a = static_position("mean", simple_ctx(base), "t", "fork")
    b = static_position("mean", simple_ctx(shifted), "t", "fork")
    np.testing.assert_allclose(b, a + shift, atol=1e-12)


def test_random_position_seeded_and_in_bounds():
    ctx = simple_ctx([[[0.0, 0.0], [1.0, 1.0]]], extent=(-2, 2, -1, 1), seed=42)
    a = static_position("random", ctx, "t")
    b = static_position("random", ctx, "t")
    np.testing.assert_array_equal(a, b)
    assert -2 <= a[0] <= 2 and -1 <= a[1] <= 1


def test_mean_with_offset_zero_radius_is_centroid():
    ctx = simple_ctx([[[0.0, 0.0], [2.0, 0.0]]])
    ctx.config = BaselineConfig(offset_fraction=0.0)
    out = static_position("mean_with_offset", ctx, "t")
    np.testing.assert_allclose(out, [1.0, 0.0], atol=1e-12)


def test_mean_with_offset_stays_near_centroid():
    ctx = simple_ctx([[[0.0, 0.0], [2.0, 0.0]]], extent=(-2, 2, -2, 2), seed=3)
    out = static_position("mean_with_offset", ctx, "t")
    assert np.linalg.norm(out - np.array([1.0, 0.0])) <= 0.05 * 4 + 1e-9


# -- kNN family ----------------------------------------------------------------


def test_identical_anchor_positions_return_that_position(table):
    names = ("computer", "keyboard", "mouse")
    pos = [[0.5, 0.5]] * 3
    ctx = simple_ctx([pos], names=names, table=table)
    out, _ = weighted_knn(ctx, "t", "laptop")
    np.testing.assert_allclose(out, [0.5, 0.5])


def test_equidistant_anchors_average(table):
    # salt and pepper are symmetric around the probe by construction of w=1/d
    names = ("salt", "pepper")
    ctx = simple_ctx([[[0.0, 0.0], [2.0, 0.0]]], names=names, table=table)
    d_salt = np.linalg.norm(table.lookup("salt") - table.lookup("fork"))
    d_pepper = np.linalg.norm(table.lookup("pepper") - table.lookup("fork"))
    out, meta = weighted_knn(ctx, "t", "fork")
    w = np.array([1 / (d_salt + 1e-6), 1 / (d_pepper + 1e-6)])
    expected = (w[:, None] * np.array([[0.0, 0.0], [2.0, 0.0]])).sum(axis=0) / w.sum()
    np.testing.assert_allclose(out, expected, atol=1e-9)
    assert meta["fallback"] is True  # only two anchors for k=3


def test_weighted_knn_hand_computed_laptop(table):
    names = ("computer", "keyboard", "mouse", "plant")
    positions = np.array([[0.4, -0.2], [0.0, -0.1], [0.2, -0.1], [-0.5, 0.4]])
    ctx = simple_ctx([positions.tolist()], names=names, table=table)
    lap = table.lookup("laptop")
    dists = {n: np.linalg.norm(table.lookup(n) - lap) for n in names}
    nearest3 = sorted(names, key=dists.get)[:3]
    w = np.array([1.0 / (dists[n] + 1e-6) for n in nearest3])
    pos_map = dict(zip(names, positions))
    expected = sum(wi * pos_map[n] for wi, n in zip(w, nearest3)) / w.sum()
    out, meta = weighted_knn(ctx, "t", "laptop")
    np.testing.assert_allclose(out, expected, atol=1e-9)
    assert meta["fallback"] is False


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_weighted_knn_output_in_anchor_hull(seed):
    table = load_bundled_table()
    rng = np.random.default_rng(seed)
    names = ("computer", "keyboard", "mouse", "monitor")
    positions = rng.uniform(-1, 1, size=(4, 2))
    ctx = simple_ctx([positions.tolist()], names=names, table=table)
    out, _ = weighted_knn(ctx, "t", "laptop")
    # convex combination bound: inside the anchors' bounding box
    assert positions[:, 0].min() - 1e-9 <= out[0] <= positions[:, 0].max() + 1e-9
    assert positions[:, 1].min() - 1e-9 <= out[1] <= positions[:, 1].max() + 1e-9


def test_nearest_neighbour_offsets_away_from_centroid(table):
    names = ("computer", "plant")
    positions = [[1.0, 0.0], [-1.0, 0.0]]  # centroid at origin
    ctx = simple_ctx([positions], names=names, table=table)
    out = nearest_neighbour(ctx, "t", "laptop")
    radius = ctx.train.registry["t"].object_radius
    np.testing.assert_allclose(out, [1.0 + radius, 0.0], atol=1e-12)


def test_scene_projection_covers_new_roster(table):
    ds, _ = generate_dataset(3, 1, templates=["abstract1", "abstract2"])
    ctx = BaselineContext(ds, ds.users[0].scenes, table=table)
    out = knn_scene_projection(ctx, "abstract1", "abstract2")
    assert out.shape == (len(ds.registry["abstract2"].object_names), 2)


# -- copies ---------------------------------------------------------------------


def test_positive_example_is_verbatim():
    ctx = simple_ctx([[[0.3, 0.4], [0.5, -0.6]]])
    out = user_copy("positive_example", ctx, "t")
    np.testing.assert_array_equal(out, [[0.3, 0.4], [0.5, -0.6]])


def test_random_user_single_candidate():
    ctx = simple_ctx([[[0.1, 0.1], [0.2, 0.2]]])
    out = user_copy("random_user", ctx, "t")
    np.testing.assert_array_equal(out, [[0.1, 0.1], [0.2, 0.2]])


def test_random_user_seed_deterministic():
    trains = [[[0.0, 0.0], [1.0, 1.0]], [[2.0, 2.0], [3.0, 3.0]],
              [[4.0, 4.0], [5.0, 5.0]]]
    a = user_copy("random_user", simple_ctx(trains, seed=9), "t")
    b = user_copy("random_user", simple_ctx(trains, seed=9), "t")
    np.testing.assert_array_equal(a, b)


def test_copy_errors_distinguish_kinds():
    ctx = simple_ctx([[[0.0, 0.0], [1.0, 1.0]]])
    ctx.user_scenes = []
    with pytest.raises(DataError, match="test user"):
        user_copy("positive_example", ctx, "t")
    empty = simple_ctx([[[0.0, 0.0], [1.0, 1.0]]])
    empty.train = Dataset([], empty.train.registry)
    with pytest.raises(DataError, match="training user"):
        user_copy("random_user", empty, "t")


def test_unknown_kinds_rejected():
    ctx = simple_ctx([[[0.0, 0.0], [1.0, 1.0]]])
    with pytest.raises(ValueError):
        static_position("median", ctx, "t")
    with pytest.raises(ValueError):
        knn_place("farthest", ctx, "t")
    with pytest.raises(ValueError):
        user_copy("best_user", ctx, "t")
