"""Per-feature gradient arrows in reduced spaces and their APCC averages."""

import numpy as np
import pytest

from latentprobe import (
    FeatureTable,
    JoinedDataset,
    ParameterError,
    Reduced2D,
    ValidationError,
    apcc_average_table,
    gradient_field,
    run_reducer,
)


def planar(coords, feats_map, ids=None):
    """Reduced2D plus a FeatureTable over the given coordinate rows."""
    n = len(coords)
    ids = ids or [f"u{i}" for i in range(n)]
    red = Reduced2D(coords=np.asarray(coords, float), reducer="pca", seed=0,
                    ids=list(ids))
    names = list(feats_map)
    values = np.column_stack([feats_map[k] for k in names])
    feats = FeatureTable(ids=list(ids), styles=["S"] * n, names=names,
                         values=values)
    return red, feats


class TestGradientField:
    def test_planted_plane_recovered(self):
        rng = np.random.default_rng(0)
        coords = rng.standard_normal((200, 2))
        f = 3.0 * coords[:, 0] + 4.0 * coords[:, 1] + 1.0
        red, feats = planar(coords, {"f": f})
        field = gradient_field(red, feats, ["f"], task="t")
        arrow = field.arrows[0]
        assert np.allclose(arrow.gradient, [3.0, 4.0], atol=1e-9)
        assert np.allclose(arrow.direction, [0.6, 0.8], atol=1e-9)
        assert np.linalg.norm(arrow.direction) == pytest.approx(1.0, abs=1e-9)
        assert arrow.apcc >= 1.0 - 1e-9
        assert not arrow.low_confidence

    def test_noise_feature_low_confidence(self):
        rng = np.random.default_rng(1)
        coords = rng.standard_normal((2000, 2))
        noise = rng.standard_normal(2000)
        red, feats = planar(coords, {"noise": noise})
        arrow = gradient_field(red, feats, ["noise"]).arrows[0]
        assert arrow.apcc < 0.1
        assert arrow.low_confidence

    def test_rotation_equivariance(self):
        rng = np.random.default_rng(2)
        coords = rng.standard_normal((300, 2))
        f = 1.5 * coords[:, 0] - 2.5 * coords[:, 1] + 0.25
        theta = 0.9
        R = np.array([[np.cos(theta), -np.sin(theta)],
                      [np.sin(theta), np.cos(theta)]])
        red_a, feats = planar(coords, {"f": f})
        red_b, _ = planar(coords @ R.T, {"f": f})
        ga = gradient_field(red_a, feats, ["f"]).arrows[0]
        gb = gradient_field(red_b, feats, ["f"]).arrows[0]
        assert np.allclose(gb.gradient, R @ ga.gradient, atol=1e-6)
        # unit directions agree up to the export sign convention
        assert abs(np.dot(gb.direction, R @ ga.direction)) == pytest.approx(
            1.0, abs=1e-6)

    def test_id_alignment_reorders_features(self):
        coords = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0],
                           [4.0, 0.0], [5.0, 0.0]])
        ids = [f"u{i}" for i in range(6)]
        f = 2.0 * coords[:, 0]
        red = Reduced2D(coords=coords, reducer="pca", seed=0, ids=ids)
        perm = [4, 2, 0, 5, 1, 3]
        feats = FeatureTable(ids=[ids[i] for i in perm], styles=["S"] * 6,
                             names=["f"], values=f[perm][:, None])
        arrow = gradient_field(red, feats, ["f"]).arrows[0]
        assert np.allclose(arrow.gradient, [2.0, 0.0], atol=1e-9)

    def test_missing_id_rejected(self):
        red, feats = planar(np.zeros((5, 2)) + np.arange(5)[:, None], {"f": np.arange(5.0)})
        red.ids = ["u0", "u1", "u2", "u3", "zz"]
        with pytest.raises(ValidationError):
            gradient_field(red, feats, ["f"])

    def test_positional_length_mismatch_rejected(self):
        coords = np.random.default_rng(3).standard_normal((10, 2))
        red = Reduced2D(coords=coords, reducer="pca", seed=0)
        feats = FeatureTable(ids=["a", "b"], styles=["S", "S"], names=["f"],
                             values=np.zeros((2, 1)))
        with pytest.raises(ValidationError):
            gradient_field(red, feats, ["f"])

    def test_empty_selection_rejected(self):
        red, feats = planar(np.random.default_rng(4).standard_normal((8, 2)),
                            {"f": np.arange(8.0)})
        with pytest.raises(ParameterError):
            gradient_field(red, feats, [])

    def test_unknown_feature_rejected(self):
        red, feats = planar(np.random.default_rng(5).standard_normal((8, 2)),
                            {"f": np.arange(8.0)})
        with pytest.raises(ParameterError):
            gradient_field(red, feats, ["g"])

    def test_degenerate_feature_skipped_with_warning(self, caplog):
        rng = np.random.default_rng(6)
        coords = rng.standard_normal((30, 2))
        red, feats = planar(coords, {"flat": np.full(30, 2.0),
                                     "ok": coords[:, 0]})
        with caplog.at_level("WARNING"):
            field = gradient_field(red, feats, ["flat", "ok"])
        assert field.features() == ["ok"]
        assert any("zero variance" in r.message for r in caplog.records)

    def test_mostly_missing_feature_skipped(self, caplog):
        rng = np.random.default_rng(7)
        coords = rng.standard_normal((30, 2))
        sparse = np.full(30, np.nan)
        sparse[:3] = [1.0, 2.0, 3.0]
        red, feats = planar(coords, {"sparse": sparse, "ok": coords[:, 1]})
        with caplog.at_level("WARNING"):
            field = gradient_field(red, feats, ["sparse", "ok"])
        assert field.features() == ["ok"]


def factor_dataset(task, n=300, d=6, seed=0, noise=0.05):
    """Latent space dominated by 2 factors; features linear in the factors."""
    rng = np.random.default_rng(seed)
    F = rng.standard_normal((n, 2))
    A = rng.standard_normal((2, d))
    X = F @ A + noise * rng.standard_normal((n, d))
    feats = np.column_stack([
        F @ [1.0, 0.5],
        F @ [-0.5, 2.0],
        F @ [1.0, -1.0],
    ])
    return JoinedDataset(
        task=task,
        utterance_ids=[f"u{i}" for i in range(n)],
        embeddings=X,
        features=feats,
        feature_names=["fa", "fb", "fc"],
        styles=["S"] * n,
    )


class TestApccAverageTable:
    def test_layout_and_range(self):
        ds = {"t1": factor_dataset("t1", seed=1),
              "t2": factor_dataset("t2", seed=2)}
        table = apcc_average_table(ds, ["pca", "tsne"], ["fa", "fb"],
                                   perplexity=20.0)
        assert table.corner == "task"
        assert table.row_labels == ["t1", "t2"]
        assert table.col_labels == ["pca", "tsne"]
        assert np.all((table.values >= 0.0) & (table.values <= 1.0))

    def test_pca_column_high_for_planar_features(self):
        ds = {"t": factor_dataset("t", seed=3)}
        table = apcc_average_table(ds, ["pca"], ["fa", "fb", "fc"])
        assert table.cell("t", "pca") >= 0.95

    def test_cells_match_independent_recomputation(self):
        ds = {"t1": factor_dataset("t1", seed=4),
              "t2": factor_dataset("t2", seed=5)}
        selected = ["fa", "fc"]
        table = apcc_average_table(ds, ["pca", "umap"], selected,
                                   seed=9, n_neighbors=12)
        for task in ds:
            d = ds[task]
            feats = FeatureTable(ids=list(d.utterance_ids),
                                 styles=list(d.styles),
                                 names=list(d.feature_names),
                                 values=d.features)
            for reducer in ("pca", "umap"):
                red = run_reducer(reducer, d.embeddings, seed=9,
                                  n_neighbors=12, ids=list(d.utterance_ids))
                fld = gradient_field(red, feats, selected, task=task)
                mean = float(np.mean([a.apcc for a in fld.arrows]))
                assert table.cell(task, reducer) == pytest.approx(mean, abs=1e-12)

    def test_cache_used_and_filled(self):
        ds = {"t": factor_dataset("t", seed=6)}
        cache = {}
        a = apcc_average_table(ds, ["pca"], ["fa"], reduced_cache=cache)
        assert ("t", "pca") in cache
        b = apcc_average_table(ds, ["pca"], ["fa"], reduced_cache=cache)
        assert np.array_equal(a.values, b.values)

    def test_parameter_errors(self):
        ds = {"t": factor_dataset("t", seed=7)}
        with pytest.raises(ParameterError):
            apcc_average_table({}, ["pca"], ["fa"])
        with pytest.raises(ParameterError):
            apcc_average_table(ds, [], ["fa"])
        with pytest.raises(ParameterError):
            apcc_average_table(ds, ["pca"], [])
