"""Tests for the synthetic world generator and its exact oracles."""

import math

import numpy as np
import pytest

from uqtangle import (
    WorldConfig,
    amb_score,
    annotator_variance_map,
    decompose,
    generate_world,
    oracle_convergence_check,
    oracle_decompose,
    sample_dataset,
    sampling_error,
)
from uqtangle.errors import BadConfigError


def small_world(seed=0, **overrides):
    defaults = dict(classes=2, height=8, width=8, instances=4, perturbation_scale=0.3)
    defaults.update(overrides)
    return generate_world(WorldConfig(seed=seed, **defaults))


class TestGenerateWorld:
    def test_shapes(self):
        world = small_world(classes=3, height=5, width=7, instances=4)
        assert world.annotator_dist.shape == (3, 5, 7)
        assert world.instance_fields.shape == (4, 3, 5, 7)

    def test_fields_on_simplex(self):
        world = small_world(classes=3)
        np.testing.assert_allclose(world.annotator_dist.sum(axis=0), 1.0, atol=1e-12)
        np.testing.assert_allclose(world.instance_fields.sum(axis=1), 1.0, atol=1e-12)

    def test_deterministic_in_seed(self):
        a = small_world(seed=42)
        b = small_world(seed=42)
        np.testing.assert_array_equal(a.annotator_dist, b.annotator_dist)
        np.testing.assert_array_equal(a.instance_fields, b.instance_fields)

    def test_seeds_differ(self):
        assert not np.array_equal(small_world(seed=1).annotator_dist,
                                  small_world(seed=2).annotator_dist)

    def test_zero_perturbation_collapses_instances(self):
        world = small_world(perturbation_scale=0.0)
        for k in range(1, world.config.instances):
            np.testing.assert_array_equal(world.instance_fields[k], world.instance_fields[0])

    def test_bad_config(self):
        with pytest.raises(BadConfigError):
            generate_world(WorldConfig(classes=1))
        with pytest.raises(BadConfigError):
            generate_world(WorldConfig(perturbation_scale=-0.1))
        with pytest.raises(BadConfigError):
            generate_world(WorldConfig(temperature=0.0))


class TestSampleDataset:
    def test_counts_roles_and_splits(self):
        ds = sample_dataset(small_world(), images=6, annotators=3, au_samples=2,
                            val_images=2, ood_fraction=0.5)
        assert len(ds.images) == 8
        assert sum(1 for im in ds.images if im.role == "val") == 2
        splits = [im.split for im in ds.images if im.role == "test"]
        assert splits.count("id") == 3 and splits.count("ood:shift") == 3

    def test_grid_shapes(self):
        ds = sample_dataset(small_world(instances=5), images=1, annotators=4, au_samples=3)
        image = ds.images[0]
        assert image.grid.probs.shape == (5, 3, 2, 8, 8)
        assert image.annotations.shape == (4, 8, 8)

    def test_categorical_grids_are_one_hot(self):
        ds = sample_dataset(small_world(), images=1, annotators=1, au_samples=2)
        probs = ds.images[0].grid.probs
        assert set(np.unique(probs)) == {0.0, 1.0}

    def test_softmax_mode_single_sample_of_fields(self):
        ds = sample_dataset(small_world(), images=1, annotators=1, au_samples=9,
                            ood_fraction=0.0, mode="softmax")
        image = ds.images[0]
        assert image.grid.samples == 1
        np.testing.assert_array_equal(image.grid.probs[:, 0], image.fields)

    def test_soft_mode_off_vertex(self):
        ds = sample_dataset(small_world(), images=1, annotators=1, au_samples=3, mode="soft")
        probs = ds.images[0].grid.probs
        np.testing.assert_allclose(probs.sum(axis=2), 1.0, atol=1e-9)
        assert probs.max() < 1.0

    def test_one_hot_truth_gives_identical_annotations(self):
        world = small_world(temperature=1e-3)  # near one-hot truth field
        ds = sample_dataset(world, images=1, annotators=5, au_samples=1)
        ann = ds.images[0].annotations
        hard = (world.annotator_dist.argmax(axis=0) == ann).mean()
        assert hard > 0.99

    def test_reproducible(self):
        a = sample_dataset(small_world(seed=3), images=3, annotators=2, au_samples=2)
        b = sample_dataset(small_world(seed=3), images=3, annotators=2, au_samples=2)
        for ia, ib in zip(a.images, b.images):
            np.testing.assert_array_equal(ia.grid.probs, ib.grid.probs)
            np.testing.assert_array_equal(ia.annotations, ib.annotations)

    def test_ood_images_use_shifted_fields(self):
        world = small_world(ood_shift=1.0)
        ds = sample_dataset(world, images=2, annotators=1, au_samples=1, ood_fraction=0.5)
        id_image = next(im for im in ds.images if im.split == "id")
        ood_image = next(im for im in ds.images if im.split != "id")
        np.testing.assert_array_equal(id_image.fields, world.instance_fields)
        assert not np.array_equal(ood_image.fields, world.instance_fields)

    def test_bad_args(self):
        with pytest.raises(BadConfigError):
            sample_dataset(small_world(), images=0, annotators=1, au_samples=1)
        with pytest.raises(BadConfigError):
            sample_dataset(small_world(), images=1, annotators=1, au_samples=1, mode="weird")


class TestOracles:
    def test_zero_perturbation_zero_eu(self):
        ds = sample_dataset(small_world(perturbation_scale=0.0), images=1,
                            annotators=1, au_samples=1, ood_fraction=0.0, mode="softmax")
        maps = oracle_decompose(ds.images[0])
        np.testing.assert_array_equal(maps.eu, 0.0)

    def test_matches_decompose_worked_example(self):
        ds = sample_dataset(small_world(), images=1, annotators=1, au_samples=1,
                            ood_fraction=0.0, mode="softmax")
        image = ds.images[0]
        sampled = decompose(image.grid)
        exact = oracle_decompose(image)
        np.testing.assert_allclose(sampled.au, exact.au, atol=1e-12)
        np.testing.assert_allclose(sampled.tu, exact.tu, atol=1e-12)
        np.testing.assert_allclose(sampled.eu, exact.eu, atol=1e-12)

    def test_uniform_fields_reach_log_c(self):
        world = small_world(temperature=1e9, perturbation_scale=0.0)  # flat truth
        ds = sample_dataset(world, images=1, annotators=1, au_samples=1,
                            ood_fraction=0.0, mode="softmax")
        maps = oracle_decompose(ds.images[0])
        np.testing.assert_allclose(maps.au, math.log(2), atol=1e-9)
        np.testing.assert_allclose(maps.tu, math.log(2), atol=1e-9)

    def test_perturbation_scale_strictly_increases_eu(self):
        for seed in range(5):
            means = []
            for scale in (0.1, 0.3, 0.6):
                world = small_world(seed=seed, height=16, width=16,
                                    instances=10, perturbation_scale=scale)
                ds = sample_dataset(world, images=1, annotators=1, au_samples=1,
                                    ood_fraction=0.0, mode="softmax")
                means.append(float(oracle_decompose(ds.images[0]).eu.mean()))
            assert means[0] < means[1] < means[2]

    def test_convergence_error_shrinks(self):
        world = small_world(height=16, width=16, instances=8)
        curve = oracle_convergence_check(world, [1, 16, 256], images=4)
        errors = [e for _, e in curve]
        assert errors[0] > errors[1] > errors[2]

    def test_convergence_below_threshold_at_1024(self):
        world = small_world(height=16, width=16, instances=8)
        curve = oracle_convergence_check(world, [1024], images=2)
        assert curve[0][1] <= 0.02

    def test_deterministic_mode_zero_error(self):
        world = small_world(height=16, width=16, instances=8)
        curve = oracle_convergence_check(world, [1, 32], images=2, mode="softmax")
        assert all(e == 0.0 for _, e in curve)

    def test_sampling_error_at_32(self):
        world = small_world(height=16, width=16, instances=32)
        ds = sample_dataset(world, images=4, annotators=1, au_samples=32,
                            val_images=0, ood_fraction=0.0)
        assert sampling_error(ds) <= 0.02


class TestDisentangledConstruction:
    def test_aleatoric_map_correlates_with_annotator_variance(self):
        world = small_world(height=32, width=32, instances=10)
        ds = sample_dataset(world, images=10, annotators=64, au_samples=1,
                            ood_fraction=0.0, mode="softmax")
        var_maps = [annotator_variance_map(im.annotations, 2) for im in ds.images]
        au_maps = [oracle_decompose(im).au for im in ds.images]
        eu_maps = [oracle_decompose(im).eu for im in ds.images]
        au_corr = amb_score(var_maps, au_maps)
        eu_corr = amb_score(var_maps, eu_maps)
        assert au_corr > eu_corr
        assert au_corr > 0.5

    def test_no_shift_means_no_detection_signal(self, tmp_path):
        from uqtangle import AggregationStrategy, RunConfig, load_manifest, run_pipeline, write_dataset

        world = small_world(seed=7, height=16, width=16, instances=10,
                            perturbation_scale=0.25, ood_shift=0.0)
        ds = sample_dataset(world, images=400, annotators=2, au_samples=10, val_images=0)
        manifest = load_manifest(write_dataset(ds, tmp_path / "null"))
        config = RunConfig(tasks=("oodd",), aggregation=AggregationStrategy("mean"))
        bundle = run_pipeline(manifest, config)
        row = bundle.task_results[0]
        for value in (row.u_au, row.u_eu, row.u_tu):
            assert abs(value - 0.5) <= 0.05

    def test_platt_calibrated_total_uncertainty(self, tmp_path):
        from uqtangle import RunConfig, load_manifest, run_pipeline, write_dataset

        # softmax mode, one annotator: per-pixel correctness is Bernoulli in the
        # known truth field, so a logistic in the total uncertainty calibrates well
        world = generate_world(WorldConfig(seed=3, classes=2, height=64, width=64,
                                           instances=10, perturbation_scale=0.15))
        ds = sample_dataset(world, images=30, annotators=1, au_samples=1,
                            val_images=10, ood_fraction=0.0, mode="softmax")
        assert sum(im.fields[0, 0].size for im in ds.images if im.role == "test") >= 100_000
        manifest = load_manifest(write_dataset(ds, tmp_path / "cal"))
        bundle = run_pipeline(manifest, RunConfig(tasks=("cal",)))
        cal = next(r for r in bundle.task_results if r.task == "cal")
        assert cal.u_tu <= 0.03
