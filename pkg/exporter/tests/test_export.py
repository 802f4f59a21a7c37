"""Exporter tests: spec handling, output validation, engine round-trip."""

import json
import warnings

import numpy as np
import pytest

from segexport import (
    ExportSpec,
    ImageSpec,
    LabelRangeError,
    ModelOutputShapeError,
    SimplexViolationError,
    SpecError,
    export_predictions,
    load_spec,
    validate_probabilities,
)
from segexport.cli import main as cli_main

from toy_model import make_checkpoint


def write_inputs(root, *, images=2, annotators=2, classes=2, size=6, rng=None):
    rng = rng or np.random.default_rng(0)
    image_entries = []
    for i in range(images):
        image_id = f"img_{i:03d}"
        np.save(root / f"{image_id}.npy", rng.normal(size=(size, size)))
        ann_names = []
        for r in range(annotators):
            name = f"{image_id}_ann{r}.npy"
            np.save(root / name, rng.integers(0, classes, size=(size, size)))
            ann_names.append(name)
        image_entries.append({
            "image_id": image_id,
            "path": f"{image_id}.npy",
            "split": "id" if i % 2 == 0 else "ood:blur",
            "role": "test",
            "annotation_paths": ann_names,
        })
    return image_entries


def write_spec(root, *, instances=2, samples=3, entry="toy_model:build_predictor",
               eu_mode="ensemble_checkpoints", images=2, annotators=2, classes=2,
               checkpoints=None, extra=None):
    if checkpoints is None:
        checkpoints = []
        for m in range(instances if eu_mode == "ensemble_checkpoints" else 1):
            name = f"ckpt{m}.npz"
            make_checkpoint(root / name, [0.0, 1.0 + 0.3 * m], [0.2, -0.1 * m])
            checkpoints.append(name)
    payload = {
        "schema_version": 1,
        "dataset_name": "toy",
        "entry_point": entry,
        "eu_mode": eu_mode,
        "instances": instances,
        "samples": samples,
        "class_count": classes,
        "checkpoints": checkpoints,
        "output_dir": "exported",
        "seed": 0,
        "images": write_inputs(root, images=images, annotators=annotators, classes=classes),
    }
    payload.update(extra or {})
    spec_path = root / "spec.json"
    spec_path.write_text(json.dumps(payload, indent=2))
    return spec_path


class TestSpec:
    def test_load_and_validate(self, tmp_path):
        spec = load_spec(write_spec(tmp_path))
        assert spec.instances == 2 and spec.samples == 3
        assert len(spec.images) == 2
        assert spec.images[0].path.is_file()

    def test_none_mode_forces_single_instance(self, tmp_path):
        path = write_spec(tmp_path, eu_mode="none", instances=2, checkpoints=["c.npz"])
        make_checkpoint(tmp_path / "c.npz", [0.0, 1.0], [0.0, 0.0])
        with pytest.raises(SpecError):
            load_spec(path)

    def test_ensemble_needs_matching_checkpoints(self, tmp_path):
        path = write_spec(tmp_path, instances=3, checkpoints=["only.npz"])
        make_checkpoint(tmp_path / "only.npz", [0.0, 1.0], [0.0, 0.0])
        with pytest.raises(SpecError):
            load_spec(path)

    def test_unknown_key_rejected(self, tmp_path):
        path = write_spec(tmp_path, extra={"surprise": True})
        with pytest.raises(SpecError):
            load_spec(path)

    def test_bad_entry_point(self, tmp_path):
        spec = load_spec(write_spec(tmp_path, entry="toy_model:missing_factory"))
        with pytest.raises(SpecError):
            spec.build_predictor()


class TestValidateProbabilities:
    def test_accepts_and_renormalizes(self):
        probs = np.full((2, 4, 4), 0.5) * (1.0 + 5e-5)
        out = validate_probabilities(probs, 2, "ctx")
        np.testing.assert_allclose(out.sum(axis=0), 1.0, atol=1e-12)

    def test_wrong_shape(self):
        with pytest.raises(ModelOutputShapeError):
            validate_probabilities(np.full((4, 4), 0.5), 2, "ctx")
        with pytest.raises(ModelOutputShapeError):
            validate_probabilities(np.full((3, 4, 4), 1 / 3), 2, "ctx")

    def test_logits_suggest_softmax(self):
        logits = np.zeros((2, 4, 4))
        logits[1] = 3.0
        with pytest.raises(ModelOutputShapeError) as err:
            validate_probabilities(logits, 2, "ctx")
        assert "softmax" in str(err.value)

    def test_simplex_violation_beyond_tolerance(self):
        probs = np.full((2, 4, 4), 0.5)
        probs[0] += 5e-4
        with pytest.raises(SimplexViolationError):
            validate_probabilities(probs, 2, "ctx")

    def test_nan_rejected(self):
        probs = np.full((2, 2, 2), 0.5)
        probs[0, 0, 0] = np.nan
        with pytest.raises(ModelOutputShapeError):
            validate_probabilities(probs, 2, "ctx")


class TestExport:
    def test_grid_files_and_manifest(self, tmp_path):
        spec = load_spec(write_spec(tmp_path, instances=2, samples=3))
        manifest_path = export_predictions(spec)
        manifest = json.loads(manifest_path.read_text())
        assert manifest["class_count"] == 2
        assert len(manifest["images"]) == 2
        grid = np.load(tmp_path / "exported" / manifest["images"][0]["grid_path"])
        assert grid.shape == (2, 3, 2, 6, 6)
        assert grid.dtype == np.float32

    def test_single_instance_single_sample(self, tmp_path):
        spec = load_spec(write_spec(tmp_path, eu_mode="none", instances=1, samples=1))
        manifest_path = export_predictions(spec)
        manifest = json.loads(manifest_path.read_text())
        grid = np.load(tmp_path / "exported" / manifest["images"][0]["grid_path"])
        assert grid.shape[:2] == (1, 1)

    def test_deterministic(self, tmp_path):
        spec_path = write_spec(tmp_path)
        first = export_predictions(load_spec(spec_path))
        blobs = {p.name: p.read_bytes() for p in sorted((tmp_path / "exported" / "grids").iterdir())}
        again = export_predictions(load_spec(spec_path))
        assert first == again
        for p in sorted((tmp_path / "exported" / "grids").iterdir()):
            assert blobs[p.name] == p.read_bytes()

    def test_logit_model_rejected_with_hint(self, tmp_path):
        spec = load_spec(write_spec(tmp_path, entry="toy_model:build_logit_predictor"))
        with pytest.raises(ModelOutputShapeError) as err:
            export_predictions(spec)
        assert "softmax" in str(err.value)

    def test_label_out_of_range(self, tmp_path):
        spec_path = write_spec(tmp_path)
        bad = np.full((6, 6), 7)
        np.save(tmp_path / "img_000_ann0.npy", bad)
        with pytest.raises(LabelRangeError):
            export_predictions(load_spec(spec_path))

    def test_single_annotator_warns(self, tmp_path):
        spec = load_spec(write_spec(tmp_path, annotators=1))
        with pytest.warns(UserWarning, match="ambiguity"):
            export_predictions(spec)

    def test_cli(self, tmp_path, capsys):
        spec_path = write_spec(tmp_path)
        assert cli_main(["export", "--spec", str(spec_path)]) == 0
        assert (tmp_path / "exported" / "manifest.json").is_file()
        assert "manifest.json" in capsys.readouterr().out


class TestEngineIntegration:
    """Secondary acceptance: the engine ingests exports without warnings."""

    def test_two_checkpoint_export_round_trip(self, tmp_path):
        uq = pytest.importorskip("uqtangle")
        spec = load_spec(write_spec(tmp_path, instances=2, samples=3))
        predictor = spec.build_predictor()

        # exporter-side reference mean over instances and samples, float64
        from segexport.export import predict_grid
        reference = {}
        for image_spec in spec.images:
            grid = predict_grid(spec, predictor, image_spec)
            reference[image_spec.image_id] = grid.mean(axis=(0, 1))

        manifest_path = export_predictions(spec)
        with warnings.catch_warnings():
            warnings.simplefilter("error")  # zero validation warnings allowed
            manifest = uq.load_manifest(manifest_path)
            for entry in manifest.images:
                engine_grid = uq.read_grid(entry.grid_path)
                assert engine_grid.probs.shape == (2, 3, 2, 6, 6)
                engine_bma = uq.bma(engine_grid)
                np.testing.assert_allclose(
                    engine_bma, reference[entry.image_id], atol=1e-6,
                )

    def test_float32_round_trip_bit_exact(self, tmp_path):
        uq = pytest.importorskip("uqtangle")
        spec = load_spec(write_spec(tmp_path, instances=1, samples=2,
                                    eu_mode="dropout_forward_passes", checkpoints=["c0.npz"]))
        make_checkpoint(tmp_path / "c0.npz", [0.0, 1.0], [0.0, 0.0])
        predictor = spec.build_predictor()
        from segexport.export import predict_grid
        in_memory = predict_grid(spec, predictor, spec.images[0]).astype(np.float32)
        manifest_path = export_predictions(spec)
        manifest = json.loads(manifest_path.read_text())
        stored = np.load(tmp_path / "exported" / manifest["images"][0]["grid_path"])
        np.testing.assert_array_equal(stored, in_memory)
        # engine holds float64 internally but sees exactly these float32 values
        entry = uq.load_manifest(manifest_path).images[0]
        loaded = uq.read_grid(entry.grid_path)
        assert loaded.probs.dtype == np.float64

    def test_exported_dataset_runs_through_pipeline(self, tmp_path):
        uq = pytest.importorskip("uqtangle")
        spec = load_spec(write_spec(tmp_path, images=6, annotators=3))
        manifest = uq.load_manifest(export_predictions(spec))
        config = uq.RunConfig(model_id="toy", tasks=("oodd", "amb"),
                              aggregation=uq.AggregationStrategy("mean"),
                              eu_instances=2, au_samples=3)
        bundle = uq.run_pipeline(manifest, config)
        assert {(r.task, r.split) for r in bundle.task_results} >= {("oodd", "all")}
