"""Scene generator: geometry goldens, jitter/noise laws, dataset plumbing."""

import os

import numpy as np
import pytest

from pulsenet.core import KernelConfig
from pulsenet.scenes import (GRID, JITTER_AMPLITUDE, N_CLASSES, N_PIXELS,
                             DelayMap, NoiseSpec, UnknownClass,
                             centroid_baseline_accuracy, class_footprint,
                             class_name, compose_scene, decode_times,
                             encode_delays, apply_jitter, generate_dataset,
                             inject_noise, load_dataset, render_scene,
                             save_dataset, write_class_table)

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


def _golden_lines(path):
    with open(path, encoding="ascii") as fh:
        return fh.read().splitlines()


class TestGeometryGoldens:
    def test_composed_templates_match_golden(self):
        """All 30 class depth compositions, frozen once after calibration."""
        lines = _golden_lines(os.path.join(DATA_DIR, "golden_templates.txt"))
        assert len(lines) == N_CLASSES
        for class_id, line in enumerate(lines):
            got = " ".join(f"{v:.17g}"
                           for v in compose_scene(class_id).delays.ravel())
            assert got == line, f"class {class_id} drifted from golden"

    def test_rendered_road_matches_golden(self):
        lines = _golden_lines(os.path.join(DATA_DIR, "golden_road_render.txt"))
        dmap = render_scene(1, jitter_seed=0)
        got = " ".join(f"{v:.17g}" for v in dmap.delays.ravel())
        assert [got] == lines

    def test_render_is_deterministic(self):
        for class_id in (0, 7, 29):
            a = render_scene(class_id, jitter_seed=123)
            b = render_scene(class_id, jitter_seed=123)
            np.testing.assert_array_equal(a.delays, b.delays)


class TestCatalog:
    def test_thirty_distinct_named_classes(self):
        names = [class_name(c) for c in range(N_CLASSES)]
        assert len(set(names)) == N_CLASSES

    def test_unknown_class_rejected(self):
        for bad in (-1, N_CLASSES, 1000):
            with pytest.raises(UnknownClass):
                compose_scene(bad)
            with pytest.raises(UnknownClass):
                class_footprint(bad)
            with pytest.raises(UnknownClass):
                class_name(bad)

    def test_all_classes_render_in_bounds(self):
        for class_id in range(N_CLASSES):
            d = render_scene(class_id, jitter_seed=class_id).delays
            assert d.shape == (GRID, GRID)
            assert (d >= 0.0).all() and (d <= 1.0).all()
            assert (d < 1.0).any()

    def test_class_table_file(self, tmp_path):
        path = tmp_path / "classes.csv"
        write_class_table(path)
        rows = path.read_text().splitlines()
        assert rows[0] == "id,name"
        assert len(rows) == 1 + N_CLASSES
        assert rows[1].startswith("0,") and rows[-1].startswith("29,")

    def test_delay_map_validation(self):
        with pytest.raises(ValueError):
            DelayMap(delays=np.zeros((4, 4)), label=0)
        with pytest.raises(ValueError):
            DelayMap(delays=np.full((GRID, GRID), 1.5), label=0)


class TestJitter:
    def test_zero_amplitude_is_identity(self):
        base = compose_scene(9)
        out = apply_jitter(base, seed=5, amplitude=0.0)
        np.testing.assert_array_equal(out.delays, base.delays)

    def test_object_jitter_moves_only_footprint(self):
        class_id = 11
        base = compose_scene(class_id)
        mask = class_footprint(class_id)
        out = apply_jitter(base, seed=77)
        np.testing.assert_array_equal(out.delays[~mask], base.delays[~mask])
        deltas = out.delays[mask] - base.delays[mask]
        # one shared offset on the whole footprint (no clamping hit here)
        assert np.ptp(deltas) < 1e-15
        assert abs(deltas[0]) <= JITTER_AMPLITUDE

    def test_road_class_jitter_shifts_whole_map(self):
        base = compose_scene(1)
        out = apply_jitter(base, seed=3)
        deltas = out.delays - base.delays
        assert np.ptp(deltas) < 1e-15

    def test_jitter_offsets_are_mean_centered(self):
        base = compose_scene(2)
        cell = (10, 8)  # mid-road pixel, never clamped at +-0.05
        offsets = [apply_jitter(base, seed=s).delays[cell] - base.delays[cell]
                   for s in range(1000)]
        assert abs(float(np.mean(offsets))) < 0.005

    def test_negative_amplitude_rejected(self):
        with pytest.raises(ValueError):
            apply_jitter(compose_scene(0), seed=0, amplitude=-0.1)

    def test_label_preserved(self):
        assert apply_jitter(compose_scene(17), seed=9).label == 17


class TestNoise:
    def test_zero_range_is_identity(self):
        dmap = render_scene(4, jitter_seed=1)
        out = inject_noise(dmap, NoiseSpec(upper=0.0, seed=8))
        np.testing.assert_array_equal(out.delays, dmap.delays)

    def test_noise_never_decreases_and_stays_bounded(self):
        dmap = render_scene(23, jitter_seed=2)
        for upper in (0.1, 0.33, 0.5):
            out = inject_noise(dmap, NoiseSpec(upper=upper, seed=13))
            assert (out.delays >= dmap.delays - 1e-15).all()
            assert (out.delays <= np.minimum(dmap.delays + upper, 1.0) + 1e-15).all()

    def test_mean_perturbation_matches_uniform_law(self):
        # on an all-zero map nothing clamps, so the sample mean must sit
        # at upper/2 over many draws
        zero = DelayMap(delays=np.zeros((GRID, GRID)), label=1)
        upper = 0.5
        means = [float(np.mean(inject_noise(zero, NoiseSpec(upper, seed=s)).delays))
                 for s in range(1000)]
        assert abs(float(np.mean(means)) - upper / 2.0) < 0.01

    def test_invalid_bounds_rejected(self):
        with pytest.raises(ValueError):
            NoiseSpec(upper=-0.1)

    def test_noise_is_seeded(self):
        dmap = render_scene(6, jitter_seed=4)
        a = inject_noise(dmap, NoiseSpec(0.2, seed=9))
        b = inject_noise(dmap, NoiseSpec(0.2, seed=9))
        c = inject_noise(dmap, NoiseSpec(0.2, seed=10))
        np.testing.assert_array_equal(a.delays, b.delays)
        assert (a.delays != c.delays).any()


class TestEncoding:
    def test_roundtrip_identity(self):
        rng = np.random.default_rng(0)
        delays = rng.uniform(0.0, 1.0, (GRID, GRID))
        for tau in (0.25, 1.0, 3.0):
            cfg = KernelConfig(tau_syn=tau)
            back = decode_times(encode_delays(delays, cfg), cfg)
            np.testing.assert_allclose(back, delays.ravel(), atol=1e-12)

    def test_zero_map_encodes_to_simultaneous_spikes(self):
        times = encode_delays(np.zeros((GRID, GRID)))
        assert times.shape == (N_PIXELS,)
        assert (times == 0.0).all()

    def test_unit_tau_is_identity_scale(self):
        delays = np.full((GRID, GRID), 0.37)
        times = encode_delays(delays, KernelConfig(tau_syn=1.0))
        np.testing.assert_allclose(times, 0.37)

    def test_smaller_tau_stretches_times(self):
        delays = np.full((GRID, GRID), 0.5)
        times = encode_delays(delays, KernelConfig(tau_syn=0.25))
        np.testing.assert_allclose(times, 2.0)


class TestDatasetGeneration:
    def test_counts_and_balance(self):
        train, test = generate_dataset(3, 2, 0.1, seed=11)
        assert len(train) == 3 * N_CLASSES and len(test) == 2 * N_CLASSES
        assert (np.bincount(train.labels, minlength=N_CLASSES) == 3).all()
        assert (np.bincount(test.labels, minlength=N_CLASSES) == 2).all()
        for ds in (train, test):
            assert (ds.delays >= 0.0).all() and (ds.delays <= 1.0).all()

    def test_generation_is_deterministic(self):
        a_train, a_test = generate_dataset(2, 1, 0.2, seed=5)
        b_train, b_test = generate_dataset(2, 1, 0.2, seed=5)
        np.testing.assert_array_equal(a_train.delays, b_train.delays)
        np.testing.assert_array_equal(a_test.delays, b_test.delays)

    def test_train_and_test_never_share_patterns(self):
        train, test = generate_dataset(4, 2, 0.1, seed=21)
        flat_tr = train.delays.reshape(len(train), N_PIXELS)
        flat_te = test.delays.reshape(len(test), N_PIXELS)
        collisions = sum((flat_tr == row).all(axis=1).any() for row in flat_te)
        assert collisions == 0

    def test_bad_counts_rejected(self):
        with pytest.raises(ValueError):
            generate_dataset(0, 1, 0.1, seed=0)
        with pytest.raises(ValueError):
            generate_dataset(1, 0, 0.1, seed=0)

    def test_times_shape_and_scale(self):
        train, _ = generate_dataset(1, 1, 0.0, seed=2)
        times = train.times(KernelConfig(tau_syn=0.5))
        assert times.shape == (N_CLASSES, N_PIXELS)
        np.testing.assert_allclose(
            times, train.delays.reshape(-1, N_PIXELS) * 2.0)


class TestDatasetFiles:
    def test_save_load_roundtrip(self, tmp_path):
        train, _ = generate_dataset(2, 1, 0.33, seed=9)
        path = tmp_path / "ds.txt"
        save_dataset(train, path)
        back = load_dataset(path)
        np.testing.assert_array_equal(back.delays, train.delays)
        np.testing.assert_array_equal(back.labels, train.labels)
        assert back.noise_upper == train.noise_upper
        assert back.seed == train.seed

    def test_save_is_byte_stable(self, tmp_path):
        train, _ = generate_dataset(1, 1, 0.1, seed=4)
        p1, p2 = tmp_path / "a.txt", tmp_path / "b.txt"
        save_dataset(train, p1)
        save_dataset(train, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_wrong_format_rejected(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("not a dataset\n" * 7)
        with pytest.raises(ValueError):
            load_dataset(path)


def test_centroid_baseline_clears_floor():
    """Nearest-centroid on raw delays must reach 80% at the easiest noise."""
    train, test = generate_dataset(20, 5, 0.1, seed=7)
    assert centroid_baseline_accuracy(train, test) >= 0.80
