import math

import numpy as np
import pytest

from rdcnn import bench, dcnn
from rdcnn.bench import ExperimentConfig, ResultRecord
from rdcnn.errors import ConfigurationError, ContractError
from rdcnn.signal_model import measure_snr


def tiny(**kw):
    base = dict(signals_per_iteration=3, iterations=2, harmonic_counts=(5,), input_snr_db=(0.0, 15.0),
                dcnn_layer_counts=(2,), ar_window_lens=(20,), train_cfg=dcnn.TrainConfig(epochs=100))
    base.update(kw)
    return ExperimentConfig(**base)


def csv_text(records):
    return "\n".join(r.csv_row() for r in records)


def rec(value, method="ar", hyper=20, snr=0.0, n_harm=5):
    return ResultRecord(method, hyper, n_harm, snr, value, 30.0, 1.0, 0, 0)


class TestConfig:
    def test_defaults(self):
        cfg = ExperimentConfig()
        assert (cfg.sample_rate_hz, cfg.duration_s, cfg.iterations, cfg.signals_per_iteration) == (2000.0, 2.0, 100, 100)
        assert cfg.dcnn_layer_counts == (2, 3, 4, 5) and cfg.ar_window_lens == (20, 40, 60, 80, 100)

    @pytest.mark.parametrize("field,value", [("harmonic_counts", ()), ("kernel_len", 0), ("methods", ("x",)),
                                             ("f0_range_hz", (60.0, 20.0)), ("rational_method", "nope")])
    def test_invalid(self, field, value):
        with pytest.raises(ConfigurationError):
            tiny(**{field: value})

    def test_nyquist_guard_on_range(self):
        with pytest.raises(ConfigurationError):
            tiny(harmonic_counts=(20,), f0_range_hz=(48.0, 50.0))


class TestRealizations:
    def test_deterministic(self):
        cfg = tiny()
        a = bench.generate_realization(cfg, 1, 2, 5, 0.0)
        b = bench.generate_realization(cfg, 1, 2, 5, 0.0)
        assert a[2].samples.tobytes() == b[2].samples.tobytes()

    def test_f0_range_and_draw_ranges(self):
        cfg = tiny()
        for i in range(30):
            spec, _, _ = bench.generate_realization(cfg, 0, i, 10, 0.0)
            assert 20.0 <= spec.fundamental_hz <= 50.0
            assert [h.order for h in spec.harmonics] == list(range(1, 11))
            assert all(0 <= h.amplitude <= 1 and 0 <= h.phase <= math.pi / 2 for h in spec.harmonics)

    def test_nyquist_redraw(self):
        cfg = tiny(harmonic_counts=(20,), f0_range_hz=(45.0, 50.0))
        for i in range(40):
            spec, _, _ = bench.generate_realization(cfg, 0, i, 20, 0.0)
            assert 20 * spec.fundamental_hz < 0.95 * 1000.0

    def test_noise_shared_across_snr(self):
        cfg = tiny()
        _, clean, lo = bench.generate_realization(cfg, 0, 1, 5, 0.0)
        _, _, hi = bench.generate_realization(cfg, 0, 1, 5, 15.0)
        n_lo, n_hi = lo.samples - clean.samples, hi.samples - clean.samples
        np.testing.assert_allclose(n_lo * 10 ** (-15 / 20), n_hi, rtol=1e-9, atol=1e-12)


class TestRuns:
    def test_record_counts(self):
        cfg = tiny(dcnn_layer_counts=(2, 3), ar_window_lens=(10, 20))
        recs = bench.run_all(cfg, workers=1)
        per = cfg.iterations * cfg.signals_per_iteration * len(cfg.input_snr_db) * len(cfg.harmonic_counts)
        counts = {m: sum(r.method == m for r in recs) for m in bench.METHODS}
        assert counts == {"rdcnn": per * 2, "dcnn_per_obs": per * 2, "ar": per * 2}

    def test_reproducible_and_parallel_equals_serial(self):
        cfg = tiny()
        a = bench.run_all(cfg, workers=1)
        b = bench.run_all(cfg, workers=1)
        c = bench.run_all(cfg, workers=2)
        assert csv_text(a) == csv_text(b) == csv_text(c)

    def test_fair_shared_realizations(self):
        recs = bench.run_all(tiny(), workers=1)
        f0 = {}
        for r in recs:
            f0.setdefault((r.iteration, r.index, r.n_harmonics), set()).add(r.f0_hz)
        assert all(len(v) == 1 for v in f0.values())

    def test_single_signal_is_training_only(self):
        recs = bench.run_rdcnn(tiny(signals_per_iteration=1), workers=1)
        assert recs and all(r.index == 0 and r.scale_s == 1.0 for r in recs)

    def test_shared_f0_matches_frozen_per_observation(self):
        cfg = tiny(f0_range_hz=(30.0, 30.0), input_snr_db=(0.0,), iterations=1)
        recs = bench.run_rdcnn(cfg, workers=1)
        spec0, _, noisy0 = bench.generate_realization(cfg, 0, 0, 5, 0.0)
        model = bench._train(cfg, noisy0, 2, spec0.fundamental_hz, 0, 0, 5, 0, 2)
        for r in recs:
            assert r.scale_s == 1.0
            _, clean, noisy = bench.generate_realization(cfg, 0, r.index, 5, 0.0)
            expect = measure_snr(clean, dcnn.denoise(model, noisy), skip=model.warmup)
            assert r.output_snr_db == pytest.approx(expect, rel=1e-12)

    def test_noiseless_ar_is_exact(self):
        cfg = tiny(input_snr_db=(200.0,), methods=("ar",))
        recs = bench.run_ar(cfg, workers=1)
        assert min(r.output_snr_db for r in recs) > 60.0

    def test_divergence_recorded_not_raised(self):
        cfg = tiny(methods=("rdcnn", "dcnn_per_obs"), train_cfg=dcnn.TrainConfig(learning_rate=100.0, epochs=20))
        recs = bench.run_all(cfg, workers=1)
        assert recs and all(r.failed for r in recs)
        rows = bench.aggregate(recs)
        assert all(row.n_failed > 0 and row.count == 0 for row in rows if row.view == "pooled")

    def test_rdcnn_records_scale(self):
        recs = bench.run_rdcnn(tiny(), workers=1)
        train_f0 = {(r.iteration, r.input_snr_db): r.f0_hz for r in recs if r.index == 0}
        for r in recs:
            assert r.scale_s == pytest.approx(r.f0_hz / train_f0[(r.iteration, r.input_snr_db)], rel=1e-12)

    def test_workers_from_environment(self, monkeypatch):
        monkeypatch.setenv("RDCNN_THREADS", "3")
        assert bench.resolve_workers() == 3
        monkeypatch.setenv("RDCNN_THREADS", "0")
        assert bench.resolve_workers() >= 1
        monkeypatch.setenv("RDCNN_THREADS", "x")
        with pytest.raises(ConfigurationError):
            bench.resolve_workers()


class TestAggregate:
    def test_empty(self):
        with pytest.raises(ContractError):
            bench.aggregate([])

    def test_single_record(self):
        rows = bench.aggregate([rec(4.2)])
        hyper = [r for r in rows if r.view == "hyper"][0]
        assert (hyper.mean, hyper.std, hyper.count) == (4.2, 0.0, 1)

    def test_infinite_excluded(self):
        rows = bench.aggregate([rec(2.0), rec(4.0), rec(math.inf)])
        hyper = [r for r in rows if r.view == "hyper"][0]
        assert (hyper.mean, hyper.count, hyper.n_infinite) == (3.0, 2, 1)
        np.testing.assert_allclose(hyper.std, 1.0)

    def test_views(self):
        recs = [rec(1.0, hyper=20, snr=0.0), rec(5.0, hyper=100, snr=0.0),
                rec(9.0, hyper=20, snr=15.0), rec(8.0, hyper=100, snr=15.0)]
        rows = bench.aggregate(recs)
        views = {v: [r for r in rows if r.view == v] for v in ("hyper", "pooled", "best_cell", "best_overall")}
        assert len(views["hyper"]) == 4 and len(views["pooled"]) == 2
        assert [(r.input_snr_db, r.hyper) for r in views["best_cell"]] == [(0.0, "100"), (15.0, "20")]
        # mean over the SNR range: M=100 gives 6.5, M=20 gives 5.0
        assert {r.hyper for r in views["best_overall"]} == {"100"}
        pooled0 = views["pooled"][0]
        assert pooled0.mean == 3.0 and pooled0.count == 2

    def test_csv_round_trip(self, tmp_path):
        recs = bench.run_ar(tiny(methods=("ar",)), workers=1)
        bench.write_results(recs, tmp_path / "r.csv")
        # floats are stored with 9 significant digits, so compare the serialized form
        assert [r.csv_row() for r in bench.read_results(tmp_path / "r.csv")] == [r.csv_row() for r in recs]
        assert (tmp_path / "r.csv").read_text().splitlines()[0] == bench.RESULT_HEADER
        rows = bench.aggregate(recs)
        bench.write_summary(rows, tmp_path / "s.csv")
        back = bench.read_summary(tmp_path / "s.csv")
        assert [r.csv_row() for r in back] == [r.csv_row() for r in rows]
