import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mimolab import analysis, nn, vq
from mimolab.signal import MimoConfig, calibrate_noise, generate_dataset


class TestCompressionBound:
    def test_no_channel_entropy(self):
        r = analysis.compression_bound(4, 4, 0.0)
        assert r.rate_bound == 1.0 and r.rate_bound_energy == 1.0 and r.distortion_bound == 0.0

    def test_worked_example(self):
        r = analysis.compression_bound(4, 4, 2.0)
        assert r.rate_bound == pytest.approx(0.2)
        assert r.rate_bound_energy == pytest.approx(1 / 9)
        assert r.distortion_bound == pytest.approx(0.8)

    def test_monotone_grid(self):
        Ls = (2, 4, 8, 16)
        for sigma in (0.5, 1.0, 2.0):
            table = np.array([[analysis.compression_bound(M, L, sigma).rate_bound for L in Ls]
                              for M in range(1, 17)])
            assert np.all(np.diff(table, axis=0) < 0)
            assert np.all(np.diff(table, axis=1) > 0)
            assert np.all((table > 0) & (table <= 1))

    @given(st.integers(1, 16), st.sampled_from([2, 4, 8, 16]), st.floats(0, 10), st.floats(0.01, 10))
    def test_decreasing_in_entropy(self, M, L, s, ds):
        a = analysis.compression_bound(M, L, s).rate_bound
        b = analysis.compression_bound(M, L, s + ds).rate_bound
        assert b < a

    def test_invalid(self):
        with pytest.raises(ValueError):
            analysis.compression_bound(0, 4, 1.0)
        with pytest.raises(ValueError):
            analysis.compression_bound(2, 4, -1.0)


def linear_detector(cfg, seed=0):
    return vq.build_detector(cfg, "NN", hidden=(), rng=np.random.default_rng(seed), dtype=np.float64)


class TestQuantizationLoss:
    def test_decomposition_identity(self):
        cfg = MimoConfig.make(2, 2, "QPSK")
        rep = analysis.empirical_quantization_loss(linear_detector(cfg), 10_000, calibrate_noise(5, cfg),
                                                   np.random.default_rng(1))
        assert rep.decomposition.max_identity_error() < 1e-10
        assert rep.mean_loss == pytest.approx(rep.decomposition.total.mean())
        assert np.all(rep.decomposition.signal_part >= 0) and np.all(rep.decomposition.csi_part >= 0)

    def test_signal_mask(self):
        mask = analysis.signal_mask(2, 2)
        assert mask.tolist() == [False] * 4 + [True] * 2 + [False] * 4 + [True] * 2

    def test_perfect_codebook(self, rng):
        s = rng.normal(size=(50, 12))
        assigned, dec = analysis.quantize(s, s, 2, 2)
        assert np.array_equal(assigned, np.arange(50))
        assert np.all(dec.total == 0)

    def test_nearest_assignment(self, rng):
        s = rng.normal(size=(200, 5))
        a = rng.normal(size=(7, 5))
        assigned, _ = analysis.quantize(s, a)
        brute = [min(range(7), key=lambda j: float(np.sum((v - a[j]) ** 2))) for v in s]
        assert assigned.tolist() == brute

    def test_fitted_anchors_beat_random(self):
        cfg = MimoConfig.make(2, 2, "QPSK")
        noise = calibrate_noise(5, cfg)
        det = linear_detector(cfg)
        train = generate_dataset(np.random.default_rng(2), cfg, noise, det.mapping, 20_000)
        fitted = analysis.fit_anchors(train.s, train.labels, cfg.J)
        random = np.random.default_rng(3).normal(size=fitted.shape)
        fit_loss = analysis.empirical_quantization_loss(det, 5000, noise, np.random.default_rng(4), anchors=fitted)
        rnd_loss = analysis.empirical_quantization_loss(det, 5000, noise, np.random.default_rng(4), anchors=random)
        assert fit_loss.mean_loss < rnd_loss.mean_loss

    def test_hidden_representation(self):
        cfg = MimoConfig.make(2, 2, "BPSK")
        det = vq.build_detector(cfg, "NN", hidden=(8,), rng=np.random.default_rng(0))
        rep = analysis.empirical_quantization_loss(det, 500, calibrate_noise(5, cfg), np.random.default_rng(1),
                                                   representation="hidden")
        assert rep.decomposition is None and np.isfinite(rep.mean_loss) and rep.mean_loss >= 0
        with pytest.raises(ValueError):
            analysis.empirical_quantization_loss(det, 10, calibrate_noise(5, cfg), np.random.default_rng(1))

    def test_non_nn_mapping_rejected(self):
        cfg = MimoConfig.make(2, 2, "QPSK")
        det = vq.build_detector(cfg, "CLNN", hidden=())
        with pytest.raises(ValueError):
            analysis.empirical_quantization_loss(det, 10, calibrate_noise(5, cfg), np.random.default_rng(0))
        with pytest.raises(ValueError):
            analysis.empirical_quantization_loss(vq.build_detector(cfg, "NN", "ZF", hidden=()), 10,
                                                 calibrate_noise(5, cfg), np.random.default_rng(0))


class TestComplexity:
    def test_mlsd_linear_in_receive_antennas(self):
        counts = [analysis.count_operations("MLSD", MimoConfig.make(2, N, "QPSK")).detection_macs for N in (2, 4, 8)]
        assert counts[1] == 2 * counts[0] and counts[2] == 2 * counts[1]
        # partial products over the candidate tree, then one metric per 16 candidates, per receive antenna
        assert counts[0] == 2 * (4 + 16 + 16)

    @pytest.mark.parametrize("scheme,Ms", [("QPSK", range(2, 6)), ("BPSK", range(4, 7))])
    def test_mlsd_grows_by_alphabet_size(self, scheme, Ms):
        cfg = MimoConfig.make(1, 8, scheme)
        for M in Ms:
            a = analysis.count_operations("MLSD", cfg.with_antennas(M)).detection_macs
            b = analysis.count_operations("MLSD", cfg.with_antennas(M + 1)).detection_macs
            assert b / a == pytest.approx(cfg.L, rel=0.05)

    def test_mf_doubles_with_n(self):
        a = analysis.count_operations("MF", MimoConfig.make(4, 8, "QPSK")).detection_macs
        b = analysis.count_operations("MF", MimoConfig.make(4, 16, "QPSK")).detection_macs
        assert b == pytest.approx(2 * a, rel=0.01)

    def test_inversions_recorded(self):
        cfg = MimoConfig.make(3, 6, "QPSK")
        assert analysis.count_operations("ZF", cfg).inversion_dims == (3,)
        assert analysis.count_operations("LMMSE-VQ", cfg, hidden=(8,)).inversion_dims == (3,)
        assert analysis.count_operations("MLSD", cfg).inversion_dims == ()

    def test_vq_training_linear_in_batch(self):
        cfg = MimoConfig.make(2, 4, "QPSK")
        t = [analysis.count_operations("VQ", cfg, hidden=(32,), batch_size=b).training_macs[0] for b in (100, 200)]
        assert t[1] / t[0] == pytest.approx(2.0, rel=0.02)

    def test_network_detection_cost(self):
        cfg = MimoConfig.make(2, 4, "QPSK")
        r = analysis.count_operations("VQ", cfg, hidden=(8,))
        assert r.detection_macs == 24 * 8 + 8 * 16

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            analysis.count_operations("SPHERE", MimoConfig.make(2, 2, "QPSK"))

    def test_csv(self, tmp_path):
        cfg = MimoConfig.make(2, 4, "QPSK")
        rows = [analysis.count_operations(k, cfg, hidden=(8,)) for k in analysis.DETECTOR_KINDS]
        path = tmp_path / "c.csv"
        analysis.write_csv(path, rows)
        with open(path) as f:
            back = list(csv.DictReader(f))
        assert [r["detector"] for r in back] == list(analysis.DETECTOR_KINDS)
        assert int(back[3]["detection_macs"]) == rows[3].detection_macs
        analysis.write_csv(tmp_path / "b.csv", [analysis.compression_bound(2, 4, 1.0)])
        assert "distortion_bound" in (tmp_path / "b.csv").read_text().splitlines()[0]
        with pytest.raises(ValueError):
            analysis.write_csv(tmp_path / "e.csv", [])


def test_last_hidden_matches_forward_prefix(rng):
    net = nn.DenseNetwork.build([6, 5, 3], "softmax", rng=rng, dtype=np.float64)
    s = rng.normal(size=(4, 6))
    h = analysis.last_hidden(net, s)
    assert np.allclose(h, np.maximum(s @ net.layers[0].W + net.layers[0].b, 0))
