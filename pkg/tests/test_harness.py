import csv
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mimolab import classic, config, harness, recipes
from mimolab.harness import ExperimentSpec
from mimolab.signal import MimoConfig

import oracles


def mlsd_fn(cfg):
    return lambda y, H, v: classic.mlsd_detect(y, H, cfg.constellation)


class TestEvaluate:
    def test_noiseless_mlsd_is_error_free(self):
        cfg = MimoConfig.make(2, 2, "QPSK")
        curve = harness.evaluate({"mlsd": mlsd_fn(cfg)}, cfg, [math.inf], max_trials=5000, chunk_size=1000)["mlsd"]
        p = curve.points[0]
        assert p.bit_errors == 0 and p.trials == 5000 and p.exhausted and p.ber == 0.0

    def test_deterministic_and_worker_independent(self):
        cfg = MimoConfig.make(2, 2, "QPSK")
        detectors = {"zf": lambda y, H, v: classic.demap_hard(classic.zf_equalize(y, H).x_soft, cfg.constellation)}
        kw = dict(seed=4, min_bit_errors=50, max_trials=50_000, chunk_size=2000)
        a = harness.evaluate(detectors, cfg, [0.0, 4.0], **kw)["zf"]
        b = harness.evaluate(detectors, cfg, [0.0, 4.0], **kw)["zf"]
        c = harness.evaluate(detectors, cfg, [0.0, 4.0], workers=3, **kw)["zf"]
        assert a.rows() == b.rows() == c.rows()

    def test_paired_streams(self):
        cfg = MimoConfig.make(2, 4, "QPSK")
        for chunk in (0, 3):
            first = harness.draw_chunk(cfg, 9, 5.0, chunk, 100)
            again = harness.draw_chunk(cfg, 9, 5.0, chunk, 100)
            for u, v in zip(first, again):
                assert np.array_equal(u, v)
        other = harness.draw_chunk(cfg, 9, 6.0, 0, 100)
        assert not np.array_equal(first[0], other[0])

    def test_stopping_rule(self):
        cfg = MimoConfig.make(1, 1, "BPSK")
        curve = harness.evaluate({"mf": lambda y, H, v: classic.demap_hard(classic.mf_equalize(y, H).x_soft,
                                                                          cfg.constellation)},
                                 cfg, [0.0], min_bit_errors=300, chunk_size=500)["mf"]
        p = curve.points[0]
        assert p.bit_errors >= 300 and not p.exhausted
        assert p.trials % 500 == 0 and p.bit_errors - 300 < 500

    def test_ber_and_ser_identity(self):
        cfg = MimoConfig.make(2, 2, "QPSK")
        curve = harness.evaluate({"mlsd": mlsd_fn(cfg)}, cfg, [2.0], min_bit_errors=100, chunk_size=1000)["mlsd"]
        p = curve.points[0]
        assert p.ber == p.bit_errors / (p.trials * 4)
        assert p.ser == p.symbol_errors / (p.trials * 2)
        assert p.symbol_errors <= p.bit_errors <= 2 * p.symbol_errors
        lo, hi = p.interval
        assert lo <= p.ber <= hi

    def test_channel_set_restricts_draws(self):
        cfg = MimoConfig.make(2, 2, "QPSK")
        chset = harness.channel_set_for(cfg, 3, 1)
        H, _, _ = harness.draw_chunk(cfg, 0, 0.0, 0, 200, chset)
        matches = [min(np.max(np.abs(h - c)) for c in chset.H) for h in H]
        assert max(matches) == 0
        with pytest.raises(ValueError):
            harness.channel_set_for(cfg, 0, 1)


class TestSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            ExperimentSpec("a", "MLSD", 2, 2, snr_db=[])
        with pytest.raises(ValueError):
            ExperimentSpec("a", "MLSD", 2, 2, snr_db=[0, 2, 2])
        with pytest.raises(ValueError):
            ExperimentSpec("a", "SPHERE", 2, 2)
        assert ExperimentSpec("a", "mlsd", 2, 2).min_bit_errors >= 100

    def test_ini_round_trip(self, tmp_path):
        specs = [ExperimentSpec("a", "VQ", 2, 4, "QPSK", [0.0, 2.5], seed=3, channel_set_size=16,
                                params={"mapping": "CLNN", "iterations": "100"}),
                 ExperimentSpec("b", "MLSD", 2, 2, "BPSK", [1.0])]
        path = tmp_path / "x.ini"
        config.write_specs(path, specs)
        back = config.read_specs(path)
        assert [s.to_dict() for s in back] == [s.to_dict() for s in specs]

    def test_parse_snr(self):
        assert config.parse_snr("0:10:2") == [0, 2, 4, 6, 8, 10]
        assert config.parse_snr("1, 3 5") == [1, 3, 5]
        assert config.parse_snr("-4:4:0.5")[1] == -3.5


class TestSweep:
    def test_partial_failure(self, tmp_path):
        specs = [ExperimentSpec("ok", "MLSD", 2, 2, snr_db=[4.0], min_bit_errors=20, chunk_size=1000),
                 ExperimentSpec("bad", "VQ", 2, 2, snr_db=[4.0], params={"bundle": str(tmp_path / "missing")})]
        result = harness.sweep(specs, tmp_path / "out")
        assert set(result.curves) == {"ok"} and set(result.errors) == {"bad"}
        assert (tmp_path / "out" / "ok.csv").exists()
        assert "error" in result.manifest["experiments"][1]

    def test_duplicate_names(self):
        s = ExperimentSpec("a", "MLSD", 2, 2)
        with pytest.raises(ValueError):
            harness.sweep([s, s])
        with pytest.raises(ValueError):
            harness.sweep([])

    def test_csv_header_and_replay(self, tmp_path):
        specs = [ExperimentSpec("zf", "ZF", 2, 4, snr_db=[0.0, 3.0], min_bit_errors=50, chunk_size=2000),
                 ExperimentSpec("vq", "VQ", 2, 2, "BPSK", [0.0, 3.0], min_bit_errors=20, chunk_size=1000,
                                params={"iterations": "30", "hidden": "16"})]
        out = tmp_path / "run"
        harness.sweep(specs, out)
        with open(out / "zf.csv") as f:
            rows = list(csv.reader(f))
        assert tuple(rows[0]) == harness.CSV_HEADER and len(rows) == 3
        assert harness.replay(out / "manifest.json") == {"zf": True, "vq": True}

    def test_quick_recipe_runs(self, tmp_path):
        specs = recipes.recipe("fig6", "quick")
        assert len(specs) == 6
        result = harness.sweep(specs, tmp_path)
        assert not result.errors and len(result.curves) == 6
        assert len(list(tmp_path.glob("*.csv"))) == 6

    def test_recipes_build(self):
        for fig in recipes.FIGURES:
            for scale in recipes.SCALES:
                specs = recipes.recipe(fig, scale)
                assert specs and len({s.name for s in specs}) == len(specs)
        with pytest.raises(ValueError):
            recipes.recipe("fig3")


class TestReferenceCurves:
    @pytest.mark.parametrize("snr", [0.0, 3.0, 7.5, 10.0, 20.0])
    def test_mrc_closed_form_vs_integral(self, snr):
        assert harness.mrc_ber_bpsk(snr) == pytest.approx(oracles.mrc_ber_integral(snr), rel=1e-6)

    def test_mrc_single_branch(self):
        g = 10.0
        assert harness.mrc_ber_bpsk(10.0, 1) == pytest.approx(0.5 * (1 - math.sqrt(g / (1 + g))))

    def test_clopper_pearson(self):
        lo, hi = harness.clopper_pearson(0, 10)
        assert lo == 0 and hi == pytest.approx(1 - 0.025 ** (1 / 10))
        lo, hi = harness.clopper_pearson(10, 10)
        assert hi == 1 and lo == pytest.approx(0.025 ** (1 / 10))

    @given(st.integers(1, 500), st.integers(0, 500))
    def test_clopper_pearson_brackets(self, n, k):
        k = min(k, n)
        lo, hi = harness.clopper_pearson(k, n)
        assert 0 <= lo <= k / n <= hi <= 1

    def test_snr_at_ber(self):
        snr = [0.0, 2.0, 4.0]
        ber = [1e-1, 1e-2, 1e-4]
        assert harness.snr_at_ber(snr, ber, 1e-2) == pytest.approx(2.0)
        assert harness.snr_at_ber(snr, ber, 1e-3) == pytest.approx(3.0)
        assert math.isnan(harness.snr_at_ber(snr, ber, 1e-6))
        assert harness.snr_at_ber(snr, ber, 0.5) == -math.inf

    @given(st.floats(-10, 10), st.floats(0.1, 5), st.floats(0.5, 3))
    def test_snr_at_ber_on_exact_exponential(self, s0, step, slope):
        snr = s0 + step * np.arange(5)
        ber = 10 ** (-slope * np.arange(5) - 1)
        target = 10 ** (-slope * 2.5 - 1)
        assert harness.snr_at_ber(snr, ber, target) == pytest.approx(s0 + 2.5 * step, abs=1e-9)
