import json
import math

import numpy as np
import pytest

from polarfec.polar import bhattacharyya_bec, select_info_set, write_spec
from polarfec.sim import SimRecord, SweepConfig, confidence_interval, run_sweep


@pytest.fixture(scope="module")
def spec_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("specs") / "n6.json"
    write_spec(path, select_info_set(bhattacharyya_bec(0.5, 6), 32),
               channel_param=0.5, seed=0)
    return str(path)


def small_cfg(spec_file, **kw):
    base = dict(
        scheme="polar-bp",
        channel="bec",
        grid=(0.2, 0.35),
        spec_path=spec_file,
        min_error_blocks=15,
        max_frames=3000,
        seed=7,
        batch=128,
    )
    base.update(kw)
    return SweepConfig(**base)


class TestConfidenceInterval:
    def test_zero_errors_lower_bound_zero(self):
        lo, hi = confidence_interval(0, 10 ** 6)
        assert lo == 0.0
        assert hi > 0.0

    @pytest.mark.parametrize("k,n", [(1, 10), (5, 50), (100, 10 ** 4)])
    def test_contains_the_point_estimate(self, k, n):
        lo, hi = confidence_interval(k, n)
        assert lo <= k / n <= hi

    def test_matches_normal_approximation_at_scale(self):
        k, n = 100, 10 ** 8
        lo, hi = confidence_interval(k, n)
        p = k / n
        half_normal = 2.5758293 * math.sqrt(p * (1 - p) / n)
        half_wilson = (hi - lo) / 2
        assert abs(half_wilson - half_normal) / half_normal < 0.25

    def test_input_validation(self):
        with pytest.raises(ValueError):
            confidence_interval(5, 0)
        with pytest.raises(ValueError):
            confidence_interval(7, 3)


class TestSweepConfig:
    def test_rejects_unknown_scheme(self):
        with pytest.raises(ValueError):
            SweepConfig(scheme="turbo", channel="bec", grid=(0.1,))

    def test_rejects_empty_grid(self):
        with pytest.raises(ValueError):
            SweepConfig(scheme="polar-bp", channel="bec", grid=())

    def test_rejects_zero_error_blocks(self):
        with pytest.raises(ValueError):
            SweepConfig(scheme="polar-bp", channel="bec", grid=(0.1,),
                        min_error_blocks=0)

    def test_digest_stable(self, spec_file):
        assert small_cfg(spec_file).digest() == small_cfg(spec_file).digest()
        assert small_cfg(spec_file).digest() != small_cfg(spec_file, seed=8).digest()


class TestRunSweep:
    def test_noiseless_point_is_error_free(self, spec_file):
        cfg = small_cfg(spec_file, grid=(0.0,), max_frames=300)
        rec, = run_sweep(cfg)
        assert rec.ber == 0.0
        assert rec.bler == 0.0
        assert rec.frames == 300

    def test_records_are_consistent(self, spec_file):
        recs = run_sweep(small_cfg(spec_file))
        for rec in recs:
            assert rec.ber == rec.bit_errors / (rec.frames * rec.info_bits_per_frame)
            assert rec.bler == rec.block_errors / rec.frames
            assert rec.ci99_lo <= rec.ber <= rec.ci99_hi
            assert 0 <= rec.ani <= 60

    def test_deterministic_reruns(self, spec_file):
        a = run_sweep(small_cfg(spec_file))
        b = run_sweep(small_cfg(spec_file))
        for x, y in zip(a, b):
            xd, yd = vars(x).copy(), vars(y).copy()
            xd.pop("wall_time_s"), yd.pop("wall_time_s")
            assert xd == yd

    def test_stop_rule_reaches_error_budget(self, spec_file):
        cfg = small_cfg(spec_file, grid=(0.45,), min_error_blocks=10, max_frames=50_000)
        rec, = run_sweep(cfg)
        assert rec.block_errors >= 10
        assert rec.frames < 50_000

    def test_monotone_waterfall_bec(self, spec_file):
        cfg = small_cfg(spec_file, grid=(0.2, 0.3, 0.4), min_error_blocks=25,
                        max_frames=6000)
        recs = run_sweep(cfg)
        bers = [r.ber for r in recs]
        assert bers == sorted(bers)

    def test_sc_scheme_and_awgn_channel(self, spec_file):
        cfg = small_cfg(spec_file, scheme="polar-sc", channel="awgn",
                        grid=(2.0, 4.0), min_error_blocks=10, max_frames=2000)
        recs = run_sweep(cfg)
        assert recs[0].ber >= recs[1].ber
        assert all(r.ani == 1.0 for r in recs)

    def test_resume_skips_finished_points(self, spec_file, tmp_path):
        out = tmp_path / "sweep"
        cfg = small_cfg(spec_file)
        first = run_sweep(cfg, out_csv=f"{out}.csv", out_jsonl=f"{out}.jsonl")
        lines_after_first = len((tmp_path / "sweep.jsonl").read_text().splitlines())
        second = run_sweep(cfg, out_csv=f"{out}.csv", out_jsonl=f"{out}.jsonl")
        lines_after_second = len((tmp_path / "sweep.jsonl").read_text().splitlines())
        assert lines_after_second == lines_after_first
        for x, y in zip(first, second):
            assert vars(x) == vars(y)  # identical including wall time: reloaded

    def test_jsonl_and_csv_outputs(self, spec_file, tmp_path):
        out = tmp_path / "o"
        recs = run_sweep(small_cfg(spec_file), out_csv=f"{out}.csv",
                         out_jsonl=f"{out}.jsonl")
        rows = [json.loads(l) for l in (tmp_path / "o.jsonl").read_text().splitlines()]
        assert len(rows) == len(recs)
        assert all(r["kind"] == "record" for r in rows)
        header = (tmp_path / "o.csv").read_text().splitlines()[0]
        assert header.startswith("scheme,channel,param,frames")

    def test_worker_pool_changes_no_statistic(self, spec_file, monkeypatch):
        cfg = small_cfg(spec_file, grid=(0.4,), min_error_blocks=12, max_frames=2000)
        monkeypatch.delenv("POLARFEC_WORKERS", raising=False)
        solo, = run_sweep(cfg)
        monkeypatch.setenv("POLARFEC_WORKERS", "2")
        pooled, = run_sweep(cfg)
        a, b = vars(solo).copy(), vars(pooled).copy()
        a.pop("wall_time_s"), b.pop("wall_time_s")
        assert a == b

    def test_polar_bp_bec_waterfall_at_depth_15(self, tmp_path):
        """The long rate-1/2 code's erasure sweep: error rates rise cleanly
        with the erasure rate and the clean end of the sweep stays clean."""
        from polarfec.polar import bhattacharyya_bec, select_info_set, write_spec

        path = tmp_path / "n15.json"
        write_spec(path, select_info_set(bhattacharyya_bec(0.5, 15), 1 << 14))
        cfg = SweepConfig(
            scheme="polar-bp",
            channel="bec",
            grid=(0.42, 0.45, 0.48),
            spec_path=str(path),
            min_error_blocks=15,
            max_frames=600,
            seed=5,
            batch=64,
        )
        recs = run_sweep(cfg)
        bers = [r.ber for r in recs]
        blers = [r.bler for r in recs]
        assert bers == sorted(bers) and bers[0] < bers[-1]
        assert blers == sorted(blers)
        # a waterfall, not a floor: the clean end sits orders of magnitude
        # below the noisy end over this narrow parameter range
        assert bers[0] < bers[-1] / 50
