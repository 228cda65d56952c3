import numpy as np
import pytest

from rasid import bench
from rasid.detector import DetectorConfig, run
from rasid.synth import generate_synthetic, office_geometry
from rasid.trace import DataError, Interval, LabelTrack, synchronize


@pytest.fixture(scope="module")
def short_office():
    tr, lab = bench.office_trace(3, duration_s=1200, motion=((600, 900),))
    return tr, lab, bench.train_profiles(tr)


class TestHarness:
    def test_static_basic_matches_frozen_run(self, short_office):
        tr, _, profiles = short_office
        res = run(tr, profiles, DetectorConfig(update=False))
        grid = synchronize(tr)
        alarms = bench.static_basic_alarms(grid, [profiles[s].u for s in grid.streams], 5)
        m = np.isin(grid.times, res.times)
        np.testing.assert_array_equal(alarms[m], res.alarms("basic"))
        assert not alarms[:4].any()

    def test_training_silence_check(self):
        lab = LabelTrack((Interval(0, 100, "silence"), Interval(100, 200, "motion")))
        bench.check_training_silence(lab, 0, 100)
        bench.check_training_silence(None, 0, 150)
        with pytest.raises(DataError):
            bench.check_training_silence(lab, 0, 150)

    def test_rasid_reports(self, short_office):
        tr, lab, profiles = short_office
        reps = bench.rasid_reports(tr, lab, profiles)
        assert list(reps) == ["basic", "updated", "refined"]
        n = reps["basic"].tp + reps["basic"].fp + reps["basic"].tn + reps["basic"].fn
        assert n == 1200 - 120

    def test_baselines_scored_on_same_ticks(self, short_office):
        tr, lab, _ = short_office
        reps = bench.baseline_reports(tr, lab)
        for r in reps.values():
            assert r.tp + r.fp + r.tn + r.fn == 1200 - 120

    def test_parametric_bounds_from_training(self, short_office):
        tr, _, _ = short_office
        grid = synchronize(tr)
        _, models = bench.parametric_alarms(grid)
        train = grid.rss[0, grid.times < 120]
        assert models[0].sigma2 == pytest.approx(np.var(train, ddof=1))

    def test_sweep_rows(self, short_office):
        tr, lab, _ = short_office
        rows = bench.sweep_l_alpha(tr, lab, [3, 5], [0.05, 0.01])
        assert [(r["l"], r["alpha"]) for r in rows] == [(3, 0.05), (3, 0.01), (5, 0.05),
                                                         (5, 0.01)]
        rows = bench.sweep_l_update(tr, lab, [10, 15])
        assert [r["l_update"] for r in rows] == [10, 15]

    def test_params_from_dict(self):
        p = bench.BaselineParams.from_dict({"ma_long": 30, "mle_trace": "x"})
        assert p.ma_long == 30 and p.ma_short == 5


class TestOfficeMle:
    def test_zone_tagged_schedule(self):
        cfg = bench.office_mle_config(2012)
        assert cfg.seed == 3012
        assert [s.loc for s in cfg.schedule] == list(bench.OFFICE_ZONES)
        tr, lab = generate_synthetic(cfg, office_geometry())
        assert not lab.has_motion(0, 600)
        assert tr.k == 12
