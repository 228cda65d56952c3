import numpy as np
import pytest

from rasid.synth import (MotionSegment, SynthConfig, generate_synthetic, office_config,
                         office_geometry, schedule_labels)
from rasid.trace import MOTION, SILENCE, SiteGeometry, StreamId

S = StreamId("AP1", "MP1")
LINE = SiteGeometry({"AP1": (0.0, 5.0), "MP1": (10.0, 5.0)}, (S,), 1.5, (0, 0, 10, 10))


class TestConfig:
    def test_factor_must_exceed_one(self):
        with pytest.raises(ValueError):
            SynthConfig(motion_std_factor=1.0)

    def test_overlapping_schedule(self):
        with pytest.raises(ValueError):
            SynthConfig(schedule=(MotionSegment(0, 100, ((1, 1),)),
                                  MotionSegment(50, 150, ((1, 1),))))

    def test_segment_past_end(self):
        with pytest.raises(ValueError):
            SynthConfig(duration_s=100, schedule=(MotionSegment(50, 150, ((1, 1),)),))

    def test_student_t_needs_finite_variance(self):
        with pytest.raises(ValueError):
            SynthConfig(noise="student_t", noise_dof=2.0)

    def test_round_trip(self):
        cfg = office_config(3, duration_s=1800, motion=((600, 900),))
        assert SynthConfig.from_dict(cfg.to_dict()) == cfg

    def test_waypoint_outside_site(self):
        cfg = SynthConfig(schedule=(MotionSegment(0, 10, ((50, 50),)),))
        with pytest.raises(ValueError):
            generate_synthetic(cfg, LINE)


class TestGeneration:
    def test_no_motion_is_silence(self):
        cfg = SynthConfig(seed=4, duration_s=2000, silence_mean=-60, silence_std=1.0)
        tr, lab = generate_synthetic(cfg, LINE)
        assert [iv.label for iv in lab.intervals] == [SILENCE]
        x = tr[S].rss
        assert x.size == 2000
        assert x.mean() == pytest.approx(-60, abs=0.1)
        assert x.std(ddof=1) == pytest.approx(1.0, abs=0.05)

    def test_seeded(self):
        cfg = office_config(9, duration_s=300, motion=((100, 200),))
        a, _ = generate_synthetic(cfg, office_geometry())
        b, _ = generate_synthetic(cfg, office_geometry())
        for s in a.streams:
            np.testing.assert_array_equal(a[s].rss, b[s].rss)

    def test_std_ratio_on_line_of_sight(self):
        # walker parked on the link for half the run; ratio read from the emitted trace
        cfg = SynthConfig(seed=21, duration_s=1200, silence_std=1.0, motion_std_factor=3.0,
                          schedule=(MotionSegment(300, 900, ((5.0, 5.0),)),))
        tr, lab = generate_synthetic(cfg, LINE)
        codes = lab.labels_at(tr[S].t)
        moving, quiet = tr[S].rss[codes == 1], tr[S].rss[codes == 0]
        assert moving.size >= 600 and quiet.size >= 600
        assert moving.std(ddof=1) / quiet.std(ddof=1) == pytest.approx(3.0, rel=0.15)

    def test_motion_outside_radius_has_no_effect(self):
        far = SynthConfig(seed=5, duration_s=200, schedule=(MotionSegment(0, 200, ((5, 9),)),))
        none = SynthConfig(seed=5, duration_s=200)
        a, _ = generate_synthetic(far, LINE)
        b, _ = generate_synthetic(none, LINE)
        np.testing.assert_array_equal(a[S].rss, b[S].rss)

    def test_mean_drift(self):
        cfg = SynthConfig(seed=6, duration_s=7200, drift_per_hour=2.0)
        tr, _ = generate_synthetic(cfg, LINE)
        x = tr[S].rss
        assert x[-600:].mean() - x[:600].mean() == pytest.approx(2.0 * 6600 / 3600, abs=0.15)

    def test_student_t_unit_variance(self):
        cfg = SynthConfig(seed=8, duration_s=40000, noise="student_t", noise_dof=5.0)
        tr, _ = generate_synthetic(cfg, LINE)
        assert tr[S].rss.std() == pytest.approx(1.0, rel=0.05)


class TestLabels:
    def test_schedule_labels(self):
        segs = (MotionSegment(10, 20, ((0, 0),), loc="hall"), MotionSegment(30, 40, ((0, 0),)))
        lab = schedule_labels(segs, 50)
        assert [(iv.start, iv.end, iv.label) for iv in lab.intervals] == [
            (0, 10, SILENCE), (10, 20, MOTION), (20, 30, SILENCE), (30, 40, MOTION),
            (40, 50, SILENCE)]
        assert lab.intervals[1].loc == "hall"

    def test_office_defaults(self):
        cfg = office_config()
        tr, lab = generate_synthetic(cfg, office_geometry())
        assert tr.k == 12
        assert len(tr[tr.streams[0]]) == 4500
        assert len(lab.motion_intervals()) == 3
        assert not lab.has_motion(0, 120)


class TestPosition:
    def test_constant_speed(self):
        seg = MotionSegment(0, 10, ((0, 0), (10, 0)))
        np.testing.assert_allclose(seg.position(np.array([0.0, 5.0, 10.0])),
                                   [[0, 0], [5, 0], [10, 0]])

    def test_single_waypoint(self):
        seg = MotionSegment(0, 10, ((2, 3),))
        np.testing.assert_array_equal(seg.position(np.array([1.0, 2.0])), [[2, 3], [2, 3]])
