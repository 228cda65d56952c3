import json

import numpy as np
import pytest

from rasid.trace import (DataError, Interval, LabelTrack, RssTrace, SiteGeometry, StreamId,
                         StreamSeries, TraceFormatError, load_geometry, load_labels,
                         load_trace, synchronize, windows, write_geometry, write_labels,
                         write_trace)

S11 = StreamId("AP1", "MP1")


def _jsonl(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records))
    return path


class TestStreamId:
    def test_parse_round_trip(self):
        s = StreamId.parse("AP1-MP1")
        assert s == S11
        assert str(s) == "AP1-MP1"

    def test_ordering(self):
        assert StreamId("AP1", "MP2") < StreamId("AP2", "MP1")

    @pytest.mark.parametrize("bad", ["AP1", "-MP1", "AP1-"])
    def test_rejects_malformed(self, bad):
        with pytest.raises(ValueError):
            StreamId.parse(bad)


class TestLoadTrace:
    def test_three_records(self, tmp_path):
        p = _jsonl(tmp_path / "t.jsonl",
                   [{"t": t, "stream": "AP1-MP1", "rss": -50.0 - t} for t in range(3)])
        tr = load_trace(p)
        assert tr.k == 1
        assert len(tr[S11]) == 3
        np.testing.assert_array_equal(tr[S11].rss, [-50, -51, -52])

    def test_duplicate_timestamp_names_stream_and_time(self, tmp_path):
        p = _jsonl(tmp_path / "t.jsonl", [{"t": 0, "stream": "AP1-MP1", "rss": -50},
                                          {"t": 1, "stream": "AP1-MP1", "rss": -50},
                                          {"t": 1, "stream": "AP1-MP1", "rss": -51}])
        with pytest.raises(DataError) as err:
            load_trace(p)
        assert "AP1-MP1" in str(err.value)
        assert "t=1" in str(err.value)

    def test_empty_file(self, tmp_path):
        p = tmp_path / "e.jsonl"
        p.write_text("")
        assert load_trace(p).k == 0

    def test_bad_json_reports_line(self, tmp_path):
        p = tmp_path / "b.jsonl"
        p.write_text('{"t": 0, "stream": "AP1-MP1", "rss": -50}\nnot json\n')
        with pytest.raises(TraceFormatError) as err:
            load_trace(p)
        assert err.value.lineno == 2

    def test_csv(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("t,stream,rss\n0,AP1-MP1,-50\n1,AP1-MP1,-51\n0,AP2-MP1,-60\n")
        tr = load_trace(p)
        assert tr.k == 2
        np.testing.assert_array_equal(tr[S11].t, [0, 1])

    def test_write_round_trip(self, tmp_path):
        tr = RssTrace.from_arrays(np.arange(4.0), {S11: [-50.5, -51, -52, -53],
                                                   StreamId("AP2", "MP1"): [-60, -61, -62, -63]})
        assert write_trace(tr, tmp_path / "o.jsonl") == 8
        back = load_trace(tmp_path / "o.jsonl")
        for s in tr.streams:
            np.testing.assert_array_equal(back[s].rss, tr[s].rss)
        first = json.loads((tmp_path / "o.jsonl").read_text().splitlines()[0])
        assert first == {"t": 0, "stream": "AP1-MP1", "rss": -50.5}


class TestWindows:
    def test_sliding_definition(self):
        tr = RssTrace.from_arrays([0, 1, 2, 3], {S11: [1.0, 2.0, 3.0, 4.0]})
        ws = windows(tr, S11, 2)
        assert [w.samples for w in ws] == [(1, 2), (2, 3), (3, 4)]
        assert [w.end_t for w in ws] == [1, 2, 3]

    def test_short_stream_gives_empty(self):
        tr = RssTrace.from_arrays([0, 1], {S11: [1.0, 2.0]})
        assert windows(tr, S11, 5) == []

    def test_count(self):
        tr = RssTrace.from_arrays(np.arange(120.0), {S11: np.zeros(120)})
        assert len(windows(tr, S11, 5)) == 116


class TestSynchronize:
    def test_carry_forward_and_invalidation(self):
        tr = RssTrace({S11: StreamSeries([0, 1, 2, 9, 10], [0.0, 1, 2, 9, 10]),
                       StreamId("AP2", "MP1"): StreamSeries(np.arange(11.0), np.zeros(11))})
        g = synchronize(tr)
        row = g.rss[0]
        np.testing.assert_array_equal(row[3:9], 2.0)
        np.testing.assert_array_equal(g.filled[0, 3:9], True)
        # five carried ticks stay valid, the sixth does not
        np.testing.assert_array_equal(g.valid[0, 3:8], True)
        assert not g.valid[0, 8]
        assert g.valid[0, 9]

    def test_invalid_before_first_sample(self):
        tr = RssTrace.from_arrays([0, 1, 2], {S11: [1.0, 2.0, 3.0]})
        late = RssTrace({S11: tr[S11], StreamId("AP2", "MP1"): StreamSeries([2.0], [5.0])})
        g = synchronize(late)
        np.testing.assert_array_equal(g.valid[1], [False, False, True])


class TestLabels:
    def test_codes_and_motion(self):
        lab = LabelTrack((Interval(0, 10, "silence"), Interval(10, 20, "motion", "hall")))
        np.testing.assert_array_equal(lab.labels_at([0, 9.9, 10, 19.9, 20]), [0, 0, 1, 1, -1])
        assert lab.has_motion(5, 11)
        assert not lab.has_motion(0, 10)

    def test_overlap_rejected(self):
        with pytest.raises(ValueError):
            LabelTrack((Interval(0, 10, "silence"), Interval(5, 20, "motion")))

    def test_round_trip_with_loc(self, tmp_path):
        lab = LabelTrack((Interval(0, 10, "silence"), Interval(10, 20.5, "motion", "hall")))
        write_labels(lab, tmp_path / "l.jsonl")
        assert load_labels(tmp_path / "l.jsonl") == lab

    def test_unknown_label(self, tmp_path):
        p = _jsonl(tmp_path / "l.jsonl", [{"start": 0, "end": 1, "label": "dance"}])
        with pytest.raises(DataError):
            load_labels(p)


class TestGeometry:
    def test_round_trip(self, tmp_path):
        geo = SiteGeometry({"AP1": (0, 0), "MP1": (3, 4)}, (S11,), 1.5, (0, 0, 5, 5))
        write_geometry(geo, tmp_path / "g.json")
        back = load_geometry(tmp_path / "g.json")
        assert back.to_dict() == geo.to_dict()
        a, b = back.segment(S11)
        assert np.linalg.norm(a - b) == pytest.approx(5.0)

    def test_unknown_node(self):
        with pytest.raises(ValueError):
            SiteGeometry({"AP1": (0, 0)}, (S11,), 1.5, (0, 0, 5, 5))

    def test_invalid_file_is_data_error(self, tmp_path):
        p = tmp_path / "g.json"
        p.write_text("{}")
        with pytest.raises(DataError):
            load_geometry(p)
