"""Test trace files and the synthetic workload generator."""
import json

import numpy as np
import pytest

from backend.core import (
    DemandVector,
    GeneratorConfig,
    TraceFormatError,
    VideoRecord,
    generate,
    load_trace,
    nearest_region,
    save_trace,
)
from backend.core.workload import iter_trace


HEADER = {"schema_version": 1, "region_set": "test-3", "n_regions": 3}


def _write(path, *rows):
    path.write_text("".join((r if isinstance(r, str) else json.dumps(r)) + "\n" for r in rows), encoding="utf-8")
    return path


def _row(video_id="v", start=1, counts=(1, 0, 2), **extra):
    return {"video_id": video_id, "broadcaster_region": 0, "start_period": start,
            "actual_viewers": {"counts": list(counts)}, **extra}


def test_header_only_trace_is_empty(tmp_path):
    path = _write(tmp_path / "t.ndjson", HEADER)
    assert load_trace(path) == []
    assert load_trace(path, n_regions=3) == []


def test_negative_viewer_count_reports_row(tmp_path):
    path = _write(tmp_path / "t.ndjson", HEADER, _row(counts=(1, -2, 0)))
    with pytest.raises(TraceFormatError) as exc:
        load_trace(path)
    assert exc.value.row == 2
    assert exc.value.details["row"] == 2


def test_save_then_load(tmp_path, small_trace, default_regions):
    path = save_trace(tmp_path / "trace.ndjson", small_trace, default_regions.n)
    assert load_trace(path, n_regions=default_regions.n) == small_trace

    first = json.loads(path.read_text(encoding="utf-8").splitlines()[0])
    assert first == {"schema_version": 1, "region_set": "aws-10", "n_regions": 10}


@pytest.mark.parametrize("rows,row", [
    ([HEADER, _row("a", start=2), _row("b", start=1)], 3),
    ([HEADER, _row(counts=(1, 2))], 2),
    ([HEADER, {**_row(), "broadcaster_region": 3}], 2),
    ([{**HEADER, "schema_version": 2}], 1),
    ([HEADER, "{not json"], 2),
    (["[1, 2]"], 1),
])
def test_malformed_traces(tmp_path, rows, row):
    path = _write(tmp_path / "t.ndjson", *rows)
    with pytest.raises(TraceFormatError) as exc:
        load_trace(path)
    assert exc.value.row == row


def test_missing_header(tmp_path):
    path = _write(tmp_path / "t.ndjson")
    with pytest.raises(TraceFormatError):
        load_trace(path)


def test_region_count_must_match(tmp_path):
    path = _write(tmp_path / "t.ndjson", HEADER)
    with pytest.raises(TraceFormatError):
        load_trace(path, n_regions=10)


def test_blank_lines_are_skipped(tmp_path):
    path = _write(tmp_path / "t.ndjson", HEADER, "", _row())
    items = list(iter_trace(path))
    assert len(items) == 2
    assert items[1].actual_viewers == DemandVector(counts=[1, 0, 2])


def test_generate_is_deterministic(default_regions):
    cfg = GeneratorConfig(n_videos_per_period=6, seed=11)
    assert generate(cfg, 5, default_regions) == generate(cfg, 5, default_regions)
    assert generate(cfg, 5, default_regions) != generate(GeneratorConfig(n_videos_per_period=6, seed=12), 5, default_regions)


def test_generated_records_are_consistent(small_trace, default_regions):
    periods = [rec.start_period for rec in small_trace]
    assert periods == sorted(periods)
    assert min(periods) >= 1 and max(periods) <= 8
    assert len({rec.video_id for rec in small_trace}) == len(small_trace)
    for rec in small_trace:
        assert rec.actual_viewers.n == default_regions.n
        assert rec.broadcaster_region == nearest_region(rec.features.broadcaster_location, default_regions)
        assert rec.features.created_day == rec.features.created_time.weekday()


def test_full_locality_keeps_viewers_home(default_regions):
    trace = generate(GeneratorConfig(n_videos_per_period=4, locality=1.0, seed=2), 6, default_regions)
    assert trace
    for rec in trace:
        assert rec.actual_viewers.support() in ([], [rec.broadcaster_region])


def test_arrival_rate(default_regions):
    rate, periods = 5, 1000
    trace = generate(GeneratorConfig(n_videos_per_period=rate, seed=4, n_broadcasters=5), periods, default_regions)
    expected = rate * periods
    assert abs(len(trace) - expected) < 3 * np.sqrt(expected)


def test_generator_rejects_bad_config(default_regions):
    with pytest.raises(ValueError):
        GeneratorConfig(popularity=1.0)
    with pytest.raises(ValueError):
        GeneratorConfig(locality=1.5)
    with pytest.raises(ValueError):
        generate(GeneratorConfig(global_mix=[1.0, 2.0]), 2, default_regions)


def test_global_mix_shapes_remote_viewers(default_regions):
    mix = [0.0] * 10
    mix[7] = 1.0
    trace = generate(GeneratorConfig(n_videos_per_period=5, locality=0.5, global_mix=mix, seed=8), 4, default_regions)
    for rec in trace:
        assert set(rec.actual_viewers.support()) <= {rec.broadcaster_region, 7}


def test_records_without_optional_fields_round_trip(tmp_path):
    records = [VideoRecord(video_id="bare", broadcaster_region=2, start_period=1)]
    path = save_trace(tmp_path / "bare.ndjson", records, 3, region_set="test-3")
    assert load_trace(path) == records


def _large_share(popularity, regions):
    cfg = GeneratorConfig(n_videos_per_period=40, n_broadcasters=400, popularity=popularity, noise=0.0, seed=21)
    totals = np.array([rec.actual_viewers.total for rec in generate(cfg, 12, regions)])
    assert totals.max() <= cfg.max_viewers
    return float(np.mean(totals > 4 * cfg.min_viewers))


def test_viewer_totals_are_heavy_tailed(default_regions):
    heavy = _large_share(1.5, default_regions)
    light = _large_share(4.0, default_regions)
    assert heavy > 0.05
    assert heavy > 3 * light


def test_viewer_range_must_be_ordered():
    with pytest.raises(ValueError):
        GeneratorConfig(min_viewers=100, max_viewers=50)
