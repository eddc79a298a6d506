import json
import math
import os

import numpy as np
import pytest

from tubeforge.bench import (
    BenchReport,
    Corpus,
    format_table,
    generate_corpus,
    run_bench,
    timer_overhead_ms,
)
from tubeforge.containers import FORMATS, ReadStats, read_chunked_frame, read_tensor
from tubeforge.errors import CorpusMissing

SHAPE = (8, 16, 16, 3)


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    return generate_corpus(4, SHAPE, seed=3, out_dir=tmp_path_factory.mktemp("corpus"), chunk_frames=2)


def test_corpus_files_and_checksums(corpus):
    files = [p for fmt in FORMATS for p in corpus.paths(fmt)]
    assert len(files) == 12 and all(p.exists() for p in files)
    for i, item in enumerate(corpus.items):
        payloads = {read_tensor(fmt, corpus.paths(fmt)[i])[1].tobytes() for fmt in FORMATS}
        assert len(payloads) == 1


def test_corpus_is_deterministic(tmp_path, corpus):
    again = generate_corpus(4, SHAPE, seed=3, out_dir=tmp_path, chunk_frames=2)
    for fmt in FORMATS:
        for a, b in zip(corpus.paths(fmt), again.paths(fmt)):
            assert a.read_bytes() == b.read_bytes()


def test_corpus_count_zero(tmp_path):
    with pytest.raises(ValueError):
        generate_corpus(0, SHAPE, out_dir=tmp_path)


def test_missing_corpus(tmp_path):
    with pytest.raises(CorpusMissing):
        run_bench(tmp_path)


def test_report_structure(corpus):
    report = run_bench(corpus.root, repetitions=5)
    assert [f.format for f in report.formats] == list(FORMATS)
    for f in report.formats:
        assert len(f.runs_ms) == 5
        assert f.warm_load_ms == sorted(f.runs_ms)[2]
        assert min(f.cold_load_ms, f.warm_load_ms, f.p50_ms, f.p95_ms) > 0
    # same payloads in every format, so the touched sums agree
    assert len({f.payload_sum for f in report.formats}) == 1
    assert "machine" in report.disclaimer
    assert set(report.ratios) == set(FORMATS) and report.ratios["npy"] == 1.0


def test_repetitions_floor(corpus):
    with pytest.raises(ValueError):
        run_bench(corpus, repetitions=1)


def test_full_read_accounting_equals_file_size(corpus):
    report = run_bench(corpus, repetitions=3)
    for fmt in ("npy", "flatbin"):
        assert report.entry(fmt).bytes_read == report.entry(fmt).total_bytes


def test_random_frame_on_chunked_reads_one_chunk(corpus):
    report = run_bench(corpus, repetitions=3, access_pattern="random-frame")
    header = 16 + 8 * len(SHAPE) + 8
    chunks = math.ceil(SHAPE[0] / corpus.chunk_frames)
    chunk_bytes = corpus.chunk_frames * math.prod(SHAPE[1:])
    per_access = header + 16 * chunks + chunk_bytes
    assert report.entry("chunked").bytes_read == per_access * len(corpus.items)


def test_single_access_counts_one_chunk(corpus):
    stats = ReadStats()
    read_chunked_frame(corpus.paths("chunked")[0], 5, stats)
    chunk_bytes = corpus.chunk_frames * math.prod(SHAPE[1:])
    index_bytes = 16 + 8 * 4 + 8 + 16 * 4
    assert stats.bytes_read == index_bytes + chunk_bytes


def test_report_json_round_trip(corpus):
    report = run_bench(corpus, repetitions=3, access_pattern="random-frame")
    text = json.dumps(report.to_json())
    back = BenchReport.from_json(json.loads(text))
    assert back == report
    assert "x npy" in format_table(report)


def test_timer_overhead_is_small(corpus):
    report = run_bench(corpus, repetitions=3)
    shortest = min(f.p50_ms for f in report.formats)
    assert report.timer_overhead_ms < 0.05 * shortest
    assert timer_overhead_ms(100) > 0
