import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relmap.workload import (
    TaskSpec,
    WorkloadTrace,
    generate_trace,
    load_presets,
    load_trace,
    parse_trace,
    preset_trace,
    save_trace,
    scale_duration,
)

HEADER = "id,name,arrival_s,duration_s,power_W,isub_A,iem_A\n"


def test_empty_trace():
    assert len(generate_trace(0, seed=1)) == 0


def test_generation_is_deterministic():
    assert generate_trace(50, seed=4) == generate_trace(50, seed=4)
    assert generate_trace(50, seed=4) != generate_trace(50, seed=5)


def test_power_mean_within_three_sigma():
    tr = generate_trace(10_000, seed=8, power_range=(1.0, 5.0))
    p = np.array([t.power for t in tr])
    sigma = (4.0 / math.sqrt(12)) / math.sqrt(len(p))
    assert abs(p.mean() - 3.0) <= 3 * sigma
    assert p.min() >= 1.0 and p.max() <= 5.0


def test_arrivals_non_decreasing():
    arr = [t.arrival for t in generate_trace(500, seed=0)]
    assert all(b >= a for a, b in zip(arr, arr[1:]))


def test_three_line_file(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text(HEADER + "0,a,0,5,2,1,1\n1,b,1.5,3,4,1.2,0.9\n2,c,2,8,1,1,1\n")
    tr = load_trace(path)
    assert len(tr) == 3 and tr.tasks[1] == TaskSpec(1, "b", 1.5, 3.0, 4.0, 1.2, 0.9)


def test_negative_duration_cites_line():
    with pytest.raises(ValueError, match=r":2: invalid duration_s"):
        parse_trace(HEADER + "0,a,0,-5,2,1,1\n")


@pytest.mark.parametrize(
    "body,pattern",
    [
        ("0,a,0,5\n", ":2: expected 7 fields"),
        ("0,a,0,5,2,1,1\n1,b,zero,5,2,1,1\n", ":3: cannot parse"),
        ("0,a,3,5,2,1,1\n1,b,1,5,2,1,1\n", ":3: arrival_s decreases"),
        ("0,a,0,5,2,1,1\n0,b,1,5,2,1,1\n", ":3: duplicate id"),
    ],
)
def test_malformed_rows(body, pattern):
    with pytest.raises(ValueError, match=pattern):
        parse_trace(HEADER + body)


def test_bad_header():
    with pytest.raises(ValueError, match=":1:"):
        parse_trace("id,name\n0,a\n")


@settings(max_examples=50, deadline=None)
@given(n=st.integers(0, 40), seed=st.integers(0, 2**31))
def test_save_load_round_trip(tmp_path_factory, n, seed):
    tr = generate_trace(n, seed=seed)
    path = tmp_path_factory.mktemp("w") / "trace.csv"
    save_trace(tr, path)
    assert load_trace(path) == tr


def test_scale_duration():
    t = TaskSpec(0, "x", 0.0, 10.0, 1.0)
    assert scale_duration(t, 4e9, 4e9) == 10.0
    assert scale_duration(t, 2e9, 4e9) == 20.0
    assert scale_duration(t, 0.8 * 4e9, 4e9) == pytest.approx(12.5)


def test_presets_are_the_fifteen_benchmarks():
    names = [p.name for p in load_presets()]
    assert names[:9] == ["FFT", "LU", "RADIX", "Cholesky", "FMM", "Ocean", "Barnes", "Raytrace", "Radiosity"]
    assert names[9:] == ["Blackscholes", "Canneal", "Dedup", "X264", "Vips", "Swaptions"]


def test_preset_trace_repeats_each_profile():
    tr = preset_trace(repeats=10, seed=3, arrival_rate=0.25)
    assert len(tr) == 150
    counts = {}
    for t in tr:
        counts[t.name] = counts.get(t.name, 0) + 1
    assert set(counts.values()) == {10}
    assert preset_trace(10, 3, 0.25) == tr


def test_trace_validation():
    with pytest.raises(ValueError):
        WorkloadTrace((TaskSpec(0, "a", 1.0, 1.0, 1.0), TaskSpec(1, "b", 0.5, 1.0, 1.0)))
    with pytest.raises(ValueError):
        TaskSpec(0, "a", 0.0, 0.0, 1.0)
