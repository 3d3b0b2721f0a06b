import numpy as np
import pytest

from copyfaith.traceio import (
    TraceFormatError,
    TraceStep,
    TraceVectors,
    read_trace,
    sidecar_for,
    write_trace,
)


def sample_steps(n=3, dim=4):
    rng = np.random.default_rng(7)
    return [
        ([(" tok", 0.6), (" alt", 0.3), (" other", 0.1)], rng.normal(size=dim).astype("<f4"))
        for _ in range(n)
    ]


def write_sample(path, **overrides):
    kwargs = dict(
        run_id="r1",
        query_id="q1",
        with_context=True,
        model_id="tiny",
        hidden_dim=4,
        k=3,
        generated_text="tok alt",
        steps=sample_steps(),
    )
    kwargs.update(overrides)
    return write_trace(path, **kwargs)


def test_round_trip(tmp_path):
    trace = write_sample(tmp_path / "run.jsonl")
    again = read_trace(tmp_path / "run.jsonl")
    assert again.run_id == "r1"
    assert again.with_context is True
    assert again.generated_text == "tok alt"
    assert len(again.steps) == 3
    assert again.steps[0].topk[0] == (" tok", 0.6)
    assert again.min_topk() == 3
    assert trace == again


def test_sidecar_size_and_vectors(tmp_path):
    steps = sample_steps(n=5, dim=8)
    write_trace(
        tmp_path / "run.jsonl",
        run_id="r",
        query_id="q",
        with_context=False,
        model_id="m",
        hidden_dim=8,
        k=3,
        generated_text="",
        steps=steps,
    )
    sidecar = sidecar_for(tmp_path / "run.jsonl")
    assert sidecar.stat().st_size == 5 * 8 * 4
    trace = read_trace(tmp_path / "run.jsonl")
    vectors = TraceVectors(trace)
    for i, (_, expected) in enumerate(steps):
        np.testing.assert_array_equal(vectors.vector(i), expected)


def test_step_invariants():
    with pytest.raises(TraceFormatError):
        TraceStep(0, (), 0)
    with pytest.raises(TraceFormatError):
        TraceStep(0, ((" a", 0.2), (" b", 0.5)), 0)  # not descending
    with pytest.raises(TraceFormatError):
        TraceStep(0, ((" a", 1.2),), 0)


def test_malformed_file(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"run_id": "r"}\n')
    with pytest.raises(TraceFormatError):
        read_trace(path)
    (tmp_path / "empty.jsonl").write_text("")
    with pytest.raises(TraceFormatError):
        read_trace(tmp_path / "empty.jsonl")
