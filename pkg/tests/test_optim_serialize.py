"""Optimizer behavior and parameter segment round-trips."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vqmotion.nn import RAdam, SegmentError, Tensor, dump_arrays, load_arrays


def test_quadratic_converges():
    # min (x - a)^2 / 2 from x=0, lr 1e-2: |x - a| < 1e-3 well inside 5000 steps
    a = 3.0
    x = Tensor(np.array([0.0]), requires_grad=True)
    opt = RAdam([x], lr=1e-2)
    for _ in range(5000):
        opt.zero_grad()
        loss = ((x - a) ** 2) * 0.5
        loss.sum().backward()
        opt.step()
        if abs(x.data[0] - a) < 1e-3:
            break
    assert abs(x.data[0] - a) < 1e-3


def test_zero_gradient_leaves_params_and_counts_step():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    opt = RAdam([x], lr=0.1)
    x.grad = np.zeros(2)
    assert opt.step()
    assert np.array_equal(x.data, [1.0, 2.0])
    assert opt.step_count == 1


def test_nonfinite_gradient_skips_step():
    x = Tensor(np.array([1.0]), requires_grad=True)
    opt = RAdam([x], lr=0.1)
    x.grad = np.array([np.nan])
    assert not opt.step()
    assert np.array_equal(x.data, [1.0])
    assert opt.step_count == 0
    assert opt.skipped_steps == 1


def test_early_steps_use_unrectified_momentum():
    # with beta2=0.999, rho_t stays <= 4 for the first few steps, so the
    # update must be exactly lr * mhat regardless of gradient scale
    x = Tensor(np.array([0.0]), requires_grad=True)
    opt = RAdam([x], lr=0.5, betas=(0.9, 0.999))
    x.grad = np.array([1e6])
    opt.step()
    assert x.data[0] == pytest.approx(-0.5 * 1e6)


def test_optimizer_state_roundtrip_bitwise():
    rng = np.random.default_rng(1)
    x = Tensor(rng.normal(size=(3, 2)), requires_grad=True)
    opt = RAdam([x], lr=1e-2)
    for _ in range(10):
        opt.zero_grad()
        ((x**2).sum()).backward()
        opt.step()
    snap_x = x.data.copy()
    state = opt.state()

    y = Tensor(snap_x.copy(), requires_grad=True)
    opt2 = RAdam([y], lr=1e-2)
    opt2.load_state(state)
    for opt_, t in ((opt, x), (opt2, y)):
        opt_.zero_grad()
        ((t**2).sum()).backward()
        opt_.step()
    assert np.array_equal(x.data, y.data)


class TestSegments:
    def test_roundtrip_preserves_order_and_bits(self):
        rng = np.random.default_rng(2)
        entries = {
            "enc.w": rng.normal(size=(4, 3)),
            "enc.b": rng.normal(size=(4,)),
            "scalar": np.array(3.5),
        }
        back = load_arrays(dump_arrays(entries))
        assert list(back) == list(entries)
        for k in entries:
            assert np.array_equal(back[k], entries[k])
            assert back[k].dtype == np.float64

    def test_truncation_reports_offset(self):
        blob = dump_arrays({"w": np.ones((2, 2))})
        with pytest.raises(SegmentError, match="byte"):
            load_arrays(blob[:-5])

    def test_trailing_garbage_rejected(self):
        blob = dump_arrays({"w": np.ones(3)})
        with pytest.raises(SegmentError, match="trailing"):
            load_arrays(blob + b"xx")

    def test_unknown_version_rejected(self):
        blob = bytearray(dump_arrays({}))
        blob[0] = 77
        with pytest.raises(SegmentError, match="version"):
            load_arrays(bytes(blob))

    @given(st.lists(st.integers(1, 5), min_size=0, max_size=3), st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_any_shape_roundtrips(self, shape, seed):
        arr = np.random.default_rng(seed).normal(size=tuple(shape))
        back = load_arrays(dump_arrays({"a": arr}))
        assert np.array_equal(back["a"], arr)
