import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fermicavity.errors import DomainError
from fermicavity.recurrence import (
    LINEAR_LIMIT,
    RecurrenceInput,
    derive_input,
    first_return_on_grid,
    overlap_function,
    recurrence_bounds,
)


def stirling_form(d, c, delta, eps, hbar=1.0):
    """Large-d estimate ``(4 pi^1.5 hbar / delta / d) (2 pi c^2 d / (e eps))^(d/2)``, in logs."""
    return (math.log(4 * math.pi**1.5 * hbar / delta) - math.log(d)
            + 0.5 * d * math.log(2 * math.pi * c * c * d / (math.e * eps)))


def disjoint_pair_table(seed, pairs=10):
    """Random amplitudes on disjoint level pairs, so every gap is independent."""
    rng = np.random.default_rng(seed)
    energies = rng.uniform(0.0, 1.0, 2 * pairs)
    table = np.zeros((2 * pairs, 2 * pairs))
    amp = rng.uniform(0.1, 0.3, pairs)
    table[2 * np.arange(pairs), 2 * np.arange(pairs) + 1] = amp
    return table, energies, amp


inputs = st.builds(
    lambda d, lo, span, de, eps: RecurrenceInput(d, lo, lo * span, de, eps),
    st.integers(1, 2000), st.floats(1e-4, 1.0), st.floats(1.0, 10.0),
    st.floats(1e-3, 10.0), st.floats(1e-4, 1.0),
)


class TestBounds:
    @pytest.mark.parametrize("de,hbar", [(0.5, 1.0), (2.0, 1.0), (1.0, 0.3)])
    def test_single_pair_is_heisenberg_time(self, de, hbar):
        b = recurrence_bounds(RecurrenceInput(1, 0.1, 0.7, de, 0.01, hbar))
        assert b.t_minus == b.t_plus == pytest.approx(2 * math.pi * hbar / de, rel=1e-14)

    def test_equal_amplitudes(self):
        b = recurrence_bounds(RecurrenceInput(7, 0.2, 0.2, 1.0, 0.05))
        assert b.t_minus == b.t_plus

    def test_hand_value(self):
        # d = 3: (2 pi / de) / sqrt 3 * (4 pi c^2 / eps) * Gamma(2)
        b = recurrence_bounds(RecurrenceInput(3, 0.1, 0.1, 2.0, 0.02))
        expected = math.pi / math.sqrt(3) * (4 * math.pi * 0.01 / 0.02)
        assert b.t_minus == pytest.approx(expected, rel=1e-14)

    @pytest.mark.parametrize("d", [100, 1000])
    def test_stirling_log_within_one_percent(self, d):
        eps = 0.1
        c = math.sqrt(eps / (2 * math.pi))
        b = recurrence_bounds(RecurrenceInput(d, c, c, 1.0, eps))
        ref = stirling_form(d, c, 1.0, eps)
        assert abs(b.ln_t_minus - ref) / abs(ref) < 0.01

    @pytest.mark.parametrize("d", [50, 400, 5000])
    def test_stirling_prefactor(self, d):
        # the exact expression exceeds the large-d form by sqrt(d eps / (2 pi c^2)) / 2
        c, eps = 0.3, 0.05
        b = recurrence_bounds(RecurrenceInput(d, c, c, 1.0, eps))
        ratio = math.exp(b.ln_t_minus - stirling_form(d, c, 1.0, eps))
        expected = 0.5 * math.sqrt(d * eps / (2 * math.pi * c * c))
        assert ratio == pytest.approx(expected, rel=1.0 / d)

    @settings(max_examples=200)
    @given(inputs)
    def test_ordered(self, inp):
        b = recurrence_bounds(inp)
        assert b.ln_t_minus <= b.ln_t_plus
        if b.t_minus is not None and b.t_plus is not None:
            assert b.t_minus <= b.t_plus

    @settings(max_examples=100)
    @given(st.integers(1, LINEAR_LIMIT), st.floats(0.01, 0.5), st.floats(0.01, 1.0))
    def test_log_matches_linear(self, d, c, eps):
        b = recurrence_bounds(RecurrenceInput(d, c, c, 1.3, eps))
        if b.t_minus is not None:
            assert math.log(b.t_minus) == pytest.approx(b.ln_t_minus, rel=1e-10, abs=1e-10)

    def test_large_d_log_only(self):
        b = recurrence_bounds(RecurrenceInput(10_000, 0.3, 0.4, 1.0, 0.05))
        assert b.t_minus is None and b.t_plus is None
        assert math.isfinite(b.log10_t_minus) and b.log10_t_minus > 300

    def test_grows_with_pairs(self):
        lns = [recurrence_bounds(RecurrenceInput(d, 0.3, 0.3, 1.0, 0.05)).ln_t_minus
               for d in (1, 10, 100, 1000)]
        assert np.all(np.diff(lns) > 0)

    def test_as_dict(self):
        out = recurrence_bounds(RecurrenceInput(2, 0.1, 0.2, 1.0, 0.1)).as_dict()
        assert set(out) == {"t_minus", "t_plus", "log10_t_minus", "log10_t_plus"}
        assert out["log10_t_minus"] == pytest.approx(math.log10(out["t_minus"]))

    @pytest.mark.parametrize("kwargs", [dict(d_F=0), dict(c_min=0.0), dict(c_min=0.5, c_max=0.2),
                                        dict(delta_eps=-1.0), dict(eps_rec=0.0)])
    def test_validation(self, kwargs):
        base = dict(d_F=2, c_min=0.1, c_max=0.2, delta_eps=1.0, eps_rec=0.1)
        base.update(kwargs)
        with pytest.raises(DomainError):
            RecurrenceInput(**base)


class TestDeriveInput:
    def test_example(self):
        table = np.array([[0.9, 0.2, 0.0], [0.2, 0.5, -0.4], [0.0, -0.4, 0.1]])
        inp = derive_input(table, [0.0, 1.0, 3.0], 0.05)
        assert inp.d_F == 4
        assert inp.c_min == pytest.approx(0.2) and inp.c_max == pytest.approx(0.4)
        assert inp.delta_eps == pytest.approx(math.sqrt((1 + 1 + 4 + 4) / 4))

    def test_complex_amplitudes(self):
        table = np.array([[0, 0.3j], [-0.3j, 0]])
        inp = derive_input(table, [0.0, 2.0], 0.1)
        assert inp.c_min == pytest.approx(0.3) and inp.delta_eps == pytest.approx(2.0)

    def test_diagonal_only(self):
        with pytest.raises(DomainError):
            derive_input(np.eye(3), [0, 1, 2], 0.1)

    def test_shape_mismatch(self):
        with pytest.raises(DomainError):
            derive_input(np.ones((2, 2)), [0, 1, 2], 0.1)


class TestScan:
    def test_overlap_function(self):
        table = np.array([[0, 0.5], [0.5, 0]])
        t = np.array([0.0, math.pi / 2, math.pi])
        np.testing.assert_allclose(overlap_function(table, [0.0, 1.0], t),
                                   [0.0, 2 * 0.25 * 0.5, 2 * 0.25], atol=1e-15)

    def test_single_pair_returns_near_heisenberg_time(self):
        table = np.array([[0.0, 0.2], [0.0, 0.0]])
        eps = 0.05
        r = first_return_on_grid(table, [0.0, 1.0], eps, 10.0, n_points=100_001)
        heisenberg = 2 * math.pi
        # inside the eps-ball around one full winding
        width = math.asin(math.sqrt(eps) / (2 * 0.2)) / math.pi * heisenberg
        assert heisenberg - width - 1e-3 <= r <= heisenberg

    def test_no_return(self):
        table = np.array([[0.0, 0.3], [0.0, 0.0]])
        assert first_return_on_grid(table, [0.0, 1.0], 0.01, 5.0, n_points=1001) is None

    @pytest.mark.parametrize("seed", range(5))
    def test_no_return_before_lower_bound(self, seed):
        table, energies, amp = disjoint_pair_table(seed)
        eps = 0.05
        inp = derive_input(table, energies, eps)
        assert inp.d_F == 10
        t_minus = recurrence_bounds(inp).t_minus
        gaps = np.abs(np.diff(energies.reshape(-1, 2), axis=1))
        # grid step: a quarter of the smallest ball radius along the fastest phase
        radius = math.sqrt(eps) / (2 * math.pi * amp.max())
        n = int(t_minus * gaps.max() / (2 * math.pi) / (radius / 4)) + 2
        assert first_return_on_grid(table, energies, eps, t_minus, n_points=n) is None
