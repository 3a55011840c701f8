import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from fermicavity.errors import DomainError, UnsupportedError
from fermicavity.kinetics import (
    CollisionKernel,
    KineticState,
    collision_rhs,
    double_step,
    equilibrium_target,
    evolve,
)
from fermicavity.thermo import binary_entropy


def per_level_rhs(occ, rates):
    """Loss and gain of each level from its own point of view.

    Level i, partnered with j != i, moves to i + d while j moves to j - d;
    the two final levels must differ and lie on the grid.
    """
    n = len(occ)
    h = [1.0 - x for x in occ]
    out = []
    for i in range(n):
        total = 0.0
        for j in range(n):
            if j == i:
                continue
            for k, w in enumerate(rates, start=1):
                for d in (k, -k):
                    a, b = i + d, j - d
                    if not (0 <= a < n and 0 <= b < n) or a == b:
                        continue
                    total += w * (occ[a] * occ[b] * h[i] * h[j] - occ[i] * occ[j] * h[a] * h[b])
        out.append(total)
    return np.array(out)


def fd_state(n_levels, T, mu):
    e = np.arange(1.0, n_levels + 1)
    return KineticState(e, special.expit(-(e - mu) / T))


class TestRhs:
    @pytest.mark.parametrize("occ", [[0.9, 0.2, 0.6, 0.1], [1.0, 0.5, 0.5, 0.0],
                                     [0.3, 0.8, 0.1, 0.7]])
    def test_four_levels_against_per_level_formula(self, occ):
        kernel = CollisionKernel(np.array([1.0, 0.5, 0.25]))
        state = KineticState(np.arange(1.0, 5.0), np.array(occ))
        np.testing.assert_allclose(collision_rhs(state, kernel), per_level_rhs(occ, [1, .5, .25]),
                                   atol=1e-15)

    @settings(max_examples=20, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=3, max_size=9), st.integers(1, 4))
    def test_random_against_per_level_formula(self, occ, window):
        kernel = CollisionKernel.constant(window)
        state = KineticState(np.arange(len(occ), dtype=float), np.array(occ))
        np.testing.assert_allclose(collision_rhs(state, kernel),
                                   per_level_rhs(occ, [1.0] * window), atol=1e-13)

    @pytest.mark.parametrize("T,mu", [(2.0, 10.0), (5.0, 24.0), (0.7, 3.3)])
    def test_fermi_dirac_is_fixed_point(self, T, mu):
        rhs = collision_rhs(fd_state(40, T, mu), CollisionKernel.constant(4))
        assert np.max(np.abs(rhs)) < 1e-14

    @pytest.mark.parametrize("value", [0.0, 1.0])
    def test_empty_and_full(self, value):
        state = KineticState(np.arange(1.0, 11.0), np.full(10, value))
        assert np.all(collision_rhs(state, CollisionKernel.constant(3)) == 0.0)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=4, max_size=30))
    def test_conserves_number_and_energy(self, occ):
        state = KineticState(np.arange(1.0, len(occ) + 1), np.array(occ))
        rhs = collision_rhs(state, CollisionKernel.constant(4))
        assert abs(rhs.sum()) < 1e-12
        assert abs(rhs @ state.energies) < 1e-11

    def test_non_uniform_grid(self):
        state = KineticState(np.array([1.0, 2.0, 4.0]), np.array([0.5, 0.5, 0.5]))
        with pytest.raises(UnsupportedError):
            collision_rhs(state, CollisionKernel.constant(1))


class TestValidation:
    def test_state(self):
        with pytest.raises(DomainError):
            KineticState(np.array([1.0, 2.0]), np.array([0.5, 1.5]))
        with pytest.raises(DomainError):
            KineticState(np.array([2.0, 1.0]), np.array([0.5, 0.5]))

    def test_kernel(self):
        with pytest.raises(DomainError):
            CollisionKernel(np.array([-1.0]))
        assert CollisionKernel.constant(3, 2.0).scaled(0.5).rates.tolist() == [1.0] * 3

    def test_step_size_guard(self):
        with pytest.raises(DomainError):
            evolve(double_step(), CollisionKernel.constant(4), 0.05, 1)


class TestEvolution:
    def test_stationary_equilibrium(self):
        s0 = fd_state(32, 3.0, 12.0)
        traj = evolve(s0, CollisionKernel.constant(4), 0.05, 10_000, record_every=10_000)
        assert np.max(np.abs(traj.occupations[-1] - s0.occupations)) < 1e-12

    def test_conservation_and_entropy(self):
        s0 = double_step()
        traj = evolve(s0, CollisionKernel.constant(4), 0.01, 300, record_every=10)
        assert np.max(np.abs(traj.particle_number - 24.0)) < 1e-12
        assert np.max(np.abs(traj.energy - 332.0)) < 1e-10
        entropy = binary_entropy(np.clip(traj.occupations, 0, 1)).sum(axis=1)
        assert np.all(np.diff(entropy) > 0)

    def test_distance_to_target_decreases(self):
        s0 = double_step()
        _, target = equilibrium_target(s0)
        traj = evolve(s0, CollisionKernel.constant(4), 0.01, 400, record_every=20)
        l2 = np.linalg.norm(traj.occupations - target, axis=1)
        assert np.all(np.diff(l2) < 0)

    def test_doubling_rate_halves_time(self):
        s0 = double_step()
        a = evolve(s0, CollisionKernel.constant(4), 0.01, 100)
        b = evolve(s0, CollisionKernel.constant(4).scaled(2.0), 0.005, 100)
        np.testing.assert_allclose(a.occupations, b.occupations, atol=1e-13)
        np.testing.assert_allclose(b.times, a.times / 2)

    def test_record_every(self):
        traj = evolve(double_step(), CollisionKernel.constant(4), 0.01, 25, record_every=10)
        np.testing.assert_allclose(traj.times, [0.0, 0.1, 0.2, 0.25])
        assert traj.final.t == pytest.approx(0.25)


class TestTarget:
    def test_double_step_target(self):
        s0 = double_step()
        assert s0.particle_number == 24 and s0.energy == 332
        ts, target = equilibrium_target(s0)
        assert ts.T == pytest.approx(4.4489, abs=1e-4)
        assert ts.mu == pytest.approx(24.480, abs=1e-3)
        assert target.sum() == pytest.approx(24.0, rel=1e-10)
        assert target @ s0.energies == pytest.approx(332.0, rel=1e-10)

    def test_double_step_layout(self):
        s = double_step(8, 0.5, full=2, half=4)
        assert s.occupations.tolist() == [1, 1, .5, .5, .5, .5, 0, 0]
        assert s.spacing == 0.5
        with pytest.raises(DomainError):
            double_step(8, full=6, half=4)
