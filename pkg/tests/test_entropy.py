import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.special import beta

from nsklimit.config import FluidParams, Formulation, SchemeConfig
from nsklimit.core import Grid1D, State, mollified_riemann_data, reference_state
from nsklimit.entropy import (
    TestFunction,
    absolute_kernel_moment,
    c_lambda,
    capillary_energy_density,
    capillary_integral,
    chi,
    compact_growth_check,
    default_test_functions,
    energy_balance_terms,
    entropy_derivatives,
    entropy_residual,
    kernel_moment,
    mechanical_energy_pair,
    polynomial_entropy_pair,
    signed_square_growth_check,
    total_energy_E1,
    total_energy_E2,
    weak_entropy_form,
    weak_entropy_pair,
)
from nsklimit.errors import DomainError, QuadratureError
from nsklimit.solver import run

from conftest import make_constant_trajectory

STATES = [(1.0, 0.0), (0.3, 0.7), (2.5, -1.2), (1e-3, 0.4)]


@pytest.fixture(params=[1.4, 5.0 / 3.0, 2.0, 3.0])
def kinetic(request):
    return FluidParams.kinetic(request.param)


class TestKernel:
    def test_moments(self, kinetic):
        lam = kinetic.lam
        assert c_lambda(kinetic) == pytest.approx(beta(0.5, lam + 1.0))
        assert kernel_moment(1, kinetic) == 0.0
        assert kernel_moment(2, kinetic) == pytest.approx(beta(1.5, lam + 1.0))
        assert absolute_kernel_moment(1, kinetic) == pytest.approx(beta(1.0, lam + 1.0))
        with pytest.raises(DomainError):
            kernel_moment(-1, kinetic)

    def test_indicator_for_gamma_three(self):
        p = FluidParams.kinetic(3.0)
        assert p.lam == 0.0
        assert c_lambda(p) == pytest.approx(2.0)
        assert chi(1.0, 0.5, p) == 1.0
        assert chi(1.0, 1.5, p) == 0.0
        assert_allclose(chi(np.array([4.0, 4.0]), np.array([3.9, 4.1]), p), [1.0, 0.0])

    def test_kernel_vanishes_at_vacuum_and_rejects_negative_density(self, kinetic2):
        assert chi(0.0, 0.0, kinetic2) == 0.0
        with pytest.raises(DomainError):
            chi(-1.0, 0.0, kinetic2)


class TestFunctions:
    def test_values(self):
        s = np.array([-2.0, -0.5, 0.0, 1.0])
        assert_allclose(TestFunction.half_square()(s), 0.5 * s * s)
        assert_allclose(TestFunction.signed_half_square()(s), [-2.0, -0.125, 0.0, 0.5])
        bump = TestFunction.compact_bump(-1.0, 1.0)
        assert_allclose(bump(s), [0.0, 0.75 ** 3, 1.0, 0.0])

    def test_properties(self):
        combo = 2.0 * TestFunction.signed_half_square() + TestFunction.compact_bump(0.0, 3.0)
        assert combo.breakpoints == (0.0, 3.0)
        assert not combo.has_second_derivative
        assert combo.support is None
        assert combo.label == "2*signed_half_square + 1*compact_bump[0,3]"
        assert TestFunction.compact_bump(0.0, 3.0).support == (0.0, 3.0)

    def test_from_name(self):
        assert TestFunction.from_name("half_square") == TestFunction.half_square()
        assert TestFunction.from_name("compact_bump", 0.0, 2.0).support == (0.0, 2.0)
        for bad in ("cubic", "combination"):
            with pytest.raises(DomainError):
                TestFunction.from_name(bad)
        with pytest.raises(DomainError):
            TestFunction.compact_bump(1.0, 1.0)


class TestWeakEntropyPair:
    @pytest.mark.parametrize("rho, u", STATES)
    def test_half_square_generates_mechanical_energy(self, kinetic, rho, u):
        pair = weak_entropy_pair(TestFunction.half_square(), rho, u, kinetic)
        mech = mechanical_energy_pair(rho, rho * u, kinetic)
        assert pair.eta == pytest.approx(c_lambda(kinetic) * mech.eta, rel=1e-10)
        assert pair.flux == pytest.approx(c_lambda(kinetic) * mech.flux, rel=1e-10, abs=1e-14)

    @pytest.mark.parametrize("rho, u", STATES)
    def test_low_order_generators(self, kinetic, rho, u):
        c = c_lambda(kinetic)
        mass = weak_entropy_pair(TestFunction.constant(), rho, u, kinetic)
        assert mass.eta == pytest.approx(c * rho, rel=1e-12)
        tol = 1e-13 * max(1.0, abs(c))
        assert mass.flux == pytest.approx(c * rho * u, rel=1e-12, abs=tol)
        momentum = weak_entropy_pair(TestFunction.identity(), rho, u, kinetic)
        assert momentum.eta == pytest.approx(c * rho * u, rel=1e-12, abs=tol)
        assert momentum.flux == pytest.approx(c * (rho * u * u + kinetic.a * rho ** kinetic.gamma), rel=1e-12)

    def test_signed_square_oracles(self, kinetic):
        lam, theta = kinetic.lam, kinetic.theta
        psi = TestFunction.signed_half_square()
        for rho in (0.5, 1.0, 3.0):
            pair = weak_entropy_pair(psi, rho, 0.0, kinetic)
            assert pair.eta == pytest.approx(0.0, abs=1e-13)
            expected = 0.5 * theta * rho ** (3.0 * theta + 1.0) * beta(2.0, lam + 1.0)
            assert pair.flux == pytest.approx(expected, rel=1e-10)
            eta_m, _ = entropy_derivatives(psi, rho, 0.0, kinetic)
            assert eta_m == pytest.approx(rho ** theta * beta(1.0, lam + 1.0), rel=1e-6)

    def test_second_derivative_of_half_square_entropy(self, kinetic2):
        # η = c_λ(m²/2ρ + e(ρ)) so ∂²η/∂m² = c_λ/ρ
        _, eta_mm = entropy_derivatives(TestFunction.half_square(), 2.0, 0.3, kinetic2)
        assert eta_mm == pytest.approx(c_lambda(kinetic2) / 2.0, rel=1e-5)

    def test_linearity_in_the_generator(self, kinetic2):
        rho = np.array([0.5, 1.0, 2.0])
        u = np.array([0.2, 0.0, 0.3])
        f = TestFunction.signed_half_square()
        g = TestFunction.compact_bump(-1.0, 1.5)
        combo = weak_entropy_pair(f * 2.0 + g, rho, u, kinetic2)
        expected_eta = 2.0 * weak_entropy_pair(f, rho, u, kinetic2).eta + weak_entropy_pair(g, rho, u, kinetic2).eta
        assert_allclose(combo.eta, expected_eta, rtol=1e-9, atol=1e-14)

    def test_quadrature_rules_agree(self, kinetic):
        rho = np.array([0.2, 1.0, 1.7, 4.0])
        u = np.array([0.1, -0.4, 0.9, 0.0])
        psi = TestFunction.compact_bump(-0.5, 1.0)
        jac = weak_entropy_pair(psi, rho, u, kinetic, quadrature="jacobi")
        sine = weak_entropy_pair(psi, rho, u, kinetic, quadrature="sine", check=False)
        assert_allclose(sine.eta, jac.eta, rtol=1e-8, atol=1e-12)
        assert_allclose(sine.flux, jac.flux, rtol=1e-8, atol=1e-12)

    def test_polynomial_rule_matches(self, kinetic):
        rho = np.array([0.5, 2.0])
        u = np.array([0.2, -1.0])
        psi = TestFunction.half_square()
        a = polynomial_entropy_pair(psi, rho, u, kinetic, nodes=8)
        b = weak_entropy_pair(psi, rho, u, kinetic)
        assert_allclose(a.eta, b.eta, rtol=1e-12)
        assert_allclose(a.flux, b.flux, rtol=1e-12)

    def test_vacuum_and_support(self, kinetic2):
        psi = TestFunction.compact_bump(-1.0, 1.0)
        assert weak_entropy_pair(psi, 0.0, 0.3, kinetic2).eta == 0.0
        far_right = weak_entropy_pair(psi, 1.0, 3.0, kinetic2)
        assert far_right.eta == 0.0 and far_right.flux == 0.0

    def test_shapes_broadcast(self, kinetic2):
        pair = weak_entropy_pair(TestFunction.half_square(), np.ones((2, 3)), 0.5, kinetic2)
        assert pair.eta.shape == (2, 3)

    def test_errors(self, kinetic2):
        psi = TestFunction.compact_bump(-0.5, 0.5)
        with pytest.raises(DomainError):
            weak_entropy_pair(psi, -1.0, 0.0, kinetic2)
        with pytest.raises(DomainError):
            weak_entropy_pair(psi, 1.0, np.nan, kinetic2)
        with pytest.raises(DomainError):
            weak_entropy_pair(psi, 1.0, 0.0, kinetic2, quadrature="trapezoid")
        with pytest.raises(QuadratureError):
            weak_entropy_pair(psi, 1.0, 0.0, kinetic2, nodes=1)


def test_mechanical_pair_at_vacuum(kinetic2):
    pair = mechanical_energy_pair(np.array([0.0, 1.0]), np.array([0.0, 0.5]), kinetic2)
    assert pair.eta[0] == 0.0 and pair.flux[0] == 0.0
    with pytest.raises(DomainError):
        mechanical_energy_pair(0.0, 1.0, kinetic2)


class TestGrowthChecks:
    samples = [(rho, u) for rho in np.geomspace(0.07, 15.0, 7) for u in np.linspace(-2.5, 2.5, 6)]

    def test_signed_square(self, kinetic):
        report = signed_square_growth_check(self.samples, kinetic)
        assert report.passed
        assert report.samples == len(self.samples)
        assert set(report.constants) == {"eta", "eta_m", "eta_mm"}
        assert report.lower_bound > 0.0
        assert report.to_dict()["passed"] is True

    def test_compact(self, kinetic):
        report = compact_growth_check(TestFunction.compact_bump(-1.0, 2.0), self.samples, kinetic)
        assert report.passed
        assert report.support_violations == 0
        key = "eta" if kinetic.gamma <= 3.0 else "flux"
        assert set(report.constants) == {key, "derivatives"}

    def test_compact_flux_branch_for_stiff_gas(self):
        report = compact_growth_check(TestFunction.compact_bump(-1.0, 2.0), self.samples, FluidParams.kinetic(4.0))
        assert set(report.constants) == {"flux", "derivatives"}

    def test_rejects_bad_input(self, kinetic2):
        with pytest.raises(DomainError):
            compact_growth_check(TestFunction.half_square(), self.samples, kinetic2)
        with pytest.raises(DomainError):
            signed_square_growth_check([(0.0, 1.0)], kinetic2)
        with pytest.raises(DomainError):
            signed_square_growth_check([], kinetic2)


class TestEnergies:
    def test_reference_state_has_zero_energy(self, kinetic2, rarefaction_far):
        grid = Grid1D(-3.0, 3.0, 60)
        p = kinetic2.with_epsilon(0.1)
        assert total_energy_E2(reference_state(rarefaction_far, grid, p), rarefaction_far, p, grid) == pytest.approx(0.0, abs=1e-14)
        original = reference_state(rarefaction_far, grid, p, Formulation.ORIGINAL_U)
        assert total_energy_E1(original, rarefaction_far, p, grid) == pytest.approx(0.0, abs=1e-12)

    def test_formulation_guards(self, kinetic2, uniform_far):
        grid = Grid1D(-1.0, 1.0, 10)
        effective = State(np.ones(10), np.zeros(10))
        original = State(np.ones(10), np.zeros(10), Formulation.ORIGINAL_U)
        with pytest.raises(DomainError):
            total_energy_E2(original, uniform_far, kinetic2, grid)
        with pytest.raises(DomainError):
            total_energy_E1(effective, uniform_far, kinetic2, grid)

    def test_kinetic_part(self, kinetic2, uniform_far):
        grid = Grid1D(-1.0, 1.0, 10)
        state = State(np.ones(10), np.full(10, 0.5))
        assert total_energy_E2(state, uniform_far, kinetic2, grid) == pytest.approx(0.5 * 0.25 * 2.0)

    def test_capillary_integral(self):
        eps = 0.3
        grid = Grid1D(0.0, 2.0 * math.pi, 400)
        def root(x):
            return 1.0 + 0.1 * np.sin(x)

        gl, gr = grid.ghost_x(1)
        ghosts = (float(root(gl[0]) ** 2), float(root(gr[0]) ** 2))
        value = capillary_integral(root(grid.x) ** 2, grid, eps, ghosts)
        assert value == pytest.approx(eps ** 2 * 0.01 * math.pi, rel=1e-3)
        assert capillary_energy_density(4.0, 2.0, 0.5) == pytest.approx(0.0625)

    def test_balance_terms_vanish_for_uniform_state(self, uniform_far):
        p = FluidParams.kinetic(2.0, epsilon=0.1)
        grid = Grid1D(-1.0, 1.0, 20)
        energy, dissipation, work = energy_balance_terms(np.ones(20), np.zeros(20), uniform_far, p, grid)
        assert (energy, dissipation, work) == (0.0, 0.0, 0.0)

    def test_dissipation_is_positive_for_a_bump(self, uniform_far):
        p = FluidParams.kinetic(2.0, epsilon=0.1)
        grid = Grid1D(-3.0, 3.0, 200)
        rho = 1.0 + 0.3 * np.exp(-grid.x ** 2)
        energy, dissipation, work = energy_balance_terms(rho, np.zeros(200), uniform_far, p, grid)
        assert energy > 0.0 and dissipation > 0.0
        assert work == pytest.approx(0.0, abs=1e-12)


class TestResidual:
    def test_constant_trajectory(self, constant_trajectory):
        assert entropy_residual(constant_trajectory) < 1e-12
        assert entropy_residual(constant_trajectory, TestFunction.half_square()) < 1e-12

    def test_standing_shock_is_admissible(self, standing_shock):
        assert entropy_residual(standing_shock) < 1e-8
        assert entropy_residual(standing_shock, TestFunction.half_square()) < 1e-8

    def test_reversed_standing_shock_violates(self, standing_shock):
        reversed_traj = standing_shock.time_reversed()
        assert entropy_residual(reversed_traj) > 1e-3
        assert entropy_residual(reversed_traj, TestFunction.half_square()) > 1e-3

    def test_form_shapes(self, standing_shock):
        weak, norm = weak_entropy_form(standing_shock, space_halfwidth=4, space_stride=4)
        assert weak.shape == norm.shape
        assert weak.shape[0] == len(standing_shock.snapshots) - 2
        assert np.all(norm > 0.0)

    def test_needs_three_snapshots(self, kinetic2, uniform_far):
        traj = make_constant_trajectory(Grid1D(-1.0, 1.0, 16), kinetic2, uniform_far, [0.0, 1.0])
        with pytest.raises(DomainError):
            entropy_residual(traj)

    @pytest.mark.slow
    def test_nsk_residual_shrinks_with_epsilon(self, rarefaction_far):
        residuals = []
        bounds = []
        for eps in (0.125, 0.0625, 0.03125):
            p = FluidParams.kinetic(2.0, epsilon=eps)
            grid = Grid1D(-3.0, 3.0, int(6.0 * 4 / eps))
            scheme = SchemeConfig(t_end=0.4, snapshot_times=[0.05 * k for k in range(1, 8)])
            traj = run(mollified_riemann_data(rarefaction_far, grid, p), rarefaction_far, p, grid, scheme)
            residuals.append(entropy_residual(traj))
            bounds.append(4.0 * (eps + grid.h))
        assert all(r <= b for r, b in zip(residuals, bounds))
        assert residuals[-1] <= 0.5 * residuals[0]


def test_default_test_functions(rarefaction_far):
    psis = list(default_test_functions(rarefaction_far))
    assert psis[0] == TestFunction.half_square()
    assert psis[1].support == (-1.5, 1.5)
