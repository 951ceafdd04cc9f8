"""Monitored quantities and dissipation residuals."""

import math

import numpy as np
import pytest

from kslab.diagnostics import (
    BlowupLimits,
    Monitor,
    MonitorSample,
    blow_up_suspect,
    energy_functional,
    energy_residual,
    energy_rhs,
    linf,
    lower_bound_check,
    lp_norm,
    mass,
    max_face_gradient,
    min_field,
    residual_series,
)
from kslab.errors import DomainError, ValidationError
from kslab.sensitivity import EnergyParams, SensitivityParams, phi, phi_floor
from kslab.solver import Grid, SimState


def unit_square(n=16):
    return Grid(dim=2, extents=(1.0, 1.0), cells=(n, n))


class TestNorms:
    def test_mass_of_constant(self):
        g = unit_square(32)
        assert mass(g.field(2.0), g) == pytest.approx(2.0, rel=1e-14)

    def test_mass_of_indicator(self):
        g = unit_square(16)
        u = g.field(0.0)
        u[:8, :] = 4.0  # half the cells at 4
        assert mass(u, g) == pytest.approx(2.0, rel=1e-14)

    def test_mass_matches_extended_precision_sum(self):
        g = unit_square(24)
        rng = np.random.default_rng(3)
        u = rng.random(g.shape)
        oracle = math.fsum(u.ravel().tolist()) * g.cellvol
        assert mass(u, g) == pytest.approx(oracle, rel=1e-13)

    def test_lp_of_constant(self):
        g = unit_square(16)
        for p in (1.0, 2.0, 3.5):
            assert lp_norm(g.field(2.5), g, p) == pytest.approx(2.5, rel=1e-13)

    def test_l1_equals_mass_for_nonnegative(self):
        g = unit_square(16)
        rng = np.random.default_rng(8)
        u = rng.random(g.shape)
        assert lp_norm(u, g, 1.0) == pytest.approx(mass(u, g), rel=1e-14)

    def test_two_level_closed_form(self):
        g = unit_square(16)
        u = g.field(1.0)
        u[:8, :] = 3.0
        # half at 3, half at 1: (0.5*3^p + 0.5*1^p)^(1/p)
        p = 2.5
        assert lp_norm(u, g, p) == pytest.approx((0.5 * 3**p + 0.5) ** (1 / p), rel=1e-13)

    def test_min_linf(self):
        g = unit_square(8)
        u = g.field(1.0)
        u[0, 0] = -2.0
        u[3, 3] = 0.5
        assert min_field(u) == -2.0
        assert linf(u) == 2.0

    def test_p_below_one_rejected(self):
        g = unit_square(8)
        with pytest.raises(ValidationError):
            lp_norm(g.field(1.0), g, 0.5)


class TestEnergyFunctional:
    sp = SensitivityParams(K=0.5, k=2.0, a=0.3)
    ep = EnergyParams(p=2.0, r=0.8, eps=0.0, eta=0.5)

    def test_reduces_to_lp_power_at_floor(self):
        g = unit_square(12)
        rng = np.random.default_rng(11)
        u = rng.random(g.shape)
        v = g.field(self.ep.eta)
        got = energy_functional(u, v, g, self.ep, self.sp)
        assert got == pytest.approx(lp_norm(u, g, 2.0) ** 2, rel=1e-13)

    def test_unit_density_sums_weight(self):
        g = unit_square(12)
        rng = np.random.default_rng(12)
        v = self.ep.eta + rng.random(g.shape)
        got = energy_functional(g.field(1.0), v, g, self.ep, self.sp)
        oracle = float(np.sum(phi(v, self.ep, self.sp))) * g.cellvol
        assert got == pytest.approx(oracle, rel=1e-13)

    def test_pinched_between_weighted_norms(self):
        g = unit_square(12)
        rng = np.random.default_rng(13)
        u = 0.5 + rng.random(g.shape)
        v = self.ep.eta + 3.0 * rng.random(g.shape)
        e = energy_functional(u, v, g, self.ep, self.sp)
        lp_p = lp_norm(u, g, 2.0) ** 2
        assert phi_floor(self.ep, self.sp) * lp_p - 1e-13 <= e <= lp_p + 1e-13

    def test_trivial_weight_is_exact_norm_power(self):
        g = unit_square(12)
        rng = np.random.default_rng(14)
        u = rng.random(g.shape)
        v = self.ep.eta + rng.random(g.shape)
        ep0 = EnergyParams(p=2.0, r=0.0, eps=0.0, eta=0.5)
        assert energy_functional(u, v, g, ep0, self.sp) == pytest.approx(
            lp_norm(u, g, 2.0) ** 2, rel=1e-14
        )

    def test_below_floor_rejected(self):
        g = unit_square(8)
        v = g.field(self.ep.eta)
        v[2, 2] = 0.4 * self.ep.eta
        with pytest.raises(DomainError):
            energy_functional(g.field(1.0), v, g, self.ep, self.sp)


class TestResiduals:
    def test_stationary_state_residual_nonpositive(self):
        # at a uniform fixed point dE/dt = 0 and the bound's slack is exactly
        # the growth-constant construction, so the residual is -rhs <= 0
        g = unit_square(10)
        sp = SensitivityParams(K=0.5, k=1.0, a=0.0)
        ep = EnergyParams(p=2.0, r=0.6, eps=0.0, eta=0.4)
        ubar = 2.0
        states = [(t, g.field(ubar), g.field(ubar)) for t in (0.0, 0.1, 0.2)]
        res = energy_residual(states, g, ep, sp, c_const=0.6)
        assert math.isnan(res[0]) and math.isnan(res[-1])
        assert res[1] == pytest.approx(0.0, abs=1e-12)

    def test_insufficient_samples(self):
        g = unit_square(8)
        sp = SensitivityParams(K=0.5, k=1.0, a=0.0)
        ep = EnergyParams(p=2.0, r=0.6, eps=0.0, eta=0.4)
        with pytest.raises(ValidationError):
            energy_residual(
                [(0.0, g.field(1.0), g.field(1.0))] * 2, g, ep, sp, c_const=0.6
            )
        with pytest.raises(ValidationError):
            residual_series([0.0, 0.1], [1.0, 1.0], [0.0, 0.0])

    def test_series_matches_manual_difference(self):
        ts = [0.0, 0.1, 0.25, 0.4]
        E = [10.0, 9.0, 8.5, 8.4]
        rhs = [0.0, -1.0, -0.5, 0.0]
        out = residual_series(ts, E, rhs)
        assert math.isnan(out[0]) and math.isnan(out[3])
        assert out[1] == pytest.approx((8.5 - 10.0) / 0.25 - (-1.0))
        assert out[2] == pytest.approx((8.4 - 9.0) / 0.3 - (-0.5))

    def test_rhs_formula(self):
        g = unit_square(10)
        sp = SensitivityParams(K=0.5, k=1.0, a=0.2)
        ep = EnergyParams(p=2.0, r=0.6, eps=0.0, eta=0.4)
        rng = np.random.default_rng(15)
        u = 0.5 + rng.random(g.shape)
        v = 0.5 + rng.random(g.shape)
        w = phi(v, ep, sp)
        expected = 0.9 * float(np.sum(u**2 * w)) * g.cellvol - 0.6 * float(
            np.sum(u**3 * w / (0.2 + v))
        ) * g.cellvol
        assert energy_rhs(u, v, g, ep, sp, c_const=0.9) == pytest.approx(
            expected, rel=1e-13
        )


class TestFloorAndBlowup:
    def test_lower_bound_margin(self):
        g = unit_square(8)
        assert lower_bound_check(g.field(0.4), 0.4) == pytest.approx(0.0)
        assert lower_bound_check(g.field(0.8), 0.4) == pytest.approx(0.4)

    def test_max_face_gradient(self):
        g = Grid(dim=1, extents=(1.0,), cells=(8,))
        v = np.zeros(g.shape)
        v[4] = 1.0
        assert max_face_gradient(v, g) == pytest.approx(8.0)

    def test_blow_up_flags(self):
        limits = BlowupLimits(linf_max=1e6, grad_max=1e6, dt_min=1e-10)
        ok = MonitorSample(
            t=1.0, mass=1.0, min_v=0.5, linf_u=10.0, lp_u=2.0,
            energy=1.0, residual=0.0, dt=1e-3, max_grad_v=5.0,
        )
        assert not blow_up_suspect(ok, limits)
        import dataclasses
        assert blow_up_suspect(dataclasses.replace(ok, linf_u=1e7), limits)
        assert blow_up_suspect(dataclasses.replace(ok, max_grad_v=1e7), limits)
        assert blow_up_suspect(dataclasses.replace(ok, dt=1e-11), limits)
        assert blow_up_suspect(dataclasses.replace(ok, linf_u=math.inf), limits)


class TestMonitor:
    def test_residuals_attached_on_finalize(self):
        g = unit_square(10)
        sp = SensitivityParams(K=0.5, k=1.0, a=0.0)
        ep = EnergyParams(p=2.0, r=0.6, eps=0.0, eta=0.4)
        mon = Monitor(cadence=1, p=2.0, energy=ep, sp=sp, c_const=0.6)
        for t in (0.0, 0.1, 0.2, 0.3):
            mon.record(SimState(grid=g, u=g.field(2.0), v=g.field(2.0), t=t, dt=0.1))
        rows = mon.finalize()
        assert math.isnan(rows[0].residual) and math.isnan(rows[-1].residual)
        assert rows[1].residual == pytest.approx(0.0, abs=1e-12)
        assert rows[1].energy > 0.0

    def test_monitor_without_energy(self):
        g = unit_square(8)
        mon = Monitor(cadence=1, p=2.0)
        mon.record(SimState(grid=g, u=g.field(1.0), v=g.field(1.0)))
        rows = mon.finalize()
        assert math.isnan(rows[0].energy) and math.isnan(rows[0].residual)
        assert rows[0].lp_u == pytest.approx(1.0)

    def test_energy_monitor_requires_context(self):
        ep = EnergyParams(p=2.0, r=0.6, eps=0.0, eta=0.4)
        with pytest.raises(ValidationError):
            Monitor(cadence=1, energy=ep)
