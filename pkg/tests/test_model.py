import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from coldcavity.model import (CavityState, DomainError, DriveSpec, ModelParams, atomic_absorption,
                              atomic_phase, pump_steady, rhs)

P100 = ModelParams(C=100, delta_a=44)


def test_gamma_cav_is_derived():
    p = ModelParams()
    assert p.gamma_cav == p.t_mirror**2 / 2
    assert math.isclose(p.gamma_cav, 0.05, rel_tol=1e-12)


def test_linewidth_near_5_mhz():
    lw = ModelParams().linewidth_hz
    assert abs(lw - 4.77e6) < 0.01e6
    assert abs(lw - 5e6) / 5e6 < 0.05


@pytest.mark.parametrize("bad", [dict(tau=0), dict(t_mirror=1.0), dict(t_mirror=0.0), dict(loss_rt=1.0),
                                 dict(loss_rt=-0.1), dict(C=-1), dict(Gamma=0), dict(gamma_p=-1),
                                 dict(beta=-1), dict(delta_a=math.inf)])
def test_params_reject_out_of_domain(bad):
    with pytest.raises(DomainError):
        ModelParams(**bad)


def test_atomic_phase_examples():
    assert math.isclose(atomic_phase(0.0, 0.0, P100), 440 / 1937, rel_tol=1e-14)
    assert atomic_phase(5.0, 0.3, P100.with_(C=0)) == 0
    assert atomic_phase(1e15, 0.0, P100) < 1e-12


def test_atomic_phase_negative_intensity():
    with pytest.raises(DomainError):
        atomic_phase(-1.0, 0.0, P100)


def test_atomic_absorption_examples():
    on = dict(absorption_on=True)
    assert math.isclose(atomic_absorption(0.0, 0.0, ModelParams(C=300, delta_a=0, **on)), 30.0, rel_tol=1e-14)
    assert atomic_absorption(3.0, 0.2, P100) == 0
    assert math.isclose(atomic_absorption(1936.0, 0.0, P100.with_(**on)), 10 / 3873, rel_tol=1e-14)
    with pytest.raises(DomainError):
        atomic_absorption(-1.0, 0.0, P100.with_(**on))


def test_pump_steady_examples():
    prm = ModelParams(gamma_p=1e4, beta=2e5)
    assert pump_steady(0.0, prm) == 0
    assert math.isclose(pump_steady(1.0, prm), 20 / 21, rel_tol=1e-14)
    assert pump_steady(prm.gamma_p / prm.beta, prm) == 0.5
    assert pump_steady(0.0, prm.with_(gamma_p=0.0)) == 0


def test_rhs_empty_field_injection():
    prm = ModelParams(C=37.0)
    d = rhs(CavityState(0j, 0.0), DriveSpec(alpha_in=1.0), prm)
    assert math.isclose(d.alpha.real, prm.t_mirror / prm.tau, rel_tol=1e-14)
    assert d.alpha.imag == 0
    assert d.p == 0


def test_rhs_empty_cavity_resonance_is_steady():
    prm = ModelParams(C=0.0)
    a = prm.t_mirror * 1.0 / prm.gamma_cav
    d = rhs(CavityState(complex(a), 0.0), DriveSpec(alpha_in=1.0), prm)
    assert abs(d.alpha) < 1e-9 * a / prm.tau


@given(st.floats(-3, 3))
def test_empty_cavity_lorentzian(phi_0):
    prm = ModelParams(C=0.0)
    g = prm.gamma_cav
    alpha = prm.t_mirror / (g - 1j * phi_0)
    d = rhs(CavityState(alpha, 0.0), DriveSpec(alpha_in=1.0, phi_0=phi_0), prm)
    assert abs(d.alpha) * prm.tau < 1e-12 * max(1, abs(alpha))
    assert math.isclose(abs(alpha) ** 2, prm.t_mirror**2 / (g**2 + phi_0**2), rel_tol=1e-12)


@given(st.floats(0, 1e4), st.floats(0, 1))
def test_phase_decomposition(I, p):
    lhs = atomic_phase(I, p, P100) - atomic_phase(I, 0.0, P100)
    assert math.isclose(lhs, p * P100.phi_linear, rel_tol=1e-12, abs_tol=1e-15)


@given(st.floats(0, 1e4), st.floats(0, 1), st.floats(1, 100), st.floats(1, 400))
def test_phase_monotone(I, p, delta, C):
    prm = ModelParams(C=C, delta_a=delta)
    h = 1e-3 * (1 + I)
    assert atomic_phase(I + h, p, prm) < atomic_phase(I, p, prm)
    if p < 0.999:
        assert atomic_phase(I, p + 1e-3, prm) > atomic_phase(I, p, prm)


@given(st.floats(0, 1e4), st.floats(0, 1))
def test_orientation_rate_keeps_unit_interval(I, p):
    prm = ModelParams()
    a = math.sqrt(I)
    d0 = rhs(CavityState(complex(a), 0.0), DriveSpec(alpha_in=0.0), prm)
    d1 = rhs(CavityState(complex(a), 1.0), DriveSpec(alpha_in=0.0), prm)
    assert d0.p >= 0 and d1.p <= 0


def test_drive_validation():
    with pytest.raises(DomainError):
        DriveSpec(alpha_in=-1.0)
    with pytest.raises(DomainError):
        DriveSpec(alpha_in=1.0, T_decay=0.0)
    with pytest.raises(DomainError):
        DriveSpec.from_intensity(-1.0)
    d = DriveSpec.from_intensity(4.0, phi_0=0.1, phi0_rate=2.0, T_decay=1e-3)
    assert d.I_in == 4.0
    assert d.phi0_at(0.5) == pytest.approx(1.1)
    assert d.C_factor_at(1e-3) == pytest.approx(math.exp(-1))
