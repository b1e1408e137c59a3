import math

import numpy as np
import pytest

from ecoplus.consumption import (
    JOULES_PER_KWH, cpem_energy, cpem_power, evaluate, kmmk_fuel, kmmk_rate, regen_efficiency,
    relative_difference, wheel_power,
)
from ecoplus.dynamics import Trajectory, rollout
from ecoplus.errors import ModelError
from ecoplus.models import BoundarySpec, CpemParams, KmmkParams


def test_kmmk_reference_point():
    p = KmmkParams()
    cruise = p.c0 + 10 * p.c1 + 100 * p.c2 + 1000 * p.c3
    assert cruise == pytest.approx(0.3875, abs=1e-12)
    assert kmmk_rate(10.0, 0.5, p) == pytest.approx(0.74725, abs=1e-3)


@pytest.mark.parametrize("u", [0.0, -1.0, 2.6])
def test_kmmk_burns_nothing_outside_its_region(u):
    assert kmmk_rate(10.0, u, KmmkParams()) == 0.0


def test_kmmk_tolerates_round_off_at_u_max():
    p = KmmkParams()
    assert kmmk_rate(10.0, p.u_max + 1e-9, p) > 0.0


def test_regen_efficiency():
    p = CpemParams()
    assert regen_efficiency(-1.0, p) == pytest.approx(math.exp(-0.0411))
    assert regen_efficiency(0.0, p) == 0.0
    assert regen_efficiency(1.0, p) == 0.0
    eff = regen_efficiency(np.array([-0.1, -1.0, -3.0]), p)
    assert np.all(np.diff(eff) > 0)


def test_cpem_power_sign_follows_wheel_power():
    p = CpemParams()
    assert cpem_power(10.0, 1.0, p) > 0
    assert cpem_power(10.0, -2.0, p) < 0
    assert cpem_power(0.0, 1.0, p) == 0.0


def test_cpem_traction_and_recuperation_efficiencies():
    p = CpemParams()
    pw = wheel_power(10.0, 1.0, p)
    assert cpem_power(10.0, 1.0, p) == pytest.approx(pw / (p.eta_d * p.eta_em) * p.eta_b)
    pw = wheel_power(10.0, -2.0, p)
    expected = pw / (p.eta_d * p.eta_em) * regen_efficiency(-2.0, p) * p.eta_b
    assert cpem_power(10.0, -2.0, p) == pytest.approx(expected)


def test_negative_speed_is_rejected():
    with pytest.raises(ModelError):
        cpem_power(-1.0, 0.0, CpemParams())
    with pytest.raises(ModelError):
        kmmk_rate(-0.5, 1.0, KmmkParams())


def test_cpem_energy_integrates_first_h_rates():
    p = CpemParams()
    H, dt = 50, 0.1
    traj = Trajectory(dt=dt, x=np.arange(H + 1) * dt * 8.0, v=np.full(H + 1, 8.0), a=np.zeros(H + 1),
                      u=np.zeros(H + 1), J=np.zeros(H))
    rep = cpem_energy(traj, p)
    assert rep.unit == "kWh"
    assert rep.total == pytest.approx(cpem_power(8.0, 0.0, p) * H * dt / JOULES_PER_KWH)
    assert rep.rates.shape == (H + 1,)


def test_kmmk_fuel_counts_anomalies(kmmk_coeffs):
    p = KmmkParams()
    u = np.full(11, 3.0)
    traj = rollout(u, BoundarySpec(v0=5.0), kmmk_coeffs, dt=0.1)
    rep = kmmk_fuel(traj, p)
    assert rep.total == 0.0
    assert rep.anomalies == 10


def test_evaluate_dispatches_on_model(kmmk_coeffs):
    traj = rollout(np.full(11, 0.5), BoundarySpec(v0=5.0), kmmk_coeffs, dt=0.1)
    assert evaluate(traj, KmmkParams()).unit == "mL"
    assert evaluate(traj, CpemParams()).unit == "kWh"
    with pytest.raises(ModelError):
        evaluate(traj, object())


def test_relative_difference():
    assert relative_difference(0.0, 0.0) == 0.0
    assert relative_difference(1.0, 2.0) == pytest.approx(50.0)
    assert relative_difference(-1.0, 1.0) == pytest.approx(200.0)
