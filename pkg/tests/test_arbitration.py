import math

import numpy as np
import pytest

from costeer.arbitration import (AuthorityFilter, RiskInputs,
                                 corrective_authority, evasive_authority,
                                 threat_assessment)
from costeer.engine import Actor, WorldState
from costeer.fuzzy import FuzzySystem
from costeer.vehicle import RoadFrame, VehicleState


class TestEvasiveAuthority:
    def test_all_safe(self):
        cmd = evasive_authority(np.full(30, 60.0))
        assert cmd.lam == 3.0
        assert np.all(cmd.e_y_upper == 1.5)

    def test_single_tight_stage(self):
        d = np.full(30, 60.0)
        d[7] = 40.0
        cmd = evasive_authority(d)
        assert cmd.lam == 12.0
        assert cmd.e_y_upper[7] == -1.25
        assert np.all(np.delete(cmd.e_y_upper, 7) == 1.5)

    def test_boundary_belongs_to_safe_branch(self):
        cmd = evasive_authority(np.full(30, 50.0))
        assert cmd.lam == 3.0
        assert np.all(cmd.e_y_upper == 1.5)

    def test_idempotent_and_order_independent(self, rng):
        d = rng.uniform(10, 120, 30)
        a = evasive_authority(d)
        b = evasive_authority(d)
        assert a.lam == b.lam
        assert np.array_equal(a.e_y_upper, b.e_y_upper)
        perm = rng.permutation(30)
        c = evasive_authority(d[perm])
        assert c.lam == a.lam
        assert np.array_equal(c.e_y_upper, a.e_y_upper[perm])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            evasive_authority(np.zeros(0))


class TestCorrectiveAuthority:
    def test_nan_rejected(self):
        fs = FuzzySystem.default_corrective()
        with pytest.raises(ValueError):
            corrective_authority(RiskInputs(e_y=float("nan"), e_y_dot=0.0,
                                            dtc=50.0), fs)

    def test_bounded(self, rng):
        fs = FuzzySystem.default_corrective()
        for _ in range(200):
            lam = corrective_authority(
                RiskInputs(e_y=rng.uniform(-3, 7),
                           e_y_dot=rng.uniform(-2, 2),
                           dtc=rng.uniform(0, 300)), fs)
            assert 0.0 <= lam <= 8.0


class TestRiskInputs:
    def test_negative_dtc_rejected(self):
        with pytest.raises(ValueError):
            RiskInputs(e_y=0.0, e_y_dot=0.0, dtc=-1.0)

    def test_negative_ttc_rejected(self):
        with pytest.raises(ValueError):
            RiskInputs(e_y=0.0, e_y_dot=0.0, dtc=1.0, ttc=-0.5)


def _world(ego_speed=25.0, threat=None, actors=None):
    acts = actors if actors is not None else ([threat] if threat else [])
    return WorldState(time=0.0,
                      ego=VehicleState(x=0.0, y=0.0, v_x=ego_speed),
                      ego_road=RoadFrame(), e_y_dot=0.0, actors=acts)


class TestThreatAssessment:
    def test_oncoming_ttc(self):
        # bumper gap 50 m, closing 25 + 25 m/s -> 1.0 s
        threat = Actor("car", x=50.0 + 4.5, y=0.0, speed=25.0, direction=-1,
                       role="threat")
        risk = threat_assessment(_world(threat=threat))
        assert risk.dtc == pytest.approx(50.0)
        assert risk.ttc == pytest.approx(1.0)

    def test_receding_threat_has_no_ttc(self):
        threat = Actor("car", x=60.0, y=0.0, speed=30.0, direction=1,
                       role="threat")
        risk = threat_assessment(_world(ego_speed=25.0, threat=threat))
        assert risk.ttc is None
        assert math.isfinite(risk.dtc)

    def test_no_threat_sentinel(self):
        risk = threat_assessment(_world())
        assert risk.dtc == math.inf
        assert risk.ttc is None

    def test_nearest_oncoming_picked_without_role(self):
        a1 = Actor("car", x=200.0, y=3.5, speed=20.0, direction=-1,
                   role="traffic")
        a2 = Actor("car", x=80.0, y=3.5, speed=20.0, direction=-1,
                   role="traffic")
        behind = Actor("car", x=-50.0, y=3.5, speed=20.0, direction=-1,
                       role="traffic")
        world = _world(actors=[a1, a2, behind])
        assert world.threat_actor() is a2


class TestAuthorityFilter:
    def test_first_order_convergence(self):
        f = AuthorityFilter(time_constant=0.2, dt=0.05, initial=0.0)
        for _ in range(40):   # 2 s >> 5 time constants
            out = f.step(8.0)
        assert out == pytest.approx(8.0, abs=0.01)

    def test_single_step_fraction(self):
        f = AuthorityFilter(time_constant=0.2, dt=0.05, initial=0.0)
        assert f.step(1.0) == pytest.approx(1.0 - math.exp(-0.25))
