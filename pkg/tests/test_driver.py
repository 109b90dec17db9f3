import numpy as np
import pytest

from costeer.driver import (DRIVER_POPULATION, Driver, DriverParams,
                            IntentMode)


class TestDriverTorque:
    def test_on_target_zero(self):
        d = Driver(DriverParams())
        assert d.torque(0.0, 0.0, 0.0) == 0.0

    def test_overtake_pushes_left(self):
        d = Driver(DriverParams())
        d.intent.mode = IntentMode.OVERTAKE
        d.intent.target_offset = 3.5
        t = d.torque(0.0, 0.0, 0.0)
        assert 0.0 < t <= d.params.max_torque

    def test_clamped(self):
        d = Driver(DriverParams(max_torque=4.0))
        d.intent.target_offset = 50.0
        assert d.torque(0.0, 0.0, 0.0) == 4.0

    def test_full_compliance_yields_completely(self):
        p = DriverParams(compliance=1.0)
        d = Driver(p)
        d.intent.target_offset = 3.5
        pd_alone = d.torque(0.0, 0.0, 0.0)
        d2 = Driver(p)
        d2.intent.target_offset = 3.5
        assert d2.torque(0.0, 0.0, -pd_alone - 1.0) == 0.0

    def test_zero_compliance_ignores_felt(self):
        p = DriverParams(compliance=0.0)
        a = Driver(p)
        a.intent.target_offset = 3.5
        b = Driver(p)
        b.intent.target_offset = 3.5
        assert a.torque(0.0, 0.0, 0.0) == b.torque(0.0, 0.0, -8.0)

    def test_aligned_felt_torque_not_subtracted(self):
        p = DriverParams(compliance=1.0)
        a = Driver(p)
        a.intent.target_offset = 3.5
        assert a.torque(0.0, 0.0, +5.0) == Driver(p).torque(0.0, 0.0, 0.0) \
            or a.torque(0.0, 0.0, +5.0) > 0


class TestIntentMachine:
    def test_no_overtake_before_time(self):
        d = Driver(DriverParams())
        out = d.step_intent("corrective", 10.0, 15.0, False, False, 0.0)
        assert out.mode is IntentMode.KEEP_LANE

    def test_overtake_at_scripted_time_once(self):
        d = Driver(DriverParams())
        out = d.step_intent("corrective", 15.0, 15.0, False, False, 0.0)
        assert out.mode is IntentMode.OVERTAKE
        assert out.target_offset == 3.5
        # completing the maneuver does not rearm the script
        d.intent.mode = IntentMode.KEEP_LANE
        out = d.step_intent("corrective", 20.0, 15.0, False, False, 0.0)
        assert out.mode is IntentMode.KEEP_LANE

    def test_abort_after_fixed_delay(self):
        d = Driver(DriverParams(delay_low=0.9, delay_high=0.9))
        d.step_intent("corrective", 15.0, 15.0, False, False, 0.0)
        d.step_intent("corrective", 15.0, 15.0, True, False, 1.0)
        out = d.step_intent("corrective", 15.85, 15.0, True, False, 1.2)
        assert out.mode is IntentMode.OVERTAKE
        out = d.step_intent("corrective", 15.9, 15.0, True, False, 1.2)
        assert out.mode is IntentMode.ABORT

    def test_haptic_cue_triggers_reaction_clock(self):
        d = Driver(DriverParams(delay_low=0.5, delay_high=0.5,
                                torque_cue=3.5))
        d.step_intent("corrective", 15.0, 15.0, False, False, 0.0)
        # strong opposing torque stands in for seeing the threat
        d.step_intent("corrective", 16.0, 15.0, False, False, 1.0,
                      felt_torque=-4.0)
        out = d.step_intent("corrective", 16.5, 15.0, False, False, 1.0)
        assert out.mode is IntentMode.ABORT

    def test_evade_after_delay_then_recenters(self):
        d = Driver(DriverParams(delay_low=0.6, delay_high=0.6))
        d.step_intent("evasive", 5.0, None, True, False, 0.0)
        out = d.step_intent("evasive", 5.55, None, True, False, 0.0)
        assert out.mode is IntentMode.KEEP_LANE
        out = d.step_intent("evasive", 5.6, None, True, False, 0.0)
        assert out.mode is IntentMode.EVADE
        assert out.target_offset == -1.0
        out = d.step_intent("evasive", 7.0, None, False, True, -0.9)
        assert out.mode is IntentMode.EVADE       # returning, still rattled
        assert out.target_offset == 0.0
        out = d.step_intent("evasive", 8.0, None, False, True, -0.1)
        assert out.mode is IntentMode.KEEP_LANE

    def test_delay_samples_respect_bounds(self):
        d = Driver(DriverParams(delay_low=0.5, delay_high=1.5, seed=7))
        samples = np.array([d.sample_delay() for _ in range(1000)])
        assert samples.min() >= 0.5
        assert samples.max() <= 1.5
        # spread across the interval, not collapsed
        assert samples.std() > 0.2


class TestDeterminism:
    def test_identical_seeds_identical_traces(self):
        def trace(seed):
            d = Driver(DriverParams(seed=seed))
            d.intent.mode = IntentMode.ABORT
            d.intent.target_offset = 0.0
            out = []
            for i in range(100):
                out.append(d.torque(0.5 * np.sin(i / 7), 0.05, -1.0))
            return out
        assert trace(42) == trace(42)

    def test_population_is_eight_documented_sets(self):
        assert len(DRIVER_POPULATION) == 8
        for p in DRIVER_POPULATION:
            assert 2.0 <= p.max_torque <= 10.0
            assert 0.5 <= p.delay_low <= p.delay_high <= 1.5
            assert 0.3 <= p.compliance <= 0.9
            assert 0.6 <= p.preview_time <= 1.2

    def test_invalid_params_rejected(self):
        with pytest.raises(ValueError):
            DriverParams(max_torque=1.0)
        with pytest.raises(ValueError):
            DriverParams(delay_low=1.0, delay_high=0.5)
