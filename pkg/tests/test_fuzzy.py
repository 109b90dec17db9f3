import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from costeer.fuzzy import FuzzySystem


@pytest.fixture(scope="module")
def fs():
    return FuzzySystem.default_corrective()


class TestMembership:
    def test_partition_of_unity_on_inputs(self, fs):
        for var in (fs.position, fs.intention, fs.risk):
            xs = np.linspace(var.lo, var.hi, 2001)
            sums = np.array([sum(s.grade(x) for s in var.sets.values())
                             for x in xs])
            assert sums.min() >= 0.999
            assert sums.max() <= 1.001

    def test_grades_in_unit_interval(self, fs, rng):
        for var in (fs.position, fs.intention, fs.risk, fs.authority):
            for x in rng.uniform(var.lo - 5, var.hi + 5, 200):
                for g in var.grades(x).values():
                    assert 0.0 <= g <= 1.0

    def test_nan_rejected(self, fs):
        with pytest.raises(ValueError):
            fs.position.grades(float("nan"))


class TestRuleTable:
    def test_eighteen_rules(self, fs):
        assert len(fs.rules) == 18
        assert len(set(r[:3] for r in fs.rules)) == 18

    def test_near_row_escalates_border_away_and_left(self, fs):
        near = {r[:2]: r[3] for r in fs.rules if r[2] == "near"}
        assert near[("border", "away")] == "high"
        for intent in ("return", "stay", "away"):
            assert near[("left", intent)] == "high"
            assert near[("right", intent)] == "medium"
        assert near[("border", "return")] == "medium"
        assert near[("border", "stay")] == "medium"

    def test_far_row_releases_where_near_escalates(self, fs):
        near = {r[:2]: r[3] for r in fs.rules if r[2] == "near"}
        far = {r[:2]: r[3] for r in fs.rules if r[2] == "far"}
        for key, cons in near.items():
            assert far[key] == ("low" if cons == "high" else cons)

    def test_prototypes_activate_table_consequents(self, fs):
        # at every crisp prototype corner exactly one rule fires fully
        for pos, intent, risk, cons in fs.rules:
            acts = fs.activations(fs.prototypes["position"][pos],
                                  fs.prototypes["intention"][intent],
                                  fs.prototypes["risk"][risk])
            best = fs.rules[int(np.argmax(acts))]
            assert best[3] == cons
            assert max(acts) == pytest.approx(1.0)


class TestInference:
    def test_high_corner_hits_stated_maximum_region(self, fs):
        lam = fs.infer(3.5, 0.6, 20.0)
        assert lam >= 6.5
        assert lam == pytest.approx(fs.set_centroid("high"), abs=0.5)

    def test_medium_corner(self, fs):
        lam = fs.infer(0.0, 0.0, 120.0)
        assert lam == pytest.approx(fs.set_centroid("medium"), abs=0.5)

    def test_release_corner(self, fs):
        lam = fs.infer(1.75, 0.6, 120.0)
        assert lam == pytest.approx(fs.set_centroid("low"), abs=0.5)

    def test_output_bounded(self, fs, rng):
        for _ in range(500):
            lam = fs.infer(rng.uniform(-4, 8), rng.uniform(-3, 3),
                           rng.uniform(0, 400))
            assert 0.0 <= lam <= 8.0

    def test_accepts_infinite_distance(self, fs):
        assert fs.infer(0.0, 0.0, float("inf")) == \
            pytest.approx(fs.set_centroid("medium"), abs=0.5)

    @given(e_y=st.floats(-2, 6), de=st.floats(-1.5, 1.5),
           dtc=st.floats(0, 200))
    @settings(max_examples=120, deadline=None)
    def test_lipschitz_continuity(self, fs, e_y, de, dtc):
        # perturbations under 1% of each universe width move the output
        # by less than 2 N m
        base = fs.infer(e_y, de, dtc)
        bumped = fs.infer(e_y + 0.08, de + 0.03, dtc + 2.0)
        assert abs(bumped - base) < 2.0

    def test_monotone_risk_response(self, fs):
        # fixed committed-overtake posture: authority never grows with
        # distance to the threat
        vals = [fs.infer(3.5, 0.6, d) for d in np.linspace(0, 200, 201)]
        assert all(b <= a + 1e-9 for a, b in zip(vals, vals[1:]))


class TestConfig:
    def test_loadable_from_file(self, fs, tmp_path):
        import importlib.resources as res
        text = res.files("costeer").joinpath(
            "data/fuzzy_corrective.json").read_text()
        p = tmp_path / "fuzzy.json"
        p.write_text(text)
        fs2 = FuzzySystem.from_file(p)
        for args in ((0.0, 0.0, 120.0), (3.5, 0.6, 20.0), (1.0, 0.2, 55.0)):
            assert fs2.infer(*args) == fs.infer(*args)

    def test_unknown_rule_set_rejected(self):
        cfg = json.loads(
            __import__("importlib.resources", fromlist=["files"])
            .files("costeer").joinpath("data/fuzzy_corrective.json")
            .read_text())
        cfg["rules"][0][3] = "extreme"
        with pytest.raises(ValueError):
            FuzzySystem(cfg)

    def test_non_monotone_breakpoints_rejected(self):
        import importlib.resources as res
        cfg = json.loads(res.files("costeer").joinpath(
            "data/fuzzy_corrective.json").read_text())
        cfg["inputs"]["position"]["sets"]["right"] = [[0, 1], [0, 0]]
        with pytest.raises(ValueError):
            FuzzySystem(cfg)
