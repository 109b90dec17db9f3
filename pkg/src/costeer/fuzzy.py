"""Mamdani fuzzy inference for the corrective-maneuver authority.

The system definition (membership breakpoints and rule table) lives in a
declarative JSON document so tests can pin it bit-exactly; the package
ships a default under data/fuzzy_corrective.json. Inference is min
activation, max aggregation, centroid defuzzification on a fixed output
grid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np


@dataclass(frozen=True)
class MembershipSet:
    name: str
    xs: np.ndarray
    mus: np.ndarray

    def grade(self, x: float) -> float:
        # np.interp clamps to the end grades, which extends shoulder sets
        # beyond the declared universe
        return float(np.interp(x, self.xs, self.mus))

    def center(self) -> float:
        """Location of (the middle of) the peak region."""
        peak = self.mus.max()
        at = self.xs[self.mus >= peak - 1e-12]
        return float(0.5 * (at[0] + at[-1]))


class FuzzyVariable:
    def __init__(self, name: str, universe: tuple[float, float],
                 sets: dict[str, list[list[float]]]):
        self.name = name
        self.lo, self.hi = float(universe[0]), float(universe[1])
        self.sets = {}
        for set_name, pts in sets.items():
            pts = np.asarray(pts, dtype=float)
            if np.any(np.diff(pts[:, 0]) <= 0):
                raise ValueError(f"{name}/{set_name}: breakpoints must increase")
            if pts[:, 1].min() < 0 or pts[:, 1].max() > 1:
                raise ValueError(f"{name}/{set_name}: grades outside [0, 1]")
            self.sets[set_name] = MembershipSet(set_name, pts[:, 0], pts[:, 1])

    def clamp(self, x: float) -> float:
        if np.isnan(x):
            raise ValueError(f"{self.name}: NaN input")
        return float(min(max(x, self.lo), self.hi))

    def grades(self, x: float) -> dict[str, float]:
        x = self.clamp(x)
        return {name: s.grade(x) for name, s in self.sets.items()}


class FuzzySystem:
    """Three-input, one-output Mamdani system for steering authority."""

    def __init__(self, config: dict):
        inputs = config["inputs"]
        self.position = FuzzyVariable("position", **inputs["position"])
        self.intention = FuzzyVariable("intention", **inputs["intention"])
        self.risk = FuzzyVariable("risk", **inputs["risk"])
        out = config["output"]
        self.authority = FuzzyVariable("authority", **out)
        self.rules: list[tuple[str, str, str, str]] = [
            tuple(r) for r in config["rules"]]
        for pos, intent, risk, cons in self.rules:
            if pos not in self.position.sets or \
                    intent not in self.intention.sets or \
                    risk not in self.risk.sets or \
                    cons not in self.authority.sets:
                raise ValueError(f"rule references unknown set: "
                                 f"{(pos, intent, risk, cons)}")
        self.prototypes: dict[str, dict[str, float]] = config.get(
            "prototypes", {})
        n_grid = int(config.get("grid_points", 401))
        self.grid = np.linspace(self.authority.lo, self.authority.hi, n_grid)
        self._out_curves = {
            name: np.array([s.grade(x) for x in self.grid])
            for name, s in self.authority.sets.items()}

    @classmethod
    def from_file(cls, path) -> "FuzzySystem":
        with open(path) as fh:
            return cls(json.load(fh))

    @classmethod
    def default_corrective(cls) -> "FuzzySystem":
        text = resources.files("costeer").joinpath(
            "data/fuzzy_corrective.json").read_text()
        return cls(json.loads(text))

    def activations(self, e_y: float, e_y_dot: float,
                    dtc: float) -> list[float]:
        gp = self.position.grades(e_y)
        gi = self.intention.grades(e_y_dot)
        gr = self.risk.grades(dtc)
        return [min(gp[p], gi[i], gr[r]) for p, i, r, _ in self.rules]

    def infer(self, e_y: float, e_y_dot: float, dtc: float) -> float:
        acts = self.activations(e_y, e_y_dot, dtc)
        agg = np.zeros_like(self.grid)
        for act, (_, _, _, cons) in zip(acts, self.rules):
            if act > 0.0:
                np.maximum(agg, np.minimum(act, self._out_curves[cons]),
                           out=agg)
        total = agg.sum()
        if total <= 0.0:
            return 0.0
        return float((agg * self.grid).sum() / total)

    def set_centroid(self, name: str) -> float:
        """Centroid of one output set alone (activation 1)."""
        curve = self._out_curves[name]
        return float((curve * self.grid).sum() / curve.sum())
