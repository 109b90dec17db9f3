"""KPI aggregation and nonparametric statistics for run batches.

Counts events by kind per condition, extracts the per-event sample vectors
(min TTC, min DTC, return lateral deviation), and compares conditions with
a two-sided Mann-Whitney rank-sum test: exact enumeration for small
samples, normal approximation with tie correction otherwise.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

EXACT_LIMIT = 8   # exact enumeration when both sides are at most this size


@dataclass
class ConditionKpis:
    label: str
    events: int = 0
    crashes: int = 0
    near_misses: int = 0
    road_departures: int = 0
    off_roads: int = 0
    min_ttc: list[float] = field(default_factory=list)
    min_dtc: list[float] = field(default_factory=list)
    return_dev: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "counts": {
                "events": self.events,
                "crashes": self.crashes,
                "near_misses": self.near_misses,
                "road_departures": self.road_departures,
                "off_roads": self.off_roads,
            },
            "samples": {
                "min_ttc": self.min_ttc,
                "min_dtc": self.min_dtc,
                "return_dev": self.return_dev,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConditionKpis":
        c = d["counts"]
        s = d["samples"]
        return cls(label=d["label"], events=c["events"], crashes=c["crashes"],
                   near_misses=c["near_misses"],
                   road_departures=c["road_departures"],
                   off_roads=c["off_roads"],
                   min_ttc=list(s["min_ttc"]), min_dtc=list(s["min_dtc"]),
                   return_dev=list(s["return_dev"]))


@dataclass
class KpiReport:
    conditions: dict[str, ConditionKpis]
    p_values: dict[str, float] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({
            "conditions": {k: v.to_dict() for k, v in self.conditions.items()},
            "p_values": self.p_values,
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "KpiReport":
        d = json.loads(text)
        return cls(conditions={k: ConditionKpis.from_dict(v)
                               for k, v in d["conditions"].items()},
                   p_values=dict(d["p_values"]))

    def table(self) -> str:
        lines = []
        labels = list(self.conditions)
        header = f"{'KPI':<22}" + "".join(f"{c:>16}" for c in labels)
        lines.append(header)
        lines.append("-" * len(header))
        for name, attr in (("# Events", "events"), ("# Crashes", "crashes"),
                           ("# Near misses", "near_misses"),
                           ("# Road departures", "road_departures"),
                           ("# Off-roads", "off_roads")):
            row = f"{name:<22}" + "".join(
                f"{getattr(self.conditions[c], attr):>16}" for c in labels)
            lines.append(row)
        for name, p in self.p_values.items():
            lines.append(f"p({name}) = {p:.4f}")
        return "\n".join(lines)


def aggregate(events_per_run: dict[str, list[list]]) -> KpiReport:
    """Fold per-run event lists (keyed by condition label) into KPI counts."""
    conditions: dict[str, ConditionKpis] = {}
    for label in events_per_run:
        kpi = ConditionKpis(label=label)
        for run_events in events_per_run[label]:
            for e in run_events:
                if e.kind in ("correction", "evasion"):
                    kpi.events += 1
                    if e.min_ttc is not None and math.isfinite(e.min_ttc):
                        kpi.min_ttc.append(e.min_ttc)
                    if e.min_dtc is not None and math.isfinite(e.min_dtc):
                        kpi.min_dtc.append(e.min_dtc)
                    if e.max_lat_dev is not None:
                        kpi.return_dev.append(e.max_lat_dev)
                elif e.kind == "crash":
                    kpi.crashes += 1
                elif e.kind == "near_miss":
                    kpi.near_misses += 1
                elif e.kind == "road_departure":
                    kpi.road_departures += 1
                elif e.kind == "off_road":
                    kpi.off_roads += 1
        conditions[label] = kpi
    report = KpiReport(conditions=conditions)
    labels = list(conditions)
    if len(labels) == 2:
        a, b = conditions[labels[0]], conditions[labels[1]]
        for name in ("min_ttc", "min_dtc", "return_dev"):
            xs, ys = getattr(a, name), getattr(b, name)
            if xs and ys:
                report.p_values[name] = rank_sum_test(xs, ys)
    return report


# -- Mann-Whitney U ------------------------------------------------------

def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _exact_p(ranks: np.ndarray, n1: int) -> float:
    """Exact two-sided p by counting size-n1 subsets at each rank sum.

    Mid-ranks are multiples of 1/2, so doubling them gives integers and the
    distribution of the rank sum is a subset-sum count.
    """
    doubled = np.rint(2.0 * ranks).astype(int)
    n = len(doubled)
    total = doubled.sum()
    # dp[k][s] = number of k-subsets with doubled-rank sum s
    dp = np.zeros((n1 + 1, total + 1), dtype=float)
    dp[0][0] = 1.0
    for r in doubled:
        for k in range(min(n1, n) - 1, -1, -1):
            row = dp[k]
            dp[k + 1][r:] += row[:total + 1 - r]
    counts = dp[n1]
    n_comb = counts.sum()
    observed = int(np.rint(2.0 * ranks[:n1].sum()))
    p_low = counts[:observed + 1].sum() / n_comb
    p_high = counts[observed:].sum() / n_comb
    return float(min(1.0, 2.0 * min(p_low, p_high)))


def _normal_p(ranks: np.ndarray, n1: int) -> float:
    n = len(ranks)
    n2 = n - n1
    r1 = ranks[:n1].sum()
    u1 = r1 - n1 * (n1 + 1) / 2.0
    mean_u = n1 * n2 / 2.0
    # tie correction on the rank variance
    _, counts = np.unique(ranks, return_counts=True)
    tie_term = float(np.sum(counts ** 3 - counts))
    var_u = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if var_u <= 0:
        return 1.0
    z = (abs(u1 - mean_u) - 0.5) / math.sqrt(var_u)   # continuity corrected
    z = max(z, 0.0)
    return float(min(1.0, 2.0 * 0.5 * math.erfc(z / math.sqrt(2.0))))


def rank_sum_test(a, b) -> float:
    """Two-sided Mann-Whitney U p-value.

    Exact enumeration (ties mid-ranked) when both samples have at most
    EXACT_LIMIT observations, normal approximation with tie and continuity
    corrections otherwise.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("rank-sum test needs non-empty samples")
    ranks = _midranks(np.concatenate([a, b]))
    if len(a) <= EXACT_LIMIT and len(b) <= EXACT_LIMIT:
        return _exact_p(ranks, len(a))
    return _normal_p(ranks, len(a))


def distribution_summary(samples) -> dict:
    """Tukey box-plot summary: median, quartiles, whiskers, outliers."""
    xs = np.asarray(samples, dtype=float)
    if xs.size == 0:
        raise ValueError("need at least one sample")
    q1, med, q3 = (float(np.quantile(xs, q)) for q in (0.25, 0.5, 0.75))
    iqr = q3 - q1
    lo_fence = q1 - 1.5 * iqr
    hi_fence = q3 + 1.5 * iqr
    inside = xs[(xs >= lo_fence) & (xs <= hi_fence)]
    return {
        "median": med,
        "q1": q1,
        "q3": q3,
        "whisker_low": float(inside.min()),
        "whisker_high": float(inside.max()),
        "outliers": sorted(float(x) for x in xs[(xs < lo_fence) | (xs > hi_fence)]),
    }
