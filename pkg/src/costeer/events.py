"""Safety-event detection over a completed run log.

Event definitions:
  Crash         ego/actor oriented-rectangle overlap (suppresses NearMiss)
  NearMiss      corrective: min conflict TTC < 0.2 s; evasive: min DTC < 0.2 m
  OffRoad       lane-center deviation > 1 m during the return phase
  RoadDeparture ego fully outside the road edges (terminates the run)
  Correction /  one per encounter, carrying min TTC / min DTC / return
  Evasion       deviation samples for the KPI tables

The "return phase" starts when the ego first re-enters the 1 m band after
its peak excursion; the deviation sampled there is the overshoot while
settling back to lane center, which is what the off-road count scores.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TTC_NEAR_MISS = 0.2      # s
DTC_NEAR_MISS = 0.2      # m
OFF_ROAD_DEVIATION = 1.0  # m
RECENTER_BAND = 0.3      # m
RECENTER_HOLD = 1.0      # s


@dataclass
class EventRecord:
    kind: str            # correction | evasion | crash | near_miss | off_road | road_departure
    t_start: float
    t_end: float
    min_ttc: float | None = None
    min_dtc: float | None = None
    max_lat_dev: float | None = None

    def to_dict(self) -> dict:
        return {k: v for k, v in vars(self).items() if v is not None}


@dataclass
class RunLog:
    """Arrays the engine records for event detection (one entry per tick)."""
    kind: str                       # corrective | evasive
    dt: float
    time: np.ndarray
    e_y: np.ndarray
    dtc: np.ndarray                 # ground-truth distance to threat (inf if none)
    ttc_conflict: np.ndarray        # TTC while laterally conflicting (nan otherwise)
    crash: np.ndarray               # bool, overlap with any actor
    encounter_active: np.ndarray    # bool, maneuver attempt in progress
    threat_passed: np.ndarray       # bool, threat behind ego
    road_departure: bool = False


def _return_deviation(e_y: np.ndarray) -> float:
    """Settling overshoot after the excursion peak.

    The descent from the peak back to the lane is not a deviation; what the
    off-road count scores is how far the vehicle swings once it has come
    back to the center band. Runs that never re-center score their final
    offset (covers diverging returns and departures).
    """
    if len(e_y) == 0:
        return 0.0
    abs_ey = np.abs(e_y)
    peak = int(np.argmax(abs_ey))
    after = abs_ey[peak:]
    inside = np.nonzero(after <= RECENTER_BAND)[0]
    if len(inside) == 0:
        return float(abs_ey[-1])
    start = peak + inside[0]
    return float(np.max(abs_ey[start:], initial=0.0))


def detect_events(log: RunLog) -> list[EventRecord]:
    events: list[EventRecord] = []
    active = np.nonzero(log.encounter_active)[0]
    if len(active) == 0:
        if log.road_departure:
            events.append(EventRecord("road_departure",
                                      float(log.time[-1]),
                                      float(log.time[-1])))
        return events

    i0, i1 = int(active[0]), int(active[-1])
    t0, t1 = float(log.time[i0]), float(log.time[i1])
    sl = slice(i0, i1 + 1)

    ttc = log.ttc_conflict[sl]
    ttc_vals = ttc[np.isfinite(ttc)]
    min_ttc = float(np.min(ttc_vals)) if len(ttc_vals) else None
    dtc_vals = log.dtc[sl][np.isfinite(log.dtc[sl])]
    min_dtc = float(np.min(dtc_vals)) if len(dtc_vals) else None
    ret_dev = _return_deviation(log.e_y[sl])

    main_kind = "correction" if log.kind == "corrective" else "evasion"
    events.append(EventRecord(main_kind, t0, t1, min_ttc=min_ttc,
                              min_dtc=min_dtc, max_lat_dev=ret_dev))

    crashed = bool(np.any(log.crash[sl]))
    if crashed:
        tc = float(log.time[sl][np.argmax(log.crash[sl])])
        events.append(EventRecord("crash", tc, tc, min_dtc=0.0))
    else:
        if log.kind == "corrective" and min_ttc is not None \
                and min_ttc < TTC_NEAR_MISS:
            events.append(EventRecord("near_miss", t0, t1, min_ttc=min_ttc))
        if log.kind == "evasive" and min_dtc is not None \
                and min_dtc < DTC_NEAR_MISS:
            events.append(EventRecord("near_miss", t0, t1, min_dtc=min_dtc))

    if ret_dev > OFF_ROAD_DEVIATION:
        events.append(EventRecord("off_road", t0, t1, max_lat_dev=ret_dev))

    if log.road_departure:
        events.append(EventRecord("road_departure", float(log.time[-1]),
                                  float(log.time[-1])))
    return events
