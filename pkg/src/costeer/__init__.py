"""Shared-control driving simulator.

A lane-centering NMPC and a (synthetic or human) driver both apply torque
to a modelled steering column; a tactical arbitration layer modulates the
controller's haptic authority for corrective-overtaking and evasive
lane-invasion maneuvers, and a safety-KPI pipeline scores the runs.
"""

__version__ = "0.1.0"
