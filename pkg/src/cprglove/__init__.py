"""Desk-scale closed-loop CPR training pipeline.

Simulated tactile glove -> preprocessing -> per-compression rate/force/pose
classification -> haptic feedback on a virtual actuator bus, plus a sensor
characterization toolkit and a binary UDP frame protocol.
"""

from .core import (DualSample, ForceClass, PoseClass, RateClass, SessionLog,
                   SubjectProfile, TactileFrame)

__all__ = [
    "DualSample",
    "ForceClass",
    "PoseClass",
    "RateClass",
    "SessionLog",
    "SubjectProfile",
    "TactileFrame",
]

__version__ = "0.1.0"
