"""Automatic gym exercise recording: beacon, gateway, wearable, cloud, simulator."""

from .codec import (EquipmentType, IBeaconFrame, Registry, decode_frame, encode_frame,
                    lookup_equipment)
from .engine import EventLog, Simulation, run_simulation
from .metrics import MetricsReport, compute_accuracy
from .scenario import Scenario, load_scenario

__version__ = "0.1.0"
