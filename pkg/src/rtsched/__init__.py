"""Slot-level simulator for deadline-constrained scheduling over interference graphs."""
from .engine import RunConfig, RunMetrics, classify_stability, max_stable_p, run, sweep
from .graph import InterferenceGraph, collocated, complete_partite, enumerate_mis, from_edges, make_topology, star
from .sched import POLICY_NAMES, make_policy
from .traffic import AdmissionScheme, ArrivalBatch, IIDTraffic, MarkovTraffic, ProductTraffic

__version__ = "0.1.0"
