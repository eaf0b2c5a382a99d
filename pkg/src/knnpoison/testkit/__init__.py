"""Shared fixtures and generators backing the test and acceptance suites."""

from .fixtures import (
    InstanceGen,
    all_graphs_up_to,
    fixture_1d_pair,
    fixture_1d_three_targets,
    fixture_coverage_trap,
    fixture_gadget_k2_disks,
    fixture_k3_line,
    gen_instance,
    random_graph,
)
from .acceptance import ACCEPTANCE_SEED, CRITERIA, run_acceptance

__all__ = [
    "ACCEPTANCE_SEED",
    "CRITERIA",
    "InstanceGen",
    "all_graphs_up_to",
    "fixture_1d_pair",
    "fixture_1d_three_targets",
    "fixture_coverage_trap",
    "fixture_gadget_k2_disks",
    "fixture_k3_line",
    "gen_instance",
    "random_graph",
    "run_acceptance",
]
