"""Interference alignment for partially connected MIMO interference networks."""

from .channels import (ChannelRealization, GeometryScene, Topology, gen_fig3_example,
                       gen_fully_connected, gen_random_geometric, gen_symmetric,
                       gen_unequal)
from .evaluation import ExperimentConfig, run_experiment
from .feasibility import (FeasibilityVerdict, FreedomConstraintInstance,
                          brute_force_proper, flow_check, tree_check)
from .stage1 import StreamAssignment, count_instance, stage1_run
from .stage2 import TransceiverDesign, leakage, stage2_run
from .subspace import Subspace

__all__ = [
    "ChannelRealization", "GeometryScene", "Topology", "gen_fig3_example",
    "gen_fully_connected", "gen_random_geometric", "gen_symmetric", "gen_unequal",
    "ExperimentConfig", "run_experiment", "FeasibilityVerdict",
    "FreedomConstraintInstance", "brute_force_proper", "flow_check", "tree_check",
    "StreamAssignment", "count_instance", "stage1_run", "TransceiverDesign",
    "leakage", "stage2_run", "Subspace",
]
