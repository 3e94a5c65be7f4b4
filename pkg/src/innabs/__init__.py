"""Abstraction of ReLU networks into interval neural networks and output range analysis."""
from .abstraction import Partition, abstract_network, identity_partition, labs, rabs, random_partition
from .analysis import RangeConfig, RangeResult, exact_range_oracle, output_range, soundness_check
from .bench import bench_partitions
from .encoding import MilpModel, VarRef, encode, set_objective
from .milp import SolveConfig, SolveResult, solve
from .network import InnNetwork, InputBox, evaluate, interval_bounds, random_network

__all__ = [
    "InnNetwork", "InputBox", "evaluate", "interval_bounds", "random_network",
    "Partition", "abstract_network", "identity_partition", "labs", "rabs", "random_partition",
    "MilpModel", "VarRef", "encode", "set_objective",
    "SolveConfig", "SolveResult", "solve",
    "RangeConfig", "RangeResult", "exact_range_oracle", "output_range", "soundness_check",
    "bench_partitions",
]
