"""Block-sparse compressed sensing: BNHTP solver, AMP baseline and experiment harness."""

from .amp import AmpConfig, amp_solve, soft_threshold
from .bnhtp import HaltReason, SolveResult, SolverConfig, auto_tau, bnhtp_solve
from .datagen import MatrixKind, ScenarioParams, gen_instance, gen_matrix, read_bcsm, write_bcsm
from .metrics import (DetectionStats, MetricsRecord, aggregate, calibrate_threshold, relative_error,
                      support_rates)
from .model import Problem, SensingMatrix, block_project, gradient, objective
from .oracle import exhaustive_solve, verify_stationary
from .types import BlockStructure, ContractError, SupportSet

__version__ = "0.1.0"
