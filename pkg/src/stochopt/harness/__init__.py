"""Experiment harness: synthetic problems, partitioning, references, runner and CLI."""
from .config import ExperimentConfig, load_config
from .experiment import RECORD_COLUMNS, RunRecord, make_sampler, run_experiment, write_outputs
from .problem import Problem, build_problem
from .problems import (build_subproblems, conditioned_matrix, kappa_image, make_phantom, mlem, nrmse,
                       partition, simulate_ct, simulate_pet)
from .reference import ReferenceSolution, compute_reference, lasso_coordinate_descent
