"""Multiple optimal stopping for blockchain mining under a partially observed hash rate."""
from .model import (CONTINUE, MINE, AugmentedModel, DimensionError, ImpossibleObservationError,
                    InvalidInputError, MLR, PomdpModel, ValidationReport, as_belief, belief_update,
                    build_augmented_model, filter_sequence, is_tp2, load_model, mlr_compare, mlr_geq,
                    save_model, tp2_violations, validate_model)
from .grid import SimplexGrid
from .vi import GridPolicy, StructureReport, ValueTable, export_table, solve_value_iteration, verify_structure
from .linear import LinearThresholdPolicy, check_feasible, from_spherical, load_policy, save_policy
from .simulate import (compare_policies, estimate_J, optimize_num_stops, rollout, simulate_batch,
                       baseline_first_l, baseline_random, baseline_softmax)
from .spsa import SpsaConfig, TrainingTrace, estimate_gradient, spsa_maximize, train
from .estimation import estimate_model, estimate_observation_tp2, estimate_transition_mle, ingest
from .fixtures import bitcoin, load_fixture, synthetic_high, synthetic_low

__version__ = "0.1.0"
