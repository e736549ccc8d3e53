"""PDE inverse problems with piecewise-constant coefficients.

A physics-informed network is trained jointly with a TV-penalized coefficient
track whose jumps mark changepoints; an entropy-regularized online update
re-balances the three loss channels batch by batch, with a checkable regret
bound. Ground truth for the 1d advection-diffusion experiments comes from a
built-in Crank-Nicolson solver.
"""

from .errors import (ConfigurationError, DivergenceError, DomainError,
                     PwpinnError, UnsupportedOrderError, UsageError)
from .network import (ExtendedEval, NetworkParams, eval_values, forward_extended,
                      forward_extended_batch, init_params, linear_params)
from .pde import (AD1D, NS2D, PdeResidualSpec, TrainingBatch, loss_fitting,
                  loss_structure, residual_batch, residual_f)
from .reference import (GridSpec, ReferenceSolution, load_ns_data_csv,
                        load_solution_csv, sample_training_data,
                        save_solution_csv, solve_advection_diffusion)
from .simplex import (LossVector, RegretRecord, SimplexWeights, best_fixed_weights,
                      check_regret, load_record_csv, optimal_eta, regret,
                      regret_bound, replay_updates, save_record_csv, total_loss,
                      update_weights, uniform_weights, weights_from_gamma)
from .tape import Node, Tape, backward
from .track import (LambdaTrack, default_threshold, edge_weight,
                    extract_changepoints, lambda_at, load_track_csv,
                    save_track_csv, track_from_segments, tv_penalty,
                    uniform_track)
from .training import (Adam, OptimizerSettings, RunReport, SegmentFit,
                       TrainConfig, evaluate, inner_optimize, load_model,
                       make_batches, merge_batches, refit_segments, save_model,
                       train)

__version__ = "0.1.0"
