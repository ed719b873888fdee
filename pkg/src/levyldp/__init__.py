"""levyldp: heavy-tailed Levy-driven SDEs, Skorokhod-J1 path analysis, and
rare-event Monte Carlo against polynomial large-deviation asymptotics."""

from .paths import (CadlagPath, JumpEvent, TimeChange, DomainError, J1Bracket,
                    zero_path, step_path, uniform_distance, l1_distance,
                    compose_time_change, path_extrema, j1_distance,
                    j1_distance_step_exact, distance_to_step_class,
                    DEFAULT_DELTA, JUMP_RESOLUTION)
from .levy import (TailModel, SimConfig, stable_preset, tail_upper, tail_lower,
                   sample_jump_size, sample_scaled_path, small_jump_variance,
                   truncated_mean, expected_jump_count, default_truncation)
from .solution import (DriftSpec, SolverConfig, ConvergenceError,
                       drift_registry, make_drift, apply_F, apply_F_inverse,
                       apply_F_batch, euler_solve_sde)
from .rate import (JumpProfile, CostPair, WitnessSearchConfig, ArgminResult,
                   jump_counts, rate_I, rate_I_tilde, cost_jk,
                   enumerate_cost_order, largest_jumps_pi, rate_pi_induced,
                   argmin_jk, inf_rate_over_set)
from .cluster import (ClusterSampleSpec, MeasureEstimate, sample_djk_path,
                      sample_djk_batch, estimate_Cjk, estimate_Cjk_tilde)
from .sets import SetOracle, BatchStats, make_set, set_registry
from .config import ConfigError, parse_config, load_config
from .experiments import (EngineConfig, ProbabilityEstimate, ResultRecord,
                          IntegratorError, estimate_probability,
                          run_slope_experiment, run_ratio_experiment,
                          write_results, SCHEMA_VERSION)

__version__ = "1.0.0"
