"""Mean-field integrate-and-fire networks with spike cascades and blow-ups."""
from .analysis import (ConvergenceReport, JumpEvent, RateEstimate, convergence_report,
                       curve_and_se, detect_jumps, firing_rate, verify_physical_jump)
from .cascade import (CascadeResult, SpikeState, cascade_size_inf, physical_criterion_check,
                      physical_jump_size, resolve_cascade, threshold)
from .delayed import DelayedConfig, DelayedOutput, delayed_to_limit_compare, run_delayed
from .errors import ConfigError, DomainError, SimulationError
from .particles import (DriftSpec, InitialLaw, SimConfig, SimOutput, drift_eval,
                        run_particle_system, sample_initial)
from .paths import (CadlagPath, ParametricRepresentation, build_parametric, counting_map,
                    evaluate, evaluate_left, hat, m1_distance, oscillation_v, oscillation_w,
                    read_path_csv, restrict, write_path_csv)

__version__ = "0.1.0"
