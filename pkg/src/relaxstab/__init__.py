"""Desk-scale stability diagnostics for traveling waves of hyperbolic
relaxation systems: structural hypothesis checks, frequency-swept resolvent
bounds, exponential dichotomies with symmetrizer certificates, turning-point
detection, and time-domain confirmation of damping estimates.
"""

from . import errors
from .dichotomy import (DichotomyData, TurningPointReport, block_diagonalize,
                        coalescence_scan, detect_turning_points,
                        frames_to_csv, limit_spectral_split,
                        propagate_subspaces, verify_dichotomy)
from .model import (HypothesisReport, SymbolMatrix, SystemSpec,
                    ZeroOrderCoefficient, assemble_symbol, check_chf,
                    check_geometric_regularity, check_hyperbolicity,
                    check_kawashima, check_noncharacteristic, run_hypotheses,
                    zero_order_matrix)
from .profile import (WaveProfile, load_profile, sample_profile, save_profile,
                      solve_profile_jinxin, solve_profile_shooting)
from .resolvent import (CollocationGrid, FrequencyPoint, HatNorm,
                        ResolventOperatorField, SweepResult, assemble_G,
                        bump_perturbation, conjugate_field,
                        estimate_resolvent_gain, run_sweep,
                        solve_resolvent_bvp, verify_equivalence, verify_hfres,
                        verify_pdamp)
from .symmetrizer import (Certificate, LyapunovForms, SymmetrizerField,
                          assemble_symmetrizer, constant_symmetrizer,
                          energy_estimate_check, field_to_csv, lyapunov_Q,
                          verify_symmetrizer)
from .systems import (jin_xin, jin_xin_2d, make_system, partially_damped,
                      register_system, saint_venant)
from .timedomain import (CutoffPair, EnergyTrace, SimState, make_sim,
                         measure_energy, run_simulation, step,
                         truncation_pipeline, verify_classical_damping,
                         verify_integrated_damping, verify_short_time)

__version__ = "0.1.0"
