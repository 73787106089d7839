"""Numerical laboratory for corotational wave maps from 2+1 dimensions to the
sphere: harmonic-map bubbles, two-bubble data, modulation dynamics, and
blow-up rate measurement."""

from .grid import (FieldSample, GridError, RadialGrid, WaveMapState, fd_weights,
                   from_4d, h0_norm, h_norm, l2_norm, make_deep_grid, make_grid,
                   quad, read_field_csv, resample, to_4d, write_field_csv)
from .harmonic import (BubbleParams, Lambda0LambdaQ, Lambda2Q, Lambda3Q,
                       LambdaQ, Q, Q_scaled, lambda0_gen, lambda_gen,
                       single_bubble, two_bubble, two_bubble_energy_tail)
from .functionals import (DistanceReport, EnergyReport, bogomolnyi, chi,
                          chi_prime, distance, energy, omega_R, virial_pairing)
from .modulation import (ModConfig, ModulationPoint, ModulationTrack, Zcut,
                         a_matrix, alphaL, applyA, applyA0, build_q,
                         fit_modulation, split_intervals, zeta_b)
from .evolve import (SolverConfig, StepReport, Trajectory, detect_blowup,
                     evolve, lambda_proxy, nonlinearity_Z, regrid, rhs, step)
from .experiments import (ExperimentConfig, RateFit, ell_of_t, fit_blowup_rate,
                          make_blowup_data, make_perturbed_two_bubble,
                          make_small_bump, mod_ode, run_experiment)

__version__ = "0.1.0"
