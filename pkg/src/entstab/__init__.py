"""entstab: dissipative entanglement stabilization in squeezed-cavity QED.

A numpy-based simulation library for a two-atom/cavity system where a
maximally entangled state is prepared as the unique steady state of
engineered dissipation, and feedback pulse modulation plus parametric
amplification of the atom-cavity coupling accelerate the approach.
"""

from .analysis import (CooperativityReport, RunSummary, ScalingReport,
                       StabilizationCriterion, cooperativity_report, fidelity,
                       scaling_check, stabilization_time, summarize)
from .control import (ControlLaw, ControlSignal, evaluate_controls,
                      law_for_model, modulated_amplitudes)
from .dynamics import (IntegratorConfig, NoiseSpec, Trajectory,
                       dissipator_apply, integrate_closed_loop, master_rhs,
                       speeds)
from .errors import (AboveThresholdError, ConfigError, ControlEvaluationError,
                     EntstabError, IntegratorAbortError, LayoutError,
                     LayoutMismatchError, TruncationError)
from .experiments import (AuditReport, ExperimentConfig, ResultRecord,
                          build_model, convergence_audit, default_run_params,
                          parse_config, run_scenario, run_single)
from .hilbert import (DensityMatrix, HilbertLayout, Ket, Operator,
                      annihilation, basis_ket, commutator, dagger, embed,
                      expectation, identity, is_hermitian, number_operator,
                      outer, partial_populations, partial_trace, trace)
from .models import (CompiledModel, ControlChannel, DissipatorChannel, Drive,
                     ModelSpec, bell_basis, bogoliubov, build_effective_model,
                     build_lab_frame_model, build_squeezed_frame_model,
                     initial_state, lab_cutoff_for, pump_amplitude,
                     reference_spec, reservoir_coeffs, squeezed_vacuum_ket,
                     squeezing_parameters)

__version__ = "0.1.0"
