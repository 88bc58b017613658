"""Constrained Pareto front computation with Chebyshev scalarization and split feasibility.

The main entry points are :func:`build_benchmark`, :func:`two_phase_solve`
and :func:`evaluate`; the ``bssp`` command wraps them for batch runs.
"""

from .benchmarks import BENCHMARKS, BenchmarkSpec, GroundTruth, build_benchmark, ground_truth
from .diagnostics import (GapReport, LemmaReport, check_lemma_suite, delta_gradient,
                          delta_value, verify_gap)
from .errors import (ConfigError, ConvergenceWarning, DegenerateInputWarning, NumericError,
                     ParameterError, UnsupportedError)
from .geometry import (BallRegion, BoxRegion, ResidualReport, membership_q, membership_qplus,
                       project_qplus, set_distance)
from .metrics import (MetricsReport, ParetoApproximation, evaluate, hypervolume,
                      hypervolume_mc, med)
from .problem import (Box, ProblemInstance, UnitSphereBox, check_preference, generate_rays,
                      project_decision_set)
from .scalarization import (active_index, chebyshev_subgradient, chebyshev_value,
                            compute_ideal_point)
from .solvers import (IterateTrace, SolverConfig, abp_solve, abp_step, cq_solve, lower_bound,
                      lower_bounds, two_phase_solve)

__version__ = "0.1.0"
