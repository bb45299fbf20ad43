"""Convex hull pricing engine for multi-period unit commitment."""

__version__ = "0.1.0"

from .instance import (GeneratorClass, GeneratorSpec, InstanceError,  # noqa: F401
                       StartupState, SystemInstance, TransmissionData, classify,
                       initial_lock, load_instance, parse_instance,
                       serialize_instance, startup_cost_at)
from .algebra import (BINARY, CONTINUOUS, LinearModel, VarRef,  # noqa: F401
                      export_lp_text, fix_variables, new_model, parse_lp_text)
from .simplexcore import (SolveResult, SolverError, SolverOptions,  # noqa: F401
                          check_solution, solve_lp, solve_mip)
from .hulls import (FormulationHandle, IntervalIndexSets, SystemModel,  # noqa: F401
                    build_3bin, build_hull_D1, build_hull_D2, build_hull_D3,
                    build_hull_D4, build_index_sets, build_P3, build_system)
from .oracle import (DpTables, ScheduleValue, dp_self_schedule,  # noqa: F401
                     enumerate_best_schedule, interval_dispatch_cost)
from .pricing import (PriceVector, PricingContext, PricingOptions,  # noqa: F401
                      PricingRunReport, compute_lmp, compute_uplift,
                      lagrangian_value, price_difference, run_complementary,
                      run_ia, run_opt, run_tlp)
