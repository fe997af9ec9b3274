"""Numerical machinery for connectivity analysis of complex Henon maps."""

__version__ = "0.1.0"

from .core_map import (HenonFactor, HenonMap, MonicPolynomial, OrbitClass,
                       PointC2, apply_map, escape_radius, jacobian,
                       make_henon, orbit_classify, verify_radius)
from .errors import (BranchAmbiguityError, BudgetExhaustedError,
                     ChartDomainError, HenonLabError, LoopMarginError,
                     MapDefinitionError, NotEscapingError, PathEscapesError,
                     ResonanceError)
from .manifold import (BottcherValue, LoopCharge, UnstableChart, chart_residual,
                       eval_chart, leaf_bottcher, leaf_green, loop_charge,
                       max_modulus, normalize_chart, solve_chart)
from .periodic import (SaddleOrbit, Sink, Source, classify, find_periodic,
                       find_saddles)
from .potential import (GreenValue, bottcher_vplus, green, green_many,
                        in_sector_plus, log_bottcher_vplus)
from .rays_solenoid import (LandingReport, RayTrace, SolenoidWindow,
                            landing_stats, solenoid_coords, trace_ray)
from .report import canonical_json, write_ppm, write_report
from .slice_topology import (ComponentReport, SliceRaster, Verdict,
                             connectivity_verdict, label_components,
                             rasterize_slice)
