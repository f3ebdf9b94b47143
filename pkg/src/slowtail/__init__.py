"""Simulation of perpetuities and random Lipschitz maps with slowly varying log-tails."""

__version__ = "0.1.0"

from .logreal import LogReal, logsum  # noqa: E402
from .rng import RngStream  # noqa: E402
from .distributions import (  # noqa: E402
    ConfigurationError, Coupling, Family, InputLaw, deterministic, discrete_finite, indicator_counter,
    pareto_log, weibull_log, check_long_tailed, check_subexponential, potter_check, convolve_equiv_tails,
    GridDensity,
)
from .systems import (  # noqa: E402
    Kind, LipschitzSystem, make_affine, make_affine_positive, make_arch1, make_arch1_params, make_custom,
    envelope_check,
)
from .engine import (  # noqa: E402
    enumerate_finite, forward_batch, iterate_forward, coupling_batch, perpetuity_batch, sample_perpetuity,
    sample_stationary_forward, sample_sup_walk, sup_walk_batch, TruncationCapHit,
)
from .asymptotics import (  # noqa: E402
    Regime, RegimeKind, integrated_tail, theory_sup_walk, theory_tail_finite, theory_tail_stationary,
)
from .estimation import (  # noqa: E402
    TailCurve, attach_theory, compare_example_3_4, empirical_tail, ratio_trend, stationary_curve,
    sup_walk_curve, horizon_curve, wilson,
)
