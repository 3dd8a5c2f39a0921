"""Numerical laboratory for blow-up of the 1-D stochastic wave equation.

Modules:

* ``kernels``  -- wave Green kernels on the interval / circle / line and
  their integral identities;
* ``drift``    -- the drift-function DSL (parse, evaluate, validate);
* ``osgood``   -- the blow-up criterion integral T(alpha, beta) with
  Finite / Infinite / Inconclusive verdicts;
* ``volterra`` -- solvers for the kernel-(t-s) integral equation and its
  second-order ODE form, with blow-up time estimation;
* ``noise``    -- seeded space-time white noise and the derived Gaussian
  processes, plus their statistical verification battery;
* ``spde``     -- the Courant-1 leapfrog scheme for the stochastic wave
  equation in all three domains, observables, Monte Carlo orchestration;
* ``recipes``, ``cli`` -- reproducible experiment recipes and the
  command-line front end.
"""

from .drift import (
    DriftFunction,
    DriftSyntaxError,
    UnknownIdentifier,
    parse_drift,
    to_source,
    validate_drift,
)
from .kernels import (
    DomainCase,
    circle,
    dirichlet01,
    g1_images,
    g1_l2_norm_sq,
    g1_series,
    g2,
    g3,
    kernel_x_integral,
    real_line,
)
from .noise import (
    G_path,
    M_path,
    WhiteNoiseGrid,
    brownian_path,
    deviation_experiment,
    g_field,
    noise_diagnostics,
    sample_white_noise,
    wilson_interval,
)
from .osgood import (
    NonFiniteDrift,
    OsgoodQuery,
    OsgoodResult,
    Verdict,
    inner_integral,
    osgood_integral,
    scaling_check,
    time_to_infinity,
)
from .spde import (
    McBlowupResult,
    SpdeProblem,
    deterministic_blowup_bound,
    mc_blowup,
    observables,
    simulate,
)
from .volterra import (
    BlowUpReport,
    SampledPath,
    Trajectory,
    VolterraProblem,
    blowup_time_estimate,
    compare_paths,
    solve_ode2,
    solve_volterra,
)

__version__ = "0.1.0"
