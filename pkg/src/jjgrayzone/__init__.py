"""Gray-zone width of a Josephson balanced comparator from the damped-oscillator propagator."""

from .bvp import BvpSolution, Grid, default_grid, solve_all
from .coeffs import PropagatorCoeffs, compute_coeffs
from .errors import (ConfigurationError, DomainError, GrayZoneError, IngestionError,
                     NumericalError, RegimeError, SingularSystemError)
from .grayzone import (GrayZoneResult, InitialState, check_plateau, evaluate,
                       gray_zone_asymptotic, gray_zone_full, initial_thermal_state,
                       switching_probability)
from .model import (DimensionlessParams, PhysicalParams, Waveform, load_waveform_table,
                    step, tanh_ramp, to_dimensionless)

__version__ = "0.1.0"
