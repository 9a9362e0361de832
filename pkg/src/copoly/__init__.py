"""Random copolymer at a selective interface: transfer-matrix partition
functions, localization tests and critical-curve estimates."""

from .model import (BERNOULLI, GAUSSIAN, ChargeLaw, PolymerParams, cramer_rate, h_lower, h_m,
                    h_upper, log_mgf, mgf, optimal_q)
from .disorder import (Environment, StretchRecord, detect_TC, find_T, find_tau, generate, reverse,
                       saturation_level, shift)
from .engine import (DEFAULT_WINDOW, PartitionProfile, SweepResult, Window, brute_force,
                     excursion_oracle, limit_model_sweep, pinned_product_lower_bound,
                     superadd_check, sweep)
from .stats import Sample, TestReport, localization_test, median_ci, quick_check_N1
from .analysis import (CriticalCurvePoint, MeanderDistanceResult, checkpoint_growth_scan,
                       estimate_h_hat, fit_m, meander_distance, stretch_certificate)

__version__ = "0.1.0"
