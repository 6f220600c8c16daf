"""STAR-RIS aided NOMA downlink: two-timescale transmission protocols.

Long-term decisions (binary transmission/reflection coefficients, or the
element-to-user surface partition) are driven by statistical CSI; per-block
decisions (power allocation, subsurface phase alignment) by instantaneous
estimates.  The package provides the channel model, closed-form allocations
and expectations, both long-term optimizers, orthogonal-access and
conventional-RIS benchmarks, and a reproducible Monte-Carlo harness.
"""

__version__ = "0.1.0"

from .channel import (ChannelRealization, PathLossModel, StatisticalCsi, SystemGeometry,
                      derive_statistical_csi, drop_users, effective_channel, path_loss,
                      sample_channels, sample_channels_batch, subsurface_channel)
from .coefficients import (StarCoefficients, SurfacePartition, align_phases,
                           partition_to_coefficients, validate)
from .expectations import (BteExpectationParams, expected_gain_bte, expected_gain_pte,
                           expected_rate_bte, expected_rate_pte, laguerre_half)
from .noma import (InfeasibleProblemError, NomaConfig, PowerAllocation, RateReport,
                   adjusted_rates, decoding_order, optimal_power_allocation, sic_rates)
from .bte import BteSolution, PenaltySchedule, optimize_long_term, short_term_bte
from .pte import (PartitionSearchState, initial_partition, min_counts_for_order,
                  partition_search, refine_partition, short_term_pte)
from .benchmarks import cr_noma, fdma_rates, tdma_rates
from .experiments import (ExperimentConfig, TrialResult, run_approximation_audit,
                          run_convergence_trace, run_monte_carlo)

__all__ = [
    "__version__",
    "ChannelRealization", "PathLossModel", "StatisticalCsi", "SystemGeometry",
    "derive_statistical_csi", "drop_users", "effective_channel", "path_loss",
    "sample_channels", "sample_channels_batch", "subsurface_channel",
    "StarCoefficients", "SurfacePartition", "align_phases",
    "partition_to_coefficients", "validate",
    "BteExpectationParams", "expected_gain_bte", "expected_gain_pte",
    "expected_rate_bte", "expected_rate_pte", "laguerre_half",
    "InfeasibleProblemError", "NomaConfig", "PowerAllocation", "RateReport",
    "adjusted_rates", "decoding_order", "optimal_power_allocation", "sic_rates",
    "BteSolution", "PenaltySchedule", "optimize_long_term", "short_term_bte",
    "PartitionSearchState", "initial_partition", "min_counts_for_order",
    "partition_search", "refine_partition", "short_term_pte",
    "cr_noma", "fdma_rates", "tdma_rates",
    "ExperimentConfig", "TrialResult", "run_approximation_audit",
    "run_convergence_trace", "run_monte_carlo",
]
