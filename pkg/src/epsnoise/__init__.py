"""Link-level Alamouti 2Tx2Rx simulator and analytic BER engine for
two-component (background + impulse) mixture noise."""

__version__ = "0.1.0"

from .model import (
    BACKGROUND,
    IMPULSE,
    ChannelRealization,
    NoiseSample,
    NoiseSpec,
    ReceivedSlot,
    SignalSystem,
    SlotObservation,
    SymbolPair,
    alamouti2x2,
    get_system,
    repcode3,
    residuals,
    sample_channel,
    sample_noise,
    solve_noise_powers,
    transmit_slot,
)
from .detectors import (
    DetectorDecision,
    WConfig,
    detect_median,
    detect_ml_genie,
    detect_mlbnr_genie,
    detect_mls,
    detect_w,
    w_weights,
)
from .numerics import (
    ConvergenceError,
    QuadratureConfig,
    chi2_pdf,
    hyp2f1,
    integrate_semiinfinite,
    ln_gamma,
    q_function,
    q_upper_bound,
)
from .analytic import (
    alamouti_gaussian_ber,
    alamouti_reference_spec,
    ber_gaussian_closed,
    ber_gaussian_integral,
    ber_gaussian_upper,
    ber_mixture,
    ber_mixture_addends,
    ber_ml_genie_general,
    ber_mlbnr_general,
    ber_mlbnr_optimal,
    ber_mlbnr_optimal_addends,
    ber_mls_general,
    chi_moment_match,
    mixture_states,
    pairwise_error_bound_fixed_channel,
)
from .montecarlo import BerEstimate, ExperimentConfig, NoiseSetting, estimate_ber, run_sweep
