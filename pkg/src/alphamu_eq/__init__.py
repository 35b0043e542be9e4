"""ZF, LMS and RLS channel equalization over alpha-mu fading channels."""

from .adaptive import (
    AdaptiveFilterState,
    LmsConfig,
    NumericalBreakdownError,
    RlsConfig,
    RlsState,
    TrainingRecord,
    equalize,
    lms_step,
    rls_step,
    train,
)
from .alpha_mu import PRESETS, AlphaMuParams, PresetLink, beta_from_moment, cdf, get_preset, pdf, sample
from .harness import (
    CurvePoint,
    ExperimentConfig,
    run_ber_experiment,
    run_convergence_experiment,
    run_sweep,
)
from .signal import (
    ChannelRealization,
    NoisySignal,
    SymbolStream,
    add_awgn,
    apply_channel,
    bpsk_demodulate,
    bpsk_modulate,
    draw_channel,
)
from .zf import SingularChannelError, ZfEqualizer, design_zf, equalize_zf

__version__ = "0.1.0"
