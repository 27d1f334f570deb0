"""Federated learning over a NOMA uplink.

Simulates the full loop: local gradients are quantized to Gray-coded
codewords, mapped to QAM symbols, superposed on a block-fading multi-antenna
uplink, recovered by MMSE-SIC detection, gated by an SER-based device
selection rule and aggregated into the global model, with the matching
convergence-bound quantities tracked per round.
"""

from .channel import (
    ChannelRealization,
    FadingParams,
    PathLossParams,
    draw_channels,
    draw_fading,
    path_loss,
    place_devices,
    transmit,
)
from .config import (
    ChannelConfig,
    ConfigError,
    ConvergenceConfig,
    DatasetConfig,
    ExperimentConfig,
    GeometryConfig,
    ModemConfig,
    TrainingConfig,
    apply_overrides,
    config_from_dict,
    config_to_dict,
    load_config,
    save_config,
)
from .convergence import (
    ConditionReport,
    ConvergenceParams,
    acceptance_probability,
    contraction_factor,
    convergence_condition,
    optimality_gap_bound,
)
from .fl import MlpLayout, evaluate, init_params, local_update, loss_and_gradient
from .modem import (
    ModulationConfig,
    QuantizerConfig,
    constellation,
    demodulate,
    dequantize,
    gray_decode,
    gray_encode,
    inject_symbol_errors,
    modulate,
    quantize,
)
from .receiver import (
    LinkQuality,
    detect_frames,
    link_quality,
    mmse_filter,
    mqam_ser,
    sic_order,
    stage_sinr,
)
from .selection import (
    NoParticipantsError,
    SelectionConfig,
    accept,
    accept_empirical,
    accept_packet,
    aggregate,
)
from .experiment import (
    ExperimentResult,
    RoundRecord,
    run_experiment,
    sweep,
    validate_ser,
)

__version__ = "0.1.0"
