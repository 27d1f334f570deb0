"""Shared configuration of the calibrated desk-scale experiments.

Ten devices on six base-station antennas: the four earliest SIC stages are
interference-limited (symbol error rates of 0.1 to 0.7), the remaining six
spread from about 1e-1 down past 1e-4, which is the regime where the
selection policies separate. The quantizer uses a fixed codebook range so
that symbol errors keep an absolute magnitude instead of shrinking with the
per-round gradient scale.
"""

from noma_fl.config import ExperimentConfig, config_from_dict, config_to_dict

SEEDS = (0, 1, 2, 3, 4)


def desk_config(seed: int = 0) -> ExperimentConfig:
    payload = config_to_dict(ExperimentConfig())
    payload["seed"] = seed
    payload["geometry"]["num_devices"] = 10
    payload["channel"]["antennas"] = 6
    payload["channel"]["target_snr_db"] = 15.5
    payload["modem"]["scale_mode"] = "static"
    payload["modem"]["clip_max"] = 2.0
    payload["modem"]["bits_per_codeword"] = 8
    payload["modem"]["bits_per_symbol"] = 4
    payload["training"]["learning_rate"] = 2.0
    payload["training"]["rounds"] = 40
    payload["training"]["hidden_dim"] = 32
    payload["training"]["dataset"]["num_classes"] = 10
    payload["training"]["dataset"]["input_dim"] = 12
    payload["training"]["dataset"]["center_scale"] = 1.5
    payload["training"]["dataset"]["samples_per_class"] = 25
    payload["training"]["dataset"]["test_samples_per_class"] = 100
    return config_from_dict(payload)
