"""Generalized state-space-model joint source-channel coding for images."""

from .tensor import Rng, Tensor, grad_check, no_grad
from .ssm import (SsmDirectionParams, StepParams, generate_step_params,
                  ssm_matrix_oracle, ssm_scan, zero_input_oracle)
from .gssm import (CsiRestConfig, GssmModule, ScanScheme, dual_gssm_csi,
                   gssm_apply, receptive_field_map, scan_exchange,
                   scan_recover)
from .blocks import VssmCa, vssm_ca_forward
from .codec import (ChannelSignal, Codec, ModelConfig, desk_config,
                    load_checkpoint, full_scale_config, save_checkpoint)
from .channel import awgn, mmse_equalize, rayleigh, transmit
from .metrics import msssim, msssim_db, msssim_value, psnr, ssim
from .training import AdamState, adam_step, evaluate, train
from .macs import MacCounter, count_macs, count_params

__version__ = "0.1.0"
