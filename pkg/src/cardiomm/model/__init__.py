"""Unrolled text-conditioned reconstruction network."""

from .layers import Layers, param_rng
from .network import CardioMM, ConfigError, ModelConfig, ReconOutput, UNet, reconstruct

__all__ = ["Layers", "param_rng", "CardioMM", "ConfigError", "ModelConfig", "ReconOutput",
           "UNet", "reconstruct"]
