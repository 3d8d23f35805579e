"""Unrolled text-conditioned reconstruction network.

Each of ``K`` phases applies a text-aware UNet de-aliasing step to the
coil-combined image and then enforces data consistency in k-space. Coil
sensitivities come from a small per-coil UNet refining the ACS images.
Complex images are packed as two real channels at the network boundary.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..autodiff import (ParamStore, Tensor, crop2d, no_grad, pad2d, softplus, sqrt)
from ..autodiff.complex import abs2, cmul, fft2c, ifft2c, pack, root_sum_of_squares, to_complex
from ..autodiff.tensor import get_default_dtype
from ..classic import acs_lowres_images
from ..physics import ifft2c as np_ifft2c, sos
from ..text import (EMBED_DIM, RAW_DIM, HashingEncoder, TextBundle, init_text_heads,
                    project_metadata, project_undersampling)
from .layers import Layers, concat_channels

# softplus(_RHO_ONE) == 1
_RHO_ONE = float(np.log(np.e - 1.0))


class ConfigError(ValueError):
    pass


@dataclass
class ModelConfig:
    """Network hyperparameters.

    ``unet_levels`` counts encoder levels (each ending in a 2x downsampling);
    inputs are zero-padded to a multiple of ``2**unet_levels`` and cropped back.
    """

    phases: int = 10
    unet_levels: int = 3
    base_channels: int = 16
    prompt_components: int = 3
    prompt_size: int = 8
    embed_dim: int = EMBED_DIM
    raw_dim: int = RAW_DIM
    cab_reduction: int = 4
    text_aware: bool = True
    sens_channels: int = 8
    sens_levels: int = 2
    sens_eps: float = 1e-6
    output_gain: float = 0.1

    def __post_init__(self):
        if self.phases < 0:
            raise ConfigError(f"phases must be >= 0, got {self.phases}")
        if self.prompt_components < 1:
            raise ConfigError(f"prompt_components must be >= 1, got {self.prompt_components}")
        if self.unet_levels < 2 or self.sens_levels < 1:
            raise ConfigError("unet_levels must be >= 2 and sens_levels >= 1")
        if self.base_channels < 4:
            raise ConfigError(f"base_channels must be >= 4, got {self.base_channels}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config fields: {sorted(unknown)}")
        return cls(**d)


@dataclass
class ReconOutput:
    """Reconstruction result in the scaled domain plus the scale factor."""

    combined: Tensor                  # (2, H, W) coil-combined complex image
    magnitude: Tensor                 # (H, W) SoS of the multi-coil estimate
    scale: float
    maps: Tensor | None = None
    trace: list = field(default_factory=list)

    def image(self) -> np.ndarray:
        """Complex coil-combined image in original units."""
        return to_complex(self.combined.data) * self.scale

    def sos(self) -> np.ndarray:
        return self.magnitude.data * self.scale


class UNet:
    """Text-aware UNet with channel attention blocks.

    Encoder level ``i`` works at ``base * 2**i`` channels; decoder level ``i``
    receives ``base * 2**(i+1)`` channels and returns ``base * 2**i``.
    """

    def __init__(self, layers: Layers, prefix: str, cin: int, cout: int, base: int,
                 levels: int, text_aware: bool, q: int = 3, prompt_size: int = 8,
                 dim: int = EMBED_DIM, reduction: int = 4, output_gain: float = 0.1):
        self.L, self.prefix = layers, prefix
        self.levels, self.base, self.text_aware = levels, base, text_aware
        ch = [base * 2 ** i for i in range(levels + 1)]
        self.ch = ch
        L, p = layers, prefix
        L.init_conv(f"{p}.in", cin, base, 3)
        for i in range(levels):
            for j in range(3):
                L.init_cab(f"{p}.enc{i}.cab.{j}", ch[i], reduction)
            L.init_conv(f"{p}.enc{i}.down", ch[i], ch[i + 1], 3)
        for j in range(3):
            L.init_cab(f"{p}.mid.cab.{j}", ch[levels], reduction)
        for i in range(levels):
            cat = ch[i + 1] + ch[i]
            for j in range(3):
                L.init_cab(f"{p}.dec{i}.cab.{j}", cat, reduction)
            L.init_conv(f"{p}.dec{i}.up", cat, ch[i], 1)
            L.init_cab(f"{p}.dec{i}.fuse", ch[i], reduction)
            if text_aware:
                L.init_prompter(f"{p}.dec{i}.prompt", ch[i], dim, q, prompt_size)
                L.init_adapter(f"{p}.dec{i}.adapter", ch[i], dim)
        L.init_conv(f"{p}.out", base, cout, 3, gain=output_gain)

    @property
    def multiple(self) -> int:
        return 2 ** self.levels

    def encoder_level(self, i: int, f_ei: Tensor) -> tuple[Tensor, Tensor]:
        f_s = self.L.cab_stack(f"{self.prefix}.enc{i}.cab", f_ei, 3)
        return f_s, self.L.downsample(f"{self.prefix}.enc{i}.down", f_s)

    def decoder_level(self, i: int, f_di: Tensor, f_s: Tensor, t_m: Tensor | None,
                      t_u: Tensor | None) -> Tensor:
        L, p = self.L, f"{self.prefix}.dec{i}"
        n, _, h, w = f_di.shape
        if f_s.shape[-2:] != (2 * h, 2 * w):
            raise ValueError(f"skip shape {f_s.shape} does not match decoder input {f_di.shape}")
        if self.text_aware and t_u is not None:
            e_u = L.prompter(f"{p}.prompt", t_u, (h, w))
        else:
            e_u = Tensor(np.zeros((n, self.ch[i], h, w), dtype=f_di.dtype))
        f_u = L.upsample(f"{p}.up", L.cab_stack(f"{p}.cab", concat_channels(f_di, e_u), 3))
        f_a = L.cab(f"{p}.fuse", f_u + f_s)
        if self.text_aware and t_m is not None:
            return f_a + L.adapter(f"{p}.adapter", f_a, t_m)
        return f_a

    def __call__(self, x: Tensor, t_m: Tensor | None = None, t_u: Tensor | None = None
                 ) -> Tensor:
        h, w = x.shape[-2:]
        m = self.multiple
        ph, pw = (-h) % m, (-w) % m
        xp = pad2d(x, (ph // 2, ph - ph // 2), (pw // 2, pw - pw // 2)) if (ph or pw) else x
        f = self.L.conv(f"{self.prefix}.in", xp)
        skips = []
        for i in range(self.levels):
            f_s, f = self.encoder_level(i, f)
            skips.append(f_s)
        f = self.L.cab_stack(f"{self.prefix}.mid.cab", f, 3)
        for i in reversed(range(self.levels)):
            f = self.decoder_level(i, f, skips[i], t_m, t_u)
        out = self.L.conv(f"{self.prefix}.out", f)
        if ph or pw:
            out = crop2d(out, h, w, ph // 2, pw // 2)
        return out


class CardioMM:
    """Unrolled reconstruction model with its own parameter store."""

    def __init__(self, config: ModelConfig | None = None, seed: int = 0,
                 store: ParamStore | None = None):
        self.config = config or ModelConfig()
        self.seed = seed
        self.store = store if store is not None else ParamStore()
        self.layers = Layers(self.store, seed)
        self.encoder = HashingEncoder()
        cfg = self.config
        if cfg.text_aware:
            init_text_heads(self.store, np.random.default_rng(seed), cfg.raw_dim, cfg.embed_dim)
        self.sens_net = UNet(self.layers, "sens", 2, 2, cfg.sens_channels, cfg.sens_levels,
                             text_aware=False, reduction=cfg.cab_reduction,
                             output_gain=cfg.output_gain)
        self.phase_nets = []
        for k in range(cfg.phases):
            self.phase_nets.append(UNet(
                self.layers, f"phase{k}", 2, 2, cfg.base_channels, cfg.unet_levels,
                text_aware=cfg.text_aware, q=cfg.prompt_components,
                prompt_size=cfg.prompt_size, dim=cfg.embed_dim, reduction=cfg.cab_reduction,
                output_gain=cfg.output_gain))
            self.store.add(f"phase{k}.rho", Tensor(np.full((1,), _RHO_ONE,
                                                           dtype=get_default_dtype())))

    # ------------------------------------------------------------ pieces
    def lam(self, k: int) -> Tensor:
        return softplus(self.store[f"phase{k}.rho"])

    def conditioning(self, texts: TextBundle | None) -> tuple[Tensor | None, Tensor | None]:
        if not self.config.text_aware or texts is None:
            return None, None
        t_m = project_metadata(self.store, self.encoder(texts.metadata_text))
        t_u = project_undersampling(self.store, self.encoder(texts.undersampling_text))
        return t_m, t_u

    def estimate_maps(self, y: Tensor, acs: tuple[slice, slice]) -> Tensor:
        """Learned sensitivities: residual per-coil UNet on ACS images, then RSS-normalised."""
        low = pack(acs_lowres_images(to_complex(y.data), acs), y.dtype)
        refined = low + self.sens_net(low)
        rss2 = abs2(refined).sum(axis=0)
        eps = (self.config.sens_eps * float(np.sqrt(rss2.data.max()))) ** 2
        norm = sqrt(rss2 + eps).reshape((1, 1) + rss2.shape)
        return refined / norm

    def dealias(self, k: int, x: Tensor, maps: Tensor, t_m, t_u) -> Tensor:
        """Combine coils, run the phase-``k`` UNet with a global residual, expand."""
        comb = cmul(x, maps, conj_b=True).sum(axis=0)
        z = comb.reshape((1,) + comb.shape)
        out = z + self.phase_nets[k](z, t_m, t_u)
        return cmul(maps, out)

    def reconstruct(self, y: np.ndarray, mask, texts: TextBundle | None = None,
                    acs: tuple[slice, slice] | None = None, keep_trace: bool = False
                    ) -> ReconOutput:
        """Unrolled reconstruction of undersampled multi-coil k-space.

        Parameters
        ----------
        y : ndarray, shape (C, ky, kx), complex
            Acquired k-space; entries outside the mask are ignored.
        mask : UndersamplingMask or ndarray
            Sampling grid (and ACS region when an ``UndersamplingMask``).
        texts : TextBundle, optional
            Metadata and undersampling descriptions.
        acs : tuple of slices, optional
            Overrides the ACS region of ``mask``.
        """
        grid = np.asarray(getattr(mask, "grid", mask))
        if acs is None:
            if not hasattr(mask, "acs_region"):
                raise ValueError("an ACS region is required with a bare mask array")
            acs = mask.acs_region()
        y = np.asarray(y) * grid
        scale = float(sos(np_ifft2c(y)).max())
        if scale == 0:
            raise ValueError("acquired k-space is all zero")
        dtype = get_default_dtype()
        yt = pack(y / scale, dtype)
        m = grid.astype(dtype)
        x = ifft2c(yt)
        maps = self.estimate_maps(yt, acs)
        t_m, t_u = self.conditioning(texts)
        trace = []
        for k in range(self.config.phases):
            x = self.data_consistency(self.dealias(k, x, maps, t_m, t_u), yt, m, self.lam(k))
            if keep_trace:
                trace.append(to_complex(x.data) * scale)
        combined = cmul(x, maps, conj_b=True).sum(axis=0)
        return ReconOutput(combined, root_sum_of_squares(x), scale, maps, trace)

    @staticmethod
    def data_consistency(m: Tensor, y: Tensor, mask: np.ndarray, lam: Tensor) -> Tensor:
        """Exact k-space solve of the proximal data-consistency step.

        Acquired entries become ``(y + lam F m) / (1 + lam)``; others stay ``F m``.
        """
        km = fft2c(m)
        acquired = (km * lam + y) / (lam + 1.0)
        return ifft2c(km * (1.0 - mask) + acquired * mask)

    def __call__(self, *args, **kwargs) -> ReconOutput:
        return self.reconstruct(*args, **kwargs)

    def infer(self, *args, **kwargs) -> ReconOutput:
        with no_grad():
            return self.reconstruct(*args, **kwargs)

    # ------------------------------------------------------- checkpoints
    def save(self, stem: str | os.PathLike, extra: dict | None = None) -> Path:
        stem = Path(stem)
        self.store.save(stem)
        meta = {"config": self.config.to_dict(), "seed": self.seed, "extra": extra or {}}
        path = stem.with_suffix(".model.json")
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(json.dumps(meta, indent=1, sort_keys=True))
        os.replace(tmp, path)
        return path

    @classmethod
    def load(cls, stem: str | os.PathLike) -> "CardioMM":
        stem = Path(stem)
        meta_path = stem.with_suffix(".model.json")
        if not meta_path.is_file():
            raise FileNotFoundError(f"missing model manifest {meta_path}")
        meta = json.loads(meta_path.read_text())
        model = cls(ModelConfig.from_dict(meta["config"]), seed=meta["seed"])
        model.store.load(stem)
        model.extra = meta.get("extra", {})
        return model


def reconstruct(y, mask, texts, model: CardioMM, **kwargs) -> ReconOutput:
    return model.infer(y, mask, texts, **kwargs)
