"""Full network: pyramid encoder, global-context branch, CRM decoder."""
from dataclasses import dataclass

import numpy as np

from .autodiff import ops
from .autodiff.nn import Module
from .autodiff.tensor import Tensor
from .crm import CRMDecoder
from .encoder import FeaturePyramid, PyramidEncoder
from .global_branch import GlobalContextBranch, GlobalContextMap
from .scaling import check_mode


@dataclass
class NetworkOutput:
    pyramid: FeaturePyramid
    global_map: GlobalContextMap | None
    stages: list  # StagePrediction, index 0 is decoder stage 1

    @property
    def prediction(self):
        """Stage-1 refined prediction at full resolution, [B, 1, H, W]."""
        return self.stages[0].fullres(2)


class SaliencyNetwork(Module):
    def __init__(self, rng, side=64, widths=(16, 32, 64, 128), depths=(1, 1, 2, 1),
                 reductions=(4, 2, 1, 1), heads=2, patch=16, global_dim=32, decoder_dim=32,
                 use_global=True, rescale_mode="pixel_shuffle", max_tokens=1024):
        super().__init__()
        self.side = side
        self.rescale_mode = check_mode(rescale_mode)
        self.use_global = use_global
        self.encoder = PyramidEncoder(rng, side, 3, widths, depths, reductions, heads)
        if use_global:
            self.branch = GlobalContextBranch(rng, widths, side, patch, global_dim, heads, rescale_mode)
        self.decoder = CRMDecoder(rng, widths, side, decoder_dim, global_dim, heads, use_global,
                                  rescale_mode, max_tokens, patch)

    @classmethod
    def from_config(cls, cfg):
        rng = np.random.default_rng(cfg.seed)
        return cls(rng, cfg.side, cfg.widths, cfg.depths, cfg.reductions, cfg.heads, cfg.patch,
                   cfg.global_dim, cfg.decoder_dim, cfg.use_global, cfg.rescale_mode, cfg.max_tokens)

    def parameter_groups(self):
        groups = {"encoder": self.encoder.parameters(), "decoder": self.decoder.parameters()}
        groups["branch"] = self.branch.parameters() if self.use_global else []
        return groups

    def forward(self, img):
        img = img if isinstance(img, Tensor) else Tensor(img)
        # interpolation is only legal inside the network for the bilinear ablation
        with ops.interpolation_forbidden(self.rescale_mode == "pixel_shuffle"):
            pyramid = self.encoder(img)
            gmap = self.branch(pyramid) if self.use_global else None
            stages = self.decoder(pyramid, gmap.features if gmap is not None else None)
        return NetworkOutput(pyramid, gmap, stages)
