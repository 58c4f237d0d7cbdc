"""Small three-level encoder-decoder segmenter."""

from __future__ import annotations

import numpy as np
import torch
from torch import nn
from torch.nn.utils import parameters_to_vector, vector_to_parameters


def _block(cin: int, cout: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(cin, cout, 3, padding=1),
        nn.ReLU(inplace=True),
        nn.Conv2d(cout, cout, 3, padding=1),
        nn.ReLU(inplace=True),
    )


class Segmenter(nn.Module):
    """U-Net style network with widths 8/16/32 and skip connections.

    No normalization layers: intensity statistics of the input are left for the
    network (and the augmentation) to deal with.
    """

    def __init__(self, in_channels: int = 1, num_classes: int = 2, widths=(8, 16, 32)):
        super().__init__()
        w1, w2, w3 = widths
        self.enc1 = _block(in_channels, w1)
        self.enc2 = _block(w1, w2)
        self.bottom = _block(w2, w3)
        self.up2 = nn.ConvTranspose2d(w3, w2, 2, stride=2)
        self.dec2 = _block(2 * w2, w2)
        self.up1 = nn.ConvTranspose2d(w2, w1, 2, stride=2)
        self.dec1 = _block(2 * w1, w1)
        self.head = nn.Conv2d(w1, num_classes, 1)
        self.pool = nn.MaxPool2d(2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        e1 = self.enc1(x)
        e2 = self.enc2(self.pool(e1))
        b = self.bottom(self.pool(e2))
        d2 = self.dec2(torch.cat([self.up2(b), e2], dim=1))
        d1 = self.dec1(torch.cat([self.up1(d2), e1], dim=1))
        return self.head(d1)

    def get_theta(self) -> np.ndarray:
        return parameters_to_vector(self.parameters()).detach().cpu().numpy().copy()

    def set_theta(self, theta) -> None:
        vector_to_parameters(torch.as_tensor(np.asarray(theta), dtype=torch.float32), self.parameters())

    @torch.no_grad()
    def predict(self, images: np.ndarray, batch_size: int = 32) -> np.ndarray:
        """Argmax label maps for ``(N, C, H, W)`` inputs."""
        self.eval()
        out = []
        for s in range(0, len(images), batch_size):
            x = torch.from_numpy(np.ascontiguousarray(images[s : s + batch_size], dtype=np.float32))
            out.append(self(x).argmax(dim=1).numpy().astype(np.uint8))
        return np.concatenate(out)
