"""Small fully convolutional image encoder with output stride 4."""
import torch
from torch import nn
import torch.nn.functional as F

from ..errors import ShapeError


class PixelGroupNorm(nn.Module):
    """Group normalisation over channel groups at each pixel.

    Unlike standard group norm this never mixes spatial positions, so a
    feature only depends on pixels inside its receptive field.
    """

    def __init__(self, groups, channels, eps=1e-5):
        super().__init__()
        if channels % groups:
            raise ValueError("channels must be divisible by groups")
        self.groups = groups
        self.eps = eps
        self.weight = nn.Parameter(torch.ones(channels))
        self.bias = nn.Parameter(torch.zeros(channels))

    def forward(self, x):
        b, c, h, w = x.shape
        g = x.view(b, self.groups, c // self.groups, h, w)
        mean = g.mean(dim=2, keepdim=True)
        var = g.var(dim=2, keepdim=True, unbiased=False)
        g = (g - mean) / torch.sqrt(var + self.eps)
        return g.view(b, c, h, w) * self.weight[None, :, None, None] + self.bias[None, :, None, None]


# (out_channels, stride, dilation) per block
BLOCKS = ((16, 2, 1), (32, 2, 1), (32, 1, 2), (32, 1, 4))


class Encoder(nn.Module):
    """Four 3x3 conv blocks (stride 2, 2, 1, 1) -> stride-4, C-channel map."""

    stride = 4

    def __init__(self, channels=32, groups=4):
        super().__init__()
        layers = []
        cin = 3
        for i, (cout, s, dil) in enumerate(BLOCKS):
            if i == len(BLOCKS) - 1:
                cout = channels
            layers += [nn.Conv2d(cin, cout, 3, stride=s, padding=dil, dilation=dil),
                       PixelGroupNorm(groups, cout), nn.SiLU()]
            cin = cout
        self.net = nn.Sequential(*layers)
        self.channels = channels

    def forward(self, image):
        """``image``: (B, 3, H, W) in [0, 1]; returns (B, C, H/4, W/4)."""
        if image.dim() != 4 or image.shape[1] != 3:
            raise ShapeError(f"expected (B, 3, H, W) images, got {tuple(image.shape)}")
        if image.shape[2] % self.stride or image.shape[3] % self.stride:
            raise ShapeError("image size must be divisible by the encoder stride")
        return self.net((image - 0.5) * 4.0)


def receptive_field():
    """Receptive field (pixels) and jump of the encoder output."""
    rf, jump = 1, 1
    for _, s, dil in BLOCKS:
        rf += (3 - 1) * dil * jump
        jump *= s
    return rf, jump


def sample_feature(fmap, uv, image_size):
    """Bilinear pixel-aligned features.

    ``fmap`` (B, C, H', W'), ``uv`` (B, N, 2) continuous pixel coordinates,
    ``image_size`` (W, H). Cell ``i`` is centred on pixel coordinate
    ``stride * (i + 0.5)``; queries outside the map clamp to the border.
    Returns (B, N, C).
    """
    w, h = image_size
    grid = torch.stack([2.0 * uv[..., 0] / w - 1.0, 2.0 * uv[..., 1] / h - 1.0], dim=-1)
    out = F.grid_sample(fmap, grid[:, :, None, :], mode="bilinear", padding_mode="border",
                        align_corners=False)
    return out[..., 0].transpose(1, 2)


def xavier_init(module):
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.Linear)):
            nn.init.xavier_uniform_(m.weight)
            nn.init.zeros_(m.bias)


def mlp(sizes, act=nn.SiLU):
    layers = []
    for i in range(len(sizes) - 1):
        layers.append(nn.Linear(sizes[i], sizes[i + 1]))
        if i < len(sizes) - 2:
            layers.append(act())
    return nn.Sequential(*layers)
