"""IAM-weighted mean absolute logarithmic error training objective.

The weight map is computed from the clean/noisy targets only and treated as a
constant with respect to the prediction; gradients flow through the predicted
magnitudes alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad

EPS = 1e-8


@dataclass(frozen=True)
class IamLossParams:
    gamma: float = 1.0
    a: float = 2.0
    b: float = 1.0

    def __post_init__(self):
        if self.b <= 0:
            raise ValueError("b must be positive so b + mask stays positive")


def ideal_amplitude_mask(clean_mag, noisy_mag, gamma: float = 1.0) -> np.ndarray:
    """(clean / noisy)^gamma with an epsilon-guarded denominator; may exceed 1."""
    clean_mag = np.asarray(clean_mag, dtype=np.float64)
    noisy_mag = np.asarray(noisy_mag, dtype=np.float64)
    if np.any(clean_mag < 0) or np.any(noisy_mag < 0):
        raise ValueError("magnitudes must be non-negative")
    return (clean_mag / (noisy_mag + EPS)) ** gamma


def iam_weight(mask, a: float = 2.0, b: float = 1.0) -> np.ndarray:
    """exp(a / (b + mask)): strictly positive, decreasing in the mask for a > 0,
    so low-SNR bins weigh more."""
    mask = np.asarray(mask, dtype=np.float64)
    if np.any(mask < 0):
        raise ValueError("mask must be non-negative")
    return np.exp(a / (b + mask))


def iam_male_loss(pred_mag, clean_mag, noisy_mag,
                  params: IamLossParams = IamLossParams()):
    """Sum over all bins of W * |ln(pred+1) - ln(clean+1)|.

    pred_mag may be an autodiff Tensor (training) or an ndarray (evaluation);
    clean/noisy magnitudes are plain arrays. Returns the same kind as pred_mag.
    """
    clean_mag = np.asarray(clean_mag, dtype=np.float64)
    noisy_mag = np.asarray(noisy_mag, dtype=np.float64)
    weights = iam_weight(
        ideal_amplitude_mask(clean_mag, noisy_mag, params.gamma), params.a, params.b)

    if isinstance(pred_mag, ad.Tensor):
        if pred_mag.data.shape != clean_mag.shape:
            raise ValueError(f"shape mismatch {pred_mag.data.shape} vs {clean_mag.shape}")
        if np.any(pred_mag.data < 0):
            raise ValueError("magnitudes must be non-negative")
        diff = ad.sub(ad.log1p(pred_mag), ad.constant(np.log1p(clean_mag)))
        return ad.tsum(ad.mul(ad.constant(weights), ad.absolute(diff)))

    pred_mag = np.asarray(pred_mag, dtype=np.float64)
    if pred_mag.shape != clean_mag.shape:
        raise ValueError(f"shape mismatch {pred_mag.shape} vs {clean_mag.shape}")
    if np.any(pred_mag < 0):
        raise ValueError("magnitudes must be non-negative")
    return float(np.sum(weights * np.abs(np.log1p(pred_mag) - np.log1p(clean_mag))))
