"""Training loss: mean squared error plus a one-sided squared penalty.

A prediction above the target means a less conservative shift than the data
demanded, which is the unsafe direction; those errors get the extra
penalty. With the deputy approaching from the other side of the target the
unsafe direction flips, so the penalty direction is a flag.
"""

from __future__ import annotations

import torch


def custom_loss(
    pred: torch.Tensor,
    target: torch.Tensor,
    eta: float,
    flip_direction: bool = False,
) -> torch.Tensor:
    """mean((pred-target)^2) + eta * mean(relu(err)^2), err signed by direction."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(target.shape)}")
    err = pred - target
    mse = torch.mean(err**2)
    one_sided = torch.relu(target - pred) if flip_direction else torch.relu(err)
    return mse + eta * torch.mean(one_sided**2)


def loss_components(
    pred: torch.Tensor, target: torch.Tensor, flip_direction: bool = False
) -> tuple[float, float]:
    """(mse, msrelu) as plain floats, for reports."""
    with torch.no_grad():
        err = pred - target
        mse = float(torch.mean(err**2))
        one_sided = torch.relu(target - pred) if flip_direction else torch.relu(err)
        msrelu = float(torch.mean(one_sided**2))
    return mse, msrelu
