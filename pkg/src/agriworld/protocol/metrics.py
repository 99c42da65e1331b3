"""Evaluation metrics: spatial IoU and normalized RMSE."""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from ..errors import ArgumentError, GridMismatch, ZeroMeanNormalization


def iou(pred_mask, truth_mask) -> float:
    """``|pred & truth| / |pred | truth|``; two empty masks score 1.0."""
    p = np.asarray(pred_mask, dtype=bool)
    t = np.asarray(truth_mask, dtype=bool)
    if p.shape != t.shape:
        raise GridMismatch(f"mask shapes differ: {p.shape} vs {t.shape}", observed=list(p.shape), expected=list(t.shape))
    union = int(np.logical_or(p, t).sum())
    if union == 0:
        return 1.0
    return int(np.logical_and(p, t).sum()) / union


def set_mask(members: Iterable[str], universe: Sequence[str]) -> np.ndarray:
    chosen = set(members)
    return np.array([u in chosen for u in universe], dtype=bool)


def iou_sets(pred: Iterable[str], truth: Iterable[str], universe: Sequence[str]) -> float:
    """IoU of two id sets rasterized over a shared ordered universe."""
    pred, truth = list(pred), list(truth)
    stray = sorted((set(pred) | set(truth)) - set(universe))
    # ids outside the universe still count toward the union
    uni = list(universe) + stray
    return iou(set_mask(pred, uni), set_mask(truth, uni))


def nrmse(predicted: Sequence[float], truth: Sequence[float]) -> float:
    """``sqrt(mean((yhat - y)^2)) / mean(y)``."""
    if len(predicted) != len(truth) or len(truth) == 0:
        raise ArgumentError(
            "nrmse needs equal-length non-empty series", observed=[len(predicted), len(truth)]
        )
    ybar = math.fsum(truth) / len(truth)
    if ybar == 0.0:
        raise ZeroMeanNormalization("mean of truth is zero; NRMSE undefined")
    mse = math.fsum((float(a) - float(b)) ** 2 for a, b in zip(predicted, truth)) / len(truth)
    return math.sqrt(mse) / ybar
