from __future__ import annotations

import math

import numpy as np

from .exceptions import DegenerateClass, EmptyInput


def auc(scores, labels) -> float:
    """ROC AUC as the Mann-Whitney statistic, ties counted one half.

    Counting is done in integers and divided once, so the result is the
    correctly rounded value of the exact rational.
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if scores.shape != labels.shape:
        raise ValueError(f"{scores.size} scores for {labels.size} labels")
    pos = np.sort(scores[labels == 1])
    neg = np.sort(scores[labels == 0])
    if pos.size == 0 or neg.size == 0:
        raise DegenerateClass("auc needs at least one positive and one negative")
    below = np.searchsorted(neg, pos, side="left")
    at_or_below = np.searchsorted(neg, pos, side="right")
    twice_u = int(below.sum()) * 2 + int((at_or_below - below).sum())
    return twice_u / (2 * pos.size * neg.size)


def rmse(pred, measured) -> float:
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    measured = np.asarray(measured, dtype=np.float64).reshape(-1)
    if pred.size == 0:
        raise EmptyInput("rmse of an empty sequence")
    if pred.shape != measured.shape:
        raise ValueError(f"{pred.size} predictions for {measured.size} measurements")
    return math.sqrt(float(np.mean((pred - measured) ** 2)))
