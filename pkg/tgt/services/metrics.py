"""
Evaluation metrics. Percentages are reported on a 0-100 scale.
"""
from typing import Optional

import numpy as np
from scipy import stats
from sklearn.metrics import f1_score

from tgt.core.config import BinSpec
from tgt.nn.encodings import bin_distance


def mae(predictions: np.ndarray, targets: np.ndarray) -> float:
    predictions = np.asarray(predictions, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if predictions.size == 0:
        return float("nan")
    return float(np.mean(np.abs(predictions - targets)))


def ewt(predictions: np.ndarray, targets: np.ndarray, threshold: float) -> float:
    """Percentage of predictions within ``threshold`` of the target"""
    errors = np.abs(np.asarray(predictions, dtype=np.float64) - np.asarray(targets))
    if errors.size == 0:
        return float("nan")
    return float(100.0 * np.mean(errors <= threshold))


def edge_f1(
    logits: np.ndarray, labels: np.ndarray, candidates: Optional[np.ndarray] = None
) -> float:
    """Binary F1 (percent) over candidate pairs, each unordered pair counted once"""
    logits = np.asarray(logits)
    n = logits.shape[0]
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    if candidates is not None:
        upper &= np.asarray(candidates, dtype=bool)
    return binary_f1(np.asarray(labels)[upper], logits[upper] > 0)


def binary_f1(labels: np.ndarray, predicted: np.ndarray) -> float:
    """F1 in percent; no positives anywhere counts as perfect"""
    truth = np.asarray(labels).astype(np.int64)
    guess = np.asarray(predicted).astype(np.int64)
    return float(100.0 * f1_score(truth, guess, zero_division=1.0))


def distance_cross_entropy(logits: np.ndarray, distances: np.ndarray, spec: BinSpec) -> float:
    """Mean cross-entropy of binned target distances over off-diagonal pairs"""
    logits = np.asarray(logits, dtype=np.float64)
    n = logits.shape[0]
    off_diagonal = ~np.eye(n, dtype=bool)
    targets = bin_distance(distances, spec)[off_diagonal]
    z = logits[off_diagonal]
    z = z - z.max(axis=-1, keepdims=True)
    log_p = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
    return float(-np.mean(log_p[np.arange(len(targets)), targets]))


def spearman(x: np.ndarray, y: np.ndarray) -> float:
    rho = stats.spearmanr(x, y).statistic
    return float(rho)
