"""Confusion-matrix classification metrics, summary statistics, paired t-test.

Per-class precision, sensitivity and F1 are one-vs-rest; macro averages weight
classes equally. Degenerate classes (never predicted, or zero support) take
the 0 convention. The t-test p-value comes from a continued-fraction
evaluation of the regularized incomplete beta function.
"""

import math
from dataclasses import dataclass

import numpy as np


def confusion(preds, labels, k):
    """K x K count matrix, rows = true class, cols = predicted class."""
    preds = np.asarray(preds, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if preds.shape != labels.shape or preds.ndim != 1:
        raise ValueError(f"confusion: preds {preds.shape} and labels {labels.shape} must be equal-length 1-D")
    for name, arr in (("preds", preds), ("labels", labels)):
        if arr.size and (arr.min() < 0 or arr.max() >= k):
            raise ValueError(f"confusion: {name} contain classes outside [0, {k})")
    cm = np.zeros((k, k), dtype=np.int64)
    np.add.at(cm, (labels, preds), 1)
    return cm


@dataclass
class MetricReport:
    accuracy: float
    precision: list
    sensitivity: list
    f1: list
    macro_precision: float
    macro_sensitivity: float
    macro_f1: float

    def to_dict(self):
        return {
            "accuracy": self.accuracy,
            "per_class": {
                "precision": self.precision,
                "sensitivity": self.sensitivity,
                "f1": self.f1,
            },
            "macro": {
                "precision": self.macro_precision,
                "sensitivity": self.macro_sensitivity,
                "f1": self.macro_f1,
            },
        }


def metrics(cm):
    """Accuracy plus per-class and macro precision/sensitivity/F1 from counts."""
    cm = np.asarray(cm, dtype=np.int64)
    total = int(cm.sum())
    if total == 0:
        raise ValueError("metrics: empty confusion matrix")
    k = cm.shape[0]
    precision, sensitivity, f1 = [], [], []
    for c in range(k):
        tp = int(cm[c, c])
        fp = int(cm[:, c].sum()) - tp
        fn = int(cm[c, :].sum()) - tp
        p = tp / (tp + fp) if tp + fp else 0.0
        s = tp / (tp + fn) if tp + fn else 0.0
        f = 2 * p * s / (p + s) if p + s else 0.0
        precision.append(p)
        sensitivity.append(s)
        f1.append(f)
    return MetricReport(
        accuracy=float(np.trace(cm)) / total,
        precision=precision,
        sensitivity=sensitivity,
        f1=f1,
        macro_precision=sum(precision) / k,
        macro_sensitivity=sum(sensitivity) / k,
        macro_f1=sum(f1) / k,
    )


@dataclass
class SummaryStats:
    mean: float
    std: float  # population (divisor N)
    n: int


def summary_stats(xs):
    xs = np.asarray(xs, dtype=np.float64)
    if xs.size == 0:
        raise ValueError("summary_stats: empty input")
    mu = float(xs.mean())
    return SummaryStats(mu, math.sqrt(float(((xs - mu) ** 2).mean())), int(xs.size))


def _betacf(a, b, x, max_iter=200, eps=3e-14):
    """Continued fraction for the incomplete beta function (Lentz's method)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise RuntimeError("incomplete beta continued fraction did not converge")


def betainc(a, b, x):
    """Regularized incomplete beta I_x(a, b)."""
    if x < 0.0 or x > 1.0:
        raise ValueError(f"betainc: x must lie in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return float(x)
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_sf_two_sided(t, df):
    """P(|T_df| >= |t|) via I_{df/(df+t^2)}(df/2, 1/2)."""
    return betainc(df / 2.0, 0.5, df / (df + t * t))


def paired_t_test(a, b):
    """Two-sided paired t-test; returns {'t', 'df', 'p_two_sided'}.

    Uses the sample standard deviation (divisor n-1) of the differences.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired_t_test: inputs must be equal-length 1-D arrays")
    n = a.size
    if n < 2:
        raise ValueError("paired_t_test: need at least 2 pairs")
    d = a - b
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        raise ValueError("paired_t_test: degenerate differences (zero variance)")
    t = float(d.mean()) / (sd / math.sqrt(n))
    df = n - 1
    return {"t": t, "df": df, "p_two_sided": t_sf_two_sided(t, df)}
