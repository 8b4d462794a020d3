"""Virtual-noise estimation for unsupervised forest splits.

Instead of generating a synthetic noise class, each node assumes a noise
mass equal to its real datapoint count and distributes it across a
candidate split analytically: the split threshold is standardized to the
node's feature interval (which maps to [-3, 3]) and a randomly chosen CDF
gives the fraction of noise falling left of the threshold.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

__all__ = [
    "NOISE_KINDS",
    "gini",
    "gini_gain",
    "standardize",
    "noise_cdf",
    "estimate_noise_children",
]

NOISE_KINDS = ("uniform", "normal", "bimodal")

# Logistic approximation of the standard normal CDF (Waissi-Rossin form).
_BETA1 = -0.0004406
_BETA2 = 0.04181198
_BETA3 = 0.9
_SQRT_PI = math.sqrt(math.pi)


def gini(count_real: float, count_noise: float) -> float:
    """Two-class Gini impurity from a real count and a (fractional) noise count."""
    if count_real < 0 or count_noise < 0:
        raise ValueError("counts must be nonnegative")
    total = count_real + count_noise
    if total <= 0:
        raise ValueError("empty node: both counts zero")
    p = count_real / total
    return 2.0 * p * (1.0 - p)


def gini_gain(parent: tuple, left: tuple, right: tuple) -> float:
    """Impurity decrease of a split; counts are (real, noise) per node.

    Requires class-wise conservation: child real counts must sum exactly to
    the parent's, noise counts within 1e-9.
    """
    if left[0] + right[0] != parent[0]:
        raise ValueError(f"real counts not conserved: {left[0]} + {right[0]} != {parent[0]}")
    if abs(left[1] + right[1] - parent[1]) > 1e-9:
        raise ValueError(f"noise counts not conserved: {left[1]} + {right[1]} != {parent[1]}")
    m_parent = parent[0] + parent[1]
    m_left = left[0] + left[1]
    m_right = right[0] + right[1]
    return (
        gini(*parent)
        - (m_left / m_parent) * gini(*left)
        - (m_right / m_parent) * gini(*right)
    )


def standardize(tau: float, node_min: float, node_max: float) -> float:
    """Map a threshold to z-units of the node interval: mean at the interval
    midpoint, sigma at one sixth of the width, so the interval covers +-3 sigma."""
    if not node_max > node_min:
        raise ValueError(f"degenerate feature interval [{node_min}, {node_max}]")
    mu = (node_max + node_min) / 2.0
    sigma = (node_max - node_min) / 6.0
    return (tau - mu) / sigma


def _normal_cdf(z):
    # valid well beyond [-3, 3]; the bimodal form evaluates it at z -+ 3
    poly = _BETA1 * z**5 + _BETA2 * z**3 + _BETA3 * z
    return 1.0 / (1.0 + np.exp(-_SQRT_PI * poly))


def _bimodal_cdf(z):
    # The plain sum of two shifted normal CDFs spans [P(-3), P(3)] ~ [0.5, 1.5];
    # renormalize so the result is a valid CDF on [-3, 3].
    raw = _normal_cdf(z - 3.0) + _normal_cdf(z + 3.0)
    lo = _normal_cdf(-6.0) + _normal_cdf(0.0)
    hi = _normal_cdf(0.0) + _normal_cdf(6.0)
    return (raw - lo) / (hi - lo)


def noise_cdf(kind: str, z):
    """Noise CDF value(s) at standardized threshold z, clamped to [-3, 3].

    Accepts a scalar or ndarray; nondecreasing in z with range [0, 1] for
    all three kinds.
    """
    z = np.asarray(z, dtype=np.float64)
    if np.any(z < -3.0) or np.any(z > 3.0):
        warnings.warn("standardized threshold outside [-3, 3]; clamping", stacklevel=2)
        z = np.clip(z, -3.0, 3.0)
    if kind == "uniform":
        out = z / 6.0 + 0.5
    elif kind == "normal":
        out = _normal_cdf(z)
    elif kind == "bimodal":
        out = _bimodal_cdf(z)
    else:
        raise ValueError(f"unknown noise kind {kind!r}")
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def estimate_noise_children(m_real_node: int, p) -> tuple:
    """Split the node's noise mass (equal to its real count) across children.

    The right count is the exact complement so left + right == m_real_node
    holds bit-exactly.
    """
    if m_real_node < 1:
        raise ValueError("node must hold at least one real datapoint")
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise ValueError("split fraction outside [0, 1]")
    left = m_real_node * p
    right = m_real_node - left
    if left.ndim == 0:
        return float(left), float(right)
    return left, right
