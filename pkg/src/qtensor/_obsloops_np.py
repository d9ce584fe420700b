"""Pure numpy implementation of the per-observation likelihood kernels.

Same contract as the compiled module ``_obsloops``: flat float64 arrays,
1-based integer labels, boundary array without the infinite end sentinels,
and sums without the objective prefactor.  Bin probabilities are evaluated
tail-safe and floored at ``PROB_FLOOR`` before any division or logarithm.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit, ndtr

BACKEND = "numpy"

_PROB_FLOOR = 1e-12
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _base_cdf(z, model_id):
    return ndtr(z) if model_id == 0 else expit(z)


def _base_pdf(z, model_id):
    if model_id == 0:
        return np.exp(-0.5 * z * z) * _INV_SQRT_2PI
    p = expit(z)
    return p * (1.0 - p)


def _bin_probs(x, labels, omegas, sigma, model_id):
    """Floored probability of each entry's own label, plus the z arguments."""
    ext = np.concatenate(([-np.inf], omegas, [np.inf]))
    zu = (ext[labels] - x) / sigma
    zl = (ext[labels - 1] - x) / sigma
    raw = np.where(
        zl > 0,
        _base_cdf(-zl, model_id) - _base_cdf(-zu, model_id),
        _base_cdf(zu, model_id) - _base_cdf(zl, model_id),
    )
    return np.maximum(raw, _PROB_FLOOR), zu, zl


def nll(x, labels, omegas, sigma, model_id):
    """Sum of ``-log f_label(x)`` over the observed entries."""
    f, _, _ = _bin_probs(x, labels, omegas, sigma, model_id)
    return float(-np.sum(np.log(f)))


def dneg_log_f(x, labels, omegas, sigma, model_id):
    """Per-entry derivative of ``-log f_label`` with respect to the entry."""
    f, zu, zl = _bin_probs(x, labels, omegas, sigma, model_id)
    return (_base_pdf(zu, model_id) - _base_pdf(zl, model_id)) / (sigma * f)


def boundary_grad(x_at_level, x_above, level, omegas, sigma, model_id):
    """Derivative of the label log-loss sum with respect to ``omega_level``.

    ``x_at_level`` holds the entries labeled ``level`` and ``x_above`` the
    entries labeled ``level + 1``; only those labels contribute.
    """
    ext = np.concatenate(([-np.inf], omegas, [np.inf]))
    total = 0.0
    if x_above.size:
        zu = (ext[level + 1] - x_above) / sigma
        zl = (ext[level] - x_above) / sigma
        raw = np.where(
            zl > 0,
            _base_cdf(-zl, model_id) - _base_cdf(-zu, model_id),
            _base_cdf(zu, model_id) - _base_cdf(zl, model_id),
        )
        f_above = np.maximum(raw, _PROB_FLOOR)
        total += float(np.sum(_base_pdf(zl, model_id) / (sigma * f_above)))
    if x_at_level.size:
        zu = (ext[level] - x_at_level) / sigma
        zl = (ext[level - 1] - x_at_level) / sigma
        raw = np.where(
            zl > 0,
            _base_cdf(-zl, model_id) - _base_cdf(-zu, model_id),
            _base_cdf(zu, model_id) - _base_cdf(zl, model_id),
        )
        f_at = np.maximum(raw, _PROB_FLOOR)
        total -= float(np.sum(_base_pdf(zu, model_id) / (sigma * f_at)))
    return total
