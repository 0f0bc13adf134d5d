"""Pure-numpy kernels, API-identical to the compiled module."""

import numpy as np


def pair_dot(U, V, rows, cols):
    """w[t] = <U[rows[t], :], V[cols[t], :]>."""
    return np.einsum("tq,tq->t", U[rows], V[cols])


def scatter_add(out, rows, cols, vals):
    """out[rows[t], cols[t]] += vals[t], accumulating duplicates."""
    np.add.at(out, (rows, cols), vals)


def _softplus_stable(u):
    # log(1 + exp(u)) = max(u, 0) + log1p(exp(-|u|))
    return np.maximum(u, 0.0) + np.log1p(np.exp(-np.abs(u)))


def logistic_value(w, y):
    return float(np.sum(_softplus_stable(-y * w)))


def logistic_grad(w, y):
    z = y * w
    e = np.exp(-np.abs(z))
    sig_neg = np.where(z >= 0, e / (1.0 + e), 1.0 / (1.0 + e))
    return -y * sig_neg


def laplace_value(w, y, b):
    z = y * w
    neg = np.log(2.0) - z / b
    pos = -np.log1p(-0.5 * np.exp(-np.maximum(z, 0.0) / b))
    return float(np.sum(np.where(z < 0, neg, pos)))


def laplace_grad(w, y, b):
    z = y * w
    e = np.exp(-np.maximum(z, 0.0) / b)
    pos = -y * e / (b * (2.0 - e))
    return np.where(z < 0, -y / b, pos)


def quadratic_value(w, target):
    d = w - target
    return float(0.5 * np.dot(d, d))


def quadratic_grad(w, target):
    return w - target
