"""Smooth data-fit terms over a sparse set of observed entries.

An :class:`ObservationSet` lists (row, col, sign) triples; indices may repeat
(sampling with replacement) and every occurrence contributes to the loss and
its gradient.  Three losses share one interface:

* ``OneBitLogisticLoss`` -- negative log-likelihood of observed signs under
  ``P(+1) = sigmoid(x)``; gradient Lipschitz constant 1.
* ``OneBitLaplaceLoss`` -- same with the two-sided exponential CDF
  ``phi(x) = 0.5*exp(x/b)`` for x < 0, ``1 - 0.5*exp(-x/b)`` otherwise;
  gradient Lipschitz constant 2/b**2.
* ``MaskedQuadraticLoss`` -- 0.5 * sum of squared deviations from a target
  matrix on the observed entries, mainly for testing; Lipschitz constant is
  the largest multiplicity of any observed index.

All values are finite and nonnegative, and gradients vanish off the observed
index set.  Evaluation goes through either the compiled or the numpy kernel
backend; entries are processed in file order so accumulation is
deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import _kernels


@dataclass
class ObservationSet:
    """Signed entry observations of an n-by-m matrix, duplicates allowed."""

    n: int
    m: int
    rows: np.ndarray
    cols: np.ndarray
    signs: np.ndarray

    def __post_init__(self):
        self.rows = np.ascontiguousarray(self.rows, dtype=np.int64)
        self.cols = np.ascontiguousarray(self.cols, dtype=np.int64)
        self.signs = np.ascontiguousarray(self.signs, dtype=np.float64)
        if not (self.rows.shape == self.cols.shape == self.signs.shape):
            raise ValueError("rows/cols/signs must have equal length")
        if self.rows.size:
            if self.rows.min() < 0 or self.rows.max() >= self.n:
                raise ValueError("row index out of range")
            if self.cols.min() < 0 or self.cols.max() >= self.m:
                raise ValueError("column index out of range")
        if not np.all(np.abs(self.signs) == 1.0):
            raise ValueError("signs must be +1 or -1")

    def __len__(self):
        return self.rows.size

    @property
    def shape(self):
        return self.n, self.m

    def max_multiplicity(self) -> int:
        """Largest number of occurrences of any (row, col) pair."""
        if len(self) == 0:
            return 0
        flat = self.rows * self.m + self.cols
        return int(np.bincount(np.unique(flat, return_inverse=True)[1]).max())

    def sign_matrix(self) -> np.ndarray:
        """Dense matrix with the observed sign at each sampled entry (last
        duplicate wins) and zeros elsewhere."""
        Y = np.zeros((self.n, self.m))
        Y[self.rows, self.cols] = self.signs
        return Y

    def save(self, path) -> None:
        """Text format: header lines ``n m`` and ``N``, then ``i j y`` rows."""
        with open(path, "w", encoding="ascii") as fh:
            fh.write(f"{self.n} {self.m}\n{len(self)}\n")
            for i, j, y in zip(self.rows, self.cols, self.signs):
                fh.write(f"{i} {j} {int(y)}\n")

    @classmethod
    def load(cls, path) -> "ObservationSet":
        with open(path, "r", encoding="ascii") as fh:
            n, m = map(int, fh.readline().split())
            count = int(fh.readline())
            if count == 0:
                return cls(n, m, np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0))
            data = np.loadtxt(fh, dtype=np.int64, ndmin=2)
        if data.shape != (count, 3):
            raise ValueError(f"expected {count} observation rows, found {data.shape}")
        return cls(n, m, data[:, 0], data[:, 1], data[:, 2].astype(np.float64))


def phi_cdf(kind: str, x, b: float = 2.0):
    """Noise CDF evaluated elementwise: ``"logistic"`` or ``"laplace"``."""
    x = np.asarray(x, dtype=float)
    if kind == "logistic":
        e = np.exp(-np.abs(x))
        out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    elif kind == "laplace":
        if not b > 0:
            raise ValueError("laplace scale b must be positive")
        out = np.where(x < 0, 0.5 * np.exp(np.minimum(x, 0.0) / b),
                       1.0 - 0.5 * np.exp(-np.maximum(x, 0.0) / b))
    else:
        raise ValueError(f"unknown noise kind {kind!r}")
    return float(out) if out.ndim == 0 else out


class _EntrywiseLoss:
    """Shared plumbing: gather products, per-entry terms, scatter gradient."""

    def __init__(self, obs: ObservationSet):
        self.obs = obs

    @property
    def shape(self):
        return self.obs.shape

    # subclasses: value_at_entries(w) -> float, grad_at_entries(w) -> array

    def products(self, U: np.ndarray, V: np.ndarray) -> np.ndarray:
        """Observed entries of U @ V.T without forming the product."""
        return _kernels.pair_dot(
            np.ascontiguousarray(U), np.ascontiguousarray(V), self.obs.rows, self.obs.cols
        )

    def value(self, X: np.ndarray) -> float:
        return self.value_at_entries(np.ascontiguousarray(X[self.obs.rows, self.obs.cols]))

    def gradient(self, X: np.ndarray) -> np.ndarray:
        g = self.grad_at_entries(np.ascontiguousarray(X[self.obs.rows, self.obs.cols]))
        out = np.zeros(self.obs.shape)
        _kernels.scatter_add(out, self.obs.rows, self.obs.cols, g)
        return out

    def gradient_sparse(self, w: np.ndarray) -> sp.csr_matrix:
        """Gradient as a CSR matrix given the observed products w."""
        g = self.grad_at_entries(np.ascontiguousarray(w))
        mat = sp.coo_matrix((g, (self.obs.rows, self.obs.cols)), shape=self.obs.shape)
        return mat.tocsr()


class OneBitLogisticLoss(_EntrywiseLoss):
    kind = "logistic"

    def value_at_entries(self, w):
        return _kernels.logistic_value(w, self.obs.signs)

    def grad_at_entries(self, w):
        return _kernels.logistic_grad(w, self.obs.signs)

    @property
    def lipschitz(self) -> float:
        return 1.0


class OneBitLaplaceLoss(_EntrywiseLoss):
    kind = "laplace"

    def __init__(self, obs: ObservationSet, b: float = 2.0):
        if not b > 0:
            raise ValueError("laplace scale b must be positive")
        super().__init__(obs)
        self.b = float(b)

    def value_at_entries(self, w):
        return _kernels.laplace_value(w, self.obs.signs, self.b)

    def grad_at_entries(self, w):
        return _kernels.laplace_grad(w, self.obs.signs, self.b)

    @property
    def lipschitz(self) -> float:
        return 2.0 / self.b ** 2


class MaskedQuadraticLoss(_EntrywiseLoss):
    kind = "quadratic"

    def __init__(self, obs: ObservationSet, target: np.ndarray):
        super().__init__(obs)
        target = np.asarray(target, dtype=float)
        if target.shape != obs.shape:
            raise ValueError("target shape must match the observation grid")
        self.target = target
        self._target_entries = np.ascontiguousarray(target[obs.rows, obs.cols])
        self._lipschitz = float(max(obs.max_multiplicity(), 1))

    def value_at_entries(self, w):
        return _kernels.quadratic_value(w, self._target_entries)

    def grad_at_entries(self, w):
        return _kernels.quadratic_grad(w, self._target_entries)

    @property
    def lipschitz(self) -> float:
        return self._lipschitz


def make_loss(kind: str, obs: ObservationSet, b: float = 2.0, target=None):
    """Construct a loss by name: logistic, laplace or quadratic."""
    if kind == "logistic":
        return OneBitLogisticLoss(obs)
    if kind == "laplace":
        return OneBitLaplaceLoss(obs, b=b)
    if kind == "quadratic":
        if target is None:
            raise ValueError("quadratic loss needs a target matrix")
        return MaskedQuadraticLoss(obs, target)
    raise ValueError(f"unknown loss kind {kind!r}")
