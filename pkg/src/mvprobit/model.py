"""Data container for a multivariate probit problem."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import combinations

import numpy as np

from .exceptions import InputError
from .options import SolverOptions

__all__ = ["MvpModel", "component_pairs"]


def component_pairs(n_components):
    """Lexicographic list of pairs ``(j, k)`` with ``j < k``."""
    return list(combinations(range(n_components), 2))


@dataclass(frozen=True)
class MvpModel:
    """Design, responses, composite-likelihood weights and solver options.

    Two layouts are supported:

    * separate coefficients: ``X`` has shape (N, P) and is shared by all K
      components, each with its own coefficient column;
    * shared coefficients: ``designs`` has shape (K, N, Q) and every
      component uses the same Q coefficients with its own design rows.
      ``X`` is then ``None``.

    Stage-1 parameters are ordered component by component (column-major
    ``vec(B)``) in the separate layout, and are the Q shared coefficients
    otherwise. Stage-2 parameters follow :func:`component_pairs`.
    """

    Y: np.ndarray
    X: np.ndarray | None = None
    designs: np.ndarray | None = None
    component_weights: np.ndarray | None = None
    pair_weights: np.ndarray | None = None
    options: SolverOptions = field(default_factory=SolverOptions)
    feature_names: tuple | None = None
    component_names: tuple | None = None

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        if Y.ndim != 2:
            raise InputError(f"Y must be 2-D (N, K), got shape {Y.shape}")
        bad = ~np.isin(Y, (0.0, 1.0))
        if bad.any():
            i, k = np.argwhere(bad)[0]
            raise InputError(f"response entries must be 0 or 1; found {Y[i, k]!r} at row {i}, column {k}")
        n, K = Y.shape
        if (self.X is None) == (self.designs is None):
            raise InputError("exactly one of X or designs must be given")
        if self.X is not None:
            X = np.asarray(self.X, dtype=float)
            if X.ndim != 2 or X.shape[0] != n:
                raise InputError(f"X must have shape ({n}, P), got {X.shape}")
            if not np.all(np.isfinite(X)):
                raise InputError("X contains missing or non-finite values")
            object.__setattr__(self, "X", X)
            n_feat = X.shape[1]
        else:
            D = np.asarray(self.designs, dtype=float)
            if D.ndim != 3 or D.shape[0] != K or D.shape[1] != n:
                raise InputError(f"designs must have shape ({K}, {n}, Q), got {D.shape}")
            if not np.all(np.isfinite(D)):
                raise InputError("designs contain missing or non-finite values")
            object.__setattr__(self, "designs", D)
            n_feat = D.shape[2]
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "component_weights", self._weights(self.component_weights, K, "component"))
        object.__setattr__(self, "pair_weights", self._weights(self.pair_weights, K * (K - 1) // 2, "pair"))
        if self.feature_names is None:
            object.__setattr__(self, "feature_names", tuple(f"x{p}" for p in range(n_feat)))
        elif len(self.feature_names) != n_feat:
            raise InputError("feature_names length does not match the number of predictors")
        if self.component_names is None:
            object.__setattr__(self, "component_names", tuple(f"y{k}" for k in range(K)))
        elif len(self.component_names) != K:
            raise InputError("component_names length does not match the number of components")

    @staticmethod
    def _weights(w, size, what):
        if w is None:
            return np.ones(size)
        w = np.asarray(w, dtype=float).reshape(-1)
        if w.shape != (size,) or np.any(~(w > 0)) or not np.all(np.isfinite(w)):
            raise InputError(f"{what} weights must be {size} positive finite numbers")
        return w

    @classmethod
    def from_shared(cls, designs, Y, **kwargs):
        return cls(Y=Y, designs=designs, **kwargs)

    @property
    def n_obs(self):
        return self.Y.shape[0]

    @property
    def n_components(self):
        return self.Y.shape[1]

    @property
    def n_features(self):
        return self.X.shape[1] if self.X is not None else self.designs.shape[2]

    @property
    def shared(self):
        return self.designs is not None

    @property
    def pairs(self):
        return component_pairs(self.n_components)

    @property
    def n_stage1_params(self):
        return self.n_features if self.shared else self.n_features * self.n_components

    def design(self, k):
        """Design matrix (N, P) used by component ``k``."""
        return self.designs[k] if self.shared else self.X

    def coef_index(self, k):
        """Positions of component ``k``'s coefficients in the stage-1 vector."""
        p = self.n_features
        return np.arange(p) if self.shared else np.arange(k * p, (k + 1) * p)

    def coef_matrix(self, theta1):
        """P x K coefficient matrix from the stage-1 parameter vector."""
        theta1 = np.asarray(theta1, dtype=float)
        return np.column_stack([theta1[self.coef_index(k)] for k in range(self.n_components)])

    def theta1_from_matrix(self, B):
        B = np.asarray(B, dtype=float)
        if self.shared:
            return B[:, 0].copy()
        return B.T.reshape(-1).copy()

    def linear_predictors(self, B):
        """N x K matrix of ``x_ik beta_k`` for a P x K coefficient matrix."""
        B = np.asarray(B, dtype=float)
        if B.shape != (self.n_features, self.n_components):
            raise ValueError(f"B must have shape ({self.n_features}, {self.n_components}), got {B.shape}")
        if self.shared:
            return np.einsum("knp,pk->nk", self.designs, B)
        return self.X @ B

    def subset_rows(self, rows):
        """Copy of the model restricted to (possibly repeated) row indices."""
        rows = np.asarray(rows)
        if self.shared:
            return replace(self, Y=self.Y[rows], designs=self.designs[:, rows, :])
        return replace(self, Y=self.Y[rows], X=self.X[rows])
