"""Plant and cost data for the two-player leader-follower game.

Player 1 is the follower (input ``u1``, output ``y1 = H1 x``), player 2 the
leader (input ``u2``, output ``y2 = H2 x``). Dynamics::

    x(k+1) = A x(k) + B1 u1(k) + B2 u2(k)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, ValidationError
from .linalg import as_matrix, is_positive_definite, is_symmetric, min_eig


@dataclass(frozen=True)
class SystemModel:
    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    H1: np.ndarray
    H2: np.ndarray

    def __post_init__(self):
        for name in ("A", "B1", "B2", "H1", "H2"):
            object.__setattr__(self, name, as_matrix(getattr(self, name), name))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise DimensionMismatch(f"A must be square, got {self.A.shape}")
        for name in ("B1", "B2"):
            if getattr(self, name).shape[0] != n:
                raise DimensionMismatch(f"{name} must have {n} rows, got {getattr(self, name).shape}")
        for name in ("H1", "H2"):
            if getattr(self, name).shape[1] != n:
                raise DimensionMismatch(f"{name} must have {n} columns, got {getattr(self, name).shape}")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m1(self) -> int:
        return self.B1.shape[1]

    @property
    def m2(self) -> int:
        return self.B2.shape[1]

    @property
    def s1(self) -> int:
        return self.H1.shape[0]

    @property
    def s2(self) -> int:
        return self.H2.shape[0]

    def with_stacked_leader_output(self) -> "SystemModel":
        """Copy in which the leader's observer also consumes ``y1``.

        The leader's information set contains the follower's measurements, so
        a leader observer driven by ``[y1; y2]`` is admissible. This is an
        extension; the default leader observer uses ``y2`` alone.
        """
        return SystemModel(self.A, self.B1, self.B2, self.H1, np.vstack([self.H1, self.H2]))


@dataclass(frozen=True)
class CostWeights:
    """Quadratic stage weights.

    Follower stage cost ``x'Q1x + u1'R11u1 + u2'R12u2``; leader stage cost
    ``x'Q2x + u1'R21u1 + u2'R22u2``.
    """

    Q1: np.ndarray
    Q2: np.ndarray
    R11: np.ndarray
    R12: np.ndarray
    R21: np.ndarray
    R22: np.ndarray
    psd_tol: float = field(default=1e-12, compare=False)

    def __post_init__(self):
        for name in ("Q1", "Q2", "R11", "R12", "R21", "R22"):
            object.__setattr__(self, name, as_matrix(getattr(self, name), name))

    def validate(self, model: SystemModel) -> "CostWeights":
        """Check shapes against ``model`` and the definiteness requirements.

        Raises :class:`ValidationError` naming the offending weight.
        """
        expected = {
            "Q1": (model.n, model.n), "Q2": (model.n, model.n),
            "R11": (model.m1, model.m1), "R12": (model.m2, model.m2),
            "R21": (model.m1, model.m1), "R22": (model.m2, model.m2),
        }
        for name, shape in expected.items():
            M = getattr(self, name)
            if M.shape != shape:
                raise ValidationError(name, f"expected shape {shape}, got {M.shape}")
            if not is_symmetric(M):
                raise ValidationError(name, "not symmetric")
        for name in ("Q1", "Q2", "R12", "R21"):
            M = getattr(self, name)
            scale = max(1.0, float(np.max(np.abs(M))))
            if min_eig(M) < -self.psd_tol * scale:
                raise ValidationError(name, "not positive semidefinite")
        for name in ("R11", "R22"):
            if not is_positive_definite(getattr(self, name)):
                raise ValidationError(name, "not positive definite")
        return self

    def scaled(self, follower: float = 1.0, leader: float = 1.0) -> "CostWeights":
        """Weights with the follower's and leader's cost scaled independently."""
        return CostWeights(
            follower * self.Q1, leader * self.Q2,
            follower * self.R11, follower * self.R12,
            leader * self.R21, leader * self.R22,
        )
