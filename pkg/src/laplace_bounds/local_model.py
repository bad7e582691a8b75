"""Local data of an exponent function at its minimizer.

Holds the Hessian, the third-derivative tensor and the remainder/convexity
parameters that every bound constant is computed from, together with the
small dense linear algebra those constants need.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SYM_TOL = 1e-10


class NotPositiveDefinite(ValueError):
    """Raised when a matrix used as a Hessian has a nonpositive pivot."""


def as_sym_matrix(H, tol: float = SYM_TOL) -> np.ndarray:
    """Validate a square symmetric matrix and return it as a float array."""
    H = np.array(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {H.shape}")
    scale = max(float(np.max(np.abs(H))), 1.0)
    if np.max(np.abs(H - H.T)) > tol * scale:
        raise ValueError("matrix is not symmetric")
    return 0.5 * (H + H.T)


def symmetrize_tensor(T) -> np.ndarray:
    """Average a d x d x d array over all index permutations."""
    T = np.asarray(T, dtype=float)
    perms = list(itertools.permutations(range(3)))
    return sum(np.transpose(T, p) for p in perms) / len(perms)


def as_third_tensor(T, tol: float = SYM_TOL) -> np.ndarray:
    """Validate a fully symmetric third-order tensor.

    Inputs whose asymmetry exceeds ``tol`` relative to the largest entry are
    rejected; smaller asymmetry is averaged away.
    """
    T = np.array(T, dtype=float)
    if T.ndim != 3 or len(set(T.shape)) != 1:
        raise ValueError(f"expected a d x d x d array, got shape {T.shape}")
    S = symmetrize_tensor(T)
    scale = max(float(np.max(np.abs(T))), 1.0)
    if np.max(np.abs(S - T)) > tol * scale:
        raise ValueError("third-derivative tensor is not symmetric")
    return S


def cholesky_upper(H) -> np.ndarray:
    """Upper-triangular U with positive diagonal such that U'U = H."""
    H = as_sym_matrix(H)
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    return L.T.copy()


def min_eigenvalue(H) -> float:
    return float(np.linalg.eigvalsh(as_sym_matrix(H))[0])


def determinant(H) -> float:
    U = cholesky_upper(H)
    return float(np.prod(np.diag(U) ** 2))


def d3f_eval(T3, t) -> float | np.ndarray:
    """Triple contraction sum_ijk T[i,j,k] t_i t_j t_k.

    ``t`` may carry leading batch dimensions; the last axis is the
    coordinate axis.
    """
    T3 = np.asarray(T3, dtype=float)
    t = np.asarray(t, dtype=float)
    if t.shape[-1] != T3.shape[0]:
        raise ValueError(f"dimension mismatch: tensor d={T3.shape[0]}, point d={t.shape[-1]}")
    out = np.einsum("ijk,...i,...j,...k->...", T3, t, t, t)
    return float(out) if out.ndim == 0 else out


def D_constant(T3) -> float:
    """(d^{3/2}/6) times the largest absolute third partial derivative."""
    T3 = np.asarray(T3, dtype=float)
    d = T3.shape[0]
    return d**1.5 / 6.0 * float(np.max(np.abs(T3)))


@dataclass(frozen=True)
class LocalExpansion:
    """Local data of f at its minimizer 0 (with f(0) = 0).

    H, T3   -- Hessian and third-derivative tensor at 0
    C, alpha, r -- remainder bound |f - t'Ht/2 - d3f/6| <= C |t|^(2+alpha) on B_r
    delta, Delta -- f convex on B_delta and f >= Delta outside B_min(delta, r)
    n1, I_n1 -- a parameter where the integral is finite, with its value
                (or an upper bound of it)
    """

    H: np.ndarray
    T3: np.ndarray
    C: float
    alpha: float
    r: float
    delta: float
    Delta: float
    n1: float
    I_n1: float

    def __post_init__(self):
        H = as_sym_matrix(self.H)
        T3 = as_third_tensor(self.T3)
        if H.shape[0] < 2:
            raise ValueError("dimension must be at least 2")
        if T3.shape[0] != H.shape[0]:
            raise ValueError("Hessian and third-derivative tensor dimensions differ")
        cholesky_upper(H)
        if not 1.0 < self.alpha <= 2.0:
            raise ValueError(f"alpha must lie in (1, 2], got {self.alpha}")
        for name in ("C", "r", "delta", "Delta", "n1", "I_n1"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value}")
        H.setflags(write=False)
        T3.setflags(write=False)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "T3", T3)

    @property
    def d(self) -> int:
        return self.H.shape[0]

    @property
    def lambda_min(self) -> float:
        return min_eigenvalue(self.H)

    @property
    def det_H(self) -> float:
        return determinant(self.H)

    @property
    def D(self) -> float:
        return D_constant(self.T3)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "hessian": self.H.ravel().tolist(),
            "third_tensor": self.T3.ravel().tolist(),
            "C": self.C,
            "alpha": self.alpha,
            "r": self.r,
            "delta": self.delta,
            "Delta": self.Delta,
            "n1": self.n1,
            "I_n1": self.I_n1,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LocalExpansion":
        d = int(data["d"])
        H = np.asarray(data["hessian"], dtype=float).reshape(d, d)
        T3 = np.asarray(data["third_tensor"], dtype=float).reshape(d, d, d)
        return cls(
            H=H,
            T3=T3,
            **{k: float(data[k]) for k in ("C", "alpha", "r", "delta", "Delta", "n1", "I_n1")},
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "LocalExpansion":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "LocalExpansion":
        return cls.from_json(Path(path).read_text())
