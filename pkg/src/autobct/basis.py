"""Normalized control space and centered polynomial basis tables.

Controls live on the unit cube [0, 1]^p.  Score and cost surfaces are linear
combinations of centered monomials: term j evaluates to
prod_i (u_i - 0.5)**e[j][i] for a fixed table of non-negative integer
exponents, so a basis is fully described by its exponent tuples and can be
embedded verbatim in config and map files.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

CENTER = 0.5


def as_control_point(u, dim: int) -> np.ndarray:
    """Validate and return a control point as a float vector of length ``dim``."""
    arr = np.atleast_1d(np.asarray(u, dtype=float))
    if arr.ndim != 1 or arr.size != dim:
        raise InvalidArgumentError(f"control point has shape {arr.shape}, expected ({dim},)")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("control point has non-finite coordinates")
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise InvalidArgumentError(f"control point {arr.tolist()} leaves [0, 1]^{dim}")
    return arr


def _check_terms(terms, dim: int, label: str) -> tuple[tuple[int, ...], ...]:
    out = []
    for term in terms:
        tup = tuple(int(e) for e in term)
        if len(tup) != dim:
            raise InvalidArgumentError(f"{label} term {term!r} has {len(tup)} exponents, expected {dim}")
        if any(e < 0 for e in tup):
            raise InvalidArgumentError(f"{label} term {term!r} has a negative exponent")
        out.append(tup)
    if not out:
        raise InvalidArgumentError(f"{label} basis must have at least one term")
    return tuple(out)


@dataclass(frozen=True)
class BasisSet:
    """Monomial exponent tables for the score (phi) and cost (psi) families.

    Term order is fixed at construction; coefficient index j always refers to
    the same monomial.
    """

    dim_control: int
    score_terms: tuple[tuple[int, ...], ...]
    cost_terms: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if self.dim_control < 1:
            raise InvalidArgumentError("dim_control must be >= 1")
        object.__setattr__(self, "score_terms", _check_terms(self.score_terms, self.dim_control, "score"))
        object.__setattr__(self, "cost_terms", _check_terms(self.cost_terms, self.dim_control, "cost"))
        object.__setattr__(self, "_score_exp", np.array(self.score_terms, dtype=np.int64))
        object.__setattr__(self, "_cost_exp", np.array(self.cost_terms, dtype=np.int64))

    @property
    def n_score(self) -> int:
        return len(self.score_terms)

    @property
    def n_cost(self) -> int:
        return len(self.cost_terms)

    def describe(self) -> dict:
        """JSON-ready description, embedded in config and value-map files."""
        return {
            "dim_control": self.dim_control,
            "score_terms": [list(t) for t in self.score_terms],
            "cost_terms": [list(t) for t in self.cost_terms],
        }

    @classmethod
    def from_description(cls, desc: dict) -> "BasisSet":
        return cls(
            dim_control=int(desc["dim_control"]),
            score_terms=tuple(tuple(t) for t in desc["score_terms"]),
            cost_terms=tuple(tuple(t) for t in desc["cost_terms"]),
        )


def _eval_terms(exponents: np.ndarray, u: np.ndarray) -> np.ndarray:
    d = u - CENTER
    return np.prod(d[None, :] ** exponents, axis=1)


def eval_phi(basis: BasisSet, u) -> np.ndarray:
    """Evaluate the score basis vector phi(u)."""
    point = as_control_point(u, basis.dim_control)
    return _eval_terms(basis._score_exp, point)


def eval_psi(basis: BasisSet, u) -> np.ndarray:
    """Evaluate the cost basis vector psi(u)."""
    point = as_control_point(u, basis.dim_control)
    return _eval_terms(basis._cost_exp, point)


def default_basis_1d() -> BasisSet:
    """Degree-3 centered polynomial for both score and cost (1 control)."""
    terms = ((0,), (1,), (2,), (3,))
    return BasisSet(dim_control=1, score_terms=terms, cost_terms=terms)


def default_basis_2d() -> BasisSet:
    """The 10-term family used for two controls.

    Powers 0..4 of the first coordinate, powers 1..4 of the second, and the
    bilinear cross term, all centered at 0.5.
    """
    terms = tuple((k, 0) for k in range(5)) + tuple((0, k) for k in range(1, 5)) + ((1, 1),)
    return BasisSet(dim_control=2, score_terms=terms, cost_terms=terms)


def default_basis(dim_control: int) -> BasisSet:
    if dim_control == 1:
        return default_basis_1d()
    if dim_control == 2:
        return default_basis_2d()
    raise InvalidArgumentError(f"no default basis for {dim_control} controls; supply exponent tables")
