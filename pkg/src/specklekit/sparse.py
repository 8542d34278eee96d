"""Weighted sparse coding over group-adapted dictionaries.

Each patch group supplies its own dictionary through a thin SVD, so the
atoms form an orthonormal basis ordered by explained energy. Coefficients
are found by minimising

    sum_k || (D a_k - y_k) * w1_k ||^2  +  c * sum_ik w2_i * |a_ik|

where ``w1`` scales each patch column by its estimated noise reliability and
``w2`` penalises atoms that carry little of the group's energy. Because the
atoms are orthonormal the problem separates per coefficient and has an exact
soft-threshold solution; the ADMM solver used in the pipeline is checked
against that closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "Dictionary",
    "Weights",
    "AdmmControls",
    "SolveResult",
    "svd_dictionary",
    "build_weights",
    "unit_weights",
    "soft_threshold",
    "objective",
    "closed_form_solution",
    "solve_weighted_lasso_admm",
    "reconstruct",
]


@dataclass(frozen=True)
class Dictionary:
    """Orthonormal atoms (one per column) with their singular values."""

    atoms: np.ndarray
    singular_values: np.ndarray

    @property
    def rank(self) -> int:
        return self.atoms.shape[1]


@dataclass(frozen=True)
class Weights:
    """Per-column data weights ``w1`` and per-atom penalty weights ``w2``."""

    column: np.ndarray
    atom: np.ndarray


@dataclass(frozen=True)
class AdmmControls:
    rho: float = 1.0
    max_iters: int = 200
    tol_primal: float = 1e-8
    tol_dual: float = 1e-8

    def validate(self) -> None:
        if self.rho <= 0:
            raise DomainError("rho must be positive")
        if self.max_iters < 1:
            raise DomainError("max_iters must be at least 1")
        if self.tol_primal <= 0 or self.tol_dual <= 0:
            raise DomainError("stopping tolerances must be positive")


@dataclass
class SolveResult:
    coeffs: np.ndarray
    iterations: int
    converged: bool
    primal_residual: float
    dual_residual: float
    objective_history: list[float] | None = None


def svd_dictionary(patches: np.ndarray) -> Dictionary:
    """Build a dictionary from the thin SVD of a patch group.

    The returned atoms are the left singular vectors, orthonormal by
    construction, with rank ``min(p * p, k)``. An all-zero group still yields
    an orthonormal basis; its singular values are zero and downstream weights
    fall back to the spectrum floor.
    """
    patches = np.asarray(patches, dtype=np.float64)
    if patches.ndim != 2 or patches.size == 0:
        raise DomainError("patch group must be a non-empty 2-D array")
    atoms, spectrum, _ = np.linalg.svd(patches, full_matrices=False)
    return Dictionary(atoms=atoms, singular_values=spectrum)


def build_weights(
    sigmas: np.ndarray,
    singular_values: np.ndarray,
    s_floor: float = 1e-6,
) -> Weights:
    """Derive both weight vectors from noise levels and the group spectrum.

    Column weights are ``1 / sigma``: noisier patches count less in the fit.
    Atom weights are the reciprocal of the spectrum relative to its leading
    value, floored at ``s_floor``, so weak atoms are penalised harder and a
    vanishing singular value maps to a large, finite weight.
    """
    sigmas = np.asarray(sigmas, dtype=np.float64)
    spectrum = np.asarray(singular_values, dtype=np.float64)
    if s_floor <= 0:
        raise DomainError("s_floor must be positive")
    if np.any(sigmas <= 0):
        raise DomainError("noise levels must be positive")
    if np.any(spectrum < 0):
        raise DomainError("singular values must be non-negative")
    leading = spectrum[0] if spectrum.size and spectrum[0] > 0 else None
    ratios = spectrum / leading if leading else np.zeros_like(spectrum)
    return Weights(column=1.0 / sigmas, atom=1.0 / np.maximum(ratios, s_floor))


def unit_weights(r: int, k: int) -> Weights:
    """Weights that turn the objective into a plain lasso."""
    return Weights(column=np.ones(k), atom=np.ones(r))


def soft_threshold(values, thresholds):
    """Shrink towards zero by ``thresholds``, clamping the dead zone to 0."""
    values = np.asarray(values, dtype=np.float64)
    out = np.sign(values) * np.maximum(np.abs(values) - thresholds, 0.0)
    return float(out) if out.ndim == 0 else out


def objective(
    dictionary: Dictionary,
    patches: np.ndarray,
    weights: Weights,
    c: float,
    coeffs: np.ndarray,
) -> float:
    """Evaluate the weighted fit-plus-penalty objective at ``coeffs``."""
    residual = dictionary.atoms @ coeffs - patches
    fit = float(((residual * residual).sum(axis=0) * weights.column**2).sum())
    penalty = float(c * (weights.atom[:, None] * np.abs(coeffs)).sum())
    return fit + penalty


def _check_problem(dictionary, patches, weights, c):
    patches = np.asarray(patches, dtype=np.float64)
    if patches.shape[0] != dictionary.atoms.shape[0]:
        raise DomainError("patch length does not match the dictionary atoms")
    if weights.column.shape != (patches.shape[1],):
        raise DomainError("need one column weight per patch")
    if weights.atom.shape != (dictionary.rank,):
        raise DomainError("need one atom weight per dictionary atom")
    if c < 0:
        raise DomainError("penalty strength must be non-negative")
    return patches


def closed_form_solution(
    dictionary: Dictionary,
    patches: np.ndarray,
    weights: Weights,
    c: float,
) -> np.ndarray:
    """Exact minimiser: soft-threshold the projections column by column.

    With orthonormal atoms the fit term for column ``k`` equals
    ``w1_k^2 * ||a - D^T y_k||^2`` up to a constant, so each coefficient
    solves an independent scalar problem with threshold
    ``c * w2_i / (2 * w1_k^2)``.
    """
    patches = _check_problem(dictionary, patches, weights, c)
    beta = dictionary.atoms.T @ patches
    thresholds = c * weights.atom[:, None] / (2.0 * weights.column[None, :] ** 2)
    return soft_threshold(beta, thresholds)


def solve_weighted_lasso_admm(
    dictionary: Dictionary,
    patches: np.ndarray,
    weights: Weights,
    c: float,
    controls: AdmmControls | None = None,
    collect_history: bool = False,
) -> SolveResult:
    """Solve the weighted sparse coding problem by scaled-form ADMM.

    The splitting keeps the smooth fit term in one block and the separable
    penalty in the other; both proximal steps are exact, so the iterates
    converge to the closed-form solution. Iteration stops when the primal
    and dual residuals drop below combined absolute and relative tolerances,
    or at ``max_iters`` with ``converged`` set accordingly. The returned
    coefficients come from the penalty block, which preserves exact zeros.
    """
    controls = controls or AdmmControls()
    controls.validate()
    patches = _check_problem(dictionary, patches, weights, c)

    beta = dictionary.atoms.T @ patches
    rho = controls.rho
    quad = 2.0 * weights.column**2
    shrink = c * weights.atom[:, None] / rho
    z = np.zeros_like(beta)
    u = np.zeros_like(beta)

    history: list[float] | None = [] if collect_history else None
    iterations = 0
    converged = False
    primal = dual = float("inf")
    for iterations in range(1, controls.max_iters + 1):
        alpha = (quad[None, :] * beta + rho * (z - u)) / (quad[None, :] + rho)
        z_prev = z
        z = soft_threshold(alpha + u, shrink)
        u = u + alpha - z

        if history is not None:
            history.append(objective(dictionary, patches, weights, c, z))

        primal = float(np.linalg.norm(alpha - z))
        dual = float(rho * np.linalg.norm(z - z_prev))
        eps_primal = controls.tol_primal * max(
            np.linalg.norm(alpha), np.linalg.norm(z), 1.0
        )
        eps_dual = controls.tol_dual * max(rho * np.linalg.norm(u), 1.0)
        if primal <= eps_primal and dual <= eps_dual:
            converged = True
            break

    return SolveResult(
        coeffs=z,
        iterations=iterations,
        converged=converged,
        primal_residual=primal,
        dual_residual=dual,
        objective_history=history,
    )


def reconstruct(dictionary: Dictionary, coeffs: np.ndarray) -> np.ndarray:
    """Map coefficients back to patch space."""
    return dictionary.atoms @ np.asarray(coeffs, dtype=np.float64)
