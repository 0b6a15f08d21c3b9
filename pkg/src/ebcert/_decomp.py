"""Shared machinery for hidden-decomposition SDPs.

Joint measurability of a measurement family and the hidden-state model of an
assemblage are the same feasibility question on different data: find PSD
operators G_lambda, indexed by deterministic response functions
lambda: setting -> outcome, with

    sum_{lambda : lambda(y) = b} G_lambda = T_{b|y}   for every (b, y).

Deterministic responses suffice because a general post-processing is a convex
mixture of deterministic ones, and mixtures can be absorbed into the parent.
Feasibility is decided through the max-slack program

    maximize t   subject to   G_lambda - t*I >= 0  and the equalities,

whose optimum is the feasibility margin (>= 0 iff a decomposition exists).
The slack variable is kept PSD by the substitution t' = t + #settings, which
is a valid lower shift: the equalities always admit a Hermitian solution
whose eigenvalues are bounded below by -(#settings - 1)/#responses.
"""

from __future__ import annotations

import itertools

import numpy as np

from . import sdp
from .qmat import HermOp, ValidationError
from .sdp import SdpConstraint, SdpProblem, SdpStatus

SIZE_GUARD = 4096
FEAS_MARGIN = 1e-7


def assignments(outcome_counts) -> list[tuple[int, ...]]:
    """All deterministic response functions, guarded against blow-up."""
    n = int(np.prod([int(k) for k in outcome_counts]))
    if n > SIZE_GUARD:
        raise ValidationError(
            f"{n} deterministic responses exceed the size guard {SIZE_GUARD}"
        )
    return list(itertools.product(*[range(int(k)) for k in outcome_counts]))


def margin_program(targets, dim: int, outcome_counts):
    """Build the shifted max-slack program; returns (problem, assigns, shift)."""
    assigns = assignments(outcome_counts)
    n_lambda = len(assigns)
    settings = len(outcome_counts)
    shift = float(settings)
    basis = sdp.hermitian_basis(dim)
    t_block = n_lambda
    n_blocks = n_lambda + 1

    constraints = []
    for y in range(settings):
        for b in range(outcome_counts[y]):
            count_by = sum(1 for a in assigns if a[y] == b)
            for h in basis:
                coeffs = [None] * n_blocks
                for lam, a in enumerate(assigns):
                    if a[y] == b:
                        coeffs[lam] = h
                trh = float(np.trace(h).real)
                if trh != 0.0:
                    coeffs[t_block] = np.array([[count_by * trh]])
                rhs = sdp.hs_inner(h, targets[y][b]) + shift * count_by * trh
                constraints.append(SdpConstraint(tuple(coeffs), rhs))

    objective = [None] * n_blocks
    objective[t_block] = np.array([[1.0]])
    problem = SdpProblem(
        block_dims=tuple([dim] * n_lambda + [1]),
        objective=tuple(objective),
        constraints=tuple(constraints),
        maximize=True,
    )
    return problem, assigns, shift


def solve_margin(targets, dim: int, outcome_counts):
    """Feasibility margin of the decomposition; returns (margin, solution, assigns)."""
    problem, assigns, shift = margin_program(targets, dim, outcome_counts)
    sol = sdp.solve(problem)
    if sol.status is not SdpStatus.OPTIMAL:
        raise sdp.SolverError(f"decomposition margin SDP ended with {sol.status.value}")
    return sol.objective - shift, sol, assigns


def objective_or_raise(sol, what: str) -> float:
    """Objective of an exactly or nearly solved program.

    Weight-style programs with singular data have no strictly feasible point,
    so the de-homogenized gap can stall around 1e-6; the best iterate still
    pins the objective to that accuracy, which is accepted here and reported
    as the value.
    """
    if sol.status is SdpStatus.OPTIMAL:
        return sol.objective
    if (
        sol.status is SdpStatus.NUMERICAL_FAILURE
        and sol.primal_residual <= 1e-6
        and sol.dual_residual <= 1e-6
        and sol.rel_gap <= 1e-5
    ):
        return sol.objective
    raise sdp.SolverError(f"{what} SDP ended with {sol.status.value}")


def parents_from_solution(sol, margin: float, n_lambda: int, dim: int):
    """Recover the decomposition operators G_lambda = Y_lambda + margin*I."""
    return tuple(
        HermOp(sol.primal_blocks[lam] + margin * np.eye(dim)) for lam in range(n_lambda)
    )


def dual_operators(sol, dim: int, outcome_counts):
    """Equality multipliers reassembled into Hermitian operators F_{b|y}.

    The margin program is a maximization, so the solver reports multipliers
    in the max-sense convention; the minimization-form derivation behind the
    witness construction needs their negatives.
    """
    basis = sdp.hermitian_basis(dim)
    ops = []
    idx = 0
    for n_b in outcome_counts:
        row = []
        for _b in range(n_b):
            f = np.zeros((dim, dim), dtype=complex)
            for h in basis:
                f -= sol.y[idx] * h
                idx += 1
            row.append(HermOp(f))
        ops.append(tuple(row))
    return tuple(ops)


def deterministic_table(assigns, outcome_counts) -> np.ndarray:
    """p(b | y, lambda) table for the deterministic responses, axis 0 = b."""
    settings = len(outcome_counts)
    n_out = max(outcome_counts)
    table = np.zeros((n_out, settings, len(assigns)))
    for lam, a in enumerate(assigns):
        for y in range(settings):
            table[a[y], y, lam] = 1.0
    return table
