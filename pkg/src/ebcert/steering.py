"""Assemblage-level detection: local-hidden-state feasibility, steerable
weight, linear steering inequalities, and the best local CHSH response.

An assemblage collects the sub-normalized states steered on the trusted side,
one per (outcome, setting).  No-signalling (setting-independent marginal) is
enforced at validation so malformed inputs are rejected early.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _decomp, sdp
from ._decomp import FEAS_MARGIN
from .qmat import HermOp, ValidationError, trace_norm
from .sdp import SdpConstraint, SdpProblem, SdpStatus


@dataclass(frozen=True)
class Assemblage:
    """Sub-normalized steered states, members[y][b]; marginal trace 1."""

    members: tuple[tuple[HermOp, ...], ...]

    def __post_init__(self) -> None:
        members = tuple(tuple(row) for row in self.members)
        if not members or any(not row for row in members):
            raise ValidationError("assemblage needs at least one setting and outcome")
        d = members[0][0].dim
        marginal = None
        for row in members:
            total = np.zeros((d, d), dtype=complex)
            for s in row:
                if s.dim != d:
                    raise ValidationError("assemblage members have mismatched dimensions")
                if not s.is_psd():
                    raise ValidationError("assemblage member has eigenvalue below -1e-9")
                total = total + s.mat
            if marginal is None:
                marginal = total
            elif np.max(np.abs(total - marginal)) > 1e-9:
                raise ValidationError("assemblage marginal depends on the setting (signalling)")
        if abs(float(np.trace(marginal).real) - 1.0) > 1e-9:
            raise ValidationError("assemblage marginal does not have unit trace")
        object.__setattr__(self, "members", members)

    @property
    def dim(self) -> int:
        return self.members[0][0].dim

    @property
    def settings(self) -> int:
        return len(self.members)

    @property
    def outcome_counts(self) -> tuple[int, ...]:
        return tuple(len(row) for row in self.members)

    def marginal(self) -> HermOp:
        total = np.zeros((self.dim, self.dim), dtype=complex)
        for s in self.members[0]:
            total = total + s.mat
        return HermOp(total)


@dataclass(frozen=True)
class LhsCertificate:
    """Hidden states indexed by deterministic response functions."""

    hidden_states: tuple[HermOp, ...]
    assignments: tuple[tuple[int, ...], ...]

    def reproduces(self, a: Assemblage, tol: float = 1e-7) -> bool:
        for y in range(a.settings):
            for b in range(len(a.members[y])):
                acc = np.zeros((a.dim, a.dim), dtype=complex)
                for lam, assign in enumerate(self.assignments):
                    if assign[y] == b:
                        acc += self.hidden_states[lam].mat
                if np.max(np.abs(acc - a.members[y][b].mat)) > tol:
                    return False
        return True


@dataclass(frozen=True)
class SteeringWitness:
    """Linear functional sum tr(F_{b|y} sigma_{b|y}) with unsteerable bound 1."""

    operators: tuple[tuple[HermOp, ...], ...]
    bound: float


def lhs_margin(a: Assemblage) -> float:
    """Feasibility slack of the hidden-state decomposition (>= 0: unsteerable)."""
    targets = [[s.mat for s in row] for row in a.members]
    margin, _sol, _assigns = _decomp.solve_margin(targets, a.dim, a.outcome_counts)
    return margin


def _normalize_steering_witness(ops, outcome_counts, dim) -> SteeringWitness:
    """Shift by the identity so the unsteerable bound is exactly 1.

    The bound over hidden-state models is max_lambda lambda_max of the
    response-summed operators; adding c*I to every F adds c*#settings to the
    value of any unit-trace-marginal assemblage, steerable or not.
    """
    settings = len(outcome_counts)
    best = -np.inf
    for a in _decomp.assignments(outcome_counts):
        m = np.zeros((dim, dim), dtype=complex)
        for y in range(settings):
            m += ops[y][a[y]].mat
        best = max(best, float(np.linalg.eigvalsh(m)[-1]))
    c = (1.0 - best) / settings
    shifted = tuple(tuple(HermOp(f.mat + c * np.eye(dim)) for f in row) for row in ops)
    return SteeringWitness(operators=shifted, bound=1.0)


def is_unsteerable(a: Assemblage):
    """LHS feasibility; returns (True, certificate) or (False, violated witness)."""
    targets = [[s.mat for s in row] for row in a.members]
    margin, sol, assigns = _decomp.solve_margin(targets, a.dim, a.outcome_counts)
    if margin >= -FEAS_MARGIN:
        hidden = _decomp.parents_from_solution(sol, margin, len(assigns), a.dim)
        return True, LhsCertificate(hidden, tuple(assigns))
    ops = _decomp.dual_operators(sol, a.dim, a.outcome_counts)
    return False, _normalize_steering_witness(ops, a.outcome_counts, a.dim)


def steerable_weight(a: Assemblage) -> float:
    """Smallest nu with a = nu*(generic) + (1-nu)*(unsteerable), marginals matched.

    Solved as max mu over sub-normalized hidden states sigma~_lambda >= 0 with
    response sums below the assemblage members and total sum mu * marginal;
    the weight is 1 - mu*.
    """
    assigns = _decomp.assignments(a.outcome_counts)
    n_lambda = len(assigns)
    settings = a.settings
    dim = a.dim
    basis = sdp.hermitian_basis(dim)
    marginal = a.marginal().mat

    pair_index = {}
    pairs = []
    for y in range(settings):
        for b in range(a.outcome_counts[y]):
            pair_index[(y, b)] = n_lambda + len(pairs)
            pairs.append((y, b))
    mu_block = n_lambda + len(pairs)
    n_blocks = mu_block + 1
    dims = [dim] * (n_lambda + len(pairs)) + [1]

    constraints = []
    for (y, b) in pairs:
        for h in basis:
            coeffs = [None] * n_blocks
            for lam, assign in enumerate(assigns):
                if assign[y] == b:
                    coeffs[lam] = h
            coeffs[pair_index[(y, b)]] = h
            constraints.append(
                SdpConstraint(tuple(coeffs), sdp.hs_inner(h, a.members[y][b].mat))
            )
    for h in basis:
        coeffs = [h] * n_lambda + [None] * len(pairs)
        coeffs.append(np.array([[-sdp.hs_inner(h, marginal)]]))
        constraints.append(SdpConstraint(tuple(coeffs), 0.0))

    objective = [None] * n_blocks
    objective[mu_block] = np.array([[1.0]])
    problem = SdpProblem(tuple(dims), tuple(objective), tuple(constraints), maximize=True)
    sol = sdp.solve(problem)
    mu = _decomp.objective_or_raise(sol, "steerable-weight")
    return float(min(1.0, max(0.0, 1.0 - mu)))


def chsh_best_response(a: Assemblage) -> float:
    """Best CHSH value achievable against the assemblage with local observables.

    Convention A1(B1+B2) + A2(B1-B2) with outcomes (-1)^(b+1) for b in {1, 2};
    the optimum over -I <= A_x <= I is attained at sign operators, giving
    ||s1+s2||_1 + ||s1-s2||_1 for the outcome differences
    s_y = sigma_{1|y} - sigma_{2|y}.
    """
    if a.settings != 2 or a.outcome_counts != (2, 2):
        raise ValidationError("CHSH response needs 2 settings with 2 outcomes each")
    s1 = a.members[0][0] - a.members[0][1]
    s2 = a.members[1][0] - a.members[1][1]
    return trace_norm(s1 + s2) + trace_norm(s1 - s2)


def steering_inequality_value(a: Assemblage, witness, bound: float):
    """Linear functional value and whether it exceeds the unsteerable bound."""
    ops = witness.operators if isinstance(witness, SteeringWitness) else witness
    if len(ops) != a.settings:
        raise ValidationError("witness settings do not match the assemblage")
    value = 0.0
    for y in range(a.settings):
        if len(ops[y]) != a.outcome_counts[y]:
            raise ValidationError("witness outcomes do not match the assemblage")
        for b in range(a.outcome_counts[y]):
            f = ops[y][b]
            fmat = f.mat if isinstance(f, HermOp) else np.asarray(f)
            value += sdp.hs_inner(fmat, a.members[y][b].mat)
    return value, value > bound + FEAS_MARGIN
