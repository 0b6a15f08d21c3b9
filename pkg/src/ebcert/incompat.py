"""Joint-measurability decisions, the incompatible-weight monotone, linear
incompatibility inequalities, compatibility structures, and convertibility
under compatibility non-decreasing operations (CNDO).

A family is jointly measurable when a single parent POVM plus classical
post-processing reproduces every member.  Rescaling by the dimension maps the
question onto hidden-state models for assemblages, which is why the two
modules share their feasibility core.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import _decomp, sdp
from ._decomp import FEAS_MARGIN
from .qmat import (
    ConditionalDistribution,
    HermOp,
    MeasurementFamily,
    Povm,
    ValidationError,
    bloch_of_effect,
    identity,
    partial_trace,
)
from .sdp import SdpConstraint, SdpProblem, SdpStatus
from .steering import Assemblage

STRUCTURE_GUARD = 5


@dataclass(frozen=True)
class JmCertificate:
    """Parent POVM indexed by deterministic response functions."""

    parent: Povm
    post_processing: ConditionalDistribution
    assignments: tuple[tuple[int, ...], ...]

    def reproduces(self, fam: MeasurementFamily, tol: float = 1e-7) -> bool:
        for y in range(fam.settings):
            for b in range(fam.outcome_counts[y]):
                acc = np.zeros((fam.dim, fam.dim), dtype=complex)
                for lam, assign in enumerate(self.assignments):
                    if assign[y] == b:
                        acc += self.parent.effects[lam].mat
                if np.max(np.abs(acc - fam.effect(b, y).mat)) > tol:
                    return False
        return True


@dataclass(frozen=True)
class JmWitness:
    """Linear functional sum tr(F_{b|y} E_{b|y}) with jointly-measurable bound 1."""

    operators: tuple[tuple[HermOp, ...], ...]
    bound: float


@dataclass(frozen=True)
class CndoSpec:
    """Fixed instrument plus classical pre- and post-processing.

    The instrument is a list of completely positive maps stored as Choi
    blocks on input x output; their sum must be trace-preserving.
    ``setting_choice`` is p(y | a, y') with axes (y, a, y') and
    ``outcome_relabel`` is p(b' | b, a, y', y) with axes (b', b, a, y', y).
    """

    dim_in: int
    dim_out: int
    instrument: tuple[HermOp, ...]
    setting_choice: ConditionalDistribution
    outcome_relabel: ConditionalDistribution

    def __post_init__(self) -> None:
        blocks = tuple(self.instrument)
        if not blocks:
            raise ValidationError("instrument needs at least one branch")
        d_in, d_out = int(self.dim_in), int(self.dim_out)
        total_in = np.zeros((d_in, d_in), dtype=complex)
        for j in blocks:
            if j.dim != d_in * d_out:
                raise ValidationError("instrument Choi block has wrong dimension")
            if not j.is_psd():
                raise ValidationError("instrument branch is not completely positive")
            total_in = total_in + partial_trace(j, (d_in, d_out), "A").mat
        if np.max(np.abs(total_in - np.eye(d_in))) > 1e-9:
            raise ValidationError("instrument branches do not sum to a trace-preserving map")
        if self.setting_choice.table.ndim != 3:
            raise ValidationError("setting choice table needs axes (y, a, y')")
        if self.outcome_relabel.table.ndim != 5:
            raise ValidationError("outcome relabel table needs axes (b', b, a, y', y)")
        object.__setattr__(self, "instrument", blocks)
        object.__setattr__(self, "dim_in", d_in)
        object.__setattr__(self, "dim_out", d_out)


# ---------------------------------------------------------------------------
# Joint measurability


def jm_margin(fam: MeasurementFamily) -> float:
    """Feasibility slack of the parent decomposition (>= 0 means compatible)."""
    targets = [[e.mat for e in p.effects] for p in fam.povms]
    margin, _sol, _assigns = _decomp.solve_margin(targets, fam.dim, fam.outcome_counts)
    return margin


def jm_witness_bound(operators, dim: int) -> float:
    """Largest functional value over all jointly measurable families.

    Maximizes sum_lambda <M_lambda, G_lambda> over parent POVMs, where
    M_lambda sums the witness operators along a deterministic response.
    """
    counts = tuple(len(row) for row in operators)
    assigns = _decomp.assignments(counts)
    ml = []
    for a in assigns:
        m = np.zeros((dim, dim), dtype=complex)
        for y, b in enumerate(a):
            op = operators[y][b]
            m += op.mat if isinstance(op, HermOp) else np.asarray(op)
        ml.append(m)
    basis = sdp.hermitian_basis(dim)
    constraints = []
    for h in basis:
        coeffs = tuple([h] * len(assigns))
        constraints.append(SdpConstraint(coeffs, sdp.hs_inner(h, np.eye(dim))))
    problem = SdpProblem(
        block_dims=tuple([dim] * len(assigns)),
        objective=tuple(ml),
        constraints=tuple(constraints),
        maximize=True,
    )
    sol = sdp.solve(problem)
    if sol.status is not SdpStatus.OPTIMAL:
        raise sdp.SolverError(f"witness-bound SDP ended with {sol.status.value}")
    return sol.objective


def _normalize_jm_witness(ops, dim: int) -> JmWitness:
    """Shift by the identity so the jointly-measurable bound is exactly 1.

    Adding c*I to every operator adds c * #settings * dim to the value of any
    measurement family, so violations survive the normalization.
    """
    settings = len(ops)
    raw_bound = jm_witness_bound(ops, dim)
    c = (1.0 - raw_bound) / (settings * dim)
    shifted = tuple(tuple(HermOp(f.mat + c * np.eye(dim)) for f in row) for row in ops)
    return JmWitness(operators=shifted, bound=1.0)


def is_jointly_measurable(fam: MeasurementFamily):
    """Parent-POVM feasibility; (True, certificate) or (False, violated witness)."""
    targets = [[e.mat for e in p.effects] for p in fam.povms]
    margin, sol, assigns = _decomp.solve_margin(targets, fam.dim, fam.outcome_counts)
    if margin >= -FEAS_MARGIN:
        parents = _decomp.parents_from_solution(sol, margin, len(assigns), fam.dim)
        cert = JmCertificate(
            parent=Povm(parents),
            post_processing=ConditionalDistribution(
                _decomp.deterministic_table(assigns, fam.outcome_counts)
            ),
            assignments=tuple(assigns),
        )
        return True, cert
    ops = _decomp.dual_operators(sol, fam.dim, fam.outcome_counts)
    return False, _normalize_jm_witness(ops, fam.dim)


def busch_pair_compatible(a, b) -> bool:
    """Analytic compatibility of two unbiased dichotomic qubit effects.

    For effect pairs (I +/- a.sigma)/2 and (I +/- b.sigma)/2 the condition is
    |a+b| + |a-b| <= 2.  Only valid for unbiased pairs; biased input rejected.
    """
    a = np.asarray(a, dtype=float).reshape(3)
    b = np.asarray(b, dtype=float).reshape(3)
    if np.linalg.norm(a) > 1 + 1e-12 or np.linalg.norm(b) > 1 + 1e-12:
        raise ValidationError("Bloch vectors must have length at most 1")
    return float(np.linalg.norm(a + b) + np.linalg.norm(a - b)) <= 2.0


def unbiased_pair_blochs(fam: MeasurementFamily):
    """Bloch vectors of a two-setting binary unbiased qubit family."""
    if fam.dim != 2 or fam.settings != 2 or fam.outcome_counts != (2, 2):
        raise ValidationError("expected two binary qubit measurements")
    vecs = []
    for y in range(2):
        c, r = bloch_of_effect(fam.effect(0, y))
        if abs(c - 0.5) > 1e-9:
            raise ValidationError("effect is biased; the analytic criterion does not apply")
        vecs.append(r)
    return vecs[0], vecs[1]


def incompatible_weight(fam: MeasurementFamily) -> float:
    """Smallest nu with fam = nu*(generic) + (1-nu)*(jointly measurable).

    Solved as max mu over sub-parents G~_lambda >= 0 with response sums below
    the effects and total sum mu*I; the weight is 1 - mu*.
    """
    assigns = _decomp.assignments(fam.outcome_counts)
    n_lambda = len(assigns)
    dim = fam.dim
    basis = sdp.hermitian_basis(dim)

    pair_index = {}
    pairs = []
    for y in range(fam.settings):
        for b in range(fam.outcome_counts[y]):
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
                SdpConstraint(tuple(coeffs), sdp.hs_inner(h, fam.effect(b, y).mat))
            )
    for h in basis:
        trh = float(np.trace(h).real)
        coeffs = [h] * n_lambda + [None] * len(pairs)
        coeffs.append(np.array([[-trh]]) if trh != 0.0 else np.array([[0.0]]))
        constraints.append(SdpConstraint(tuple(coeffs), 0.0))

    objective = [None] * n_blocks
    objective[mu_block] = np.array([[1.0]])
    problem = SdpProblem(tuple(dims), tuple(objective), tuple(constraints), maximize=True)
    sol = sdp.solve(problem)
    mu = _decomp.objective_or_raise(sol, "incompatible-weight")
    return float(min(1.0, max(0.0, 1.0 - mu)))


def jm_inequality_value(fam: MeasurementFamily, witness) -> float:
    """Value of the linear functional sum tr(F_{b|y} E_{b|y})."""
    ops = witness.operators if isinstance(witness, JmWitness) else witness
    if len(ops) != fam.settings:
        raise ValidationError("witness settings do not match the family")
    value = 0.0
    for y in range(fam.settings):
        if len(ops[y]) != fam.outcome_counts[y]:
            raise ValidationError("witness outcomes do not match the family")
        for b in range(fam.outcome_counts[y]):
            f = ops[y][b]
            fmat = f.mat if isinstance(f, HermOp) else np.asarray(f)
            value += sdp.hs_inner(fmat, fam.effect(b, y).mat)
    return value


def translate_steering_inequality(witness, bound: float, d: int):
    """Steering inequality -> joint-measurability inequality: same operators,
    bound scaled by the dimension (compatible families are d times an
    unsteerable assemblage)."""
    return witness, float(d) * bound


def depolarize_povm(p: Povm, eta: float) -> Povm:
    """E -> eta*E + (1-eta)*tr(E)*I/d applied to every effect."""
    d = p.dim
    return Povm(
        tuple(
            HermOp(eta * e.mat + (1.0 - eta) * e.trace() * np.eye(d) / d)
            for e in p.effects
        )
    )


def depolarize_family(fam: MeasurementFamily, eta: float) -> MeasurementFamily:
    return MeasurementFamily(tuple(depolarize_povm(p, eta) for p in fam.povms))


def jm_structure(povms, eta: float):
    """Maximal jointly measurable subsets of the eta-depolarized measurements.

    Returns the antichain as a sorted list of index tuples (0-based).
    """
    povms = list(povms)
    if len(povms) > STRUCTURE_GUARD:
        raise ValidationError(
            f"{len(povms)} measurements exceed the structure guard {STRUCTURE_GUARD}"
        )
    noisy = [depolarize_povm(p, eta) for p in povms]
    n = len(noisy)
    compatible = []
    for size in range(1, n + 1):
        for subset in itertools.combinations(range(n), size):
            fam = MeasurementFamily(tuple(noisy[i] for i in subset))
            if jm_margin(fam) >= -FEAS_MARGIN:
                compatible.append(subset)
    maximal = [
        s
        for s in compatible
        if not any(set(s) < set(t) for t in compatible)
    ]
    return sorted(maximal)


# ---------------------------------------------------------------------------
# CNDO


def _cp_adjoint(choi: HermOp, dim_in: int, dim_out: int, effect: np.ndarray) -> np.ndarray:
    t = choi.mat.reshape(dim_in, dim_out, dim_in, dim_out)
    k = np.einsum("aicj,ji->ac", t, effect)
    return k.T


def cndo_apply(spec: CndoSpec, fam: MeasurementFamily) -> MeasurementFamily:
    """Transform a family by the fixed instrument and classical processings.

    F_{b'|y'} = sum_{a,y,b} C_a^dagger(E_{b|y}) p(y|a,y') p(b'|b,a,y',y).
    """
    if fam.dim != spec.dim_out:
        raise ValidationError("family does not act on the instrument output space")
    p_y = spec.setting_choice.table
    p_out = spec.outcome_relabel.table
    n_y, n_a, n_yp = p_y.shape
    n_bp = p_out.shape[0]
    if n_y != fam.settings:
        raise ValidationError("setting-choice table does not match the family settings")
    if n_a != len(spec.instrument):
        raise ValidationError("setting-choice table does not match the instrument branches")
    adj = [
        [
            _cp_adjoint(spec.instrument[a], spec.dim_in, spec.dim_out, fam.effect(b, y).mat)
            for b in range(fam.outcome_counts[y])
        ]
        for a in range(n_a)
        for y in range(n_y)
    ]

    povms = []
    for yp in range(n_yp):
        effects = []
        for bp in range(n_bp):
            acc = np.zeros((spec.dim_in, spec.dim_in), dtype=complex)
            for a in range(n_a):
                for y in range(n_y):
                    w_y = p_y[y, a, yp]
                    if w_y == 0.0:
                        continue
                    for b in range(fam.outcome_counts[y]):
                        w = w_y * p_out[bp, b, a, yp, y]
                        if w == 0.0:
                            continue
                        acc += w * adj[a * n_y + y][b]
            effects.append(HermOp(acc))
        povms.append(Povm(tuple(effects)))
    return MeasurementFamily(tuple(povms))


def trivial_cndo(dim: int) -> CndoSpec:
    """Identity instrument with pass-through classical processing (2x2 case)."""
    choi = np.zeros((dim * dim, dim * dim), dtype=complex)
    for i in range(dim):
        for j in range(dim):
            choi[i * dim + i, j * dim + j] = 1.0
    p_y = np.zeros((2, 1, 2))
    p_y[0, 0, 0] = 1.0
    p_y[1, 0, 1] = 1.0
    p_out = np.zeros((2, 2, 1, 2, 2))
    for b in range(2):
        for yp in range(2):
            for y in range(2):
                p_out[b, b, 0, yp, y] = 1.0
    return CndoSpec(
        dim_in=dim,
        dim_out=dim,
        instrument=(HermOp(choi),),
        setting_choice=ConditionalDistribution(p_y),
        outcome_relabel=ConditionalDistribution(p_out),
    )


def _sharp_axes(pair: MeasurementFamily):
    """Bloch axes of a pair of distinct non-trivial sharp binary qubit measurements."""
    if pair.dim != 2 or pair.settings != 2 or pair.outcome_counts != (2, 2):
        raise ValidationError("expected a pair of binary qubit measurements")
    axes = []
    for y in range(2):
        e = pair.effect(0, y)
        c, r = bloch_of_effect(e)
        ln = np.linalg.norm(r)
        if abs(c - 0.5) > 1e-9 or abs(ln - 1.0) > 1e-9:
            raise ValidationError(
                "measurements must be rank-one projective; degenerate pairs are "
                "always jointly measurable and freely reachable, so convertibility "
                "is only decided for the sharp case"
            )
        axes.append(r / ln)
    if abs(abs(float(axes[0] @ axes[1])) - 1.0) <= 1e-12:
        raise ValidationError(
            "measurements in a pair must be distinct; identical pairs are "
            "jointly measurable and freely reachable"
        )
    return axes


def cndo_convertible_qubit_pairs(e: MeasurementFamily, f: MeasurementFamily) -> bool:
    """Whether one sharp qubit pair converts into another under CNDO.

    For pairs of distinct non-trivial binary projective measurements the only
    usable operations are unitary rotations plus relabelings, so the verdict
    reduces to comparing the unordered (acute) angle between the Bloch axes.
    """
    ax_e = _sharp_axes(e)
    ax_f = _sharp_axes(f)
    angle_e = np.arccos(min(1.0, abs(float(ax_e[0] @ ax_e[1]))))
    angle_f = np.arccos(min(1.0, abs(float(ax_f[0] @ ax_f[1]))))
    return bool(abs(angle_e - angle_f) <= 1e-9)


# ---------------------------------------------------------------------------
# Scaling between families and assemblages


def scale_povms_to_assemblage(fam: MeasurementFamily) -> Assemblage:
    """sigma_{b|y} = E_{b|y} / d; the marginal is automatically I/d."""
    d = fam.dim
    members = tuple(
        tuple(HermOp(e.mat / d) for e in p.effects) for p in fam.povms
    )
    return Assemblage(members)


def scale_assemblage_to_povms(a: Assemblage) -> MeasurementFamily:
    """E_{b|y} = d * sigma_{b|y}; requires the maximally mixed marginal."""
    d = a.dim
    if np.max(np.abs(a.marginal().mat - np.eye(d) / d)) > 1e-9:
        raise ValidationError("assemblage marginal is not maximally mixed; cannot rescale")
    povms = tuple(
        Povm(tuple(HermOp(d * s.mat) for s in row)) for row in a.members
    )
    return MeasurementFamily(povms)
