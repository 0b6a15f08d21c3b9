"""Monogamy games for prepare-and-measure key distribution, ensemble
uncertainty relations, and B92 device certification with the
unambiguous-discrimination attack.

A game is a set of ensembles, one per basis; an adversarial strategy is a
channel from the preparation space into a bipartite receiver space together
with guessing POVMs for both receivers.  The winning probability averages,
uniformly over the basis choices, the probability that both receivers guess
the prepared index.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import incompat, sdp
from .channels import Channel, EbDecomposition, adjoint_apply, from_eb
from .qmat import (
    Ensemble,
    HermOp,
    MeasurementFamily,
    Povm,
    PureState,
    ValidationError,
    basis_state,
    identity,
    operator_norm,
    partial_trace,
    psd_sqrt,
    trace_norm,
)
from .sdp import SdpConstraint, SdpProblem, SdpStatus


@dataclass(frozen=True)
class MonogamyGame:
    """Ensembles per basis plus a repetition count for the product game."""

    ensembles: tuple[Ensemble, ...]
    n: int = 1

    def __post_init__(self) -> None:
        ens = tuple(self.ensembles)
        if not ens:
            raise ValidationError("game needs at least one basis")
        d = ens[0].dim
        x = ens[0].size
        for e in ens:
            if e.dim != d or e.size != x:
                raise ValidationError("ensembles must share dimension and outcome count")
        if int(self.n) < 1:
            raise ValidationError("repetition count must be at least 1")
        object.__setattr__(self, "ensembles", ens)
        object.__setattr__(self, "n", int(self.n))

    @property
    def d(self) -> int:
        return self.ensembles[0].dim

    @property
    def bases(self) -> int:
        return len(self.ensembles)

    @property
    def outcomes(self) -> int:
        return self.ensembles[0].size


@dataclass(frozen=True)
class GameStrategy:
    """Channel into B x C plus guessing families for both receivers."""

    channel: Channel
    dim_b: int
    dim_c: int
    bob: MeasurementFamily
    charlie: MeasurementFamily

    def __post_init__(self) -> None:
        if self.dim_b * self.dim_c != self.channel.dim_out:
            raise ValidationError("channel output does not factor into the declared B x C")
        if self.bob.dim != self.dim_b or self.charlie.dim != self.dim_c:
            raise ValidationError("guessing families do not act on their factors")


@dataclass(frozen=True)
class GameParams:
    """Maximal cross-basis overlap c, maximal prior m, and event count q."""

    c: float
    m: float
    q: int = 1

    def __post_init__(self) -> None:
        if not 0.0 <= self.c <= 1.0 + 1e-12:
            raise ValidationError("overlap parameter must lie in [0, 1]")
        if not 0.0 < self.m <= 1.0 + 1e-12:
            raise ValidationError("maximal prior must lie in (0, 1]")
        if int(self.q) < 1:
            raise ValidationError("event count must be a positive integer")
        object.__setattr__(self, "q", int(self.q))


@dataclass(frozen=True)
class UncertaintyReport:
    guess_b: float
    guess_c: float
    total: float
    bound: float
    min_entropy_b: float
    min_entropy_c: float
    min_entropy_total: float
    min_entropy_bound: float
    satisfied: bool


class B92Verdict(enum.Enum):
    CERTIFIED = "Certified"
    PARTIAL_ONLY = "PartialOnly"
    FAIL = "Fail"


@dataclass(frozen=True)
class UsdAttack:
    """Unambiguous-discrimination eavesdropping bundle."""

    eb: EbDecomposition
    device: MeasurementFamily
    induced: MeasurementFamily
    success: float


# ---------------------------------------------------------------------------
# Product-game expansion


def _product_states(game: MonogamyGame):
    """States of the n-fold game keyed by (theta-tuple, x-tuple), plus orderings."""
    thetas = list(itertools.product(range(game.bases), repeat=game.n))
    xs = list(itertools.product(range(game.outcomes), repeat=game.n))
    states = {}
    for tv in thetas:
        for xv in xs:
            mat = np.ones((1, 1), dtype=complex)
            for t, x in zip(tv, xv):
                mat = np.kron(mat, game.ensembles[t].states[x].mat)
            states[(tv, xv)] = mat
    return thetas, xs, states


def game_value(game: MonogamyGame, strategy: GameStrategy) -> float:
    """Average winning probability of the strategy on the (product) game."""
    d_round = game.d
    if strategy.channel.dim_in != d_round**game.n:
        raise ValidationError("strategy channel input does not match the game")
    thetas, xs, states = _product_states(game)
    if strategy.bob.settings != len(thetas) or strategy.charlie.settings != len(thetas):
        raise ValidationError("strategy families need one setting per basis choice")
    d_in = strategy.channel.dim_in
    d_out = strategy.channel.dim_out
    # contract the Choi tensor against all prepared states at once
    t = strategy.channel.choi.mat.reshape(d_in, d_out, d_in, d_out).transpose(0, 2, 1, 3)
    t = np.ascontiguousarray(t).reshape(d_in * d_in, d_out * d_out)
    keys = [(tv, xv) for tv in thetas for xv in xs]
    stack = np.stack([states[k].reshape(-1) for k in keys])
    outs = stack @ t  # rows are C(rho) flattened
    total = 0.0
    for row, (tv, xv) in zip(outs, keys):
        ti = thetas.index(tv)
        xi = xs.index(xv)
        fb = strategy.bob.effect(xi, ti).mat
        gc = strategy.charlie.effect(xi, ti).mat
        fg = np.kron(fb, gc)
        total += float(np.vdot(fg.conj().reshape(-1), row).real)
    return total / len(thetas)


def game_params(game: MonogamyGame) -> GameParams:
    """Exact overlap and prior parameters from eigendecompositions.

    c is the squared operator norm of sqrt(rho_{x|t}) sqrt(rho_{x'|t'}) over
    distinct bases; m is the largest state trace.
    """
    if game.bases < 2:
        raise ValidationError("overlap parameter needs at least two bases")
    roots = [[psd_sqrt(s) for s in ens.states] for ens in game.ensembles]
    c = 0.0
    for t1 in range(game.bases):
        for t2 in range(game.bases):
            if t1 == t2:
                continue
            for r1 in roots[t1]:
                for r2 in roots[t2]:
                    prod = r1.mat @ r2.mat
                    c = max(c, float(np.linalg.norm(prod, ord=2)) ** 2)
    m = max(s.trace() for ens in game.ensembles for s in ens.states)
    return GameParams(c=min(c, 1.0), m=m)


def theorem_bound(game: MonogamyGame, params: GameParams) -> float:
    """Adversarial winning-probability bound |Q| d^n (m/T + (T-1)/T sqrt(c))^n."""
    big_t = game.bases
    per_round = params.m / big_t + (big_t - 1) / big_t * math.sqrt(params.c)
    return params.q * (game.d**game.n) * per_round**game.n


# ---------------------------------------------------------------------------
# The two-basis conjugate-coding game


def bb84_game(n: int = 1) -> MonogamyGame:
    """Conjugate-coding game: uniform computational and Hadamard eigenstates."""
    zero = basis_state(2, 0).projector()
    one = basis_state(2, 1).projector()
    plus = PureState(np.array([1, 1]) / np.sqrt(2)).projector()
    minus = PureState(np.array([1, -1]) / np.sqrt(2)).projector()
    ens0 = Ensemble((HermOp(zero.mat / 2), HermOp(one.mat / 2)))
    ens1 = Ensemble((HermOp(plus.mat / 2), HermOp(minus.mat / 2)))
    return MonogamyGame(ensembles=(ens0, ens1), n=n)


def _broadcast_choi(meas: list[np.ndarray], d_in: int) -> HermOp:
    """Choi of the measure-and-broadcast channel without forming large krons.

    The channel measures the POVM and writes the outcome into matching
    classical registers for both receivers.
    """
    k = len(meas)
    d_out = k * k
    choi = np.zeros((d_in * d_out, d_in * d_out), dtype=complex)
    for r, e in enumerate(meas):
        pos = r * k + r
        rows = np.arange(d_in) * d_out + pos
        choi[np.ix_(rows, rows)] += e.T
    return HermOp(choi)


def bb84_optimal_strategy(n: int = 1) -> GameStrategy:
    """Measure the intermediate state and broadcast the outcome, n-fold.

    The single-round measurement is {|phi><phi|, I - |phi><phi|} with |phi>
    halfway between |0> and |+>; both receivers guess the broadcast bits.
    """
    angle = math.pi / 8.0
    phi = PureState(np.array([math.cos(angle), math.sin(angle)]))
    p0 = phi.projector().mat
    povm_round = [p0, np.eye(2) - p0]
    meas = [np.ones((1, 1), dtype=complex)]
    for _ in range(n):
        meas = [np.kron(a, b) for a in meas for b in povm_round]
    d_in = 2**n
    k = len(meas)
    choi = _broadcast_choi(meas, d_in)
    channel = Channel(d_in, k * k, choi)
    reg_proj = [basis_state(k, r).projector() for r in range(k)]
    povm = Povm(tuple(reg_proj))
    settings = 2**n
    bob = MeasurementFamily(tuple(povm for _ in range(settings)))
    charlie = MeasurementFamily(tuple(povm for _ in range(settings)))
    return GameStrategy(channel=channel, dim_b=k, dim_c=k, bob=bob, charlie=charlie)


# ---------------------------------------------------------------------------
# Guessing probabilities and the ensemble uncertainty relation


def discrimination_value(states) -> float:
    """Optimal success probability for discriminating sub-normalized states."""
    mats = [s.mat if isinstance(s, HermOp) else np.asarray(s, dtype=complex) for s in states]
    d = mats[0].shape[0]
    basis = sdp.hermitian_basis(d)
    constraints = [
        SdpConstraint(tuple([h] * len(mats)), sdp.hs_inner(h, np.eye(d))) for h in basis
    ]
    problem = SdpProblem(
        block_dims=tuple([d] * len(mats)),
        objective=tuple(mats),
        constraints=tuple(constraints),
        maximize=True,
    )
    sol = sdp.solve(problem)
    if sol.status is not SdpStatus.OPTIMAL:
        raise sdp.SolverError(f"discrimination SDP ended with {sol.status.value}")
    return sol.objective


def helstrom_value(s0: HermOp, s1: HermOp) -> float:
    """Two-state closed form (tr(s0+s1) + ||s0-s1||_1) / 2."""
    return (s0.trace() + s1.trace() + trace_norm(s0 - s1)) / 2.0


def guessing_probability(
    game: MonogamyGame, channel: Channel, side: str, split: tuple[int, int]
) -> float:
    """Optimal probability of guessing the prepared index from one receiver side.

    The receiver sees the reduced output tr_other(C(rho_{x|theta})) and knows
    theta; the result averages the per-basis discrimination optimum over the
    uniformly random basis.
    """
    db, dc = int(split[0]), int(split[1])
    if db * dc != channel.dim_out:
        raise ValidationError("declared B x C split does not match the channel output")
    if channel.dim_in != game.d:
        raise ValidationError("channel input does not match the game dimension")
    if side not in ("B", "C"):
        raise ValidationError("side must be 'B' or 'C'")
    keep = "A" if side == "B" else "B"
    from .channels import apply as channel_apply

    total = 0.0
    for ens in game.ensembles:
        reduced = [
            partial_trace(channel_apply(channel, s), (db, dc), keep) for s in ens.states
        ]
        total += discrimination_value(reduced)
    return total / game.bases


def uncertainty_bound(game: MonogamyGame) -> float:
    """d(m + sqrt(c)) for a two-basis game."""
    if game.bases != 2:
        raise ValidationError("the uncertainty relation is stated for two bases")
    params = game_params(game)
    return game.d * (params.m + math.sqrt(params.c))


def check_uncertainty(
    game: MonogamyGame, channel: Channel, split: tuple[int, int]
) -> UncertaintyReport:
    """Evaluate both guessing probabilities against d(m + sqrt(c))."""
    bound = uncertainty_bound(game)
    gb = guessing_probability(game, channel, "B", split)
    gc = guessing_probability(game, channel, "C", split)
    hb = -math.log2(gb)
    hc = -math.log2(gc)
    return UncertaintyReport(
        guess_b=gb,
        guess_c=gc,
        total=gb + gc,
        bound=bound,
        min_entropy_b=hb,
        min_entropy_c=hc,
        min_entropy_total=hb + hc,
        min_entropy_bound=-2.0 * math.log2(bound / 2.0),
        satisfied=gb + gc <= bound + 1e-7,
    )


# ---------------------------------------------------------------------------
# B92


def _b92_overlap(psi1: PureState, psi2: PureState) -> float:
    if psi1.dim != 2 or psi2.dim != 2:
        raise ValidationError("the protocol uses qubit signal states")
    ov = abs(psi1.overlap(psi2))
    if ov > 1.0 - 1e-9:
        raise ValidationError("signal states must be distinct")
    if ov < 1e-9:
        raise ValidationError("signal states must be non-orthogonal")
    return ov


def b92_canonical_family(psi1: PureState, psi2: PureState) -> MeasurementFamily:
    """Honest measurements {I - |psi2><psi2|, |psi2><psi2|} and with 1 <-> 2."""
    _b92_overlap(psi1, psi2)
    p1 = psi1.projector().mat
    p2 = psi2.projector().mat
    m1 = Povm((HermOp(np.eye(2) - p2), HermOp(p2)))
    m2 = Povm((HermOp(np.eye(2) - p1), HermOp(p1)))
    return MeasurementFamily((m1, m2))


def b92_certify(
    fam: MeasurementFamily, psi1: PureState, psi2: PureState, tol: float = 1e-9
) -> B92Verdict:
    """Decide whether the observed statistics pin down the honest measurements.

    Zero-error: outcome 1 of measurement i never fires on the other signal
    state.  Full certification additionally needs the conclusive rate to
    reach 1 - |<psi1|psi2>|^2, which forces the effects to be the honest
    projector complements and the family to be incompatible.
    """
    ov = _b92_overlap(psi1, psi2)
    if fam.dim != 2 or fam.settings != 2 or fam.outcome_counts != (2, 2):
        raise ValidationError("expected two binary qubit measurements")
    psis = (psi1, psi2)
    others = (psi2, psi1)
    zero_ok = True
    success_ok = True
    for i in range(2):
        wrong = fam.effect(0, i).expval(others[i].amps)
        right = fam.effect(0, i).expval(psis[i].amps)
        if wrong > tol:
            zero_ok = False
        if right < 1.0 - ov**2 - tol:
            success_ok = False
    if not zero_ok:
        return B92Verdict.FAIL
    if not success_ok:
        return B92Verdict.PARTIAL_ONLY
    # both constraint groups hold: the effects are forced up to a derived slack
    derived = (2.0 * tol + 2.0 * math.sqrt(tol)) / (1.0 - ov**2) + tol + 2.0 * math.sqrt(tol)
    for i in range(2):
        target = np.eye(2) - others[i].projector().mat
        if float(np.max(np.abs(fam.effect(0, i).mat - target))) > derived:
            raise ValidationError(
                "statistics satisfy the certification constraints but the effects "
                "are not the forced projector complements; input tolerances are "
                "inconsistent"
            )
    compatible, _ = incompat.is_jointly_measurable(fam)
    if compatible:
        raise ValidationError(
            "forced measurements should be incompatible; input tolerances are "
            "inconsistent"
        )
    return B92Verdict.CERTIFIED


def b92_usd_attack(psi1: PureState, psi2: PureState) -> UsdAttack:
    """Optimal unambiguous-discrimination eavesdropping.

    The intercepted state is measured with the three-outcome POVM that
    identifies each signal state with zero error (success 1 - overlap) or
    gives up; the measuring device then announces outcome 1 for measurement i
    exactly when the signal was identified as psi_i.  The induced family
    satisfies the zero-error constraints but reaches only 1 - |<psi1|psi2>|,
    and is jointly measurable, so certification correctly fails.
    """
    ov = _b92_overlap(psi1, psi2)
    alpha = 1.0 / (1.0 + ov)

    def perp(psi: PureState) -> np.ndarray:
        v = psi.amps
        w = np.array([-np.conj(v[1]), np.conj(v[0])])
        return np.outer(w, w.conj())

    # outcome 0: identified psi1 (impossible for psi2), outcome 1: identified psi2
    m_id1 = alpha * perp(psi2)
    m_id2 = alpha * perp(psi1)
    m_fail = np.eye(2) - m_id1 - m_id2
    usd = Povm((HermOp(m_id1), HermOp(m_id2), HermOp(m_fail)))
    register = [basis_state(3, i).projector() for i in range(3)]
    eb = EbDecomposition(measure_povm=usd, prepare_states=tuple(register))
    device_povms = []
    for i in range(2):
        fire = register[i].mat
        device_povms.append(Povm((HermOp(fire), HermOp(np.eye(3) - fire))))
    device = MeasurementFamily(tuple(device_povms))
    channel = from_eb(eb)
    from .channels import induced_measurements

    induced = induced_measurements(channel, device)
    return UsdAttack(eb=eb, device=device, induced=induced, success=1.0 - ov)
