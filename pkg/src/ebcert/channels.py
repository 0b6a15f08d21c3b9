"""Channels as Choi operators: entanglement-breaking tests, the depolarizing
family, induced measurements, and the simulating constructions for every
trust scenario.

Choi convention: for a channel C with input dimension d the Choi operator is

    J = sum_{ij} |i><j|  (x)  C(|i><j|),

so tr J = d and the input marginal tr_out J is the identity.  Worked qubit
example: the identity channel has J = 2 * (projector onto the maximally
entangled pair), and steering it with the sharp Z measurement gives the
assemblage {|0><0|/2, |1><1|/2} after the transpose that this convention
carries into steered states.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .qmat import (
    HermOp,
    MeasurementFamily,
    Povm,
    ConditionalDistribution,
    ValidationError,
    basis_state,
    partial_trace,
    partial_transpose,
)
from .steering import Assemblage

PPT_EXACT_LIMIT = 6


class EbVerdict(enum.Enum):
    YES = "Yes"
    NO = "No"
    UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class Channel:
    """Completely positive trace-preserving map stored as its Choi operator."""

    dim_in: int
    dim_out: int
    choi: HermOp

    def __post_init__(self) -> None:
        d_in, d_out = int(self.dim_in), int(self.dim_out)
        if self.choi.dim != d_in * d_out:
            raise ValidationError(
                f"Choi dimension {self.choi.dim} does not match {d_in}x{d_out}"
            )
        if not self.choi.is_psd():
            raise ValidationError("Choi operator is not positive semidefinite")
        marg = partial_trace(self.choi, (d_in, d_out), "A").mat
        if np.max(np.abs(marg - np.eye(d_in))) > 1e-9:
            raise ValidationError("input marginal of the Choi operator is not the identity")
        object.__setattr__(self, "dim_in", d_in)
        object.__setattr__(self, "dim_out", d_out)

    def _tensor4(self) -> np.ndarray:
        return self.choi.mat.reshape(self.dim_in, self.dim_out, self.dim_in, self.dim_out)


@dataclass(frozen=True)
class EbDecomposition:
    """Measure-and-reprepare form: POVM on the input, states on the output."""

    measure_povm: Povm
    prepare_states: tuple[HermOp, ...]

    def __post_init__(self) -> None:
        states = tuple(self.prepare_states)
        if len(states) != self.measure_povm.outcomes:
            raise ValidationError("one prepared state is needed per POVM outcome")
        for s in states:
            if not s.is_psd():
                raise ValidationError("prepared state is not positive semidefinite")
            if abs(s.trace() - 1.0) > 1e-9:
                raise ValidationError("prepared state does not have unit trace")
        object.__setattr__(self, "prepare_states", states)

    @property
    def dim_in(self) -> int:
        return self.measure_povm.dim

    @property
    def dim_out(self) -> int:
        return self.prepare_states[0].dim


def identity_channel(d: int) -> Channel:
    choi = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            choi[i * d + i, j * d + j] = 1.0
    return Channel(d, d, HermOp(choi))


def depolarizing(p: float) -> Channel:
    """Qubit channel rho -> p*rho + (1-p)*I/2."""
    if not 0.0 <= p <= 1.0:
        raise ValidationError("depolarizing parameter must lie in [0, 1]")
    ident = identity_channel(2).choi.mat
    choi = p * ident + (1.0 - p) * np.kron(np.eye(2), np.eye(2)) / 2.0
    return Channel(2, 2, HermOp(choi))


def apply(c: Channel, rho: HermOp) -> HermOp:
    """C(rho) = tr_in(J (rho^T x I))."""
    if rho.dim != c.dim_in:
        raise ValidationError("state dimension does not match the channel input")
    t = c._tensor4()
    out = np.einsum("aicj,ac->ij", t, rho.mat)
    return HermOp(out)


def adjoint_apply(c: Channel, effect: HermOp) -> HermOp:
    """Heisenberg picture: tr(C^dagger(E) rho) = tr(E C(rho)) for all rho."""
    if effect.dim != c.dim_out:
        raise ValidationError("effect dimension does not match the channel output")
    t = c._tensor4()
    k = np.einsum("aicj,ji->ac", t, effect.mat)
    return HermOp(k.T)


def from_eb(dec: EbDecomposition) -> Channel:
    """Choi operator of the measure-and-reprepare channel: sum E^T x rho."""
    d_in, d_out = dec.dim_in, dec.dim_out
    choi = np.zeros((d_in * d_out, d_in * d_out), dtype=complex)
    for e, s in zip(dec.measure_povm.effects, dec.prepare_states):
        choi += np.kron(e.mat.T, s.mat)
    return Channel(d_in, d_out, HermOp(choi))


def is_entanglement_breaking(c: Channel) -> EbVerdict:
    """Positive-partial-transpose test on the Choi operator.

    Exact for dim_in*dim_out <= 6 where PPT characterizes separability; in
    larger spaces a PPT Choi operator is reported as Undetermined rather than
    a false Yes.
    """
    pt = partial_transpose(c.choi, (c.dim_in, c.dim_out), "B")
    ppt = pt.is_psd()
    if not ppt:
        return EbVerdict.NO
    if c.dim_in * c.dim_out <= PPT_EXACT_LIMIT:
        return EbVerdict.YES
    return EbVerdict.UNDETERMINED


def induced_measurements(c: Channel, device: MeasurementFamily) -> MeasurementFamily:
    """Pull the device POVMs back to the channel input: E_{b|y} = C^dagger(E~_{b|y})."""
    if device.dim != c.dim_out:
        raise ValidationError("device measurements do not act on the channel output")
    povms = tuple(
        Povm(tuple(adjoint_apply(c, e) for e in p.effects)) for p in device.povms
    )
    return MeasurementFamily(povms)


def steered_assemblage_from_choi(c: Channel, device: MeasurementFamily) -> Assemblage:
    """Assemblage the device steers on the Choi state: (1/d) C^dagger(E~)^T."""
    if device.dim != c.dim_out:
        raise ValidationError("device measurements do not act on the channel output")
    d = c.dim_in
    members = tuple(
        tuple(HermOp(adjoint_apply(c, e).mat.T / d) for e in p.effects)
        for p in device.povms
    )
    return Assemblage(members)


def simulate_untrusted_alice(outputs) -> EbDecomposition:
    """Measure-and-reprepare channel matching any untrusted-preparation data.

    Encoding the classical choice x in an orthonormal basis and repreparing
    the observed output state reproduces C~(|x><x|) = rho_x exactly, so
    output-state data alone can never separate a channel from this
    entanglement-breaking simulation.
    """
    states = tuple(outputs)
    if not states:
        raise ValidationError("need at least one output state")
    n = len(states)
    effects = tuple(basis_state(n, i).projector() for i in range(n))
    return EbDecomposition(measure_povm=Povm(effects), prepare_states=states)


def simulate_both_untrusted(p: ConditionalDistribution):
    """Measure-and-reprepare channel plus device POVMs hitting any p(b|x,y).

    The channel dephases the classical encoding |x><x| and the device reads
    it out with effects sum_x p(b|x,y) |x><x|; together they reproduce the
    table exactly, including supra-quantum ones.
    """
    table = p.table
    if table.ndim != 3:
        raise ValidationError("conditional distribution needs axes (b, x, y)")
    n_b, n_x, n_y = table.shape
    basis_proj = [basis_state(n_x, i).projector() for i in range(n_x)]
    dec = EbDecomposition(
        measure_povm=Povm(tuple(basis_proj)),
        prepare_states=tuple(basis_proj),
    )
    povms = []
    for y in range(n_y):
        effects = []
        for b in range(n_b):
            acc = np.zeros((n_x, n_x), dtype=complex)
            for x in range(n_x):
                acc += table[b, x, y] * basis_proj[x].mat
            effects.append(HermOp(acc))
        povms.append(Povm(tuple(effects)))
    return dec, MeasurementFamily(tuple(povms))
