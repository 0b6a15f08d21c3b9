"""JSON encodings shared across the toolkit and the command line.

Matrices are `{"dim": n, "entries": [[[re, im], ...], ...]}` row-major; pure
states are `{"dim": n, "amps": [[re, im], ...]}`.  Families, assemblages,
channels, and games mirror their type fields.  Schema documents live in
docs/schemas/.
"""

from __future__ import annotations

import json

import numpy as np

from .channels import Channel, EbDecomposition
from .qmat import (
    ConditionalDistribution,
    Ensemble,
    HermOp,
    MeasurementFamily,
    Povm,
    PureState,
    ValidationError,
)
from .qkd import MonogamyGame
from .steering import Assemblage


class FormatError(ValueError):
    """The JSON document does not match the expected schema."""


def _require(doc: dict, key: str):
    if not isinstance(doc, dict) or key not in doc:
        raise FormatError(f"missing required key {key!r}")
    return doc[key]


def encode_matrix(op: HermOp) -> dict:
    entries = [
        [[float(v.real), float(v.imag)] for v in row] for row in np.asarray(op.mat)
    ]
    return {"dim": op.dim, "entries": entries}


def decode_matrix(doc: dict) -> HermOp:
    dim = int(_require(doc, "dim"))
    entries = _require(doc, "entries")
    try:
        arr = np.array(
            [[complex(cell[0], cell[1]) for cell in row] for row in entries],
            dtype=complex,
        )
    except (TypeError, IndexError) as exc:
        raise FormatError(f"malformed matrix entries: {exc}") from exc
    if arr.shape != (dim, dim):
        raise FormatError(f"matrix shape {arr.shape} does not match dim {dim}")
    try:
        return HermOp(arr)
    except ValidationError as exc:
        raise FormatError(str(exc)) from exc


def encode_pure_state(psi: PureState) -> dict:
    return {
        "dim": psi.dim,
        "amps": [[float(a.real), float(a.imag)] for a in np.asarray(psi.amps)],
    }


def decode_pure_state(doc: dict) -> PureState:
    dim = int(_require(doc, "dim"))
    amps = _require(doc, "amps")
    try:
        vec = np.array([complex(a[0], a[1]) for a in amps], dtype=complex)
    except (TypeError, IndexError) as exc:
        raise FormatError(f"malformed amplitudes: {exc}") from exc
    if vec.size != dim:
        raise FormatError(f"state length {vec.size} does not match dim {dim}")
    try:
        return PureState(vec)
    except ValidationError as exc:
        raise FormatError(str(exc)) from exc


def encode_family(fam: MeasurementFamily) -> dict:
    return {
        "dim": fam.dim,
        "povms": [[encode_matrix(e) for e in p.effects] for p in fam.povms],
    }


def decode_family(doc: dict) -> MeasurementFamily:
    povms = _require(doc, "povms")
    try:
        return MeasurementFamily(
            tuple(Povm(tuple(decode_matrix(e) for e in row)) for row in povms)
        )
    except ValidationError as exc:
        raise FormatError(str(exc)) from exc


def encode_assemblage(a: Assemblage) -> dict:
    return {
        "dim": a.dim,
        "members": [[encode_matrix(s) for s in row] for row in a.members],
    }


def decode_assemblage(doc: dict) -> Assemblage:
    members = _require(doc, "members")
    try:
        return Assemblage(
            tuple(tuple(decode_matrix(s) for s in row) for row in members)
        )
    except ValidationError as exc:
        raise FormatError(str(exc)) from exc


def encode_channel(c: Channel) -> dict:
    return {"dimIn": c.dim_in, "dimOut": c.dim_out, "choi": encode_matrix(c.choi)}


def decode_channel(doc: dict) -> Channel:
    try:
        return Channel(
            int(_require(doc, "dimIn")),
            int(_require(doc, "dimOut")),
            decode_matrix(_require(doc, "choi")),
        )
    except ValidationError as exc:
        raise FormatError(str(exc)) from exc


def encode_eb_decomposition(dec: EbDecomposition) -> dict:
    return {
        "measurePovm": [encode_matrix(e) for e in dec.measure_povm.effects],
        "prepareStates": [encode_matrix(s) for s in dec.prepare_states],
    }


def decode_eb_decomposition(doc: dict) -> EbDecomposition:
    try:
        return EbDecomposition(
            measure_povm=Povm(
                tuple(decode_matrix(e) for e in _require(doc, "measurePovm"))
            ),
            prepare_states=tuple(
                decode_matrix(s) for s in _require(doc, "prepareStates")
            ),
        )
    except ValidationError as exc:
        raise FormatError(str(exc)) from exc


def encode_game(g: MonogamyGame) -> dict:
    return {
        "d": g.d,
        "bases": [[encode_matrix(s) for s in ens.states] for ens in g.ensembles],
        "n": g.n,
    }


def decode_game(doc: dict) -> MonogamyGame:
    bases = _require(doc, "bases")
    n = int(doc.get("n", 1))
    try:
        ensembles = tuple(
            Ensemble(tuple(decode_matrix(s) for s in row)) for row in bases
        )
        return MonogamyGame(ensembles=ensembles, n=n)
    except ValidationError as exc:
        raise FormatError(str(exc)) from exc


def encode_distribution(p: ConditionalDistribution) -> dict:
    return {"shape": list(p.table.shape), "table": p.table.tolist()}


def decode_distribution(doc: dict) -> ConditionalDistribution:
    try:
        return ConditionalDistribution(np.asarray(_require(doc, "table"), dtype=float))
    except ValidationError as exc:
        raise FormatError(str(exc)) from exc


def canonical_json(doc) -> str:
    """Deterministic rendering used for reports and digests."""
    return json.dumps(doc, sort_keys=True, indent=2)


def load_document(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON in {path}: {exc}") from exc
