"""Seeded random generators for states, measurements, channels, and games.

Everything takes an explicit numpy Generator so test suites and scripts stay
reproducible.
"""

from __future__ import annotations

import numpy as np

from .qmat import Ensemble, HermOp, MeasurementFamily, Povm, identity, partial_trace


def random_herm(rng: np.random.Generator, d: int, scale: float = 1.0) -> HermOp:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return HermOp(scale * (g + g.conj().T) / 2.0)


def random_psd(rng: np.random.Generator, d: int, rank: int | None = None) -> HermOp:
    r = d if rank is None else rank
    g = rng.normal(size=(d, r)) + 1j * rng.normal(size=(d, r))
    return HermOp(g @ g.conj().T)


def random_state(rng: np.random.Generator, d: int) -> HermOp:
    rho = random_psd(rng, d)
    return HermOp(rho.mat / rho.trace())


def random_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(g)
    phase = np.diag(r).copy()
    phase /= np.abs(phase)
    return q * phase


def random_povm(rng: np.random.Generator, d: int, outcomes: int) -> Povm:
    """Positive effects renormalized to sum to the identity."""
    raw = [random_psd(rng, d).mat for _ in range(outcomes)]
    total = sum(raw)
    vals, vecs = np.linalg.eigh(total)
    inv_sqrt = vecs * (1.0 / np.sqrt(vals)) @ vecs.conj().T
    return Povm(tuple(HermOp(inv_sqrt @ e @ inv_sqrt) for e in raw))


def random_projective_qubit(rng: np.random.Generator) -> Povm:
    v = rng.normal(size=3)
    v /= np.linalg.norm(v)
    from .qmat import qubit_effect

    return Povm((qubit_effect(v), qubit_effect(-v)))


def random_family(
    rng: np.random.Generator, d: int, settings: int, outcomes: int, projective: bool = False
) -> MeasurementFamily:
    if projective:
        if d != 2 or outcomes != 2:
            raise ValueError("projective sampling implemented for binary qubit measurements")
        return MeasurementFamily(tuple(random_projective_qubit(rng) for _ in range(settings)))
    return MeasurementFamily(tuple(random_povm(rng, d, outcomes) for _ in range(settings)))


def random_choi(rng: np.random.Generator, dim_in: int, dim_out: int) -> HermOp:
    """Random Choi operator: PSD, input marginal renormalized to the identity."""
    g = random_psd(rng, dim_in * dim_out)
    marg = partial_trace(g, (dim_in, dim_out), "A").mat
    vals, vecs = np.linalg.eigh(marg)
    inv_sqrt = vecs * (1.0 / np.sqrt(np.clip(vals, 1e-12, None))) @ vecs.conj().T
    fix = np.kron(inv_sqrt, np.eye(dim_out))
    return HermOp(fix @ g.mat @ fix.conj().T)


def random_channel(rng: np.random.Generator, dim_in: int, dim_out: int):
    from .channels import Channel

    return Channel(dim_in, dim_out, random_choi(rng, dim_in, dim_out))


def random_ensemble(rng: np.random.Generator, d: int, size: int) -> Ensemble:
    priors = rng.dirichlet(np.ones(size))
    return Ensemble(tuple(HermOp(p * random_state(rng, d).mat) for p in priors))


def random_subnormalized_assemblage(rng: np.random.Generator, d: int, settings: int, outcomes: int):
    """Unsteerable assemblage from an explicit hidden-state model."""
    from .steering import Assemblage

    n_lambda = outcomes**settings
    weights = rng.dirichlet(np.ones(n_lambda))
    hidden = [HermOp(w * random_state(rng, d).mat) for w in weights]
    assignments = np.array(
        np.meshgrid(*[np.arange(outcomes)] * settings, indexing="ij")
    ).reshape(settings, -1)
    members = []
    for y in range(settings):
        row = []
        for b in range(outcomes):
            sigma = np.zeros((d, d), dtype=complex)
            for lam in range(n_lambda):
                if assignments[y, lam] == b:
                    sigma += hidden[lam].mat
            row.append(HermOp(sigma))
        members.append(tuple(row))
    return Assemblage(tuple(members))
