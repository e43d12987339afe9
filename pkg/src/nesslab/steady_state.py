"""Finite-size stationary, translation-invariant, current-carrying states.

The construction is a generalized Gibbs ensemble exp(-beta (H - lambda J_tot)):
whenever the total current commutes with H (it does for the XX chain) the
state is exactly stationary and translation invariant at finite size, and the
bias tilts it into a current-carrying one.  States are stored spectrally: a
joint (H, shift, bias) eigenbasis plus one probability per eigenvector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import PreconditionError
from .operators import ChainConfig, LocalOperator, shift_index_map
from . import models
from .spectral import JointBasis, _apply_to_vectors, joint_spectrum

RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class BiasSpec:
    """Inverse temperature plus a current bias along a conserved operator."""

    beta: float
    lam: float = 0.0
    conserved_op: str = "total_current"

    def __post_init__(self):
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ValueError(f"beta must be finite and positive, got {self.beta}")


@dataclass(frozen=True)
class StationaryState:
    """Density operator diagonal in a joint (H, shift) eigenbasis."""

    basis: JointBasis
    probs: np.ndarray = field(repr=False)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if np.any(p < -1e-15):
            raise ValueError("probabilities must be nonnegative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        object.__setattr__(self, "probs", p)

    @property
    def chain(self) -> ChainConfig:
        return self.basis.chain

    def expect(self, A) -> complex:
        """sum_n p_n <n|A|n>; A may be dense, sparse or a LocalOperator."""
        V = self.basis.vectors
        AV = _apply_to_vectors(A, V, self.chain)
        diag = np.einsum("in,in->n", V.conj(), AV)
        return complex(np.dot(self.probs, diag))

    def density_matrix(self) -> np.ndarray:
        V = self.basis.vectors
        return (V * self.probs) @ V.conj().T

    def commutant_residual(self, A) -> float:
        """Frobenius norm of [rho, A] (an upper bound on the operator norm)."""
        V = self.basis.vectors
        At = V.conj().T @ _apply_to_vectors(A, V, self.chain)
        R = (self.probs[:, None] - self.probs[None, :]) * At
        return float(np.linalg.norm(R))

    def stationarity_residual(self, H) -> float:
        return self.commutant_residual(H)

    def translation_residual(self) -> float:
        t = shift_index_map(self.chain)
        D = self.chain.dim
        T = sp.coo_matrix((np.ones(D), (t, np.arange(D))), shape=(D, D)).tocsr()
        return self.commutant_residual(T)

    def spectrum_rows(self):
        """Per-eigenvector (energy, momentum, probability) rows."""
        return list(zip(self.basis.energies.tolist(),
                        self.basis.momenta.tolist(),
                        self.probs.tolist()))


def expectation(state: StationaryState, A) -> complex:
    return state.expect(A)


def build_biased_gibbs(phi: models.Interaction, spec: models.ChargeSpec,
                       bias: BiasSpec, chain: ChainConfig,
                       commute_tol: float = 1e-10) -> StationaryState:
    """rho proportional to exp(-beta (H - lambda J_tot)) on the periodic chain.

    Refuses interactions whose total current fails to commute with H (the
    state would not be stationary); the returned state is checked against the
    stationarity and translation residual tolerances.
    """
    if not chain.periodic:
        raise PreconditionError("biased Gibbs construction requires a periodic chain")
    H = models.hamiltonian(phi, chain, sparse=True)
    if bias.conserved_op == "total_current":
        J = models.total_current(phi, spec, chain, sparse=True)
    else:
        J = sp.csr_matrix(bias.conserved_op)
    scale = max(1.0, sp.linalg.norm(H))
    comm_res = sp.linalg.norm(H @ J - J @ H)
    if comm_res > commute_tol * scale:
        raise PreconditionError(
            f"bias operator does not commute with H (residual {comm_res:.3e}); "
            "the biased ensemble would not be stationary"
        )
    basis = joint_spectrum(H, chain, bias=J)
    logw = -bias.beta * (basis.energies - bias.lam * basis.bias_values)
    logw -= logw.max()
    p = np.exp(logw)
    p /= p.sum()
    state = StationaryState(
        basis=basis,
        probs=p,
        meta={
            "beta": bias.beta,
            "lambda": bias.lam,
            "bias_commutator_residual": float(comm_res),
        },
    )
    stat = state.stationarity_residual(H)
    trans = state.translation_residual()
    if stat > RESIDUAL_TOL or trans > RESIDUAL_TOL:
        raise RuntimeError(
            f"constructed state violates residual tolerances: [rho,H] {stat:.2e}, "
            f"[rho,T] {trans:.2e}"
        )
    state.meta["stationarity_residual"] = stat
    state.meta["translation_residual"] = trans
    return state


@dataclass(frozen=True)
class NessReport:
    stationarity_residual: float
    translation_residual: float
    current_value: float
    symmetry_residual: float
    is_stationary: bool
    is_translation_invariant: bool
    is_ness: bool
    current_threshold: float

    def to_dict(self) -> dict:
        return {
            "stationarity_residual": self.stationarity_residual,
            "translation_residual": self.translation_residual,
            "current_value": self.current_value,
            "symmetry_residual": self.symmetry_residual,
            "is_stationary": self.is_stationary,
            "is_translation_invariant": self.is_translation_invariant,
            "is_ness": self.is_ness,
            "current_threshold": self.current_threshold,
        }


def verify_ness(state: StationaryState, phi: models.Interaction,
                spec: models.ChargeSpec, chain: ChainConfig,
                current_threshold: float = 1e-6) -> NessReport:
    """Check the three defining conditions plus the charge-symmetry residual.

    The state is classified as a steady current-carrying state iff both
    invariance residuals pass and the current expectation clears the
    threshold; the symmetry residual [rho, N_chain] decides whether the
    symmetric-branch momentum-derivative identity applies to it.
    """
    H = models.hamiltonian(phi, chain, sparse=True)
    stat = state.stationarity_residual(H)
    trans = state.translation_residual()
    j0 = models.current_local(phi, spec, chain)
    current = state.expect(j0)
    if abs(current.imag) > 1e-10:
        raise RuntimeError(f"current expectation came out complex: {current}")
    N_tot = models.charge_sparse(spec, (0, chain.n_sites - 1), chain)
    sym = state.commutant_residual(N_tot)
    is_stationary = stat <= RESIDUAL_TOL
    is_trans = trans <= RESIDUAL_TOL
    is_ness = is_stationary and is_trans and abs(current.real) > current_threshold
    return NessReport(
        stationarity_residual=stat,
        translation_residual=trans,
        current_value=float(current.real),
        symmetry_residual=sym,
        is_stationary=is_stationary,
        is_translation_invariant=is_trans,
        is_ness=is_ness,
        current_threshold=current_threshold,
    )


def state_summary(state: StationaryState, report: NessReport | None = None) -> dict:
    """JSON-ready summary: sizes, bias, current, residuals and the spectrum."""
    doc = {
        "n_sites": state.chain.n_sites,
        "site_dim": state.chain.site_dim,
        "beta": state.meta.get("beta"),
        "lambda": state.meta.get("lambda"),
        "spectrum": [[e, k, p] for e, k, p in state.spectrum_rows()],
    }
    if report is not None:
        doc.update(report.to_dict())
    return doc
