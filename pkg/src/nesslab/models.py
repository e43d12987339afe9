"""Translation-invariant finite-range interactions and derived operators.

Builds the objects the bounds and sum rules are stated in terms of: window
Hamiltonians, window charges, the charge current at the origin, the energy
currents at a window boundary, the telescoped energy density, and the
interaction-dependent group-velocity constant.

Window intervals are given in signed coordinates (lo, hi) and mapped onto the
chain as arcs, so a periodic chain can host the conventional windows [-L, 0]
and [-M, M] centred at site 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, PreconditionError
from .operators import (
    ChainConfig,
    LocalOperator,
    arc_sites,
    commutator,
    embed,
    embed_sparse,
    extract_local,
    kron_le,
    operator_norm,
    product_operator,
    translate,
)

# single-site spin-1/2 and hard-core fermion matrices
PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=np.complex128)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=np.complex128)
SPIN_HALF = (PAULI_X / 2, PAULI_Y / 2, PAULI_Z / 2)
# occupation basis |0>, |1>; lowering maps |1> -> |0>
FERMION_LOWER = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=np.complex128)
FERMION_RAISE = FERMION_LOWER.conj().T
FERMION_NUMBER = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=np.complex128)


@dataclass(frozen=True)
class Interaction:
    """Finite-range translation-invariant interaction.

    ``terms`` holds one canonical representative per translation class: a
    strictly increasing offset tuple starting at 0 with diameter <= r, and a
    Hermitian matrix on those offsets (little-endian, offset 0 fastest).
    """

    site_dim: int
    r: int
    terms: tuple = field(repr=False)

    def __post_init__(self):
        if self.r < 1:
            raise ValueError(f"range must be a positive integer, got {self.r}")
        if self.site_dim < 2:
            raise ValueError("site_dim must be >= 2")
        seen = set()
        canon = []
        for offsets, mat in self.terms:
            offsets = tuple(int(o) for o in offsets)
            if not offsets or offsets[0] != 0:
                raise ValueError(f"offset set must be anchored at 0: {offsets}")
            if any(b <= a for a, b in zip(offsets, offsets[1:])):
                raise ValueError(f"offsets must be strictly increasing: {offsets}")
            if offsets[-1] > self.r:
                raise ValueError(
                    f"offset set {offsets} has diameter {offsets[-1]} > range {self.r}"
                )
            if offsets in seen:
                raise ValueError(f"duplicate canonical offset set {offsets}")
            seen.add(offsets)
            mat = np.ascontiguousarray(np.asarray(mat, dtype=np.complex128))
            want = self.site_dim ** len(offsets)
            if mat.shape != (want, want):
                raise ValueError(
                    f"term on {offsets} must be {want}x{want}, got {mat.shape}"
                )
            dev = np.linalg.norm(mat - mat.conj().T)
            if dev > 1e-12 * max(1.0, np.linalg.norm(mat)):
                raise ValueError(f"term on {offsets} is not Hermitian (dev {dev:.2e})")
            mat.flags.writeable = False
            canon.append((offsets, mat))
        object.__setattr__(self, "terms", tuple(canon))

    def max_diameter(self) -> int:
        """Largest diameter among terms that are actually nonzero."""
        diam = 0
        for offsets, mat in self.terms:
            if np.any(mat):
                diam = max(diam, offsets[-1])
        return diam

    def max_term_norm(self) -> float:
        norms = [operator_norm(mat) for _, mat in self.terms]
        return max(norms) if norms else 0.0


@dataclass(frozen=True)
class ChargeSpec:
    """Single-site charge n_0; n_x is its translate and N_window the arc sum."""

    n0: np.ndarray = field(repr=False)

    def __post_init__(self):
        n0 = np.ascontiguousarray(np.asarray(self.n0, dtype=np.complex128))
        if n0.ndim != 2 or n0.shape[0] != n0.shape[1]:
            raise ValueError("n0 must be a square matrix")
        dev = np.linalg.norm(n0 - n0.conj().T)
        if dev > 1e-12 * max(1.0, np.linalg.norm(n0)):
            raise ValueError(f"charge n0 is not Hermitian (dev {dev:.2e})")
        n0.flags.writeable = False
        object.__setattr__(self, "n0", n0)

    @property
    def site_dim(self) -> int:
        return self.n0.shape[0]


@dataclass(frozen=True)
class CurrentGeometry:
    """Window sizes for the current definition j_0 = i [N_[-L,0], H_[-M,M]].

    Requires L > M >= 2r and L - M >= 2r, the separations the boundary-current
    machinery needs.  The fit on a concrete chain (arc [-L, M] shorter than
    the ring, with an extra r sites of wrap clearance for correlation work)
    is checked separately.
    """

    L: int
    M: int
    r: int

    def __post_init__(self):
        if self.r < 1:
            raise GeometryError("range must be positive")
        if self.M < 2 * self.r:
            raise GeometryError(f"need M >= 2r, got M={self.M}, r={self.r}")
        if self.L <= self.M:
            raise GeometryError(f"need L > M, got L={self.L}, M={self.M}")
        if self.L - self.M < 2 * self.r:
            raise GeometryError(
                f"need L - M >= 2r, got L-M={self.L - self.M}, r={self.r}"
            )

    def validate_for_chain(self, chain: ChainConfig, wrap_clearance: bool = False) -> None:
        """Reject windows the chain cannot host.

        With ``wrap_clearance`` the stronger condition L + M + r < n_sites is
        enforced: the boundary energy currents at the right window edge must
        stay r sites clear of the charge window's wrapped left edge, else the
        spacelike-commutativity cancellations fail on the ring.
        """
        if self.L + self.M + 1 > chain.n_sites:
            raise GeometryError(
                f"arc [-{self.L}, {self.M}] needs {self.L + self.M + 1} sites, "
                f"chain has {chain.n_sites}"
            )
        if wrap_clearance and self.L + self.M + self.r >= chain.n_sites:
            raise GeometryError(
                f"correlation geometry needs L + M + r < n_sites, got "
                f"{self.L}+{self.M}+{self.r} on {chain.n_sites} sites"
            )


def build_xxz_model(lambda_aniso: float):
    """Spin-1/2 XXZ chain: bond term S1 S1 + S2 S2 + lambda S3 S3, charge S3."""
    s1, s2, s3 = SPIN_HALF
    bond = (
        kron_le([s1, s1]) + kron_le([s2, s2]) + lambda_aniso * kron_le([s3, s3])
    )
    phi = Interaction(site_dim=2, r=1, terms=(((0, 1), bond),))
    return phi, ChargeSpec(s3)


def build_xx_model():
    """XX chain, the lambda = 0 point of the XXZ family."""
    return build_xxz_model(0.0)


def build_fermion_model(t_hop: float, v) -> tuple:
    """Spinless fermions with nearest-neighbour hopping and density interactions.

    Terms are stored in their Jordan-Wigner spin image, which is string-free
    for nearest-neighbour hopping and for the diagonal density products; the
    builder verifies this against an explicit string-dressed construction.
    """
    v = [float(x) for x in v]
    r = max(1, len(v))
    hop = -t_hop * (kron_le([FERMION_LOWER, FERMION_RAISE])
                    + kron_le([FERMION_RAISE, FERMION_LOWER]))
    nn = kron_le([FERMION_NUMBER, FERMION_NUMBER])
    terms = [((0, 1), hop + (v[0] if v else 0.0) * nn)]
    for s in range(2, r + 1):
        coupling = v[s - 1]
        mat = coupling * kron_le([FERMION_NUMBER, FERMION_NUMBER])
        terms.append(((0, s), mat))

    # string-cancellation check on an open scratch chain
    n_check = r + 2
    chain = ChainConfig(n_check, 2, "open")

    def c_op(x: int) -> np.ndarray:
        mats = [PAULI_Z] * x + [FERMION_LOWER]
        return embed(product_operator(tuple(range(x + 1)), mats), chain)

    c0, c1 = c_op(0), c_op(1)
    n_ops = [c_op(x).conj().T @ c_op(x) for x in range(n_check)]
    dressed = -t_hop * (c1.conj().T @ c0 + c0.conj().T @ c1)
    if v:
        dressed = dressed + v[0] * n_ops[0] @ n_ops[1]
    assert np.linalg.norm(dressed - embed(LocalOperator((0, 1), terms[0][1]), chain)) < 1e-12, \
        "Jordan-Wigner string failed to cancel on the hopping term"
    for s in range(2, r + 1):
        dressed_s = v[s - 1] * n_ops[0] @ n_ops[s]
        assert np.linalg.norm(dressed_s - embed(LocalOperator((0, s), terms[s - 1][1]), chain)) < 1e-12

    phi = Interaction(site_dim=2, r=r, terms=tuple(terms))
    return phi, ChargeSpec(FERMION_NUMBER)


def build_random_interaction(r: int, site_dim: int, rng, scale: float = 1.0) -> Interaction:
    """Random Hermitian interaction of exact range r (on-site, bond and spanning terms)."""
    def herm(dim):
        a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        a = (a + a.conj().T) / 2
        return scale * a / max(1.0, operator_norm(a))

    terms = [((0,), herm(site_dim))]
    if r >= 2:
        terms.append(((0, 1), herm(site_dim**2)))
    # a spanning term of diameter exactly r keeps max_diameter() == r
    terms.append(((0, r), herm(site_dim**2)))
    return Interaction(site_dim=site_dim, r=r, terms=tuple(terms))


def _window_chain(length: int, site_dim: int) -> ChainConfig:
    if length < 2:
        raise ValueError("window chains need at least two sites")
    return ChainConfig(length, site_dim, "open", dim_cap=site_dim**length)


def _window_hamiltonian(phi: Interaction, length: int) -> np.ndarray:
    """H of an open window of the given length, in window coordinates 0..length-1."""
    d = phi.site_dim
    dim = d**length
    H = np.zeros((dim, dim), dtype=np.complex128)
    if length == 1:
        for offsets, mat in phi.terms:
            if offsets == (0,):
                H += mat
        return H
    chain = _window_chain(length, d)
    for offsets, mat in phi.terms:
        width = offsets[-1]
        for u in range(0, length - width):
            sites = tuple(o + u for o in offsets)
            H += embed(LocalOperator(sites, mat), chain)
    return H


def local_hamiltonian(phi: Interaction, window, chain: ChainConfig) -> np.ndarray:
    """H_window = sum of all interaction translates contained in the window.

    ``window`` is an inclusive interval (lo, hi) in signed coordinates.  On a
    periodic chain a window covering the whole ring includes the wrapped
    translates, so the result is the translation-invariant Hamiltonian.
    """
    lo, hi = int(window[0]), int(window[1])
    sites = arc_sites(lo, hi, chain)
    w = len(sites)
    if chain.periodic and w == chain.n_sites:
        return hamiltonian(phi, chain)
    local = _window_hamiltonian(phi, w)
    return embed(translate(LocalOperator(tuple(range(w)), local), lo, chain), chain)


def hamiltonian(phi: Interaction, chain: ChainConfig, sparse: bool = False):
    """Full-chain Hamiltonian; on a periodic chain every translate wraps in."""
    n = chain.n_sites
    if phi.site_dim != chain.site_dim:
        raise ValueError("interaction and chain site dimensions differ")
    pieces = []
    for offsets, mat in phi.terms:
        base = LocalOperator(offsets, mat)
        anchors = range(n) if chain.periodic else range(n - offsets[-1])
        for u in anchors:
            pieces.append(translate(base, u, chain))
    if sparse:
        D = chain.dim
        import scipy.sparse as sp

        H = sp.csr_matrix((D, D), dtype=np.complex128)
        for op in pieces:
            H = H + embed_sparse(op, chain)
        return H
    H = np.zeros((chain.dim, chain.dim), dtype=np.complex128)
    for op in pieces:
        H += embed(op, chain)
    return H


def window_hamiltonian_sparse(phi: Interaction, window, chain: ChainConfig):
    """Sparse H_window, summed translate by translate (proper sub-arc windows only)."""
    import scipy.sparse as sp

    lo, hi = int(window[0]), int(window[1])
    sites = arc_sites(lo, hi, chain)
    w = len(sites)
    if chain.periodic and w == chain.n_sites:
        return hamiltonian(phi, chain, sparse=True)
    H = sp.csr_matrix((chain.dim, chain.dim), dtype=np.complex128)
    for offsets, mat in phi.terms:
        width = offsets[-1]
        base = LocalOperator(offsets, mat)
        for u in range(0, w - width):
            H = H + embed_sparse(translate(base, lo + u, chain), chain)
    return H


def charge_operator(spec: ChargeSpec, window, chain: ChainConfig) -> np.ndarray:
    """N_window = sum of the single-site charge over the window arc."""
    lo, hi = int(window[0]), int(window[1])
    sites = arc_sites(lo, hi, chain)
    N = np.zeros((chain.dim, chain.dim), dtype=np.complex128)
    for x in sites:
        N += embed(LocalOperator((x,), spec.n0), chain)
    return N


def charge_sparse(spec: ChargeSpec, window, chain: ChainConfig):
    import scipy.sparse as sp

    lo, hi = int(window[0]), int(window[1])
    sites = arc_sites(lo, hi, chain)
    N = sp.csr_matrix((chain.dim, chain.dim), dtype=np.complex128)
    for x in sites:
        N = N + embed_sparse(LocalOperator((x,), spec.n0), chain)
    return N


def check_conservation(phi: Interaction, spec: ChargeSpec, chain: ChainConfig,
                       max_window: int = 8) -> float:
    """Max over window sizes of ||[N_w, H_w]||.

    Both operators translate covariantly, so only the window size matters and
    each commutator is evaluated on the window factor alone.
    """
    d = phi.site_dim
    worst = 0.0
    top = min(max_window, chain.n_sites - 1 if chain.periodic else chain.n_sites)
    for w in range(1, top + 1):
        H = _window_hamiltonian(phi, w)
        if w == 1:
            N = spec.n0.copy()
        else:
            wchain = _window_chain(w, d)
            N = np.zeros_like(H)
            for x in range(w):
                N += embed(LocalOperator((x,), spec.n0), wchain)
        worst = max(worst, operator_norm(commutator(N, H)))
    return worst


def _accumulate_current(phi: Interaction, spec: ChargeSpec, M: int):
    """i [N_{z<=0 part}, H_[-M,M]] accumulated on the window [-M, r].

    Only interaction translates that meet the charge window contribute; for a
    conserving interaction everything inside cancels and the sum is supported
    on [1-r, r].
    """
    d = phi.site_dim
    r = phi.r
    lo, hi = -M, r
    width = hi - lo + 1
    wchain = _window_chain(width, d)
    acc = np.zeros((d**width, d**width), dtype=np.complex128)
    for offsets, mat in phi.terms:
        span = offsets[-1]
        for u in range(-M, M - span + 1):
            sites = tuple(o + u for o in offsets)
            charge_sites = [z for z in sites if z <= 0]
            if not charge_sites or sites[0] > hi:
                continue
            # local commutator on the term's own factor
            if len(sites) == 1:
                c = 1j * (spec.n0 @ mat - mat @ spec.n0)
            else:
                rel = tuple(s - sites[0] for s in sites)
                relchain = _window_chain(rel[-1] + 1, d)
                term = embed(LocalOperator(rel, mat), relchain)
                n_part = np.zeros_like(term)
                for z in charge_sites:
                    n_part += embed(LocalOperator((z - sites[0],), spec.n0), relchain)
                c = extract_local(1j * commutator(n_part, term),
                                  tuple(range(rel[-1] + 1)), relchain, verify_tol=None).coeffs
            # lift onto the accumulation window
            rel_width = (sites[-1] - sites[0]) + 1
            lifted = LocalOperator(tuple(range(sites[0] - lo, sites[0] - lo + rel_width)), c)
            acc += embed(lifted, wchain)
    return acc, wchain, lo


def current_operator(phi: Interaction, spec: ChargeSpec, geom: CurrentGeometry,
                     chain: ChainConfig) -> LocalOperator:
    """Charge current at the origin, j_0 = i [N_[-L,0], H_[-M,M]].

    The result is reduced to its true support [1-r, r] (chain coordinates mod
    n_sites); it does not depend on the admissible choice of L and M.
    """
    if geom.r != phi.r:
        raise GeometryError(f"geometry range {geom.r} != interaction range {phi.r}")
    if phi.site_dim != chain.site_dim:
        raise ValueError("interaction and chain site dimensions differ")
    geom.validate_for_chain(chain)
    r = phi.r
    acc, wchain, lo = _accumulate_current(phi, spec, geom.M)
    try:
        block = extract_local(acc, tuple(range((1 - r) - lo, r - lo + 1)), wchain,
                              verify_tol=1e-12)
    except PreconditionError as exc:
        raise PreconditionError(
            "current is not supported on [1-r, r]; the interaction does not "
            f"conserve the given charge ({exc})"
        ) from exc
    base = LocalOperator(tuple(range(2 * r)), block.coeffs)
    return translate(base, 1 - r, chain)


def current_local(phi: Interaction, spec: ChargeSpec, chain: ChainConfig) -> LocalOperator:
    """j_0 on the given chain, computed with a minimal admissible geometry.

    Usable on chains too short to host any admissible (L, M) pair directly;
    the current is a fixed local operator on [1-r, r] regardless.
    """
    r = phi.r
    geom = CurrentGeometry(L=4 * r + 1, M=2 * r, r=r)
    n_scratch = geom.L + geom.M + 1
    scratch = ChainConfig(n_scratch, phi.site_dim, "periodic",
                          dim_cap=max(phi.site_dim**n_scratch, 2**14))
    j = current_operator(phi, spec, geom, scratch)
    # re-anchor on the target chain
    width = 2 * r
    if width > chain.n_sites:
        raise GeometryError("chain shorter than the current's support")
    base_support = tuple(range(width))
    base = translate(j, r - 1, scratch)  # move support to [0, 2r-1]
    assert base.support == base_support
    return translate(LocalOperator(base_support, base.coeffs), 1 - r, chain)


def total_current(phi: Interaction, spec: ChargeSpec, chain: ChainConfig,
                  sparse: bool = False):
    """J_tot = sum over all sites of the translated current j_x."""
    if not chain.periodic:
        raise PreconditionError("total current is defined on the periodic chain")
    j0 = current_local(phi, spec, chain)
    if sparse:
        import scipy.sparse as sp

        J = sp.csr_matrix((chain.dim, chain.dim), dtype=np.complex128)
        for x in range(chain.n_sites):
            J = J + embed_sparse(translate(j0, x, chain), chain)
        return J
    J = np.zeros((chain.dim, chain.dim), dtype=np.complex128)
    for x in range(chain.n_sites):
        J += embed(translate(j0, x, chain), chain)
    return J


def energy_current_operators(phi: Interaction, M: int, chain: ChainConfig):
    """Boundary energy currents: i [H_[-M,M], H_[-M-r,M+r]] = J_plus - J_minus.

    J_plus collects the commutators with translates sticking out of the right
    end of the window (support [M-2r+1, M+r]), J_minus those at the left end
    (support [-M-r, -M+2r-1]); the two families exhaust all nonzero terms.
    """
    r = phi.r
    if M < 2 * r:
        raise GeometryError(f"need M >= 2r for separated boundary zones, got M={M}, r={r}")
    if 2 * (M + r) + 1 > chain.n_sites:
        raise GeometryError(
            f"window [-M-r, M+r] needs {2 * (M + r) + 1} sites, chain has {chain.n_sites}"
        )
    d = phi.site_dim

    def straddle_sum(side: str):
        if side == "right":
            lo, hi = M - 2 * r + 1, M + r
        else:
            lo, hi = -M - r, -M + 2 * r - 1
        width = hi - lo + 1
        wchain = _window_chain(width, d)
        acc = np.zeros((d**width, d**width), dtype=np.complex128)
        for offsets, mat in phi.terms:
            span = offsets[-1]
            for u in range(-M - r, M + r - span + 1):
                X = tuple(o + u for o in offsets)
                inside = X[0] >= -M and X[-1] <= M
                right = X[-1] > M
                left = X[0] < -M
                assert not (right and left), "boundary zones overlap; M too small"
                if inside or (side == "right" and not right) or (side == "left" and not left):
                    continue
                # commute with every window term it touches
                for offsets_y, mat_y in phi.terms:
                    span_y = offsets_y[-1]
                    for uy in range(-M, M - span_y + 1):
                        Y = tuple(o + uy for o in offsets_y)
                        if not set(Y) & set(X):
                            continue
                        joint = tuple(sorted(set(X) | set(Y)))
                        rel0 = joint[0]
                        relchain = _window_chain(joint[-1] - rel0 + 1, d)
                        GX = embed(LocalOperator(tuple(s - rel0 for s in X), mat), relchain)
                        GY = embed(LocalOperator(tuple(s - rel0 for s in Y), mat_y), relchain)
                        c = 1j * commutator(GY, GX)
                        cl = extract_local(c, tuple(range(joint[-1] - rel0 + 1)),
                                           relchain, verify_tol=None)
                        acc += embed(
                            LocalOperator(tuple(range(rel0 - lo, joint[-1] - lo + 1)), cl.coeffs),
                            wchain,
                        )
        base = LocalOperator(tuple(range(width)), acc)
        return translate(base, lo, chain)

    j_plus = straddle_sum("right")
    j_minus_raw = straddle_sum("left")
    j_minus = LocalOperator(j_minus_raw.support, -j_minus_raw.coeffs)
    return j_plus, j_minus


def energy_density(phi: Interaction, chain: ChainConfig) -> LocalOperator:
    """Telescoped local energy density h.

    Every canonical term class enters once, recentred so its window sits
    symmetrically about the origin; the window Hamiltonian then splits into
    translates of h plus boundary complements (see boundary_complements).
    """
    d = phi.site_dim
    r_eff = phi.max_diameter()
    lo = -(r_eff // 2)
    hi = r_eff - (r_eff // 2)
    width = max(hi - lo + 1, 1)
    if width == 1:
        h = np.zeros((d, d), dtype=np.complex128)
        for offsets, mat in phi.terms:
            if offsets == (0,):
                h = h + mat
        return translate(LocalOperator((0,), h), 0, chain)
    wchain = _window_chain(width, d)
    acc = np.zeros((d**width, d**width), dtype=np.complex128)
    for offsets, mat in phi.terms:
        span = offsets[-1]
        shift = -(span // 2) - lo  # class anchored at -(span//2), in window coords
        acc += embed(LocalOperator(tuple(o + shift for o in offsets), mat), wchain)
    base = LocalOperator(tuple(range(width)), acc)
    return translate(base, lo, chain)


def boundary_complements(phi: Interaction, M: int, chain: ChainConfig):
    """Complements C_{-M}, C_M with H_[-M,M] = sum_y tau_y(h) + C_{-M} + C_M.

    The translate sum runs over y in [-M + r_eff, M - r_eff] with r_eff the
    largest nonzero term diameter; the complements live on [-M, -M+2r] and
    [M-2r, M].
    """
    d = phi.site_dim
    r_eff = phi.max_diameter()
    if M < r_eff:
        raise GeometryError(f"need M >= interaction diameter, got M={M}")

    def gather(side: str):
        if side == "left":
            lo, hi = -M, -M + 2 * r_eff
        else:
            lo, hi = M - 2 * r_eff, M
        lo, hi = min(lo, hi), max(lo, hi)
        width = hi - lo + 1
        if width == 1:
            acc = np.zeros((d, d), dtype=np.complex128)
        else:
            wchain = _window_chain(width, d)
            acc = np.zeros((d**width, d**width), dtype=np.complex128)
        for offsets, mat in phi.terms:
            span = offsets[-1]
            covered_lo = -M + r_eff - (span // 2)
            covered_hi = M - r_eff - (span // 2)
            if side == "left":
                anchors = range(-M, min(covered_lo, M - span + 1))
            else:
                anchors = range(max(covered_hi + 1, -M), M - span + 1)
            for u in anchors:
                X = tuple(o + u for o in offsets)
                assert lo <= X[0] and X[-1] <= hi, "complement support claim violated"
                if width == 1:
                    acc = acc + mat
                else:
                    acc += embed(LocalOperator(tuple(s - lo for s in X), mat), wchain)
        base = LocalOperator(tuple(range(max(width, 1))), acc)
        return translate(base, lo, chain)

    return gather("left"), gather("right")


def lr_velocity(phi: Interaction) -> float:
    """Group-velocity constant V of the locality bound.

    V = sup_x sum over translates X containing x of |X| (N+1)^(2|X|) e^r ||Phi(X)||;
    translation invariance turns the sup into a count of |X| translates per class.
    """
    d = phi.site_dim
    total = 0.0
    for offsets, mat in phi.terms:
        k = len(offsets)
        total += k * k * float(d) ** (2 * k) * math.exp(phi.r) * operator_norm(mat)
    return total


# ---------------------------------------------------------------------------
# serialization: structured text, bit-exact round trip for binary64 values
# ---------------------------------------------------------------------------

def _matrix_to_pairs(mat: np.ndarray):
    return [[float(z.real), float(z.imag)] for z in mat.reshape(-1)]


def _matrix_from_pairs(pairs, dim: int) -> np.ndarray:
    flat = np.array([complex(re, im) for re, im in pairs], dtype=np.complex128)
    return flat.reshape(dim, dim)


def interaction_to_json(phi: Interaction) -> str:
    doc = {
        "schema": "nesslab.interaction/1",
        "site_dim": phi.site_dim,
        "range": phi.r,
        "terms": [
            {"offsets": list(offsets), "matrix": _matrix_to_pairs(mat)}
            for offsets, mat in phi.terms
        ],
    }
    return json.dumps(doc, indent=1)


def interaction_from_json(text: str) -> Interaction:
    doc = json.loads(text)
    if doc.get("schema") != "nesslab.interaction/1":
        raise ValueError(f"unknown interaction schema: {doc.get('schema')!r}")
    d = int(doc["site_dim"])
    terms = []
    for entry in doc["terms"]:
        offsets = tuple(int(o) for o in entry["offsets"])
        dim = d ** len(offsets)
        terms.append((offsets, _matrix_from_pairs(entry["matrix"], dim)))
    return Interaction(site_dim=d, r=int(doc["range"]), terms=tuple(terms))


def charge_to_json(spec: ChargeSpec) -> str:
    doc = {
        "schema": "nesslab.charge/1",
        "site_dim": spec.site_dim,
        "n0": _matrix_to_pairs(spec.n0),
    }
    return json.dumps(doc, indent=1)


def charge_from_json(text: str) -> ChargeSpec:
    doc = json.loads(text)
    if doc.get("schema") != "nesslab.charge/1":
        raise ValueError(f"unknown charge schema: {doc.get('schema')!r}")
    return ChargeSpec(_matrix_from_pairs(doc["n0"], int(doc["site_dim"])))
