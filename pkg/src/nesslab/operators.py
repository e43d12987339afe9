"""Finite-chain operator algebra: dense operators on a 1-d lattice of qudits.

Conventions fixed here and relied on by every other module:

* Sites are labelled 0 .. n_sites-1.  The global Hilbert space is the tensor
  product of one ``site_dim``-dimensional factor per site.
* Composite basis indices are little-endian in the site index: site 0 is the
  fastest-varying digit, i.e. global index = sum_x s_x * site_dim**x.
* A LocalOperator stores its coefficient matrix in the same convention
  restricted to its support: the smallest support site is the fastest digit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import PreconditionError

HERMITICITY_TOL = 1e-12
DEFAULT_DIM_CAP = 2**14

# dimension below which operator norms are computed by direct dense methods
_EXACT_NORM_DIM = 1024


@dataclass(frozen=True)
class ChainConfig:
    """Finite chain of qudits; fixes the Hilbert space everything acts on."""

    n_sites: int
    site_dim: int
    boundary: str = "periodic"
    dim_cap: int = DEFAULT_DIM_CAP

    def __post_init__(self):
        if self.n_sites < 2:
            raise ValueError(f"n_sites must be >= 2, got {self.n_sites}")
        if self.site_dim < 2:
            raise ValueError(f"site_dim must be >= 2, got {self.site_dim}")
        if self.boundary not in ("periodic", "open"):
            raise ValueError(f"boundary must be 'periodic' or 'open', got {self.boundary!r}")
        if self.site_dim**self.n_sites > self.dim_cap:
            raise PreconditionError(
                f"Hilbert-space dimension {self.site_dim}**{self.n_sites} exceeds cap {self.dim_cap}"
            )

    @property
    def dim(self) -> int:
        return self.site_dim**self.n_sites

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"


@dataclass(frozen=True)
class LocalOperator:
    """Operator on a tensor factor: ordered support sites plus coefficient matrix.

    ``coeffs`` is indexed little-endian in the support position (the smallest
    support site varies fastest).  If ``hermitian`` is set the matrix is
    verified to be Hermitian at construction.
    """

    support: tuple
    coeffs: np.ndarray = field(repr=False)
    hermitian: bool = False

    def __post_init__(self):
        supp = tuple(int(s) for s in self.support)
        object.__setattr__(self, "support", supp)
        if any(s < 0 for s in supp):
            raise ValueError(f"support sites must be nonnegative: {supp}")
        if any(b <= a for a, b in zip(supp, supp[1:])):
            raise ValueError(f"support must be strictly increasing: {supp}")
        c = np.ascontiguousarray(np.asarray(self.coeffs, dtype=np.complex128))
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError(f"coeffs must be a square matrix, got shape {c.shape}")
        c.flags.writeable = False  # values are shared freely across threads
        object.__setattr__(self, "coeffs", c)
        if self.hermitian:
            dev = np.linalg.norm(c - c.conj().T)
            if dev > HERMITICITY_TOL * max(1.0, np.linalg.norm(c)):
                raise ValueError(f"operator flagged hermitian deviates by {dev:.3e}")

    @property
    def n_support(self) -> int:
        return len(self.support)

    def width(self) -> int:
        """Number of sites in the support hull (diameter + 1)."""
        return self.support[-1] - self.support[0] + 1

    def norm(self) -> float:
        return operator_norm(self.coeffs)

    def validate_for(self, chain: ChainConfig) -> None:
        if self.support[-1] >= chain.n_sites:
            raise PreconditionError(
                f"support {self.support} does not fit a chain of {chain.n_sites} sites"
            )
        want = chain.site_dim ** len(self.support)
        if self.coeffs.shape[0] != want:
            raise ValueError(
                f"coeffs dimension {self.coeffs.shape[0]} != site_dim^|support| = {want}"
            )


def kron_le(mats) -> np.ndarray:
    """Tensor product of per-position factors, little-endian (position 0 fastest)."""
    out = np.asarray(mats[0], dtype=np.complex128)
    for m in mats[1:]:
        out = np.kron(np.asarray(m, dtype=np.complex128), out)
    return out


def product_operator(support, mats, hermitian: bool = False) -> LocalOperator:
    """LocalOperator equal to the product of single-site matrices on ``support``."""
    if len(support) != len(mats):
        raise ValueError("one matrix per support site required")
    return LocalOperator(tuple(support), kron_le(list(mats)), hermitian=hermitian)


def identity_local(support, site_dim: int) -> LocalOperator:
    return LocalOperator(tuple(support), np.eye(site_dim ** len(support)))


def _global_indices(support, chain: ChainConfig):
    """Index array g[a, b]: global basis index for support digits a, rest digits b."""
    d, L = chain.site_dim, chain.n_sites
    supp = list(support)
    rest = [x for x in range(L) if x not in supp]
    m = len(supp)

    def composite(sites):
        k = len(sites)
        idx = np.arange(d**k)
        digits = (idx[:, None] // d ** np.arange(k)) % d
        return digits @ (d ** np.array(sites, dtype=np.int64))

    ga = composite(supp)
    gb = composite(rest) if rest else np.zeros(1, dtype=np.int64)
    return ga[:, None] + gb[None, :]  # shape (d^m, d^(L-m))


def embed(op: LocalOperator, chain: ChainConfig) -> np.ndarray:
    """Embed a LocalOperator into the full chain: op tensor identity on the rest."""
    op.validate_for(chain)
    g = _global_indices(op.support, chain)
    D = chain.dim
    G = np.zeros((D, D), dtype=np.complex128)
    G[g[:, None, :], g[None, :, :]] = op.coeffs[:, :, None]
    return G


def embed_sparse(op: LocalOperator, chain: ChainConfig) -> sp.csr_matrix:
    """Sparse CSR variant of :func:`embed`; zero entries of coeffs are dropped."""
    op.validate_for(chain)
    g = _global_indices(op.support, chain)
    mS, mR = g.shape
    rows = np.broadcast_to(g[:, None, :], (mS, mS, mR)).ravel()
    cols = np.broadcast_to(g[None, :, :], (mS, mS, mR)).ravel()
    data = np.broadcast_to(op.coeffs[:, :, None], (mS, mS, mR)).ravel()
    keep = data != 0
    D = chain.dim
    return sp.coo_matrix((data[keep], (rows[keep], cols[keep])), shape=(D, D)).tocsr()


def _digit_permutation_matrix(perm, d: int) -> np.ndarray:
    """Permutation matrix relabelling digit positions: new digit j = old digit perm[j]."""
    m = len(perm)
    old = np.arange(d**m)
    old_digits = (old[:, None] // d ** np.arange(m)) % d
    new_idx = old_digits[:, perm] @ (d ** np.arange(m))
    P = np.zeros((d**m, d**m))
    P[new_idx, old] = 1.0
    return P


def translate(op: LocalOperator, x: int, chain: ChainConfig) -> LocalOperator:
    """Shift an operator by x sites (mod n_sites on a periodic chain)."""
    op.validate_for(chain)
    L = chain.n_sites
    if chain.periodic:
        raw = [(s + x) % L for s in op.support]
    else:
        raw = [s + x for s in op.support]
        if any(s < 0 or s >= L for s in raw):
            raise PreconditionError(
                f"translate by {x} leaves the open chain: {op.support} -> {raw}"
            )
    order = np.argsort(raw)  # raw entries are distinct
    new_support = tuple(raw[j] for j in order)
    if list(order) == list(range(len(raw))):
        coeffs = op.coeffs
    else:
        P = _digit_permutation_matrix(list(order), chain.site_dim)
        coeffs = P @ op.coeffs @ P.T
    return LocalOperator(new_support, coeffs, hermitian=op.hermitian)


def shift_index_map(chain: ChainConfig) -> np.ndarray:
    """Index map t of the one-site shift: T e_i = e_{t(i)} with T n_x T^dag = n_{x+1}."""
    if not chain.periodic:
        raise PreconditionError("shift unitary requires a periodic chain")
    d, L = chain.site_dim, chain.n_sites
    idx = np.arange(chain.dim)
    digits = (idx[:, None] // d ** np.arange(L)) % d
    # configuration pattern moves right by one site
    weights = d ** ((np.arange(L) + 1) % L)
    return digits @ weights


def shift_unitary(chain: ChainConfig, dense: bool = True):
    """One-site translation unitary T (conjugation by T implements tau_1)."""
    t = shift_index_map(chain)
    D = chain.dim
    if dense:
        T = np.zeros((D, D), dtype=np.complex128)
        T[t, np.arange(D)] = 1.0
        return T
    return sp.coo_matrix((np.ones(D), (t, np.arange(D))), shape=(D, D)).tocsr()


def translate_global(G: np.ndarray, x: int, chain: ChainConfig) -> np.ndarray:
    """Apply tau_x to a full-chain operator by basis-index permutation (no matmul)."""
    if not chain.periodic:
        raise PreconditionError("global translation requires a periodic chain")
    t = shift_index_map(chain)
    tx = np.arange(chain.dim)
    for _ in range(x % chain.n_sites):
        tx = t[tx]
    # (T^x G T^-x)[i, j] = G[tinv(i), tinv(j)]; tx is the forward map, so gather by it
    tinv = np.empty_like(tx)
    tinv[tx] = np.arange(chain.dim)
    return G[np.ix_(tinv, tinv)]


def apply_local(G: np.ndarray, op: LocalOperator, chain: ChainConfig, side: str = "left") -> np.ndarray:
    """Product embed(op) @ G (side='left') or G @ embed(op) (side='right').

    Contracts only over the support digits, so the cost is O(dim^2 * d^|support|)
    instead of a dense matrix product.
    """
    op.validate_for(chain)
    g = _global_indices(op.support, chain)
    mS, mR = g.shape
    D = chain.dim
    out = np.empty_like(G, dtype=np.complex128)
    if side == "left":
        rows = G[g.reshape(-1), :].reshape(mS, mR, D)
        prod = np.tensordot(op.coeffs, rows, axes=(1, 0))  # (mS, mR, D)
        out[g.reshape(-1), :] = prod.reshape(mS * mR, D)
    elif side == "right":
        cols = G[:, g.reshape(-1)].reshape(D, mS, mR)
        prod = np.einsum("dam,ab->dbm", cols, op.coeffs)
        out[:, g.reshape(-1)] = prod.reshape(D, mS * mR)
    else:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    return out


def extract_local(G: np.ndarray, support, chain: ChainConfig, verify_tol: float | None = 1e-12) -> LocalOperator:
    """Reduce a full-chain operator to a LocalOperator on ``support``.

    Requires G to act as identity outside the support; with ``verify_tol`` set,
    raises if the reduction does not reproduce G to that tolerance.
    """
    support = tuple(sorted(int(s) for s in support))
    g = _global_indices(support, chain)
    mR = g.shape[1]
    block = G[g[:, None, :], g[None, :, :]]  # (mS, mS, mR)
    coeffs = block.sum(axis=2) / mR
    op = LocalOperator(support, coeffs)
    if verify_tol is not None:
        dev = np.linalg.norm(embed(op, chain) - G)
        scale = max(1.0, np.linalg.norm(G))
        if dev > verify_tol * scale:
            raise PreconditionError(
                f"operator is not supported on {support}: residual {dev:.3e}"
            )
    return op


def commutator(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """AB - BA."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape != B.shape:
        raise ValueError(f"dimension mismatch: {A.shape} vs {B.shape}")
    return A @ B - B @ A


def embedded_diagonal(op: LocalOperator, chain: ChainConfig) -> np.ndarray:
    """Diagonal of embed(op) for an op with diagonal coefficient matrix."""
    g = _global_indices(op.support, chain)
    d = np.empty(chain.dim, dtype=np.complex128)
    vals = np.diag(op.coeffs)
    d[g.reshape(-1)] = np.repeat(vals, g.shape[1])
    return d


def commutator_with_local(G: np.ndarray, op: LocalOperator, chain: ChainConfig) -> np.ndarray:
    """[G, embed(op)] without forming the embedding.

    Diagonal local operators get an elementwise fast path; the general case
    costs two support-digit contractions.
    """
    if np.count_nonzero(op.coeffs - np.diag(np.diag(op.coeffs))) == 0:
        d = embedded_diagonal(op, chain)
        return G * (d[None, :] - d[:, None])
    return apply_local(G, op, chain, side="right") - apply_local(G, op, chain, side="left")


def _lanczos_abs_max(H: np.ndarray, tol: float, v0=None) -> tuple:
    """Largest |eigenvalue| of a Hermitian matrix by ARPACK, fixed start vector."""
    n = H.shape[0]
    if v0 is None:
        rng = np.random.default_rng(1905)
        v0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    vals, vecs = spla.eigsh(H, k=1, which="LM", v0=v0, tol=tol)
    return float(abs(vals[0])), vecs[:, 0]


def operator_norm(A, tol: float = 1e-9) -> float:
    """Operator 2-norm (largest singular value).

    Small matrices go through exact dense decompositions.  Large ones use a
    Lanczos iteration with a fixed starting vector so repeated runs agree;
    matrices whose Frobenius norm is already below 1e-11 are reported at that
    (upper-bound) value, where the distinction is below the noise floor.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"operator_norm expects a square matrix, got {A.shape}")
    n = A.shape[0]
    fro = float(np.linalg.norm(A))
    if fro == 0.0:
        return 0.0
    if n <= _EXACT_NORM_DIM:
        herm_dev = np.linalg.norm(A - A.conj().T)
        if herm_dev <= 1e-13 * fro:
            return float(np.max(np.abs(np.linalg.eigvalsh(A))))
        anti_dev = np.linalg.norm(A + A.conj().T)
        if anti_dev <= 1e-13 * fro:
            return float(np.max(np.abs(np.linalg.eigvalsh(1j * A))))
        return float(np.linalg.svd(A, compute_uv=False)[0])
    if fro <= 1e-11:
        return fro
    herm_dev = np.linalg.norm(A - A.conj().T)
    if herm_dev <= 1e-13 * fro:
        return _lanczos_abs_max(A, tol)[0]
    anti_dev = np.linalg.norm(A + A.conj().T)
    if anti_dev <= 1e-13 * fro:
        return _lanczos_abs_max(1j * A, tol)[0]
    rng = np.random.default_rng(1905)
    v0 = rng.standard_normal(n)
    s = spla.svds(A, k=1, which="LM", v0=v0, tol=tol, return_singular_vectors=False)
    return float(s[0])


def comm_norm(A: np.ndarray, B: np.ndarray) -> float:
    """Operator norm of the commutator [A, B]."""
    return operator_norm(commutator(A, B))


class MatrixUnitBasis:
    """Matrix units E(i, j) for one site and their products over a support."""

    def __init__(self, site_dim: int):
        if site_dim < 1:
            raise ValueError("site_dim must be positive")
        self.site_dim = site_dim

    def unit(self, i: int, j: int) -> np.ndarray:
        d = self.site_dim
        if not (0 <= i < d and 0 <= j < d):
            raise ValueError(f"unit indices out of range: ({i}, {j})")
        E = np.zeros((d, d), dtype=np.complex128)
        E[i, j] = 1.0
        return E

    def product_unit(self, i_digits, j_digits) -> np.ndarray:
        """Product prod_x E(i_x, j_x) over support positions, little-endian."""
        return kron_le([self.unit(i, j) for i, j in zip(i_digits, j_digits)])

    def decompose(self, op: LocalOperator) -> np.ndarray:
        """Coefficients C[{i_x}, {j_x}] of op in the product matrix-unit basis.

        Row index a encodes {i_x} little-endian, column index b encodes {j_x};
        every coefficient is bounded by the operator norm of op.
        """
        return op.coeffs.copy()

    def reconstruct(self, C: np.ndarray, support) -> LocalOperator:
        d = self.site_dim
        m = len(support)
        dim = d**m
        if C.shape != (dim, dim):
            raise ValueError(f"coefficient array must be {dim}x{dim}")
        out = np.zeros((dim, dim), dtype=np.complex128)
        pows = d ** np.arange(m)
        for a in range(dim):
            i_digits = (a // pows) % d
            for b in range(dim):
                if C[a, b] == 0:
                    continue
                j_digits = (b // pows) % d
                out += C[a, b] * self.product_unit(i_digits, j_digits)
        return LocalOperator(tuple(support), out)


def arc_sites(lo: int, hi: int, chain: ChainConfig) -> tuple:
    """Sites of the interval [lo, hi] mapped onto the chain.

    On a periodic chain the interval is reduced mod n_sites and must be shorter
    than the full ring unless it covers it exactly; on an open chain the bounds
    must already lie in range.
    """
    if hi < lo:
        raise PreconditionError(f"empty window [{lo}, {hi}]")
    length = hi - lo + 1
    L = chain.n_sites
    if chain.periodic:
        if length > L:
            raise PreconditionError(
                f"window [{lo}, {hi}] has {length} sites, chain only {L}"
            )
        return tuple((x % L) for x in range(lo, hi + 1))
    if lo < 0 or hi >= L:
        raise PreconditionError(f"window [{lo}, {hi}] outside open chain of {L} sites")
    return tuple(range(lo, hi + 1))
