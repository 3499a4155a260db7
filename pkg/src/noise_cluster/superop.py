"""Superoperator representation of states, channels and Lindbladian generators.

Vectorization is row-stacking: |rho>> = sum_ij rho_ij |e_i> (x) |e_j>, so the
map rho -> A rho B becomes the matrix A (x) B^T acting on vec(rho).  Qubit 1 is
always the most-significant tensor factor, and the doubled space is ordered
(all ket factors)(all bra factors).  Serialized superoperators carry a
``convention`` tag so column-stacked inputs are rejected loudly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .densecore import cmatrix_from_json, cmatrix_to_json, frobenius_norm

__all__ = [
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "SIGMA_PLUS",
    "SIGMA_MINUS",
    "QState",
    "SuperOp",
    "LindbladModel",
    "CptpReport",
    "vectorize",
    "devectorize",
    "lindbladian_superop",
    "apply_channel",
    "choi_matrix",
    "is_cptp",
    "superop_partial_trace",
    "embed",
    "embed_operator",
    "ptrace_density",
    "unitary_superop",
    "identity_superop",
]

VECTORIZATION = "row-stacking"

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=complex)  # |1><0|
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|


def _n_qubits_of(dim: int, d: int) -> int:
    n = round(np.log(dim) / np.log(d))
    if d**n != dim:
        raise ValueError(f"dimension {dim} is not a power of d={d}")
    return n


@dataclass
class QState:
    """Density matrix of ``n_qubits`` d-level systems (qubit 1 most significant)."""

    n_qubits: int
    d: int
    rho: np.ndarray

    @classmethod
    def from_rho(cls, rho, d: int = 2, check: bool = True) -> "QState":
        rho = np.asarray(rho, dtype=complex)
        state = cls(_n_qubits_of(rho.shape[0], d), d, rho)
        if check:
            state.validate()
        return state

    @classmethod
    def pure(cls, psi, d: int = 2) -> "QState":
        psi = np.asarray(psi, dtype=complex).ravel()
        psi = psi / np.linalg.norm(psi)
        return cls.from_rho(np.outer(psi, psi.conj()), d=d)

    def validate(self, tol: float = 1e-10) -> "QState":
        if self.rho.shape != (self.dim, self.dim):
            raise ValueError("rho dimension does not match n_qubits/d")
        if frobenius_norm(self.rho - self.rho.conj().T) > tol:
            raise ValueError("state is not Hermitian")
        if abs(np.trace(self.rho) - 1.0) > tol:
            raise ValueError(f"state trace {np.trace(self.rho)} is not 1")
        w = np.linalg.eigvalsh((self.rho + self.rho.conj().T) / 2)
        if w.min() < -tol:
            raise ValueError(f"state has negative eigenvalue {w.min()}")
        return self

    @property
    def dim(self) -> int:
        return self.d**self.n_qubits


@dataclass
class SuperOp:
    """Dense superoperator on the doubled space, tagged channel or generator."""

    n_qubits: int
    d: int
    mat: np.ndarray
    kind: str  # "channel" | "generator"

    @classmethod
    def channel(cls, mat, n_qubits=None, d: int = 2, check: bool = True) -> "SuperOp":
        return cls._make(mat, "channel", n_qubits, d, check)

    @classmethod
    def generator(cls, mat, n_qubits=None, d: int = 2, check: bool = True) -> "SuperOp":
        return cls._make(mat, "generator", n_qubits, d, check)

    @classmethod
    def _make(cls, mat, kind, n_qubits, d, check) -> "SuperOp":
        mat = np.asarray(mat, dtype=complex)
        if n_qubits is None:
            n_qubits = _n_qubits_of(mat.shape[0], d * d)
        op = cls(n_qubits, d, mat, kind)
        if check:
            op.validate()
        return op

    @property
    def hilbert_dim(self) -> int:
        return self.d**self.n_qubits

    def validate(self, tol: float = 1e-8) -> "SuperOp":
        dim = self.hilbert_dim**2
        if self.mat.shape != (dim, dim):
            raise ValueError(
                f"superoperator shape {self.mat.shape} does not match "
                f"{self.n_qubits} qubits of dimension {self.d}"
            )
        resid = trace_preservation_residual(self)
        if resid > tol:
            cond = "trace-preserving" if self.kind == "channel" else "traceless"
            raise ValueError(f"{self.kind} is not {cond}: residual {resid:.3e}")
        return self

    def to_json(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "d": self.d,
            "kind": self.kind,
            "convention": VECTORIZATION,
            "mat": cmatrix_to_json(self.mat),
        }

    @classmethod
    def from_json(cls, obj: dict, check: bool = True) -> "SuperOp":
        convention = obj.get("convention")
        if convention != VECTORIZATION:
            raise ValueError(
                f"refusing superoperator with convention {convention!r}; "
                f"this package uses {VECTORIZATION!r}"
            )
        return cls._make(
            cmatrix_from_json(obj["mat"]), obj["kind"], obj["n_qubits"], obj["d"], check
        )


@dataclass
class LindbladModel:
    """Hamiltonian plus jump operators with nonnegative rates (units 1/s)."""

    hamiltonian: np.ndarray
    jumps: list = field(default_factory=list)  # [(operator, rate), ...]

    def validate(self, tol: float = 1e-10) -> "LindbladModel":
        h = np.asarray(self.hamiltonian, dtype=complex)
        if frobenius_norm(h - h.conj().T) > tol * max(1.0, frobenius_norm(h)):
            raise ValueError("Hamiltonian is not Hermitian")
        for _, rate in self.jumps:
            if rate < 0:
                raise ValueError(f"negative jump rate {rate}")
        return self


@dataclass
class CptpReport:
    min_choi_eigenvalue: float
    tp_residual: float
    tol: float
    passes: bool

    def to_json(self) -> dict:
        return {
            "min_choi_eigenvalue": self.min_choi_eigenvalue,
            "tp_residual": self.tp_residual,
            "tol": self.tol,
            "passes": self.passes,
        }


def vectorize(state) -> np.ndarray:
    """Row-stack a density matrix (or QState) into |rho>>."""
    rho = state.rho if isinstance(state, QState) else np.asarray(state, dtype=complex)
    return rho.reshape(-1)


def devectorize(v, d: int = 2) -> QState:
    """Inverse of :func:`vectorize`; no renormalization is applied."""
    v = np.asarray(v, dtype=complex).ravel()
    dim = round(np.sqrt(v.size))
    if dim * dim != v.size:
        raise ValueError(f"vector length {v.size} is not a perfect square")
    return QState(_n_qubits_of(dim, d), d, v.reshape(dim, dim))


def _tp_row(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=complex).reshape(-1)


def trace_preservation_residual(op: SuperOp) -> float:
    """Norm of <<I| mat - <<I| (channel) or <<I| mat (generator)."""
    e = _tp_row(op.hilbert_dim)
    row = e @ op.mat
    if op.kind == "channel":
        row = row - e
    return float(np.linalg.norm(row))


def dissipator_superop(a, rate: float = 1.0) -> np.ndarray:
    """Superoperator of rate * (A rho A^dag - 1/2 {A^dag A, rho})."""
    a = np.asarray(a, dtype=complex)
    eye = np.eye(a.shape[0], dtype=complex)
    ada = a.conj().T @ a
    return rate * (
        np.kron(a, a.conj()) - 0.5 * np.kron(ada, eye) - 0.5 * np.kron(eye, ada.T)
    )


def lindbladian_superop(model: LindbladModel, d: int = 2) -> SuperOp:
    """Superoperator of the Lindblad generator (Hamiltonian plus dissipators)."""
    model.validate()
    h = np.asarray(model.hamiltonian, dtype=complex)
    eye = np.eye(h.shape[0], dtype=complex)
    mat = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for op, rate in model.jumps:
        mat = mat + dissipator_superop(op, rate)
    return SuperOp.generator(mat, d=d)


def hamiltonian_superop(h) -> np.ndarray:
    """Raw matrix of -i(H (x) I - I (x) H^T)."""
    h = np.asarray(h, dtype=complex)
    eye = np.eye(h.shape[0], dtype=complex)
    return -1j * (np.kron(h, eye) - np.kron(eye, h.T))


def unitary_superop(u, kind: str = "channel", d: int = 2) -> SuperOp:
    """Superoperator of rho -> U rho U^dag."""
    u = np.asarray(u, dtype=complex)
    return SuperOp._make(np.kron(u, u.conj()), kind, None, d, check=False)


def identity_superop(n_qubits: int, d: int = 2) -> SuperOp:
    dim = (d**n_qubits) ** 2
    return SuperOp(n_qubits, d, np.eye(dim, dtype=complex), "channel")


def apply_channel(c: SuperOp, s: QState) -> QState:
    """Apply a channel to a state; the output is not renormalized."""
    if c.hilbert_dim != s.rho.shape[0]:
        raise ValueError(
            f"channel acts on dimension {c.hilbert_dim}, state has {s.rho.shape[0]}"
        )
    return devectorize(c.mat @ vectorize(s), d=s.d)


def choi_matrix(c: SuperOp) -> np.ndarray:
    """Choi matrix sum_ij |i><j| (x) N(|i><j|) via index reshuffle."""
    dim = c.hilbert_dim
    t = c.mat.reshape(dim, dim, dim, dim)  # [out_ket, out_bra, in_ket, in_bra]
    return t.transpose(2, 0, 3, 1).reshape(dim * dim, dim * dim)


def is_cptp(c: SuperOp, tol: float = 1e-8) -> CptpReport:
    """Check complete positivity and trace preservation; never raises."""
    choi = choi_matrix(c)
    w = np.linalg.eigvalsh((choi + choi.conj().T) / 2)
    e = _tp_row(c.hilbert_dim)
    tp = float(np.linalg.norm(e @ c.mat - e))
    min_eig = float(w.min())
    return CptpReport(min_eig, tp, tol, bool(min_eig >= -tol and tp <= tol))


def _subset_complement(keep, n: int) -> list:
    keep = tuple(keep)
    if len(keep) == 0:
        raise ValueError("subset must be nonempty")
    if len(set(keep)) != len(keep):
        raise ValueError(f"subset {keep} has repeated qubits")
    if any(q < 1 or q > n for q in keep):
        raise ValueError(f"subset {keep} out of range for {n} qubits")
    return [q for q in range(1, n + 1) if q not in keep]


def superop_partial_trace(g: SuperOp, keep) -> SuperOp:
    """Reduce a superoperator to the qubits in ``keep``.

    This is the superoperator of the map rho_S -> Tr_comp[G(rho_S (x)
    fully-mixed complement)]: the input is padded with the maximally mixed
    state on the traced qubits and the output is partial-traced over them,
    which on the matrix amounts to tying each traced qubit's ket factor to its
    bra factor on both the row and the column side and dividing by d^|comp|.
    The round trip with :func:`embed` is exact, a generator with support only
    on ``keep`` reduces to itself, and a generator reduces to zero on any
    subset disjoint from its support (trace condition).
    """
    keep = tuple(sorted(keep))
    n, d = g.n_qubits, g.d
    others = _subset_complement(keep, n)
    t = g.mat.reshape((d,) * (4 * n))
    # axis labels: rows = ket 0..n-1, bra n..2n-1; cols = ket 2n.., bra 3n..
    labels = list(range(4 * n))
    for q in others:
        j = q - 1
        labels[n + j] = labels[j]  # output side: trace ket against bra
        labels[3 * n + j] = labels[2 * n + j]  # input side: mixed-state pad
    out_labels = (
        [labels[q - 1] for q in keep]
        + [labels[n + q - 1] for q in keep]
        + [labels[2 * n + q - 1] for q in keep]
        + [labels[3 * n + q - 1] for q in keep]
    )
    reduced = np.einsum(t, labels, out_labels)
    m = len(keep)
    reduced = reduced.reshape((d**m) ** 2, (d**m) ** 2) / d ** len(others)
    return SuperOp(m, d, reduced, g.kind)


def embed(g: SuperOp, qubits, n: int) -> SuperOp:
    """Tensor the identity superoperator on the complement of ``qubits``.

    ``qubits`` must be sorted ascending; g's factors map onto those labels.
    """
    qubits = tuple(qubits)
    if list(qubits) != sorted(qubits):
        raise ValueError(f"subset {qubits} must be sorted ascending")
    others = _subset_complement(qubits, n)
    d, m = g.d, len(qubits)
    if g.n_qubits != m:
        raise ValueError(f"superoperator on {g.n_qubits} qubits, subset {qubits}")
    t = g.mat.reshape((d,) * (4 * m))
    # fresh labels for g's axes, paired delta labels for each untouched qubit
    g_labels = list(range(4 * m))
    next_label = 4 * m
    eye = np.eye(d)
    operands = [t, g_labels]
    delta = {}
    for q in others:
        ket = (next_label, next_label + 1)
        bra = (next_label + 2, next_label + 3)
        next_label += 4
        operands.extend([eye, list(ket), eye, list(bra)])
        delta[q] = (ket, bra)
    pos = {q: i for i, q in enumerate(qubits)}
    row_ket, row_bra, col_ket, col_bra = [], [], [], []
    for q in range(1, n + 1):
        if q in pos:
            i = pos[q]
            row_ket.append(g_labels[i])
            row_bra.append(g_labels[m + i])
            col_ket.append(g_labels[2 * m + i])
            col_bra.append(g_labels[3 * m + i])
        else:
            (k0, k1), (b0, b1) = delta[q]
            row_ket.append(k0)
            row_bra.append(b0)
            col_ket.append(k1)
            col_bra.append(b1)
    out = np.einsum(*operands, row_ket + row_bra + col_ket + col_bra)
    dim2 = (d**n) ** 2
    return SuperOp(n, d, out.reshape(dim2, dim2), g.kind)


def embed_operator(op, qubits, n: int) -> np.ndarray:
    """Embed a Hilbert-space operator on ``qubits`` (given order) into n qubits."""
    qubits = tuple(qubits)
    k = len(qubits)
    if len(set(qubits)) != k or any(q < 1 or q > n for q in qubits):
        raise ValueError(f"bad qubit subset {qubits} for n={n}")
    op = np.asarray(op, dtype=complex)
    if op.shape != (2**k, 2**k):
        raise ValueError(f"operator shape {op.shape} does not match {k} qubits")
    others = [q for q in range(1, n + 1) if q not in qubits]
    t = np.kron(op, np.eye(2 ** (n - k))).reshape((2,) * (2 * n))
    src_order = list(qubits) + others
    perm = [src_order.index(q) for q in range(1, n + 1)]
    perm = perm + [p + n for p in perm]
    return t.transpose(perm).reshape(2**n, 2**n)


def ptrace_density(rho, keep, n: int, d: int = 2) -> np.ndarray:
    """Ordinary partial trace of a density matrix, keeping sorted ``keep``."""
    keep = tuple(sorted(keep))
    others = _subset_complement(keep, n)
    t = np.asarray(rho, dtype=complex).reshape((d,) * (2 * n))
    labels = list(range(2 * n))
    for q in others:
        labels[n + q - 1] = labels[q - 1]
    out_labels = [labels[q - 1] for q in keep] + [labels[n + q - 1] for q in keep]
    out = np.einsum(t, labels, out_labels)
    m = len(keep)
    return out.reshape(d**m, d**m)


