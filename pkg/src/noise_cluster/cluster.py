"""Normal form, effective generator and the correlation-degree decomposition.

A noise channel is put in normal form by factoring out the ideal unitary; its
principal matrix logarithm is the effective generator.  The decomposition
splits that generator into components indexed by qubit subsets, each capturing
pure m-body correlation: the subset's reduced generator (maximally mixed
complement) minus all lower-order components, computed ascending in subset
size.  A channel-based variant extracts the same components from reduced
channels, accurate to the closed-form small-noise bound.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from .densecore import frobenius_norm, mat_log_principal, spectral_norm
from .superop import SuperOp, embed, superop_partial_trace, unitary_superop

logger = logging.getLogger(__name__)

__all__ = [
    "ClusterDecomposition",
    "normal_form",
    "effective_lindbladian",
    "max_real_eigenvalue",
    "cluster_decompose",
    "cluster_decompose_channel",
    "subsets_ascending",
    "pauli_coefficients",
    "pauli_support_violation",
    "pauli_reconstruct",
    "recurrence_error_bound",
    "recurrence_error_bound_loose",
]

# orthonormal single-qubit basis: identity and Paulis scaled by 1/sqrt(2)
_PAULIS = np.stack(
    [
        np.eye(2, dtype=complex),
        np.array([[0, 1], [1, 0]], dtype=complex),
        np.array([[0, -1j], [1j, 0]], dtype=complex),
        np.array([[1, 0], [0, -1]], dtype=complex),
    ]
) / math.sqrt(2.0)


def subsets_ascending(n: int):
    """All nonempty subsets of {1..n}, ascending size then lexicographic."""
    for m in range(1, n + 1):
        yield from itertools.combinations(range(1, n + 1), m)


@dataclass
class ClusterDecomposition:
    """Components of a generator keyed by qubit subset, stored embedded."""

    n_qubits: int
    d: int
    source: str  # "exact_generator" | "channel_based"
    components: dict  # {sorted tuple: SuperOp generator on the full space}

    def component(self, subset) -> SuperOp:
        return self.components[tuple(sorted(subset))]

    def total(self) -> SuperOp:
        mats = [c.mat for c in self.components.values()]
        return SuperOp(self.n_qubits, self.d, sum(mats), "generator")

    def to_json(self) -> dict:
        from .densecore import cmatrix_to_json

        return {
            "n_qubits": self.n_qubits,
            "d": self.d,
            "source": self.source,
            "components": [
                {"subset": list(subset), "mat": cmatrix_to_json(op.mat)}
                for subset, op in sorted(
                    self.components.items(), key=lambda kv: (len(kv[0]), kv[0])
                )
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ClusterDecomposition":
        from .densecore import cmatrix_from_json

        components = {
            tuple(entry["subset"]): SuperOp(
                obj["n_qubits"], obj["d"], cmatrix_from_json(entry["mat"]), "generator"
            )
            for entry in obj["components"]
        }
        return cls(obj["n_qubits"], obj["d"], obj["source"], components)


def normal_form(actual: SuperOp, ideal_u: np.ndarray) -> SuperOp:
    """Factor the ideal unitary out of a channel: N = V . U^{-1}."""
    ideal_u = np.asarray(ideal_u, dtype=complex)
    if np.linalg.norm(ideal_u @ ideal_u.conj().T - np.eye(ideal_u.shape[0])) > 1e-10:
        raise ValueError("ideal_u is not unitary")
    u_inv = unitary_superop(ideal_u.conj().T)
    return SuperOp(actual.n_qubits, actual.d, actual.mat @ u_inv.mat, "channel")


def max_real_eigenvalue(g: SuperOp) -> float:
    """Largest real part of the generator spectrum (physicality indicator)."""
    return float(np.linalg.eigvals(g.mat).real.max())


def effective_lindbladian(n: SuperOp, physicality_tol: float = 1e-10) -> SuperOp:
    """Principal logarithm of a near-identity channel, as a generator.

    Logs a warning when the spectrum has an eigenvalue with real part above
    ``physicality_tol`` (an unphysical generator); use
    :func:`max_real_eigenvalue` to inspect.
    """
    gen = SuperOp(n.n_qubits, n.d, mat_log_principal(n.mat), "generator")
    max_re = max_real_eigenvalue(gen)
    if max_re > physicality_tol:
        logger.warning(
            "effective generator has eigenvalue with real part %.3e > %.1e",
            max_re,
            physicality_tol,
        )
    return gen


def cluster_decompose(g: SuperOp) -> ClusterDecomposition:
    """Exact decomposition of a generator by correlation degree."""
    n = g.n_qubits
    components: dict = {}
    for subset in subsets_ascending(n):
        first = embed(superop_partial_trace(g, subset), subset, n)
        mat = first.mat.copy()
        for r in _proper_subsets(subset):
            mat -= components[r].mat
        components[subset] = SuperOp(n, g.d, mat, "generator")
    return ClusterDecomposition(n, g.d, "exact_generator", components)


def cluster_decompose_channel(n_chan: SuperOp) -> ClusterDecomposition:
    """Channel-based decomposition: component first terms are logarithms of
    reduced channels (inputs padded with the fully mixed complement)."""
    n = n_chan.n_qubits
    components: dict = {}
    for subset in subsets_ascending(n):
        reduced = superop_partial_trace(n_chan, subset)
        first = embed(
            SuperOp(len(subset), n_chan.d, mat_log_principal(reduced.mat), "generator"),
            subset,
            n,
        )
        mat = first.mat.copy()
        for r in _proper_subsets(subset):
            mat -= components[r].mat
        components[subset] = SuperOp(n, n_chan.d, mat, "generator")
    return ClusterDecomposition(n, n_chan.d, "channel_based", components)


def _proper_subsets(subset):
    for m in range(1, len(subset)):
        yield from itertools.combinations(subset, m)


@dataclass
class PauliCoefficients:
    """Expansion in the two-sided orthonormal Pauli basis.

    ``coeffs[a_1..a_n, a'_1..a'_n]`` multiplies (prod_j B^{a_j}) (x)
    (prod_j B^{a'_j})^*, with B^0 = I/sqrt(2) and B^{1,2,3} the Paulis over
    sqrt(2), so Tr(B^a B^b) = delta_ab.
    """

    n_qubits: int
    coeffs: np.ndarray


def pauli_coefficients(g: SuperOp) -> PauliCoefficients:
    """Expand a superoperator in the two-sided Pauli basis (d = 2 only)."""
    if g.d != 2:
        raise ValueError("Pauli expansion supports d = 2 only")
    n = g.n_qubits
    t = g.mat.reshape((2,) * (4 * n))
    # row axes: ket 0..n-1, bra n..2n-1; col axes: ket 2n..3n-1, bra 3n..4n-1
    operands = [t, list(range(4 * n))]
    out = []
    label = 4 * n
    for j in range(n):  # ket-copy slot for qubit j: rows j, cols 2n+j
        operands.extend([_PAULIS.conj(), [label, j, 2 * n + j]])
        out.append(label)
        label += 1
    for j in range(n):  # bra-copy slot: basis element is B*, conj -> B
        operands.extend([_PAULIS, [label, n + j, 3 * n + j]])
        out.append(label)
        label += 1
    coeffs = np.einsum(*operands, out)
    return PauliCoefficients(n, coeffs)


def pauli_reconstruct(c: PauliCoefficients) -> np.ndarray:
    n = c.n_qubits
    operands = [c.coeffs, list(range(4 * n, 6 * n))]
    row_ket, row_bra, col_ket, col_bra = [], [], [], []
    label = 0
    for j in range(n):
        operands.extend([_PAULIS, [4 * n + j, label, label + 1]])
        row_ket.append(label)
        col_ket.append(label + 1)
        label += 2
    for j in range(n):
        operands.extend([_PAULIS.conj(), [5 * n + j, label, label + 1]])
        row_bra.append(label)
        col_bra.append(label + 1)
        label += 2
    t = np.einsum(*operands, row_ket + row_bra + col_ket + col_bra)
    dim2 = 4**n
    return t.reshape(dim2, dim2)


def pauli_support_violation(c: PauliCoefficients, subset) -> float:
    """Largest |coefficient| violating the pure-correlation support pattern.

    Allowed for a component on ``subset``: the all-identity term, and terms
    with identity (both factors) outside the subset and non-identity (in at
    least one factor) on every subset qubit.
    """
    n = c.n_qubits
    subset = tuple(sorted(subset))
    inside = np.array([q in subset for q in range(1, n + 1)])
    idx = np.indices((4,) * (2 * n)).reshape(2 * n, -1)
    alpha, alpha_p = idx[:n], idx[n:]
    flat = np.abs(c.coeffs.reshape(-1))
    all_identity = np.all(alpha == 0, axis=0) & np.all(alpha_p == 0, axis=0)
    outside_ok = np.all((alpha[~inside] == 0) & (alpha_p[~inside] == 0), axis=0)
    inside_ok = np.all((alpha[inside] + alpha_p[inside]) != 0, axis=0)
    allowed = all_identity | (outside_ok & inside_ok)
    if np.all(allowed):
        return 0.0
    return float(flat[~allowed].max())


def recurrence_error_bound(eps: float) -> float:
    """Closed-form bound on the channel-path first-term error at noise size eps."""
    if not (0.0 < eps < math.log(2.0)):
        raise ValueError(f"eps={eps} outside (0, ln 2)")
    if eps >= 0.5:
        logger.warning("eps=%.3f is outside the small-noise regime eps < 1/2", eps)
    e = math.exp(eps)
    return math.log(math.exp(1.0 - e) / (2.0 - e)) + e - 1.0 - eps


def recurrence_error_bound_loose(eps: float) -> float:
    """Looser polynomial form of the same bound (must dominate the closed form)."""
    if not (0.0 < eps < math.log(2.0)):
        raise ValueError(f"eps={eps} outside (0, ln 2)")
    delta = eps + math.e * eps**2 / 2.0
    if delta >= 1.0:
        return math.inf
    return delta**2 / (2.0 * (1.0 - delta)) + math.e * eps**2 / 2.0


def component_norms(dec: ClusterDecomposition, which: str = "fro") -> dict:
    """Frobenius or spectral norms of every component (embedded form)."""
    norm = frobenius_norm if which == "fro" else spectral_norm
    return {s: norm(op.mat) for s, op in dec.components.items()}
