"""Truncated generators and Trotterized approximate channels with a gain knob.

The k-th order approximate channel multiplies exponentials of all components
of subset size at most k, each amplified by the gain factor; the factor order
is subsets ascending by size, lexicographic within a size, composed
left-to-right as written (largest-subset factors act first on the state).
Subsystem stitching rebuilds a full-system approximation from overlapping
subsystem channels without double-counting shared components.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .cluster import (
    ClusterDecomposition,
    cluster_decompose_channel,
    recurrence_error_bound,
)
from .densecore import frobenius_norm, mat_exp, mat_log_principal
from .superop import SuperOp, embed, is_cptp, unitary_superop

__all__ = [
    "ApproxChannelSpec",
    "StitchInconsistencyError",
    "truncate_k",
    "approx_channel",
    "to_standard_form",
    "stitch_from_subsystems",
]


@dataclass
class ApproxChannelSpec:
    """Decomposition plus truncation order k and gain g (> 0)."""

    decomposition: ClusterDecomposition
    order: int
    gain: float = 1.0
    # optional per-size gains, indexed by subset size; scalar gain applies
    # wherever an entry is missing
    size_gains: dict | None = None

    def __post_init__(self):
        n = self.decomposition.n_qubits
        if not (1 <= self.order <= n):
            raise ValueError(f"order {self.order} outside 1..{n}")
        if not (math.isfinite(self.gain) and self.gain >= 0.0):
            raise ValueError(f"gain {self.gain} must be finite and nonnegative")

    def gain_for(self, subset) -> float:
        if self.size_gains and len(subset) in self.size_gains:
            return self.size_gains[len(subset)]
        return self.gain


class StitchInconsistencyError(ValueError):
    pass


def truncate_k(dec: ClusterDecomposition, k: int) -> SuperOp:
    """Sum of all components with subset size at most k."""
    if not (1 <= k <= dec.n_qubits):
        raise ValueError(f"k={k} outside 1..{dec.n_qubits}")
    dim = (dec.d**dec.n_qubits) ** 2
    mat = np.zeros((dim, dim), dtype=complex)
    for subset, op in dec.components.items():
        if len(subset) <= k:
            mat = mat + op.mat
    return SuperOp(dec.n_qubits, dec.d, mat, "generator")


def approx_channel(spec: ApproxChannelSpec):
    """Trotter product of exponentiated gained components up to order k.

    Returns (channel, cptp_report); an unphysical product is reported, never
    raised.
    """
    dec = spec.decomposition
    ordered = sorted(
        (s for s in dec.components if len(s) <= spec.order), key=lambda s: (len(s), s)
    )
    dim = (dec.d**dec.n_qubits) ** 2
    mat = np.eye(dim, dtype=complex)
    for subset in ordered:
        mat = mat @ mat_exp(spec.gain_for(subset) * dec.components[subset].mat)
    channel = SuperOp(dec.n_qubits, dec.d, mat, "channel")
    return channel, is_cptp(channel)


def to_standard_form(n_approx: SuperOp, ideal_u: np.ndarray) -> SuperOp:
    """Reattach the ideal unitary: V = N . U (inverse of the normal form)."""
    ideal_u = np.asarray(ideal_u, dtype=complex)
    if np.linalg.norm(ideal_u @ ideal_u.conj().T - np.eye(ideal_u.shape[0])) > 1e-10:
        raise ValueError("ideal_u is not unitary")
    u_hat = unitary_superop(ideal_u)
    return SuperOp(n_approx.n_qubits, n_approx.d, n_approx.mat @ u_hat.mat, "channel")


def stitch_from_subsystems(subchannels: dict, n: int, gain: float = 1.0):
    """Build a full-system approximate channel from subsystem noise channels.

    ``subchannels`` maps qubit subsets (1-based tuples) to near-identity
    normal-form channels living on those subsets.  Each is decomposed via the
    channel-based cluster expansion; components seen in several subsystem
    decompositions must agree within ten times the small-noise extraction
    bound (the first-listed is kept); the merged components are then
    Trotter-multiplied exactly as in :func:`approx_channel`.

    Returns (channel, cptp_report).
    """
    subchannels = {tuple(sorted(s)): c for s, c in subchannels.items()}
    covered = set(itertools.chain.from_iterable(subchannels))
    if covered != set(range(1, n + 1)):
        raise ValueError(f"subsets cover {sorted(covered)}, need all of 1..{n}")

    merged: dict = {}
    tolerances: dict = {}
    for subset, chan in sorted(subchannels.items(), key=lambda kv: (len(kv[0]), kv[0])):
        if chan.n_qubits != len(subset):
            raise ValueError(
                f"channel for subset {subset} acts on {chan.n_qubits} qubits"
            )
        eps = frobenius_norm(mat_log_principal(chan.mat))
        eps = min(max(eps, 1e-12), 0.99 * math.log(2.0))
        bound = recurrence_error_bound(eps)
        dec = cluster_decompose_channel(chan)
        for local_subset, comp in dec.components.items():
            global_subset = tuple(sorted(subset[q - 1] for q in local_subset))
            embedded = embed(
                SuperOp(len(subset), chan.d, comp.mat, "generator"), subset, n
            ).mat
            if global_subset in merged:
                diff = frobenius_norm(merged[global_subset] - embedded)
                allowed = 10.0 * max(bound, tolerances[global_subset]) + 1e-12
                if diff > allowed:
                    raise StitchInconsistencyError(
                        f"component {global_subset} disagrees between subsystem "
                        f"decompositions by {diff:.3e} (allowed {allowed:.3e})"
                    )
            else:
                merged[global_subset] = embedded
                tolerances[global_subset] = bound

    mat = np.eye(4**n, dtype=complex)
    for subset in sorted(merged, key=lambda s: (len(s), s)):
        mat = mat @ mat_exp(gain * merged[subset])
    channel = SuperOp(n, 2, mat, "channel")
    return channel, is_cptp(channel)
