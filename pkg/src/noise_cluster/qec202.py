"""Branching simulation of the two-data-qubit ZZ/XX detection code, the
combined classical-quantum infidelity distance, honesty/accuracy ratios, and
gain-factor optimization.

Qubits 1 and 2 are data, qubit 3 is the syndrome ancilla.  Each round: reset
the ancilla to |0>, apply the ZZ-check channel, projectively measure the
ancilla and branch; then apply the XX-check channel with the ancilla prepared
in the state just measured (not reset), measure and branch again.  Branches
track unnormalized conditional data states, whose traces are the syndrome
probabilities; all metric formulas are evaluated in that unnormalized form,
which is algebraically identical to the normalized one and free of
divide-by-zero hazards.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .approx import ApproxChannelSpec, approx_channel, to_standard_form
from .cluster import ClusterDecomposition
from .densecore import mat_sqrt_psd
from .superop import QState, SuperOp, unitary_superop

logger = logging.getLogger(__name__)

__all__ = [
    "BELL_LABELS",
    "TABLE_SYNDROMES",
    "SyndromeBranch",
    "BranchTable",
    "MetricsReport",
    "StabilizerBundle",
    "GainOptimizationResult",
    "bell_state",
    "run_rounds",
    "quantum_fidelity",
    "classical_fidelity",
    "infidelity_distance",
    "honesty_accuracy",
    "compute_metrics",
    "optimize_gain",
    "default_gain_grid",
    "n_threads",
]

BELL_LABELS = ("phi+", "phi-", "psi-", "psi+")

# per-round (ZZ, XX) syndrome pair of the ideal circuit for each input state
TABLE_SYNDROMES = {"phi+": "00", "phi-": "01", "psi-": "10", "psi+": "11"}

_SQRT2 = math.sqrt(2.0)
_BELL_VECTORS = {
    "phi+": np.array([1, 0, 0, 1], dtype=complex) / _SQRT2,
    "phi-": np.array([1, 0, 0, -1], dtype=complex) / _SQRT2,
    "psi-": np.array([0, 1, -1, 0], dtype=complex) / _SQRT2,
    "psi+": np.array([0, 1, 1, 0], dtype=complex) / _SQRT2,
}

PRUNE_THRESHOLD = 1e-14


def n_threads() -> int:
    """Worker cap from NOISE_CLUSTER_THREADS (default: cpu count)."""
    env = os.environ.get("NOISE_CLUSTER_THREADS", "").strip()
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def bell_state(label: str) -> QState:
    if label not in BELL_LABELS:
        raise ValueError(f"unknown Bell label {label!r}; use one of {BELL_LABELS}")
    return QState.pure(_BELL_VECTORS[label])


@dataclass
class SyndromeBranch:
    bitstring: str
    prob: float
    data_rho: np.ndarray  # normalized 4x4 conditional state


@dataclass
class BranchTable:
    """Syndrome-conditioned data-qubit states after ``rounds`` full rounds.

    ``states[i]`` is the unnormalized conditional state of syndrome bitstring
    ``format(i, '0{2*rounds}b')`` (chronological, first measurement first);
    its trace is the branch probability.
    """

    input_state: str
    rounds: int
    states: np.ndarray  # (4**rounds, 4, 4), unnormalized
    probs: np.ndarray  # (4**rounds,)
    discarded_mass: float = 0.0

    def bitstring(self, index: int) -> str:
        return format(index, f"0{2 * self.rounds}b")

    def branches(self, min_prob: float = PRUNE_THRESHOLD) -> dict:
        """Normalized view: bitstring -> SyndromeBranch, pruned below min_prob."""
        out = {}
        for i in np.flatnonzero(self.probs >= min_prob):
            p = float(self.probs[i])
            out[self.bitstring(i)] = SyndromeBranch(
                self.bitstring(i), p, self.states[i] / p
            )
        return out


def _require_3q_channel(c: SuperOp, name: str) -> None:
    if c.mat.shape != (64, 64):
        raise ValueError(f"{name} channel must be 64x64, got {c.mat.shape}")


def _apply_to_sys(states, mat_t, ancilla):
    """Embed data states with the ancilla in |a><a|, apply the channel, and
    return both measurement slices interleaved as children."""
    nb = states.shape[0]
    sys = np.zeros((nb, 8, 8), dtype=complex)
    sys[:, ancilla::2, ancilla::2] = states
    out = (sys.reshape(nb, 64) @ mat_t).reshape(nb, 8, 8)
    children = np.empty((2 * nb, 4, 4), dtype=complex)
    children[0::2] = out[:, 0::2, 0::2]
    children[1::2] = out[:, 1::2, 1::2]
    return children


def run_rounds(
    zz: SuperOp,
    xx: SuperOp,
    input_state: str,
    rounds: int,
    prune_threshold: float = PRUNE_THRESHOLD,
    keep_rounds: bool = False,
):
    """Branching simulation for one Bell input.

    Returns the final :class:`BranchTable`, or the list of per-round tables
    when ``keep_rounds`` is set.  Branches whose probability falls below
    ``prune_threshold`` are zeroed out with their mass accumulated in
    ``discarded_mass``.
    """
    _require_3q_channel(zz, "zz")
    _require_3q_channel(xx, "xx")
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    rho0 = bell_state(input_state).rho
    states = rho0[None, :, :].copy()
    zz_t = np.ascontiguousarray(zz.mat.T)
    xx_t = np.ascontiguousarray(xx.mat.T)
    discarded = 0.0
    history = []
    for _ in range(rounds):
        # ZZ check: ancilla reset to |0>
        children = _apply_to_sys(states, zz_t, 0)
        # XX check: ancilla carries the ZZ outcome (branch index parity)
        nb = children.shape[0]
        states = np.empty((2 * nb, 4, 4), dtype=complex)
        for a in (0, 1):
            grand = _apply_to_sys(children[a::2], xx_t, a)
            states[2 * a :: 4] = grand[0::2]
            states[2 * a + 1 :: 4] = grand[1::2]
        probs = np.einsum("bii->b", states).real
        dead = (probs < prune_threshold) & (probs != 0.0)
        if np.any(dead):
            discarded += float(probs[dead].sum())
            states[dead] = 0.0
        probs = np.where(probs < prune_threshold, 0.0, probs)
        if keep_rounds:
            history.append((states.copy(), probs))
    probs = np.einsum("bii->b", states).real
    probs = np.where(probs < prune_threshold, 0.0, probs)
    if keep_rounds:
        return [
            BranchTable(input_state, r + 1, s, p, discarded)
            for r, (s, p) in enumerate(history)
        ]
    return BranchTable(input_state, rounds, states, probs, discarded)


def quantum_fidelity(a: QState, b: QState) -> float:
    """Uhlmann fidelity [Tr sqrt(sqrt(a) b sqrt(a))]^2."""
    if a.rho.shape != b.rho.shape:
        raise ValueError("states have different dimensions")
    sa = mat_sqrt_psd(a.rho)
    inner = mat_sqrt_psd(sa @ b.rho @ sa)
    f = float(np.trace(inner).real) ** 2
    return min(max(f, 0.0), 1.0 + 1e-10)


def classical_fidelity(p, q) -> float:
    """Bhattacharyya fidelity [sum_x sqrt(p q)]^2 of two distributions."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("distributions have different shapes")
    if p.min(initial=0.0) < -1e-12 or q.min(initial=0.0) < -1e-12:
        raise ValueError("negative probability")
    for name, dist in (("p", p), ("q", q)):
        if abs(dist.sum() - 1.0) > 1e-8:
            raise ValueError(f"{name} sums to {dist.sum()}, not 1")
    return float(np.sqrt(np.clip(p, 0, None) * np.clip(q, 0, None)).sum()) ** 2


def _batched_sqrt_psd(states: np.ndarray) -> np.ndarray:
    herm = (states + states.conj().transpose(0, 2, 1)) / 2
    w, v = np.linalg.eigh(herm)
    w = np.sqrt(np.clip(w, 0.0, None))
    return (v * w[:, None, :]) @ v.conj().transpose(0, 2, 1)


def _fidelity_sum(sqrt_a: np.ndarray, states_b: np.ndarray) -> float:
    """sum_x Tr sqrt(sqrt(ra) rb sqrt(ra)) over unnormalized branch states."""
    m = sqrt_a @ states_b @ sqrt_a
    m = (m + m.conj().transpose(0, 2, 1)) / 2
    w = np.linalg.eigvalsh(m)
    return float(np.sqrt(np.clip(w, 0.0, None)).sum())


def _distance_arrays(sqrt_a, probs_a, states_b, probs_b) -> float:
    mask = (probs_a > 0.0) & (probs_b > 0.0)
    if not np.any(mask):
        return 1.0
    total = _fidelity_sum(sqrt_a[mask], states_b[mask])
    return min(max(1.0 - total * total, 0.0), 1.0)


def infidelity_distance(a: BranchTable, b: BranchTable) -> float:
    """One minus the squared joint classical-quantum fidelity over syndromes."""
    if a.rounds != b.rounds:
        raise ValueError(f"round mismatch: {a.rounds} vs {b.rounds}")
    if a.input_state != b.input_state:
        raise ValueError(f"input mismatch: {a.input_state} vs {b.input_state}")
    return _distance_arrays(_batched_sqrt_psd(a.states), a.probs, b.states, b.probs)


def honesty_accuracy(ideal: BranchTable, actual: BranchTable, approx: BranchTable):
    """(honesty, accuracy) ratios; zero denominators report +inf."""
    d_ia = infidelity_distance(ideal, actual)
    d_ip = infidelity_distance(ideal, approx)
    d_ap = infidelity_distance(actual, approx)
    return _ratios(d_ia, d_ip, d_ap)


def _ratios(d_ia: float, d_ip: float, d_ap: float):
    if d_ia == 0.0:
        logger.warning("honesty ratio has zero denominator; reporting +inf")
        honesty = math.inf
    else:
        honesty = d_ip / d_ia
    if d_ap == 0.0:
        accuracy = math.inf
    else:
        accuracy = d_ia / d_ap
    return honesty, accuracy


@dataclass
class MetricsReport:
    """Per-round, per-input infidelities plus honesty/accuracy and state means."""

    order: int
    gain: float
    rounds: int
    rows: list = field(default_factory=list)

    COLUMNS = (
        "round",
        "input",
        "d_ideal_actual",
        "d_ideal_approx",
        "d_actual_approx",
        "honesty",
        "accuracy",
        "honesty_from_mean_distances",
        "accuracy_from_mean_distances",
    )

    def row(self, rnd: int, input_state: str) -> dict:
        for r in self.rows:
            if r["round"] == rnd and r["input"] == input_state:
                return r
        raise KeyError((rnd, input_state))

    def mean_row(self, rnd: int) -> dict:
        return self.row(rnd, "mean")


def _metric_rows_for_round(rnd, per_state: dict) -> list:
    rows = []
    for label, (d_ia, d_ip, d_ap) in per_state.items():
        honesty, accuracy = _ratios(d_ia, d_ip, d_ap)
        rows.append(
            {
                "round": rnd,
                "input": label,
                "d_ideal_actual": d_ia,
                "d_ideal_approx": d_ip,
                "d_actual_approx": d_ap,
                "honesty": honesty,
                "accuracy": accuracy,
                "honesty_from_mean_distances": "",
                "accuracy_from_mean_distances": "",
            }
        )
    d = np.array([list(v) for v in per_state.values()], dtype=float)
    means = d.mean(axis=0)
    h_mean, a_mean = _ratios(*means)
    rows.append(
        {
            "round": rnd,
            "input": "mean",
            "d_ideal_actual": means[0],
            "d_ideal_approx": means[1],
            "d_actual_approx": means[2],
            "honesty": float(np.mean([r["honesty"] for r in rows])),
            "accuracy": float(np.mean([r["accuracy"] for r in rows])),
            "honesty_from_mean_distances": h_mean,
            "accuracy_from_mean_distances": a_mean,
        }
    )
    return rows


def compute_metrics(ideal, actual, approx, order: int, gain: float) -> MetricsReport:
    """Assemble the full report from per-round table lists keyed by input."""
    labels = list(ideal)
    rounds = len(ideal[labels[0]])
    report = MetricsReport(order=order, gain=gain, rounds=rounds)
    for rnd in range(1, rounds + 1):
        per_state = {}
        for label in labels:
            ti = ideal[label][rnd - 1]
            ta = actual[label][rnd - 1]
            tp = approx[label][rnd - 1]
            sa_i = _batched_sqrt_psd(ti.states)
            sa_a = _batched_sqrt_psd(ta.states)
            per_state[label] = (
                _distance_arrays(sa_i, ti.probs, ta.states, ta.probs),
                _distance_arrays(sa_i, ti.probs, tp.states, tp.probs),
                _distance_arrays(sa_a, ta.probs, tp.states, tp.probs),
            )
        report.rows.extend(_metric_rows_for_round(rnd, per_state))
    return report


@dataclass
class StabilizerBundle:
    """Everything needed to evaluate one stabilizer: the simulated channel,
    its rotating-frame ideal circuit unitary, and the decomposition of its
    effective noise generator."""

    actual: SuperOp
    ideal_u: np.ndarray
    decomposition: ClusterDecomposition


@dataclass
class GainScanPoint:
    gain: float
    honesty: dict
    accuracy: dict
    mean_honesty: float
    mean_accuracy: float
    min_honesty: float
    feasible: bool


@dataclass
class GainOptimizationResult:
    g_opt: float | None
    feasible: bool
    scan: list
    metrics: MetricsReport | None
    max_min_honesty: float
    order: int
    rounds: int


def default_gain_grid(start: float = 0.8, stop: float = 1.4, step: float = 0.01):
    count = int(round((stop - start) / step)) + 1
    return np.round(start + step * np.arange(count), 10)


class _GainEvaluator:
    """Caches the g-independent tables (ideal, actual) for one geometry."""

    def __init__(self, zz: StabilizerBundle, xx: StabilizerBundle, rounds: int):
        self.zz = zz
        self.xx = xx
        self.rounds = rounds
        self.zz_ideal = unitary_superop(zz.ideal_u)
        self.xx_ideal = unitary_superop(xx.ideal_u)
        self.ideal_tables = {}
        self.actual_tables = {}
        self._sqrt_ideal = {}
        self._sqrt_actual = {}
        for label in BELL_LABELS:
            ti = run_rounds(self.zz_ideal, self.xx_ideal, label, rounds)
            ta = run_rounds(zz.actual, xx.actual, label, rounds)
            self.ideal_tables[label] = ti
            self.actual_tables[label] = ta
            self._sqrt_ideal[label] = _batched_sqrt_psd(ti.states)
            self._sqrt_actual[label] = _batched_sqrt_psd(ta.states)
        self.d_ideal_actual = {
            label: _distance_arrays(
                self._sqrt_ideal[label],
                self.ideal_tables[label].probs,
                self.actual_tables[label].states,
                self.actual_tables[label].probs,
            )
            for label in BELL_LABELS
        }

    def approx_channels(self, order: int, gain: float):
        nz, _ = approx_channel(ApproxChannelSpec(self.zz.decomposition, order, gain))
        nx, _ = approx_channel(ApproxChannelSpec(self.xx.decomposition, order, gain))
        return (
            to_standard_form(nz, self.zz.ideal_u),
            to_standard_form(nx, self.xx.ideal_u),
        )

    def _state_point(self, label, vz, vx):
        tp = run_rounds(vz, vx, label, self.rounds)
        d_ia = self.d_ideal_actual[label]
        d_ip = _distance_arrays(
            self._sqrt_ideal[label], self.ideal_tables[label].probs, tp.states, tp.probs
        )
        d_ap = _distance_arrays(
            self._sqrt_actual[label],
            self.actual_tables[label].probs,
            tp.states,
            tp.probs,
        )
        return label, d_ia, d_ip, d_ap

    def evaluate(self, order: int, gain: float, workers: int = 1) -> GainScanPoint:
        vz, vx = self.approx_channels(order, gain)
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(
                    pool.map(lambda lb: self._state_point(lb, vz, vx), BELL_LABELS)
                )
        else:
            results = [self._state_point(lb, vz, vx) for lb in BELL_LABELS]
        honesty, accuracy = {}, {}
        for label, d_ia, d_ip, d_ap in results:
            honesty[label], accuracy[label] = _ratios(d_ia, d_ip, d_ap)
        min_h = min(honesty.values())
        return GainScanPoint(
            gain=float(gain),
            honesty=honesty,
            accuracy=accuracy,
            mean_honesty=float(np.mean(list(honesty.values()))),
            mean_accuracy=float(np.mean(list(accuracy.values()))),
            min_honesty=float(min_h),
            feasible=bool(min_h >= 1.0),
        )

    def full_metrics(self, order: int, gain: float) -> MetricsReport:
        vz, vx = self.approx_channels(order, gain)
        ideal, actual, approx = {}, {}, {}
        for label in BELL_LABELS:
            ideal[label] = run_rounds(
                self.zz_ideal, self.xx_ideal, label, self.rounds, keep_rounds=True
            )
            actual[label] = run_rounds(
                self.zz.actual, self.xx.actual, label, self.rounds, keep_rounds=True
            )
            approx[label] = run_rounds(vz, vx, label, self.rounds, keep_rounds=True)
        return compute_metrics(ideal, actual, approx, order, gain)


def optimize_gain(
    zz: StabilizerBundle,
    xx: StabilizerBundle,
    order: int,
    rounds: int,
    g_grid=None,
    refine_step: float = 1e-4,
    refine: bool | None = None,
    workers: int | None = None,
    evaluator: _GainEvaluator | None = None,
) -> GainOptimizationResult:
    """Grid search for the gain maximizing state-averaged accuracy subject to
    honesty >= 1 for every input state; ties break toward smaller gain.

    A step-``refine_step`` local refinement around the incumbent runs for the
    full-order approximation (where the optimum sits within a coarse step of
    1), or when ``refine`` is forced.
    """
    grid = default_gain_grid() if g_grid is None else np.asarray(g_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty gain grid")
    workers = n_threads() if workers is None else workers
    ev = evaluator or _GainEvaluator(zz, xx, rounds)

    scan = [ev.evaluate(order, g, workers) for g in grid]
    incumbent = _best_point(scan)

    n_qubits = zz.decomposition.n_qubits
    do_refine = refine if refine is not None else (order >= n_qubits)
    if incumbent is not None and do_refine and grid.size > 1:
        coarse = float(np.diff(np.sort(grid)).max())
        lo = max(incumbent.gain - coarse, float(grid.min()))
        hi = min(incumbent.gain + coarse, float(grid.max()))
        count = int(round((hi - lo) / refine_step))
        fine = np.round(lo + refine_step * np.arange(count + 1), 10)
        fine = [g for g in fine if not np.any(np.isclose(g, grid, atol=1e-12))]
        scan.extend(ev.evaluate(order, g, workers) for g in fine)
        scan.sort(key=lambda p: p.gain)
        incumbent = _best_point(scan)

    max_min_honesty = max(p.min_honesty for p in scan)
    if incumbent is None:
        logger.warning(
            "no honest gain in grid (max over grid of min-state honesty: %.6f)",
            max_min_honesty,
        )
        return GainOptimizationResult(
            None, False, scan, None, max_min_honesty, order, rounds
        )
    metrics = ev.full_metrics(order, incumbent.gain)
    return GainOptimizationResult(
        incumbent.gain, True, scan, metrics, max_min_honesty, order, rounds
    )


def _best_point(scan):
    best = None
    for point in sorted(scan, key=lambda p: p.gain):
        if point.feasible and (best is None or point.mean_accuracy > best.mean_accuracy):
            best = point
    return best
