"""Physical model of the qubit processor: static Hamiltonian, always-on
transverse couplings, drive pulses with Gaussian / Gaussian-square envelopes,
and timed pulse schedules.

Conventions: qubit labels are 1-based with qubit 1 the most-significant tensor
factor.  The excited state |1> sits at +omega/2, so a drive at the qubit
frequency is resonant in the rotating frame and relaxation drains |1> to |0>.
Angular quantities (drive amplitude, freq, phase) are rad/s and rad; the
config stores ordinary frequencies in Hz and times in seconds.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .superop import SIGMA_PLUS, embed_operator

__all__ = [
    "DeviceConfig",
    "PulseEnvelope",
    "DrivePulse",
    "PulseSchedule",
    "envelope_value",
    "hamiltonian_at",
    "static_hamiltonian",
    "bare_energies",
]

GEOMETRIES = ("linear", "triangle")

# Table-level defaults for the 3-qubit processor (frequencies GHz, J MHz,
# times in microseconds).
DEFAULT_FREQS_GHZ = (4.8, 5.2, 5.0)
DEFAULT_J_MHZ = 4.0
DEFAULT_T1_US = (100.0, 100.0, 100.0)
DEFAULT_TPHI_US = (200.0, 200.0, 200.0)


@dataclass(frozen=True)
class DeviceConfig:
    """Qubit frequencies (Hz), couplings (Hz), T1/Tphi (s) and the geometry."""

    qubit_freqs: tuple
    couplings: dict  # {(j, k): J_hz} with j < k, 1-based
    t1_times: tuple
    tphi_times: tuple
    geometry: str

    def __post_init__(self):
        n = self.n_qubits
        if self.geometry not in GEOMETRIES:
            raise ValueError(f"geometry must be one of {GEOMETRIES}")
        if any(f <= 0 for f in self.qubit_freqs):
            raise ValueError("qubit frequencies must be positive")
        if any(t <= 0 for t in self.t1_times) or any(t <= 0 for t in self.tphi_times):
            raise ValueError("T1 and Tphi times must be positive")
        for (j, k), val in self.couplings.items():
            if not (1 <= j < k <= n):
                raise ValueError(f"bad coupling pair {(j, k)}")
            if val < 0:
                raise ValueError("couplings must be nonnegative")
        if self.geometry == "linear" and self.couplings.get((1, 2), 0.0) != 0.0:
            raise ValueError("linear geometry requires J_12 = 0")

    @property
    def n_qubits(self) -> int:
        return len(self.qubit_freqs)

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    @classmethod
    def processor(cls, geometry: str = "linear") -> "DeviceConfig":
        """Three-qubit processor with the reference parameter set."""
        j = DEFAULT_J_MHZ * 1e6
        couplings = {(1, 2): j if geometry == "triangle" else 0.0, (1, 3): j, (2, 3): j}
        return cls(
            qubit_freqs=tuple(f * 1e9 for f in DEFAULT_FREQS_GHZ),
            couplings=couplings,
            t1_times=tuple(t * 1e-6 for t in DEFAULT_T1_US),
            tphi_times=tuple(t * 1e-6 for t in DEFAULT_TPHI_US),
            geometry=geometry,
        )

    def to_json(self) -> dict:
        return {
            "freqs_ghz": [f / 1e9 for f in self.qubit_freqs],
            "couplings_mhz": {
                f"{j}{k}": val / 1e6 for (j, k), val in sorted(self.couplings.items())
            },
            "t1_us": [t * 1e6 for t in self.t1_times],
            "tphi_us": [t * 1e6 for t in self.tphi_times],
            "geometry": self.geometry,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DeviceConfig":
        couplings = {
            (int(key[0]), int(key[1])): val * 1e6
            for key, val in obj["couplings_mhz"].items()
        }
        return cls(
            qubit_freqs=tuple(f * 1e9 for f in obj["freqs_ghz"]),
            couplings=couplings,
            t1_times=tuple(t * 1e-6 for t in obj["t1_us"]),
            tphi_times=tuple(t * 1e-6 for t in obj["tphi_us"]),
            geometry=obj["geometry"],
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)

    @classmethod
    def load(cls, path) -> "DeviceConfig":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


@dataclass(frozen=True)
class PulseEnvelope:
    """Gaussian or Gaussian-square pulse envelope (amplitude in rad/s)."""

    shape: str  # "gaussian" | "gaussian_square"
    amplitude: float
    t0: float
    t_pulse: float
    sigma: float

    def __post_init__(self):
        if self.shape == "gaussian":
            if abs(self.sigma - self.t_pulse / 8) > 1e-12 * self.t_pulse:
                raise ValueError("gaussian envelopes require sigma = t_pulse / 8")
        elif self.shape == "gaussian_square":
            if self.t_pulse < 6 * self.sigma:
                raise ValueError("gaussian_square requires t_pulse >= 6 sigma")
        else:
            raise ValueError(f"unknown envelope shape {self.shape!r}")

    @property
    def t_end(self) -> float:
        return self.t0 + self.t_pulse


def envelope_value(env: PulseEnvelope, t: float) -> float:
    """Envelope amplitude at time t; zero outside [t0, t0 + t_pulse]."""
    if t < env.t0 or t > env.t_end:
        return 0.0
    if env.shape == "gaussian":
        center = env.t0 + 0.5 * env.t_pulse
    else:
        rise_end = env.t0 + 3.0 * env.sigma
        fall_start = env.t_end - 3.0 * env.sigma
        if rise_end <= t <= fall_start:
            return env.amplitude
        center = rise_end if t < rise_end else fall_start
    x = (t - center) / env.sigma
    return env.amplitude * math.exp(-0.5 * x * x)


@dataclass(frozen=True)
class DrivePulse:
    """A control tone on one qubit: envelope times e^{-i(w_dr t + phase)}."""

    qubit: int
    envelope: PulseEnvelope
    freq: float  # rad/s
    phase: float  # rad

    def __post_init__(self):
        if self.qubit < 1:
            raise ValueError("qubit labels are 1-based")
        if self.freq <= 0:
            raise ValueError("drive frequency must be positive")

    def shifted(self, dt: float) -> "DrivePulse":
        return replace(self, envelope=replace(self.envelope, t0=self.envelope.t0 + dt))


@dataclass
class PulseSchedule:
    """Time-sorted drive pulses plus the intended unitary in the rotating frame."""

    pulses: list
    total_duration: float
    ideal_target: np.ndarray

    def __post_init__(self):
        self.pulses = sorted(self.pulses, key=lambda p: (p.envelope.t0, p.qubit))
        for p in self.pulses:
            if p.envelope.t0 < -1e-15 or p.envelope.t_end > self.total_duration + 1e-12:
                raise ValueError(
                    f"pulse on qubit {p.qubit} ([{p.envelope.t0}, {p.envelope.t_end}]) "
                    f"does not fit in total_duration {self.total_duration}"
                )
        u = np.asarray(self.ideal_target, dtype=complex)
        if np.linalg.norm(u @ u.conj().T - np.eye(u.shape[0])) > 1e-10:
            raise ValueError("ideal_target is not unitary")
        self.ideal_target = u


def bare_energies(cfg: DeviceConfig) -> np.ndarray:
    """Diagonal of H_q (rad/s) over the computational basis, |1> excited."""
    return frame_energies(cfg, cfg.qubit_freqs)


def coupling_hamiltonian(cfg: DeviceConfig) -> np.ndarray:
    """H_int = sum_{<jk>} J_jk (sp_j sm_k + sp_k sm_j), J in rad/s."""
    n = cfg.n_qubits
    h = np.zeros((cfg.dim, cfg.dim), dtype=complex)
    for (j, k), j_hz in cfg.couplings.items():
        if j_hz == 0.0:
            continue
        sp_sm = np.kron(SIGMA_PLUS, SIGMA_PLUS.conj().T)
        term = embed_operator(sp_sm, (j, k), n)
        h += 2 * math.pi * j_hz * (term + term.conj().T)
    return h


def static_hamiltonian(cfg: DeviceConfig) -> np.ndarray:
    """Lab-frame H_q + H_int."""
    return np.diag(bare_energies(cfg)).astype(complex) + coupling_hamiltonian(cfg)


def drive_hamiltonian(cfg: DeviceConfig, sched: PulseSchedule, t: float) -> np.ndarray:
    """Lab-frame drive term: sum over active pulses of Omega (sp e^{-i(wt+p)} + h.c.)."""
    n = cfg.n_qubits
    h = np.zeros((cfg.dim, cfg.dim), dtype=complex)
    for pulse in sched.pulses:
        om = envelope_value(pulse.envelope, t)
        if om == 0.0:
            continue
        coeff = om * np.exp(-1j * (pulse.freq * t + pulse.phase))
        term = coeff * embed_operator(SIGMA_PLUS, (pulse.qubit,), n)
        h += term + term.conj().T
    return h


def hamiltonian_at(
    cfg: DeviceConfig, sched: PulseSchedule, t: float, frame: str = "rotating"
) -> np.ndarray:
    """System Hamiltonian at time t in the lab or rotating (w.r.t. H_q) frame."""
    if not (0.0 <= t <= sched.total_duration):
        raise ValueError(f"t={t} outside [0, {sched.total_duration}]")
    h = coupling_hamiltonian(cfg) + drive_hamiltonian(cfg, sched, t)
    if frame == "lab":
        return np.diag(bare_energies(cfg)).astype(complex) + h
    if frame != "rotating":
        raise ValueError(f"unknown frame {frame!r}")
    phases = np.exp(1j * bare_energies(cfg) * t)
    return phases[:, None] * h * phases.conj()[None, :]


def dressed_frequencies(cfg: DeviceConfig) -> tuple:
    """Qubit frequencies (Hz) dressed by the static couplings.

    Eigenvalues of H_q + H_int, with eigenstates matched to computational
    basis states by maximum overlap; the dressed frequency of qubit j is the
    energy of the single-excitation dressed state over the dressed ground
    state.  Equals the bare frequencies when all couplings vanish.
    """
    n = cfg.n_qubits
    w, v = np.linalg.eigh(static_hamiltonian(cfg))
    overlaps = np.abs(v) ** 2
    assignment = overlaps.argmax(axis=1)
    if len(set(assignment.tolist())) != cfg.dim:
        raise ValueError("couplings too strong to label dressed states")
    energies = w[assignment]  # energies[b] = dressed energy of basis state b
    ground = energies[0]
    return tuple(
        float((energies[1 << (n - 1 - j)] - ground) / (2 * math.pi))
        for j in range(n)
    )


def frame_energies(cfg: DeviceConfig, frame_freqs) -> np.ndarray:
    """Diagonal of the frame Hamiltonian (rad/s) built from per-qubit freqs."""
    n = cfg.n_qubits
    energies = np.zeros(cfg.dim)
    for state in range(cfg.dim):
        e = 0.0
        for j in range(n):
            bit = (state >> (n - 1 - j)) & 1
            e += 2 * math.pi * frame_freqs[j] * (0.5 if bit else -0.5)
        energies[state] = e
    return energies


def max_frequency(cfg: DeviceConfig, sched: PulseSchedule) -> float:
    """Largest oscillation frequency (Hz) present in the rotating frame."""
    freqs = [0.0]
    for (j, k), j_hz in cfg.couplings.items():
        if j_hz != 0.0:
            freqs.append(abs(cfg.qubit_freqs[j - 1] - cfg.qubit_freqs[k - 1]))
    for pulse in sched.pulses:
        detuning = abs(cfg.qubit_freqs[pulse.qubit - 1] - pulse.freq / (2 * math.pi))
        freqs.append(detuning)
        freqs.append(1.0 / (2 * math.pi * pulse.envelope.sigma))
    return max(freqs)
