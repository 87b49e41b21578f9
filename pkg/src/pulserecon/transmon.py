"""Driven multi-level transmon in its rotating frame.

Units: time in ns, envelopes and Hamiltonians in rad/ns (angular GHz), with
hbar = 1. The anharmonicity is quoted as alpha_T / 2pi in GHz and enters the
drift multiplied by 2pi.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ANHARMONICITY_OVER_2PI_GHZ = 2.1693


@dataclass(frozen=True)
class DeviceConfig:
    dim: int = 2
    anharmonicity_over_2pi: float = ANHARMONICITY_OVER_2PI_GHZ
    pulse_duration: float = 50.0
    n_steps: int = 1600
    eps_max: float = None

    def __post_init__(self):
        if int(self.dim) < 2:
            raise ValueError("transmon truncation must keep at least 2 levels")
        if int(self.n_steps) < 1:
            raise ValueError("n_steps must be >= 1")
        if not self.pulse_duration > 0:
            raise ValueError("pulse_duration must be positive")
        if self.eps_max is not None and not self.eps_max > 0:
            raise ValueError("eps_max must be positive when set")
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def sample_rate(self):
        """Samples per ns (GHz)."""
        return self.n_steps / self.pulse_duration

    @property
    def dt_step(self):
        return self.pulse_duration / self.n_steps

    def times(self):
        """Midpoints of the piecewise-constant steps."""
        return (np.arange(self.n_steps) + 0.5) * self.dt_step

    def to_dict(self):
        return {"dim": self.dim, "anharmonicity_over_2pi": self.anharmonicity_over_2pi,
                "pulse_duration": self.pulse_duration, "n_steps": self.n_steps,
                "eps_max": self.eps_max}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(frozen=True)
class ControlPulse:
    eps_I: np.ndarray = field(repr=False)
    eps_Q: np.ndarray = field(repr=False)
    dt_step: float

    def __post_init__(self):
        eI = np.array(self.eps_I, dtype=float)
        eQ = np.array(self.eps_Q, dtype=float)
        if eI.ndim != 1 or eI.shape != eQ.shape:
            raise ValueError(f"envelopes must be 1-D of equal length, got {eI.shape} and {eQ.shape}")
        if not (np.all(np.isfinite(eI)) and np.all(np.isfinite(eQ))):
            raise ValueError("envelopes must be finite")
        if not self.dt_step > 0:
            raise ValueError("dt_step must be positive")
        eI.flags.writeable = False
        eQ.flags.writeable = False
        object.__setattr__(self, "eps_I", eI)
        object.__setattr__(self, "eps_Q", eQ)

    @property
    def n_steps(self):
        return self.eps_I.size

    @property
    def duration(self):
        return self.n_steps * self.dt_step

    @classmethod
    def zeros(cls, cfg):
        return cls(np.zeros(cfg.n_steps), np.zeros(cfg.n_steps), cfg.dt_step)

    @classmethod
    def from_vector(cls, x, dt_step):
        x = np.asarray(x)
        n = x.size // 2
        return cls(x[:n], x[n:], dt_step)

    def to_vector(self):
        return np.concatenate([self.eps_I, self.eps_Q])

    def check_bounds(self, eps_max):
        if eps_max is not None:
            peak = max(np.max(np.abs(self.eps_I)), np.max(np.abs(self.eps_Q)))
            if peak > eps_max * (1 + 1e-12):
                raise ValueError(f"pulse amplitude {peak:.4g} exceeds eps_max={eps_max:.4g}")


def lowering(dim):
    return np.diag(np.sqrt(np.arange(1, dim)), k=1).astype(complex)


def drive_operators(dim):
    """The in-phase (a^dag + a) and in-quadrature i(a^dag - a) operators."""
    a = lowering(dim)
    ad = a.conj().T
    return ad + a, 1j * (ad - a)


def drift_hamiltonian(cfg):
    n = np.arange(cfg.dim)
    alpha = 2 * np.pi * cfg.anharmonicity_over_2pi
    return np.diag(-0.5 * alpha * n * (n - 1)).astype(complex)


def control_hamiltonian(eI, eQ, dim):
    X, Y = drive_operators(dim)
    return eI * X + eQ * Y


def step_hamiltonians(cfg, pulse):
    if pulse.n_steps != cfg.n_steps:
        raise ValueError(f"pulse has {pulse.n_steps} steps, device expects {cfg.n_steps}")
    X, Y = drive_operators(cfg.dim)
    Hd = drift_hamiltonian(cfg)
    return Hd[None] + pulse.eps_I[:, None, None] * X[None] + pulse.eps_Q[:, None, None] * Y[None]


def step_eigensystems(cfg, pulse):
    """Batched eigendecomposition of every step Hamiltonian."""
    return np.linalg.eigh(step_hamiltonians(cfg, pulse))


def step_propagators(cfg, pulse, eig=None):
    """Per-step factors U_k = exp(-i dt H_k), ordered in time."""
    w, V = eig if eig is not None else step_eigensystems(cfg, pulse)
    phases = np.exp(-1j * pulse.dt_step * w)
    return np.einsum("kab,kb,kcb->kac", V, phases, V.conj())


def ordered_product(factors):
    U = np.eye(factors.shape[-1], dtype=complex)
    for Uk in factors:
        U = Uk @ U
    return U


def propagate(cfg, pulse):
    """Time-ordered propagator U_N ... U_1 induced by ``pulse``."""
    return ordered_product(step_propagators(cfg, pulse))


# -- pulse files --------------------------------------------------------------

def save_pulse_csv(pulse, path):
    lines = [f"# tau_ns={pulse.duration!r}, n_steps={pulse.n_steps}, dt_step_ns={pulse.dt_step!r}"]
    lines += [f"{k},{eI!r},{eQ!r}" for k, (eI, eQ) in
              enumerate(zip(pulse.eps_I.tolist(), pulse.eps_Q.tolist()))]
    Path(path).write_text("\n".join(lines) + "\n")


def load_pulse_csv(path):
    text = Path(path).read_text().splitlines()
    header = text[0].lstrip("#").strip()
    meta = dict(item.strip().split("=") for item in header.split(","))
    tau, n = float(meta["tau_ns"]), int(meta["n_steps"])
    rows = [line.split(",") for line in text[1:] if line.strip()]
    if len(rows) != n:
        raise ValueError(f"{path}: header says {n} steps, found {len(rows)} rows")
    eI = [float(r[1]) for r in rows]
    eQ = [float(r[2]) for r in rows]
    dt = float(meta["dt_step_ns"]) if "dt_step_ns" in meta else tau / n
    return ControlPulse(eI, eQ, dt)


def pulse_to_dict(pulse):
    return {"tau_ns": pulse.duration, "n_steps": pulse.n_steps, "dt_step_ns": pulse.dt_step,
            "eps_I": pulse.eps_I.tolist(), "eps_Q": pulse.eps_Q.tolist()}


def pulse_from_dict(d):
    return ControlPulse(d["eps_I"], d["eps_Q"], d["dt_step_ns"])


def save_pulse_json(pulse, path):
    Path(path).write_text(json.dumps(pulse_to_dict(pulse)))


def load_pulse_json(path):
    return pulse_from_dict(json.loads(Path(path).read_text()))
