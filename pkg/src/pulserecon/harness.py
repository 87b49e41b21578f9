"""End-to-end experiments: repeated-propagator dynamics against exact
evolution, the time-dependent-mass run, fidelity surveys and timing."""

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grape import GrapeSettings, check_grid, logical_block, optimize_pulse
from .hydrogen import build_model, target_propagator
from .linalg import fidelity, hermitian_eig
from .reconstruction import DomainError, reconstruct
from .transmon import propagate

NORM_TOL = 1e-9


@dataclass(frozen=True)
class TargetFamily:
    """Parametric hydrogen propagators U(lambda) = exp(-i dt H(m_e))."""
    basis: object
    parameter_name: str = "dt"
    dt: float = 1.0
    m_e: float = 1.0

    def __post_init__(self):
        if self.parameter_name not in ("dt", "m_e"):
            raise ValueError(f"unknown parameter {self.parameter_name!r}; use 'dt' or 'm_e'")

    def model(self, lam):
        return build_model(self.basis, lam if self.parameter_name == "m_e" else self.m_e)

    def __call__(self, lam):
        dt = lam if self.parameter_name == "dt" else self.dt
        return target_propagator(self.model(lam), dt)

    def targets(self, grid):
        return [(float(lam), self(lam)) for lam in check_grid(grid)]


@dataclass
class EvolutionTrace:
    times: np.ndarray
    amplitudes: np.ndarray = field(repr=False)
    source: str = "exact"

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)

    @property
    def populations(self):
        return np.abs(self.amplitudes) ** 2

    def save_csv(self, path):
        pops = self.populations
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time"] + [f"pop_{k}" for k in range(pops.shape[1])])
            for t, row in zip(self.times.tolist(), pops.tolist()):
                writer.writerow([repr(t)] + [repr(p) for p in row])


def _check_state(psi0):
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(np.linalg.norm(psi0) - 1.0) > NORM_TOL:
        raise ValueError(f"initial state has norm {np.linalg.norm(psi0):.12f}, expected 1")
    return psi0


def max_population_deviation(a, b):
    k = min(a.amplitudes.shape[1], b.amplitudes.shape[1])
    return float(np.max(np.abs(a.populations[:, :k] - b.populations[:, :k])))


def evolve_repeated(U, psi0, steps, dt=1.0, source="reconstructed"):
    """Apply ``U`` ``steps`` times; the trace holds steps + 1 states."""
    psi = _check_state(psi0)
    states = [psi]
    for _ in range(steps):
        psi = U @ psi
        states.append(psi)
    return EvolutionTrace(dt * np.arange(steps + 1), np.array(states), source)


def exact_evolution(model, psi0, t_grid):
    """psi(t) = exp(-i t H) psi0 on the grid, via the eigenbasis of H."""
    psi0 = _check_state(psi0)
    w, V = hermitian_eig(model.H_ortho)
    t = np.asarray(t_grid, dtype=float)
    coeffs = V.conj().T @ psi0
    states = (np.exp(-1j * np.outer(t, w)) * coeffs) @ V.T
    return EvolutionTrace(t, states, "exact")


@dataclass(frozen=True)
class MassSchedule:
    n_max: int = 40
    amplitude: float = 0.2
    base: float = 1.0

    @property
    def values(self):
        j = np.arange(self.n_max + 1)
        return self.base + self.amplitude * np.sin(j * np.pi / self.n_max)


def device_propagator(model, lam, cfg, logical_dim):
    pulse = reconstruct(model, lam)
    return logical_block(propagate(cfg, pulse), logical_dim)


def dynamic_mass_simulation(model, schedule, cfg, psi0, basis, dt=1.0):
    """Advance psi0 one step per schedule entry, reconstructing the pulse at
    each mass. Returns (reconstructed trace, exact trace)."""
    psi0 = _check_state(psi0)
    masses = schedule.values
    lo, hi = model.param_domain
    if masses.min() < lo or masses.max() > hi:
        raise DomainError(f"schedule [{masses.min()}, {masses.max()}] leaves model domain [{lo}, {hi}]")
    d = psi0.size
    rec, ex = [psi0], [psi0]
    for m in masses:
        U_rec = device_propagator(model, m, cfg, d)
        U_ex = target_propagator(build_model(basis, m), dt)
        rec.append(U_rec @ rec[-1])
        ex.append(U_ex @ ex[-1])
    times = dt * np.arange(masses.size + 1)
    return (EvolutionTrace(times, np.array(rec), "reconstructed"),
            EvolutionTrace(times, np.array(ex), "exact"))


@dataclass
class FidelityReport:
    grid: np.ndarray
    fidelities: np.ndarray

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.fidelities = np.asarray(self.fidelities, dtype=float)

    @property
    def mean(self):
        return float(np.mean(self.fidelities))

    @property
    def min(self):
        return float(np.min(self.fidelities))

    def to_dict(self):
        return {"grid": self.grid.tolist(), "fidelities": self.fidelities.tolist(),
                "mean": self.mean, "min": self.min}


def verify_model(model, targets_fn, holdout, cfg):
    """Fidelity of each reconstructed pulse against the exact target."""
    fids = []
    for lam in holdout:
        target = targets_fn(lam)
        U = device_propagator(model, lam, cfg, target.shape[0])
        fids.append(fidelity(target, U))
    return FidelityReport(holdout, fids)


@dataclass
class TimingReport:
    mean_reconstruct_seconds: float
    mean_optimize_seconds: float
    sample_count: int
    optimize_converged: list = field(default_factory=list)

    @property
    def speedup_ratio(self):
        return self.mean_optimize_seconds / self.mean_reconstruct_seconds

    def to_dict(self):
        return {"mean_reconstruct_seconds": self.mean_reconstruct_seconds,
                "mean_optimize_seconds": self.mean_optimize_seconds,
                "speedup_ratio": self.speedup_ratio, "sample_count": self.sample_count,
                "optimize_converged": self.optimize_converged}


def benchmark(model, cfg, settings, samples, targets_fn):
    """Time reconstruct-and-propagate against GRAPE from the zero pulse.

    Both sides end with the device propagator for the sample, so the ratio
    compares the cost of producing one usable gate.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("benchmark needs at least one sample")
    settings = settings or GrapeSettings()
    t_rec, t_opt, ok = [], [], []
    for lam in samples:
        target = targets_fn(lam)
        start = time.perf_counter()
        device_propagator(model, lam, cfg, target.shape[0])
        t_rec.append(time.perf_counter() - start)
        start = time.perf_counter()
        res = optimize_pulse(target, cfg, settings)
        propagate(cfg, res.pulse)
        t_opt.append(time.perf_counter() - start)
        ok.append(bool(res.converged))
    return TimingReport(float(np.mean(t_rec)), float(np.mean(t_opt)), len(samples), ok)
