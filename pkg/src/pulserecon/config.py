"""Flat JSON run configuration with explicit units in the key names."""

import hashlib
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .grape import GrapeSettings, check_grid
from .harness import MassSchedule, TargetFamily
from .hydrogen import build_model, load_basis
from .reconstruction import SPLINE_BOUNDARIES
from .transmon import ANHARMONICITY_OVER_2PI_GHZ, DeviceConfig


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    basis: str = "sto-2g"
    parameter: str = "dt"
    grid: list = None
    dt_hartree_inv: float = 0.5
    m_e: float = 1.0
    tau_ns: float = 50.0
    n_steps: int = 1600
    alpha_T_over_2pi_ghz: float = ANHARMONICITY_OVER_2PI_GHZ
    guard_levels: int = 0
    eps_max: float = None
    target_infidelity: float = None
    max_iterations: int = 500
    gradient_tolerance: float = 1e-10
    warm_start: bool = True
    method: str = "poly"
    degree_time: int = None
    degree_param: int = None
    spline_boundary: str = "not-a-knot"
    holdout: list = None
    n_max: int = 40
    schedule_amplitude: float = 0.2
    evolve_steps: int = 40
    initial_state: list = None
    seed: int = 0

    def __post_init__(self):
        if self.grid is None:
            self.grid = ([0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5] if self.parameter == "dt"
                         else [round(0.7 + 0.1 * i, 10) for i in range(13)])
        # mass families drive a multi-step evolution, so gate errors accumulate:
        # they get a tighter optimizer target and a finer parameter fit
        if self.target_infidelity is None:
            self.target_infidelity = 1e-6 if self.parameter == "dt" else 1e-10
        if self.degree_time is None:
            self.degree_time = 10 if self.parameter == "dt" else 6
        if self.degree_param is None:
            self.degree_param = 4 if self.parameter == "dt" else 8
        self.validate()

    def validate(self):
        if self.parameter not in ("dt", "m_e"):
            raise ConfigError(f"parameter must be 'dt' or 'm_e', got {self.parameter!r}")
        if self.method not in ("poly", "spectral"):
            raise ConfigError(f"method must be 'poly' or 'spectral', got {self.method!r}")
        if self.spline_boundary not in SPLINE_BOUNDARIES:
            raise ConfigError(f"spline_boundary must be one of {SPLINE_BOUNDARIES}")
        try:
            check_grid(self.grid)
            if self.holdout is not None:
                check_grid(self.holdout)
            self.basis_set()
            self.device()
            self.grape_settings()
        except (ValueError, OSError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc
        if self.parameter == "m_e" and min(self.grid) <= 0:
            raise ConfigError("electron masses must be positive")
        if self.m_e <= 0:
            raise ConfigError("m_e must be positive")
        if self.guard_levels < 0:
            raise ConfigError("guard_levels must be >= 0")
        if self.degree_time < 0 or self.degree_param < 0:
            raise ConfigError("polynomial degrees must be >= 0")
        if self.n_max < 1 or self.evolve_steps < 0:
            raise ConfigError("n_max must be >= 1 and evolve_steps >= 0")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path):
        try:
            d = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(d)

    def to_dict(self):
        return asdict(self)

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def basis_set(self):
        return load_basis(self.basis)

    def logical_dim(self):
        return self.basis_set().K

    def device(self):
        return DeviceConfig(dim=self.logical_dim() + self.guard_levels,
                            anharmonicity_over_2pi=self.alpha_T_over_2pi_ghz,
                            pulse_duration=self.tau_ns, n_steps=self.n_steps,
                            eps_max=self.eps_max)

    def grape_settings(self):
        return GrapeSettings(target_infidelity=self.target_infidelity,
                             max_iterations=self.max_iterations,
                             gradient_tolerance=self.gradient_tolerance,
                             warm_start=self.warm_start, seed=self.seed)

    def targets(self):
        return TargetFamily(self.basis_set(), self.parameter, dt=self.dt_hartree_inv, m_e=self.m_e)

    def schedule(self):
        return MassSchedule(self.n_max, self.schedule_amplitude)

    def psi0(self):
        if self.initial_state is None:
            return build_model(self.basis_set()).initial_state()
        psi = np.array([complex(*v) if isinstance(v, (list, tuple)) else complex(v)
                        for v in self.initial_state])
        if psi.size != self.logical_dim():
            raise ConfigError(f"initial_state needs {self.logical_dim()} amplitudes")
        return psi / np.linalg.norm(psi)
