"""s-wave hydrogen in a contracted Gaussian (STO-KG) basis.

All quantities are in atomic units: energies in Hartree, time steps in
inverse Hartree. The K primitives themselves are the basis vectors; the
contraction coefficients only define the default initial state.
"""

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .linalg import expm_neg_i, hermitian_eig

BUILTIN_BASES = {"sto-2g": "sto2g.json", "sto-3g": "sto3g.json"}


@dataclass(frozen=True)
class StoBasis:
    A: tuple
    alpha: tuple

    def __post_init__(self):
        A = tuple(float(a) for a in self.A)
        alpha = tuple(float(a) for a in self.alpha)
        if len(A) != len(alpha):
            raise ValueError("A and alpha must have the same length")
        if len(alpha) not in (2, 3):
            raise ValueError(f"only K in {{2, 3}} is supported, got K={len(alpha)}")
        if not all(np.isfinite(A)):
            raise ValueError("contraction coefficients must be finite")
        if not all(a > 0 and np.isfinite(a) for a in alpha):
            raise ValueError("Gaussian exponents must be positive")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "alpha", alpha)

    @property
    def K(self):
        return len(self.alpha)

    def to_dict(self):
        return {"K": self.K, "A": list(self.A), "alpha": list(self.alpha)}

    @classmethod
    def from_dict(cls, d):
        basis = cls(A=d["A"], alpha=d["alpha"])
        if "K" in d and int(d["K"]) != basis.K:
            raise ValueError(f"K={d['K']} does not match {basis.K} primitives")
        return basis


def load_basis(source="sto-2g"):
    """Load a basis by builtin name (``sto-2g``, ``sto-3g``) or JSON path."""
    key = str(source).lower()
    if key in BUILTIN_BASES:
        text = resources.files("pulserecon.data").joinpath(BUILTIN_BASES[key]).read_text()
    else:
        text = Path(source).read_text()
    return StoBasis.from_dict(json.loads(text))


def _pair_sums(basis):
    a = np.asarray(basis.alpha)
    return a[:, None], a[None, :], a[:, None] + a[None, :]


def overlap_matrix(basis):
    ai, aj, s = _pair_sums(basis)
    return (2.0 * np.sqrt(ai * aj) / s) ** 1.5


def kinetic_matrix(basis, m_e=1.0):
    if not m_e > 0:
        raise ValueError("m_e must be positive")
    ai, aj, s = _pair_sums(basis)
    return (3.0 * ai * aj / s) * overlap_matrix(basis) / m_e


def potential_matrix(basis):
    _, _, s = _pair_sums(basis)
    return -2.0 * np.sqrt(s / np.pi) * overlap_matrix(basis)


def _inv_sqrt_spd(S):
    w, V = hermitian_eig(S)
    if w[0] <= 0:
        raise np.linalg.LinAlgError(f"overlap matrix not positive definite (min eigenvalue {w[0]:.3e})")
    return (V / np.sqrt(w)) @ V.T, (V * np.sqrt(w)) @ V.T


@dataclass(frozen=True)
class HydrogenModel:
    basis: StoBasis
    m_e: float
    H_matrix: np.ndarray = field(repr=False)
    S_matrix: np.ndarray = field(repr=False)
    H_ortho: np.ndarray = field(repr=False)
    S_sqrt: np.ndarray = field(repr=False)

    @property
    def dim(self):
        return self.basis.K

    def energies(self):
        return hermitian_eig(self.H_ortho)[0]

    def ground_energy(self):
        return float(self.energies()[0])

    def initial_state(self):
        """Normalized contracted 1s orbital in the orthonormal basis."""
        c = self.S_sqrt @ np.asarray(self.basis.A)
        return (c / np.linalg.norm(c)).astype(complex)


def build_model(basis, m_e=1.0):
    S = overlap_matrix(basis)
    H = kinetic_matrix(basis, m_e) + potential_matrix(basis)
    S_inv_half, S_half = _inv_sqrt_spd(S)
    H_ortho = S_inv_half @ H @ S_inv_half
    H_ortho = 0.5 * (H_ortho + H_ortho.T)
    return HydrogenModel(basis=basis, m_e=float(m_e), H_matrix=H, S_matrix=S,
                         H_ortho=H_ortho, S_sqrt=S_half)


def target_propagator(model, dt):
    """Short-time propagator exp(-i dt H) on the orthonormal basis."""
    return expm_neg_i(model.H_ortho, dt)
