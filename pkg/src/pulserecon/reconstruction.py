"""Pulse reconstruction from a family of optimized pulses.

Two surrogates turn a PulseFamily into pulses at arbitrary parameter values:

* ``PolyPulseModel``: each envelope is a polynomial in time whose
  coefficients are themselves polynomials in the parameter.
* ``SpectralPulseModel``: each envelope is stored as its discrete Fourier
  spectrum and every bin is interpolated over the parameter with a natural
  cubic spline.

Time and parameter are mapped affinely onto [-1, 1] before any polynomial
is formed; stored coefficients live in those normalized coordinates.
"""

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline, PPoly
from scipy.linalg import solve_triangular

from .transmon import ControlPulse

COND_WARN = 1e10
COND_FAIL = 1e14
IMAG_TOL = 1e-9


class FitError(ValueError):
    pass


class DomainError(ValueError):
    pass


class SymmetryError(RuntimeError):
    pass


def _to_unit(x, lo, hi):
    return 2.0 * (np.asarray(x, dtype=float) - lo) / (hi - lo) - 1.0


def lstsq_qr(A, B):
    """Least squares via Householder QR. Returns (solution, condition estimate)."""
    Q, R = np.linalg.qr(A)
    cond = np.linalg.cond(R)
    if not np.isfinite(cond) or cond > COND_FAIL:
        raise FitError(f"least-squares system is rank deficient (condition {cond:.3e})")
    if cond > COND_WARN:
        warnings.warn(f"ill-conditioned least-squares fit (condition {cond:.3e})",
                      np.exceptions.RankWarning, stacklevel=2)
    return solve_triangular(R, Q.T @ B), cond


def _stack(family):
    """Envelopes as an array of shape (2, n_members, n_steps)."""
    return np.array([[p.eps_I for p in family.pulses], [p.eps_Q for p in family.pulses]])


def _meta(family, extra):
    meta = {"device": family.device.to_dict()} if getattr(family, "device", None) else {}
    meta.update(extra or {})
    return meta


def _check_family(family):
    n = {p.n_steps for p in family.pulses}
    dts = {p.dt_step for p in family.pulses}
    if len(n) != 1 or len(dts) != 1:
        raise FitError("family members must share the same time grid")
    lam = np.asarray(family.parameter_values, dtype=float)
    if np.unique(lam).size != lam.size:
        raise FitError("duplicate parameter values in family")
    return n.pop(), dts.pop(), lam


# -- polynomial CPR -------------------------------------------------------------

@dataclass
class PolyPulseModel:
    degree_time: int
    degree_param: int
    coeffs: np.ndarray = field(repr=False)  # (quadrature, time power j, param power k)
    time_domain: tuple
    param_domain: tuple
    n_steps: int
    dt_step: float
    parameter_name: str = "dt"
    diagnostics: dict = field(default_factory=dict, repr=False)
    grid: tuple = ()
    meta: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.grid = tuple(float(v) for v in self.grid)
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        expected = (2, self.degree_time + 1, self.degree_param + 1)
        if self.coeffs.shape != expected:
            raise ValueError(f"coefficient tensor has shape {self.coeffs.shape}, expected {expected}")
        self.time_domain = tuple(float(v) for v in self.time_domain)
        self.param_domain = tuple(float(v) for v in self.param_domain)

    def time_coefficients(self, lam):
        """c_j(lambda) for both quadratures, shape (2, degree_time + 1)."""
        u = _to_unit(lam, *self.param_domain)
        return self.coeffs @ (u ** np.arange(self.degree_param + 1))

    def times(self):
        return (np.arange(self.n_steps) + 0.5) * self.dt_step

    def to_dict(self):
        return {"kind": "poly", "parameter_name": self.parameter_name,
                "degree_time": self.degree_time, "degree_param": self.degree_param,
                "time_domain": list(self.time_domain), "param_domain": list(self.param_domain),
                "n_steps": self.n_steps, "dt_step": self.dt_step,
                "coeffs": self.coeffs.tolist(), "diagnostics": self.diagnostics,
                "grid": list(self.grid), "meta": self.meta}

    @classmethod
    def from_dict(cls, d):
        if d.get("kind") != "poly":
            raise ValueError("not a polynomial pulse model")
        return cls(degree_time=d["degree_time"], degree_param=d["degree_param"],
                   coeffs=d["coeffs"], time_domain=d["time_domain"],
                   param_domain=d["param_domain"], n_steps=d["n_steps"], dt_step=d["dt_step"],
                   parameter_name=d["parameter_name"], diagnostics=d.get("diagnostics", {}),
                   grid=d.get("grid", ()), meta=d.get("meta", {}))


def fit_poly_model(family, degree_time=10, degree_param=4, meta=None):
    """Fit envelopes in time, then each time coefficient across the grid."""
    n_steps, dt, lam = _check_family(family)
    if len(family) < degree_param + 1:
        raise FitError(f"{len(family)} family members cannot determine a degree-{degree_param} "
                       "parameter polynomial")
    if n_steps < degree_time + 1:
        raise FitError(f"{n_steps} samples cannot determine a degree-{degree_time} time polynomial")
    tau = n_steps * dt
    t = (np.arange(n_steps) + 0.5) * dt
    At = np.vander(_to_unit(t, 0.0, tau), degree_time + 1, increasing=True)
    lo, hi = (lam[0], lam[-1]) if lam.size > 1 else (lam[0] - 0.5, lam[0] + 0.5)
    Al = np.vander(_to_unit(lam, lo, hi), degree_param + 1, increasing=True)

    env = _stack(family)
    coeffs = np.empty((2, degree_time + 1, degree_param + 1))
    time_rms = np.empty((2, len(family)))
    param_rms = np.empty((2, degree_time + 1))
    conds = {}
    for q in range(2):
        C, conds["time"] = lstsq_qr(At, env[q].T)  # (degree_time + 1, members)
        time_rms[q] = np.sqrt(np.mean((At @ C - env[q].T) ** 2, axis=0))
        Bq, conds["param"] = lstsq_qr(Al, C.T)  # (degree_param + 1, degree_time + 1)
        param_rms[q] = np.sqrt(np.mean((Al @ Bq - C.T) ** 2, axis=0))
        coeffs[q] = Bq.T
    model = PolyPulseModel(degree_time, degree_param, coeffs, (0.0, tau), (lo, hi), n_steps, dt,
                           family.parameter_name, grid=lam, meta=_meta(family, meta))
    recon = np.array([reconstruct_poly(model, v, extrapolate=True).to_vector() for v in lam])
    model.diagnostics = {
        "time_fit_rms": time_rms.tolist(),
        "param_fit_rms": param_rms.tolist(),
        "node_rms": np.sqrt(np.mean((recon - np.concatenate([env[0], env[1]], axis=1)) ** 2,
                                    axis=1)).tolist(),
        "condition_time": conds["time"],
        "condition_param": conds["param"],
    }
    return model


def _check_domain(lam, domain, extrapolate, name):
    lo, hi = domain
    span = hi - lo
    if not extrapolate and not (lo - 1e-12 * span <= lam <= hi + 1e-12 * span):
        raise DomainError(f"{name}={lam} outside fitted domain [{lo}, {hi}]; "
                          "pass extrapolate=True to allow")


def reconstruct_poly(model, lam, extrapolate=False):
    _check_domain(lam, model.param_domain, extrapolate, model.parameter_name)
    c = model.time_coefficients(lam)
    u = _to_unit(model.times(), *model.time_domain)
    env = np.polynomial.polynomial.polyval(u, c.T)
    return ControlPulse(env[0], env[1], model.dt_step)


# -- Fourier-spectral CPRFT ---------------------------------------------------------

def fft_pulse(pulse):
    """Unitary-normalized DFT of both envelopes: (spec_I, spec_Q)."""
    return np.fft.fft(pulse.eps_I, norm="ortho"), np.fft.fft(pulse.eps_Q, norm="ortho")


def ifft_pulse(spec_I, spec_Q, dt_step):
    out = []
    for spec in (spec_I, spec_Q):
        x = np.fft.ifft(spec, norm="ortho")
        residue = np.max(np.abs(x.imag), initial=0.0)
        if residue > IMAG_TOL:
            raise SymmetryError(f"inverse transform has imaginary residue {residue:.3e}")
        out.append(x.real)
    return ControlPulse(out[0], out[1], dt_step)


def _mirror(spec):
    return np.conj(np.roll(spec[..., ::-1], 1, axis=-1))


@dataclass
class SpectralPulseModel:
    param_values: np.ndarray
    spectra: np.ndarray = field(repr=False)  # (members, 2, n_steps) complex
    breakpoints: np.ndarray = field(repr=False)
    spline_coeffs: np.ndarray = field(repr=False)  # PPoly layout (order, intervals, 4 * n_steps)
    n_steps: int
    dt_step: float
    parameter_name: str = "m_e"
    meta: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.param_values = np.asarray(self.param_values, dtype=float)
        self.spectra = np.asarray(self.spectra, dtype=complex)
        self.breakpoints = np.asarray(self.breakpoints, dtype=float)
        self.spline_coeffs = np.asarray(self.spline_coeffs, dtype=float)
        if self.spectra.shape != (self.param_values.size, 2, self.n_steps):
            raise ValueError(f"spectra shape {self.spectra.shape} does not match grid and n_steps")
        self._pp = PPoly(self.spline_coeffs, self.breakpoints, extrapolate=True)

    @property
    def param_domain(self):
        return float(self.param_values[0]), float(self.param_values[-1])

    @property
    def grid(self):
        return tuple(self.param_values.tolist())

    def spectrum(self, lam):
        """Interpolated (spec_I, spec_Q) at ``lam``."""
        flat = self._pp(float(lam))
        n = self.n_steps
        return flat[0:n] + 1j * flat[n:2 * n], flat[2 * n:3 * n] + 1j * flat[3 * n:]

    def to_dict(self):
        return {"kind": "spectral", "parameter_name": self.parameter_name,
                "grid": self.param_values.tolist(), "n_steps": self.n_steps,
                "dt_step": self.dt_step,
                "spectra_real": self.spectra.real.tolist(),
                "spectra_imag": self.spectra.imag.tolist(),
                "knots": self.breakpoints.tolist(), "spline_coeffs": self.spline_coeffs.tolist(),
                "meta": self.meta}

    @classmethod
    def from_dict(cls, d):
        if d.get("kind") != "spectral":
            raise ValueError("not a spectral pulse model")
        spectra = np.asarray(d["spectra_real"]) + 1j * np.asarray(d["spectra_imag"])
        return cls(param_values=d["grid"], spectra=spectra, breakpoints=d["knots"],
                   spline_coeffs=d["spline_coeffs"], n_steps=d["n_steps"], dt_step=d["dt_step"],
                   parameter_name=d["parameter_name"], meta=d.get("meta", {}))


SPLINE_BOUNDARIES = ("not-a-knot", "natural")


def fit_spectral_model(family, meta=None, boundary="not-a-knot"):
    """Per-bin cubic splines (linear for two members) over the grid.

    Not-a-knot end conditions reproduce any cubic in lambda exactly; natural
    ones only reproduce straight lines.
    """
    if boundary not in SPLINE_BOUNDARIES:
        raise FitError(f"unknown spline boundary {boundary!r}; use one of {SPLINE_BOUNDARIES}")
    n_steps, dt, lam = _check_family(family)
    if len(family) < 2:
        raise FitError("spectral interpolation needs at least two family members")
    if np.any(np.diff(lam) <= 0):
        raise FitError("parameter values must be strictly increasing")
    spectra = np.array([fft_pulse(p) for p in family.pulses])
    for p, (sI, sQ) in zip(family.pulses, spectra):
        back = ifft_pulse(sI, sQ, dt)
        err = np.max(np.abs(back.to_vector() - p.to_vector()))
        if err > 1e-10:
            raise FitError(f"spectral round trip lost {err:.3e}")
    y = np.concatenate([spectra[:, 0].real, spectra[:, 0].imag,
                        spectra[:, 1].real, spectra[:, 1].imag], axis=1)
    if lam.size == 2:
        slope = (y[1] - y[0]) / (lam[1] - lam[0])
        c = np.stack([slope, y[0]])[:, None, :]
    else:
        c = CubicSpline(lam, y, axis=0, bc_type=boundary).c
    return SpectralPulseModel(lam, spectra, lam, c, n_steps, dt, family.parameter_name,
                              meta=_meta(family, {"spline_boundary": boundary, **(meta or {})}))


def reconstruct_spectral(model, lam, extrapolate=False):
    _check_domain(lam, model.param_domain, extrapolate, model.parameter_name)
    specs = []
    for spec in model.spectrum(lam):
        mirrored = _mirror(spec)
        asym = np.max(np.abs(spec - mirrored), initial=0.0)
        if asym > IMAG_TOL:
            raise SymmetryError(f"interpolated spectrum breaks Hermitian symmetry by {asym:.3e}")
        specs.append(0.5 * (spec + mirrored))
    return ifft_pulse(specs[0], specs[1], model.dt_step)


# -- shared ------------------------------------------------------------------------

def reconstruct(model, lam, extrapolate=False):
    if isinstance(model, PolyPulseModel):
        return reconstruct_poly(model, lam, extrapolate)
    if isinstance(model, SpectralPulseModel):
        return reconstruct_spectral(model, lam, extrapolate)
    raise TypeError(f"unknown model type {type(model).__name__}")


def save_model(model, path):
    Path(path).write_text(json.dumps(model.to_dict()))
    return Path(path)


def load_model(path):
    d = json.loads(Path(path).read_text())
    kind = d.get("kind")
    if kind == "poly":
        return PolyPulseModel.from_dict(d)
    if kind == "spectral":
        return SpectralPulseModel.from_dict(d)
    raise ValueError(f"{path}: unknown model kind {kind!r}")
