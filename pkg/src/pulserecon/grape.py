"""GRAPE pulse optimization with exact piecewise-constant gradients.

The cost is the gate infidelity 1 - |Tr(W^dag U)|^2 / d^2 between a target
W (d x d, embedded in the top-left block of the transmon space when guard
levels are present) and the propagator U produced by the pulse. Each step
derivative uses the eigenbasis (Daleckii-Krein) form of the Frechet
derivative of exp(-i dt H_k), so gradients are exact up to rounding.
"""

import json
import logging
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import line_search

from .linalg import fidelity
from .transmon import (ControlPulse, DeviceConfig, drift_hamiltonian, drive_operators,
                       load_pulse_csv, propagate, save_pulse_csv)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GrapeSettings:
    target_infidelity: float = 1e-6
    max_iterations: int = 500
    gradient_tolerance: float = 1e-10
    warm_start: bool = True
    seed: int = 0
    history_size: int = 20

    def __post_init__(self):
        if not 0 < self.target_infidelity < 1:
            raise ValueError("target_infidelity must lie in (0, 1)")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class OptimizationResult:
    pulse: ControlPulse
    final_fidelity: float
    iterations: int
    converged: bool
    wall_time: float
    history: list = field(default_factory=list, repr=False)
    message: str = ""

    @property
    def infidelity(self):
        return 1.0 - self.final_fidelity


def embed(target, dim):
    """Zero-pad a logical target into the top-left block of a dim-level space."""
    target = np.asarray(target, dtype=complex)
    d = target.shape[0]
    if d > dim:
        raise ValueError(f"target dimension {d} exceeds device dimension {dim}")
    W = np.zeros((dim, dim), dtype=complex)
    W[:d, :d] = target
    return W


def logical_block(U, d):
    return U[:d, :d]


def infidelity(pulse, target, cfg):
    d = np.asarray(target).shape[0]
    if d > cfg.dim:
        raise ValueError(f"target dimension {d} exceeds device dimension {cfg.dim}")
    return 1.0 - fidelity(target, logical_block(propagate(cfg, pulse), d))


class GateObjective:
    """Infidelity and its exact gradient with respect to (eps_I, eps_Q)."""

    def __init__(self, target, cfg):
        self.cfg = cfg
        self.d = np.asarray(target).shape[0]
        self.W = embed(target, cfg.dim)
        self.Wh = self.W.conj().T
        self.Hd = drift_hamiltonian(cfg)
        self.X, self.Y = drive_operators(cfg.dim)
        self.n_evals = 0

    def __call__(self, x):
        self.n_evals += 1
        cfg = self.cfg
        n, dt = cfg.n_steps, cfg.dt_step
        eI, eQ = x[:n], x[n:]
        H = self.Hd[None] + eI[:, None, None] * self.X[None] + eQ[:, None, None] * self.Y[None]
        w, V = np.linalg.eigh(H)
        Vh = np.conj(np.swapaxes(V, 1, 2))
        Uk = (V * np.exp(-1j * dt * w)[:, None, :]) @ Vh

        dim = cfg.dim
        prefix = np.empty((n + 1, dim, dim), dtype=complex)
        suffix = np.empty((n, dim, dim), dtype=complex)
        prefix[0] = np.eye(dim)
        for k in range(n):
            prefix[k + 1] = Uk[k] @ prefix[k]
        suffix[n - 1] = np.eye(dim)
        for k in range(n - 1, 0, -1):
            suffix[k - 1] = suffix[k] @ Uk[k]

        g = np.vdot(self.W, prefix[n])
        cost = 1.0 - abs(g) ** 2 / self.d ** 2

        # dg/de_k = Tr(M_k dU_k) with M_k = (U_{k-1}..U_1) W^dag (U_N..U_{k+1})
        M = prefix[:n] @ self.Wh[None] @ suffix
        Mv = Vh @ M @ V
        wa, wb = w[:, :, None], w[:, None, :]
        gamma = (-1j * dt) * np.exp(-0.5j * dt * (wa + wb)) * np.sinc(dt * (wa - wb) / (2 * np.pi))
        weights = np.swapaxes(Mv, 1, 2) * gamma
        dI = np.einsum("kab,kab->k", weights, Vh @ self.X[None] @ V)
        dQ = np.einsum("kab,kab->k", weights, Vh @ self.Y[None] @ V)
        scale = -2.0 / self.d ** 2
        grad = scale * np.real(np.conj(g) * np.concatenate([dI, dQ]))
        return cost, grad


def gradient(pulse, target, cfg):
    """(d infidelity / d eps_I, d infidelity / d eps_Q), each of length N."""
    if pulse.n_steps != cfg.n_steps:
        raise ValueError(f"pulse has {pulse.n_steps} steps, device expects {cfg.n_steps}")
    _, grad = GateObjective(target, cfg)(pulse.to_vector())
    return grad[:cfg.n_steps], grad[cfg.n_steps:]


class _Cached:
    """Share one evaluation between the value and gradient callbacks."""

    def __init__(self, fg):
        self.fg = fg
        self._x = None
        self._out = None

    def __call__(self, x):
        if self._x is None or not np.array_equal(x, self._x):
            self._x = np.array(x, copy=True)
            self._out = self.fg(x)
        return self._out

    def f(self, x):
        return self(x)[0]

    def g(self, x):
        return self(x)[1]


def _two_loop(g, s_hist, y_hist):
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(s_hist), reversed(y_hist)):
        rho = 1.0 / (y @ s)
        a = rho * (s @ q)
        q -= a * y
        alphas.append((rho, a))
    if s_hist:
        s, y = s_hist[-1], y_hist[-1]
        q *= (s @ y) / (y @ y)
    for (s, y), (rho, a) in zip(zip(s_hist, y_hist), reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def _wolfe(cached, x, d, g, f, f_prev):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        alpha, _, _, f_new, _, _ = line_search(cached.f, cached.g, x, d, gfk=g, old_fval=f,
                                               old_old_fval=f_prev, c1=1e-4, c2=0.9, maxiter=30)
    return alpha, f_new


def lbfgs(fg, x0, f_target=0.0, max_iter=500, gtol=1e-10, history=20, callback=None):
    """Limited-memory BFGS with a strong-Wolfe line search.

    ``fg`` returns (value, gradient). Stops once the value drops to
    ``f_target``, the max-abs gradient falls below ``gtol``, the iteration
    budget runs out, or no Wolfe step can be found. Returns
    (x, f, n_iter, trace, message); ``trace`` holds the value after every
    accepted iteration, starting with the initial one.
    """
    cached = _Cached(fg)
    x = np.array(x0, dtype=float)
    f, g = cached(x)
    trace = [f]
    s_hist, y_hist = [], []
    f_prev = f + 0.5 * np.linalg.norm(g)
    it = 0
    message = "iteration limit"
    while True:
        if f <= f_target:
            message = "target reached"
            break
        if np.max(np.abs(g)) <= gtol:
            message = "gradient tolerance"
            break
        if it >= max_iter:
            break
        d = _two_loop(g, s_hist, y_hist)
        if g @ d >= 0:
            s_hist.clear()
            y_hist.clear()
            d = -g
        alpha, f_new = _wolfe(cached, x, d, g, f, f_prev)
        if alpha is None and s_hist:
            s_hist.clear()
            y_hist.clear()
            d = -g
            alpha, f_new = _wolfe(cached, x, d, g, f, None)
        if alpha is None or f_new is None or f_new > f:
            message = "line search failed"
            break
        x_new = x + alpha * d
        f_new, g_new = cached(x_new)
        s, y = x_new - x, g_new - g
        if y @ s > 1e-14 * (s @ s) ** 0.5 * (y @ y) ** 0.5:
            s_hist.append(s)
            y_hist.append(y)
            if len(s_hist) > history:
                s_hist.pop(0)
                y_hist.pop(0)
        f_prev = f
        x, f, g = x_new, f_new, g_new
        it += 1
        trace.append(f)
        if callback is not None:
            callback(it, f)
    return x, f, it, trace, message


def _bounded(objective, eps_max):
    """Map unconstrained u to eps = eps_max * tanh(u) and chain the gradient."""
    def fg(u):
        t = np.tanh(u)
        f, g = objective(eps_max * t)
        return f, g * eps_max * (1 - t * t)
    return fg


def optimize_pulse(target, cfg, settings=None, initial_guess=None):
    """Run GRAPE from ``initial_guess`` (zero pulse if omitted)."""
    settings = settings or GrapeSettings()
    if initial_guess is None:
        initial_guess = ControlPulse.zeros(cfg)
    if initial_guess.n_steps != cfg.n_steps:
        raise ValueError(f"guess has {initial_guess.n_steps} steps, device expects {cfg.n_steps}")
    objective = GateObjective(target, cfg)
    x0 = initial_guess.to_vector()
    start = time.perf_counter()
    if cfg.eps_max is None:
        x, f, it, trace, msg = lbfgs(objective, x0, settings.target_infidelity,
                                     settings.max_iterations, settings.gradient_tolerance,
                                     settings.history_size)
    else:
        u0 = np.arctanh(np.clip(x0 / cfg.eps_max, -1 + 1e-9, 1 - 1e-9))
        u, f, it, trace, msg = lbfgs(_bounded(objective, cfg.eps_max), u0,
                                     settings.target_infidelity, settings.max_iterations,
                                     settings.gradient_tolerance, settings.history_size)
        x = cfg.eps_max * np.tanh(u)
    wall = time.perf_counter() - start
    pulse = ControlPulse.from_vector(x, cfg.dt_step)
    final = 1.0 - infidelity(pulse, target, cfg)
    log.debug("GRAPE: %s after %d iterations, infidelity %.3e", msg, it, 1 - final)
    return OptimizationResult(pulse=pulse, final_fidelity=final, iterations=it,
                              converged=(1 - final) <= settings.target_infidelity,
                              wall_time=wall, history=trace, message=msg)


def random_guess(cfg, seed, scale=0.05):
    rng = np.random.default_rng(seed)
    return ControlPulse(rng.uniform(-scale, scale, cfg.n_steps),
                        rng.uniform(-scale, scale, cfg.n_steps), cfg.dt_step)


@dataclass
class PulseFamily:
    parameter_name: str
    parameter_values: np.ndarray
    pulses: list
    device: DeviceConfig
    results: list = field(default_factory=list)

    def __post_init__(self):
        self.parameter_values = np.asarray(self.parameter_values, dtype=float)
        if len(self.pulses) != self.parameter_values.size:
            raise ValueError("one pulse per parameter value required")
        if self.results and len(self.results) != len(self.pulses):
            raise ValueError("one result per pulse required")
        if np.any(np.diff(self.parameter_values) <= 0):
            raise ValueError("parameter grid must be strictly increasing")

    def __len__(self):
        return len(self.pulses)

    @property
    def all_converged(self):
        return all(r.converged for r in self.results)

    def unconverged(self):
        return [lam for lam, r in zip(self.parameter_values, self.results) if not r.converged]


def check_grid(values):
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size == 0:
        raise ValueError("parameter grid must be a non-empty 1-D sequence")
    if np.any(np.diff(values) <= 0):
        raise ValueError(f"parameter grid must be strictly increasing: {values.tolist()}")
    return values


def sweep_family(targets, cfg, settings=None, parameter_name="dt", callback=None,
                 stop_on_failure=False):
    """Optimize one pulse per (lambda, target), warm-starting along the grid.

    The first member starts from the zero pulse. With ``warm_start`` off,
    every member starts from an independent random guess seeded from
    ``settings.seed``. With ``stop_on_failure`` the sweep ends at the first
    unconverged member, which is still included in the returned family.
    """
    settings = settings or GrapeSettings()
    lams = check_grid([lam for lam, _ in targets])
    results = []
    guess = ControlPulse.zeros(cfg)
    for i, (lam, target) in enumerate(targets):
        if not settings.warm_start:
            guess = random_guess(cfg, settings.seed + i)
        res = optimize_pulse(target, cfg, settings, guess)
        if not res.converged:
            log.warning("%s=%g did not converge (infidelity %.3e)", parameter_name, lam, res.infidelity)
        if callback is not None:
            callback(lam, res)
        results.append(res)
        if settings.warm_start:
            guess = res.pulse
        if stop_on_failure and not res.converged:
            break
    lams = lams[:len(results)]
    return PulseFamily(parameter_name, lams, [r.pulse for r in results], cfg, results)


# -- family archive ------------------------------------------------------------

def pulse_filename(parameter_name, value):
    return f"pulse_{parameter_name}_{value!r}.csv"


def save_family(family, directory, settings=None, extra=None):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    members = []
    for lam, pulse, res in zip(family.parameter_values.tolist(), family.pulses,
                               family.results or [None] * len(family)):
        name = pulse_filename(family.parameter_name, lam)
        save_pulse_csv(pulse, directory / name)
        entry = {"value": lam, "file": name}
        if res is not None:
            entry.update(fidelity=res.final_fidelity, iterations=res.iterations,
                         converged=res.converged, wall_time=res.wall_time)
        members.append(entry)
    doc = {"parameter_name": family.parameter_name,
           "grid": family.parameter_values.tolist(),
           "device": family.device.to_dict(),
           "settings": asdict(settings) if settings is not None else None,
           "members": members}
    if extra:
        doc.update(extra)
    (directory / "family.json").write_text(json.dumps(doc, indent=2))
    return directory


def load_family(directory):
    directory = Path(directory)
    doc = json.loads((directory / "family.json").read_text())
    device = DeviceConfig.from_dict(doc["device"])
    pulses, results = [], []
    for m in doc["members"]:
        pulse = load_pulse_csv(directory / m["file"])
        pulses.append(pulse)
        if "fidelity" in m:
            results.append(OptimizationResult(pulse=pulse, final_fidelity=m["fidelity"],
                                              iterations=m["iterations"], converged=m["converged"],
                                              wall_time=m["wall_time"]))
    if len(results) != len(pulses):
        results = []
    family = PulseFamily(doc["parameter_name"], doc["grid"], pulses, device, results)
    return family, doc
