import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pulserecon.grape import PulseFamily
from pulserecon.harness import verify_model
from pulserecon.linalg import fidelity
from pulserecon.reconstruction import (DomainError, FitError, PolyPulseModel, SymmetryError,
                                       SpectralPulseModel, fft_pulse, fit_poly_model,
                                       fit_spectral_model, ifft_pulse, load_model, reconstruct,
                                       reconstruct_poly, reconstruct_spectral, save_model)
from pulserecon.transmon import ControlPulse, DeviceConfig, propagate

from conftest import DT_GRID

SYNTH_CFG = DeviceConfig(dim=2, n_steps=64, pulse_duration=8.0)


def cubic_pulse(lam, cfg=SYNTH_CFG):
    t = cfg.times()
    eI = (0.1 + 0.02 * lam) + (0.3 - 0.1 * lam) * t - 0.01 * lam * t**2 + (0.002 + 0.001 * lam) * t**3
    eQ = -0.2 * lam + 0.05 * t + (0.004 - 0.003 * lam) * t**2 - 0.0005 * t**3
    return ControlPulse(eI, eQ, cfg.dt_step)


def quadratic_spectrum_pulse(lam, cfg=SYNTH_CFG):
    t = cfg.times() / cfg.pulse_duration
    # every spectral bin is a fixed complex vector times a quadratic in lambda
    eI = (1 + lam - 0.5 * lam**2) * np.sin(2 * np.pi * t) + lam**2 * np.exp(-((t - 0.4) / 0.1) ** 2)
    eQ = (0.3 - lam) * np.cos(6 * np.pi * t) + 0.2 * lam**2 * t
    return ControlPulse(eI, eQ, cfg.dt_step)


def synthetic_family(make, grid, name="m_e"):
    return PulseFamily(name, grid, [make(v) for v in grid], SYNTH_CFG)


def rms(a, b):
    return np.sqrt(np.mean((a.to_vector() - b.to_vector()) ** 2))


# -- polynomial model ---------------------------------------------------------------

def test_synthetic_cubic_family_reproduced():
    grid = np.linspace(0.5, 2.0, 5)
    model = fit_poly_model(synthetic_family(cubic_pulse, grid), degree_time=3, degree_param=1)
    for lam in grid:
        assert rms(reconstruct_poly(model, lam), cubic_pulse(lam)) < 1e-8
    for lam in (0.61, 1.3, 1.97):
        assert np.max(np.abs(reconstruct_poly(model, lam).to_vector()
                             - cubic_pulse(lam).to_vector())) < 1e-8
    assert max(model.diagnostics["node_rms"]) < 1e-10


def test_poly_model_domain_and_shape(dt_family):
    model = fit_poly_model(dt_family, 10, 4)
    assert model.coeffs.shape == (2, 11, 5)
    assert model.param_domain == (0.5, 3.5)
    assert model.time_domain == (0.0, pytest.approx(50.0))
    with pytest.raises(DomainError):
        reconstruct_poly(model, 3.6)
    assert reconstruct_poly(model, 3.6, extrapolate=True).n_steps == 400


def test_underdetermined_fits_rejected():
    fam = synthetic_family(cubic_pulse, [0.5, 1.0, 1.5])
    with pytest.raises(FitError):
        fit_poly_model(fam, degree_time=3, degree_param=3)
    with pytest.raises(FitError):
        fit_poly_model(fam, degree_time=64, degree_param=1)


def test_node_reconstruction_within_reported_residual(dt_family):
    model = fit_poly_model(dt_family, 10, 4)
    for lam, pulse, node_rms in zip(DT_GRID, dt_family.pulses, model.diagnostics["node_rms"]):
        assert rms(reconstruct_poly(model, lam), pulse) == pytest.approx(node_rms, rel=1e-6, abs=1e-15)


def test_surrogate_consistency_on_nodes(dt_family, dt_targets, device2):
    model = fit_poly_model(dt_family, 10, 4)
    report = verify_model(model, dt_targets, DT_GRID, device2)
    for lam, f, res in zip(DT_GRID, report.fidelities, dt_family.results):
        fitted = fit_poly_model(PulseFamily("dt", [lam], [res.pulse], device2), 10, 0)
        raw_fit = fidelity(dt_targets(lam), propagate(device2, reconstruct_poly(fitted, lam)))
        assert f >= raw_fit - 1e-6
        assert f >= res.final_fidelity - 1e-5


def test_low_order_coefficients_vary_smoothly(dt_family):
    model = fit_poly_model(dt_family, 10, 4)
    C = np.array([model.time_coefficients(v) for v in DT_GRID])  # (members, quadrature, j)
    param_rms = np.array(model.diagnostics["param_fit_rms"])
    for q in range(2):
        for j in (0, 1):
            scale = np.max(np.abs(C[:, q, j]))
            assert param_rms[q, j] <= 1e-2 * scale + 1e-9  # some vanish by symmetry
    # the dominant one is close to a straight line in dt
    q, j = np.unravel_index(np.argmax(np.abs(C[:, :, :2]).max(axis=0)), (2, 2))
    y = C[:, q, j]
    line = np.polyval(np.polyfit(DT_GRID, y, 1), DT_GRID)
    assert np.max(np.abs(y - line)) <= 0.02 * np.ptp(y)


def _lowpass(x, keep=3):
    spec = np.fft.rfft(x)
    spec[keep:] = 0
    return np.fft.irfft(spec, x.size)


def test_intermediate_dt_lies_between_neighbours(dt_family):
    model = fit_poly_model(dt_family, 10, 4)
    lo, hi = dt_family.pulses[1], dt_family.pulses[2]  # dt = 1.0, 1.5
    mid = reconstruct_poly(model, 1.31)
    q = int(np.argmax([np.linalg.norm(lo.eps_I), np.linalg.norm(lo.eps_Q)]))
    a, b, c = (_lowpass((p.eps_I, p.eps_Q)[q]) for p in (lo, mid, hi))
    assert np.all(b >= np.minimum(a, c) - 1e-9)
    assert np.all(b <= np.maximum(a, c) + 1e-9)


def test_leave_one_out_dt_family(dt_family, dt_targets, device2):
    fids = []
    for i, lam in enumerate(DT_GRID):
        keep = [j for j in range(DT_GRID.size) if j != i]
        sub = PulseFamily("dt", DT_GRID[keep], [dt_family.pulses[j] for j in keep], device2)
        pulse = reconstruct_poly(fit_poly_model(sub, 10, 4), lam, extrapolate=True)
        fids.append(fidelity(dt_targets(lam), propagate(device2, pulse)))
    assert np.mean(fids) >= 0.9999


def test_poly_model_file_roundtrip(tmp_path, dt_family):
    model = fit_poly_model(dt_family, 10, 4)
    back = load_model(save_model(model, tmp_path / "model_poly.json"))
    assert isinstance(back, PolyPulseModel)
    assert np.array_equal(back.coeffs, model.coeffs)
    assert back.param_domain == model.param_domain and back.dt_step == model.dt_step
    assert np.array_equal(reconstruct(back, 1.31).to_vector(), reconstruct(model, 1.31).to_vector())


# -- Fourier transforms ---------------------------------------------------------------

def test_constant_envelope_has_only_dc():
    sI, sQ = fft_pulse(ControlPulse(np.full(16, 0.3), np.zeros(16), 0.1))
    assert sI[0] == pytest.approx(0.3 * 4)
    assert np.max(np.abs(sI[1:])) < 1e-15 and np.max(np.abs(sQ)) == 0


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(1, 300))
def test_fft_roundtrip_and_symmetry(seed, n):
    rng = np.random.default_rng(seed)
    p = ControlPulse(rng.normal(size=n), rng.normal(size=n), 0.1)
    sI, sQ = fft_pulse(p)
    for s in (sI, sQ):
        assert np.max(np.abs(s - np.conj(np.roll(s[::-1], 1)))) < 1e-12
    back = ifft_pulse(sI, sQ, 0.1)
    assert np.max(np.abs(back.to_vector() - p.to_vector())) < 1e-12


def test_ifft_rejects_asymmetric_spectrum():
    spec = np.zeros(8, dtype=complex)
    spec[1] = 1.0
    with pytest.raises(SymmetryError):
        ifft_pulse(spec, np.zeros(8), 0.1)


# -- spectral model ---------------------------------------------------------------------

def test_spectral_quadratic_family_exact_off_grid():
    grid = np.linspace(0.7, 1.9, 7)
    model = fit_spectral_model(synthetic_family(quadratic_spectrum_pulse, grid))
    for lam in (0.73, 1.05, 1.45, 1.88):
        err = np.max(np.abs(reconstruct_spectral(model, lam).to_vector()
                            - quadratic_spectrum_pulse(lam).to_vector()))
        assert err < 1e-8


def test_spectral_two_members_is_linear():
    a, b = quadratic_spectrum_pulse(0.0), quadratic_spectrum_pulse(1.0)
    model = fit_spectral_model(PulseFamily("m_e", [1.0, 2.0], [a, b], SYNTH_CFG))
    p = reconstruct_spectral(model, 1.25)
    assert np.max(np.abs(p.to_vector() - (0.75 * a.to_vector() + 0.25 * b.to_vector()))) < 1e-12


def test_spectral_nodes_exact(sto3g_family):
    model = fit_spectral_model(sto3g_family)
    for lam, pulse in zip(sto3g_family.parameter_values, sto3g_family.pulses):
        assert np.max(np.abs(reconstruct_spectral(model, lam).to_vector() - pulse.to_vector())) < 1e-10


def test_spectral_model_lossless(sto3g_family):
    model = fit_spectral_model(sto3g_family)
    for spec, pulse in zip(model.spectra, sto3g_family.pulses):
        back = ifft_pulse(spec[0], spec[1], model.dt_step)
        assert np.max(np.abs(back.to_vector() - pulse.to_vector())) < 1e-10


def test_spectra_vary_smoothly_in_mass(sto3g_family):
    S = fit_spectral_model(sto3g_family).spectra  # (members, quadrature, bin)
    jumps = np.abs(np.diff(S, axis=0))
    magnitude = np.max(np.abs(S), axis=0)
    significant = magnitude > 1e-3 * magnitude.max()
    # each step compared with the mean of the steps on either side
    local = jumps[1:-1] / (0.5 * (jumps[:-2] + jumps[2:]))
    assert np.max(local[:, significant]) <= 10


def test_spectral_errors():
    with pytest.raises(FitError):
        fit_spectral_model(synthetic_family(cubic_pulse, [1.0]))
    with pytest.raises(FitError):
        fit_spectral_model(synthetic_family(cubic_pulse, [1.0, 2.0]), boundary="clamped")
    model = fit_spectral_model(synthetic_family(cubic_pulse, [1.0, 1.5, 2.0]))
    with pytest.raises(DomainError):
        reconstruct_spectral(model, 2.5)
    # an imaginary DC component cannot come from real pulses
    n = model.n_steps
    model.spline_coeffs[:, :, n] += 1.0
    model = SpectralPulseModel(model.param_values, model.spectra, model.breakpoints,
                               model.spline_coeffs, n, model.dt_step)
    with pytest.raises(SymmetryError):
        reconstruct_spectral(model, 1.2)


def test_duplicate_parameter_rejected():
    fam = synthetic_family(cubic_pulse, [1.0, 2.0])
    fam.parameter_values = np.array([1.0, 1.0])
    with pytest.raises(FitError):
        fit_spectral_model(fam)


def test_spectral_model_file_roundtrip(tmp_path, sto3g_family):
    model = fit_spectral_model(sto3g_family)
    back = load_model(save_model(model, tmp_path / "model_spectral.json"))
    assert isinstance(back, SpectralPulseModel)
    assert np.array_equal(back.spectra, model.spectra)
    assert np.array_equal(back.spline_coeffs, model.spline_coeffs)
    assert np.array_equal(reconstruct(back, 1.45).to_vector(), reconstruct(model, 1.45).to_vector())


def test_reconstruct_rejects_unknown_model():
    with pytest.raises(TypeError):
        reconstruct(object(), 1.0)
