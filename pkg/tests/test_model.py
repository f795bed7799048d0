import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from svdstop.model import (
    DimensionMismatchError,
    NoiseModel,
    Observation,
    Signal,
    SobolevClass,
    Spectrum,
    load_vector,
    make_polynomial_spectrum,
    replication_seed,
    require_same_dim,
    satisfies_polynomial_decay,
    save_vector,
    simulate_observation,
    sobolev_radius,
    weak_norm_sq,
)


def test_polynomial_spectrum_values():
    spec = make_polynomial_spectrum(4, 0.5)
    assert np.allclose(spec.values, [1.0, 2 ** -0.5, 3 ** -0.5, 0.5])
    assert spec.decay_certificate == (0.5, 1.0)
    assert spec.dim == 4


def test_spectrum_rejects_increasing():
    with pytest.raises(ValueError):
        Spectrum(np.array([1.0, 2.0]))


def test_spectrum_rejects_nonpositive():
    with pytest.raises(ValueError):
        Spectrum(np.array([1.0, 0.0]))


def test_decay_certificate_enforced():
    # lam_2 = 0.1 is far below 2**-0.5 so the envelope with c=1 fails
    with pytest.raises(ValueError):
        Spectrum(np.array([1.0, 0.1]), decay_certificate=(0.5, 1.0))
    # a generous constant admits it
    Spectrum(np.array([1.0, 0.1]), decay_certificate=(0.5, 10.0))


def test_satisfies_polynomial_decay_exact_case():
    vals = make_polynomial_spectrum(50, 1.0).values
    assert satisfies_polynomial_decay(vals, 1.0, 1.0)
    assert not satisfies_polynomial_decay(vals, 0.5, 1.0)


def test_require_same_dim():
    assert require_same_dim(3, 3, 3) == 3
    with pytest.raises(DimensionMismatchError):
        require_same_dim(3, 4)


def test_observation_norm_header_is_checked():
    y = np.array([1.0, 2.0])
    Observation(y=y, y_norm_sq=5.0, delta=0.1)
    with pytest.raises(ValueError):
        Observation(y=y, y_norm_sq=4.0, delta=0.1)


def test_noise_model_validation():
    with pytest.raises(ValueError):
        NoiseModel(delta=-0.1)
    with pytest.raises(ValueError):
        NoiseModel(delta=0.1, kind="laplace")


def test_simulation_is_seed_deterministic():
    spec = make_polynomial_spectrum(20, 0.5)
    sig = Signal(np.ones(20))
    noise = NoiseModel(delta=0.3)
    a = simulate_observation(sig, spec, noise, replication_seed(7, 3))
    b = simulate_observation(sig, spec, noise, replication_seed(7, 3))
    assert np.array_equal(a.y, b.y)
    c = simulate_observation(sig, spec, noise, replication_seed(7, 4))
    assert not np.array_equal(a.y, c.y)


def test_zero_noise_recovers_weak_image():
    spec = make_polynomial_spectrum(6, 1.0)
    sig = Signal(np.arange(1.0, 7.0))
    obs = simulate_observation(sig, spec, NoiseModel(delta=0.0), 0)
    assert np.array_equal(obs.y, spec.values * sig.coefficients)


def test_rademacher_noise_values():
    spec = make_polynomial_spectrum(200, 0.0)
    sig = Signal(np.zeros(200))
    obs = simulate_observation(sig, spec, NoiseModel(delta=1.0, kind="rademacher"), 5)
    assert set(np.unique(obs.y)) == {-1.0, 1.0}


def test_observation_carries_noise_realisation():
    spec = make_polynomial_spectrum(10, 0.5)
    sig = Signal(np.ones(10))
    noise = NoiseModel(delta=0.2)
    obs = simulate_observation(sig, spec, noise, 11)
    assert np.allclose(obs.y, spec.values * sig.coefficients + 0.2 * obs.noise)


def test_weak_norm_sq_hand_value():
    spec = Spectrum(np.array([1.0, 0.5]))
    assert weak_norm_sq(np.array([2.0, 4.0]), spec) == pytest.approx(4.0 + 4.0)


def test_sobolev_radius_and_class():
    sig = Signal(np.array([1.0, 0.5]))
    # sum i**2 mu_i**2 = 1 + 4*0.25 = 2
    assert sobolev_radius(sig, 1.0) == pytest.approx(math.sqrt(2.0))
    assert SobolevClass(beta=1.0, radius=1.5).contains(sig)
    assert not SobolevClass(beta=1.0, radius=1.0).contains(sig)


def test_vector_roundtrip(tmp_path):
    path = tmp_path / "vec.txt"
    values = np.array([1.0, -2.5e-13, 3.141592653589793, 0.0])
    save_vector(path, values)
    again = load_vector(path)
    assert np.array_equal(values, again)


def test_replication_seed_rejects_negative_index():
    with pytest.raises(ValueError):
        replication_seed(0, -1)


@given(st.integers(0, 2**32 - 1), st.integers(0, 1000))
def test_replication_streams_reproducible(base, idx):
    a = np.random.default_rng(replication_seed(base, idx)).standard_normal(4)
    b = np.random.default_rng(replication_seed(base, idx)).standard_normal(4)
    assert np.array_equal(a, b)


@given(st.integers(1, 40), st.floats(0.0, 3.0))
def test_simulated_norm_header_consistent(dim, p):
    spec = make_polynomial_spectrum(dim, p)
    sig = Signal(np.linspace(1.0, 0.0, dim))
    obs = simulate_observation(sig, spec, NoiseModel(delta=0.5), 1)
    assert obs.y_norm_sq == pytest.approx(float(np.dot(obs.y, obs.y)), rel=1e-12)
