import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

import oracle
from becat.detection import (
    EtaDistribution,
    apply_detection,
    detection_density,
    detection_expectation,
    detection_operator_coeffs,
    phase_grid,
    replay,
    run_sequence,
    sample_detection,
)
from becat.fock import QuantumState, basis_build, fock_state, normalize


def as_dict(state):
    return {state.basis.vector_at(i): a for i, a in enumerate(state.amplitudes)}


def test_operator_coefficients():
    assert np.allclose(detection_operator_coeffs(3, 0.0), np.ones(3) / math.sqrt(3))
    assert np.allclose(detection_operator_coeffs(3, math.pi), np.array([1, -1, 1]) / math.sqrt(3))
    assert np.allclose(detection_operator_coeffs(4, math.pi / 2), np.array([1, -1j, -1, 1j]) / 2)
    with pytest.raises(ValueError):
        detection_operator_coeffs(1, 0.0)


@pytest.mark.parametrize("occ", [(1, 0, 0), (2, 2, 2), (5, 5, 5)])
def test_fock_inputs_give_flat_density(occ):
    _, dens = detection_density(fock_state(occ), 256)
    assert np.allclose(dens, 1 / (2 * np.pi), atol=1e-12)


def test_density_is_normalised():
    psi = replay(fock_state((3, 3, 3)), [0.4, -1.1])
    u, dens = detection_density(psi, 512)
    assert dens.sum() * (2 * np.pi / 512) == pytest.approx(1.0, abs=1e-12)
    assert np.all(dens >= 0)


def test_one_detection_density_matches_bruteforce():
    N = 2
    psi = replay(fock_state((N, N, N)), [0.0])
    us = phase_grid(64)
    ours = detection_expectation(psi, us)
    ref_vec = oracle.detect_sequence((N, N, N), [0.0])
    ref = oracle.detection_density(ref_vec, 3, N, us)
    assert np.allclose(ours, ref, atol=1e-12)
    # the posterior favours a second atom near the first
    assert us[np.argmax(ours)] == pytest.approx(0.0, abs=2 * np.pi / 64)


@pytest.mark.parametrize("u", [0.0, 0.9, -2.4])
def test_first_detection_gives_three_term_state(u):
    N = 4
    post, _ = normalize(apply_detection(fock_state((N, N, N)), u))
    expected = {
        (N - 1, N, N): 1 / math.sqrt(3),
        (N, N - 1, N): np.exp(-1j * u) / math.sqrt(3),
        (N, N, N - 1): np.exp(-2j * u) / math.sqrt(3),
    }
    amps = as_dict(post)
    for occ, val in amps.items():
        assert val == pytest.approx(expected.get(occ, 0.0), abs=1e-14)


def test_single_atom_goes_to_vacuum():
    rng = np.random.default_rng(0)
    event, post = sample_detection(fock_state((1, 0, 0)), EtaDistribution.delta(), rng)
    assert post.total_atoms == 0 and abs(post.amplitudes[0]) == pytest.approx(1.0)
    assert -np.pi <= event.u < np.pi


@pytest.mark.parametrize("us", [[0.3, -1.2], [2.0, 2.0], [0.0, np.pi / 2, -0.7]])
def test_sequences_match_bruteforce(us):
    occ = (1, 1, 1) if len(us) == 2 else (2, 1, 2)
    ours = as_dict(replay(fock_state(occ), us))
    ref = oracle.sector_amplitudes(oracle.detect_sequence(occ, us), 3, max(occ), sum(occ) - len(us))
    for k, v in ref.items():
        assert ours[k] == pytest.approx(v, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(-np.pi, np.pi), st.integers(0, 2**32 - 1))
def test_phase_gradient_shifts_density(phi, seed):
    # multiplying |occ> by exp(-i phi sum_j j occ_j) shifts the density by phi
    rng = np.random.default_rng(seed)
    basis = basis_build(3, 2)
    amps = rng.normal(size=basis.dimension) + 1j * rng.normal(size=basis.dimension)
    psi = QuantumState(basis, amps / np.linalg.norm(amps))
    grad = np.exp(-1j * phi * (basis.occupations @ np.arange(3)))
    shifted = QuantumState(basis, psi.amplitudes * grad)
    us = np.linspace(-np.pi, np.pi, 17)
    assert np.allclose(detection_expectation(shifted, us), detection_expectation(psi, us + phi), atol=1e-12)
    product_vec = np.array([
        shifted.amplitudes[basis.index_of(o)] if sum(o) == 2 else 0
        for o in itertools.product(range(3), repeat=3)
    ])
    ref = oracle.detection_density(product_vec, 3, 2, us)
    assert np.allclose(detection_expectation(shifted, us), ref, atol=1e-12)


def test_mode_reversal_mirrors_density():
    rng = np.random.default_rng(5)
    basis = basis_build(3, 3)
    amps = rng.normal(size=basis.dimension) + 1j * rng.normal(size=basis.dimension)
    psi = QuantumState(basis, amps)
    rev = np.zeros_like(psi.amplitudes)
    rev[basis.index_of(basis.occupations[:, ::-1])] = psi.amplitudes
    us = phase_grid(32)
    assert np.allclose(detection_expectation(QuantumState(basis, rev), us), detection_expectation(psi, -us), atol=1e-12)


def test_run_invariants():
    run = run_sequence(fock_state((4, 4, 4)), 8, seed=3)
    state = run.initial_state
    for e in run.events:
        nxt, _ = normalize(apply_detection(state, e.u))
        assert nxt.total_atoms == state.total_atoms - 1
        assert nxt.norm() == pytest.approx(1.0, abs=1e-12)
        # no mode gains atoms
        support = nxt.basis.occupations[np.abs(nxt.amplitudes) > 1e-14]
        before = state.basis.occupations[np.abs(state.amplitudes) > 1e-14]
        assert np.all(support.max(axis=0) <= before.max(axis=0))
        state = nxt
    assert np.allclose(state.amplitudes, run.final_state.amplitudes, atol=1e-14)


def test_zero_detections_and_limits():
    psi = fock_state((2, 2, 2))
    run = run_sequence(psi, 0)
    assert run.final_state is psi and run.n_detections == 0
    with pytest.raises(ValueError):
        run_sequence(psi, 7)
    with pytest.raises(ValueError):
        detection_density(fock_state((0, 0, 0)))


def test_fixed_seed_is_reproducible():
    a = run_sequence(fock_state((5, 5, 5)), 6, seed=42)
    b = run_sequence(fock_state((5, 5, 5)), 6, seed=42)
    assert [e.u for e in a.events] == [e.u for e in b.events]
    assert np.array_equal(a.final_state.amplitudes, b.final_state.amplitudes)
    c = run_sequence(fock_state((5, 5, 5)), 6, seed=43)
    assert [e.u for e in a.events] != [e.u for e in c.events]


def test_sampled_u_follows_density():
    psi = replay(fock_state((2, 2, 2)), [0.6])
    rng = np.random.Generator(np.random.PCG64(7))
    F = EtaDistribution.delta()
    draws = np.array([sample_detection(psi, F, rng)[0].u for _ in range(10_000)])
    edges = np.linspace(-np.pi, np.pi, 33)
    fine = np.linspace(-np.pi, np.pi, 32 * 200 + 1)
    dens = detection_expectation(psi, fine)
    cell = [np.trapezoid(dens[i * 200:(i + 1) * 200 + 1], fine[i * 200:(i + 1) * 200 + 1]) for i in range(32)]
    expected = np.array(cell) / np.sum(cell) * len(draws)
    observed, _ = np.histogram(draws, edges)
    assert stats.chisquare(observed, expected).pvalue > 0.01


def test_eta_distributions():
    rng = np.random.default_rng(0)
    g = EtaDistribution.parse("gauss:1.0,0.05")
    etas = [g.sample(rng) for _ in range(500)]
    assert min(etas) > 0 and abs(np.mean(etas) - 1.0) < 0.01
    t = EtaDistribution.parse("table:1,2;0.25,0.75")
    draws = [t.sample(rng) for _ in range(4000)]
    assert set(draws) == {1.0, 2.0} and abs(draws.count(2.0) / 4000 - 0.75) < 0.03
    for text in ("delta:1.0", "gauss:1.0,0.05", "table:1.0,2.0;0.25,0.75"):
        assert EtaDistribution.parse(EtaDistribution.parse(text).spec()) == EtaDistribution.parse(text)
    for bad in ("delta:-1", "gauss:1", "table:1;", "poisson:3"):
        with pytest.raises(ValueError):
            EtaDistribution.parse(bad)


def test_theta_is_u_over_eta():
    run = run_sequence(fock_state((3, 3, 3)), 4, EtaDistribution.gaussian(2.0, 0.1), seed=1)
    for e in run.events:
        assert e.theta == e.u / e.eta and e.eta > 0
