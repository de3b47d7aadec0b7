"""Energies, renormalization, gradients, and the flow pairing.

The gradient oracle is plain central differencing of the scalar energies; the
renormalization constants are checked against hand-summed lattice values."""

import numpy as np
import pytest

from sdnlwave.functionals import (
    FunctionalReport,
    bracket_batch,
    bracket_from_gradients,
    bracket_h_energy,
    evaluate_functionals,
    gaussian_energy,
    grad_energy,
    grad_hamiltonian,
    hamiltonian,
    interaction_batch,
    interaction_energy,
    script_energy,
    sigma_renorm,
    total_energy,
    wick_square,
)
from sdnlwave.dynamics import FlowConfig, evolve
from sdnlwave.gaussian import MeasureSpec, sample_mu, sample_mu_position, sample_mu_states
from sdnlwave.spectral import (
    PhaseState,
    SpectralField,
    apply_multiplier,
    dealiased_pair_product,
    field_from_modes,
    inner_product,
    project_square,
    sobolev_norm,
    zero_field,
)

SEED = 909


def random_state(cutoff, seed, scale=1.0):
    st = sample_mu_states(MeasureSpec(1.0, cutoff), seed, 1)[0]
    return PhaseState(scale * st.u, scale * st.v)


def test_sigma_anchors():
    # |n|_inf <= 0: just the origin.  |n|_inf <= 1: origin + 4 edges (<n>^2 = 2)
    # + 4 corners (<n>^2 = 3) -> 1 + 4/2 + 4/3 = 13/3.
    assert sigma_renorm(0) == 1.0
    assert sigma_renorm(1) == pytest.approx(13.0 / 3.0, rel=1e-15)
    direct = 0.0
    for n1 in range(-4, 5):
        for n2 in range(-4, 5):
            direct += 1.0 / (1.0 + n1 * n1 + n2 * n2)
    assert sigma_renorm(4) == pytest.approx(direct, rel=1e-14)


def test_sigma_log_growth():
    """sigma_N grows like 2 pi ln N for large N."""
    slope = (sigma_renorm(512) - sigma_renorm(128)) / np.log(512.0 / 128.0)
    assert slope == pytest.approx(2.0 * np.pi, rel=0.02)


def test_wick_square_single_mode():
    """u = 2 Re(c e^{i n.x}): the centered square has modes 2n, 0, -2n with
    hand-computable coefficients."""
    n, c, s, N = (1, 2), 0.3 - 0.7j, 0.75, 3
    u = field_from_modes(N, {n: c})
    q = wick_square(u, s, N)
    jb = np.sqrt(1.0 + 1 + 4)
    w = c * jb**s
    assert q.cutoff == 2 * N
    assert q.coeff[2 * N + 2, 2 * N + 4] == pytest.approx(w**2, rel=1e-12)
    assert q.coeff[2 * N - 2, 2 * N - 4] == pytest.approx(np.conj(w) ** 2, rel=1e-12)
    zero_mode = 2.0 * abs(w) ** 2 - sigma_renorm(N)
    assert q.coeff[2 * N, 2 * N] == pytest.approx(zero_mode, rel=1e-12)


def test_wick_square_zero_mean_under_reference():
    """E Q = 0 coefficientwise when u has the matching position law; in
    particular the subtraction constant is independent of s."""
    for s in (0.5, 1.25):
        U = sample_mu_position(s, 3, SEED, 30000)
        acc = np.zeros((13, 13), dtype=np.complex128)
        for i in range(0, 30000, 6000):
            batch = U[i:i + 6000]
            for u in batch[:1500]:
                acc += wick_square(SpectralField(u, 3), s, 3).coeff
        mean = acc / (5 * 1500)
        assert abs(mean[6, 6]) < 0.1  # zero mode fluctuates like sigma/sqrt(n)
        assert np.max(np.abs(mean)) < 0.15


def test_q_shift_identity():
    """Q(u+w) - Q(u) = 2 (<D>^s P u)(<D>^s P w) + (<D>^s P w)^2, coefficientwise."""
    s, N = 0.6, 4
    u = random_state(N, SEED + 1).u
    w = random_state(N, SEED + 2).u
    lhs = wick_square(u + w, s, N) - wick_square(u, s, N)
    su = apply_multiplier(project_square(u, N), lambda jb: jb**s)
    sw = apply_multiplier(project_square(w, N), lambda jb: jb**s)
    rhs = 2.0 * dealiased_pair_product(su, sw) + dealiased_pair_product(sw, sw)
    np.testing.assert_allclose(lhs.coeff, rhs.coeff, atol=1e-12)


def test_hamiltonian_hand_value():
    """Single cosine mode: every integral is elementary."""
    c = 0.5
    u = field_from_modes(2, {(1, 0): c})   # u = 2c cos(x)
    v = field_from_modes(2, {(0, 0): 0.25})
    st = PhaseState(u, v)
    quad = 0.5 * (2 * c**2 + 2 * 1 * c**2 + 0.25**2)
    quart = 0.25 * 6.0 * c**4          # mean of (2c cos)^4 = 6 c^4
    assert hamiltonian(st) == pytest.approx(quad + quart, rel=1e-12)


def test_hamiltonian_truncates_quartic():
    """With a cutoff argument the quartic sees only the low square."""
    from sdnlwave.spectral import lp_norm

    st = random_state(6, SEED + 3)
    full_quad = 0.5 * (sobolev_norm(st.u, 1.0) ** 2 + sobolev_norm(st.v, 0.0) ** 2)
    low_quartic = 0.25 * lp_norm(project_square(st.u, 2), 4) ** 4
    assert hamiltonian(st, N=2) == pytest.approx(full_quad + low_quartic, rel=1e-11)


def test_gaussian_energy_value():
    st = random_state(4, SEED + 4)
    expect = 0.5 * (sobolev_norm(st.u, 1.0 + 0.8) ** 2 + sobolev_norm(st.v, 0.8) ** 2)
    assert gaussian_energy(st, 0.8) == pytest.approx(expect, rel=1e-12)


def test_energy_two_way_consistency():
    """total = gaussian + interaction = script + hamiltonian, on random states."""
    for k in range(5):
        st = random_state(5, SEED + 10 + k)
        s, N = 0.9, 5
        tot = total_energy(st, s, N)
        assert tot == pytest.approx(gaussian_energy(st, s) + interaction_energy(st.u, s, N),
                                    rel=1e-10)
        assert tot == pytest.approx(script_energy(st, s, N) + hamiltonian(st, N=N),
                                    rel=1e-10)


def test_interaction_batch_matches_scalar():
    U, _ = sample_mu(MeasureSpec(1.0, 3), SEED, 6)
    batch = interaction_batch(U, 3, 1.0, 3)
    for i in range(6):
        assert batch[i] == pytest.approx(interaction_energy(SpectralField(U[i], 3), 1.0, 3),
                                         rel=1e-13)


def _fd_directional(fun, st, du, dv, eps):
    up = PhaseState(st.u + eps * du, st.v + eps * dv)
    dn = PhaseState(st.u + (-eps) * du, st.v + (-eps) * dv)
    return (fun(up) - fun(dn)) / (2 * eps)


@pytest.mark.parametrize("which", ["hamiltonian", "energy"])
def test_gradients_match_central_differences(which):
    s, N = 1.1, 5
    st = random_state(N, SEED + 20)
    if which == "hamiltonian":
        fun = lambda x: hamiltonian(x, N=N)
        grad = grad_hamiltonian(st, N=N)
    else:
        fun = lambda x: total_energy(x, s, N)
        grad = grad_energy(st, s, N)
    rng = np.random.default_rng(5)
    for k in range(6):
        du = random_state(N, 1000 + 7 * k + int(rng.integers(1e6))).u
        dv = random_state(N, 2000 + 7 * k + int(rng.integers(1e6))).v
        fd = _fd_directional(fun, st, du, dv, 1e-5)
        # pairing <grad_u, du> + <grad_v, dv> is the directional derivative
        pair = inner_product(grad.u, du) + inner_product(grad.v, dv)
        assert fd == pytest.approx(pair, rel=1e-6)


def test_grad_hamiltonian_linear_part():
    """On a state below the cutoff with the cubic dropped analytically:
    dH/du = (1 - Lap) u + P (P u)^3, dH/dv = v."""
    st = random_state(3, SEED + 21, scale=1e-5)  # cubic ~ 1e-15, below the atol
    g = grad_hamiltonian(st)
    lin = apply_multiplier(st.u, lambda jb: jb**2)
    np.testing.assert_allclose(g.u.coeff, lin.coeff, atol=1e-13)
    np.testing.assert_allclose(g.v.coeff, st.v.coeff, atol=1e-18)


def test_self_bracket_vanishes():
    """The antisymmetric pairing of H's own gradients is exactly zero."""
    st = random_state(4, SEED + 22)
    g = grad_hamiltonian(st, N=4)
    val = inner_product(g.u, g.v) - inner_product(g.v, g.u)
    assert abs(val) < 1e-12 * max(1.0, inner_product(g.u, g.v))


def test_bracket_two_implementations_agree():
    st = random_state(5, SEED + 23)
    a = bracket_h_energy(st, 0.8, 5)
    b = bracket_from_gradients(st, 0.8, 5)
    assert a == pytest.approx(b, rel=1e-10)


def test_bracket_batch_matches_scalar():
    U, V = sample_mu(MeasureSpec(1.0, 3), SEED, 5)
    vals = bracket_batch(U, V, 3, 1.0, 3)
    for i in range(5):
        st = PhaseState(SpectralField(U[i], 3), SpectralField(V[i], 3))
        assert vals[i] == pytest.approx(bracket_h_energy(st, 1.0, 3), rel=1e-12)


def test_bracket_is_minus_energy_derivative():
    """Along the undamped noise-free truncated flow, dE/dt = -bracket."""
    s, N, d = 1.0, 4, 1e-4
    st = random_state(N, SEED + 24)
    fwd = evolve(st, FlowConfig(s=s, N=N, dt=d, T=d, damped=False, noise=False))
    bwd = evolve(st, FlowConfig(s=s, N=N, dt=-d, T=-d, damped=False, noise=False))
    fd = (total_energy(fwd, s, N) - total_energy(bwd, s, N)) / (2 * d)
    br = bracket_h_energy(st, s, N)
    assert fd == pytest.approx(-br, rel=1e-5)


def test_evaluate_functionals_report():
    st = random_state(4, SEED + 25)
    rep = evaluate_functionals(st, 1.0, 4)
    assert isinstance(rep, FunctionalReport)
    assert rep.s == 1.0 and rep.N == 4
    assert rep.sigma == pytest.approx(sigma_renorm(4))
    assert rep.hamiltonian == pytest.approx(hamiltonian(st, N=4), rel=1e-12)
    assert rep.total == pytest.approx(rep.gaussian + rep.interaction, rel=1e-10)
    assert rep.total == pytest.approx(rep.script + rep.hamiltonian, rel=1e-10)
    assert rep.bracket == pytest.approx(bracket_h_energy(st, 1.0, 4), rel=1e-12)


def test_interaction_zero_field():
    assert interaction_energy(zero_field(4), 1.0, 4) == pytest.approx(0.0, abs=1e-15)
    # and the wick square of the zero field is the negative constant
    q = wick_square(zero_field(4), 1.0, 4)
    assert q.coeff[8, 8] == pytest.approx(-sigma_renorm(4))
