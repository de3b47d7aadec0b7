"""Fourier-side arithmetic: products against brute-force convolutions,
norms against hand-computed values, snapshot round-trips."""

import numpy as np
import pytest
from scipy import signal

from sdnlwave.spectral import (
    PhaseState,
    SpectralField,
    coefficients_from_grid,
    dealiased_pair_product,
    dealiased_product,
    field_from_modes,
    grid_values,
    inner_product,
    lp_norm,
    mode_grid,
    project_square,
    read_field_snapshot,
    read_state_snapshot,
    sobolev_norm,
    write_field_snapshot,
    write_state_snapshot,
    zero_field,
    apply_multiplier,
)


def random_field(cutoff, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    size = 2 * cutoff + 1
    c = rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))
    c = 0.5 * (c + np.conj(c[::-1, ::-1]))
    return SpectralField(scale * c, cutoff)


def test_mode_grid_brackets():
    g = mode_grid(2)
    assert g.jb[2, 2] == 1.0  # origin
    assert g.jb[3, 2] == pytest.approx(np.sqrt(2.0))
    assert g.jb[0, 0] == pytest.approx(3.0)  # n = (-2, -2)
    assert g.jb_shift[2, 2] == pytest.approx(np.sqrt(0.75))
    # half lattice covers exactly half of the off-origin square
    assert g.n_half == ((2 * 2 + 1) ** 2 - 1) // 2


def test_field_from_modes_mirrors():
    f = field_from_modes(3, {(1, 2): 1.0 + 2.0j, (0, 0): 4.0})
    assert f.coeff[3 + 1, 3 + 2] == 1.0 + 2.0j
    assert f.coeff[3 - 1, 3 - 2] == 1.0 - 2.0j
    assert f.coeff[3, 3] == 4.0
    assert f.is_hermitian()


def test_field_shape_validation():
    with pytest.raises(ValueError):
        SpectralField(np.zeros((3, 3), dtype=complex), 2)
    with pytest.raises(ValueError):
        PhaseState(zero_field(2), zero_field(3))
    with pytest.raises(ValueError):
        field_from_modes(2, {(3, 0): 1.0})


def test_grid_round_trip():
    f = random_field(5, seed=0)
    for L in (11, 16, 24):
        vals = grid_values(f, L)
        assert vals.dtype == np.float64
        back = coefficients_from_grid(vals, 5)
        np.testing.assert_allclose(back.coeff, f.coeff, atol=1e-13)


def test_grid_values_match_direct_sum():
    # evaluate the trig sum by hand at a few points
    f = field_from_modes(2, {(1, 0): 0.5 - 0.25j, (1, 1): 0.125j})
    L = 7
    vals = grid_values(f, L)
    x = 2 * np.pi * np.arange(L) / L
    direct = np.zeros((L, L))
    for a in range(L):
        for b in range(L):
            tot = 0.0j
            for i in range(5):
                for j in range(5):
                    tot += f.coeff[i, j] * np.exp(1j * ((i - 2) * x[a] + (j - 2) * x[b]))
            direct[a, b] = tot.real
    np.testing.assert_allclose(vals, direct, atol=1e-12)


def test_inner_product_orthonormality():
    f = field_from_modes(4, {(1, 3): 1.0})
    g = field_from_modes(4, {(1, 3): 1.0})
    h = field_from_modes(4, {(2, 0): 1.0})
    # mean of |e_n + e_{-n}|^2 = 2
    assert inner_product(f, g) == pytest.approx(2.0)
    assert inner_product(f, h) == pytest.approx(0.0, abs=1e-15)
    # mixed cutoffs embed into the common square
    assert inner_product(f, project_square(g, 6)) == pytest.approx(2.0)


def test_parseval():
    f = random_field(6, seed=1)
    assert lp_norm(f, 2) == pytest.approx(sobolev_norm(f, 0.0), rel=1e-12)
    assert inner_product(f, f) == pytest.approx(sobolev_norm(f, 0.0) ** 2, rel=1e-12)


def test_sobolev_norm_single_mode():
    f = field_from_modes(3, {(1, 2): 2.0})
    jb = np.sqrt(1.0 + 1 + 4)
    for alpha in (-0.75, 0.0, 0.5, 1.0):
        assert sobolev_norm(f, alpha) == pytest.approx(np.sqrt(2.0) * 2.0 * jb**alpha)


def test_lp_norm_constant_and_inf():
    f = field_from_modes(2, {(0, 0): -3.0})
    assert lp_norm(f, 1) == pytest.approx(3.0)
    assert lp_norm(f, 4) == pytest.approx(3.0)
    assert lp_norm(f, np.inf) == pytest.approx(3.0)
    g = field_from_modes(2, {(1, 0): 0.5})  # cos(x) with amplitude 1
    assert lp_norm(g, np.inf) == pytest.approx(1.0, rel=1e-9)
    assert lp_norm(g, 2) == pytest.approx(np.sqrt(0.5), rel=1e-12)


def test_pair_product_matches_convolution():
    """Coefficients of f*g are the 2D convolution of the coefficient squares."""
    N = 5
    f = random_field(N, seed=2)
    g = random_field(N, seed=3)
    full = signal.convolve2d(f.coeff, g.coeff)  # support (4N+1)^2
    prod = dealiased_pair_product(f, g)
    assert prod.cutoff == 2 * N
    np.testing.assert_allclose(prod.coeff, full, atol=1e-11)
    # restriction keeps the centered block
    small = dealiased_pair_product(f, g, out_cutoff=3)
    lo = 2 * N - 3
    np.testing.assert_allclose(small.coeff, full[lo:lo + 7, lo:lo + 7], atol=1e-11)


def test_triple_product_matches_convolution():
    """Brute-force O(N^6) oracle for the dealiased cubic at small cutoff."""
    N = 3
    f = random_field(N, seed=4)
    g = random_field(N, seed=5)
    h = random_field(N, seed=6)
    full = signal.convolve2d(signal.convolve2d(f.coeff, g.coeff), h.coeff)
    cube = dealiased_product(f, g, h)
    assert cube.cutoff == 3 * N
    np.testing.assert_allclose(cube.coeff, full, atol=1e-11)
    trunc = dealiased_product(f, g, h, out_cutoff=N)
    lo = 3 * N - N
    np.testing.assert_allclose(trunc.coeff, full[lo:lo + 2 * N + 1, lo:lo + 2 * N + 1],
                               atol=1e-11)


def test_product_is_hermitian():
    f = random_field(4, seed=7)
    assert dealiased_pair_product(f, f).is_hermitian()
    assert dealiased_product(f, f, f, out_cutoff=4).is_hermitian()


def test_out_cutoff_validation():
    f = random_field(2, seed=8)
    with pytest.raises(ValueError):
        dealiased_pair_product(f, f, out_cutoff=5)
    with pytest.raises(ValueError):
        dealiased_product(f, f, f, out_cutoff=-1)


def test_apply_multiplier():
    f = random_field(3, seed=9)
    g = apply_multiplier(f, lambda jb: jb**2)
    grid = mode_grid(3)
    np.testing.assert_allclose(g.coeff, f.coeff * grid.jb**2)
    with pytest.raises(ValueError):
        apply_multiplier(f, np.ones((2, 2)))


def test_project_square_truncate_and_embed():
    f = random_field(4, seed=10)
    down = project_square(f, 2)
    assert down.cutoff == 2
    np.testing.assert_allclose(down.coeff, f.coeff[2:7, 2:7])
    up = project_square(down, 4)
    assert up.cutoff == 4
    assert up.coeff[4, 4] == down.coeff[2, 2]
    assert np.all(up.coeff[0, :] == 0)
    z = project_square(f, -1)
    assert z.cutoff == 0 and z.coeff[0, 0] == 0


def test_field_arithmetic_mixed_cutoffs():
    f = random_field(2, seed=11)
    g = random_field(4, seed=12)
    h = f + g
    assert h.cutoff == 4
    np.testing.assert_allclose(h.coeff[2:7, 2:7], f.coeff + g.coeff[2:7, 2:7])
    d = (2.0 * f) - f - f
    assert np.max(np.abs(d.coeff)) < 1e-14


def test_field_snapshot_round_trip(tmp_path):
    f = random_field(5, seed=13)
    p = tmp_path / "f.field"
    write_field_snapshot(p, f, s=1.25)
    back, s = read_field_snapshot(p)
    assert s == 1.25
    assert back.cutoff == 5
    np.testing.assert_array_equal(back.coeff, f.coeff)


def test_state_snapshot_round_trip(tmp_path):
    x = PhaseState(random_field(3, seed=14), random_field(3, seed=15))
    p = tmp_path / "x.state"
    write_state_snapshot(p, x)  # default s is NaN
    back, s = read_state_snapshot(p)
    assert np.isnan(s)
    np.testing.assert_array_equal(back.u.coeff, x.u.coeff)
    np.testing.assert_array_equal(back.v.coeff, x.v.coeff)


def test_snapshot_rejects_garbage(tmp_path):
    p = tmp_path / "bad.field"
    p.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(ValueError):
        read_field_snapshot(p)
    q = tmp_path / "short.field"
    write_field_snapshot(q, random_field(4, seed=16))
    q.write_bytes(q.read_bytes()[:-8])
    with pytest.raises(ValueError):
        read_field_snapshot(q)
