"""Littlewood-Paley calculus: dyadic blocks, Besov norms, paraproducts.

The dyadic partition is built from one smooth bump phi: [0, 1]-valued,
identically 1 on [-5/4, 5/4], supported in [-8/5, 8/5], composed from the
classical exp(-1/x) glue.  Block sizes run over K in {1, 2, 4, ...} with K = 1
the base block; for K >= 2 the block symbol is phi(|n|/K) - phi(2|n|/K), so it
vanishes unless (5/8) K <= |n| <= (8/5) K.  Symbols are normalized by their
pointwise sum over blocks, making the partition of unity exact by construction
at every lattice point.

Norms: ||f||_{B^a_{p,q}} aggregates K^a ||P_K f||_{L^p} in l^q over blocks.
Hoelder C^a = B^a_{inf,inf}; the phase-space version pairs C^a for the
position with C^{a-1} for the velocity.  Sup norms are grid maxima on a grid
twice as fine as the dealiasing default, hence lower bounds of the true sup
(tight for band-limited fields).

Paraproducts: the product fg splits over block pairs (K for f, M for g) into
low-high (K < M/2), resonant (M/2 <= K <= 2M), and high-low (M < K/2); the
three parts sum to the dealiased product exactly, because every block pair is
computed alias-free on one shared enlarged grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .spectral import (
    PhaseState,
    SpectralField,
    _from_grid,
    _to_grid,
    _triple_product_coeff,
    lp_norm,
    mode_grid,
    project_square,
    sobolev_norm,
)

__all__ = [
    "smooth_bump",
    "DyadicDecomposition",
    "dyadic_decomposition",
    "lp_block",
    "besov_norm",
    "holder_norm",
    "state_holder_norm",
    "paraproduct",
    "paraproduct_parts",
    "commutator_residual",
    "commutator_ratio",
]

_SUPP = 8.0 / 5.0
_PLATEAU = 5.0 / 4.0


def _glue(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def smooth_bump(r) -> np.ndarray:
    """C^infinity bump: 1 on [-5/4, 5/4], 0 outside (-8/5, 8/5), monotone between."""
    r = np.abs(np.asarray(r, dtype=np.float64))
    t = (_SUPP - r) / (_SUPP - _PLATEAU)
    a = _glue(t)
    b = _glue(1.0 - t)
    return a / (a + b + np.where(a + b == 0.0, 1.0, 0.0))


@dataclass(frozen=True)
class DyadicDecomposition:
    """Normalized block symbols on the coefficient square of one cutoff."""

    cutoff: int
    block_sizes: tuple    # (1, 2, 4, ...)
    symbols: tuple        # matching (2c+1, 2c+1) arrays, summing to 1 exactly

    @property
    def n_blocks(self) -> int:
        return len(self.block_sizes)

    def effective_cutoff(self, i: int) -> int:
        """Smallest coefficient square holding block i (support bound)."""
        return min(self.cutoff, int(np.floor(_SUPP * self.block_sizes[i])))


@lru_cache(maxsize=None)
def dyadic_decomposition(cutoff: int) -> DyadicDecomposition:
    g = mode_grid(cutoff)
    r = np.sqrt(g.abs2)
    rmax = float(np.sqrt(2.0)) * cutoff
    n_blocks = 1
    while _PLATEAU * 2 ** (n_blocks - 1) < rmax:
        n_blocks += 1
    raw = []
    for j in range(n_blocks):
        if j == 0:
            raw.append(smooth_bump(r))
        else:
            raw.append(smooth_bump(r / 2**j) - smooth_bump(r / 2 ** (j - 1)))
    total = np.sum(raw, axis=0)
    symbols = tuple(sym / total for sym in raw)
    return DyadicDecomposition(
        cutoff=cutoff,
        block_sizes=tuple(2**j for j in range(n_blocks)),
        symbols=symbols,
    )


def lp_block(f: SpectralField, block_size: int) -> SpectralField:
    """Littlewood-Paley piece of f for the block of the given dyadic size.

    Dyadic sizes beyond the decomposition of f's cutoff return a zero field.
    """
    dec = dyadic_decomposition(f.cutoff)
    if block_size not in dec.block_sizes:
        if block_size >= 1 and (block_size & (block_size - 1)) == 0:
            return SpectralField(np.zeros_like(f.coeff), f.cutoff)
        raise ValueError(f"block size must be a power of two, got {block_size}")
    i = dec.block_sizes.index(block_size)
    return SpectralField(f.coeff * dec.symbols[i], f.cutoff)


def _sup_grid_length(cutoff: int) -> int:
    # Twice the dealiasing default 4c+2: sup norms are reported as grid maxima
    # on the refined grid (lower bounds of the true sup).
    return sfft.next_fast_len(2 * (4 * max(cutoff, 1) + 2), real=False)


def _block_lp(block: SpectralField, eff: int, p: float) -> float:
    small = project_square(block, eff)
    if p == np.inf:
        return lp_norm(small, np.inf, grid_length=_sup_grid_length(eff))
    return lp_norm(small, p)


def besov_norm(f: SpectralField, alpha: float, p: float, q: float) -> float:
    """|| K^alpha ||P_K f||_{L^p} ||_{l^q} over dyadic blocks K."""
    for label, val in (("p", p), ("q", q)):
        if val != np.inf and val < 1:
            raise ValueError(f"{label} must be >= 1 or inf, got {val}")
    dec = dyadic_decomposition(f.cutoff)
    terms = np.empty(dec.n_blocks)
    for i, K in enumerate(dec.block_sizes):
        piece = SpectralField(f.coeff * dec.symbols[i], f.cutoff)
        terms[i] = K**alpha * _block_lp(piece, dec.effective_cutoff(i), p)
    if q == np.inf:
        return float(np.max(terms))
    return float(np.sum(terms**q) ** (1.0 / q))


def holder_norm(f: SpectralField, alpha: float) -> float:
    """Besov-Hoelder norm C^alpha = B^alpha_{inf,inf}."""
    return besov_norm(f, alpha, np.inf, np.inf)


def state_holder_norm(x: PhaseState, alpha: float) -> float:
    """Phase-space Hoelder norm: C^alpha for u plus C^{alpha-1} for v."""
    return holder_norm(x.u, alpha) + holder_norm(x.v, alpha - 1.0)


_KINDS = ("lo-hi", "resonant", "hi-lo")


def paraproduct_parts(f: SpectralField, g: SpectralField) -> dict:
    """All three paraproduct parts of fg at once (shared block grids).

    Keys "lo-hi" (f rough-low against g high), "resonant", "hi-lo"; the three
    fields (cutoff 2c) sum to the dealiased product exactly.
    """
    if f.cutoff != g.cutoff:
        raise ValueError(f"paraproduct needs a shared cutoff, got {f.cutoff} and {g.cutoff}")
    c = f.cutoff
    dec = dyadic_decomposition(c)
    L = sfft.next_fast_len(4 * c + 1, real=False)
    bf = [_to_grid(f.coeff * sym, c, L) for sym in dec.symbols]
    bg = [_to_grid(g.coeff * sym, c, L) for sym in dec.symbols]
    nb = dec.n_blocks
    cumf = np.cumsum(bf, axis=0)
    cumg = np.cumsum(bg, axis=0)
    acc = {kind: np.zeros((L, L)) for kind in _KINDS}
    for k in range(nb):
        if k >= 2:
            acc["lo-hi"] += cumf[k - 2] * bg[k]
            acc["hi-lo"] += bf[k] * cumg[k - 2]
        for j in range(max(0, k - 1), min(nb, k + 2)):
            acc["resonant"] += bf[j] * bg[k]
    return {kind: SpectralField(_from_grid(acc[kind], 2 * c), 2 * c) for kind in _KINDS}


def paraproduct(f: SpectralField, g: SpectralField, kind: str) -> SpectralField:
    """One Bony paraproduct part of fg: 'lo-hi', 'resonant', or 'hi-lo'."""
    if kind not in _KINDS:
        raise ValueError(f"kind must be one of {_KINDS}, got {kind!r}")
    return paraproduct_parts(f, g)[kind]


def commutator_residual(u: SpectralField, s: float) -> SpectralField:
    """<D>^s(u^3) - 3 u^2 (<D>^s u), exact at the tripled cutoff."""
    N = u.cutoff
    out = 3 * N
    g3 = mode_grid(out)
    gN = mode_grid(N)
    cube = _triple_product_coeff(u.coeff, N, u.coeff, N, u.coeff, N, out)
    su = gN.jb**s * u.coeff
    mixed = _triple_product_coeff(u.coeff, N, u.coeff, N, su, N, out)
    return SpectralField(g3.jb**s * cube - 3.0 * mixed, out)


def commutator_ratio(u: SpectralField, s: float, eps: float) -> float:
    """||<D>^s(u^3) - 3u^2 <D>^s u||_{L^2} / ||u||_{C^{s-eps}}^3."""
    num = sobolev_norm(commutator_residual(u, s), 0.0)
    den = holder_norm(u, s - eps) ** 3
    return num / den
