"""Sampling the reference Gaussian measure on phase space.

The measure factorizes over Fourier modes: for measure parameter s > 0 the
coefficient u_hat(n) has variance <n>^{-2s-2} and v_hat(n) has variance
<n>^{-2s}; the two are independent; real and imaginary parts of each nonzero
mode are independent with half the variance each; the origin mode is real with
the full variance; c(-n) = conj(c(n)).

Randomness is counter-based (Philox) and *positional*: draws are organized in
blocks of BLOCK samples, and every (purpose, block, step) triple owns a fresh
stream keyed by (master_seed, purpose << 56 | step << 32 | block).  A block
draws its normals in one canonical vectorized call (sample-major, then
row-major half lattice with the origin first, u before v, real before
imaginary), so sample i's values are a fixed prefix slice of its block stream:
they do not depend on the total count, the thread schedule, or the batching of
callers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox

from .spectral import ModeGrid, PhaseState, SpectralField, mode_grid, project_square

__all__ = [
    "BLOCK",
    "MeasureSpec",
    "RngStream",
    "mode_std_position",
    "mode_std_velocity",
    "sample_mu",
    "sample_mu_block",
    "sample_mu_position",
    "sample_mu_position_block",
    "sample_mu_states",
    "split_low_high",
]

BLOCK = 1024

# purpose tags for stream derivation (kept small and documented; these are part
# of the reproducibility contract, do not renumber)
PURPOSE_INIT = 0       # initial ensembles / sample-mu
PURPOSE_NOISE = 1      # evolution noise increments
PURPOSE_POSITION = 2   # position-marginal ensembles
PURPOSE_DRIFT = 3      # variational-drift initializations (reserved)
PURPOSE_SCRATCH = 7    # tests


@dataclass(frozen=True)
class MeasureSpec:
    """Parameters (s, cutoff) of the per-mode Gaussian product measure."""

    s: float
    cutoff: int

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError(f"measure parameter s must be > 0, got {self.s}")
        if self.cutoff < 0:
            raise ValueError(f"cutoff must be >= 0, got {self.cutoff}")


class RngStream:
    """A counter-based stream keyed by (master_seed, stream_index)."""

    def __init__(self, master_seed: int, stream_index: int = 0):
        if master_seed < 0 or stream_index < 0:
            raise ValueError("seed and stream index must be non-negative")
        self.master_seed = int(master_seed)
        self.stream_index = int(stream_index)
        key = np.array([self.master_seed, self.stream_index], dtype=np.uint64)
        self.generator = Generator(Philox(key=key))

    @classmethod
    def for_block(cls, master_seed: int, purpose: int, block_index: int,
                  step: int = 0) -> "RngStream":
        if not 0 <= purpose < 2**8:
            raise ValueError(f"purpose tag out of range: {purpose}")
        if not 0 <= step < 2**24:
            raise ValueError(f"step index out of range: {step}")
        if not 0 <= block_index < 2**32:
            raise ValueError(f"block index out of range: {block_index}")
        return cls(master_seed, (purpose << 56) | (step << 32) | block_index)

    def standard_normal(self, shape) -> np.ndarray:
        return self.generator.standard_normal(shape)


def mode_std_position(s: float, grid: ModeGrid) -> np.ndarray:
    """Per-mode standard deviation <n>^{-(s+1)} of the position component."""
    return grid.jb ** (-(s + 1.0))


def mode_std_velocity(s: float, grid: ModeGrid) -> np.ndarray:
    """Per-mode standard deviation <n>^{-s} of the velocity component."""
    return grid.jb ** (-s)


def _scatter_hermitian(draw_re: np.ndarray, draw_im: np.ndarray, sd: np.ndarray,
                       grid: ModeGrid) -> np.ndarray:
    """Assemble hermitian coefficient squares from half-lattice normals.

    draw_re/draw_im have shape (count, n_half + 1); slot 0 is the origin (its
    imaginary draw is discarded), slots 1.. follow the canonical half lattice.
    """
    count = draw_re.shape[0]
    size = 2 * grid.cutoff + 1
    out = np.zeros((count, size, size), dtype=np.complex128)
    half = (draw_re[:, 1:] + 1j * draw_im[:, 1:]) / np.sqrt(2.0)
    half = half * sd[grid.half_i, grid.half_j]
    out[:, grid.half_i, grid.half_j] = half
    out[:, grid.mirror_i, grid.mirror_j] = np.conj(half)
    c = grid.center
    out[:, c, c] = draw_re[:, 0] * sd[c, c]
    return out


def _block_range(count: int):
    n_blocks = (count + BLOCK - 1) // BLOCK
    for b in range(n_blocks):
        yield b, b * BLOCK, min((b + 1) * BLOCK, count)


def sample_mu_block(spec: MeasureSpec, master_seed: int, block_index: int,
                    take: int, purpose: int = PURPOSE_INIT) -> tuple[np.ndarray, np.ndarray]:
    """Draw the first `take` phase-space samples of one block.

    A partial draw is a prefix of the full block's value sequence, so sample
    positions stay stable whatever the requested counts are.
    """
    if not 0 <= take <= BLOCK:
        raise ValueError(f"take must lie in [0, {BLOCK}], got {take}")
    grid = mode_grid(spec.cutoff)
    sd_u = mode_std_position(spec.s, grid)
    sd_v = mode_std_velocity(spec.s, grid)
    m = grid.n_half + 1
    stream = RngStream.for_block(master_seed, purpose, block_index)
    draw = stream.standard_normal((take, m, 2, 2))
    u = _scatter_hermitian(draw[:, :, 0, 0], draw[:, :, 0, 1], sd_u, grid)
    v = _scatter_hermitian(draw[:, :, 1, 0], draw[:, :, 1, 1], sd_v, grid)
    return u, v


def sample_mu(spec: MeasureSpec, master_seed: int, count: int,
              purpose: int = PURPOSE_INIT) -> tuple[np.ndarray, np.ndarray]:
    """Draw `count` phase-space samples; returns coefficient arrays
    (count, 2N+1, 2N+1) for u and v."""
    if count < 0:
        raise ValueError("count must be >= 0")
    size = 2 * spec.cutoff + 1
    u = np.empty((count, size, size), dtype=np.complex128)
    v = np.empty((count, size, size), dtype=np.complex128)
    for b, lo, hi in _block_range(count):
        u[lo:hi], v[lo:hi] = sample_mu_block(spec, master_seed, b, hi - lo, purpose)
    return u, v


def sample_mu_position_block(s: float, cutoff: int, master_seed: int,
                             block_index: int, take: int,
                             purpose: int = PURPOSE_POSITION) -> np.ndarray:
    """Position-marginal analogue of sample_mu_block."""
    if not 0 <= take <= BLOCK:
        raise ValueError(f"take must lie in [0, {BLOCK}], got {take}")
    grid = mode_grid(cutoff)
    sd_u = mode_std_position(s, grid)
    m = grid.n_half + 1
    stream = RngStream.for_block(master_seed, purpose, block_index)
    draw = stream.standard_normal((take, m, 2))
    return _scatter_hermitian(draw[:, :, 0], draw[:, :, 1], sd_u, grid)


def sample_mu_position(s: float, cutoff: int, master_seed: int, count: int,
                       purpose: int = PURPOSE_POSITION) -> np.ndarray:
    """Draw `count` samples of the position marginal (variance <n>^{-2(s+1)})."""
    if count < 0:
        raise ValueError("count must be >= 0")
    size = 2 * cutoff + 1
    u = np.empty((count, size, size), dtype=np.complex128)
    for b, lo, hi in _block_range(count):
        u[lo:hi] = sample_mu_position_block(s, cutoff, master_seed, b, hi - lo, purpose)
    return u


def sample_mu_states(spec: MeasureSpec, master_seed: int, count: int) -> list[PhaseState]:
    """Convenience wrapper returning PhaseState objects."""
    u, v = sample_mu(spec, master_seed, count)
    return [
        PhaseState(SpectralField(u[i], spec.cutoff), SpectralField(v[i], spec.cutoff))
        for i in range(count)
    ]


def split_low_high(state: PhaseState, M: int) -> tuple[PhaseState, PhaseState]:
    """Split into (Pi_{<=M} x, Pi_{>M} x); M = -1 sends everything high."""
    if M > state.cutoff:
        raise ValueError(f"split cutoff {M} exceeds state cutoff {state.cutoff}")
    low = PhaseState(project_square(state.u, M), project_square(state.v, M))
    N = state.cutoff
    hu = state.u.coeff.copy()
    hv = state.v.coeff.copy()
    if M >= 0:
        lo, hi = N - M, N + M + 1
        hu[lo:hi, lo:hi] = 0.0
        hv[lo:hi, lo:hi] = 0.0
    high = PhaseState(SpectralField(hu, N), SpectralField(hv, N))
    return low, high
