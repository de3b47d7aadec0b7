"""Energy functionals, their gradients, and the transport-rate pairing.

Conventions (normalized measure dx on the square, so integrals are means):

* wave energy        H(u, v)   = 1/2 int (u^2 + |grad u|^2 + v^2) + 1/4 int (P u)^4
* gaussian quadratic G_s(u, v) = 1/2 ||u||_{H^{1+s}}^2 + 1/2 ||v||_{H^s}^2
* renormalized interaction
      R_{s,N}(u) = 3/2 int q_{s,N}(u) (P u)^2 + 1/4 int (P u)^4,
  with q_{s,N}(u) = (<D>^s P u)^2 - sigma_N the centered square and
  sigma_N = sum_{|n|_inf <= N} <n>^{-2} its flat-curvature constant (the
  variance of <D>^s P u at a point under the reference gaussian, independent
  of s).
* modified energy    E_{s,N} = G_s + R_{s,N}, with the alternative split
      E_{s,N} = script_energy + H, script part carried by the multiplier
      m(D) = (<D>^{2s} - 1)^{1/2}.

P = P_N is the sharp frequency projection to |n|_inf <= N; <D> has symbol
<n> = (1 + |n|^2)^{1/2}.

The pairing `bracket_h_energy` is the rate at which E_{s,N} is destroyed by
the undamped truncated wave flow:

    bracket_h_energy(x) = <dH/du, dE/dv> - <dH/dv, dE/du> = - d/dt E(flow(t,x)).

After the quadratic cancellation it collapses to <<D>^s v, W(u)> with

    W(u) = P[ <D>^s(u^3) - <D>^{-s}(u^3) - 3 (<D>^s u) u^2
              - 3 <D>^{-s}(q_{s,N}(u) u) ],    u = P u,

which is the form used for Monte Carlo (one field build, three dealiased
products).  Batched variants (leading sample axis on raw coefficient squares)
back the estimator loops.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .spectral import (
    PhaseState,
    SpectralField,
    _embed,
    _to_grid,
    _triple_product_coeff,
    apply_multiplier,
    inner_product,
    mode_grid,
    project_square,
)

__all__ = [
    "sigma_renorm",
    "wick_square",
    "hamiltonian",
    "gaussian_energy",
    "interaction_energy",
    "script_energy",
    "total_energy",
    "grad_hamiltonian",
    "grad_energy",
    "w_field",
    "bracket_h_energy",
    "bracket_from_gradients",
    "interaction_batch",
    "bracket_batch",
    "FunctionalReport",
    "evaluate_functionals",
]


@lru_cache(maxsize=None)
def sigma_renorm(N: int) -> float:
    """sigma_N = sum over the square |n|_inf <= N of <n>^{-2}.

    Grows like 2 pi log N; sigma_0 = 1, sigma_1 = 13/3.
    """
    if N < 0:
        raise ValueError(f"N must be >= 0, got {N}")
    n = np.arange(-N, N + 1)
    jb2 = 1.0 + n[:, None] ** 2 + n[None, :] ** 2
    return float(np.sum(1.0 / jb2))


def _low_square(coeff: np.ndarray, cutoff: int, N: int) -> np.ndarray:
    if N > cutoff:
        raise ValueError(f"projection cutoff {N} exceeds stored cutoff {cutoff}")
    lo, hi = cutoff - N, cutoff + N + 1
    return np.ascontiguousarray(coeff[..., lo:hi, lo:hi])


def wick_square(u: SpectralField, s: float, N: int) -> SpectralField:
    """Centered square q_{s,N}(u) = (<D>^s P u)^2 - sigma_N, at cutoff 2N."""
    ws = apply_multiplier(project_square(u, N), lambda jb: jb**s)
    sq = _triple_product_coeff(  # pair product via the shared machinery
        ws.coeff, N, ws.coeff, N, np.ones((1, 1)), 0, 2 * N
    )
    sq[2 * N, 2 * N] -= sigma_renorm(N)
    return SpectralField(sq, 2 * N)


# ---------------------------------------------------------------------------
# scalar energies
# ---------------------------------------------------------------------------

def _quartic_grid(u_low: np.ndarray, N: int) -> np.ndarray:
    """Physical values of P_N u on a grid exact for quartic integrands."""
    L = sfft.next_fast_len(4 * N + 1, real=False)
    return _to_grid(u_low, N, L)


def hamiltonian(state: PhaseState, N: int | None = None) -> float:
    """Wave energy; the quartic term uses the projection P_N (default: full)."""
    if N is None:
        N = state.cutoff
    g = mode_grid(state.cutoff)
    quad = 0.5 * float(
        np.sum(g.jb**2 * np.abs(state.u.coeff) ** 2) + np.sum(np.abs(state.v.coeff) ** 2)
    )
    ug = _quartic_grid(_low_square(state.u.coeff, state.cutoff, N), N)
    return quad + 0.25 * float(np.mean(ug**4))


def gaussian_energy(state: PhaseState, s: float) -> float:
    """Quadratic form of the reference gaussian: the formal exponent of its
    density is exp(-G_s)."""
    g = mode_grid(state.cutoff)
    return 0.5 * float(
        np.sum(g.jb ** (2.0 * s + 2.0) * np.abs(state.u.coeff) ** 2)
        + np.sum(g.jb ** (2.0 * s) * np.abs(state.v.coeff) ** 2)
    )


def interaction_energy(u: SpectralField, s: float, N: int) -> float:
    """R_{s,N}(u), by quadrature on a grid where quartic products are exact."""
    return float(interaction_batch(u.coeff[None], u.cutoff, s, N)[0])


def script_energy(state: PhaseState, s: float, N: int) -> float:
    """The s-dependent part of the modified energy: E_{s,N} - H_N.

    Quadratic piece through m(D) = (<D>^{2s} - 1)^{1/2}, cubic-quartic piece
    3/2 int q_{s,N}(u) (P u)^2.
    """
    g = mode_grid(state.cutoff)
    m2 = g.jb ** (2.0 * s) - 1.0
    quad = 0.5 * float(
        np.sum(m2 * g.jb**2 * np.abs(state.u.coeff) ** 2)
        + np.sum(m2 * np.abs(state.v.coeff) ** 2)
    )
    gN = mode_grid(N)
    low = _low_square(state.u.coeff, state.cutoff, N)
    ug = _quartic_grid(low, N)
    wg = _quartic_grid(gN.jb**s * low, N)
    return quad + 1.5 * float(np.mean((wg**2 - sigma_renorm(N)) * ug**2))


def total_energy(state: PhaseState, s: float, N: int) -> float:
    """E_{s,N} = G_s + R_{s,N} (identically script_energy + hamiltonian)."""
    return gaussian_energy(state, s) + interaction_energy(state.u, s, N)


# ---------------------------------------------------------------------------
# gradients and the transport pairing
# ---------------------------------------------------------------------------

def _cubic_pieces(u_low: np.ndarray, s: float, N: int):
    """The three dealiased cubic combinations entering gradients and W.

    Returns (cube, su_uu, qu) at cutoff N for u = P_N u:
      cube  = P (u^3)
      su_uu = P ((<D>^s u) u^2)
      qu    = P (q_{s,N}(u) u)
    """
    g = mode_grid(N)
    ws = g.jb**s * u_low
    cube = _triple_product_coeff(u_low, N, u_low, N, u_low, N, N)
    su_uu = _triple_product_coeff(ws, N, u_low, N, u_low, N, N)
    qu = _triple_product_coeff(ws, N, ws, N, u_low, N, N) - sigma_renorm(N) * u_low
    return cube, su_uu, qu


def grad_hamiltonian(state: PhaseState, N: int | None = None) -> PhaseState:
    """(dH/du, dH/dv) = (<D>^2 u + P (P u)^3, v)."""
    if N is None:
        N = state.cutoff
    cutoff = state.cutoff
    g = mode_grid(cutoff)
    u_low = _low_square(state.u.coeff, cutoff, N)
    cube = _triple_product_coeff(u_low, N, u_low, N, u_low, N, N)
    gu = g.jb**2 * state.u.coeff + _embed(cube, N, cutoff)
    return PhaseState(SpectralField(gu, cutoff), state.v.copy())


def grad_energy(state: PhaseState, s: float, N: int) -> PhaseState:
    """(dE/du, dE/dv) for the modified energy E_{s,N}.

    dE/du = <D>^{2s+2} u + 3 P <D>^s((<D>^s u) u^2) + 3 P(q u) + P(u^3),
    dE/dv = <D>^{2s} v, with u = P_N u inside every nonlinear term.
    """
    cutoff = state.cutoff
    g = mode_grid(cutoff)
    gN = mode_grid(N)
    u_low = _low_square(state.u.coeff, cutoff, N)
    cube, su_uu, qu = _cubic_pieces(u_low, s, N)
    nl = 3.0 * gN.jb**s * su_uu + 3.0 * qu + cube
    gu = g.jb ** (2.0 * s + 2.0) * state.u.coeff + _embed(nl, N, cutoff)
    gv = g.jb ** (2.0 * s) * state.v.coeff
    return PhaseState(SpectralField(gu, cutoff), SpectralField(gv, cutoff))


def _w_coeff(u_low: np.ndarray, s: float, N: int) -> np.ndarray:
    g = mode_grid(N)
    js = g.jb**s
    jsm = g.jb ** (-s)
    cube, su_uu, qu = _cubic_pieces(u_low, s, N)
    return js * cube - jsm * cube - 3.0 * su_uu - 3.0 * jsm * qu


def w_field(u: SpectralField, s: float, N: int) -> SpectralField:
    """W(u) such that bracket_h_energy(u, v) = <<D>^s v, W(u)>."""
    return SpectralField(_w_coeff(_low_square(u.coeff, u.cutoff, N), s, N), N)


def bracket_h_energy(state: PhaseState, s: float, N: int) -> float:
    """Rate -dE_{s,N}/dt along the undamped truncated wave flow at (u, v)."""
    return float(bracket_batch(state.u.coeff[None], state.v.coeff[None], state.cutoff, s, N)[0])


def bracket_from_gradients(state: PhaseState, s: float, N: int) -> float:
    """Same pairing assembled literally from the two gradients.

    <dH/du, dE/dv> - <dH/dv, dE/du>; kept as an independently wired
    cross-check of the collapsed W-form.
    """
    gh = grad_hamiltonian(state, N)
    ge = grad_energy(state, s, N)
    return inner_product(gh.u, ge.v) - inner_product(gh.v, ge.u)


# ---------------------------------------------------------------------------
# batched forms (Monte Carlo workhorses; leading axes are sample axes)
# ---------------------------------------------------------------------------

def interaction_batch(U: np.ndarray, cutoff: int, s: float, N: int) -> np.ndarray:
    """R_{s,N} for a batch of coefficient squares, shape (..., 2c+1, 2c+1)."""
    low = _low_square(U, cutoff, N)
    g = mode_grid(N)
    ug = _quartic_grid(low, N)
    wg = _quartic_grid(g.jb**s * low, N)
    vals = 1.5 * (wg**2 - sigma_renorm(N)) * ug**2 + 0.25 * ug**4
    return vals.mean(axis=(-2, -1))


def bracket_batch(U: np.ndarray, V: np.ndarray, cutoff: int, s: float, N: int) -> np.ndarray:
    """bracket_h_energy for batches of (u, v) coefficient squares."""
    u_low = _low_square(U, cutoff, N)
    v_low = _low_square(V, cutoff, N)
    g = mode_grid(N)
    w = _w_coeff(u_low, s, N)
    return np.real(np.sum(g.jb**s * v_low * np.conj(w), axis=(-2, -1)))


def interaction_grad_batch(U: np.ndarray, cutoff: int, s: float, N: int) -> np.ndarray:
    """dR_{s,N}/du for batches of coefficient squares (result at cutoff N).

    The nonlinear part of dE/du: 3 <D>^s((<D>^s u) u^2) + 3 q u + u^3, with
    u = P_N u.
    """
    u_low = _low_square(U, cutoff, N)
    g = mode_grid(N)
    cube, su_uu, qu = _cubic_pieces(u_low, s, N)
    return 3.0 * g.jb**s * su_uu + 3.0 * qu + cube


# ---------------------------------------------------------------------------
# one-call report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FunctionalReport:
    """Every scalar functional of one phase state, at parameters (s, N)."""

    s: float
    N: int
    sigma: float
    hamiltonian: float
    gaussian: float
    interaction: float
    script: float
    total: float
    bracket: float

    def as_dict(self) -> dict:
        return {
            "s": self.s,
            "N": self.N,
            "sigma": self.sigma,
            "hamiltonian": self.hamiltonian,
            "gaussian": self.gaussian,
            "interaction": self.interaction,
            "script": self.script,
            "total": self.total,
            "bracket": self.bracket,
        }


def evaluate_functionals(state: PhaseState, s: float, N: int) -> FunctionalReport:
    return FunctionalReport(
        s=float(s),
        N=int(N),
        sigma=sigma_renorm(N),
        hamiltonian=hamiltonian(state, N),
        gaussian=gaussian_energy(state, s),
        interaction=interaction_energy(state.u, s, N),
        script=script_energy(state, s, N),
        total=total_energy(state, s, N),
        bracket=bracket_h_energy(state, s, N),
    )
