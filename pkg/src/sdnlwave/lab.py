"""Monte Carlo laboratory: invariance tests, partition estimates, drift bounds,
and the short-time transported-density check.

Every estimator is a deterministic function of (master seed, parameters):
samples are drawn in fixed blocks whose random streams are keyed by
(seed, purpose, block index, step), per-block partials are reduced pairwise in
block order, and worker threads only decide who computes a block — so results
are bitwise independent of the thread count.

Weighted estimates target the interaction-tilted measure (density
proportional to e^{-R_{s,N}} against the Gaussian reference): plain samples
are importance-weighted with self-normalized weights, never resampled.  Every
weighted report carries the effective sample size (sum w)^2 / sum w^2.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .besov import state_holder_norm
from .dynamics import FlowConfig, NoiseKernel, propagator_matrices, step_truncated
from .errors import NumericalError
from .functionals import (
    bracket_batch,
    interaction_batch,
    interaction_grad_batch,
    wick_square,
)
from .gaussian import (
    BLOCK,
    PURPOSE_INIT,
    PURPOSE_NOISE,
    PURPOSE_POSITION,
    MeasureSpec,
    RngStream,
    _block_range,
    _scatter_hermitian,
    mode_std_position,
    mode_std_velocity,
)
from .spectral import PhaseState, SpectralField, mode_grid, project_square, sobolev_norm

__all__ = [
    "EstimatorReport",
    "KRadiusCheck",
    "InvarianceResult",
    "OBSERVABLES",
    "linear_invariance_test",
    "partition_estimate",
    "bd_bound",
    "density_derivative_check",
    "kr_membership",
    "kr_ensemble",
    "quasi_invariance_scan",
]


@dataclass(frozen=True)
class EstimatorReport:
    """One scalar estimate with its provenance."""

    name: str
    mean: float
    stderr: float
    count: int
    ess: float
    metadata: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "mean": self.mean,
            "stderr": self.stderr,
            "count": self.count,
            "ess": self.ess,
            "metadata": self.metadata,
        }


@dataclass(frozen=True)
class KRadiusCheck:
    """Values of the compactness-set functional and membership at radius R."""

    R: float
    alpha: float
    values: np.ndarray   # per-sample sup over the dyadic grid
    members: np.ndarray  # values <= R

    def as_dict(self) -> dict:
        return {
            "R": self.R,
            "alpha": self.alpha,
            "values": [float(v) for v in self.values],
            "members": [bool(m) for m in self.members],
        }


@dataclass(frozen=True)
class InvarianceResult:
    """Reports plus the per-mode diagnostic arrays behind them."""

    reports: list
    z_var_u: np.ndarray
    z_var_v: np.ndarray
    z_cross: np.ndarray
    z_two_sample: np.ndarray


# ---------------------------------------------------------------------------
# deterministic block scheduling
# ---------------------------------------------------------------------------

def _run_blocks(count: int, worker, threads: int = 1) -> list:
    """Evaluate worker(block_index, lo, hi) over sample blocks, in order.

    Returns the per-block results as a list indexed by block; the caller
    combines them (pairwise, in index order) so the reduction tree never
    depends on scheduling.
    """
    ranges = list(_block_range(count))
    if threads <= 1:
        return [worker(b, lo, hi) for b, lo, hi in ranges]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futs = [pool.submit(worker, b, lo, hi) for b, lo, hi in ranges]
        return [f.result() for f in futs]


def _pairwise_combine(items: list, combine):
    """Reduce [x0, x1, ...] with a fixed pairwise tree (bitwise reproducible)."""
    if not items:
        raise ValueError("nothing to combine")
    level = list(items)
    while len(level) > 1:
        nxt = []
        for i in range(0, len(level) - 1, 2):
            nxt.append(combine(level[i], level[i + 1]))
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


def _add(a, b):
    if isinstance(a, tuple):
        return tuple(_add(x, y) for x, y in zip(a, b))
    return a + b


def weighted_mean_se(values: np.ndarray, weights: np.ndarray):
    """Self-normalized weighted mean, its linearized SE, and the ESS."""
    w = np.asarray(weights, dtype=np.float64)
    x = np.asarray(values, dtype=np.float64)
    sw = float(np.sum(w))
    mean = float(np.sum(w * x) / sw)
    se = float(np.sqrt(np.sum((w * (x - mean)) ** 2)) / sw)
    ess = float(sw**2 / np.sum(w**2))
    return mean, se, ess


# ---------------------------------------------------------------------------
# linear invariance
# ---------------------------------------------------------------------------

def linear_invariance_test(s: float, N: int, dt: float, T: float, samples: int,
                           seed: int, threads: int = 1) -> InvarianceResult:
    """Evolve a reference-measure ensemble with the exact linear update and
    compare empirical per-mode second moments against the stationary law.

    The one-step noise kernel makes the linear update stationary exactly in
    law, so at any (dt, T) the z-scores are standard normal up to the
    finite-sample statistics; systematic excursions indicate bugs.
    """
    spec = MeasureSpec(s, N)
    cfg = FlowConfig(s=s, N=N, dt=dt, T=T, seed=seed, nonlinear=False)
    g = mode_grid(N)
    mats = propagator_matrices(N, dt, cfg.damped)
    kernel = NoiseKernel(s, N, dt, cfg.damped) if cfg.n_steps > 0 else None
    m = g.n_half + 1

    def worker(bi, lo, hi):
        from .gaussian import sample_mu_block  # local import keeps module load cheap
        U, V = sample_mu_block(spec, seed, bi, hi - lo, purpose=PURPOSE_INIT)
        s0 = (np.sum(np.abs(U) ** 2, axis=0), np.sum(np.abs(V) ** 2, axis=0),
              np.sum(U * np.conj(V), axis=0))
        for k in range(cfg.n_steps):
            stream = RngStream.for_block(seed, PURPOSE_NOISE, bi, step=k)
            draw = stream.standard_normal((hi - lo, m, 2, 2))
            U, V = step_truncated(U, V, cfg, mats, kernel, draw, g)
        sT = (np.sum(np.abs(U) ** 2, axis=0), np.sum(np.abs(V) ** 2, axis=0),
              np.sum(U * np.conj(V), axis=0))
        return s0 + sT

    parts = _run_blocks(samples, worker, threads)
    u0, v0, c0, uT, vT, cT = _pairwise_combine(parts, _add)
    n = samples
    cu = g.jb ** (-2.0 * s - 2.0)
    cv = g.jb ** (-2.0 * s)
    # |u_hat|^2 is exponential for complex modes (relative sd 1) and 2 c^2 for
    # the real origin mode; z-scores use the exact stationary law.
    rel_sd = np.ones_like(cu)
    rel_sd[g.center, g.center] = np.sqrt(2.0)
    z_var_u = (uT / n - cu) / (cu * rel_sd / math.sqrt(n))
    z_var_v = (vT / n - cv) / (cv * rel_sd / math.sqrt(n))
    # cross-covariance: independent u, v => mean 0; per-component variance
    # c_u c_v / 2 for complex modes, c_u c_v at the real origin.
    comp_var = cu * cv / 2.0
    comp_var[g.center, g.center] = (cu * cv)[g.center, g.center]
    se_cross = np.sqrt(comp_var / n)
    z_cross = np.stack([np.real(cT) / n / se_cross, np.imag(cT) / n / se_cross])
    z_cross[1, g.center, g.center] = 0.0  # origin cross term is purely real
    # two-sample moment test between the initial and evolved ensembles
    z_two = ((uT - u0) / n) / (cu * rel_sd * math.sqrt(2.0 / n))

    half = mode_grid(N).half_mask
    def frac3(z):
        return float(np.mean(np.abs(z[..., half]) <= 3.0))
    reports = [
        EstimatorReport("u-variance-z-within-3", frac3(z_var_u), 0.0, n, float(n),
                        {"max_abs_z": float(np.max(np.abs(z_var_u[half])))}),
        EstimatorReport("v-variance-z-within-3", frac3(z_var_v), 0.0, n, float(n),
                        {"max_abs_z": float(np.max(np.abs(z_var_v[half])))}),
        EstimatorReport("cross-covariance-z-within-3", frac3(z_cross), 0.0, n, float(n),
                        {"max_abs_z": float(np.max(np.abs(z_cross[:, half])))}),
        EstimatorReport("two-sample-z-within-3", frac3(z_two), 0.0, n, float(n),
                        {"max_abs_z": float(np.max(np.abs(z_two[half])))}),
    ]
    return InvarianceResult(reports, z_var_u, z_var_v, z_cross, z_two)


# ---------------------------------------------------------------------------
# partition function
# ---------------------------------------------------------------------------

def partition_estimate(s: float, N: int, samples: int, seed: int,
                       threads: int = 1, interaction=None) -> EstimatorReport:
    """Plain MC estimate of the partition normalization E[e^{-R_{s,N}}].

    Computed in log space (per-block max shifts) so heavy negative interaction
    values cannot overflow.  The report's mean is the estimate of the
    normalization itself; the log value, its delta-method SE, and the Jensen
    lower bound e^{-mean(R)} ride along in the metadata.
    """
    if interaction is None:
        interaction = lambda U: interaction_batch(U, N, s, N)

    def worker(bi, lo, hi):
        from .gaussian import sample_mu_position_block
        U = sample_mu_position_block(s, N, seed, bi, hi - lo,
                                     purpose=PURPOSE_POSITION)
        # evaluate in slices: the dealiased quartic grids at large N are far
        # bigger than the coefficient arrays, so cap the batch they see
        chunk = max(1, 2**21 // ((4 * N + 1) ** 2))
        r = np.concatenate([interaction(U[i:i + chunk])
                            for i in range(0, U.shape[0], chunk)])
        mshift = float(np.max(-r))
        e = np.exp(-r - mshift)
        return (mshift, float(np.sum(e)), float(np.sum(e**2)), float(np.sum(r)),
                float(np.sum(r**2)))

    def combine(a, b):
        ma, s1a, s2a, ra, qa = a
        mb, s1b, s2b, rb, qb = b
        mm = max(ma, mb)
        return (mm,
                s1a * math.exp(ma - mm) + s1b * math.exp(mb - mm),
                s2a * math.exp(2.0 * (ma - mm)) + s2b * math.exp(2.0 * (mb - mm)),
                ra + rb, qa + qb)

    mshift, s1, s2, rsum, rsq = _pairwise_combine(
        _run_blocks(samples, worker, threads), combine)
    n = samples
    log_z = mshift + math.log(s1 / n)
    # relative SE of the plain average, which is also the SE of log Z
    rel_se = math.sqrt(max(s2 / n - (s1 / n) ** 2, 0.0) / n) / (s1 / n)
    mean_r = rsum / n
    se_r = math.sqrt(max(rsq / n - mean_r**2, 0.0) / n)
    z_hat = math.exp(log_z)
    jensen = math.exp(-mean_r) if -mean_r < 700 else float("inf")
    return EstimatorReport(
        "partition", z_hat, z_hat * rel_se, n, float(n),
        {
            "log_z": log_z,
            "log_z_se": rel_se,
            "mean_R": mean_r,
            "mean_R_se": se_r,
            "jensen_lower": jensen,
            "jensen_ok": bool(z_hat >= jensen - 2.0 * z_hat * rel_se),
            "s": s, "N": N, "seed": seed,
        },
    )


# ---------------------------------------------------------------------------
# variational drift bound
# ---------------------------------------------------------------------------

def bd_bound(s: float, N: int, samples: int, ascent_steps: int, step_size: float,
             seed: int, threads: int = 1, functional=None,
             ceiling: float = 1e10) -> EstimatorReport:
    """Estimate the variational upper bound for log E[e^{-F}] by per-sample
    gradient ascent over band-limited Gaussian shifts.

    For each sample Y the inner objective is -F(Y + Th) - 1/2 ||Th||^2 in the
    (1+s)-Sobolev metric of the position reference; ascent is preconditioned
    with the inverse metric, so the quadratic part contracts uniformly over
    modes.  ascent_steps = 0 reports -mean(F(Y)) (the Jensen value).

    `functional` is a (value, grad) pair of batched callables; the default is
    the renormalized interaction and its gradient.
    """
    if ascent_steps < 0:
        raise ValueError(f"ascent_steps must be >= 0, got {ascent_steps}")
    if functional is None:
        fval = lambda U: interaction_batch(U, N, s, N)
        fgrad = lambda U: interaction_grad_batch(U, N, s, N)
    else:
        fval, fgrad = functional
    g = mode_grid(N)
    metric = g.jb ** (2.0 + 2.0 * s)

    def objective(Y, Th):
        pen = 0.5 * np.sum(metric * np.abs(Th) ** 2, axis=(-2, -1))
        return -fval(Y + Th) - pen

    def worker(bi, lo, hi):
        from .gaussian import sample_mu_position_block
        Y = sample_mu_position_block(s, N, seed, bi, hi - lo,
                                     purpose=PURPOSE_POSITION)
        Th = np.zeros_like(Y)
        cur = objective(Y, Th)
        for _ in range(ascent_steps):
            d = -fgrad(Y + Th) / metric - Th
            # per-sample backtracking: halve any step that fails to improve,
            # so the quartic tail cannot launch an explicit-Euler runaway
            step = np.full(cur.shape, step_size)
            ok = np.zeros(cur.shape, dtype=bool)
            cand, val = Th, cur
            with np.errstate(over="ignore", invalid="ignore"):
                for _ in range(40):
                    cand = Th + step[:, None, None] * d
                    val = objective(Y, cand)
                    ok = np.isfinite(val) & (val >= cur)
                    if ok.all():
                        break
                    step = np.where(ok, step, 0.5 * step)
            Th = np.where(ok[:, None, None], cand, Th)
            cur = np.where(ok, val, cur)
            peak = float(np.max(cur))
            if not np.isfinite(peak) or peak > ceiling:
                raise NumericalError(
                    f"drift ascent diverged in block {bi} (objective {peak:.3e})")
        return (float(np.sum(cur)), float(np.sum(cur**2)), float(cur.size))

    sums = _pairwise_combine(_run_blocks(samples, worker, threads), _add)
    total, total_sq, n = sums[0], sums[1], int(sums[2])
    mean = total / n
    se = math.sqrt(max(total_sq / n - mean**2, 0.0) / n)
    return EstimatorReport(
        "drift-bound", mean, se, n, float(n),
        {"ascent_steps": ascent_steps, "step_size": step_size, "s": s, "N": N,
         "seed": seed},
    )


# ---------------------------------------------------------------------------
# observables (bounded cylinder functions of the lowest nine modes)
# ---------------------------------------------------------------------------

def _clip5(x: np.ndarray) -> np.ndarray:
    """Smooth two-sided clipping at five standard units."""
    return 5.0 * np.tanh(np.asarray(x) / 5.0)


def _obs_mean_mode(U, V, cutoff, s):
    c = cutoff
    return _clip5(np.real(U[:, c, c]))  # origin sd is 1 for every s


def _obs_re_low_mode(U, V, cutoff, s):
    c = cutoff
    sd = (2.0) ** (-0.5 * (s + 1.0))  # <n> = sqrt(2) at n = (1, 0)
    return _clip5(np.sqrt(2.0) * np.real(U[:, c + 1, c]) / sd)


def _obs_low_quad(U, V, cutoff, s):
    c = cutoff
    sl = slice(c - 1, c + 2)
    block = U[:, sl, sl]
    g = mode_grid(1)
    std = g.jb ** (-(s + 1.0))
    t = np.abs(block) ** 2 / std**2
    return _clip5((np.sum(t, axis=(1, 2)) - 9.0) / 3.0)


def _obs_smooth_indicator(U, V, cutoff, s):
    c = cutoff
    return 1.0 / (1.0 + np.exp(-2.0 * (1.0 - np.abs(U[:, c, c]) ** 2)))


def _obs_const_one(U, V, cutoff, s):
    return np.ones(U.shape[0])


OBSERVABLES = {
    "const-one": _obs_const_one,
    "mean-mode": _obs_mean_mode,
    "re-low-mode": _obs_re_low_mode,
    "low-quad": _obs_low_quad,
    "smooth-indicator": _obs_smooth_indicator,
}


def _resolve_observable(observable):
    if callable(observable):
        return observable, getattr(observable, "__name__", "custom")
    try:
        return OBSERVABLES[observable], observable
    except KeyError:
        raise ValueError(
            f"unknown observable {observable!r}; choose from {sorted(OBSERVABLES)}"
        ) from None


# ---------------------------------------------------------------------------
# transported-density derivative
# ---------------------------------------------------------------------------

def density_derivative_check(s: float, N: int, dt: float, t: float, samples: int,
                             observable, seed: int, threads: int = 1,
                             ess_floor: float = 0.02,
                             nonlinear: bool = True):
    """Short-time transport check: compare the finite-difference derivative of
    a tilted-ensemble observable average against the energy-transport pairing.

    D-hat: Richardson-extrapolated (horizons t and t/2, shared noise)
    difference quotient of E[F(flow)] under the tilted ensemble.
    B-hat: minus the tilted average of F times bracket_h_energy at time zero.
    The report's mean is the paired discrepancy D-hat minus B-hat; stderr is
    the combined uncertainty (paired MC SE plus the magnitude of the removed
    first-order Richardson term).

    `observable` may be a menu name, a batched callable (U, V, cutoff, s) ->
    values, or a list of those; a list shares one set of trajectories and
    returns one report per entry.
    """
    single = not isinstance(observable, (list, tuple))
    obs_list = [observable] if single else list(observable)
    resolved = [_resolve_observable(o) for o in obs_list]
    half_steps = max(1, int(round(0.5 * t / dt)))
    t_eff = 2 * half_steps * dt
    cfg = FlowConfig(s=s, N=N, dt=dt, T=t_eff, seed=seed, nonlinear=nonlinear)
    spec = MeasureSpec(s, N)
    g = mode_grid(N)
    mats = propagator_matrices(N, dt, cfg.damped)
    kernel = NoiseKernel(s, N, dt, cfg.damped)
    m = g.n_half + 1

    def eval_all(U, V):
        return np.stack([fo(U, V, N, s) for fo, _ in resolved])

    def worker(bi, lo, hi):
        from .gaussian import sample_mu_block
        U, V = sample_mu_block(spec, seed, bi, hi - lo, purpose=PURPOSE_INIT)
        r0 = interaction_batch(U, N, s, N)
        br = bracket_batch(U, V, N, s, N)
        f0 = eval_all(U, V)
        for k in range(2 * half_steps):
            stream = RngStream.for_block(seed, PURPOSE_NOISE, bi, step=k)
            draw = stream.standard_normal((hi - lo, m, 2, 2))
            U, V = step_truncated(U, V, cfg, mats, kernel, draw, g)
            if k + 1 == half_steps:
                f_half = eval_all(U, V)
        f_full = eval_all(U, V)
        return [r0, br, f0, f_half, f_full]

    def cat(a, b):
        return [np.concatenate([x, y], axis=-1) for x, y in zip(a, b)]

    r0, br, f0, f_half, f_full = _pairwise_combine(
        _run_blocks(samples, worker, threads), cat)
    w = np.exp(-(r0 - np.min(r0)))  # shift for numerical stability
    ess = float(np.sum(w) ** 2 / np.sum(w**2))
    if ess < ess_floor * samples:
        raise NumericalError(
            f"importance weights degenerate: ESS {ess:.1f} of {samples} "
            f"(floor {ess_floor:.0%})")
    reports = []
    for i, (_, obs_name) in enumerate(resolved):
        d1 = (f_full[i] - f0[i]) / t_eff
        d2 = (f_half[i] - f0[i]) / (0.5 * t_eff)
        rich = 2.0 * d2 - d1
        b_vals = -f0[i] * br
        d_hat, d_se, _ = weighted_mean_se(rich, w)
        b_hat, b_se, _ = weighted_mean_se(b_vals, w)
        diff, diff_se, _ = weighted_mean_se(rich - b_vals, w)
        d1_hat, _, _ = weighted_mean_se(d1, w)
        d2_hat, _, _ = weighted_mean_se(d2, w)
        order_t = abs(d1_hat - d2_hat)
        combined = diff_se + order_t
        reports.append(EstimatorReport(
            "density-derivative", diff, combined, samples, ess,
            {
                "observable": obs_name,
                "d_hat": d_hat, "d_se": d_se,
                "b_hat": b_hat, "b_se": b_se,
                "paired_se": diff_se,
                "order_t_estimate": order_t,
                "t": t_eff, "dt": dt, "s": s, "N": N, "seed": seed,
                "nonlinear": nonlinear,
            },
        ))
    return reports[0] if single else reports


# ---------------------------------------------------------------------------
# compactness-set diagnostics
# ---------------------------------------------------------------------------

def _kr_value(x0: PhaseState, s: float, alpha: float, M_grid) -> float:
    best = -np.inf
    for M in M_grid:
        low = PhaseState(project_square(x0.u, M), project_square(x0.v, M))
        val = state_holder_norm(low, alpha)
        val += sobolev_norm(wick_square(x0.u, s, M), alpha - s)
        best = max(best, val)
    return best


def _default_m_grid(cutoff: int):
    grid = []
    M = 1
    while M <= cutoff:
        grid.append(M)
        M *= 2
    return grid or [cutoff]


def kr_membership(x0: PhaseState, s: float, alpha: float, R: float,
                  M_grid=None) -> KRadiusCheck:
    """Evaluate the compactness-set functional sup_M(state Hoelder norm of the
    M-projection plus the H^{alpha-s} norm of the centered square) at one
    state; membership means the value stays within radius R.

    The sup runs over the supplied dyadic grid, so the value is a lower bound
    of the sup over all scales.
    """
    if not alpha < s:
        raise ValueError(f"alpha must be < s, got alpha={alpha}, s={s}")
    grid = _default_m_grid(x0.cutoff) if M_grid is None else list(M_grid)
    value = _kr_value(x0, s, alpha, grid)
    values = np.array([value])
    return KRadiusCheck(R, alpha, values, values <= R)


def kr_ensemble(s: float, alpha: float, R: float, cutoff: int, samples: int,
                seed: int, M_grid=None) -> KRadiusCheck:
    """Distribution of the compactness functional over a reference ensemble."""
    if not alpha < s:
        raise ValueError(f"alpha must be < s, got alpha={alpha}, s={s}")
    from .gaussian import sample_mu_states
    grid = _default_m_grid(cutoff) if M_grid is None else list(M_grid)
    states = sample_mu_states(MeasureSpec(s, cutoff), seed, samples)
    values = np.array([_kr_value(x, s, alpha, grid) for x in states])
    return KRadiusCheck(R, alpha, values, values <= R)


# ---------------------------------------------------------------------------
# quasi-invariance scan
# ---------------------------------------------------------------------------

def _safe_z(shift: float, se: float) -> float:
    """Standardized shift; a zero-variance observable reports z = 0."""
    if se > 0.0:
        return float(shift / se)
    return 0.0 if shift == 0.0 else math.copysign(math.inf, shift)


def _weighted_ks(x0, w0, x1, w1) -> float:
    """Two-sample Kolmogorov-Smirnov distance between weighted empirical laws."""
    xs = np.concatenate([x0, x1])
    order = np.argsort(xs, kind="stable")
    grid = xs[order]
    c0 = np.searchsorted(np.sort(x0), grid, side="right")
    f0 = np.cumsum(w0[np.argsort(x0, kind="stable")]) / np.sum(w0)
    f0 = np.concatenate([[0.0], f0])[c0]
    c1 = np.searchsorted(np.sort(x1), grid, side="right")
    f1 = np.cumsum(w1[np.argsort(x1, kind="stable")]) / np.sum(w1)
    f1 = np.concatenate([[0.0], f1])[c1]
    return float(np.max(np.abs(f0 - f1)))


def quasi_invariance_scan(s: float, N: int, dt: float, T: float, samples: int,
                          seed: int, threads: int = 1) -> list:
    """Evolve tilted and reference ensembles under the full nonlinear flow and
    report two-sample statistics per low mode and per observable.

    Absolute continuity at finite truncation shows up as finite, stable
    statistics; nothing sharper is asserted here — the reports are emitted for
    inspection and regression.
    """
    cfg = FlowConfig(s=s, N=N, dt=dt, T=T, seed=seed)
    spec = MeasureSpec(s, N)
    g = mode_grid(N)
    mats = propagator_matrices(N, dt, cfg.damped)
    kernel = NoiseKernel(s, N, dt, cfg.damped) if cfg.n_steps > 0 else None
    m = g.n_half + 1

    def worker(bi, lo, hi):
        from .gaussian import sample_mu_block
        U, V = sample_mu_block(spec, seed, bi, hi - lo, purpose=PURPOSE_INIT)
        r0 = interaction_batch(U, N, s, N)
        low0 = U[:, N - 1:N + 2, N - 1:N + 2].copy()
        obs0 = {name: fn(U, V, N, s) for name, fn in OBSERVABLES.items()}
        for k in range(cfg.n_steps):
            stream = RngStream.for_block(seed, PURPOSE_NOISE, bi, step=k)
            draw = stream.standard_normal((hi - lo, m, 2, 2))
            U, V = step_truncated(U, V, cfg, mats, kernel, draw, g)
        lowT = U[:, N - 1:N + 2, N - 1:N + 2].copy()
        obsT = {name: fn(U, V, N, s) for name, fn in OBSERVABLES.items()}
        return r0, low0, lowT, obs0, obsT

    parts = _run_blocks(samples, worker, threads)
    r0 = np.concatenate([p[0] for p in parts])
    low0 = np.concatenate([p[1] for p in parts])
    lowT = np.concatenate([p[2] for p in parts])
    obs0 = {k: np.concatenate([p[3][k] for p in parts]) for k in OBSERVABLES}
    obsT = {k: np.concatenate([p[4][k] for p in parts]) for k in OBSERVABLES}
    w = np.exp(-(r0 - np.min(r0)))
    ones = np.ones_like(w)
    ess = float(np.sum(w) ** 2 / np.sum(w**2))

    reports = []
    for (i, j) in [(a, b) for a in range(3) for b in range(3)]:
        n1, n2 = i - 1, j - 1
        for part, label in ((np.real, "re"), (np.imag, "im")):
            x0 = part(low0[:, i, j])
            xT = part(lowT[:, i, j])
            if label == "im" and n1 == 0 and n2 == 0:
                continue
            for wts, ens in ((w, "tilted"), (ones, "reference")):
                ks = _weighted_ks(x0, wts, xT, wts)
                m0, se0, _ = weighted_mean_se(x0, wts)
                mT, seT, _ = weighted_mean_se(xT, wts)
                v0, _, _ = weighted_mean_se((x0 - m0) ** 2, wts)
                vT, _, _ = weighted_mean_se((xT - mT) ** 2, wts)
                z = _safe_z(mT - m0, math.sqrt(se0**2 + seT**2))
                reports.append(EstimatorReport(
                    f"{ens}:{label}-u({n1},{n2})", ks, 0.0, samples,
                    ess if ens == "tilted" else float(samples),
                    {"kind": "ks", "mean_z": z,
                     "var_ratio": vT / v0 if v0 > 0 else float("inf")},
                ))
    for name in OBSERVABLES:
        for wts, ens in ((w, "tilted"), (ones, "reference")):
            m0, se0, _ = weighted_mean_se(obs0[name], wts)
            mT, seT, _ = weighted_mean_se(obsT[name], wts)
            z = _safe_z(mT - m0, math.sqrt(se0**2 + seT**2))
            reports.append(EstimatorReport(
                f"{ens}:obs-{name}", mT - m0, math.sqrt(se0**2 + seT**2),
                samples, ess if ens == "tilted" else float(samples),
                {"kind": "observable-shift", "z": z, "t0": m0, "tT": mT},
            ))
    return reports
