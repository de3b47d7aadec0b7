"""Command-line front end: subcommands, config files, output formats, run
provenance.

Every run that writes files puts them in one output directory together with a
manifest.json recording the resolved configuration, the master seed, the code
version, timestamps, and a sha256 digest of every other file written.  Set
SOURCE_DATE_EPOCH to pin the manifest timestamps for fully byte-identical
reruns.

Exit codes: 0 success, 1 usage or validation error, 2 numerical error
(blow-up, degenerate weights, diverged optimizer), 3 selftest failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import math
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .errors import NumericalError

ENV_OUT_DIR = "SDNLWAVE_OUT_DIR"
_CONFIG_KEYS = ("s", "N", "dt", "T", "samples", "seed", "threads", "out_dir")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad usage; the contract here is exit 1."""

    def error(self, message):
        raise _UsageError(message)


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------

def _load_config(path: str) -> dict:
    """Read run parameters from a line-based config file or a manifest.

    INI-style files use a [run] section of key = value pairs; a manifest.json
    written by an earlier run can be passed instead, in which case its embedded
    config snapshot is used (the round-trip contract).
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise _UsageError(f"cannot read config {path}: {exc}") from None
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        cfg = doc.get("config", {})
        return {k: cfg[k] for k in _CONFIG_KEYS if k in cfg}
    parser = configparser.ConfigParser()
    parser.read_string(text)
    section = None
    for name in ("run", parser.default_section):
        if name == parser.default_section or parser.has_section(name):
            section = name
            if name != parser.default_section and parser.options(name):
                break
    out: dict = {}
    for key in _CONFIG_KEYS:
        if section is not None and parser.has_option(section, key):
            out[key] = parser.get(section, key)
    return out


_CASTS = {
    "s": float, "dt": float, "T": float,
    "N": int, "samples": int, "seed": int, "threads": int,
    "out_dir": str,
}


def _resolve(args, config: dict, key: str, default=None, required=False):
    """flag > config file > default; casts config-file strings."""
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in config and config[key] is not None:
        return _CASTS.get(key, str)(config[key])
    if default is not None or not required:
        return default
    raise _UsageError(f"missing required parameter --{key.replace('_', '-')}")


def _out_dir(args, config: dict) -> str:
    path = getattr(args, "out", None) or config.get("out_dir") \
        or os.environ.get(ENV_OUT_DIR) or "sdnlwave-out"
    os.makedirs(path, exist_ok=True)
    return str(path)


# ---------------------------------------------------------------------------
# output formats
# ---------------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if math.isfinite(value):
            return value
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def _json_line(record: dict) -> str:
    return json.dumps(_jsonable(record), sort_keys=True, allow_nan=False) + "\n"


def _write_reports(out_dir: str, reports) -> dict[str, str]:
    """JSON-lines (one report per line) plus a CSV summary."""
    files = {}
    jl = io.StringIO()
    for rep in reports:
        jl.write(_json_line(rep.as_dict()))
    files["reports.jsonl"] = jl.getvalue()

    cs = io.StringIO()
    writer = csv.writer(cs, lineterminator="\n")
    writer.writerow(["name", "mean", "stderr", "count", "ess"])
    for rep in reports:
        writer.writerow([rep.name, repr(float(rep.mean)), repr(float(rep.stderr)),
                         int(rep.count), repr(float(rep.ess))])
    files["summary.csv"] = cs.getvalue()
    return _write_files(out_dir, files)


def _write_files(out_dir: str, files: dict[str, str | bytes]) -> dict[str, str]:
    digests = {}
    for name, data in sorted(files.items()):
        payload = data.encode("utf-8") if isinstance(data, str) else data
        with open(os.path.join(out_dir, name), "wb") as fh:
            fh.write(payload)
        digests[name] = hashlib.sha256(payload).hexdigest()
    return digests


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        moment = datetime.fromtimestamp(int(epoch), tz=timezone.utc)
    else:
        moment = datetime.now(tz=timezone.utc)
    return moment.isoformat()


def _write_manifest(out_dir: str, command: str, params: dict,
                    started: str, digests: dict[str, str]) -> None:
    manifest = {
        "format": "sdnlwave-run-manifest/1",
        "code_version": __version__,
        "command": command,
        "master_seed": params.get("seed"),
        "config": _jsonable(params),
        "started": started,
        "finished": _timestamp(),
        "outputs": digests,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


# ---------------------------------------------------------------------------
# subcommands: fields and flows
# ---------------------------------------------------------------------------

def _cmd_sample_mu(args, config):
    from .gaussian import MeasureSpec, sample_mu
    from .spectral import SpectralField, _coeff_bytes, _pack_header

    s = _resolve(args, config, "s", required=True)
    N = _resolve(args, config, "N", required=True)
    count = args.count
    seed = _resolve(args, config, "seed", default=0)
    out = _out_dir(args, config)
    started = _timestamp()
    u, v = sample_mu(MeasureSpec(s, N), seed, count)
    buf = io.BytesIO()
    for i in range(count):
        buf.write(_pack_header(N, s))
        buf.write(_coeff_bytes(u[i]))
        buf.write(_coeff_bytes(v[i]))
    params = {"s": s, "N": N, "count": count, "seed": seed, "out_dir": out}
    digests = _write_files(out, {"samples.states": buf.getvalue()})
    _write_manifest(out, "sample-mu", params, started, digests)
    print(f"wrote {count} states to {os.path.join(out, 'samples.states')}")
    return 0


def _cmd_evolve(args, config):
    from .dynamics import FlowConfig, evolve_ensemble, sample_initial_ensemble
    from .functionals import evaluate_functionals
    from .spectral import PhaseState, SpectralField, _coeff_bytes, _pack_header

    s = _resolve(args, config, "s", required=True)
    N = _resolve(args, config, "N", required=True)
    dt = _resolve(args, config, "dt", required=True)
    T = _resolve(args, config, "T", required=True)
    seed = _resolve(args, config, "seed", default=0)
    count = args.count
    every = args.snapshot_every
    out = _out_dir(args, config)
    started = _timestamp()

    cfg = FlowConfig(s=s, N=N, dt=dt, T=T, seed=seed, splitting=args.splitting)
    if count > 1024:
        raise _UsageError("evolve handles at most one sample block (count <= 1024)")
    U, V = sample_initial_ensemble(cfg, count)
    store = cfg.cutoff

    snaps = [io.BytesIO() for _ in range(count)]
    obs = io.StringIO()

    def record(step, t, Uc, Vc):
        for i in range(count):
            snaps[i].write(_pack_header(store, s))
            snaps[i].write(_coeff_bytes(Uc[i]))
            snaps[i].write(_coeff_bytes(Vc[i]))
            state = PhaseState(SpectralField(Uc[i], store), SpectralField(Vc[i], store))
            rep = evaluate_functionals(state, s, N)
            for name, value in sorted(rep.as_dict().items()):
                if name in ("s", "N"):
                    continue
                obs.write(_json_line({"seed": seed, "sample": i, "t": t,
                                      "name": name, "value": value}))

    record(0, 0.0, U, V)
    evolve_ensemble(U, V, cfg, recorder=lambda k, t, Uc, Vc:
                    record(k, t, Uc, Vc) if k % every == 0 else None)
    files: dict[str, str | bytes] = {"observables.jsonl": obs.getvalue()}
    for i in range(count):
        files[f"sample{i:04d}.states"] = snaps[i].getvalue()
    params = {"s": s, "N": N, "dt": dt, "T": T, "seed": seed, "count": count,
              "splitting": args.splitting, "snapshot_every": every, "out_dir": out}
    digests = _write_files(out, files)
    _write_manifest(out, "evolve", params, started, digests)
    print(f"evolved {count} state(s) for {cfg.n_steps} steps; outputs in {out}")
    return 0


def _cmd_functionals(args, config):
    from .functionals import evaluate_functionals
    from .spectral import read_state_snapshot

    state, s_stored = read_state_snapshot(args.infile)
    s = args.s if args.s is not None else s_stored
    if s is None or (isinstance(s, float) and math.isnan(s)):
        raise _UsageError("--s required (snapshot does not carry one)")
    N = args.N if args.N is not None else state.cutoff
    rep = evaluate_functionals(state, s, N)
    sys.stdout.write(json.dumps(_jsonable(rep.as_dict()), sort_keys=True, allow_nan=False) + "\n")
    return 0


def _cmd_bracket_check(args, config):
    from .dynamics import FlowConfig, evolve
    from .functionals import bracket_h_energy, total_energy
    from .gaussian import MeasureSpec, sample_mu_states

    s = _resolve(args, config, "s", required=True)
    N = _resolve(args, config, "N", required=True)
    dt = _resolve(args, config, "dt", required=True)
    seed = _resolve(args, config, "seed", default=0)
    out = _out_dir(args, config)
    started = _timestamp()

    states = sample_mu_states(MeasureSpec(s, N), seed, args.trials)
    rows = []
    for i, x0 in enumerate(states):
        fwd = evolve(x0, FlowConfig(s=s, N=N, dt=dt, T=dt, seed=seed,
                                    damped=False, noise=False))
        bwd = evolve(x0, FlowConfig(s=s, N=N, dt=-dt, T=-dt, seed=seed,
                                    damped=False, noise=False))
        fd = (total_energy(fwd, s, N) - total_energy(bwd, s, N)) / (2.0 * dt)
        br = bracket_h_energy(x0, s, N)
        rel = abs(fd + br) / max(abs(br), 1e-300)
        rows.append((i, rel))

    cs = io.StringIO()
    writer = csv.writer(cs, lineterminator="\n")
    writer.writerow(["trial", "relative_error"])
    for i, rel in rows:
        writer.writerow([i, repr(rel)])
    params = {"s": s, "N": N, "dt": dt, "trials": args.trials, "seed": seed,
              "out_dir": out}
    digests = _write_files(out, {"bracket_check.csv": cs.getvalue()})
    _write_manifest(out, "bracket-check", params, started, digests)
    worst = max(rel for _, rel in rows)
    print(f"{args.trials} trials, worst relative error {worst:.3e}; CSV in {out}")
    return 0


def _parse_exponent(text: str) -> float:
    if text.lower() in ("inf", "infinity"):
        return float("inf")
    return float(text)


def _cmd_besov(args, config):
    from .besov import besov_norm
    from .spectral import read_field_snapshot

    field, _ = read_field_snapshot(args.infile)
    p = _parse_exponent(args.p)
    q = _parse_exponent(args.q)
    value = besov_norm(field, args.alpha, p, q)
    sys.stdout.write(json.dumps(_jsonable(
        {"alpha": args.alpha, "p": p, "q": q, "cutoff": field.cutoff,
         "norm": value}), sort_keys=True, allow_nan=False) + "\n")
    return 0


def _cmd_commutator_sweep(args, config):
    from .besov import commutator_ratio
    from .gaussian import sample_mu_position
    from .spectral import SpectralField

    s = _resolve(args, config, "s", required=True)
    seed = _resolve(args, config, "seed", default=0)
    samples = _resolve(args, config, "samples", default=16)
    out = _out_dir(args, config)
    started = _timestamp()

    sizes = []
    N = args.Nmin
    while N <= args.Nmax:
        sizes.append(N)
        N *= 2
    cs = io.StringIO()
    writer = csv.writer(cs, lineterminator="\n")
    writer.writerow(["N", "ratio_mean", "ratio_max"])
    summary = []
    for N in sizes:
        u = sample_mu_position(s, N, seed, samples)
        ratios = [commutator_ratio(SpectralField(u[i], N), s, args.eps)
                  for i in range(samples)]
        writer.writerow([N, repr(float(np.mean(ratios))), repr(float(np.max(ratios)))])
        summary.append((N, float(np.mean(ratios)), float(np.max(ratios))))
    params = {"s": s, "eps": args.eps, "Nmin": args.Nmin, "Nmax": args.Nmax,
              "samples": samples, "seed": seed, "out_dir": out}
    digests = _write_files(out, {"commutator_sweep.csv": cs.getvalue()})
    _write_manifest(out, "commutator-sweep", params, started, digests)
    for N, mean, peak in summary:
        print(f"N={N:4d}  ratio mean {mean:.4f}  max {peak:.4f}")
    return 0


# ---------------------------------------------------------------------------
# subcommands: measure laboratory
# ---------------------------------------------------------------------------

def _cmd_invariance(args, config):
    from .lab import linear_invariance_test

    s = _resolve(args, config, "s", required=True)
    N = _resolve(args, config, "N", required=True)
    dt = _resolve(args, config, "dt", required=True)
    T = _resolve(args, config, "T", required=True)
    samples = _resolve(args, config, "samples", required=True)
    seed = _resolve(args, config, "seed", default=0)
    threads = _resolve(args, config, "threads", default=1)
    out = _out_dir(args, config)
    started = _timestamp()
    result = linear_invariance_test(s, N, dt, T, samples, seed, threads)
    params = {"s": s, "N": N, "dt": dt, "T": T, "samples": samples,
              "seed": seed, "threads": threads, "out_dir": out}
    digests = _write_reports(out, result.reports)
    _write_manifest(out, "invariance", params, started, digests)
    for rep in result.reports:
        print(f"{rep.name}: {rep.mean:.4f}")
    return 0


def _cmd_partition(args, config):
    from .lab import partition_estimate

    s = _resolve(args, config, "s", required=True)
    N = _resolve(args, config, "N", required=True)
    samples = _resolve(args, config, "samples", required=True)
    seed = _resolve(args, config, "seed", default=0)
    threads = _resolve(args, config, "threads", default=1)
    out = _out_dir(args, config)
    started = _timestamp()
    rep = partition_estimate(s, N, samples, seed, threads)
    params = {"s": s, "N": N, "samples": samples, "seed": seed,
              "threads": threads, "out_dir": out}
    digests = _write_reports(out, [rep])
    _write_manifest(out, "partition", params, started, digests)
    print(f"Z estimate {rep.mean:.6e} (log {rep.metadata['log_z']:.4f} "
          f"+- {rep.metadata['log_z_se']:.4f})")
    return 0


def _cmd_bd_bound(args, config):
    from .lab import bd_bound, partition_estimate

    s = _resolve(args, config, "s", required=True)
    N = _resolve(args, config, "N", required=True)
    samples = _resolve(args, config, "samples", required=True)
    seed = _resolve(args, config, "seed", default=0)
    threads = _resolve(args, config, "threads", default=1)
    out = _out_dir(args, config)
    started = _timestamp()
    bound = bd_bound(s, N, samples, args.ascent_steps, args.step_size, seed,
                     threads)
    part = partition_estimate(s, N, samples, seed, threads)
    params = {"s": s, "N": N, "samples": samples, "seed": seed,
              "threads": threads, "ascent_steps": args.ascent_steps,
              "step_size": args.step_size, "out_dir": out}
    digests = _write_reports(out, [bound, part])
    _write_manifest(out, "bd-bound", params, started, digests)
    lz = part.metadata["log_z"]
    slack = bound.mean - lz
    print(f"upper bound {bound.mean:.4f} +- {bound.stderr:.4f}; "
          f"log Z estimate {lz:.4f}; slack {slack:.4f}")
    return 0


def _cmd_density_check(args, config):
    from .lab import density_derivative_check

    s = _resolve(args, config, "s", required=True)
    N = _resolve(args, config, "N", required=True)
    dt = _resolve(args, config, "dt", required=True)
    samples = _resolve(args, config, "samples", required=True)
    seed = _resolve(args, config, "seed", default=0)
    threads = _resolve(args, config, "threads", default=1)
    out = _out_dir(args, config)
    started = _timestamp()
    observables = [o.strip() for o in args.observables.split(",") if o.strip()]
    reports = density_derivative_check(s, N, dt, args.t, samples, observables,
                                       seed, threads, ess_floor=args.ess_floor)
    params = {"s": s, "N": N, "dt": dt, "t": args.t, "samples": samples,
              "seed": seed, "threads": threads,
              "observables": args.observables, "ess_floor": args.ess_floor,
              "out_dir": out}
    digests = _write_reports(out, reports)
    _write_manifest(out, "density-check", params, started, digests)
    for rep in reports:
        print(f"{rep.metadata['observable']}: D {rep.metadata['d_hat']:.4f}  "
              f"B {rep.metadata['b_hat']:.4f}  "
              f"discrepancy {rep.mean:.4f} +- {rep.stderr:.4f}")
    return 0


def _cmd_qi_scan(args, config):
    from .lab import quasi_invariance_scan

    s = _resolve(args, config, "s", required=True)
    N = _resolve(args, config, "N", required=True)
    dt = _resolve(args, config, "dt", required=True)
    T = _resolve(args, config, "T", required=True)
    samples = _resolve(args, config, "samples", required=True)
    seed = _resolve(args, config, "seed", default=0)
    threads = _resolve(args, config, "threads", default=1)
    out = _out_dir(args, config)
    started = _timestamp()
    reports = quasi_invariance_scan(s, N, dt, T, samples, seed, threads)
    params = {"s": s, "N": N, "dt": dt, "T": T, "samples": samples,
              "seed": seed, "threads": threads, "out_dir": out}
    digests = _write_reports(out, reports)
    _write_manifest(out, "qi-scan", params, started, digests)
    ks = [r.mean for r in reports if r.metadata.get("kind") == "ks"]
    print(f"{len(reports)} reports; max per-mode KS distance {max(ks):.4f}")
    return 0


def _cmd_kr_check(args, config):
    from .lab import EstimatorReport, kr_ensemble

    s = _resolve(args, config, "s", required=True)
    N = _resolve(args, config, "N", required=True)
    samples = _resolve(args, config, "samples", required=True)
    seed = _resolve(args, config, "seed", default=0)
    out = _out_dir(args, config)
    started = _timestamp()
    check = kr_ensemble(s, args.alpha, args.radius, N, samples, seed)
    vals = check.values
    rep = EstimatorReport(
        "kr-value", float(np.mean(vals)),
        float(np.std(vals) / math.sqrt(len(vals))), len(vals), float(len(vals)),
        {
            "alpha": args.alpha, "R": args.radius, "s": s, "N": N,
            "member_fraction": float(np.mean(check.members)),
            "q10": float(np.quantile(vals, 0.10)),
            "q50": float(np.quantile(vals, 0.50)),
            "q90": float(np.quantile(vals, 0.90)),
            "max": float(np.max(vals)),
        },
    )
    params = {"s": s, "N": N, "samples": samples, "seed": seed,
              "alpha": args.alpha, "radius": args.radius, "out_dir": out}
    digests = _write_reports(out, [rep])
    _write_manifest(out, "kr-check", params, started, digests)
    print(f"median value {rep.metadata['q50']:.4f}; "
          f"fraction within radius {rep.metadata['member_fraction']:.3f}")
    return 0


# ---------------------------------------------------------------------------
# selftest
# ---------------------------------------------------------------------------

def _selftest_checks(quick: bool):
    """Yield (name, thunk) pairs; each thunk raises AssertionError on failure."""
    import numpy as np

    from .besov import dyadic_decomposition, paraproduct_parts
    from .dynamics import propagate_linear
    from .functionals import (bracket_h_energy, hamiltonian, script_energy,
                              sigma_renorm, total_energy, wick_square)
    from .gaussian import MeasureSpec, sample_mu_states
    from .lab import partition_estimate
    from .spectral import dealiased_pair_product

    spec = MeasureSpec(1.0, 4)
    states = sample_mu_states(spec, 42, 3)

    def identity_propagator():
        x = states[0]
        y = propagate_linear(x, 0.0)
        assert np.allclose(y.u.coeff, x.u.coeff, rtol=0, atol=1e-14)
        assert np.allclose(y.v.coeff, x.v.coeff, rtol=0, atol=1e-14)

    def semigroup():
        x = states[0]
        a = propagate_linear(propagate_linear(x, 0.3), 0.7)
        b = propagate_linear(x, 1.0)
        assert np.allclose(a.u.coeff, b.u.coeff, atol=1e-12)
        assert np.allclose(a.v.coeff, b.v.coeff, atol=1e-12)

    def sigma_anchors():
        assert sigma_renorm(0) == 1.0
        assert abs(sigma_renorm(1) - 13.0 / 3.0) < 1e-14

    def self_bracket_vanishes():
        from .functionals import grad_hamiltonian
        for x in states:
            h = hamiltonian(x, 4)
            grad = grad_hamiltonian(x, 4)
            lhs = np.sum(np.real(grad.u.coeff * np.conj(grad.v.coeff)))
            rhs = np.sum(np.real(grad.v.coeff * np.conj(grad.u.coeff)))
            assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(h))

    def energy_two_way():
        for x in states:
            direct = total_energy(x, 1.0, 4)
            split = script_energy(x, 1.0, 4) + hamiltonian(x, 4)
            assert abs(direct - split) < 1e-10 * max(1.0, abs(direct))

    def partition_trivial():
        rep = partition_estimate(1.0, 2, 128, seed=5,
                                 interaction=lambda U: np.zeros(U.shape[0]))
        assert abs(rep.mean - 1.0) < 1e-12

    def paraproduct_trichotomy():
        f = states[0].u
        g = states[1].u
        parts = paraproduct_parts(f, g)
        total = parts["lo-hi"].coeff + parts["resonant"].coeff + parts["hi-lo"].coeff
        product = dealiased_pair_product(f, g)
        assert np.allclose(total, product.coeff, atol=1e-10)

    def partition_of_unity():
        dec = dyadic_decomposition(16)
        total = np.zeros_like(dec.symbols[0])
        for sym in dec.symbols:
            total = total + sym
        assert np.allclose(total, 1.0, atol=0)

    checks = [
        ("propagator at time zero is the identity", identity_propagator),
        ("propagator composes over split times", semigroup),
        ("renormalization constants at N=0,1", sigma_anchors),
        ("self-bracket of the Hamiltonian vanishes", self_bracket_vanishes),
        ("energy splits consistently", energy_two_way),
        ("partition of a zero interaction is one", partition_trivial),
        ("paraproduct pieces sum to the product", paraproduct_trichotomy),
        ("dyadic symbols sum to one", partition_of_unity),
    ]
    if not quick:
        def wick_mean_small():
            samples = sample_mu_states(MeasureSpec(1.0, 8), 7, 64)
            vals = [wick_square(x.u, 1.0, 8).coeff[16, 16].real for x in samples]
            se = np.std(vals) / np.sqrt(len(vals))
            assert abs(np.mean(vals)) < 5 * max(se, 1e-12)

        def bracket_fd_coarse():
            from .dynamics import FlowConfig, evolve
            x = states[0]
            h = 1e-3
            fwd = evolve(x, FlowConfig(s=1.0, N=4, dt=h, T=h, damped=False, noise=False))
            bwd = evolve(x, FlowConfig(s=1.0, N=4, dt=-h, T=-h, damped=False, noise=False))
            fd = (total_energy(fwd, 1.0, 4) - total_energy(bwd, 1.0, 4)) / (2 * h)
            br = bracket_h_energy(x, 1.0, 4)
            assert abs(fd + br) < 5e-2 * max(1.0, abs(br))

        checks += [
            ("centered square has zero mean over the ensemble", wick_mean_small),
            ("energy transport matches the bracket coarsely", bracket_fd_coarse),
        ]
    return checks


def _cmd_selftest(args, config):
    failures = 0
    for name, thunk in _selftest_checks(args.quick):
        try:
            thunk()
        except Exception as exc:  # noqa: BLE001 - report and continue
            failures += 1
            print(f"fail - {name}: {exc}", file=sys.stderr)
        else:
            print(f"ok - {name}")
    if failures:
        print(f"{failures} selftest check(s) failed", file=sys.stderr)
        return 3
    return 0


# ---------------------------------------------------------------------------
# parser assembly
# ---------------------------------------------------------------------------

def _add_config_flags(sub):
    sub.add_argument("--config", help="line-based config file ([run] section, "
                     "key = value) or a manifest.json from an earlier run")
    sub.add_argument("--s", type=float, default=None)
    sub.add_argument("--N", type=int, default=None)
    sub.add_argument("--dt", type=float, default=None)
    sub.add_argument("--T", type=float, default=None)
    sub.add_argument("--samples", type=int, default=None)
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--threads", type=int, default=None)
    sub.add_argument("--out", default=None, help="output directory "
                     f"(default from ${ENV_OUT_DIR})")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sdnlwave",
                     description="Spectral simulator and measure laboratory "
                                 "for the stochastic damped cubic wave "
                                 "equation on the 2-torus.")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", metavar="subcommand")

    p = subs.add_parser("sample-mu", help="draw reference-measure samples")
    _add_config_flags(p)
    p.add_argument("--count", type=int, required=True)
    p.set_defaults(func=_cmd_sample_mu)

    p = subs.add_parser("evolve", help="run the truncated stochastic flow")
    _add_config_flags(p)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--splitting", choices=("lie", "strang"), default="strang")
    p.add_argument("--snapshot-every", type=int, default=1)
    p.set_defaults(func=_cmd_evolve)

    p = subs.add_parser("functionals", help="print every scalar functional of "
                                            "a stored state")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--s", type=float, default=None)
    p.add_argument("--N", type=int, default=None)
    p.set_defaults(func=_cmd_functionals)

    p = subs.add_parser("bracket-check", help="energy transport vs. bracket, "
                                              "per-trial relative errors")
    _add_config_flags(p)
    p.add_argument("--trials", type=int, default=20)
    p.set_defaults(func=_cmd_bracket_check)

    p = subs.add_parser("besov", help="dyadic-block norm of a stored field")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--p", default="inf")
    p.add_argument("--q", default="inf")
    p.set_defaults(func=_cmd_besov)

    p = subs.add_parser("commutator-sweep", help="cubic commutator ratios "
                                                 "across cutoffs")
    _add_config_flags(p)
    p.add_argument("--eps", type=float, default=0.2)
    p.add_argument("--Nmin", type=int, default=8)
    p.add_argument("--Nmax", type=int, default=64)
    p.set_defaults(func=_cmd_commutator_sweep)

    p = subs.add_parser("invariance", help="stationarity z-scores of the "
                                           "linear flow")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_invariance)

    p = subs.add_parser("partition", help="normalization constant of the "
                                          "tilted measure")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_partition)

    p = subs.add_parser("bd-bound", help="variational upper bound for the "
                                         "log normalization")
    _add_config_flags(p)
    p.add_argument("--ascent-steps", type=int, default=200)
    p.add_argument("--step-size", type=float, default=0.25)
    p.set_defaults(func=_cmd_bd_bound)

    p = subs.add_parser("density-check", help="short-time transport derivative "
                                              "vs. bracket pairing")
    _add_config_flags(p)
    p.add_argument("--t", type=float, default=0.02)
    p.add_argument("--observables", default="const-one,mean-mode,low-quad")
    p.add_argument("--ess-floor", type=float, default=0.02)
    p.set_defaults(func=_cmd_density_check)

    p = subs.add_parser("qi-scan", help="two-sample statistics of tilted vs. "
                                        "reference ensembles under the flow")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_qi_scan)

    p = subs.add_parser("kr-check", help="compactness-set functional over an "
                                         "ensemble")
    _add_config_flags(p)
    p.add_argument("--alpha", type=float, default=0.8)
    p.add_argument("--radius", type=float, default=30.0)
    p.set_defaults(func=_cmd_kr_check)

    p = subs.add_parser("selftest", help="run the built-in identity suite")
    p.add_argument("--quick", action="store_true")
    p.set_defaults(func=_cmd_selftest)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "command", None) is None:
            parser.print_usage(sys.stderr)
            return 1
        config = _load_config(args.config) if getattr(args, "config", None) else {}
        return args.func(args, config)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
