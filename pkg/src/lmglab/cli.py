"""Batch command-line interface.

Every subcommand reads flags (optionally overlaid on a JSON config
file; flags win), computes, and writes CSV/JSON outputs plus a manifest
sidecar into the output directory (flag ``--outdir``, else the
``LMGLAB_OUTDIR`` environment variable, else the working directory).

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure
(the manifest then names the failing stage).
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import classical, dynamics, phase_space, spectral
from .errors import ConfigError, LmglabError, NumericalFailureError
from .outputs import RunRecorder
from .spin_core import CouplingParams, SpinSpace, coherent_amplitudes

DEFAULT_SEED = 2022


def _add_common(sub, coupling=True, spin=True):
    sub.add_argument("--config", type=str, default=None, help="JSON config file; flags win")
    sub.add_argument("--outdir", type=str, default=None)
    sub.add_argument("--prefix", type=str, default=None, help="base name for output files")
    if spin:
        sub.add_argument("--j", type=float, default=None)
    if coupling:
        group = sub.add_mutually_exclusive_group()
        group.add_argument("--ratio", type=float, default=None, help="gamma_y / gamma_x")
        group.add_argument("--gy", type=float, default=None)
        sub.add_argument("--gx", type=float, default=None)
        sub.add_argument("--eps0", type=float, default=None)


def build_parser():
    parser = argparse.ArgumentParser(prog="lmglab", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("spectrum", help="eigenvalues at one coupling")
    _add_common(p)
    p.add_argument("--vectors", action="store_true", help="also verify eigenvector residuals")

    p = subs.add_parser("sweep", help="spectrum flow along a coupling ray")
    _add_common(p)
    p.add_argument("--gx-min", type=float, default=None)
    p.add_argument("--gx-max", type=float, default=None)
    p.add_argument("--gx-steps", type=int, default=None)

    p = subs.add_parser("crossings", help="EBK crossing predictions and located gaps")
    _add_common(p, coupling=False)
    p.add_argument("--ratio", type=float, default=None)
    p.add_argument("--n", type=int, nargs="+", default=None, help="crossing indices N")
    p.add_argument("--sign", type=int, default=None, help="sign of gamma_x (default -1)")
    p.add_argument("--locate-pair", action="append", default=None,
                   metavar="PARITY:K", help="e.g. +:62 to minimize the (62,63) gap")
    p.add_argument("--locate-real", action="append", type=int, default=None,
                   metavar="K", help="locate the real crossing of E+[K] and E-[K]")
    p.add_argument("--bracket", type=float, nargs=2, default=None,
                   help="|gamma_x| search interval for the locate options")

    p = subs.add_parser("dos", help="semiclassical density of states + quantum histogram")
    _add_common(p)
    p.add_argument("--e-steps", type=int, default=None)
    p.add_argument("--bins", type=int, default=None)

    p = subs.add_parser("classify", help="coupling sector, critical energies, fixed points")
    _add_common(p)
    p.add_argument("--trajectories", type=str, default=None,
                   help="comma list of eps=E/J values; emits one orbit CSV per value")

    p = subs.add_parser("husimi", help="Husimi field of an eigenstate or evolved state")
    _add_common(p)
    p.add_argument("--parity", type=str, default=None, choices=["+", "-"])
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--scenario", type=str, default=None, choices=list(dynamics.SCENARIO_KINDS))
    p.add_argument("--time", type=float, default=None)
    p.add_argument("--grid", type=int, default=None)
    p.add_argument("--with-trajectory", action="store_true")

    p = subs.add_parser("wehrl", help="Wehrl entropies per state or along a coupling scan")
    _add_common(p)
    p.add_argument("--parity", type=str, default=None, choices=["+", "-"])
    p.add_argument("--k", type=int, nargs="+", default=None)
    p.add_argument("--all-states", action="store_true")
    p.add_argument("--gx-min", type=float, default=None)
    p.add_argument("--gx-max", type=float, default=None)
    p.add_argument("--gx-steps", type=int, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--convention", type=str, default=None, choices=["normalized", "raw"])

    p = subs.add_parser("dynamics", help="quantum vs TWA quench time series")
    _add_common(p)
    p.add_argument("--scenario", type=str, default=None, choices=list(dynamics.SCENARIO_KINDS))
    p.add_argument("--q0", type=float, default=None)
    p.add_argument("--p0", type=float, default=None)
    p.add_argument("--m-samples", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--t-max", type=float, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--window", type=float, default=None)
    p.add_argument("--rtol", type=float, default=None, help="TWA integrator tolerance")
    return parser


def _merge_config(args):
    """Overlay JSON config under explicit flags; flags always win."""
    merged = dict(vars(args))
    if args.config:
        try:
            with open(args.config) as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from exc
        for key, val in file_cfg.items():
            key = key.replace("-", "_")
            if merged.get(key) is None:
                merged[key] = val
    return merged


def _get(cfg, key, default=None, required=False):
    val = cfg.get(key)
    if val is None:
        if required and default is None:
            raise ConfigError(f"missing required option --{key.replace('_', '-')}")
        return default
    return val


def _couplings(cfg, gx=None):
    if gx is None:
        gx = _get(cfg, "gx", required=True)
    ratio, gy = cfg.get("ratio"), cfg.get("gy")
    if (ratio is None) == (gy is None):
        raise ConfigError("exactly one of --ratio / --gy is required")
    gy = ratio * gx if gy is None else gy
    return CouplingParams(gamma_x=float(gx), gamma_y=float(gy),
                          epsilon0=float(_get(cfg, "eps0", 1.0)))


def _outpath(cfg, default_base, suffix=".csv"):
    outdir = Path(cfg.get("outdir") or os.environ.get("LMGLAB_OUTDIR") or ".")
    outdir.mkdir(parents=True, exist_ok=True)
    prefix = cfg.get("prefix")
    base = f"{prefix}_{default_base}" if prefix else default_base
    return outdir / f"{base}{suffix}"


def _spectrum_rows(space, couplings, want_vectors=False):
    data = spectral.full_spectrum(space, couplings, want_vectors=want_vectors)
    for parity in (+1, -1):
        sec = data.sector(parity)
        for k, e in enumerate(sec.energies):
            yield {"gamma_x": couplings.gamma_x, "gamma_y": couplings.gamma_y,
                   "parity": parity, "k": k, "energy": float(e)}


_SPECTRUM_COLS = ["gamma_x", "gamma_y", "parity", "k", "energy"]


def cmd_spectrum(cfg, rec):
    space = SpinSpace(_get(cfg, "j", required=True))
    coup = _couplings(cfg)
    path = _outpath(cfg, "spectrum")
    meta = {"j": space.j, "gamma_x": coup.gamma_x, "gamma_y": coup.gamma_y,
            "epsilon0": coup.epsilon0}
    rec.table(path, _SPECTRUM_COLS, _spectrum_rows(space, coup, cfg.get("vectors", False)), meta)


def cmd_sweep(cfg, rec):
    space = SpinSpace(_get(cfg, "j", required=True))
    ratio = _get(cfg, "ratio", required=True)
    lo = _get(cfg, "gx_min", required=True)
    hi = _get(cfg, "gx_max", required=True)
    steps = int(_get(cfg, "gx_steps", 101))
    gxs = np.linspace(lo, hi, steps)
    rows = []
    for gx in gxs:
        coup = CouplingParams(gamma_x=float(gx), gamma_y=float(ratio * gx),
                              epsilon0=float(_get(cfg, "eps0", 1.0)))
        rows.extend(_spectrum_rows(space, coup))
    meta = {"j": space.j, "ratio": ratio, "gx_min": lo, "gx_max": hi, "gx_steps": steps}
    rec.table(_outpath(cfg, "sweep"), _SPECTRUM_COLS, rows, meta)


def cmd_crossings(cfg, rec):
    j = _get(cfg, "j", required=True)
    ratio = _get(cfg, "ratio", required=True)
    ns = _get(cfg, "n", required=True)
    sign = int(_get(cfg, "sign", -1))
    rows = []
    for n in np.atleast_1d(ns):
        pred = spectral.predict_crossing_coupling(j, ratio, int(n), sign=sign)
        rows.append({"n": pred.n, "kind": pred.kind, "product": pred.product,
                     "gamma_x": pred.gamma_x, "gamma_y": pred.gamma_y})
    meta = {"j": j, "ratio": ratio, "sign": sign}
    rec.table(_outpath(cfg, "crossings"), ["n", "kind", "product", "gamma_x", "gamma_y"],
              rows, meta)
    pairs = cfg.get("locate_pair")
    reals = cfg.get("locate_real")
    if pairs or reals:
        bracket = _get(cfg, "bracket", required=True)
        bracket = sorted(-abs(b) if sign < 0 else abs(b) for b in bracket)
        gap_rows = []
        for spec_str in pairs or []:
            try:
                parity_s, k_s = spec_str.split(":")
                parity = +1 if parity_s in ("+", "+1") else -1
                k = int(k_s)
            except ValueError as exc:
                raise ConfigError(f"bad --locate-pair {spec_str!r}; want PARITY:K") from exc
            recd = spectral.locate_minimum_gap(j, ratio, parity, k, bracket)
            gap_rows.append({"kind": "avoided-crossing", "parity": recd.parity,
                             "k": recd.k, "k_other": recd.k_other,
                             "gamma_at_min": recd.gamma_at_min, "gap_min": recd.gap_min,
                             "mean_energy": recd.mean_energy,
                             "interior_minimum": int(recd.interior_minimum)})
            if not recd.interior_minimum:
                rec.warn(f"pair {spec_str}: no interior gap minimum in {bracket}")
        for k in reals or []:
            recd = spectral.locate_parity_crossing(j, ratio, int(k), int(k), bracket)
            gap_rows.append({"kind": "real-crossing", "parity": recd.parity,
                             "k": recd.k, "k_other": recd.k_other,
                             "gamma_at_min": recd.gamma_at_min, "gap_min": recd.gap_min,
                             "mean_energy": recd.mean_energy,
                             "interior_minimum": int(recd.interior_minimum)})
        rec.table(_outpath(cfg, "located_gaps"),
                  ["kind", "parity", "k", "k_other", "gamma_at_min", "gap_min",
                   "mean_energy", "interior_minimum"], gap_rows, meta)


def cmd_dos(cfg, rec):
    space = SpinSpace(_get(cfg, "j", required=True))
    coup = _couplings(cfg)
    data = spectral.full_spectrum(space, coup, want_vectors=False)
    energies = data.all_energies()
    steps = int(_get(cfg, "e_steps", 400))
    egrid = np.linspace(energies[0], energies[-1], steps)
    rows = []
    n_div = 0
    for e in egrid:
        rho, divergent = classical.semiclassical_dos(e, space, coup)
        n_div += divergent
        rows.append({"E": float(e), "epsilon": float(e / (space.j * coup.epsilon0)),
                     "rho_sc": rho, "divergent": int(divergent)})
    if n_div:
        rec.warn(f"{n_div} grid energies hit a divergence cap")
    meta = {"j": space.j, "gamma_x": coup.gamma_x, "gamma_y": coup.gamma_y,
            "zero_point_shift": coup.zero_point_shift(space.j)}
    rec.table(_outpath(cfg, "dos"), ["E", "epsilon", "rho_sc", "divergent"], rows, meta)
    bins = int(_get(cfg, "bins", 40))
    hist, edges = np.histogram(energies, bins=bins)
    widths = np.diff(edges)
    hist_rows = [
        {"E_center": float(0.5 * (lo + hi)), "count": int(c), "density": float(c / w)}
        for lo, hi, c, w in zip(edges[:-1], edges[1:], hist, widths)
    ]
    rec.table(_outpath(cfg, "dos_hist"), ["E_center", "count", "density"], hist_rows, meta)


def cmd_classify(cfg, rec):
    coup = _couplings(cfg)
    label = classical.classify_sector(coup)
    fps = classical.find_fixed_points(coup)
    payload = {
        "gamma_x": coup.gamma_x, "gamma_y": coup.gamma_y,
        "sector": label.sector, "gamma_m": label.gamma_m, "gamma_M": label.gamma_M,
        "critical_energies": [
            {"kind": ce.kind, "epsilon": ce.epsilon} for ce in label.critical_energies
        ],
        "fixed_points": [
            {"q": fp.point.q, "p": fp.point.p, "epsilon": fp.epsilon,
             "kind": fp.kind, "is_pole": fp.is_pole}
            for fp in fps
        ],
    }
    rec.json_file(_outpath(cfg, "classify", suffix=".json"), payload)
    traj_arg = cfg.get("trajectories")
    if traj_arg:
        eps_list = [float(tok) for tok in str(traj_arg).split(",") if tok.strip()]
        meta_base = {"gamma_x": coup.gamma_x, "gamma_y": coup.gamma_y}
        for i, eps in enumerate(eps_list):
            rows = []
            for bid, branch in enumerate(classical.trajectory_branches(eps, coup)):
                for idx, (q, p) in enumerate(branch.qp):
                    rows.append({"branch_id": bid, "branch": branch.branch,
                                 "epsilon": eps, "idx": idx,
                                 "Q": float(q), "P": float(p)})
            if not rows:
                rec.warn(f"eps={eps}: outside the classical range, no orbit emitted")
                continue
            rec.table(_outpath(cfg, f"trajectory_{i}"),
                      ["branch_id", "branch", "epsilon", "idx", "Q", "P"],
                      rows, dict(meta_base, epsilon=eps))


def _write_trajectory(cfg, rec, name, coup, eps):
    rows = []
    for bid, branch in enumerate(classical.trajectory_branches(eps, coup)):
        for idx, (q, p) in enumerate(branch.qp):
            rows.append({"branch_id": bid, "branch": branch.branch, "epsilon": eps,
                         "idx": idx, "Q": float(q), "P": float(p)})
    meta = {"gamma_x": coup.gamma_x, "gamma_y": coup.gamma_y, "epsilon": eps}
    rec.table(_outpath(cfg, name), ["branch_id", "branch", "epsilon", "idx", "Q", "P"],
              rows, meta)


def cmd_husimi(cfg, rec):
    space = SpinSpace(_get(cfg, "j", required=True))
    grid = int(_get(cfg, "grid", 201))
    scenario_kind = cfg.get("scenario")
    if scenario_kind:
        ratio = _get(cfg, "ratio", 3.0)
        scen = dynamics.scenario_builder(scenario_kind, j=space.j, ratio=ratio)
        coup = scen.couplings
        t = float(_get(cfg, "time", 0.0))
        spectra = spectral.full_spectrum(space, coup)
        alpha0 = coherent_amplitudes(space, theta=scen.alpha0.theta, phi=scen.alpha0.phi)
        _, _, evo = dynamics.evolve_quantum(alpha0, spectra, np.array([0.0]))
        psi = evo.vectors(np.array([t]))[0]
        field = phase_space.husimi_state(space, psi, n_points=grid,
                                         state_tag=f"scenario {scenario_kind} t={t}")
        eps_ref = scen.epsilon
        meta = {"j": space.j, "gamma_x": coup.gamma_x, "gamma_y": coup.gamma_y,
                "scenario": scenario_kind, "time": t, "epsilon": eps_ref}
    else:
        coup = _couplings(cfg)
        parity = +1 if _get(cfg, "parity", required=True) == "+" else -1
        k = int(_get(cfg, "k", required=True))
        spectra = spectral.full_spectrum(space, coup)
        field = phase_space.husimi_eigenstate(spectra, parity, k, n_points=grid)
        e_k = float(spectra.sector(parity).energies[k])
        # orbit overlays sit at the zero-point-corrected classical energy
        eps_ref = (e_k - coup.zero_point_shift(space.j)) / (space.j * coup.epsilon0)
        meta = {"j": space.j, "gamma_x": coup.gamma_x, "gamma_y": coup.gamma_y,
                "parity": parity, "k": k, "energy": e_k, "epsilon": eps_ref}
    qq, pp = np.meshgrid(field.q_axis, field.p_axis)
    rows = (
        {"Q": float(q), "P": float(p), "value": float(v)}
        for q, p, v in zip(qq[field.mask], pp[field.mask], field.values[field.mask])
    )
    rec.table(_outpath(cfg, "husimi"), ["Q", "P", "value"], rows, meta)
    if cfg.get("with_trajectory"):
        _write_trajectory(cfg, rec, "trajectory", coup, eps_ref)


def cmd_wehrl(cfg, rec):
    space = SpinSpace(_get(cfg, "j", required=True))
    parity = +1 if _get(cfg, "parity", "+") == "+" else -1
    samples = int(_get(cfg, "samples", 200000))
    seed = int(_get(cfg, "seed", DEFAULT_SEED))
    convention = _get(cfg, "convention", "normalized")
    cols = ["gamma_x", "parity", "k", "energy_over_J", "wehrl", "stderr",
            "samples", "convention"]
    if cfg.get("gx_steps") is not None:
        ratio = _get(cfg, "ratio", required=True)
        ks = _get(cfg, "k", required=True)
        gxs = np.linspace(_get(cfg, "gx_min", required=True),
                          _get(cfg, "gx_max", required=True),
                          int(cfg["gx_steps"]))
        rows = phase_space.wehrl_vs_gamma(space, ratio, gxs, parity, ks,
                                          n_samples=samples, seed=seed,
                                          convention=convention)
        meta = {"j": space.j, "ratio": ratio, "mode": "gamma-scan"}
    else:
        coup = _couplings(cfg)
        ks = None if cfg.get("all_states") else _get(cfg, "k", required=True)
        rows = phase_space.wehrl_vs_energy(space, coup, parity, n_samples=samples,
                                           seed=seed, convention=convention,
                                           k_values=ks)
        meta = {"j": space.j, "gamma_x": coup.gamma_x, "gamma_y": coup.gamma_y,
                "mode": "energy-scan"}
    meta.update({"samples": samples, "seed": seed, "convention": convention})
    rec.table(_outpath(cfg, "wehrl"), cols, rows, meta)


def cmd_dynamics(cfg, rec):
    space = SpinSpace(_get(cfg, "j", required=True))
    seed = int(_get(cfg, "seed", DEFAULT_SEED))
    m_samples = int(_get(cfg, "m_samples", 5000))
    window = float(_get(cfg, "window", 10.0))
    dt = float(_get(cfg, "dt", 0.05))
    scenario_kind = cfg.get("scenario")
    if scenario_kind:
        ratio = _get(cfg, "ratio", 3.0)
        scen = dynamics.scenario_builder(scenario_kind, j=space.j, ratio=ratio)
        if cfg.get("t_max") is not None or cfg.get("dt") is not None:
            from dataclasses import replace

            scen = replace(scen, t_max=float(_get(cfg, "t_max", scen.t_max)), dt=dt)
    else:
        coup = _couplings(cfg)
        q0 = _get(cfg, "q0", required=True)
        p0 = _get(cfg, "p0", required=True)
        alpha0 = classical.PhasePoint(q=float(q0), p=float(p0))
        eps = classical.classical_energy(alpha0, coup)
        branches = classical.trajectory_branches(eps, coup)
        dists = [np.hypot(b.qp[:, 0] - alpha0.q, b.qp[:, 1] - alpha0.p).min()
                 for b in branches] or [0.0]
        home = int(np.argmin(dists)) if branches else 0
        scen = dynamics.Scenario(
            kind="custom", space=space, couplings=coup, alpha0=alpha0, epsilon=eps,
            orbit=branches[home] if branches else None,
            partner=None, t_max=float(_get(cfg, "t_max", 50.0)), dt=dt,
        )
    rtol = float(_get(cfg, "rtol", 1e-10))
    config = dynamics.TWAConfig(m_samples=m_samples, seed=seed, window=window,
                                rtol=rtol, atol=max(rtol * 1e-2, 1e-14))
    result, _, sample = dynamics.run_scenario(scen, config)
    if sample.clipped:
        rec.warn(f"{sample.clipped} Wigner samples clipped at the chart rim")
    rows = []
    averages = {name: result.rolling(name)
                for name in ("sp_quantum", "sp_classical", "jz_quantum", "jz_classical")}
    for i, t in enumerate(result.times):
        rows.append({
            "t": float(t),
            "sp_q": float(result.sp_quantum[i]),
            "sp_c": float(result.sp_classical[i]),
            "sp_c_err": float(result.sp_classical_err[i]),
            "jz_q": float(result.jz_quantum[i]),
            "jz_c": float(result.jz_classical[i]),
            "jz_c_err": float(result.jz_classical_err[i]),
            "sp_q_avg": float(averages["sp_quantum"][i]),
            "sp_c_avg": float(averages["sp_classical"][i]),
            "jz_q_avg": float(averages["jz_quantum"][i]),
            "jz_c_avg": float(averages["jz_classical"][i]),
        })
    meta = {"j": space.j, "gamma_x": scen.couplings.gamma_x,
            "gamma_y": scen.couplings.gamma_y, "scenario": scen.kind,
            "seed": seed, "m_samples": m_samples, "window": window, "dt": scen.dt}
    rec.table(_outpath(cfg, "dynamics"),
              ["t", "sp_q", "sp_c", "sp_c_err", "jz_q", "jz_c", "jz_c_err",
               "sp_q_avg", "sp_c_avg", "jz_q_avg", "jz_c_avg"], rows, meta)
    sidecar = {
        "kind": scen.kind, "j": space.j,
        "couplings": {"gamma_x": scen.couplings.gamma_x,
                      "gamma_y": scen.couplings.gamma_y,
                      "epsilon0": scen.couplings.epsilon0},
        "alpha0": {"q": scen.alpha0.q, "p": scen.alpha0.p,
                   "theta": float(scen.alpha0.theta), "phi": float(scen.alpha0.phi)},
        "epsilon": scen.epsilon, "seed": seed, "m_samples": m_samples,
        "window": window, "dt": scen.dt, "t_max": scen.t_max,
        "clipped_samples": sample.clipped,
    }
    rec.json_file(_outpath(cfg, "scenario", suffix=".json"), sidecar)


_COMMANDS = {
    "spectrum": cmd_spectrum,
    "sweep": cmd_sweep,
    "crossings": cmd_crossings,
    "dos": cmd_dos,
    "classify": cmd_classify,
    "husimi": cmd_husimi,
    "wehrl": cmd_wehrl,
    "dynamics": cmd_dynamics,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _merge_config(args)
        manifest_path = _outpath(cfg, args.command, suffix=".manifest.json")
        rec = RunRecorder(manifest_path, {k: v for k, v in cfg.items() if v is not None})
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        _COMMANDS[args.command](cfg, rec)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        rec.finalize(status="invalid-config")
        return 2
    except NumericalFailureError as exc:
        print(f"numerical failure in {exc.stage}: {exc}", file=sys.stderr)
        rec.finalize(status="numerical-failure", failing_stage=exc.stage)
        return 3
    except LmglabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        rec.finalize(status="invalid-config")
        return 2
    rec.finalize(status="ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
