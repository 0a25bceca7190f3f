"""Command-line front end.

Subcommands: ``portrait``, ``pll-portrait``, ``cca``, ``cct-sweep``,
``scenario``, ``verify``, ``repro``. Every run writes its outputs plus a
``manifest.json`` carrying the fully-resolved parameter snapshot, so results
can be reproduced bit-exactly from the manifest alone.

Exit codes: 0 success, 1 configuration/validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import PRESET_NAMES, ResolvedConfig, load_config, load_preset, preset_path, resolved_snapshot
from .eap import cct_sweep, margin_report
from .numerics import BracketError, NumericalBlowUp
from .params import ConfigError, pq_gains_from_bandwidth
from .pcl import AlgebraicLoopError, classify_basin, grid_initials
from .pll import equilibrium_angles, pll_portrait, swing_coeffs
from .reporting import (ManifestTimer, write_pll_portrait_csv, write_portrait_csv,
                        write_sweep_csv, write_trajectory_csv)
from .scenario import classify_sync, compare_q_control, run_scenario


def _load(args) -> tuple[ResolvedConfig, str]:
    if getattr(args, "config", None):
        return load_config(args.config), str(args.config)
    path = preset_path("paper_default")
    return load_config(path), str(path)


def _with_dt(cfg: ResolvedConfig, args) -> ResolvedConfig:
    if getattr(args, "dt", None):
        return replace(cfg, scenario=replace(cfg.scenario, dt=args.dt))
    return cfg


def cmd_portrait(args) -> int:
    cfg, cfg_path = _load(args)
    out = Path(args.out)
    mt = ManifestTimer(out, "portrait", cfg_path, resolved_snapshot(cfg))
    por = cfg.portrait
    pts = grid_initials(por.x_min, por.x_max, por.n)
    basin = classify_basin(pts, cfg.params, horizon=por.horizon, dt=por.dt,
                           record_every=25 if args.trajectories else None)
    out.mkdir(parents=True, exist_ok=True)
    with open(mt.add(out / "portrait.csv"), "w") as f:
        write_portrait_csv(basin, f)
    if args.trajectories and basin.trajectories is not None:
        tdir = out / "trajectories"
        tdir.mkdir(exist_ok=True)
        for k in range(basin.trajectories.shape[1]):
            path = tdir / f"traj_{k:05d}.csv"
            with open(path, "w") as f:
                f.write("x_d,x_q\n")
                for row in basin.trajectories[:, k, :]:
                    f.write(f"{row[0]!r},{row[1]!r}\n")
        mt.add(tdir)
    mt.finish()
    counts = {c.value: basin.classes.count(c) for c in set(basin.classes)}
    print(f"portrait: {len(pts)} points -> {counts}")
    return 0


def cmd_pll_portrait(args) -> int:
    cfg, cfg_path = _load(args)
    p = cfg.params
    coeffs = swing_coeffs(p.base, p.grid, p.ctrl, p.op)
    delta_a = equilibrium_angles(coeffs)[0]
    out = Path(args.out)
    mt = ManifestTimer(out, "pll-portrait", cfg_path, resolved_snapshot(cfg))
    d_omegas = np.linspace(-args.domega_max, args.domega_max, args.n)
    deltas = np.linspace(delta_a - 2 * math.pi, delta_a + 2 * math.pi, args.n)
    portrait = pll_portrait(coeffs, d_omegas, deltas,
                            constant_damping=args.damping == "constant",
                            horizon=args.horizon)
    out.mkdir(parents=True, exist_ok=True)
    with open(mt.add(out / "pll_portrait.csv"), "w") as f:
        write_pll_portrait_csv(portrait, f)
    mt.finish()
    counts = {c.value: portrait.classes.count(c) for c in set(portrait.classes)}
    print(f"pll-portrait ({args.damping} damping): {counts}")
    return 0


def cmd_cca(args) -> int:
    cfg, cfg_path = _load(args)
    rep = margin_report(cfg.params, cfg.fault.k_f_mag, cfg.fault.phi_f,
                        with_oracle=args.oracle, dt=cfg.scenario.dt)
    text = json.dumps(rep.to_dict(), indent=2)
    print(text)
    if args.out:
        out = Path(args.out)
        mt = ManifestTimer(out, "cca", cfg_path, resolved_snapshot(cfg))
        out.mkdir(parents=True, exist_ok=True)
        mt.add(out / "margin.json").write_text(text + "\n")
        mt.finish()
    return 0


def cmd_cct_sweep(args) -> int:
    cfg, cfg_path = _load(args)
    bws = list(args.bandwidths or cfg.sweep.bandwidths_hz or (5, 10, 15, 20, 25))
    dips = list(args.dips or cfg.sweep.k_f or (0.0, 0.05, 0.1, 0.15))
    out = Path(args.out)
    mt = ManifestTimer(out, "cct-sweep", cfg_path, resolved_snapshot(cfg))
    cells = cct_sweep(cfg.params, [float(b) for b in bws], [float(d) for d in dips],
                      phi_f=cfg.fault.phi_f, with_oracle=args.oracle,
                      dt=cfg.scenario.dt)
    out.mkdir(parents=True, exist_ok=True)
    with open(mt.add(out / "cct_sweep.csv"), "w") as f:
        write_sweep_csv(cells, f)
    summary = {
        "bandwidths_hz": [float(b) for b in bws],
        "k_f": [float(d) for d in dips],
        "cells": [{"bandwidth_hz": c.bandwidth_hz, "k_f": c.k_f,
                   "t_cct_est": None if not math.isfinite(c.t_cct_est) else c.t_cct_est,
                   "t_cct_oracle": c.t_cct_oracle, "verdict": c.verdict}
                  for c in cells],
    }
    mt.add(out / "cct_sweep.json").write_text(json.dumps(summary, indent=2) + "\n")
    mt.finish()
    print(f"cct-sweep: {len(cells)} cells -> {out / 'cct_sweep.csv'}")
    return 0


def cmd_scenario(args) -> int:
    cfg, cfg_path = _load(args)
    cfg = _with_dt(cfg, args)
    out = Path(args.out)
    mt = ManifestTimer(out, "scenario", cfg_path, resolved_snapshot(cfg))
    traj = run_scenario(cfg.scenario)
    verdict = classify_sync(traj)
    out.mkdir(parents=True, exist_ok=True)
    with open(mt.add(out / "trajectory.csv"), "w") as f:
        write_trajectory_csv(traj, f)
    mt.add(out / "verdict.json").write_text(
        json.dumps(verdict.to_dict(), indent=2) + "\n")
    mt.finish()
    print(f"scenario: {verdict.classification.value} "
          f"(slips={verdict.slips}, peak_freq={verdict.peak_freq_pu:.4f} pu)")
    return 0


def cmd_verify(args) -> int:
    from .acceptance import run_all
    results = run_all(echo=print)
    n_pass = sum(r.passed for r in results)
    print(f"{n_pass}/{len(results)} acceptance criteria passed")
    return 0 if n_pass == len(results) else 1


def _repro_scenario(cfg: ResolvedConfig, out: Path, mt: ManifestTimer,
                    label: str, t_clear: float | None = None) -> str:
    scn = cfg.scenario
    if t_clear is not None:
        scn = replace(scn, fault=replace(scn.fault, t_clear=t_clear),
                      t_end=t_clear + 2.0)
    traj = run_scenario(scn)
    verdict = classify_sync(traj)
    with open(mt.add(out / f"trajectory_{label}.csv"), "w") as f:
        write_trajectory_csv(traj, f)
    return verdict.classification.value


def cmd_repro(args) -> int:
    name = args.figure
    cfg = load_preset(name)
    out = Path(args.out) / name
    out.mkdir(parents=True, exist_ok=True)
    mt = ManifestTimer(out, f"repro {name}", str(preset_path(name)),
                       resolved_snapshot(cfg))

    if name == "paper_default":
        rep = margin_report(cfg.params, cfg.fault.k_f_mag, cfg.fault.phi_f,
                            with_oracle=True)
        mt.add(out / "margin.json").write_text(
            json.dumps(rep.to_dict(), indent=2) + "\n")
        print(f"t_cct_estimate = {rep.t_cct_estimate:.4f} s, "
              f"oracle = {rep.t_cct_oracle:.4f} s")
    elif name == "fig2a":
        por = cfg.portrait
        pts = grid_initials(por.x_min, por.x_max, por.n)
        for kp, label in ((0.1, "kp01"), (0.2, "kp02")):
            params = replace(cfg.params, ctrl=replace(cfg.params.ctrl, pq_kp=kp))
            basin = classify_basin(pts, params, horizon=por.horizon, dt=por.dt)
            with open(mt.add(out / f"portrait_{label}.csv"), "w") as f:
                write_portrait_csv(basin, f)
            print(f"portrait kp={kp}: "
                  f"{sum(c.value == 'CONVERGED_TO_TARGET' for c in basin.classes)}"
                  f"/{len(pts)} to target")
    elif name == "fig2c":
        for i_max, label in ((cfg.scenario.limiter.i_max, "limit_small"), (2.5, "limit_large")):
            scn = replace(cfg.scenario, limiter=replace(cfg.scenario.limiter, i_max=i_max))
            traj = run_scenario(scn)
            with open(mt.add(out / f"trajectory_{label}.csv"), "w") as f:
                write_trajectory_csv(traj, f)
            q_end = traj.q[-1]
            print(f"i_max={i_max}: final q error {abs(q_end - cfg.params.op.q_ref):.4f}, "
                  f"limiter active at end: {bool(traj.limiter_active[-1])}")
    elif name == "fig3":
        p = cfg.params
        coeffs = swing_coeffs(p.base, p.grid, p.ctrl, p.op)
        delta_a = equilibrium_angles(coeffs)[0]
        d_omegas = np.linspace(-0.25, 0.25, 21)
        deltas = np.linspace(delta_a - 2 * math.pi, delta_a + 2 * math.pi, 21)
        for mode, label in ((True, "constant"), (False, "angle_dependent")):
            portrait = pll_portrait(coeffs, d_omegas, deltas, constant_damping=mode)
            with open(mt.add(out / f"pll_portrait_{label}.csv"), "w") as f:
                write_pll_portrait_csv(portrait, f)
        verdict = _repro_scenario(cfg, out, mt, "fault500ms")
        print(f"500 ms fault -> {verdict}")
    elif name == "fig4b":
        print(f"100 ms fault -> {_repro_scenario(cfg, out, mt, 'fault100ms')}")
    elif name == "fig6a":
        cells = cct_sweep(cfg.params, list(cfg.sweep.bandwidths_hz),
                          list(cfg.sweep.k_f), with_oracle=args.oracle)
        with open(mt.add(out / "cct_sweep.csv"), "w") as f:
            write_sweep_csv(cells, f)
        print(f"cct sweep: {len(cells)} cells -> {out / 'cct_sweep.csv'}")
    elif name == "fig6b":
        v100 = _repro_scenario(cfg, out, mt, "fault100ms", t_clear=2.1)
        v300 = _repro_scenario(cfg, out, mt, "fault300ms", t_clear=2.3)
        rep = margin_report(cfg.params, cfg.fault.k_f_mag, with_oracle=args.oracle)
        mt.add(out / "margin.json").write_text(
            json.dumps(rep.to_dict(), indent=2) + "\n")
        print(f"100 ms fault -> {v100}")
        print(f"300 ms fault -> {v300}")
        print(f"t_cct_estimate = {rep.t_cct_estimate:.4f} s")
    elif name == "fig8a":
        rep = compare_q_control(cfg.scenario)
        payload = {"max_freq_diff": rep.max_freq_diff,
                   "max_delta_diff": rep.max_delta_diff,
                   "peak_freq_dev": rep.peak_freq_dev,
                   "freq_diff_ratio": rep.freq_diff_ratio}
        mt.add(out / "q_control_delta.json").write_text(
            json.dumps(payload, indent=2) + "\n")
        print(f"q-control trace difference: {100 * rep.freq_diff_ratio:.2f}% of peak")
    elif name == "fig8b":
        peaks = {}
        for bw in cfg.sweep.pq_bandwidths_hz:
            kp, ki = pq_gains_from_bandwidth(bw)
            params = replace(cfg.params, ctrl=replace(cfg.params.ctrl, pq_kp=kp,
                                                      pq_ki=ki, pq_bandwidth_hz=bw))
            scn = replace(cfg.scenario, params=params)
            traj = run_scenario(scn)
            with open(mt.add(out / f"trajectory_pq{bw:g}hz.csv"), "w") as f:
                write_trajectory_csv(traj, f)
            peaks[bw] = float(np.max(np.abs(traj.d_omega)))
        mt.add(out / "peaks.json").write_text(json.dumps(peaks, indent=2) + "\n")
        for bw, pk in peaks.items():
            print(f"pq bandwidth {bw:g} Hz: peak |d_omega| = {pk:.5f} pu")
    mt.finish()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vscstab",
        description="Transient frequency-stability margins of a grid-synchronized converter",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, out_default):
        p.add_argument("--config", help="JSON configuration (default: bundled paper_default)")
        p.add_argument("--out", default=out_default, help="output directory")

    p = sub.add_parser("portrait", help="basin map of the power-loop dynamics")
    common(p, "out/portrait")
    p.add_argument("--trajectories", action="store_true",
                   help="also write per-initial-point trajectory CSVs")
    p.set_defaults(func=cmd_portrait)

    p = sub.add_parser("pll-portrait", help="portrait of the synchronization swing dynamics")
    common(p, "out/pll_portrait")
    p.add_argument("--damping", choices=("angle", "constant"), default="angle")
    p.add_argument("--n", type=int, default=21)
    p.add_argument("--domega-max", type=float, default=0.25)
    p.add_argument("--horizon", type=float, default=5.0)
    p.set_defaults(func=cmd_pll_portrait)

    p = sub.add_parser("cca", help="critical clearing angle/time margin report")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--oracle", action="store_true",
                   help="add the clearing-time bisection oracle")
    p.set_defaults(func=cmd_cca)

    p = sub.add_parser("cct-sweep", help="clearing-time table over bandwidth x dip depth")
    common(p, "out/cct_sweep")
    p.add_argument("--bandwidths", type=float, nargs="*")
    p.add_argument("--dips", type=float, nargs="*")
    p.add_argument("--oracle", action="store_true")
    p.set_defaults(func=cmd_cct_sweep)

    p = sub.add_parser("scenario", help="time-domain fault scenario run")
    common(p, "out/scenario")
    p.add_argument("--dt", type=float)
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("verify", help="run the acceptance criteria and print a table")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("repro", help="run a bundled study preset")
    p.add_argument("figure", choices=PRESET_NAMES)
    p.add_argument("--out", default="out")
    p.add_argument("--oracle", action="store_true")
    p.set_defaults(func=cmd_repro)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericalBlowUp, AlgebraicLoopError, BracketError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
