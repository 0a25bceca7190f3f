"""CSV/JSON emission with fixed column orders, plus run manifests.

Column orders are part of the tool contract (documented in the README) and
writers always use "\\n" line endings so repeated runs produce byte-identical
files.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable

from . import __version__
from .eap import SweepCell
from .pcl import BasinMap
from .pll import PllPortrait
from .scenario import Trajectory

PORTRAIT_COLUMNS = ["initial_x", "initial_y", "class", "final_x", "final_y"]
PLL_PORTRAIT_COLUMNS = ["d_omega0", "delta0", "class", "slips"]
SWEEP_COLUMNS = ["bandwidth_hz", "k_f", "delta_a", "delta_cca", "s_accel",
                 "t_cct_est", "t_cct_oracle", "verdict"]
TRAJECTORY_COLUMNS = ["t", "delta", "d_omega", "i_cd_ref", "i_cq_ref",
                      "p", "q", "u_pcc", "limiter_active"]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        if math.isinf(x):
            return "inf"
        return repr(x)
    return str(x)


def _writer(f: IO[str]) -> csv.writer:
    return csv.writer(f, lineterminator="\n")


def write_portrait_csv(basin: BasinMap, f: IO[str]) -> None:
    w = _writer(f)
    w.writerow(PORTRAIT_COLUMNS)
    for (x0, y0), cls, (xf, yf) in zip(basin.initials, basin.classes, basin.finals):
        w.writerow([_fmt(float(x0)), _fmt(float(y0)), cls.value,
                    _fmt(float(xf)), _fmt(float(yf))])


def write_pll_portrait_csv(portrait: PllPortrait, f: IO[str]) -> None:
    w = _writer(f)
    w.writerow(PLL_PORTRAIT_COLUMNS)
    for dw0, dl0, cls, slips in zip(portrait.d_omega0, portrait.delta0,
                                    portrait.classes, portrait.slips):
        w.writerow([_fmt(float(dw0)), _fmt(float(dl0)), cls.value, int(slips)])


def write_sweep_csv(cells: Iterable[SweepCell], f: IO[str]) -> None:
    w = _writer(f)
    w.writerow(SWEEP_COLUMNS)
    for c in cells:
        w.writerow([_fmt(c.bandwidth_hz), _fmt(c.k_f), _fmt(c.delta_a),
                    _fmt(c.delta_cca), _fmt(c.s_accel), _fmt(c.t_cct_est),
                    _fmt(c.t_cct_oracle), c.verdict])


def write_trajectory_csv(traj: Trajectory, f: IO[str]) -> None:
    w = _writer(f)
    w.writerow(TRAJECTORY_COLUMNS)
    for i in range(len(traj.t)):
        w.writerow([_fmt(float(traj.t[i])), _fmt(float(traj.delta[i])),
                    _fmt(float(traj.d_omega[i])), _fmt(float(traj.i_cd_ref[i])),
                    _fmt(float(traj.i_cq_ref[i])), _fmt(float(traj.p[i])),
                    _fmt(float(traj.q[i])), _fmt(float(traj.u_pcc[i])),
                    int(traj.limiter_active[i])])


def trajectory_csv_bytes(traj: Trajectory) -> bytes:
    import io
    buf = io.StringIO()
    write_trajectory_csv(traj, buf)
    return buf.getvalue().encode()


@dataclass
class RunManifest:
    """Everything needed to reproduce a run bit-exactly."""

    subcommand: str
    config_path: str | None
    params_snapshot: dict
    outputs: list[str] = field(default_factory=list)
    tool_version: str = __version__
    duration_s: float = 0.0

    def to_dict(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "config_path": self.config_path,
            "params_snapshot": self.params_snapshot,
            "outputs": self.outputs,
            "tool_version": self.tool_version,
            "duration_s": self.duration_s,
        }


class ManifestTimer:
    """Context helper: collects outputs, times the run, writes manifest.json."""

    def __init__(self, out_dir: Path, subcommand: str, config_path: str | None,
                 snapshot: dict):
        self.out_dir = Path(out_dir)
        self.manifest = RunManifest(subcommand=subcommand, config_path=config_path,
                                    params_snapshot=snapshot)
        self._t0 = time.perf_counter()

    def add(self, path: Path) -> Path:
        self.manifest.outputs.append(str(path))
        return path

    def finish(self) -> Path:
        self.manifest.duration_s = time.perf_counter() - self._t0
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / "manifest.json"
        path.write_text(json.dumps(self.manifest.to_dict(), indent=2) + "\n")
        return path
