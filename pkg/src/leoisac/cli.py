"""Command-line experiment drivers.

Subcommands: pathloss, optimize, minrate-sweep, beampattern, music, track.
Every run writes CSV outputs plus a YAML manifest (config hash, seeds,
per-stage timings, output list) into the output directory.  Exit codes:
0 success, 2 config error, 3 infeasible design, 4 iteration cap.
"""
from __future__ import annotations

import argparse
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from . import channel as ch
from .estimation import (
    AngleGrid,
    default_doppler_grid,
    estimate_aoa,
    matched_filter_joint,
)
from .geometry import AnglePair, steering_vector
from .precoder import STATUS_INFEASIBLE, STATUS_ITER_CAP, solve
from .rates import TRANSMISSION_MODES, beampatterns, power_allocation_ratios
from .scenario import ConfigError, ScenarioConfig, Scene, build_scene
from .waveform import generate_streams, receive_combine, synthesize_echo

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_ITER_CAP = 4


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".12e")
    return str(value)


def write_csv(path: Path, header: list[str], rows: list[tuple]) -> Path:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


class RunRecorder:
    """Collects timings and output files for the run manifest."""

    def __init__(self, command: str, cfg: ScenarioConfig, out_dir: Path, profile: str):
        self.command = command
        self.cfg = cfg
        self.out_dir = out_dir
        self.profile = profile
        self.timings: dict[str, float] = {}
        self.outputs: list[str] = []
        out_dir.mkdir(parents=True, exist_ok=True)

    def time_stage(self, name: str):
        recorder = self

        class _Stage:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                recorder.timings[name] = recorder.timings.get(name, 0.0) + (
                    time.perf_counter() - self.t0
                )

        return _Stage()

    def csv(self, name: str, header: list[str], rows: list[tuple]) -> Path:
        path = write_csv(self.out_dir / name, header, rows)
        self.outputs.append(name)
        return path

    def finish(self) -> None:
        manifest = {
            "command": self.command,
            "tool_version": __version__,
            "profile": self.profile,
            "config_sha256": self.cfg.sha256(),
            "seeds": self.cfg.data["seeds"],
            "timings_s": {k: round(v, 6) for k, v in self.timings.items()},
            "outputs": self.outputs,
        }
        with open(self.out_dir / "run_manifest.yaml", "w", encoding="utf-8") as fh:
            yaml.safe_dump(manifest, fh, sort_keys=True)


def _status_exit(status: str) -> int:
    if status == STATUS_INFEASIBLE:
        return EXIT_INFEASIBLE
    if status == STATUS_ITER_CAP:
        return EXIT_ITER_CAP
    return EXIT_OK


def cmd_pathloss(scene: Scene, rec: RunRecorder, args) -> int:
    if args.alt_min <= 0 or args.alt_max <= args.alt_min or args.steps < 2:
        print("pathloss: invalid altitude range", file=sys.stderr)
        return EXIT_CONFIG
    alts = np.linspace(args.alt_min, args.alt_max, args.steps) * 1e3
    d = scene.config.data
    xy = (scene.tar[0], scene.tar[1])
    with rec.time_stage("pathloss"):
        rows = []
        for structure in (ch.BISTATIC, ch.MONOSTATIC):
            curve = ch.echo_path_loss_curve(
                xy,
                alts,
                scene.sat,
                scene.rx,
                float(d["sat_gain_dbi"]),
                float(d["rx_gain_dbi"]),
                scene.f_c,
                float(d["rcs_mono_m2"]),
                structure,
            )
            rows.append([loss for _, loss in curve])
        table = [
            (float(alt) / 1e3, rows[0][i], rows[1][i]) for i, alt in enumerate(alts)
        ]
    rec.csv("pathloss.csv", ["altitude_km", "bistatic_loss_db", "monostatic_loss_db"], table)
    return EXIT_OK


def _optimize_scene(scene: Scene, p_t: float | None = None, mode=None):
    inputs = scene.design_inputs() if mode is None else _inputs_for_mode(scene, mode)
    return solve(inputs, scene.opt_config(p_t=p_t, mode=mode))


def _inputs_for_mode(scene: Scene, mode):
    from .precoder import DesignInputs

    return DesignInputs(
        a_users=scene.a_users,
        rhos=scene.rhos,
        a_tar=scene.a_tar,
        required_target_gain=0.0 if mode.comm_only else scene.required_target_gain(),
    )


def cmd_optimize(scene: Scene, rec: RunRecorder, args) -> int:
    with rec.time_stage("optimize"):
        result = _optimize_scene(scene)
    ratios = power_allocation_ratios(result.precoder) if result.status != STATUS_INFEASIBLE else None
    labels = [f"user{k+1}" for k in range(scene.num_users)] + ["common", "radar"]
    rec.csv(
        "optimize_summary.csv",
        ["status", "r_min_bps_hz", "outer_iterations", "subproblem_solves", "solve_seconds"],
        [
            (
                result.status,
                float(result.r_min) if np.isfinite(result.r_min) else float("nan"),
                result.outer_iterations,
                result.subproblem_solves,
                result.solve_seconds,
            )
        ],
    )
    if ratios is not None:
        rec.csv(
            "optimize_power.csv",
            ["stream", "power_ratio"],
            [(labels[i], float(r)) for i, r in enumerate(ratios)],
        )
    return _status_exit(result.status)


def _sweep_point(payload):
    cfg_dict, profile, mode_name, p_dbw = payload
    cfg = ScenarioConfig.from_dict(cfg_dict, profile=None)
    scene = build_scene(cfg, mode=TRANSMISSION_MODES[mode_name])
    result = _optimize_scene(scene, p_t=ch.db_to_linear(p_dbw), mode=TRANSMISSION_MODES[mode_name])
    r = float(result.r_min) if np.isfinite(result.r_min) else float("nan")
    return (mode_name, p_dbw, r, result.status, result.outer_iterations)


def cmd_minrate_sweep(scene: Scene, rec: RunRecorder, args) -> int:
    powers = [float(p) for p in args.power_list.split(",") if p]
    mode_names = [m.strip() for m in args.modes.split(",") if m.strip()]
    for name in mode_names:
        if name not in TRANSMISSION_MODES:
            print(f"minrate-sweep: unknown mode {name!r}", file=sys.stderr)
            return EXIT_CONFIG
    payloads = [
        (scene.config.data, rec.profile, name, p) for name in mode_names for p in powers
    ]
    with rec.time_stage("sweep"):
        if args.workers > 1:
            with ProcessPoolExecutor(max_workers=args.workers) as pool:
                rows = list(pool.map(_sweep_point, payloads))
        else:
            rows = [_sweep_point(p) for p in payloads]
    rec.csv(
        "minrate.csv",
        ["mode", "p_t_dbw", "r_min_bps_hz", "status", "outer_iterations"],
        rows,
    )
    worst = EXIT_OK
    for row in rows:
        worst = max(worst, _status_exit(row[3]))
    return worst


def cmd_beampattern(scene: Scene, rec: RunRecorder, args) -> int:
    with rec.time_stage("optimize"):
        result = _optimize_scene(scene)
    code = _status_exit(result.status)
    if code != EXIT_OK and result.status == STATUS_INFEASIBLE:
        return code
    # azimuth spans (-180, 180]: the -180 edge duplicates +180
    theta = np.deg2rad(np.arange(-180.0 + args.theta_step_deg, 180.0 + 1e-9, args.theta_step_deg))
    phi = np.deg2rad(np.arange(0.0, 90.0 + 1e-9, args.phi_step_deg))
    with rec.time_stage("beampattern"):
        fields = beampatterns(result.precoder, scene.tx_upa, theta, phi)
    rows = []
    for i, th in enumerate(theta):
        for j, ph in enumerate(phi):
            rows.append(
                (
                    float(np.rad2deg(th)),
                    float(np.rad2deg(ph)),
                    float(fields["radar"][i, j]),
                    float(fields["common"][i, j]),
                    float(fields["private"][i, j]),
                )
            )
    rec.csv(
        "beampattern.csv",
        ["theta_deg", "phi_deg", "p_radar", "p_common", "p_private"],
        rows,
    )
    labels = [f"user{k+1}" for k in range(scene.num_users)] + ["common", "radar"]
    ratios = power_allocation_ratios(result.precoder)
    rec.csv(
        "power_ratios.csv",
        ["stream", "power_ratio"],
        [(labels[i], float(r)) for i, r in enumerate(ratios)],
    )
    return code


def _synthesize(scene: Scene, result) -> tuple[np.ndarray, object, int, float]:
    frame = generate_streams(
        scene.num_users,
        scene.frame_length,
        int(scene.config.data["seeds"]["streams"]),
        scene.mode,
    )
    X = result.precoder.matrix @ frame.S
    tau = scene.true_delay_bin()
    doppler = scene.draw_doppler()
    echo = synthesize_echo(
        X,
        scene.link,
        scene.tx_upa,
        scene.rx_upa,
        tau,
        doppler,
        scene.t_s,
        scene.tau_max,
        scene.sigma_r2,
        int(scene.config.data["seeds"]["noise"]),
    )
    return X, echo, tau, doppler


def cmd_music(scene: Scene, rec: RunRecorder, args) -> int:
    with rec.time_stage("optimize"):
        result = _optimize_scene(scene)
    code = _status_exit(result.status)
    if code != EXIT_OK:
        return code
    with rec.time_stage("synthesize"):
        _, echo, _, _ = _synthesize(scene, result)
    if args.window_deg is not None:
        grid = AngleGrid.window(scene.target_aoa, args.window_deg, args.grid_step_deg)
    else:
        grid = AngleGrid.hemisphere(args.grid_step_deg)
    with rec.time_stage("music"):
        spectrum, peak = estimate_aoa(echo, scene.rx_upa, grid)
    rows = []
    for i, th in enumerate(grid.theta_axis):
        for j, ph in enumerate(grid.phi_axis):
            rows.append((float(np.rad2deg(th)), float(np.rad2deg(ph)), float(spectrum[i, j])))
    rec.csv("music_spectrum.csv", ["theta_deg", "phi_deg", "spectrum"], rows)
    rec.csv(
        "music_peak.csv",
        ["theta_deg", "phi_deg", "true_theta_deg", "true_phi_deg"],
        [
            (
                float(np.rad2deg(peak.theta)),
                float(np.rad2deg(peak.phi)),
                float(np.rad2deg(scene.target_aoa.theta)),
                float(np.rad2deg(scene.target_aoa.phi)),
            )
        ],
    )
    return EXIT_OK


def cmd_track(scene: Scene, rec: RunRecorder, args) -> int:
    with rec.time_stage("optimize"):
        result = _optimize_scene(scene)
    code = _status_exit(result.status)
    if code != EXIT_OK:
        return code
    with rec.time_stage("synthesize"):
        X, echo, tau_true, doppler_true = _synthesize(scene, result)
    if args.override_aoa is not None:
        th, ph = (float(x) for x in args.override_aoa.split(","))
        aoa_hat = AnglePair(np.deg2rad(th), np.deg2rad(ph))
    else:
        grid = AngleGrid.window(scene.target_aoa, args.music_window_deg, args.grid_step_deg)
        with rec.time_stage("music"):
            _, aoa_hat = estimate_aoa(echo, scene.rx_upa, grid)
    with rec.time_stage("matched_filter"):
        y = receive_combine(echo.Y, steering_vector(scene.rx_upa, aoa_hat))
        doppler_grid = default_doppler_grid(
            scene.frame_length, scene.t_s, *scene.config.data["doppler_range_hz"]
        )
        scores, report = matched_filter_joint(
            X,
            y,
            aoa_hat,
            scene.sat - scene.rx,
            scene.tx_upa,
            np.arange(1, scene.tau_max + 1),
            doppler_grid,
            scene.t_s,
            scene.range_window_start_m,
            scene.tau_max,
        )
    rows = []
    for i, tau in enumerate(range(1, scene.tau_max + 1)):
        for j, v in enumerate(doppler_grid):
            if np.isfinite(scores[i, j]):
                rows.append((tau, float(v), float(scores[i, j])))
    rec.csv("matched_filter.csv", ["tau_bin", "doppler_hz", "score"], rows)
    position = scene.rx + report.position
    rec.csv(
        "track_report.csv",
        [
            "failed",
            "peak_to_median",
            "tau_bin",
            "true_tau_bin",
            "doppler_hz",
            "true_doppler_hz",
            "aoa_theta_deg",
            "aoa_phi_deg",
            "aod_theta_deg",
            "aod_phi_deg",
            "x_km",
            "y_km",
            "z_km",
            "position_error_km",
        ],
        [
            (
                int(report.failed),
                float(report.peak_to_median),
                report.tau,
                tau_true,
                report.doppler_hz,
                doppler_true,
                float(np.rad2deg(report.aoa.theta)),
                float(np.rad2deg(report.aoa.phi)),
                float(np.rad2deg(report.aod.theta)),
                float(np.rad2deg(report.aod.phi)),
                float(position[0] / 1e3),
                float(position[1] / 1e3),
                float(position[2] / 1e3),
                float(np.linalg.norm(position - scene.tar) / 1e3),
            )
        ],
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leoisac", description="Bistatic satellite ISAC experiments"
    )
    parser.add_argument("--config", help="YAML scenario file (defaults built in)")
    parser.add_argument("--seed", type=int, help="override every scenario seed from this base")
    parser.add_argument("--out-dir", default="runs", help="output directory")
    parser.add_argument("--profile", choices=["desk", "paper"], default="desk")
    parser.add_argument("--workers", type=int, default=1)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pathloss", help="echo path loss vs target altitude")
    p.add_argument("--alt-min", type=float, default=1.0, help="km")
    p.add_argument("--alt-max", type=float, default=50.0, help="km")
    p.add_argument("--steps", type=int, default=50)

    sub.add_parser("optimize", help="design the precoder once")

    p = sub.add_parser("minrate-sweep", help="min-rate vs power per mode")
    p.add_argument("--power-list", default="10,15,20", help="dBW values, comma separated")
    p.add_argument("--modes", default="rsma-isac-sic,sdma-isac-sic")

    p = sub.add_parser("beampattern", help="transmit beampatterns of the design")
    p.add_argument("--theta-step-deg", type=float, default=2.0)
    p.add_argument("--phi-step-deg", type=float, default=1.0)

    p = sub.add_parser("music", help="arrival-angle spectrum of a simulated echo")
    p.add_argument("--grid-step-deg", type=float, default=0.5)
    p.add_argument("--window-deg", type=float, default=None, help="restrict around truth")

    p = sub.add_parser("track", help="full estimation chain on a simulated echo")
    p.add_argument("--grid-step-deg", type=float, default=0.5)
    p.add_argument("--music-window-deg", type=float, default=10.0)
    p.add_argument("--override-aoa", default=None, help="theta_deg,phi_deg instead of running the AOA stage")

    return parser


COMMANDS = {
    "pathloss": cmd_pathloss,
    "optimize": cmd_optimize,
    "minrate-sweep": cmd_minrate_sweep,
    "beampattern": cmd_beampattern,
    "music": cmd_music,
    "track": cmd_track,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config:
            cfg = ScenarioConfig.from_yaml(args.config, profile=args.profile)
        else:
            cfg = ScenarioConfig.from_dict({}, profile=args.profile)
        if args.seed is not None:
            data = dict(cfg.data)
            data["seeds"] = {
                name: args.seed + off
                for off, name in enumerate(["users", "streams", "channel", "noise", "doppler"])
            }
            cfg = ScenarioConfig.from_dict(data, profile=None)
        scene = build_scene(cfg)
    except (ConfigError, FileNotFoundError, yaml.YAMLError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rec = RunRecorder(args.command, cfg, Path(args.out_dir), args.profile)
    try:
        code = COMMANDS[args.command](scene, rec, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rec.finish()
    return code


if __name__ == "__main__":
    sys.exit(main())
