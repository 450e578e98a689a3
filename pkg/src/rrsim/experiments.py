"""The five batch experiments behind the command line.

Each experiment writes ``trajectory_*.csv``, ``report_<experiment>.json`` and
``plot_*.gp`` (gnuplot) into the configured output directory and returns an
:class:`ExperimentResult` whose ``exit_code`` follows the CLI convention:

* 0: the expected outcome (bounded where boundedness is expected, or a
  deliberate-instability run that diverged, marked "diverged as expected");
* 1: blowup or ball exit in a run expected to stay bounded;
* 3: a deliberate-instability run that stayed bounded.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from rrsim.analysis import DIVERGES, BLOWUP, decay_fit, stability_verdict, tau_sweep
from rrsim.config import ExperimentConfig
from rrsim.integrator import IntegratorConfig, Trajectory, integrate
from rrsim.scheduling import ConstantSchedule, PiecewiseSchedule, schedule_from_dict
from rrsim.systems import (build_linear_system, build_spacecraft_system, coupled_gain,
                           sample_omega_ball, spacecraft_initial_state)

EXIT_OK = 0
EXIT_UNBOUNDED = 1
EXIT_UNEXPECTEDLY_STABLE = 3
DIVERGED_AS_EXPECTED = "diverged as expected"

OMEGA = (4, 5, 6)
QV = (1, 2, 3)


@dataclass
class ExperimentResult:
    experiment: str
    exit_code: int
    status: str
    report: dict
    artifacts: list = field(default_factory=list)


class _Outputs:
    def __init__(self, directory: Path):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.paths: list[Path] = []

    def trajectory(self, name: str, traj: Trajectory) -> str:
        path = self.dir / f"trajectory_{name}.csv"
        traj.to_csv(path)
        self.paths.append(path)
        return path.name

    def report(self, name: str, report: dict) -> None:
        path = self.dir / f"report_{name}.json"
        path.write_text(json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")
        self.paths.append(path)

    def plot(self, name: str, csv_names: list[str], columns: list[int], title: str,
             logscale: bool = False) -> None:
        lines = [
            'set datafile separator ","',
            "set key autotitle columnhead",
            f'set title "{title}"',
            'set xlabel "t [s]"',
        ]
        if logscale:
            lines.append("set logscale y")
        series = [f'"{c}" using 1:{col} with lines' for c in csv_names for col in columns]
        lines.append("plot " + ", \\\n     ".join(series))
        path = self.dir / f"plot_{name}.gp"
        path.write_text("\n".join(lines) + "\n")
        self.paths.append(path)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def _integrator(cfg: ExperimentConfig, params, **defaults) -> IntegratorConfig:
    settings = {"step": params.step, "horizon": params.sim_horizon, **defaults, **cfg.integrator}
    return IntegratorConfig(**settings)


def _coupled(cfg: ExperimentConfig):
    params = cfg.system_params()
    gain = coupled_gain(params)
    system = build_linear_system(params, gain)
    schedule = (schedule_from_dict(cfg.schedule, system.m) if cfg.schedule is not None
                else ConstantSchedule(params.tau, system.m))
    return params, gain, system, schedule


def coupled_stability(cfg: ExperimentConfig) -> ExperimentResult:
    params, gain, system, schedule = _coupled(cfg)
    icfg = _integrator(cfg, params)
    a = cfg.analysis
    x0 = np.array(params.x0, dtype=float)
    epsilon = a.get("epsilon", 3.0 * float(np.linalg.norm(x0)))
    eta = a.get("eta", 1e-3 * float(np.linalg.norm(x0)))
    fit_window = tuple(a.get("fit_window", (5.0, icfg.horizon)))

    out = _Outputs(cfg.output_dir)
    nominal = integrate(system, x0, icfg)
    switched = integrate(system, x0, icfg, schedule)
    verdict = stability_verdict(switched, epsilon, eta, a.get("settle_fraction", 0.5))
    fit = decay_fit(switched, fit_window)
    files = [out.trajectory("nominal", nominal), out.trajectory("switched", switched)]
    out.plot("states", files[1:], list(range(2, 8)), "round-robin closed loop")
    out.plot("comparison", files, [2, 3], "nominal vs round-robin")
    ok = verdict.in_ball
    report = {
        "experiment": cfg.experiment,
        "gain": {"K": gain.K.tolist(), "hurwitz_margin": gain.hurwitz_margin},
        "schedule": schedule.to_dict(),
        "step": icfg.step,
        "verdict": verdict.to_dict(),
        "nominal_verdict": stability_verdict(nominal, epsilon, eta).to_dict(),
        "decay_fit": {"rate": fit.rate, "r2": fit.r2, "window": list(fit_window)},
        "status": "ok" if ok else "unbounded",
    }
    out.report(cfg.experiment, report)
    return ExperimentResult(cfg.experiment, EXIT_OK if ok else EXIT_UNBOUNDED, report["status"],
                            report, out.paths)


def growth_ratio(traj: Trajectory, component: int, window) -> float:
    """``|x_c(b)| / |x_c(a)|`` at the recorded samples nearest ``a`` and ``b``."""
    a, b = window
    ia = int(np.argmin(np.abs(traj.times - a)))
    ib = int(np.argmin(np.abs(traj.times - b)))
    va, vb = abs(traj.states[ia, component]), abs(traj.states[ib, component])
    return math.inf if va == 0.0 else vb / va


def no_amplification(cfg: ExperimentConfig) -> ExperimentResult:
    params, gain, system, schedule = _coupled(cfg)
    icfg = _integrator(cfg, params)
    a = cfg.analysis
    x0 = np.array(params.x0, dtype=float)
    window = tuple(a.get("growth_window", (10.0, icfg.horizon)))
    factor = a.get("growth_factor", 100.0)
    epsilon = a.get("epsilon", 3.0 * float(np.linalg.norm(x0)))

    out = _Outputs(cfg.output_dir)
    traj = integrate(system, x0, icfg, schedule, scaled=False)
    name = out.trajectory("unscaled", traj)
    out.plot("x5", [name], [6], "unscaled round-robin, x5", logscale=True)
    verdict = stability_verdict(traj, epsilon, a.get("eta", 0.0), components=[4])
    growth = None if traj.blowup else growth_ratio(traj, 4, window)
    diverged = traj.blowup or growth >= factor
    status = DIVERGED_AS_EXPECTED if diverged else "unexpectedly stable"
    report = {
        "experiment": cfg.experiment,
        "schedule": schedule.to_dict(),
        "scaled": False,
        "step": icfg.step,
        "verdict_x5": verdict.to_dict(),
        "growth_x5": {"window": list(window), "ratio": growth, "required": factor},
        "status": status,
    }
    out.report(cfg.experiment, report)
    return ExperimentResult(cfg.experiment, EXIT_OK if diverged else EXIT_UNEXPECTEDLY_STABLE,
                            status, report, out.paths)


def spacecraft_decreasing(cfg: ExperimentConfig) -> ExperimentResult:
    params = cfg.system_params()
    system = build_spacecraft_system(params)
    schedule = (schedule_from_dict(cfg.schedule, system.m) if cfg.schedule is not None
                else PiecewiseSchedule.geometric(0.1, 0.1, 5.0, 5, system.m))
    icfg = _integrator(cfg, params, steps_per_dwell=2)
    a = cfg.analysis
    x0 = spacecraft_initial_state(params)
    qv_tol, omega_tol = a.get("qv_tol", 1e-2), a.get("omega_tol", 1e-3)
    epsilon = a.get("epsilon", 10.0)

    out = _Outputs(cfg.output_dir)
    traj = integrate(system, x0, icfg, schedule)
    nominal = integrate(system, x0, IntegratorConfig(icfg.step, icfg.horizon, icfg.record_stride))
    files = [out.trajectory("switched", traj), out.trajectory("nominal", nominal)]
    out.plot("quaternion", files[:1], [2, 3, 4, 5], "error quaternion")
    out.plot("omega", files[:1], [6, 7, 8], "angular velocity")
    verdict = stability_verdict(traj, epsilon, a.get("eta", omega_tol), a.get("settle_fraction", 0.5))
    final = traj.final_state
    qv_final = float(np.linalg.norm(final[list(QV)]))
    w_final = float(np.linalg.norm(final[list(OMEGA)]))
    quat_dev = float(np.max(np.abs(np.linalg.norm(traj.states[:, :4] + [1, 0, 0, 0], axis=1) - 1.0)))
    ok = verdict.in_ball
    report = {
        "experiment": cfg.experiment,
        "schedule": schedule.to_dict(),
        "step": icfg.step,
        "steps_per_dwell": icfg.steps_per_dwell,
        "verdict": verdict.to_dict(),
        "final": {"qv_norm": qv_final, "omega_norm": w_final, "qv_tol": qv_tol, "omega_tol": omega_tol,
                  "converged": qv_final < qv_tol and w_final < omega_tol},
        "nominal_final": {"qv_norm": float(np.linalg.norm(nominal.final_state[list(QV)])),
                          "omega_norm": float(np.linalg.norm(nominal.final_state[list(OMEGA)]))},
        "quaternion_norm_max_deviation": quat_dev,
        "status": "ok" if ok else "unbounded",
    }
    out.report(cfg.experiment, report)
    return ExperimentResult(cfg.experiment, EXIT_OK if ok else EXIT_UNBOUNDED, report["status"],
                            report, out.paths)


def slow_switch_probe(cfg: ExperimentConfig) -> ExperimentResult:
    params = cfg.system_params()
    system = build_spacecraft_system(params)
    schedule = (schedule_from_dict(cfg.schedule, system.m) if cfg.schedule is not None
                else ConstantSchedule(18.0, system.m))
    icfg = _integrator(cfg, params)
    a = cfg.analysis
    radii = a.get("radii", [1e-1, 1e-3, 1e-5])
    epsilon = a.get("epsilon", 0.1)
    rng = np.random.default_rng(cfg.seed)

    out = _Outputs(cfg.output_dir)
    runs = []
    files = []
    for i, r in enumerate(radii):
        x0 = np.zeros(system.d)
        x0[list(OMEGA)] = sample_omega_ball(r, rng)
        traj = integrate(system, x0, icfg, schedule)
        verdict = stability_verdict(traj, epsilon, a.get("eta", 0.0), components=OMEGA)
        files.append(out.trajectory(f"radius{i + 1}", traj))
        runs.append({"radius": r, "omega0_offset": x0[list(OMEGA)].tolist(), "verdict": verdict.to_dict()})
    out.plot("omega", files, [6, 7, 8], "angular velocity offset from the reference spin")
    exited = [run["verdict"]["kind"] in (DIVERGES, BLOWUP) for run in runs]
    times = [run["verdict"]["time"] for run in runs]
    all_exit = all(exited)
    monotone = all_exit and all(b >= a for a, b in zip(times, times[1:]))
    status = DIVERGED_AS_EXPECTED if all_exit else "unexpectedly stable"
    report = {
        "experiment": cfg.experiment,
        "schedule": schedule.to_dict(),
        "seed": cfg.seed,
        "step": icfg.step,
        "ball": {"radius": epsilon, "components": list(OMEGA)},
        "runs": runs,
        "exit_times_non_decreasing": monotone,
        "status": status,
    }
    out.report(cfg.experiment, report)
    return ExperimentResult(cfg.experiment, EXIT_OK if all_exit else EXIT_UNEXPECTEDLY_STABLE,
                            status, report, out.paths)


def tau_sweep_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    params, _, system, _ = _coupled(cfg)
    a = cfg.analysis
    window = tuple(a.get("gap_window", (0.0, 5.0)))
    icfg = _integrator(cfg, params, horizon=window[1])
    taus = a.get("taus", [0.4, 0.2, 0.1, 0.05])
    x0 = np.array(params.x0, dtype=float)

    out = _Outputs(cfg.output_dir)
    report_obj = tau_sweep(system, x0, taus, icfg, window)
    csv_path = out.dir / "sweep_gaps.csv"
    csv_path.write_text("tau,gap\n" + "".join(f"{t:.17g},{g:.17g}\n"
                                                for t, g in zip(report_obj.taus, report_obj.gaps)))
    out.paths.append(csv_path)
    out.plot("gaps", [csv_path.name], [2], "sup-norm gap vs switching time")
    ok = all(math.isfinite(g) for g in report_obj.gaps)
    report = {"experiment": cfg.experiment, **report_obj.to_dict(),
              "non_increasing": report_obj.non_increasing(), "status": "ok" if ok else "unbounded"}
    out.report(cfg.experiment, report)
    return ExperimentResult(cfg.experiment, EXIT_OK if ok else EXIT_UNBOUNDED, report["status"],
                            report, out.paths)


RUNNERS = {
    "coupled-stability": coupled_stability,
    "no-amplification": no_amplification,
    "spacecraft-decreasing": spacecraft_decreasing,
    "slow-switch-probe": slow_switch_probe,
    "tau-sweep": tau_sweep_experiment,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    return RUNNERS[cfg.experiment](cfg)
