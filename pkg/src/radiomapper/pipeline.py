"""Configuration, file formats, and stage orchestration.

The pipeline runs simulate -> infer-regions -> infer-locations ->
build-map -> localize -> evaluate. Every stage reads its inputs from the
artifact directory and writes its outputs there, so running stages
individually in order is byte-identical to a full run. Floats are emitted
at fixed precision (RSS 2 dp, coordinates 3 dp) for golden-file stability.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .coarse import CoarseConfig, em_region_inference
from .environment import Environment, build_rp_grid, load_environment, save_environment
from .fine import FineConfig, GaConfig, alternate_location_inference
from .metrics import (
    EvalReport,
    clustering_metrics,
    localization_report,
    rss_error_metrics,
    save_cdf,
    topo_acc,
)
from .mobility import MobilityConfig, segments_from_labels
from .propagation import load_propagation, save_propagation
from .radiomap import build_radio_map, knn_localize, load_radio_map, save_radio_map
from .worlds import (
    corridor_environment,
    sample_holdout_queries,
    sample_propagation,
    simulate_world,
)

STAGES = ["simulate", "infer-regions", "infer-locations", "build-map", "localize", "evaluate"]


class PipelineError(RuntimeError):
    """Raised when a stage cannot run; the message names the problem."""


@dataclass
class SimulateConfig:
    shadowing_db: float = 2.0
    alpha_range: tuple[float, float] = (-28.0, -18.0)
    beta_range: tuple[float, float] = (-34.0, -26.0)
    holdout_points: int = 200


@dataclass
class PipelineConfig:
    environment: str
    output_dir: str = "out"
    seed_simulate: int = 1
    seed_coarse: int = 2
    seed_fine: int = 3
    users: int = 4
    knn_k: int = 5
    world_rooms: int = 9  # used by make-env only
    mobility: MobilityConfig = field(default_factory=lambda: MobilityConfig(mean_residence={}))
    slots_per_region: float = 220.0
    simulate: SimulateConfig = field(default_factory=SimulateConfig)
    coarse: CoarseConfig = field(default_factory=CoarseConfig)
    fine: FineConfig = field(default_factory=FineConfig)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["simulate"]["alpha_range"] = list(doc["simulate"]["alpha_range"])
        doc["simulate"]["beta_range"] = list(doc["simulate"]["beta_range"])
        return doc

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def load_config(path) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise PipelineError(f"config not found: {path}")
    with open(path) as fh:
        doc = json.load(fh)
    return config_from_dict(doc)


def config_from_dict(doc: dict) -> PipelineConfig:
    seeds = doc.get("seeds", {})
    mob_doc = dict(doc.get("mobility", {}))
    slots = float(mob_doc.pop("slots_per_region", doc.get("slots_per_region", 220.0)))
    residence = {int(k): float(v) for k, v in mob_doc.pop("mean_residence", {}).items()}
    mobility = MobilityConfig(mean_residence=residence, **mob_doc)
    sim_doc = dict(doc.get("simulate", {}))
    if "alpha_range" in sim_doc:
        sim_doc["alpha_range"] = tuple(sim_doc["alpha_range"])
    if "beta_range" in sim_doc:
        sim_doc["beta_range"] = tuple(sim_doc["beta_range"])
    fine_doc = dict(doc.get("fine", {}))
    ga = GaConfig(**fine_doc.pop("ga", {}))
    return PipelineConfig(
        environment=doc["environment"],
        output_dir=doc.get("output_dir", "out"),
        seed_simulate=int(seeds.get("simulate", 1)),
        seed_coarse=int(seeds.get("coarse", 2)),
        seed_fine=int(seeds.get("fine", 3)),
        users=int(doc.get("users", 4)),
        knn_k=int(doc.get("knn_k", 5)),
        world_rooms=int(doc.get("world_rooms", 9)),
        mobility=mobility,
        slots_per_region=slots,
        simulate=SimulateConfig(**sim_doc),
        coarse=CoarseConfig(**doc.get("coarse", {})),
        fine=FineConfig(ga=ga, **fine_doc),
    )


def _require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise PipelineError(f"missing artifact {path.name}; run stage '{producer}' first")
    return path


def _load_env(config: PipelineConfig) -> Environment:
    path = Path(config.environment)
    if not path.exists():
        raise PipelineError(f"environment not found: {path}")
    return load_environment(path)


def _mobility_with_residence(config: PipelineConfig, env: Environment) -> MobilityConfig:
    mob = config.mobility
    residence = mob.mean_residence or {r.id: config.slots_per_region for r in env.regions}
    return MobilityConfig(
        mean_speed=mob.mean_speed,
        speed_std=mob.speed_std,
        max_speed=mob.max_speed,
        slot_interval=mob.slot_interval,
        mean_residence=residence,
        skip_prob=mob.skip_prob,
    )


# ---------------------------------------------------------------------------
# CSV artifact formats
# ---------------------------------------------------------------------------


def _write_rss_csv(path, observations: np.ndarray) -> None:
    D = observations.shape[1]
    with open(path, "w") as fh:
        fh.write("t," + ",".join(f"ap_{q}" for q in range(1, D + 1)) + "\n")
        for t, row in enumerate(observations):
            fh.write(f"{t}," + ",".join(f"{v:.2f}" for v in row) + "\n")


def _read_rss_csv(path) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 1:]


def _write_truth_csv(path, points: np.ndarray, labels: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.write("t,x,y,region\n")
        for t in range(points.shape[0]):
            fh.write(f"{t},{points[t, 0]:.3f},{points[t, 1]:.3f},{int(labels[t])}\n")


def _read_truth_csv(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 1:3], data[:, 3].astype(int)


def _write_labels_csv(path, labels_by_user: list[np.ndarray]) -> None:
    with open(path, "w") as fh:
        fh.write("user,t,label\n")
        for m, labels in enumerate(labels_by_user, start=1):
            for t, lab in enumerate(labels):
                fh.write(f"{m},{t},{int(lab)}\n")


def _read_labels_csv(path, n_users: int) -> list[np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2).astype(int)
    return [data[data[:, 0] == m][:, 2] for m in range(1, n_users + 1)]


def _write_trajectories_csv(path, trajectories: list[np.ndarray]) -> None:
    with open(path, "w") as fh:
        fh.write("user,t,x,y\n")
        for m, pts in enumerate(trajectories, start=1):
            for t in range(pts.shape[0]):
                fh.write(f"{m},{t},{pts[t, 0]:.3f},{pts[t, 1]:.3f}\n")


def _read_trajectories_csv(path, n_users: int) -> list[np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return [data[data[:, 0].astype(int) == m][:, 2:4] for m in range(1, n_users + 1)]


def _write_holdout_csv(path, positions, labels, rss) -> None:
    D = rss.shape[1]
    with open(path, "w") as fh:
        fh.write("x,y,region," + ",".join(f"ap_{q}" for q in range(1, D + 1)) + "\n")
        for i in range(positions.shape[0]):
            fh.write(
                f"{positions[i, 0]:.3f},{positions[i, 1]:.3f},{int(labels[i])},"
                + ",".join(f"{v:.2f}" for v in rss[i])
                + "\n"
            )


def _read_holdout_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0:2], data[:, 2].astype(int), data[:, 3:]


def _write_trace_csv(path, trace: list[float]) -> None:
    with open(path, "w") as fh:
        fh.write("iteration,objective\n")
        for i, value in enumerate(trace):
            fh.write(f"{i},{value:.6f}\n")


def _rss_paths(out: Path, users: int) -> list[Path]:
    return [out / f"rss_user{m}.csv" for m in range(1, users + 1)]


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


def stage_simulate(config: PipelineConfig) -> None:
    env = _load_env(config)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    mobility = _mobility_with_residence(config, env)
    prop = sample_propagation(
        env,
        np.random.default_rng([config.seed_simulate, 100]),
        shadowing_db=config.simulate.shadowing_db,
        alpha_range=config.simulate.alpha_range,
        beta_range=config.simulate.beta_range,
    )
    world = simulate_world(env, mobility, prop, config.users, config.seed_simulate)
    for m, (traj, seq) in enumerate(zip(world.trajectories, world.sequences), start=1):
        _write_rss_csv(out / f"rss_user{m}.csv", seq.observations)
        _write_truth_csv(out / f"truth_user{m}.csv", traj.points, traj.labels)
    save_propagation(prop, out / "true_propagation.json")
    positions, labels, rss = sample_holdout_queries(
        env, prop, config.simulate.holdout_points, np.random.default_rng([config.seed_simulate, 200])
    )
    _write_holdout_csv(out / "holdout.csv", positions, labels, rss)


def stage_infer_regions(config: PipelineConfig) -> None:
    env = _load_env(config)
    out = Path(config.output_dir)
    sequences = [_read_rss_csv(_require(p, "simulate")) for p in _rss_paths(out, config.users)]
    result = em_region_inference(sequences, env, config.coarse, config.seed_coarse)
    _write_labels_csv(out / "region_labels.csv", result.labels)
    with open(out / "coarse_model.json", "w") as fh:
        json.dump(result.model.to_dict(), fh)
        fh.write("\n")
    _write_trace_csv(out / "em_trace.csv", result.objective_trace)

    truth_paths = [out / f"truth_user{m}.csv" for m in range(1, config.users + 1)]
    if all(p.exists() for p in truth_paths):
        truths = [_read_truth_csv(p) for p in truth_paths]
        pred = np.concatenate(result.labels)
        true_lab = np.concatenate([t[1] for t in truths])
        rep = clustering_metrics(pred, true_lab)
        true_orders = [segments_from_labels(t[1])[0] for t in truths]
        doc = asdict(rep)
        doc["topo_acc"] = topo_acc(result.visit_orders, true_orders)
        doc["iterations"] = result.iterations
        doc["converged"] = result.converged
        with open(out / "region_report.json", "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")


def stage_infer_locations(config: PipelineConfig) -> None:
    env = _load_env(config)
    out = Path(config.output_dir)
    sequences = [_read_rss_csv(_require(p, "simulate")) for p in _rss_paths(out, config.users)]
    labels = _read_labels_csv(_require(out / "region_labels.csv", "infer-regions"), config.users)
    mobility = _mobility_with_residence(config, env)
    result = alternate_location_inference(sequences, labels, env, mobility, config.fine, config.seed_fine)
    _write_trajectories_csv(out / "trajectories.csv", result.trajectories)
    save_propagation(result.propagation, out / "propagation.json")
    _write_trace_csv(out / "fine_trace.csv", result.objective_trace)


def stage_build_map(config: PipelineConfig) -> None:
    env = _load_env(config)
    out = Path(config.output_dir)
    sequences = [_read_rss_csv(_require(p, "simulate")) for p in _rss_paths(out, config.users)]
    labels = _read_labels_csv(_require(out / "region_labels.csv", "infer-regions"), config.users)
    trajectories = _read_trajectories_csv(
        _require(out / "trajectories.csv", "infer-locations"), config.users
    )
    prop = load_propagation(
        _require(out / "propagation.json", "infer-locations"), env.valid_region_matrix()
    )
    grid = build_rp_grid(env)
    radio_map = build_radio_map(
        grid,
        np.vstack(trajectories),
        np.concatenate(labels),
        np.vstack(sequences),
        prop,
        env,
    )
    save_radio_map(radio_map, out / "radiomap.csv")


def stage_localize(config: PipelineConfig) -> None:
    out = Path(config.output_dir)
    radio_map = load_radio_map(_require(out / "radiomap.csv", "build-map"))
    positions, _, rss = _read_holdout_csv(_require(out / "holdout.csv", "simulate"))
    with open(out / "localization.csv", "w") as fh:
        fh.write("x_est,y_est,x_true,y_true,error\n")
        for i in range(rss.shape[0]):
            est = knn_localize(rss[i], radio_map, k=config.knn_k)
            err = float(np.linalg.norm(est - positions[i]))
            fh.write(
                f"{est[0]:.3f},{est[1]:.3f},{positions[i, 0]:.3f},{positions[i, 1]:.3f},{err:.3f}\n"
            )


def stage_evaluate(config: PipelineConfig) -> None:
    out = Path(config.output_dir)
    report = EvalReport()
    extras: dict = {}

    truth_paths = [out / f"truth_user{m}.csv" for m in range(1, config.users + 1)]
    have_truth = all(p.exists() for p in truth_paths)
    truths = [_read_truth_csv(p) for p in truth_paths] if have_truth else None

    labels_path = out / "region_labels.csv"
    if have_truth and labels_path.exists():
        labels = _read_labels_csv(labels_path, config.users)
        pred = np.concatenate(labels)
        true_lab = np.concatenate([t[1] for t in truths])
        rep = clustering_metrics(pred, true_lab)
        report.acc, report.nmi, report.f1 = rep.acc, rep.nmi, rep.f1
        report.ari, report.precision, report.e_cla = rep.ari, rep.precision, rep.e_cla
        inferred_orders = [segments_from_labels(lab)[0] for lab in labels]
        true_orders = [segments_from_labels(t[1])[0] for t in truths]
        report.topo_acc = topo_acc(inferred_orders, true_orders)

    traj_path = out / "trajectories.csv"
    if have_truth and traj_path.exists():
        trajectories = _read_trajectories_csv(traj_path, config.users)
        est = np.vstack(trajectories)
        tru = np.vstack([t[0] for t in truths])
        traj_e_loc, traj_cdf = localization_report(est, tru)
        extras["trajectory_e_loc"] = traj_e_loc
        save_cdf(traj_cdf, out / "trajectory_cdf.csv")

    map_path = out / "radiomap.csv"
    holdout_path = out / "holdout.csv"
    if map_path.exists() and holdout_path.exists():
        radio_map = load_radio_map(map_path)
        positions, _, rss = _read_holdout_csv(holdout_path)
        d = np.linalg.norm(positions[:, None, :] - radio_map.points[None, :, :], axis=2)
        nearest = np.argmin(d, axis=1)
        est_values = radio_map.values[nearest]
        rmse, mae, nrmse = rss_error_metrics(est_values.ravel(), rss.ravel())
        report.e_rmse, report.e_mae, report.e_nrmse = rmse, mae, nrmse

    loc_path = out / "localization.csv"
    if loc_path.exists():
        data = np.loadtxt(loc_path, delimiter=",", skiprows=1, ndmin=2)
        e_loc, cdf = localization_report(data[:, 0:2], data[:, 2:4])
        report.e_loc = e_loc
        save_cdf(cdf, out / "cdf.csv")
        extras["cdf"] = [[round(float(e), 4), round(float(f), 6)] for e, f in cdf]

    doc = asdict(report)
    doc.update(extras)
    with open(out / "report.json", "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


_STAGE_FUNCS = {
    "simulate": stage_simulate,
    "infer-regions": stage_infer_regions,
    "infer-locations": stage_infer_locations,
    "build-map": stage_build_map,
    "localize": stage_localize,
    "evaluate": stage_evaluate,
}


def run_stage(name: str, config: PipelineConfig) -> float:
    """Run one stage; returns its wall time in seconds."""
    if name not in _STAGE_FUNCS:
        raise PipelineError(f"unknown stage '{name}'; choose from {STAGES}")
    start = time.perf_counter()
    try:
        _STAGE_FUNCS[name](config)
    except PipelineError:
        raise
    except Exception as exc:  # noqa: BLE001 - diagnostics must name the stage
        raise PipelineError(f"stage '{name}' failed: {exc}") from exc
    return time.perf_counter() - start


def run_pipeline(config: PipelineConfig) -> dict:
    """Run all stages in order and write manifest.json; returns the manifest."""
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    timings = {}
    for name in STAGES:
        timings[name] = run_stage(name, config)
    import scipy
    import sklearn

    manifest = {
        "config_hash": config.config_hash(),
        "seeds": {
            "simulate": config.seed_simulate,
            "coarse": config.seed_coarse,
            "fine": config.seed_fine,
        },
        "versions": {
            "radiomapper": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "scikit-learn": sklearn.__version__,
        },
        "stage_seconds": {k: round(v, 3) for k, v in timings.items()},
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def make_environment_file(config: PipelineConfig) -> None:
    """Write the default corridor world to the configured environment path."""
    env = corridor_environment(n_rooms=config.world_rooms)
    Path(config.environment).parent.mkdir(parents=True, exist_ok=True)
    save_environment(env, config.environment)
