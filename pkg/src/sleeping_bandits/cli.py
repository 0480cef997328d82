"""Experiment runner CLI: seeded benchmark runs, audits, sweeps, environment dumps.

Configs are TOML.  Every run is reproducible: the loss and availability
streams for run ``r`` are derived from ``(master_seed, r)`` only, so all
algorithms in one experiment face identical environments (paired comparison);
learner randomness additionally mixes in the algorithm name.  Output rows are
sorted before writing, which makes the CSV byte-identical regardless of the
worker-pool size.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .algorithms import Variant, run_episode
from .environments import (
    CorrelatedAvailabilityModel,
    Environment,
    ExplicitAvailabilityModel,
    IndependentAvailabilityModel,
    MarkovLossModel,
    SwitchingLossModel,
    block_covariance,
    dump_environment_csv,
    gen_availability,
    gen_losses,
    RejectionCounter,
)
from .evaluation import AuditConfig, best_policy, concentration_audit, regret_trajectory
from .seeding import stream_rng

RESULT_HEADER = [
    "experiment_id",
    "algorithm",
    "run",
    "t",
    "cumulative_regret",
    "learner_loss",
    "comparator_loss",
]

SWEEP_HEADER = [
    "experiment_id",
    "axis",
    "value",
    "algorithm",
    "run",
    "final_cumulative_regret",
]


class ConfigError(Exception):
    """Invalid configuration; carries the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


# ---------------------------------------------------------------------------
# Config schema


@dataclass(frozen=True)
class AvailabilityConfig:
    kind: str
    a: tuple | None = None
    a_range: tuple | None = None
    block_size: int | None = None
    rho: float | None = None


@dataclass(frozen=True)
class LossConfig:
    kind: str
    tau: int | None = None
    mu_best: float = 0.2
    mu_other: float = 0.8
    n_rotating: int = 0
    p_std: float | None = None


@dataclass(frozen=True)
class AlgorithmEntry:
    name: str
    variant: Variant
    mc_max_samples: int | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    experiment_id: str
    num_arms: int
    horizon: int
    runs: int
    master_seed: int
    algorithms: tuple[AlgorithmEntry, ...]
    availability: AvailabilityConfig
    loss: LossConfig
    out_dir: str | None = None


def _require(table: dict, key: str, path: str):
    if key not in table:
        raise ConfigError(f"{path}.{key}", "missing required field")
    return table[key]


def _positive_int(value, path: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise ConfigError(path, f"expected a positive integer, got {value!r}")
    return value


def parse_config(raw: dict) -> ExperimentConfig:
    exp = _require(raw, "experiment", "")
    env = _require(raw, "environment", "")
    avail_raw = _require(env, "availability", "environment")
    loss_raw = _require(env, "loss", "environment")
    algs_raw = _require(raw, "algorithms", "")
    if not isinstance(algs_raw, list) or not algs_raw:
        raise ConfigError("algorithms", "need at least one [[algorithms]] entry")

    num_arms = _positive_int(_require(exp, "K", "experiment"), "experiment.K")
    horizon = _positive_int(_require(exp, "T", "experiment"), "experiment.T")
    runs = _positive_int(_require(exp, "runs", "experiment"), "experiment.runs")
    master_seed = _require(exp, "master_seed", "experiment")
    if not isinstance(master_seed, int) or isinstance(master_seed, bool) or master_seed < 0:
        raise ConfigError("experiment.master_seed", "expected a nonnegative integer")

    kind = _require(avail_raw, "kind", "environment.availability")
    if kind == "independent":
        a = avail_raw.get("a")
        a_range = avail_raw.get("a_range")
        if (a is None) == (a_range is None):
            raise ConfigError(
                "environment.availability",
                "independent availabilities need exactly one of 'a' or 'a_range'",
            )
        if a is not None:
            if len(a) != num_arms:
                raise ConfigError(
                    "environment.availability.a",
                    f"expected {num_arms} entries, got {len(a)}",
                )
            if any(not 0.0 < float(x) <= 1.0 for x in a):
                raise ConfigError(
                    "environment.availability.a", "entries must lie in (0, 1]"
                )
            availability = AvailabilityConfig(kind=kind, a=tuple(float(x) for x in a))
        else:
            lo, hi = (float(x) for x in a_range)
            if not (0.0 < lo <= hi <= 1.0):
                raise ConfigError(
                    "environment.availability.a_range",
                    "expected 0 < low <= high <= 1",
                )
            availability = AvailabilityConfig(kind=kind, a_range=(lo, hi))
    elif kind == "correlated":
        block = _positive_int(
            _require(avail_raw, "block_size", "environment.availability"),
            "environment.availability.block_size",
        )
        rho = float(_require(avail_raw, "rho", "environment.availability"))
        if not 0.0 <= rho < 1.0:
            raise ConfigError("environment.availability.rho", "expected rho in [0, 1)")
        availability = AvailabilityConfig(kind=kind, block_size=block, rho=rho)
    else:
        raise ConfigError(
            "environment.availability.kind",
            f"unknown kind {kind!r} (expected 'independent' or 'correlated')",
        )

    kind = _require(loss_raw, "kind", "environment.loss")
    if kind == "switching":
        tau = _positive_int(_require(loss_raw, "tau", "environment.loss"), "environment.loss.tau")
        loss = LossConfig(
            kind=kind,
            tau=tau,
            mu_best=float(loss_raw.get("mu_best", 0.2)),
            mu_other=float(loss_raw.get("mu_other", 0.8)),
            n_rotating=int(loss_raw.get("n_rotating", 0)),
        )
        if not loss.mu_best < loss.mu_other:
            raise ConfigError("environment.loss", "mu_best must be below mu_other")
    elif kind == "markov":
        p_std = float(_require(loss_raw, "p_std", "environment.loss"))
        if p_std < 0:
            raise ConfigError("environment.loss.p_std", "must be >= 0")
        loss = LossConfig(kind=kind, p_std=p_std)
    else:
        raise ConfigError(
            "environment.loss.kind",
            f"unknown kind {kind!r} (expected 'switching' or 'markov')",
        )

    entries = []
    seen = set()
    for i, entry in enumerate(algs_raw):
        name = _require(entry, "name", f"algorithms[{i}]")
        if name in seen:
            raise ConfigError(f"algorithms[{i}].name", f"duplicate algorithm name {name!r}")
        seen.add(name)
        variant_name = entry.get("variant", name)
        try:
            variant = Variant(variant_name)
        except ValueError:
            known = ", ".join(v.value for v in Variant)
            raise ConfigError(
                f"algorithms[{i}].variant",
                f"unknown variant {variant_name!r} (known: {known})",
            ) from None
        cap = entry.get("mc_max_samples")
        if cap is not None:
            cap = _positive_int(cap, f"algorithms[{i}].mc_max_samples")
            if variant is not Variant.EXP3_MC:
                raise ConfigError(
                    f"algorithms[{i}].mc_max_samples",
                    "only the exp3_mc variant takes a sample cap",
                )
        entries.append(AlgorithmEntry(name=name, variant=variant, mc_max_samples=cap))

    out = raw.get("output", {})
    return ExperimentConfig(
        experiment_id=str(_require(exp, "id", "experiment")),
        num_arms=num_arms,
        horizon=horizon,
        runs=runs,
        master_seed=master_seed,
        algorithms=tuple(entries),
        availability=availability,
        loss=loss,
        out_dir=out.get("dir"),
    )


def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(str(path), f"invalid TOML: {exc}") from exc
    return parse_config(raw)


# ---------------------------------------------------------------------------
# Environment construction


def build_environment(config: ExperimentConfig) -> Environment:
    """Materialize the environment; random model parameters are drawn once
    per experiment from the master stream, shared by all runs."""
    avail_cfg = config.availability
    if avail_cfg.kind == "independent":
        if avail_cfg.a is not None:
            a = np.asarray(avail_cfg.a)
        else:
            lo, hi = avail_cfg.a_range
            a = stream_rng(config.master_seed, "availability-params").uniform(
                lo, hi, config.num_arms
            )
        availability = IndependentAvailabilityModel(a)
    else:
        cov = block_covariance(config.num_arms, avail_cfg.block_size, avail_cfg.rho)
        availability = CorrelatedAvailabilityModel(np.zeros(config.num_arms), cov)

    loss_cfg = config.loss
    if loss_cfg.kind == "switching":
        loss = SwitchingLossModel(
            tau=loss_cfg.tau,
            mu_best=loss_cfg.mu_best,
            mu_other=loss_cfg.mu_other,
            n_rotating=loss_cfg.n_rotating,
        )
    else:
        loss = MarkovLossModel(p_std=loss_cfg.p_std)
    return Environment(config.num_arms, availability, loss)


# ---------------------------------------------------------------------------
# Experiment execution


def _config_digest(config: ExperimentConfig) -> str:
    def encode(obj):
        if isinstance(obj, tuple):
            return [encode(x) for x in obj]
        if hasattr(obj, "__dataclass_fields__"):
            return {k: encode(getattr(obj, k)) for k in sorted(obj.__dataclass_fields__)}
        if isinstance(obj, Variant):
            return obj.value
        return obj

    blob = json.dumps(encode(config), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def _run_single(config: ExperimentConfig, alg: AlgorithmEntry, run_idx: int):
    env = build_environment(config)
    trace = run_episode(
        alg.variant,
        env,
        config.horizon,
        (config.master_seed, run_idx),
        algorithm_label=alg.name,
        mc_max_samples=alg.mc_max_samples,
    )
    traj = regret_trajectory(trace, best_policy(trace.loss_matrix))
    return (
        traj.cumulative_regret,
        trace.learner_losses,
        traj.comparator_losses,
        trace.empty_redraws,
    )


def _star_run_single(args):
    return _run_single(*args)


def run_experiment(
    config: ExperimentConfig, out_dir, parallel: int = 1
) -> tuple[Path, Path]:
    """Execute all (algorithm, run) pairs and write the results CSV + metadata."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [
        (config, alg, run_idx)
        for alg in config.algorithms
        for run_idx in range(config.runs)
    ]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(_star_run_single, tasks))
    else:
        results = [_run_single(*task) for task in tasks]

    csv_path = out_dir / f"{config.experiment_id}.csv"
    redraws_total = 0
    rows_written = 0
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULT_HEADER)
        for (cfg, alg, run_idx), (regret, learner, comparator, redraws) in zip(
            tasks, results
        ):
            redraws_total += redraws
            for t in range(config.horizon):
                writer.writerow(
                    [
                        config.experiment_id,
                        alg.name,
                        run_idx,
                        t + 1,
                        f"{regret[t]:.6g}",
                        f"{learner[t]:.6g}",
                        f"{comparator[t]:.6g}",
                    ]
                )
                rows_written += 1

    meta: dict[str, object] = {
        "experiment_id": config.experiment_id,
        "config_sha256": _config_digest(config),
        "library_version": __version__,
        "K": config.num_arms,
        "T": config.horizon,
        "runs": config.runs,
        "master_seed": config.master_seed,
        "algorithms": ",".join(alg.name for alg in config.algorithms),
        "availability_kind": config.availability.kind,
        "loss_kind": config.loss.kind,
        "empty_set_redraws_total": redraws_total,
        "rows": rows_written,
    }
    for alg in config.algorithms:
        if alg.mc_max_samples is not None:
            meta[f"mc_max_samples_{alg.name}"] = alg.mc_max_samples
    meta_path = out_dir / f"{config.experiment_id}.meta"
    _write_metadata(meta_path, meta)
    return csv_path, meta_path


def _write_metadata(path: Path, meta: dict) -> None:
    with open(path, "w", newline="") as fh:
        for key in sorted(meta):
            fh.write(f"{key}={meta[key]}\n")


# ---------------------------------------------------------------------------
# Audits


def parse_audit_config(raw: dict):
    audit = _require(raw, "audit", "")
    lemma = _require(audit, "lemma", "audit")
    if lemma not in ("L1", "L6", "L9"):
        raise ConfigError("audit.lemma", f"unknown lemma {lemma!r} (expected L1, L6 or L9)")
    num_arms = _positive_int(_require(audit, "K", "audit"), "audit.K")
    t = _positive_int(_require(audit, "t", "audit"), "audit.t")
    trials = _positive_int(_require(audit, "trials", "audit"), "audit.trials")
    delta = float(_require(audit, "delta", "audit"))
    if not 0.0 < delta < 1.0:
        raise ConfigError("audit.delta", "expected delta in (0, 1)")
    seed = audit.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("audit.seed", "expected a nonnegative integer")

    if lemma == "L9":
        availability = ExplicitAvailabilityModel.uniform_nonempty(num_arms)
    else:
        a = audit.get("a")
        if a is not None:
            availability = IndependentAvailabilityModel(np.asarray([float(x) for x in a]))
            if availability.num_arms != num_arms:
                raise ConfigError("audit.a", f"expected {num_arms} entries")
        else:
            lo, hi = (float(x) for x in audit.get("a_range", (0.3, 0.9)))
            a = stream_rng(seed, "audit-availability-params").uniform(lo, hi, num_arms)
            availability = IndependentAvailabilityModel(a)
    return lemma, AuditConfig(availability=availability, t=t, delta=delta, trials=trials), seed


def run_audit(lemma: str, config: AuditConfig, seed: int, out_dir) -> Path:
    """Run one concentration audit and write its report file."""
    report = concentration_audit(lemma, config, stream_rng(seed, "audit", lemma))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"audit_{lemma}.txt"
    _write_metadata(
        path,
        {
            "lemma": report.lemma,
            "K": report.num_arms,
            "t": report.t,
            "delta": f"{report.delta:.6g}",
            "trials": report.trials,
            "bound": f"{report.bound:.6g}",
            "violations": report.violations,
            "violation_fraction": f"{report.violation_fraction:.6g}",
            "max_deviation": f"{report.max_deviation:.6g}",
            "mean_deviation": f"{report.mean_deviation:.6g}",
            "result": "pass" if report.passed else "FAIL",
        },
    )
    return path


# ---------------------------------------------------------------------------
# Sweeps


def _axis_point_config(config: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    from dataclasses import replace

    if axis == "K":
        k = int(value)
        if config.availability.kind == "independent" and config.availability.a is not None:
            raise ConfigError(
                "environment.availability.a",
                "explicit per-arm availabilities cannot be swept over K; use a_range",
            )
        return replace(config, num_arms=k)
    if axis == "T":
        return replace(config, horizon=int(value))
    if axis == "availability":
        if config.availability.kind != "independent":
            raise ConfigError(
                "environment.availability.kind",
                "availability sweeps need the independent model",
            )
        a = float(value)
        if not 0.0 < a <= 1.0:
            raise ConfigError("sweep.values", f"availability {a} outside (0, 1]")
        return replace(
            config,
            availability=AvailabilityConfig(kind="independent", a=(a,) * config.num_arms),
        )
    raise ConfigError("sweep.axis", f"unknown axis {axis!r} (expected K, T or availability)")


def sweep(config: ExperimentConfig, axis: str, values, out_dir, parallel: int = 1):
    """Repeat the experiment along one axis, recording final regret per run.

    A failing point (for instance the exact learner beyond its enumeration
    cap) is recorded in the metadata and skipped; the other points complete.
    """
    if not values:
        raise ConfigError("sweep.values", "need at least one axis value")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{config.experiment_id}_sweep_{axis}.csv"
    errors: dict[str, str] = {}
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_HEADER)
        for value in values:
            try:
                point = _axis_point_config(config, axis, value)
            except (ConfigError, ValueError) as exc:
                errors[f"sweep_error_{value}"] = str(exc)
                continue
            for alg in point.algorithms:
                tasks = [(point, alg, r) for r in range(point.runs)]
                try:
                    if parallel > 1:
                        with ProcessPoolExecutor(max_workers=parallel) as pool:
                            results = list(pool.map(_star_run_single, tasks))
                    else:
                        results = [_run_single(*task) for task in tasks]
                except (ValueError, ConfigError) as exc:
                    errors[f"sweep_error_{value}_{alg.name}"] = str(exc)
                    continue
                for run_idx, (regret, _, _, _) in enumerate(results):
                    writer.writerow(
                        [
                            config.experiment_id,
                            axis,
                            f"{value:.6g}" if isinstance(value, float) else value,
                            alg.name,
                            run_idx,
                            f"{regret[-1]:.6g}",
                        ]
                    )
    meta = {
        "experiment_id": config.experiment_id,
        "sweep_axis": axis,
        "sweep_values": ",".join(str(v) for v in values),
        "config_sha256": _config_digest(config),
        "library_version": __version__,
    }
    meta.update(errors)
    meta_path = out_dir / f"{config.experiment_id}_sweep_{axis}.meta"
    _write_metadata(meta_path, meta)
    return csv_path, meta_path


# ---------------------------------------------------------------------------
# Environment dumps


def dump_env(config: ExperimentConfig, run_idx: int, out_dir) -> Path:
    """Write the realized (loss matrix, availability stream) of one run."""
    env = build_environment(config)
    loss_rng = stream_rng((config.master_seed, run_idx), "losses")
    avail_rng = stream_rng((config.master_seed, run_idx), "availability")
    loss_matrix = gen_losses(env.losses, config.horizon, env.num_arms, loss_rng)
    counter = RejectionCounter()
    masks = np.array(
        [gen_availability(env.availability, avail_rng, counter) for _ in range(config.horizon)],
        dtype=np.int64,
    )
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{config.experiment_id}_env_run{run_idx}.csv"
    dump_environment_csv(path, loss_matrix, masks)
    return path


# ---------------------------------------------------------------------------
# Entry point


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sleeping-bandits",
        description="Sleeping-bandit benchmark runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="TOML config path")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override master seed")
        p.add_argument("--parallel", type=int, default=1, help="worker pool size")

    common(sub.add_parser("run", help="run the configured experiment"))

    audit = sub.add_parser("audit", help="run a concentration audit")
    audit.add_argument("--config", required=True)
    audit.add_argument("--out", default=None)
    audit.add_argument("--seed", type=int, default=None)

    sw = sub.add_parser("sweep", help="repeat the experiment along one axis")
    common(sw)
    sw.add_argument("--axis", required=True, choices=["K", "T", "availability"])
    sw.add_argument("--values", required=True, help="comma-separated axis values")

    de = sub.add_parser("dump-env", help="dump one run's realized environment")
    de.add_argument("--config", required=True)
    de.add_argument("--out", default=None)
    de.add_argument("--seed", type=int, default=None)
    de.add_argument("--run", type=int, default=0)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "audit":
            with open(args.config, "rb") as fh:
                raw = tomllib.load(fh)
            lemma, audit_config, seed = parse_audit_config(raw)
            if args.seed is not None:
                seed = args.seed
            out = args.out or raw.get("output", {}).get("dir") or "."
            path = run_audit(lemma, audit_config, seed, out)
            print(path)
            return 0

        config = load_config(args.config)
        if args.seed is not None:
            from dataclasses import replace

            if args.seed < 0:
                raise ConfigError("--seed", "expected a nonnegative integer")
            config = replace(config, master_seed=args.seed)
        out = args.out or config.out_dir or "."

        if args.command == "run":
            csv_path, _ = run_experiment(config, out, parallel=args.parallel)
            print(csv_path)
        elif args.command == "sweep":
            values = []
            for chunk in args.values.split(","):
                chunk = chunk.strip()
                values.append(int(chunk) if args.axis in ("K", "T") else float(chunk))
            csv_path, _ = sweep(config, args.axis, values, out, parallel=args.parallel)
            print(csv_path)
        elif args.command == "dump-env":
            if args.run < 0 or args.run >= config.runs:
                raise ConfigError("--run", f"run index {args.run} outside [0, {config.runs})")
            print(dump_env(config, args.run, out))
        return 0
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
