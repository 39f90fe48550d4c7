"""Command-line runner: single runs, ensembles and (alpha, T) sweeps.

Exit codes: 0 success, 2 usage or parameter-domain error, 1 runtime or I/O
error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, rng
from .core import UPDATE_SCHEMES, ModelParams, ParameterError, run
from .geometry import SCALING_FORMS
from .kernel import ENGINES
from .observables import (
    EnsembleStats,
    aggregate,
    empirical_sustain_field,
    measure_run,
    sustain_probability_field,
)
from .output import (
    digest,
    emit_snapshot,
    emit_sustain_map,
    fmt_param,
    histogram_csv,
    histogram_name,
    smax_table_csv,
    write_files,
)

PROG = "impact-lattice"
THREADS_ENV = "IMPACT_LATTICE_THREADS"
SUSTAIN_METHODS = ("analytic", "empirical")

DEFAULTS = {
    "L": 41,
    "K": 2,
    "alpha": [3.0],
    "temperature": [1.0],
    "steps": 100,
    "seed": 0,
    "runs": 1,
    "engine": "kernel",
    "snapshots": None,
    "out": "impact_out",
    "update": "sync",
    "scaling": "1+d^a",
    "impact_scale": 4.0,
    "self_support": True,
    "sustain": "analytic",
    "sustain_samples": 10000,
}


class UsageError(Exception):
    def __init__(self, flag: str | None, message: str):
        super().__init__(f"--{flag}: {message}" if flag else message)
        self.flag = flag


@dataclass
class Job:
    params: ModelParams
    alphas: list[float]
    temperatures: list[float]
    runs: int = 1
    engine: str = "kernel"
    snapshots: list[int] = field(default_factory=list)
    out: Path = Path(DEFAULTS["out"])
    sustain: str = "analytic"
    sustain_samples: int = 10000

    def cells(self) -> list[tuple[float, float]]:
        """``(T, alpha)`` pairs in output order."""
        return sorted((t, a) for t in self.temperatures for a in self.alphas)

    def describe(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "grid": {"alpha": self.alphas, "temperature": self.temperatures},
            "n_runs": self.runs,
            "engine": self.engine,
            "snapshot_schedule": self.snapshots,
            "sustain": {"method": self.sustain, "samples": self.sustain_samples},
        }


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(None, message)


def _int(flag):
    def conv(text):
        try:
            return int(str(text).strip())
        except ValueError:
            raise UsageError(flag, f"expected an integer, got {text!r}") from None

    return conv


def _float_list(flag):
    def conv(text):
        try:
            return [float(x) for x in str(text).split(",") if x.strip()]
        except ValueError:
            raise UsageError(flag, f"expected comma-separated numbers, got {text!r}") from None

    return conv


def _int_list(flag):
    def conv(text):
        try:
            return [int(x) for x in str(text).split(",") if x.strip()]
        except ValueError:
            raise UsageError(flag, f"expected comma-separated integers, got {text!r}") from None

    return conv


def _float(flag):
    def conv(text):
        try:
            return float(text)
        except ValueError:
            raise UsageError(flag, f"expected a number, got {text!r}") from None

    return conv


def _choice(flag, choices):
    def conv(text):
        if text not in choices:
            raise UsageError(flag, f"expected one of {', '.join(choices)}, got {text!r}")
        return text

    return conv


def _bool(flag):
    def conv(text):
        t = str(text).strip().lower()
        if t in ("1", "true", "yes", "on"):
            return True
        if t in ("0", "false", "no", "off"):
            return False
        raise UsageError(flag, f"expected a boolean, got {text!r}")

    return conv


# key -> converter; also the accepted config-file keys
CONVERTERS = {
    "L": _int("L"),
    "K": _int("K"),
    "alpha": _float_list("alpha"),
    "temperature": _float_list("temperature"),
    "steps": _int("steps"),
    "seed": _int("seed"),
    "runs": _int("runs"),
    "engine": _choice("engine", ENGINES),
    "snapshots": _int_list("snapshots"),
    "out": str,
    "update": _choice("update", UPDATE_SCHEMES),
    "scaling": _choice("scaling", SCALING_FORMS),
    "impact_scale": _float("impact-scale"),
    "self_support": _bool("self-support"),
    "sustain": _choice("sustain", SUSTAIN_METHODS),
    "sustain_samples": _int("sustain-samples"),
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog=PROG, description="Multi-opinion social impact model on a square lattice.")
    p.add_argument("--version", action="version", version=f"{PROG} {__version__}")
    p.add_argument("--config", help="flat key=value file; flags override its keys")
    p.add_argument("--from-manifest", dest="from_manifest", help="rerun the job recorded in a manifest.json")
    p.add_argument("--L", help="lattice size (default 41)")
    p.add_argument("--K", help="number of opinions (default 2)")
    p.add_argument("--alpha", help="distance exponent(s), comma-separated (default 3)")
    p.add_argument("--temperature", help="social temperature(s), comma-separated (default 1)")
    p.add_argument("--steps", help="time steps (default 100)")
    p.add_argument("--seed", help="master seed (default 0)")
    p.add_argument("--runs", help="runs per (alpha, T) point (default 1)")
    p.add_argument("--engine", help=f"{'|'.join(ENGINES)} (default kernel)")
    p.add_argument("--snapshots", help="comma-separated steps to emit (default: final step)")
    p.add_argument("--out", help="output directory (default impact_out)")
    p.add_argument("--update", help="sync|async (default sync)")
    p.add_argument("--scaling", help="'1+d^a' or '(1+d)^a' (default 1+d^a)")
    p.add_argument("--impact-scale", dest="impact_scale", help="impact prefactor (default 4)")
    p.add_argument("--self-support", dest="self_support", help="include own support, true|false (default true)")
    p.add_argument("--sustain", help="analytic|empirical sustain maps (default analytic)")
    p.add_argument("--sustain-samples", dest="sustain_samples", help="samples for empirical maps (default 10000)")
    return p


def read_config_file(path: str) -> dict:
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError("config", f"cannot read {path}: {exc.strerror}") from None
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError("config", f"{path}:{n}: expected key=value")
        key, value = (x.strip() for x in line.split("=", 1))
        key = key.lstrip("-").replace("-", "_")
        if key not in CONVERTERS:
            raise UsageError("config", f"{path}:{n}: unknown key {key!r}")
        values[key] = CONVERTERS[key](value)
    return values


def read_manifest(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text())
        params = data["params"]
        values = {k: params[k] for k in ("L", "K", "steps", "seed", "update", "scaling", "impact_scale", "self_support")}
        values["alpha"] = [float(a) for a in data["grid"]["alpha"]]
        values["temperature"] = [float(t) for t in data["grid"]["temperature"]]
        values["runs"] = data["n_runs"]
        values["engine"] = data["engine"]
        values["snapshots"] = list(data["snapshot_schedule"])
        values["sustain"] = data["sustain"]["method"]
        values["sustain_samples"] = data["sustain"]["samples"]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError("from-manifest", f"cannot load {path}: {exc}") from None
    return values


def parse_config(argv=None) -> Job:
    """Merge defaults, config file (or manifest) and flags into a validated job."""
    ns = build_parser().parse_args(argv)
    values = {k: (list(v) if isinstance(v, list) else v) for k, v in DEFAULTS.items()}
    if ns.from_manifest:
        values.update(read_manifest(ns.from_manifest))
    if ns.config:
        values.update(read_config_file(ns.config))
    for key, conv in CONVERTERS.items():
        raw = getattr(ns, key, None)
        if raw is not None:
            values[key] = conv(raw)

    alphas, temps = values["alpha"], values["temperature"]
    if not alphas:
        raise UsageError("alpha", "empty list")
    if not temps:
        raise UsageError("temperature", "empty list")
    try:
        for a in alphas:
            ModelParams(alpha=a)
        for t in temps:
            ModelParams(temperature=t)
        params = ModelParams(
            L=values["L"],
            K=values["K"],
            alpha=alphas[0],
            temperature=temps[0],
            steps=values["steps"],
            seed=values["seed"],
            scaling=values["scaling"],
            update=values["update"],
            self_support=values["self_support"],
            impact_scale=values["impact_scale"],
        )
    except ParameterError as exc:
        raise UsageError(exc.name.replace("_", "-"), str(exc).split(": ", 1)[1]) from None
    if values["runs"] < 1:
        raise UsageError("runs", f"must be >= 1, got {values['runs']}")
    if values["sustain_samples"] < 1:
        raise UsageError("sustain-samples", f"must be >= 1, got {values['sustain_samples']}")
    snapshots = values["snapshots"]
    if snapshots is None:
        snapshots = [params.steps]
    for s in snapshots:
        if not 0 <= s <= params.steps:
            raise UsageError("snapshots", f"step {s} outside [0, {params.steps}]")
    return Job(
        params=params,
        alphas=sorted(set(alphas)),
        temperatures=sorted(set(temps)),
        runs=values["runs"],
        engine=values["engine"],
        snapshots=sorted(set(snapshots)),
        out=Path(values["out"]),
        sustain=values["sustain"],
        sustain_samples=values["sustain_samples"],
    )


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise UsageError("threads", f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 0:
        raise UsageError("threads", f"{THREADS_ENV} must be >= 0, got {n}")
    return n or (os.cpu_count() or 1)


def _measure_job(job):
    return measure_run(*job)


class CellError(RuntimeError):
    pass


def sweep(job: Job, workers: int = 1) -> tuple[list[EnsembleStats], list[tuple[str, Path, str]]]:
    """Ensemble per ``(alpha, T)`` cell plus the table, histograms and snapshots.

    Cells and runs share one worker pool; aggregation follows run index.
    """
    from concurrent.futures import ProcessPoolExecutor

    out = job.out
    cells = job.cells()
    jobs, owners = [], []
    for t, a in cells:
        cell_params = job.params.replace(alpha=a, temperature=t)
        for r in range(job.runs):
            jobs.append((cell_params.replace(seed=rng.derive_seed(job.params.seed, r)), cell_params.steps, job.engine))
            owners.append((t, a))
    try:
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
                results = list(pool.map(_measure_job, jobs))
        else:
            results = [_measure_job(j) for j in jobs]
    except Exception as exc:
        raise CellError(f"sweep failed: {exc}") from exc

    outputs: list[tuple[str, Path, str]] = []
    stats = []
    for t, a in cells:
        cell_params = job.params.replace(alpha=a, temperature=t)
        runs = [res for res, owner in zip(results, owners) if owner == (t, a)]
        try:
            s = aggregate(cell_params, cell_params.steps, runs)
            stats.append(s)
            name = histogram_name(a, t)
            data = histogram_csv(s)
            write_files([(out / name, data)])
            outputs.append(("histogram", out / name, digest(data)))
            if job.snapshots:
                cell_dir = out if len(cells) == 1 else out / f"alpha_{fmt_param(a)}_T_{fmt_param(t)}"
                outputs += _emit_cell_snapshots(job, cell_params, cell_dir)
        except (OSError, ValueError) as exc:
            raise CellError(f"cell alpha={a:g}, T={t:g}: {exc}") from exc

    table = smax_table_csv(stats)
    write_files([(out / "smax_table.csv", table)])
    outputs.insert(0, ("smax_table", out / "smax_table.csv", digest(table)))
    return stats, outputs


def _emit_cell_snapshots(job: Job, params: ModelParams, directory: Path) -> list:
    """Snapshots of run 0 of the cell (seed ``derive_seed(seed, 0)``)."""
    directory.mkdir(parents=True, exist_ok=True)
    run_params = params.replace(seed=rng.derive_seed(job.params.seed, 0))
    result = run(run_params, job.snapshots, engine=job.engine)
    outputs = []
    for s in job.snapshots:
        config = result.snapshots[s]
        outputs += emit_snapshot(config, directory)
        if job.sustain == "empirical":
            field_ = empirical_sustain_field(config, job.sustain_samples, job.engine)
        else:
            field_ = sustain_probability_field(config, job.engine)
        outputs += emit_sustain_map(field_, directory)
    return outputs


def write_manifest(job: Job, outputs) -> Path:
    manifest = {
        "tool_version": __version__,
        "created_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        **job.describe(),
        "seed_derivation": "run r uses splitmix64(seed + (r + 1) * 0x9E3779B97F4A7C15 mod 2**64)",
        "outputs": [
            {"kind": kind, "path": path.relative_to(job.out).as_posix(), "sha256": sha}
            for kind, path, sha in outputs
        ],
    }
    path = job.out / "manifest.json"
    write_files([(path, (json.dumps(manifest, indent=2) + "\n").encode())])
    return path


def main(argv=None) -> int:
    try:
        job = parse_config(argv)
        workers = worker_count()
    except UsageError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 2
    try:
        job.out.mkdir(parents=True, exist_ok=True)
        stats, outputs = sweep(job, workers)
        write_manifest(job, outputs)
    except (CellError, OSError) as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 1
    for s in stats:
        print(
            f"T={s.temperature:g} alpha={s.alpha:g} runs={s.n_runs} "
            f"smax={s.mean_smax_frac:.4f}+-{s.std_smax_frac:.4f} clusters={s.mean_n_clusters:.2f} "
            f"small={s.mean_n_small_clusters:.2f}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
