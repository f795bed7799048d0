"""Reproducible Monte Carlo experiments for early-stopped truncation.

An experiment is described by a plain nested mapping (JSON-friendly),
parsed into :class:`ExperimentConfig`, and resolved into model objects.
Each replication simulates one observation, runs the configured
procedures on it, and records truncation indices, estimation errors in
both norms, and relative efficiencies against the exact discrete oracle
risks computed once from the instance. Per-replication seeds are split
off the base seed by replication index, so results are bit-identical
for any worker count; aggregation is an ordered reduce over records.

The CSV schema is one row per (replication, procedure):
``rep,tau,rho,immediate,err_strong,err_weak,eff_strong,eff_weak,procedure``
with a ``# config=...`` echo line above the header. Efficiencies with a
zero error denominator are recorded as the literal ``inf``.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .estimator import estimate_at
from .model import (
    NoiseModel,
    Signal,
    Spectrum,
    load_vector,
    make_polynomial_spectrum,
    replication_seed,
    simulate_observation,
)
from .oracles import OracleSet, classical_oracle, oracle_set
from .signals import calibrated_signal
from .stopping import StoppingConfig, aic_select, make_stopping_config, stop_index

__all__ = [
    "CSV_HEADER",
    "EfficiencyReport",
    "ExperimentConfig",
    "PROCEDURES",
    "ProcedureSummary",
    "ReplicationRecord",
    "ResolvedExperiment",
    "config_from_mapping",
    "oracle_indices",
    "oracle_payload",
    "read_records_csv",
    "resolve_experiment",
    "run_experiment",
    "write_records_csv",
]

PROCEDURES = ("plain_stop", "two_step_weak", "two_step_strong", "fixed_oracle")

CSV_HEADER = "rep,tau,rho,immediate,err_strong,err_weak,eff_strong,eff_weak,procedure"


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one Monte Carlo experiment."""

    dim: int
    delta: float
    spectrum_p: float | None = 0.5
    spectrum_file: str | None = None
    signal_name: str | None = None
    signal_target: float | None = None
    signal_file: str | None = None
    kappa: float | None = None
    kappa_drift: float = 0.0
    m0_mode: str = "zero"
    m0: int | None = None
    level: float = 0.99
    replications: int = 1000
    base_seed: int = 0
    procedures: tuple[str, ...] = ("plain_stop",)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be at least 1")
        if self.delta < 0:
            raise ValueError("noise level must be nonnegative")
        if self.replications < 1:
            raise ValueError("need at least one replication")
        if (self.spectrum_p is None) == (self.spectrum_file is None):
            raise ValueError("specify exactly one of spectrum exponent or spectrum file")
        if (self.signal_name is None) == (self.signal_file is None):
            raise ValueError("specify exactly one of signal name or signal file")
        if not self.procedures:
            raise ValueError("at least one procedure is required")
        for proc in self.procedures:
            if proc not in PROCEDURES:
                raise ValueError(f"unknown procedure {proc!r}; expected a subset of {PROCEDURES}")

    def to_mapping(self) -> dict:
        """Canonical nested mapping; inverse of :func:`config_from_mapping`."""
        spectrum = {"file": self.spectrum_file} if self.spectrum_file else {"p": self.spectrum_p}
        if self.signal_file:
            signal: dict = {"file": self.signal_file}
        else:
            signal = {"name": self.signal_name}
            if self.signal_target is not None:
                signal["target"] = self.signal_target
        return {
            "dim": self.dim,
            "spectrum": spectrum,
            "noise": {"delta": self.delta},
            "signal": signal,
            "stopping": {
                "kappa": self.kappa,
                "kappa_drift": self.kappa_drift,
                "m0_mode": self.m0_mode,
                "m0": self.m0,
                "level": self.level,
            },
            "replications": self.replications,
            "base_seed": self.base_seed,
            "procedures": list(self.procedures),
        }


def config_from_mapping(mapping: dict) -> ExperimentConfig:
    """Parse a nested mapping (typically loaded from JSON) into a config."""
    if not isinstance(mapping, dict):
        raise ValueError("experiment config must be a mapping")
    known = {"dim", "spectrum", "noise", "signal", "stopping", "replications", "base_seed", "procedures"}
    unknown = set(mapping) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    spectrum = mapping.get("spectrum", {"p": 0.5})
    noise = mapping.get("noise", {})
    signal = mapping.get("signal", {})
    stopping = mapping.get("stopping", {})
    if "delta" not in noise:
        raise ValueError("config requires noise.delta")
    if "dim" not in mapping:
        raise ValueError("config requires dim")
    kappa = stopping.get("kappa")
    m0 = stopping.get("m0")
    target = signal.get("target")
    return ExperimentConfig(
        dim=int(mapping["dim"]),
        delta=float(noise["delta"]),
        spectrum_p=float(spectrum["p"]) if "p" in spectrum else None,
        spectrum_file=spectrum.get("file"),
        signal_name=signal.get("name"),
        signal_target=float(target) if target is not None else None,
        signal_file=signal.get("file"),
        kappa=float(kappa) if kappa is not None else None,
        kappa_drift=float(stopping.get("kappa_drift", 0.0)),
        m0_mode=stopping.get("m0_mode", "zero"),
        m0=int(m0) if m0 is not None else None,
        level=float(stopping.get("level", 0.99)),
        replications=int(mapping.get("replications", 1000)),
        base_seed=int(mapping.get("base_seed", 0)),
        procedures=tuple(mapping.get("procedures", ["plain_stop"])),
    )


@dataclass(frozen=True)
class ResolvedExperiment:
    """Model objects materialised from an :class:`ExperimentConfig`."""

    config: ExperimentConfig
    signal: Signal
    spectrum: Spectrum
    noise: NoiseModel
    stopping: StoppingConfig


def resolve_experiment(config: ExperimentConfig, base_dir: str | Path | None = None) -> ResolvedExperiment:
    """Load referenced files and build the model objects for an experiment."""
    base = Path(base_dir) if base_dir is not None else Path.cwd()

    def _resolve_path(name: str) -> Path:
        path = Path(name)
        path = path if path.is_absolute() else base / path
        if not path.exists():
            raise ValueError(f"referenced file not found: {path}")
        return path

    if config.spectrum_file is not None:
        spectrum = Spectrum(load_vector(_resolve_path(config.spectrum_file)))
    else:
        spectrum = make_polynomial_spectrum(config.dim, config.spectrum_p)
    noise = NoiseModel(delta=config.delta)
    if config.signal_file is not None:
        signal = Signal(load_vector(_resolve_path(config.signal_file)))
    elif config.signal_name == "zero":
        signal = Signal(np.zeros(config.dim))
    else:
        signal = calibrated_signal(
            config.signal_name, config.dim, config.delta, spectrum=spectrum, target=config.signal_target
        )
    if signal.dim != config.dim or spectrum.dim != config.dim:
        raise ValueError("signal or spectrum dimension disagrees with the configured dim")
    stopping = make_stopping_config(
        config.dim,
        config.delta,
        kappa=config.kappa,
        kappa_drift=config.kappa_drift,
        m0_mode=config.m0_mode,
        m0=config.m0,
        level=config.level,
    )
    return ResolvedExperiment(config=config, signal=signal, spectrum=spectrum, noise=noise, stopping=stopping)


@dataclass(frozen=True)
class ReplicationRecord:
    """One procedure's outcome on one simulated observation."""

    rep: int
    procedure: str
    tau: int
    rho: int | None
    immediate: bool
    err_strong: float
    err_weak: float
    eff_strong: float
    eff_weak: float


@dataclass(frozen=True)
class ProcedureSummary:
    """Aggregates of one procedure across all replications."""

    procedure: str
    eff_strong_quartiles: tuple[float, float, float]
    eff_weak_quartiles: tuple[float, float, float]
    eff_strong_mean: float
    eff_weak_mean: float
    immediate_fraction: float
    tau_mean: float

    def as_record(self) -> dict:
        return {
            "procedure": self.procedure,
            "eff_strong_quartiles": list(self.eff_strong_quartiles),
            "eff_weak_quartiles": list(self.eff_weak_quartiles),
            "eff_strong_mean": self.eff_strong_mean,
            "eff_weak_mean": self.eff_weak_mean,
            "immediate_fraction": self.immediate_fraction,
            "tau_mean": self.tau_mean,
        }


@dataclass(frozen=True)
class EfficiencyReport:
    """Experiment outcome: echoed config, oracle indices, and aggregates."""

    config: dict
    oracle: dict
    summaries: tuple[ProcedureSummary, ...]
    records: tuple[ReplicationRecord, ...]
    failures: tuple[tuple[int, str], ...]

    def as_record(self) -> dict:
        return {
            "config": self.config,
            "oracle": self.oracle,
            "procedures": [s.as_record() for s in self.summaries],
            "replications": len({r.rep for r in self.records}),
            "failures": [list(f) for f in self.failures],
        }


def oracle_payload(exp: ResolvedExperiment) -> dict:
    """All oracle quantities for a resolved experiment, as a plain dict."""
    oracles = oracle_set(exp.signal, exp.spectrum, exp.noise, exp.stopping.kappa, exp.stopping.m0)
    weak_index, weak_risk = classical_oracle(exp.signal, exp.spectrum, exp.noise, norm="weak")
    return {
        "balanced_discrete": oracles.balanced_discrete,
        "weak_time": oracles.weak_time,
        "strong_time": oracles.strong_time,
        "proxy_time": oracles.proxy_time,
        "classical_index": oracles.classical_index,
        "classical_risk": oracles.classical_risk,
        "classical_weak_index": weak_index,
        "classical_weak_risk": weak_risk,
        "kappa": oracles.kappa,
        "m0": oracles.m0,
    }


def oracle_indices(config: ExperimentConfig, base_dir: str | Path | None = None) -> OracleSet:
    """Oracle quantities of the configured instance (no simulation)."""
    exp = resolve_experiment(config, base_dir)
    return oracle_set(exp.signal, exp.spectrum, exp.noise, exp.stopping.kappa, exp.stopping.m0)


def _run_one(
    rep: int,
    exp: ResolvedExperiment,
    fixed_index: int,
    numerators: tuple[float, float],
) -> tuple[list[ReplicationRecord], tuple[int, str] | None]:
    cfg = exp.stopping
    mu = exp.signal.coefficients
    lam = exp.spectrum.values
    num_strong, num_weak = numerators
    try:
        obs = simulate_observation(exp.signal, exp.spectrum, exp.noise, replication_seed(exp.config.base_seed, rep))
        tau = stop_index(obs.y, obs.y_norm_sq, cfg)
        immediate = tau == cfg.m0
        records = []
        for proc in exp.config.procedures:
            rho: int | None = None
            if proc == "plain_stop":
                chosen, rec_tau, rec_imm = tau, tau, immediate
            elif proc in ("two_step_weak", "two_step_strong"):
                norm = "weak" if proc == "two_step_weak" else "strong"
                chosen = tau if tau > cfg.m0 else aic_select(obs, exp.spectrum, exp.noise, cfg.m0, norm)
                rho, rec_tau, rec_imm = chosen, tau, immediate
            else:  # fixed_oracle
                chosen, rec_tau, rec_imm = fixed_index, fixed_index, False
            diff = estimate_at(obs, exp.spectrum, float(chosen)).values - mu
            err_strong = math.sqrt(float(np.dot(diff, diff)))
            weighted = lam * diff
            err_weak = math.sqrt(float(np.dot(weighted, weighted)))
            records.append(
                ReplicationRecord(
                    rep=rep,
                    procedure=proc,
                    tau=rec_tau,
                    rho=rho,
                    immediate=rec_imm,
                    err_strong=err_strong,
                    err_weak=err_weak,
                    eff_strong=num_strong / err_strong if err_strong > 0 else math.inf,
                    eff_weak=num_weak / err_weak if err_weak > 0 else math.inf,
                )
            )
        return records, None
    except Exception as exc:  # per-replication failures are recorded, not fatal
        return [], (rep, f"{type(exc).__name__}: {exc}")


def run_experiment(
    config: ExperimentConfig,
    threads: int | None = None,
    csv_path: str | Path | None = None,
    base_dir: str | Path | None = None,
) -> EfficiencyReport:
    """Run all replications and aggregate; optionally write the record CSV.

    ``threads`` enables a thread pool over replications; the output is
    bit-identical for any value because seeds depend only on the
    replication index and records are reduced in index order.
    """
    exp = resolve_experiment(config, base_dir)
    oracle_record = oracle_payload(exp)
    fixed_index = oracle_record["classical_index"]
    numerators = (
        math.sqrt(oracle_record["classical_risk"]),
        math.sqrt(oracle_record["classical_weak_risk"]),
    )

    reps = range(config.replications)
    run = lambda rep: _run_one(rep, exp, fixed_index, numerators)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(run, reps, chunksize=64))
    else:
        outcomes = [run(rep) for rep in reps]

    records: list[ReplicationRecord] = []
    failures: list[tuple[int, str]] = []
    for recs, failure in outcomes:
        records.extend(recs)
        if failure is not None:
            failures.append(failure)

    summaries = tuple(
        _summarise(proc, [r for r in records if r.procedure == proc]) for proc in exp.config.procedures
    )
    report = EfficiencyReport(
        config=config.to_mapping(),
        oracle=oracle_record,
        summaries=summaries,
        records=tuple(records),
        failures=tuple(failures),
    )
    if csv_path is not None:
        write_records_csv(csv_path, report.records, report.config)
    return report


def _summarise(procedure: str, records: list[ReplicationRecord]) -> ProcedureSummary:
    if not records:
        nan3 = (math.nan, math.nan, math.nan)
        return ProcedureSummary(procedure, nan3, nan3, math.nan, math.nan, math.nan, math.nan)
    eff_s = np.array([r.eff_strong for r in records])
    eff_w = np.array([r.eff_weak for r in records])
    qs = tuple(float(q) for q in np.percentile(eff_s, [25, 50, 75]))
    qw = tuple(float(q) for q in np.percentile(eff_w, [25, 50, 75]))
    return ProcedureSummary(
        procedure=procedure,
        eff_strong_quartiles=qs,
        eff_weak_quartiles=qw,
        eff_strong_mean=float(np.mean(eff_s)),
        eff_weak_mean=float(np.mean(eff_w)),
        immediate_fraction=float(np.mean([r.immediate for r in records])),
        tau_mean=float(np.mean([r.tau for r in records])),
    )


def _format_float(value: float) -> str:
    return repr(float(value))


def write_records_csv(path: str | Path, records, config_mapping: dict) -> None:
    """Write replication records with the effective config echoed on top."""
    lines = ["# config=" + json.dumps(config_mapping, sort_keys=True, separators=(",", ":"))]
    lines.append(CSV_HEADER)
    for r in records:
        lines.append(
            ",".join(
                (
                    str(r.rep),
                    str(r.tau),
                    "" if r.rho is None else str(r.rho),
                    str(int(r.immediate)),
                    _format_float(r.err_strong),
                    _format_float(r.err_weak),
                    _format_float(r.eff_strong),
                    _format_float(r.eff_weak),
                    r.procedure,
                )
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_records_csv(path: str | Path) -> tuple[list[ReplicationRecord], dict | None]:
    """Read a record CSV written by :func:`write_records_csv`."""
    text = Path(path).read_text().splitlines()
    config_mapping = None
    start = 0
    if text and text[0].startswith("# config="):
        config_mapping = json.loads(text[0][len("# config=") :])
        start = 1
    if start >= len(text) or text[start] != CSV_HEADER:
        raise ValueError(f"{path}: missing expected CSV header")
    records = []
    for line in text[start + 1 :]:
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 9:
            raise ValueError(f"{path}: malformed CSV row: {line!r}")
        records.append(
            ReplicationRecord(
                rep=int(parts[0]),
                procedure=parts[8],
                tau=int(parts[1]),
                rho=int(parts[2]) if parts[2] else None,
                immediate=bool(int(parts[3])),
                err_strong=float(parts[4]),
                err_weak=float(parts[5]),
                eff_strong=float(parts[6]),
                eff_weak=float(parts[7]),
            )
        )
    return records, config_mapping
