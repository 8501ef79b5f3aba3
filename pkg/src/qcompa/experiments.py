"""Monte-Carlo sweeps, metrics and their file formats.

A sweep evaluates every requested algorithm on the same channel draw for each
(gamma, bits, trial) point. The channel seed of a point is the SeedSequence
``SeedSequence(seed, spawn_key=(gamma_index, trial))``; converter resolution does
not enter it, so results for different resolutions share their channels.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .baselines import BaselineResult, run_pa, run_qcomp, run_qpercell
from .dual import SolverSettings
from .errors import InfeasibleTargetError, NoConvergenceError, QCompError
from .network import generate_instance, scenario_params
from .primal import BeamformerSet
from .quantization import QuantizerSpec, parse_bits, quantize
from .system import SystemConfig, db_to_linear, watts_to_dbm

log = logging.getLogger(__name__)

CSV_HEADER = ("scenario", "algorithm", "bits", "gamma_db", "trial",
              "p0_dbm", "total_dbm", "papr_db", "converged")
SWEEP_ALGORITHMS = ("qcomp_pa", "qcomp", "qpercell")
PAPR_ESTIMATORS = ("spatial", "temporal", "temporal_unquantized")
ENV_SEED = "QCOMPA_SEED"
ENV_THREADS = "QCOMPA_THREADS"
NARROWBAND_FRAME = 256


# ---------------------------------------------------------------------------
# metrics


def waveform_papr_db(samples, axis: int = 0) -> np.ndarray:
    """Peak over mean instantaneous power along ``axis``, in dB."""
    p = np.abs(np.asarray(samples)) ** 2
    mean = p.mean(axis=axis)
    with np.errstate(divide="ignore", invalid="ignore"):
        return 10.0 * np.log10(p.max(axis=axis) / mean)


def compute_papr(W: BeamformerSet | np.ndarray, spec: QuantizerSpec, symbol_draws: int = 200,
                 seed=0, estimator: str = "spatial") -> float:
    """Peak-to-average power ratio of a precoder set in dB.

    ``spatial``: peak over mean of the per-antenna average powers across the
    network. ``temporal``: draw unit Gaussian symbols, form the time-domain
    OFDM signal of every antenna, quantize it, and average the per-antenna,
    per-symbol max/mean power ratio in dB over antennas, cells and draws.
    ``temporal_unquantized`` skips the quantizer. With a single subcarrier the
    temporal peak is taken over a frame of at least 256 draws.

    Antennas without power are excluded with a warning.
    """
    w = W.w if isinstance(W, BeamformerSet) else np.asarray(W, dtype=complex)
    if w.ndim != 4:
        raise ValueError("precoders must be shaped (N_c, N_u, K, N_b)")
    if estimator not in PAPR_ESTIMATORS:
        raise ValueError(f"unknown PAPR estimator {estimator!r}")
    n_cells, n_users, n_sub, n_ant = w.shape
    power = np.sum(np.abs(w) ** 2, axis=(1, 2)) / n_sub  # (N_c, N_b)
    live = power > 0
    if not live.any():
        raise ValueError("all antennas are silent")
    if not live.all():
        warnings.warn(f"{int((~live).sum())} zero-power antennas excluded from PAPR",
                      RuntimeWarning, stacklevel=2)
    if estimator == "spatial":
        p = power[live]
        return float(10.0 * np.log10(p.max() / p.mean()))
    if symbol_draws < 100:
        raise ValueError("symbol_draws must be at least 100")

    rng = np.random.default_rng(seed)
    draws = max(symbol_draws, NARROWBAND_FRAME) if n_sub == 1 else symbol_draws
    shape = (draws, n_cells, n_users, n_sub)
    s = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    X = np.einsum("cukm,dcuk->dckm", w, s)
    x = np.fft.ifft(X, axis=2, norm="ortho")  # (draw, cell, time, antenna)
    if estimator == "temporal" and not spec.is_ideal:
        var = np.where(live, power, 1.0)[None, :, None, :]
        x = quantize(x, spec, var)
    if n_sub == 1:
        # one frame: peak and mean over draws
        return float(np.mean(waveform_papr_db(x[:, :, 0, :], axis=0)[live]))
    papr = waveform_papr_db(x, axis=2)
    keep = np.broadcast_to(live, papr.shape) & np.isfinite(papr)
    return float(np.mean(papr[keep]))


def empirical_cdf(samples) -> list[tuple[float, float]]:
    """Sorted (value, fraction <= value) pairs."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise ValueError("empirical CDF of an empty sample")
    frac = np.arange(1, x.size + 1) / x.size
    return [(float(v), float(f)) for v, f in zip(x, frac)]


# ---------------------------------------------------------------------------
# sweep description


@dataclass(frozen=True)
class SweepSpec:
    scenario: str = "wideband"
    n_antennas: int = 8
    n_cells: int = 3
    n_users: int = 2
    n_subcarriers: int = 16
    bits: tuple = (3, math.inf)
    gamma_db: tuple = (-5.0, -1.0, 2.0)
    trials: int = 10
    seed: int = 0
    algorithms: tuple = SWEEP_ALGORITHMS
    settings: dict = field(default_factory=dict)
    qpercell_objective: str = "total"
    papr_estimator: str = "spatial"
    papr_draws: int = 200
    threads: int = 1
    write_trials: bool = False

    def __post_init__(self):
        scenario_params(self.scenario)
        for name in ("n_antennas", "n_cells", "n_users", "n_subcarriers"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if len(self.gamma_db) == 0:
            raise ValueError("gamma_db must not be empty")
        if len(self.bits) == 0:
            raise ValueError("bits must not be empty")
        object.__setattr__(self, "bits", tuple(parse_bits(b) for b in self.bits))
        object.__setattr__(self, "gamma_db", tuple(float(g) for g in self.gamma_db))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        for alg in self.algorithms:
            if alg not in SWEEP_ALGORITHMS:
                raise ValueError(f"unknown algorithm {alg!r}; choose from {SWEEP_ALGORITHMS}")
        if self.papr_estimator not in PAPR_ESTIMATORS:
            raise ValueError(f"unknown PAPR estimator {self.papr_estimator!r}")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        self.solver_settings()  # validates overrides

    def solver_settings(self) -> SolverSettings:
        known = {f.name for f in fields(SolverSettings)}
        unknown = set(self.settings) - known
        if unknown:
            raise ValueError(f"unknown solver settings: {sorted(unknown)}")
        return SolverSettings(**self.settings)

    @classmethod
    def from_dict(cls, data: dict) -> "SweepSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        for key in ("bits", "gamma_db", "algorithms"):
            if key in data:
                value = data[key]
                data[key] = tuple(value) if isinstance(value, (list, tuple)) else (value,)
        return cls(**data)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["bits"] = [_bits_label(b) for b in self.bits]
        out["gamma_db"] = list(self.gamma_db)
        out["algorithms"] = list(self.algorithms)
        return out

    def with_env(self, environ=None) -> "SweepSpec":
        """Apply the seed and thread-count environment overrides."""
        env = os.environ if environ is None else environ
        changes = {}
        if env.get(ENV_SEED):
            changes["seed"] = int(env[ENV_SEED])
        if env.get(ENV_THREADS):
            changes["threads"] = int(env[ENV_THREADS])
        return replace(self, **changes) if changes else self


def load_sweep_spec(path) -> SweepSpec:
    return SweepSpec.from_dict(json.loads(Path(path).read_text()))


PRESETS = {
    "wideband-desk": SweepSpec(),
    "narrowband-desk": SweepSpec(scenario="narrowband", n_subcarriers=1, bits=(3,),
                                 gamma_db=(-3.0, 2.0)),
    "wideband-full-3cell": SweepSpec(n_antennas=32, n_cells=3, n_subcarriers=64,
                                     gamma_db=(-5.0, -3.0, -1.0, 1.0, 3.0, 5.0)),
    "wideband-full-4cell": SweepSpec(n_antennas=32, n_cells=4, n_subcarriers=64,
                                     gamma_db=(-5.0, -3.0, -1.0, 1.0, 3.0, 5.0)),
    "wideband-papr-16": SweepSpec(n_antennas=16, n_cells=4, n_subcarriers=64, bits=(3,),
                                  gamma_db=(-5.0, 1.0)),
    "wideband-papr-32": SweepSpec(n_antennas=32, n_cells=4, n_subcarriers=64, bits=(3,),
                                  gamma_db=(-5.0, 1.0)),
    "narrowband-full-2cell": SweepSpec(scenario="narrowband", n_antennas=32, n_cells=2,
                                       n_subcarriers=1, bits=(3,), gamma_db=(-3.0, 2.0)),
    "narrowband-full-4cell": SweepSpec(scenario="narrowband", n_antennas=32, n_cells=4,
                                       n_subcarriers=1, bits=(3,), gamma_db=(-3.0, 2.0)),
}


# ---------------------------------------------------------------------------
# records and CSV


def _bits_label(bits) -> str:
    return "inf" if math.isinf(bits) else str(int(bits))


def _fmt(x: float) -> str:
    return repr(float(x))


@dataclass(frozen=True, eq=False)
class MetricRecord:
    scenario: str
    algorithm: str
    bits: float
    gamma_db: float
    trial: int
    p0_dbm: float
    total_dbm: float
    papr_db: float
    converged: bool
    antenna_powers_dbm: tuple = field(default=(), compare=False)
    status: str = field(default="ok", compare=False)

    @property
    def key(self):
        return (self.scenario, self.algorithm, self.bits, self.gamma_db, self.trial)

    # equality over the CSV columns, so records with NaN powers still compare
    def __eq__(self, other):
        if not isinstance(other, MetricRecord):
            return NotImplemented
        return self.csv_row() == other.csv_row()

    def __hash__(self):
        return hash(tuple(self.csv_row()))

    def csv_row(self) -> list[str]:
        return [self.scenario, self.algorithm, _bits_label(self.bits), _fmt(self.gamma_db),
                str(self.trial), _fmt(self.p0_dbm), _fmt(self.total_dbm), _fmt(self.papr_db),
                "true" if self.converged else "false"]

    def to_dict(self) -> dict:
        out = {name: getattr(self, name) for name in CSV_HEADER}
        out["bits"] = _bits_label(self.bits)
        for name in ("p0_dbm", "total_dbm", "papr_db"):
            if math.isnan(out[name]):
                out[name] = None
        out["antenna_powers_dbm"] = list(self.antenna_powers_dbm)
        out["status"] = self.status
        return out


def emit_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for rec in sorted(records, key=lambda r: r.key):
        writer.writerow(rec.csv_row())
    return buf.getvalue()


def parse_csv(text: str) -> list[MetricRecord]:
    reader = csv.reader(io.StringIO(text))
    header = tuple(next(reader))
    if header != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {header}")
    out = []
    for row in reader:
        if not row:
            continue
        scen, alg, bits, gamma, trial, p0, total, papr, conv = row
        if conv not in ("true", "false"):
            raise ValueError(f"bad converged flag {conv!r}")
        out.append(MetricRecord(scen, alg, parse_bits(bits), float(gamma), int(trial),
                                float(p0), float(total), float(papr), conv == "true"))
    return out


def _record(spec: SweepSpec, alg: str, bits, gamma_db: float, trial: int,
            result: BaselineResult | None, status: str, papr_seed=0) -> MetricRecord:
    if result is None:
        return MetricRecord(spec.scenario, alg, bits, gamma_db, trial, math.nan, math.nan,
                            math.nan, False, (), status)
    with np.errstate(divide="ignore"):
        ap = tuple(float(v) for v in watts_to_dbm(result.report.antenna_power).ravel())
    papr = compute_papr(result.beamformers, result.config.quantizer, spec.papr_draws,
                        seed=papr_seed,
                        estimator=spec.papr_estimator)
    return MetricRecord(spec.scenario, alg, bits, gamma_db, trial, max(ap),
                        float(watts_to_dbm(result.report.total_power)), papr,
                        bool(result.converged), ap, status)


# ---------------------------------------------------------------------------
# sweep execution


def trial_seed(seed: int, gamma_index: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(gamma_index, trial))


def run_algorithm(alg: str, config: SystemConfig, channels, settings: SolverSettings,
                  qpercell_objective: str = "total") -> BaselineResult:
    if alg == "qcomp_pa":
        return run_pa(config, channels, settings)
    if alg == "qcomp":
        return run_qcomp(config, channels, settings)
    if alg == "qpercell":
        return run_qpercell(config, channels, settings, objective=qpercell_objective)
    raise ValueError(f"unknown algorithm {alg!r}")


def _run_point(args):
    spec, gamma_index, trial = args
    params = scenario_params(spec.scenario)
    gamma_db = spec.gamma_db[gamma_index]
    _, channels = generate_instance(spec.n_cells, spec.n_users, spec.n_antennas,
                                    spec.n_subcarriers, params,
                                    trial_seed(spec.seed, gamma_index, trial))
    settings = spec.solver_settings()
    records, reports = [], []
    for bits in spec.bits:
        config = SystemConfig(spec.n_cells, spec.n_users, spec.n_antennas, spec.n_subcarriers,
                              bits, params.noise_power_w(), float(db_to_linear(gamma_db)))
        for alg in spec.algorithms:
            try:
                res = run_algorithm(alg, config, channels, settings, spec.qpercell_objective)
                status = "diverged" if res.diverged else ("ok" if res.converged else "unconverged")
            except InfeasibleTargetError:
                res, status = None, "infeasible"
            except (NoConvergenceError, QCompError) as exc:
                log.warning("%s failed at gamma=%s trial=%d: %s", alg, gamma_db, trial, exc)
                res, status = None, "failed"
            papr_seed = np.random.SeedSequence(spec.seed, spawn_key=(gamma_index, trial, 1))
            rec = _record(spec, alg, bits, gamma_db, trial, res, status, papr_seed)
            records.append(rec)
            if spec.write_trials and res is not None:
                reports.append((rec.key, res.to_dict()))
    return records, reports


@dataclass
class SweepResult:
    spec: SweepSpec
    records: list
    trial_reports: list = field(default_factory=list)

    def summary(self) -> list[dict]:
        return summarize(self.records)


def run_sweep(spec: SweepSpec) -> SweepResult:
    tasks = [(spec, gi, t) for gi in range(len(spec.gamma_db)) for t in range(spec.trials)]
    if spec.threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=spec.threads) as pool:
            outputs = list(pool.map(_run_point, tasks))
    else:
        outputs = [_run_point(t) for t in tasks]
    records = [r for recs, _ in outputs for r in recs]
    reports = [r for _, reps in outputs for r in reps]
    records.sort(key=lambda r: r.key)
    reports.sort(key=lambda kv: kv[0])
    return SweepResult(spec, records, reports)


def summarize(records) -> list[dict]:
    """Per (scenario, algorithm, bits, gamma) aggregates over converged trials."""
    groups: dict = {}
    for rec in records:
        groups.setdefault(rec.key[:4], []).append(rec)
    out = []
    for key in sorted(groups):
        recs = groups[key]
        ok = [r for r in recs if r.converged]
        p0 = np.array([r.p0_dbm for r in ok])
        row = {
            "scenario": key[0],
            "algorithm": key[1],
            "bits": _bits_label(key[2]),
            "gamma_db": key[3],
            "trials": len(recs),
            "converged": len(ok),
            "infeasible": sum(r.status == "infeasible" for r in recs),
            "diverged": sum(r.status == "diverged" for r in recs),
            "flagged": len(ok) == 0,
            "mean_p0_dbm": float(p0.mean()) if ok else None,
            "median_p0_dbm": float(np.median(p0)) if ok else None,
            "mean_total_dbm": float(np.mean([r.total_dbm for r in ok])) if ok else None,
            "mean_papr_db": float(np.mean([r.papr_db for r in ok])) if ok else None,
        }
        out.append(row)
    return out


def _tag(x: float) -> str:
    return f"{x:g}".replace("-", "m").replace(".", "p")


def write_outputs(result: SweepResult, out_dir) -> list[Path]:
    """CSV, summary JSON, plot-ready data files and optional per-trial JSON."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def put(name: str, text: str):
        path = out / name
        path.write_text(text)
        written.append(path)

    put("records.csv", emit_csv(result.records))
    put("summary.json", json.dumps({"spec": result.spec.to_dict(), "summary": result.summary()},
                                   indent=2, sort_keys=True) + "\n")
    for row in _curve_rows(result.summary()):
        (alg, bits), lines = row
        put(f"p0_vs_gamma_{alg}_b{bits}.dat", "# gamma_db mean_p0_dbm\n" + "".join(lines))
    pooled: dict = {}
    for rec in result.records:
        if rec.converged:
            pooled.setdefault((rec.algorithm, _bits_label(rec.bits), rec.gamma_db), []).extend(
                v for v in rec.antenna_powers_dbm if math.isfinite(v))
    for (alg, bits, gamma), values in sorted(pooled.items()):
        if values:
            lines = "".join(f"{_fmt(v)} {_fmt(f)}\n" for v, f in empirical_cdf(values))
            put(f"cdf_{alg}_b{bits}_g{_tag(gamma)}.dat", "# antenna_power_dbm fraction\n" + lines)
    if result.spec.write_trials:
        tdir = out / "trials"
        tdir.mkdir(exist_ok=True)
        for key, report in result.trial_reports:
            scen, alg, bits, gamma, trial = key
            name = f"trials/{scen}_{alg}_b{_bits_label(bits)}_g{_tag(gamma)}_t{trial}.json"
            put(name, json.dumps(report, sort_keys=True) + "\n")
    return written


def _curve_rows(summary):
    curves: dict = {}
    for row in summary:
        if row["mean_p0_dbm"] is not None:
            curves.setdefault((row["algorithm"], row["bits"]), []).append(
                f"{_fmt(row['gamma_db'])} {_fmt(row['mean_p0_dbm'])}\n")
    return sorted(curves.items())
