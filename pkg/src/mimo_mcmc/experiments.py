"""Reproducible experiment runners with file outputs.

Every runner is a pure function of (config, seed): reruns give byte-identical
CSV/JSON files whatever the thread count, because all randomness flows
through seeds derived from the config and thread workers only parallelize
across realizations whose results are reduced in index order. Wall-clock time
is kept on the in-memory record only, never written to the output files.
"""

from __future__ import annotations

import dataclasses
import json
import hashlib
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import mmse_detect, run_gibbs_chain, unadjusted_occupancy
from .llr import hard_decision, llr_importance, llr_list
from .model import ChannelSpec, random_instance
from .oracle import (
    build_transition_matrix,
    convergence_rate,
    evolve_distribution,
    exact_llr,
    map_detect,
    stationary_distribution,
    tv_binomial_sigma,
    tv_distance,
    unadjusted_transition_matrix,
)
from .sampler import (
    SamplerConfig,
    chain_occupancy,
    chain_rng,
    default_config,
    run_parallel_chains,
)

__all__ = [
    "EXPERIMENTS",
    "ExperimentConfig",
    "ResultRecord",
    "load_config",
    "config_hash",
    "derive_seed",
    "write_record",
    "read_record",
    "run_tv_curve",
    "run_rate_boxplot",
    "run_ser_sweep",
    "run_llr_fidelity",
    "run_dist_histogram",
    "run_experiment",
]

EXPERIMENTS = ("tv_curve", "rate_boxplot", "ser_sweep", "llr_fidelity", "dist_histogram")
_DETECTORS = ("dmala", "mmse", "map", "gibbs")
_SAMPLER_KEYS = {f.name for f in dataclasses.fields(SamplerConfig)}


@dataclass
class ExperimentConfig:
    """Declarative description of one experiment run.

    `sampler` holds overrides for SamplerConfig fields; anything not given
    falls back to the instance-matched defaults (step sigma^2, scale
    d_min^2/sigma^2, damping sigma^2/(2 d_min^2)). Fields irrelevant to the
    chosen experiment are ignored. output_path never affects results and is
    excluded from the config hash.
    """

    experiment: str
    q: int = 2
    channel_kind: str = "rayleigh"
    nt: int = 2
    nr: int = 2
    rho: float = 0.0
    snr_db_list: tuple = (8.0,)
    n_realizations: int = 100
    n_vectors: int = 10000
    n_chains: int = 100000
    s_grid: tuple = (256, 1024, 4096)
    detectors: tuple = ("dmala", "mmse", "map")
    nmse: float = 0.0
    cutoff: float = 1e-3
    clip: float = 30.0
    sampler: dict = field(default_factory=dict)
    seed: int = 0
    output_path: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if self.q < 2 or (self.q & (self.q - 1)) != 0:
            raise ValueError("q must be a power of two >= 2")
        self.snr_db_list = tuple(float(s) for s in np.atleast_1d(self.snr_db_list))
        if not self.snr_db_list:
            raise ValueError("snr_db_list must be nonempty")
        self.s_grid = tuple(int(s) for s in self.s_grid)
        if any(s < 1 for s in self.s_grid):
            raise ValueError("s_grid entries must be positive")
        self.detectors = tuple(self.detectors)
        unknown = set(self.detectors) - set(_DETECTORS)
        if unknown:
            raise ValueError(f"unknown detectors {sorted(unknown)}; choose from {_DETECTORS}")
        if min(self.n_realizations, self.n_vectors, self.n_chains) < 1:
            raise ValueError("realization, vector, and chain counts must be positive")
        if self.nmse < 0:
            raise ValueError("nmse must be nonnegative")
        if self.cutoff < 0 or self.clip <= 0:
            raise ValueError("cutoff must be nonnegative and clip positive")
        bad = set(self.sampler) - _SAMPLER_KEYS
        if bad:
            raise ValueError(f"unknown sampler keys {sorted(bad)}; choose from {sorted(_SAMPLER_KEYS)}")

    def channel_spec(self) -> ChannelSpec:
        return ChannelSpec(kind=self.channel_kind, nt=self.nt, nr=self.nr, rho=self.rho)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["snr_db_list"] = list(self.snr_db_list)
        out["s_grid"] = list(self.s_grid)
        out["detectors"] = list(self.detectors)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(**data)


def load_config(path: str | Path) -> ExperimentConfig:
    with open(path) as fh:
        return ExperimentConfig.from_dict(json.load(fh))


def config_hash(config: ExperimentConfig) -> str:
    """SHA-256 over the canonical JSON of every semantic field."""
    payload = config.to_dict()
    payload.pop("output_path")
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def derive_seed(*parts: int) -> int:
    """Deterministic child seed hashed from integer coordinates."""
    return int(np.random.SeedSequence(tuple(int(p) for p in parts)).generate_state(1, np.uint64)[0])


def _sampler_config(config: ExperimentConfig, instance, seed: int, **defaults) -> SamplerConfig:
    merged = dict(defaults)
    merged.update(config.sampler)
    merged["seed"] = seed
    return default_config(instance, **merged)


@dataclass
class ResultRecord:
    """One experiment outcome. wall_clock_s stays in memory only."""

    experiment: str
    config_hash: str
    seed: int
    metrics: dict
    wall_clock_s: float | None = None

    def to_json_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "metrics": self.metrics,
        }


def write_record(record: ResultRecord, path: str | Path) -> None:
    Path(path).write_text(json.dumps(record.to_json_dict(), sort_keys=True, indent=2) + "\n")


def read_record(path: str | Path) -> ResultRecord:
    data = json.loads(Path(path).read_text())
    return ResultRecord(
        experiment=data["experiment"],
        config_hash=data["config_hash"],
        seed=data["seed"],
        metrics=data["metrics"],
    )


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path: Path, comment: str, columns: list, rows: list) -> None:
    lines = [f"# {line}" for line in comment.splitlines()]
    lines.append(f"# columns: {', '.join(columns)}")
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _map_indexed(fn, n: int, threads: int) -> list:
    """Apply fn to 0..n-1, results in index order regardless of scheduling."""
    if threads <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n)))


def _out_dir(config: ExperimentConfig, out: str | None) -> Path | None:
    target = out if out is not None else config.output_path
    if target is None:
        return None
    path = Path(target)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _emit(config, out_dir, record, csv_name=None, csv_payload=None, extra_json=None):
    if out_dir is None:
        return
    write_record(record, out_dir / "record.json")
    (out_dir / "config.json").write_text(
        json.dumps(config.to_dict(), sort_keys=True, indent=2) + "\n"
    )
    if csv_payload is not None:
        _write_csv(out_dir / csv_name, *csv_payload)
    for name, payload in (extra_json or {}).items():
        (out_dir / name).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    script = _PLOT_SCRIPTS.get(config.experiment)
    if script:
        (out_dir / f"plot_{config.experiment}.py").write_text(script)


def _late_slope(tv: np.ndarray) -> float:
    """Median step ratio in the last usable decade above the numerical floor."""
    tv = np.asarray(tv)
    positive = tv[tv > 0]
    if positive.size < 3:
        return float("nan")
    floor = max(positive.min(), 1e-14)
    usable = np.where((tv[:-1] >= 10.0 * floor) & (tv[:-1] <= 1e3 * floor) & (tv[1:] > 0))[0]
    if usable.size < 3:
        usable = np.where(tv[:-1] > 0)[0][-10:]
    return float(np.median(tv[usable + 1] / tv[usable]))


def run_tv_curve(config: ExperimentConfig, out: str | None = None, threads: int = 1) -> ResultRecord:
    """Exact vs empirical convergence of the chain toward the target.

    Builds the dense kernel for one realization, takes its spectrum, evolves
    the uniform initialization exactly, and histograms n_chains live chains
    at every sample index. CSV columns: t, tv_exact, tv_empirical.
    """
    started = time.perf_counter()
    rng = np.random.default_rng(np.random.SeedSequence((config.seed, 0)))
    instance = random_instance(config.channel_spec(), config.q, config.snr_db_list[0], rng,
                               nmse=config.nmse)
    scfg = _sampler_config(config, instance, seed=derive_seed(config.seed, 1),
                           temperature=1.0, n_iters=100)
    tm = build_transition_matrix(instance, scfg)
    r, eigs = convergence_rate(tm.p, tm.pi)
    size = tm.space.size
    uniform = np.full(size, 1.0 / size)
    dists = evolve_distribution(tm.p, uniform, scfg.n_iters)
    tv_exact = np.array([tv_distance(d, tm.pi) for d in dists])
    counts = chain_occupancy(instance, scfg, config.n_chains)
    tv_emp = np.array([tv_distance(c / config.n_chains, tm.pi) for c in counts])
    sigma = np.array([tv_binomial_sigma(d, config.n_chains) for d in dists])
    gap = np.abs(tv_emp - tv_exact)
    record = ResultRecord(
        experiment=config.experiment,
        config_hash=config_hash(config),
        seed=config.seed,
        metrics={
            "r": r,
            "r_slope": _late_slope(tv_exact),
            "n_states": size,
            "n_chains": config.n_chains,
            "max_gap_in_sigmas": float((gap / sigma).max()),
            "tv_exact_final": float(tv_exact[-1]),
            "tv_empirical_final": float(tv_emp[-1]),
        },
        wall_clock_s=time.perf_counter() - started,
    )
    rows = [(t + 1, tv_exact[t], tv_emp[t]) for t in range(scfg.n_iters)]
    _emit(
        config,
        _out_dir(config, out),
        record,
        csv_name="tv_curve.csv",
        csv_payload=(
            "total variation to the target, exact kernel evolution vs live chains\n"
            "t is the sample index; t=1 is the uniform initialization",
            ["t", "tv_exact", "tv_empirical"],
            rows,
        ),
        extra_json={"spectrum.json": {"r": r, "eigenvalues": [float(v) for v in eigs]}},
    )
    return record


def run_rate_boxplot(config: ExperimentConfig, out: str | None = None, threads: int = 1) -> ResultRecord:
    """Spectral convergence rates across channel draws, naive vs preconditioned."""
    started = time.perf_counter()
    spec = config.channel_spec()

    def one(job: int):
        si, real = divmod(job, config.n_realizations)
        rng = np.random.default_rng(np.random.SeedSequence((config.seed, si, real)))
        instance = random_instance(spec, config.q, config.snr_db_list[si], rng, nmse=config.nmse)
        out_row = []
        for mode in ("naive", "preconditioned"):
            scfg = _sampler_config(config, instance, seed=0, temperature=1.0, mode=mode)
            tm = build_transition_matrix(instance, scfg)
            r, _ = convergence_rate(tm.p, tm.pi)
            out_row.append(r)
        return out_row

    n_jobs = len(config.snr_db_list) * config.n_realizations
    results = _map_indexed(one, n_jobs, threads)
    rows = []
    summary = {}
    for si, snr in enumerate(config.snr_db_list):
        block = np.array(results[si * config.n_realizations : (si + 1) * config.n_realizations])
        for mi, mode in enumerate(("naive", "preconditioned")):
            for real in range(config.n_realizations):
                rows.append((snr, real, mode, block[real, mi]))
            q0, q1, q2, q3, q4 = np.percentile(block[:, mi], [0, 25, 50, 75, 100])
            summary[f"{snr}dB/{mode}"] = {
                "min": float(q0), "q1": float(q1), "median": float(q2),
                "q3": float(q3), "max": float(q4),
            }
    record = ResultRecord(
        experiment=config.experiment,
        config_hash=config_hash(config),
        seed=config.seed,
        metrics={"summary": summary, "n_realizations": config.n_realizations},
        wall_clock_s=time.perf_counter() - started,
    )
    _emit(
        config,
        _out_dir(config, out),
        record,
        csv_name="rates.csv",
        csv_payload=(
            "second-largest eigenvalue modulus of the exact kernel per channel draw",
            ["snr_db", "realization", "mode", "r"],
            rows,
        ),
    )
    return record


def _complex_symbol_errors(x_hat: np.ndarray, x_true: np.ndarray, nt: int) -> int:
    re_bad = x_hat[:nt] != x_true[:nt]
    im_bad = x_hat[nt:] != x_true[nt:]
    return int((re_bad | im_bad).sum())


def run_ser_sweep(config: ExperimentConfig, out: str | None = None, threads: int = 1) -> ResultRecord:
    """Uncoded symbol/vector error rates, fresh channel per transmitted vector."""
    started = time.perf_counter()
    spec = config.channel_spec()
    detectors = config.detectors
    use_map = "map" in detectors

    def one_snr(si: int):
        snr = config.snr_db_list[si]

        def one_vector(v: int):
            rng = np.random.default_rng(np.random.SeedSequence((config.seed, si, v)))
            instance = random_instance(spec, config.q, snr, rng, nmse=config.nmse)
            truth = instance.true_x
            errs = {}
            for det in detectors:
                if det == "dmala":
                    scfg = _sampler_config(
                        config, instance, seed=derive_seed(config.seed, si, v),
                        temperature=1.0, n_iters=100, n_chains=16,
                    )
                    x_hat = hard_decision(run_parallel_chains(instance, scfg, record="best"))
                elif det == "mmse":
                    x_hat = mmse_detect(instance)
                elif det == "map":
                    x_hat = map_detect(instance)
                elif det == "gibbs":
                    g_rng = chain_rng(derive_seed(config.seed, si, v, 3), 0)
                    n_sweeps = int(config.sampler.get("n_iters", 100))
                    x_hat = hard_decision(run_gibbs_chain(instance, n_sweeps, g_rng))
                errs[det] = (
                    _complex_symbol_errors(x_hat, truth, config.nt),
                    int(np.any(x_hat != truth)),
                )
            return errs

        per_vec = _map_indexed(one_vector, config.n_vectors, threads)
        totals = {det: [0, 0] for det in detectors}
        for errs in per_vec:
            for det, (se, ve) in errs.items():
                totals[det][0] += se
                totals[det][1] += ve
        return totals

    if use_map:
        # Surface the cap early instead of deep inside the vector loop.
        probe = np.random.default_rng(np.random.SeedSequence((config.seed, 0, 0)))
        map_detect(random_instance(spec, config.q, config.snr_db_list[0], probe))

    rows = []
    metrics = {}
    n_sym = config.n_vectors * config.nt
    for si, snr in enumerate(config.snr_db_list):
        totals = one_snr(si)
        for det in detectors:
            se, ve = totals[det]
            ser = se / n_sym
            ver = ve / config.n_vectors
            rows.append((snr, det, config.n_vectors, se, ve, ser, ver))
            metrics[f"{snr}dB/{det}"] = {"ser": ser, "ver": ver,
                                         "symbol_errors": se, "vector_errors": ve}
    record = ResultRecord(
        experiment=config.experiment,
        config_hash=config_hash(config),
        seed=config.seed,
        metrics={"points": metrics, "n_vectors": config.n_vectors},
        wall_clock_s=time.perf_counter() - started,
    )
    _emit(
        config,
        _out_dir(config, out),
        record,
        csv_name="ser.csv",
        csv_payload=(
            "uncoded error rates; ser counts complex symbols, ver whole vectors",
            ["snr_db", "detector", "n_vectors", "symbol_errors", "vector_errors", "ser", "ver"],
            rows,
        ),
    )
    return record


def run_llr_fidelity(config: ExperimentConfig, out: str | None = None, threads: int = 1) -> ResultRecord:
    """Soft-output accuracy against the exhaustive reference across pool sizes.

    One tempered pool of max(s_grid) chains per realization; each S uses its
    first S samples so pools are nested.
    """
    started = time.perf_counter()
    spec = config.channel_spec()
    s_max = max(config.s_grid)
    snr = config.snr_db_list[0]

    def one(real: int):
        rng = np.random.default_rng(np.random.SeedSequence((config.seed, 0, real)))
        instance = random_instance(spec, config.q, snr, rng, nmse=config.nmse)
        exact = exact_llr(instance, clip=config.clip)
        scfg = _sampler_config(
            config, instance, seed=derive_seed(config.seed, real),
            temperature=2.0, n_iters=100, n_chains=s_max,
        )
        pool = run_parallel_chains(instance, scfg)
        per_s = {}
        for s in config.s_grid:
            sub = type(pool)(pool.samples[:s], pool.f_values[:s], pool.source_tau)
            est_is = llr_importance(sub, instance, scfg.temperature, clip=config.clip)
            est_list = llr_list(sub, instance, clip=config.clip)
            per_s[s] = (est_is.llrs, est_list.llrs, exact.llrs)
        return per_s

    results = _map_indexed(one, config.n_realizations, threads)
    rows = []
    agg = {f"{s}/{est}": [] for s in config.s_grid for est in ("is", "list")}
    per_real_means = {f"{s}/{est}": [] for s in config.s_grid for est in ("is", "list")}
    signs = {f"{s}/{est}": [0, 0] for s in config.s_grid for est in ("is", "list")}
    for real, per_s in enumerate(results):
        for s, (l_is, l_list, l_exact) in per_s.items():
            for bit in range(l_exact.size):
                rows.append((real, s, "is", bit, l_is[bit], l_exact[bit]))
                rows.append((real, s, "list", bit, l_list[bit], l_exact[bit]))
            for est, l_hat in (("is", l_is), ("list", l_list)):
                abs_err = np.abs(l_hat - l_exact)
                agg[f"{s}/{est}"].extend(abs_err)
                per_real_means[f"{s}/{est}"].append(float(np.mean(abs_err)))
                confident = np.abs(l_exact) > 2.0
                signs[f"{s}/{est}"][0] += int(
                    (np.sign(l_hat[confident]) == np.sign(l_exact[confident])).sum()
                )
                signs[f"{s}/{est}"][1] += int(confident.sum())
    summary = {}
    for key, errs in agg.items():
        hit, total = signs[key]
        summary[key] = {
            "median_abs_err": float(np.median(errs)),
            "mean_abs_err": float(np.mean(errs)),
            "median_realization_mean_abs_err": float(np.median(per_real_means[key])),
            "sign_agreement_confident": (hit / total) if total else float("nan"),
        }
    record = ResultRecord(
        experiment=config.experiment,
        config_hash=config_hash(config),
        seed=config.seed,
        metrics={"summary": summary, "s_grid": list(config.s_grid)},
        wall_clock_s=time.perf_counter() - started,
    )
    _emit(
        config,
        _out_dir(config, out),
        record,
        csv_name="llr_fidelity.csv",
        csv_payload=(
            "per-bit soft outputs vs the exhaustive reference\n"
            "estimator 'is' reweights all samples, 'list' sums distinct candidates",
            ["realization", "s", "estimator", "bit", "estimate", "exact"],
            rows,
        ),
    )
    return record


def run_dist_histogram(config: ExperimentConfig, out: str | None = None, threads: int = 1) -> ResultRecord:
    """Sampled occupancy after n_iters vs the exact target, with the unadjusted control."""
    started = time.perf_counter()
    rng = np.random.default_rng(np.random.SeedSequence((config.seed, 0)))
    instance = random_instance(config.channel_spec(), config.q, config.snr_db_list[0], rng,
                               nmse=config.nmse)
    scfg = _sampler_config(config, instance, seed=derive_seed(config.seed, 1),
                           temperature=1.0, n_iters=100)
    tm = build_transition_matrix(instance, scfg)
    occ = chain_occupancy(instance, scfg, config.n_chains)[-1] / config.n_chains
    occ_raw = unadjusted_occupancy(instance, scfg, config.n_chains)[-1] / config.n_chains
    raw_stationary = stationary_distribution(unadjusted_transition_matrix(instance, scfg).p)
    record = ResultRecord(
        experiment=config.experiment,
        config_hash=config_hash(config),
        seed=config.seed,
        metrics={
            "tv_adjusted": tv_distance(occ, tm.pi),
            "tv_unadjusted": tv_distance(occ_raw, tm.pi),
            "tv_unadjusted_stationary": tv_distance(raw_stationary, tm.pi),
            "n_states": tm.space.size,
            "n_below_cutoff": int((tm.pi < config.cutoff).sum()),
        },
        wall_clock_s=time.perf_counter() - started,
    )
    rows = [
        (i, tm.pi[i], occ[i], occ_raw[i], int(tm.pi[i] < config.cutoff))
        for i in range(tm.space.size)
    ]
    _emit(
        config,
        _out_dir(config, out),
        record,
        csv_name="dist_histogram.csv",
        csv_payload=(
            "state occupancy after the full run vs the exact target\n"
            f"below_cutoff flags target mass under {config.cutoff}",
            ["state", "pi_exact", "p_adjusted", "p_unadjusted", "below_cutoff"],
            rows,
        ),
    )
    return record


_RUNNERS = {
    "tv_curve": run_tv_curve,
    "rate_boxplot": run_rate_boxplot,
    "ser_sweep": run_ser_sweep,
    "llr_fidelity": run_llr_fidelity,
    "dist_histogram": run_dist_histogram,
}


def run_experiment(config: ExperimentConfig, out: str | None = None, threads: int = 1) -> ResultRecord:
    return _RUNNERS[config.experiment](config, out=out, threads=threads)


_PLOT_HEADER = """\
#!/usr/bin/env python3
# Renders the CSV written next to this script. Requires matplotlib.
import csv
from pathlib import Path

import matplotlib.pyplot as plt


def load(name):
    rows = []
    with open(Path(__file__).parent / name) as fh:
        for row in csv.DictReader(r for r in fh if not r.startswith(\"#\")):
            rows.append(row)
    return rows
"""

_PLOT_SCRIPTS = {
    "tv_curve": _PLOT_HEADER + """

rows = load("tv_curve.csv")
t = [int(r["t"]) for r in rows]
plt.semilogy(t, [float(r["tv_exact"]) for r in rows], label="exact")
plt.semilogy(t, [float(r["tv_empirical"]) for r in rows], ".", label="chains")
plt.xlabel("sample index")
plt.ylabel("TV to target")
plt.legend()
plt.tight_layout()
plt.savefig("tv_curve.png", dpi=150)
""",
    "rate_boxplot": _PLOT_HEADER + """

rows = load("rates.csv")
snrs = sorted({float(r["snr_db"]) for r in rows})
fig, ax = plt.subplots()
for offset, mode in ((-0.5, "naive"), (0.5, "preconditioned")):
    data = [
        [float(r["r"]) for r in rows if r["mode"] == mode and float(r["snr_db"]) == s]
        for s in snrs
    ]
    ax.boxplot(data, positions=[s + offset for s in snrs], widths=0.8)
ax.set_xlabel("SNR (dB), left=naive right=preconditioned")
ax.set_ylabel("convergence rate r")
plt.tight_layout()
plt.savefig("rates.png", dpi=150)
""",
    "ser_sweep": _PLOT_HEADER + """

rows = load("ser.csv")
detectors = sorted({r["detector"] for r in rows})
for det in detectors:
    pts = [(float(r["snr_db"]), float(r["ser"])) for r in rows if r["detector"] == det]
    pts.sort()
    plt.semilogy([p[0] for p in pts], [p[1] for p in pts], "o-", label=det)
plt.xlabel("SNR (dB)")
plt.ylabel("symbol error rate")
plt.legend()
plt.tight_layout()
plt.savefig("ser.png", dpi=150)
""",
    "llr_fidelity": _PLOT_HEADER + """

rows = load("llr_fidelity.csv")
sizes = sorted({int(r["s"]) for r in rows})
for est in ("is", "list"):
    med = []
    for s in sizes:
        errs = [
            abs(float(r["estimate"]) - float(r["exact"]))
            for r in rows
            if r["estimator"] == est and int(r["s"]) == s
        ]
        errs.sort()
        med.append(errs[len(errs) // 2])
    plt.loglog(sizes, med, "o-", label=est)
plt.xlabel("pool size S")
plt.ylabel("median absolute LLR error")
plt.legend()
plt.tight_layout()
plt.savefig("llr_fidelity.png", dpi=150)
""",
    "dist_histogram": _PLOT_HEADER + """

rows = [r for r in load("dist_histogram.csv") if r["below_cutoff"] == "0"]
states = [int(r["state"]) for r in rows]
width = 0.25
for shift, key in ((-1, "pi_exact"), (0, "p_adjusted"), (1, "p_unadjusted")):
    plt.bar([s + shift * width for s in states], [float(r[key]) for r in rows],
            width=width, label=key)
plt.xlabel("state index")
plt.ylabel("probability")
plt.legend()
plt.tight_layout()
plt.savefig("dist_histogram.png", dpi=150)
""",
}
