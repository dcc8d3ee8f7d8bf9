"""Seeded Monte-Carlo experiments, named presets and result emission.

A config describes one ensemble/dimension/prior setting and a set of
algorithms. Each trial draws its own matrix, signal and noise from
``SeedSequence([seed, trial, stage])``, so the result does not depend on how
trials are spread over workers. All algorithms in a trial share the draw.
"""

import csv
import dataclasses
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .denoisers import MMSE, BetaFamily, DFDenoiser, SoftThreshold
from .ensembles import (GEOMETRIC, IID_GAUSSIAN, PARTIAL_ORTHOGONAL, EnsembleSpec,
                        geometric_singular_values, sample_matrix)
from .linest import KINDS, LMMSE
from .model import LinearSystem, Prior, make_observation, sample_signal
from .sevo import SpectralModel, run_se_oamp, se_accuracy, se_amp
from .solvers import run_amp, run_oamp

__all__ = [
    "ExperimentConfig",
    "ResultRow",
    "PTCRow",
    "ExperimentResult",
    "PRESETS",
    "preset",
    "load_config",
    "config_from_dict",
    "config_to_dict",
    "nominal_sigma2",
    "se_curves",
    "run_experiment",
    "phase_transition",
    "PTCConfig",
    "emit",
    "read_rows",
]

AMP = "AMP"
ALGORITHMS = (AMP,) + tuple(f"OAMP-{k}" for k in KINDS)
STAGE_MATRIX, STAGE_SIGNAL, STAGE_NOISE = 0, 1, 2


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment.

    ``denoiser`` is a dict: ``{"kind": "mmse"}``,
    ``{"kind": "soft", "C": [1, 2, 3], "gamma_scale": 1.0}`` (threshold
    gamma_scale * tau; C is used by OAMP only) or
    ``{"kind": "beta", "betas": [...], "gamma_scale": 1.0}`` (AMP only).
    ``se`` is "auto" (closed form for IID Gaussian, the deterministic
    spectrum otherwise) or "asymptotic". ``amp_se`` lists the AMP
    state-evolution variants to report ("standard", "partial").
    ``sigma2`` overrides ``snr_db`` when given.
    """

    name: str = "experiment"
    ensemble: EnsembleSpec = EnsembleSpec()
    N: int = 1024
    M: Optional[int] = None
    m_ratio: float = 0.5
    prior: Prior = Prior.bernoulli_gaussian(0.1)
    snr_db: Optional[float] = 50.0
    sigma2: Optional[float] = None
    algorithms: tuple = ("OAMP-LMMSE",)
    denoiser: dict = field(default_factory=lambda: {"kind": "mmse"})
    T: int = 30
    trials: int = 10
    seed: int = 0
    se: str = "auto"
    amp_se: tuple = ("standard",)
    amp_tau_rule: str = "residual"
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if not (1 <= self.dims[1] <= self.N):
            raise ValueError(f"need 1 <= M <= N, got M={self.dims[1]}, N={self.N}")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {a!r}; choose from {ALGORITHMS}")
        kind = self.denoiser.get("kind")
        if kind not in ("mmse", "soft", "beta"):
            raise ValueError(f"unknown denoiser kind {kind!r}")
        if kind == "beta" and any(a != AMP for a in self.algorithms):
            raise ValueError("the beta family is an AMP denoiser")
        if self.snr_db is None and self.sigma2 is None:
            raise ValueError("give snr_db or sigma2")
        if self.se not in ("auto", "asymptotic"):
            raise ValueError(f"unknown se mode {self.se!r}")
        for v in self.amp_se:
            if v not in ("standard", "partial"):
                raise ValueError(f"unknown AMP SE variant {v!r}")

    @property
    def dims(self):
        M = self.M if self.M is not None else int(round(self.m_ratio * self.N))
        return self.N, M


@dataclass
class ResultRow:
    experiment: str
    trial: Union[int, str]
    iteration: int
    algorithm: str
    mse_sim: float
    mse_se: float
    E_metric: float
    v2_hat: float
    tau2_hat: float
    seed: int


@dataclass
class PTCRow:
    experiment: str
    m_ratio: float
    k_ratio: float
    algorithm: str
    success: float
    trials: int
    seed: int


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list
    status: dict

    def curve(self, algorithm, column="mse_sim", trial="mean"):
        pts = [(r.iteration, getattr(r, column)) for r in self.rows
               if r.algorithm == algorithm and r.trial == trial]
        return np.array([v for _, v in sorted(pts)], dtype=float)

    @property
    def algorithms(self):
        return list(dict.fromkeys(r.algorithm for r in self.rows))


# ---------------------------------------------------------------------------
# config plumbing

def _ensemble_from(d):
    if isinstance(d, EnsembleSpec):
        return d
    if isinstance(d, str):
        d = {"kind": d}
    return EnsembleSpec(**d)


def _prior_from(d):
    if isinstance(d, Prior):
        return d
    if isinstance(d, str):
        d = {"kind": d}
    return Prior(**d)


def config_from_dict(d):
    d = dict(d)
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    extra = set(d) - known
    if extra:
        raise ValueError(f"unknown config keys: {sorted(extra)}")
    if "ensemble" in d:
        d["ensemble"] = _ensemble_from(d["ensemble"])
    if "prior" in d:
        d["prior"] = _prior_from(d["prior"])
    for k in ("algorithms", "amp_se"):
        if k in d:
            d[k] = (d[k],) if isinstance(d[k], str) else tuple(d[k])
    return ExperimentConfig(**d)


def config_to_dict(cfg):
    d = dataclasses.asdict(cfg)
    d["algorithms"] = list(cfg.algorithms)
    d["amp_se"] = list(cfg.amp_se)
    return d


def load_config(path):
    """Read a JSON file holding one config, a list of configs, or a PTC config."""
    with open(path) as fh:
        data = json.load(fh)
    if isinstance(data, dict) and data.get("type") == "ptc":
        return PTCConfig.from_dict(data)
    if isinstance(data, dict):
        data = [data]
    return [config_from_dict(d) for d in data]


def nominal_trace(spec, M, N):
    """E tr(A^T A) for the ensemble; deterministic except for IID Gaussian."""
    if spec.kind == GEOMETRIC:
        lam = geometric_singular_values(M, N, spec.kappa, spec.normalization, spec.exact_kappa)
        return float(np.sum(lam ** 2))
    return float(N)


def nominal_sigma2(cfg):
    """Noise variance giving E||Ax||^2 / E||n||^2 = 10^(snr_db/10)."""
    if cfg.sigma2 is not None:
        return float(cfg.sigma2)
    N, M = cfg.dims
    tr = nominal_trace(cfg.ensemble, M, N)
    return tr * cfg.prior.second_moment / (M * 10.0 ** (cfg.snr_db / 10.0))


def _spectral_model(cfg):
    N, M = cfg.dims
    spec = cfg.ensemble
    if spec.kind == IID_GAUSSIAN:
        return SpectralModel.iid_gaussian(N / M)
    if spec.kind == PARTIAL_ORTHOGONAL:
        if cfg.se == "asymptotic":
            return SpectralModel.partial_orthogonal(N / M)
        lam2 = np.zeros(N)
        lam2[:M] = N / M
        return SpectralModel.empirical(lam2)
    lam = geometric_singular_values(M, N, spec.kappa, spec.normalization, spec.exact_kappa)
    lam2 = np.zeros(N)
    lam2[:M] = lam ** 2
    return SpectralModel.empirical(lam2)


def _variants(cfg):
    """(label, algorithm, denoiser, output denoiser) for every run in a trial."""
    prior = cfg.prior
    dn = cfg.denoiser
    kind = dn["kind"]
    scale = float(dn.get("gamma_scale", 1.0))
    out = []
    for alg in cfg.algorithms:
        if alg == AMP:
            if kind == "mmse":
                out.append((AMP, alg, MMSE(prior), None))
            elif kind == "soft":
                out.append((AMP, alg, SoftThreshold(scale), None))
            else:
                for b in dn["betas"]:
                    out.append((f"AMP[beta={b:g}]", alg, BetaFamily(float(b), SoftThreshold(scale)),
                                None))
            continue
        if kind == "mmse":
            out.append((alg, alg, DFDenoiser(MMSE(prior)), MMSE(prior)))
        else:
            for C in dn.get("C", (1.0, 2.0, 3.0)):
                out.append((f"{alg}[C={C:g}]", alg, DFDenoiser(SoftThreshold(scale), float(C)),
                            SoftThreshold(scale)))
    return out


def se_curves(cfg):
    """Predicted per-iteration MSE (and v2, tau2) for each run label."""
    N, M = cfg.dims
    sigma2 = nominal_sigma2(cfg)
    spec = _spectral_model(cfg)
    curves = {}
    for label, alg, den, outd in _variants(cfg):
        if alg == AMP:
            for v in cfg.amp_se:
                st = se_amp(cfg.prior, den, N / M, sigma2, T=cfg.T, variant=v)
                key = label if len(cfg.amp_se) == 1 else f"{label}|se={v}"
                curves[key] = (label, st)
        else:
            st = run_se_oamp(spec, cfg.prior, le=alg.split("-", 1)[1], df=den, out=outd,
                             sigma2=sigma2, T=cfg.T)
            curves[label] = (label, st)
    return curves


# ---------------------------------------------------------------------------
# trials

def _rng(seed, trial, stage):
    return np.random.default_rng(np.random.SeedSequence([seed, trial, stage]))


def _draw(cfg, trial):
    N, M = cfg.dims
    A = sample_matrix(cfg.ensemble, M, N, _rng(cfg.seed, trial, STAGE_MATRIX))
    x = sample_signal(cfg.prior, N, _rng(cfg.seed, trial, STAGE_SIGNAL))
    sigma2 = nominal_sigma2(cfg)
    y = make_observation(A, x, sigma2, _rng(cfg.seed, trial, STAGE_NOISE))
    return LinearSystem(A, y, sigma2, x_true=x)


def _run_trial(args):
    cfg, trial = args
    system = _draw(cfg, trial)
    res = {}
    for label, alg, den, outd in _variants(cfg):
        try:
            if alg == AMP:
                tr = run_amp(system, den, T=cfg.T, tau_rule=cfg.amp_tau_rule)
            else:
                tr = run_oamp(system, den, out=outd, le_kind=alg.split("-", 1)[1], T=cfg.T,
                              tol=0.0)
            status = tr.status
            cols = {k: tr.padded(k, cfg.T) for k in ("mse_out", "v2_hat", "tau2_hat")}
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            status = f"error: {exc}"
            cols = {k: np.full(cfg.T, np.nan) for k in ("mse_out", "v2_hat", "tau2_hat")}
        res[label] = (status, cols)
    return res


def _map_trials(fn, jobs, workers):
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, jobs))
    return [fn(j) for j in jobs]


def run_experiment(cfg, workers=None):
    """Run all trials of ``cfg``; returns per-trial and mean rows.

    Solver failures are recorded in ``result.status`` and leave NaN rows;
    they do not abort the experiment.
    """
    workers = cfg.workers if workers is None else workers
    curves = se_curves(cfg)
    per_trial = _map_trials(_run_trial, [(cfg, t) for t in range(cfg.trials)], workers)

    rows, status = [], {}
    T = cfg.T
    for key, (label, st) in curves.items():
        se = st.padded("mse_out", T)
        for trial, res in enumerate(per_trial):
            s, cols = res[label]
            status[(key, trial)] = s
            with np.errstate(divide="ignore", invalid="ignore"):
                E = se_accuracy(cols["mse_out"], se)
            for t in range(T):
                rows.append(ResultRow(cfg.name, trial, t, key, float(cols["mse_out"][t]),
                                      float(se[t]), float(E[t]), float(cols["v2_hat"][t]),
                                      float(cols["tau2_hat"][t]), cfg.seed))
        stack = {k: np.stack([res[label][1][k] for res in per_trial]) for k in
                 ("mse_out", "v2_hat", "tau2_hat")}
        mean = {k: v.mean(axis=0) for k, v in stack.items()}
        with np.errstate(divide="ignore", invalid="ignore"):
            E = se_accuracy(mean["mse_out"], se)
        for t in range(T):
            rows.append(ResultRow(cfg.name, "mean", t, key, float(mean["mse_out"][t]),
                                  float(se[t]), float(E[t]), float(mean["v2_hat"][t]),
                                  float(mean["tau2_hat"][t]), cfg.seed))
    return ExperimentResult(cfg, rows, status)


def se_rows(cfg):
    """State-evolution rows only; no sampling."""
    rows = []
    for key, (label, st) in se_curves(cfg).items():
        mse = st.padded("mse_out", cfg.T)
        v2 = st.padded("v2", cfg.T)
        tau2 = st.padded("tau2", cfg.T)
        for t in range(cfg.T):
            rows.append(ResultRow(cfg.name, "se", t, key, math.nan, float(mse[t]), math.nan,
                                  float(v2[t]), float(tau2[t]), cfg.seed))
    return rows


# ---------------------------------------------------------------------------
# phase transition

@dataclass(frozen=True)
class PTCConfig:
    name: str = "ptc"
    N: int = 512
    m_ratios: tuple = tuple(np.round(np.linspace(0.05, 0.95, 10), 10))
    k_ratios: tuple = tuple(np.round(np.linspace(0.05, 0.95, 10), 10))
    threshold: float = 1e-4
    trials: int = 20
    T: int = 50
    seed: int = 0
    ortho_kind: str = "DCT"
    oamp_le: str = LMMSE
    workers: int = 1

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")
        if self.trials < 1 or self.T < 1:
            raise ValueError("trials and T must be >= 1")

    @property
    def grid(self):
        return [(m, k) for m in self.m_ratios for k in self.k_ratios]

    @classmethod
    def from_dict(cls, d):
        d = {k: v for k, v in d.items() if k != "type"}
        for k in ("m_ratios", "k_ratios"):
            if k in d:
                d[k] = tuple(float(v) for v in d[k])
        return cls(**d)


def _nmse(xh, x):
    if xh is None or not np.all(np.isfinite(xh)):
        return math.inf
    return float(np.sum((xh - x) ** 2) / np.sum(x ** 2))


def _ptc_trial(args):
    cfg, (mr, kr), trial = args
    N = cfg.N
    M = max(1, int(round(mr * N)))
    rho = min(kr * M / N, 1.0)
    prior = Prior.bernoulli_gaussian(rho)
    # the grid point index is folded into the stream so points are independent
    key = int(round(mr * 1e6)), int(round(kr * 1e6))
    gen = [np.random.default_rng(np.random.SeedSequence([cfg.seed, *key, trial, s]))
           for s in (STAGE_MATRIX, STAGE_SIGNAL)]
    A = sample_matrix(EnsembleSpec.partial_orthogonal(cfg.ortho_kind), M, N, gen[0])
    x = sample_signal(prior, N, gen[1])
    if not np.any(x):
        x[gen[1].integers(N)] = gen[1].standard_normal() / math.sqrt(rho)
    system = LinearSystem(A, A.apply(x), 0.0, x_true=x)
    ok = {}
    tr = run_amp(system, MMSE(prior), T=cfg.T)
    ok[AMP] = _nmse(tr.x_hat, x) < cfg.threshold
    try:
        tr = run_oamp(system, DFDenoiser(MMSE(prior)), le_kind=cfg.oamp_le, T=cfg.T)
        ok["OAMP-" + cfg.oamp_le] = _nmse(tr.x_hat, x) < cfg.threshold
    except (ValueError, np.linalg.LinAlgError):
        ok["OAMP-" + cfg.oamp_le] = False
    return ok


def phase_transition(cfg, workers=None):
    """Noiseless success fractions (final NMSE < threshold) on a partial DCT grid."""
    workers = cfg.workers if workers is None else workers
    jobs = [(cfg, pt, t) for pt in cfg.grid for t in range(cfg.trials)]
    res = _map_trials(_ptc_trial, jobs, workers)
    rows = []
    for i, (mr, kr) in enumerate(cfg.grid):
        chunk = res[i * cfg.trials:(i + 1) * cfg.trials]
        for alg in chunk[0]:
            frac = sum(bool(c[alg]) for c in chunk) / cfg.trials
            rows.append(PTCRow(cfg.name, float(mr), float(kr), alg, frac, cfg.trials, cfg.seed))
    return rows


# ---------------------------------------------------------------------------
# presets

def _fig1():
    base = dict(N=2048, m_ratio=0.7, prior=Prior.bernoulli_gaussian(0.4), snr_db=50.0,
                algorithms=(AMP,), T=50, trials=50,
                denoiser={"kind": "beta", "betas": [round(0.1 * i, 1) for i in range(11)]})
    return [ExperimentConfig(name="fig1-iid", ensemble=EnsembleSpec.iid_gaussian(), **base),
            ExperimentConfig(name="fig1-dct", ensemble=EnsembleSpec.partial_orthogonal("DCT"),
                             amp_se=("standard", "partial"), **base)]


def _fig2():
    return [ExperimentConfig(name="fig2", ensemble=EnsembleSpec.iid_gaussian(), N=2048,
                             m_ratio=0.65, prior=Prior.bpsk(), snr_db=14.0,
                             algorithms=ALGORITHMS, T=20, trials=100)]


def _fig3():
    return [ExperimentConfig(name="fig3", ensemble=EnsembleSpec.geometric(5.0), N=1000, M=500,
                             prior=Prior.bernoulli_gaussian(0.2), snr_db=60.0,
                             algorithms=ALGORITHMS[1:], T=20, trials=100)]


def _fig4():
    return [ExperimentConfig(name=f"fig4-kappa{k:g}", ensemble=EnsembleSpec.geometric(k),
                             N=500, M=250, prior=Prior.bernoulli_gaussian(0.2), snr_db=60.0,
                             algorithms=(AMP, "OAMP-PINV", "OAMP-LMMSE"), T=50, trials=20)
            for k in (1.0, 5.0, 10.0, 1e2, 1e3, 1e4, 1e5, 1e6)]


def _fig5():
    return PTCConfig(name="fig5")


def _fig6():
    out = []
    for n in (256, 1024):
        for kind in ("Haar", "DCT", "Hadamard"):
            out.append(ExperimentConfig(
                name=f"fig6-{kind}-N{n}", ensemble=EnsembleSpec.partial_orthogonal(kind), N=n,
                M=int(round(0.35 * n)), prior=Prior.bernoulli_gaussian(0.1), snr_db=50.0,
                algorithms=("OAMP-LMMSE",), T=30, trials=50))
    return out


def _fig7():
    return [ExperimentConfig(name="fig7", ensemble=EnsembleSpec.partial_orthogonal("DCT"),
                             N=2048, m_ratio=0.35, prior=Prior.bernoulli_gaussian(0.1),
                             snr_db=50.0, algorithms=("OAMP-LMMSE",),
                             denoiser={"kind": "soft", "C": [1.0, 2.0, 3.0], "gamma_scale": 1.0},
                             T=30, trials=50)]


PRESETS = {
    "fig1": (_fig1, "AMP beta-family SE error, IID Gaussian vs partial DCT"),
    "fig2": (_fig2, "OAMP and AMP on IID Gaussian, BPSK, 14 dB"),
    "fig3": (_fig3, "OAMP on a geometric ensemble with kappa=5"),
    "fig4": (_fig4, "final MSE against condition number (AMP, OAMP-PINV, OAMP-LMMSE)"),
    "fig5": (_fig5, "noiseless phase transition on partial DCT"),
    "fig6": (_fig6, "OAMP-LMMSE on partial Haar/DCT/Hadamard for several N"),
    "fig7": (_fig7, "OAMP with a divergence-free soft threshold"),
}


def preset(name):
    """Configs for a named preset (a list, or a PTCConfig for fig5)."""
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return PRESETS[name][0]()


# ---------------------------------------------------------------------------
# emission

def _fmt(v):
    if isinstance(v, float):
        return repr(v) if not math.isfinite(v) else format(v, ".17g")
    return str(v)


def emit(rows, path, fmt="csv", row_type=None):
    """Write rows as CSV (header = field names) or JSON; floats keep 17 digits."""
    if row_type is None:
        row_type = type(rows[0]) if rows else ResultRow
    names = [f.name for f in dataclasses.fields(row_type)]
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names)
            for r in rows:
                w.writerow([_fmt(getattr(r, n)) for n in names])
    elif fmt == "json":
        recs = []
        for r in rows:
            rec = {}
            for n in names:
                v = getattr(r, n)
                rec[n] = float(format(v, ".17g")) if isinstance(v, float) and math.isfinite(v) \
                    else (repr(v) if isinstance(v, float) else v)
            recs.append(rec)
        with open(path, "w") as fh:
            json.dump({"fields": names, "rows": recs}, fh, indent=1)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return path


def _parse(v, typ):
    if typ is float or typ == "float":
        return float(v)
    if typ is int or typ == "int":
        return int(v)
    if typ == Union[int, str]:
        return int(v) if str(v).lstrip("-").isdigit() else v
    return v


def read_rows(path, row_type=ResultRow):
    """Inverse of :func:`emit` for CSV files."""
    types = {f.name: f.type for f in dataclasses.fields(row_type)}
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if header != list(types):
            raise ValueError(f"{path}: header {header} does not match {list(types)}")
        return [row_type(**{n: _parse(v, types[n]) for n, v in zip(header, rec)}) for rec in rd]
