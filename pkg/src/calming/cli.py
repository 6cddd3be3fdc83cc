"""Batch experiment harness.

Single-JSON-document configs drive six pipelines: pmle, sample, bvm-check,
minimax-rate, bounds, coverage. Every run writes summary.json (plus
draws.csv or metrics.csv where applicable) into --out. Exit codes: 0 on
success, 2 when the run finished but a hypothesis flag failed,
1 on errors. All randomness derives from --seed; reruns are byte-identical
up to the isolated timestamp field.

Config schema (matrices are inline row lists or a path to a header-free
comma-separated file; scalars expand to scalar * identity):

    {
      "model":  {"kind": "linear", "matrix": [[...], ...]}
                | {"kind": "exp_composed", "K": ...}
                | {"kind": "diagonal_power", "p": 4, "L": 1.0, "alpha": 1.0},
      "prior":  {"f0": [...], "Gsq": matrix-or-scalar,
                 "Gammasq": matrix-or-scalar
                            | {"mode": "pushforward" | "linear_pullback"},
                 "g0": [...],             # optional, default A(f0)
                 "lambda": number | "sigma^-2"},
      "noise":  {"sigma": number,
                 "distribution": "gaussian"
                                 | {"kind": "scaled_student_t", "df": 5},
                 "S": matrix-or-scalar,   # optional noise scale, default I
                 "g_exp": number},        # optional, default infinity
      "truth":  {"fstar": [...]},
      "pipeline": { per-subcommand options }
    }

The model/prior/noise/truth blocks are required only by the pipelines that
use them (minimax-rate and bounds run standalone).
"""

import argparse
import csv
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .bvm import (
    BvmReport,
    coverage_experiment,
    delta_m_estimate,
    diamond,
    effective_dimension,
    symmetric_set_discrepancy,
)
from .core import NoiseEnvelope, PriorSpec, coordinate_gamma
from .errors import CalmingError, ConcentrationUnverifiable, ConfigError, InvalidArgument
from .forward import DiagonalPowerModel, ExpComposedModel, LinearModel
from .minimax import sequence_rate
from .pmle import SolverOptions, alternate, concentration_radius, joint_newton, population_optimum
from .posterior import ChainConfig, gaussian_reference, mcmc_sample
from .toolkit import (
    QuadFormStats,
    SpectrumPair,
    chi2_bounds,
    concavity_tail,
    gauss_integral_bound,
    gaussian_comparison,
    nongauss_prob_bound,
    z_gauss,
    z_nongauss,
    z_nongauss_form,
)

__all__ = ["ExperimentConfig", "ResultRecord", "generate_data", "run", "main"]


@dataclass(frozen=True)
class ResultRecord:
    """What every pipeline emits: metrics plus provenance."""

    pipeline: str
    seed: int
    version: str
    inputs_hash: str
    metrics: dict
    hypothesis_flags: dict = None
    artifacts: list = field(default_factory=list)

    def flags_ok(self):
        return self.hypothesis_flags is None or all(
            self.hypothesis_flags.values())


def _get(cfg, path, default=None, required=True):
    node = cfg
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            if required:
                raise ConfigError("missing required field", field=path)
            return default
        node = node[part]
    return node


def _as_number(value, path, positive=False):
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError("expected a number", field=path)
    if positive and not value > 0:
        raise ConfigError("must be positive", field=path)
    return float(value)


def _as_vector(value, path):
    try:
        vec = np.asarray(value, dtype=float).reshape(-1)
    except (TypeError, ValueError):
        raise ConfigError("expected a numeric vector", field=path) from None
    if vec.size == 0:
        raise ConfigError("vector must be nonempty", field=path)
    return vec


def _as_matrix(value, path, base_dir, dim=None):
    """Inline nested lists, a CSV path, or (with dim) a scalar multiple of
    the identity."""
    if isinstance(value, str):
        target = Path(base_dir) / value
        if not target.exists():
            raise ConfigError(f"referenced file {value!r} not found", field=path)
        mat = np.loadtxt(target, delimiter=",", ndmin=2)
    elif isinstance(value, (int, float)) and not isinstance(value, bool):
        if dim is None:
            raise ConfigError("scalar not allowed here", field=path)
        return float(value) * np.eye(dim)
    else:
        try:
            mat = np.asarray(value, dtype=float)
        except (TypeError, ValueError):
            raise ConfigError("expected a matrix", field=path) from None
        if mat.ndim != 2:
            raise ConfigError("expected a two-dimensional matrix", field=path)
    return mat


def _build_model(cfg, base_dir):
    kind = _get(cfg, "model.kind")
    try:
        if kind == "linear":
            return LinearModel(_as_matrix(_get(cfg, "model.matrix"),
                                          "model.matrix", base_dir))
        if kind == "exp_composed":
            return ExpComposedModel(_as_matrix(_get(cfg, "model.K"),
                                               "model.K", base_dir))
        if kind == "diagonal_power":
            return DiagonalPowerModel(
                int(_as_number(_get(cfg, "model.p"), "model.p", positive=True)),
                _as_number(_get(cfg, "model.L"), "model.L", positive=True),
                _as_number(_get(cfg, "model.alpha"), "model.alpha"))
    except InvalidArgument as exc:
        raise ConfigError(str(exc), field="model") from exc
    raise ConfigError(f"unknown model kind {kind!r}", field="model.kind")


def _build_noise(cfg, q, base_dir):
    sigma = _as_number(_get(cfg, "noise.sigma"), "noise.sigma", positive=True)
    dist = _get(cfg, "noise.distribution", default="gaussian", required=False)
    if isinstance(dist, str):
        kind, df = dist, None
    elif isinstance(dist, dict):
        kind = dist.get("kind")
        df = dist.get("df")
    else:
        raise ConfigError("expected a string or an object",
                          field="noise.distribution")
    if kind == "scaled_student_t":
        if df is None:
            df = _get(cfg, "noise.df", required=False)
        if df is None:
            raise ConfigError("scaled_student_t needs df", field="noise.df")
        df = _as_number(df, "noise.distribution.df")
        if df <= 2:
            raise ConfigError("df must exceed 2 for unit variance",
                              field="noise.distribution.df")
    elif kind != "gaussian":
        raise ConfigError(f"unknown distribution {kind!r}",
                          field="noise.distribution")
    s_raw = _get(cfg, "noise.S", required=False)
    s_mat = None if s_raw is None else _as_matrix(s_raw, "noise.S", base_dir,
                                                  dim=q)
    g_exp = _get(cfg, "noise.g_exp", required=False)
    g_exp = math.inf if g_exp is None else _as_number(g_exp, "noise.g_exp",
                                                      positive=True)
    envelope = NoiseEnvelope(S=np.eye(q) if s_mat is None else s_mat,
                             g_exp=g_exp)
    return sigma, kind, df, s_mat, envelope


def _build_prior(cfg, model, sigma, base_dir):
    p, q = model.dim_in, model.dim_out
    f0 = _as_vector(_get(cfg, "prior.f0"), "prior.f0")
    if f0.size != p:
        raise ConfigError(f"f0 has length {f0.size}, model expects {p}",
                          field="prior.f0")
    gsq = _as_matrix(_get(cfg, "prior.Gsq"), "prior.Gsq", base_dir, dim=p)
    lam_raw = _get(cfg, "prior.lambda")
    if lam_raw == "sigma^-2":
        lam = 1.0 / sigma**2
    else:
        lam = _as_number(lam_raw, "prior.lambda", positive=True)
    gamma_raw = _get(cfg, "prior.Gammasq")
    if isinstance(gamma_raw, dict):
        mode = gamma_raw.get("mode")
        try:
            gammasq = coordinate_gamma(model, f0, gsq, mode)
        except CalmingError as exc:
            raise ConfigError(str(exc), field="prior.Gammasq.mode") from exc
    else:
        gammasq = _as_matrix(gamma_raw, "prior.Gammasq", base_dir, dim=q)
    g0_raw = _get(cfg, "prior.g0", required=False)
    g0 = model.apply(f0) if g0_raw is None else _as_vector(g0_raw, "prior.g0")
    try:
        return PriorSpec(f0=f0, Gsq=gsq, g0=g0, Gammasq=gammasq, lam=lam)
    except CalmingError as exc:
        raise ConfigError(str(exc), field="prior") from exc


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed and validated config for the model-driven pipelines."""

    model: object
    prior: PriorSpec
    sigma: float
    noise_kind: str
    noise_df: float
    noise_scale: np.ndarray
    envelope: NoiseEnvelope
    fstar: np.ndarray
    pipeline: dict

    @classmethod
    def parse(cls, cfg, base_dir):
        model = _build_model(cfg, base_dir)
        sigma, kind, df, s_mat, envelope = _build_noise(cfg, model.dim_out,
                                                        base_dir)
        prior = _build_prior(cfg, model, sigma, base_dir)
        fstar = _as_vector(_get(cfg, "truth.fstar"), "truth.fstar")
        if fstar.size != model.dim_in:
            raise ConfigError("fstar length does not match the model",
                              field="truth.fstar")
        return cls(model=model, prior=prior, sigma=sigma, noise_kind=kind,
                   noise_df=df, noise_scale=s_mat, envelope=envelope,
                   fstar=fstar,
                   pipeline=_get(cfg, "pipeline", default={}, required=False))


def generate_data(model, fstar, sigma, noise_kind="gaussian", seed=0,
                  df=None, S=None):
    """Y = A(f*) + sigma eps with unit-variance eps, deterministic in seed."""
    fstar = np.asarray(fstar, dtype=float)
    rng = np.random.default_rng(seed)
    q = model.dim_out
    if noise_kind == "gaussian":
        eps = rng.standard_normal(q)
    elif noise_kind == "scaled_student_t":
        if df is None or df <= 2:
            raise InvalidArgument("scaled_student_t needs df > 2")
        eps = rng.standard_t(df, size=q) * math.sqrt((df - 2.0) / df)
    else:
        raise InvalidArgument(f"unsupported noise kind {noise_kind!r}")
    if S is not None:
        eps = np.asarray(S, dtype=float) @ eps
    return model.apply(fstar) + sigma * eps


def _draw_data(exp: ExperimentConfig, seed):
    return generate_data(exp.model, exp.fstar, exp.sigma, exp.noise_kind,
                         seed=seed, df=exp.noise_df, S=exp.noise_scale)


def _write_metrics_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v
                             for v in row])


def _write_draws_csv(path, draws, p, q):
    header = [f"f_{i + 1}" for i in range(p)] + [f"g_{j + 1}" for j in range(q)]
    np.savetxt(path, draws, delimiter=",", header=",".join(header),
               comments="", fmt="%.17g")


def _listify(x):
    return np.asarray(x, dtype=float).tolist()


def _pipe_pmle(cfg, exp: ExperimentConfig, seed, out_dir):
    y = _draw_data(exp, seed)
    solver = exp.pipeline.get("solver", "alternate")
    opts = SolverOptions()
    if solver == "alternate":
        fit = alternate(y, exp.sigma, exp.prior, exp.model, opts)
    elif solver == "joint":
        fit = joint_newton(y, exp.sigma, exp.prior, exp.model, opts)
    else:
        raise ConfigError(f"unknown solver {solver!r}", field="pipeline.solver")
    point = fit.upsilon_hat
    metrics = {
        "f_hat": _listify(point.f),
        "g_hat": _listify(point.g),
        "converged": fit.converged,
        "iterations": fit.iterations,
        "final_grad_norm": fit.final_grad_norm,
        "objective": fit.trace[-1],
        "elasticity_norm": float(np.linalg.norm(point.g - exp.model.apply(point.f))),
    }
    flags = None
    x = exp.pipeline.get("x")
    if x is not None:
        x = _as_number(x, "pipeline.x", positive=True)
        star = population_optimum(exp.fstar, exp.sigma, exp.prior, exp.model,
                                  opts).upsilon_hat
        try:
            rep = concentration_radius(star, exp.sigma, exp.prior, exp.model,
                                       exp.envelope, x)
            metrics["concentration"] = {
                "r_G": rep.r_G, "rho": rep.rho, "z_val": rep.z_val,
                "delta3G": rep.delta3G,
                "effective_dim_p_eps": rep.effective_dim_p_eps,
                "lambda_eps": rep.lambda_eps,
            }
            flags = {"rho_le_half": rep.rho <= 0.5}
        except ConcentrationUnverifiable as exc:
            metrics["concentration"] = {"error": str(exc),
                                        "delta3": exc.delta3, "rho": exc.rho}
            flags = {"rho_le_half": False}
    rows = [(i, v) for i, v in enumerate(fit.trace)]
    _write_metrics_csv(out_dir / "metrics.csv", ["step", "objective"], rows)
    return metrics, flags, ["metrics.csv"]


def _pipe_sample(cfg, exp: ExperimentConfig, seed, out_dir):
    y = _draw_data(exp, seed)
    pl = exp.pipeline
    chain = ChainConfig(
        n_samples=int(pl.get("n_samples", 20_000)),
        burn_in=int(pl.get("burn_in", 2_000)),
        thinning=int(pl.get("thinning", 1)),
        target_accept=float(pl.get("target_accept", 0.234)),
        master_seed=seed,
        n_chains=int(pl.get("n_chains", 1)))
    backend = pl.get("backend", "auto")
    sample = mcmc_sample(y, exp.sigma, exp.prior, exp.model, chain,
                         backend=backend)
    p, q = exp.prior.dim_f, exp.prior.dim_g
    _write_draws_csv(out_dir / "draws.csv", sample.draws, p, q)
    mean = sample.draws.mean(axis=0)
    cov = np.atleast_2d(np.cov(sample.draws, rowvar=False))
    metrics = {
        "accept_rate": sample.accept_rate,
        "ess_min": sample.ess_min,
        "n_retained": int(sample.draws.shape[0]),
        "n_chains": sample.n_chains,
        "mean": _listify(mean),
        "cov": [list(map(float, row)) for row in cov],
    }
    return metrics, None, ["draws.csv"]


def _pipe_bvm_check(cfg, exp: ExperimentConfig, seed, out_dir):
    y = _draw_data(exp, seed)
    pl = exp.pipeline
    opts = SolverOptions()
    fit = joint_newton(y, exp.sigma, exp.prior, exp.model, opts)
    x = _as_number(pl.get("x", 2.0), "pipeline.x", positive=True)

    r0_raw = pl.get("r0", "auto")
    flags = {}
    if r0_raw == "auto":
        star = population_optimum(exp.fstar, exp.sigma, exp.prior, exp.model,
                                  opts).upsilon_hat
        try:
            rep = concentration_radius(star, exp.sigma, exp.prior, exp.model,
                                       exp.envelope, x)
            r0 = rep.r_G
        except ConcentrationUnverifiable as exc:
            return ({"error": str(exc)}, {"rho_le_half": False}, [])
    else:
        r0 = _as_number(r0_raw, "pipeline.r0", positive=True)

    n_points = int(pl.get("n_points", 64))
    n_dirs = int(pl.get("n_dirs", 256))
    d3 = delta_m_estimate(fit.upsilon_hat, r0, 3, exp.sigma, exp.prior,
                          exp.model, n_points=n_points, n_dirs=n_dirs,
                          seed=seed)
    d4 = delta_m_estimate(fit.upsilon_hat, r0, 4, exp.sigma, exp.prior,
                          exp.model, n_points=n_points, n_dirs=n_dirs,
                          seed=seed + 1)
    smooth = diamond(r0, d3, d4, n_points=n_points, n_dirs=n_dirs)
    p_g = effective_dimension(fit.upsilon_hat, exp.sigma, exp.prior, exp.model)
    report = BvmReport.build(smooth, x, p_g)

    n_draws = int(pl.get("n_draws", 20_000))
    chain = ChainConfig(n_samples=int(pl.get("n_samples", 4 * n_draws)),
                        burn_in=int(pl.get("burn_in", 2_000)),
                        thinning=int(pl.get("thinning", 2)),
                        master_seed=seed, n_chains=1)
    post = mcmc_sample(y, exp.sigma, exp.prior, exp.model, chain,
                       backend=pl.get("backend", "auto"))
    ref = gaussian_reference(fit.upsilon_hat, exp.sigma, exp.prior, exp.model,
                             n=post.draws.shape[0], seed=seed + 2)
    center = fit.upsilon_hat.stacked()
    disc = symmetric_set_discrepancy(post.draws - center, ref.draws - center)

    metrics = {
        "r0": smooth.r0, "delta3": smooth.delta3, "delta4": smooth.delta4,
        "diamond": smooth.diamond, "C0": smooth.C0,
        "p_G_tilde": report.p_G_tilde, "rho_r0": report.rho_r0,
        "lower_factor": report.lower_factor,
        "upper_factor": report.upper_factor,
        "discrepancy": disc, "accept_rate": post.accept_rate,
        "ess_min": post.ess_min,
    }
    flags.update({
        "diamond_le_half": report.hyp_diamond_ok,
        "C0_ge_half": report.hyp_c0_ok,
        "radius_covers_dimension": report.hyp_radius_ok,
    })
    return metrics, flags, []


def _pipe_minimax_rate(cfg, exp, seed, out_dir):
    pl = _get(cfg, "pipeline", default={}, required=False)
    s = _as_number(pl.get("s", 1.0), "pipeline.s", positive=True)
    alpha = _as_number(pl.get("alpha", 0.0), "pipeline.alpha")
    big_l = _as_number(pl.get("L", 1.0), "pipeline.L", positive=True)
    big_m = _as_number(pl.get("M", 1.0), "pipeline.M", positive=True)
    p_max = int(pl.get("p_max", 10_000))
    sig_list = pl.get("sigma_sq", [1e-5])
    if isinstance(sig_list, (int, float)):
        sig_list = [sig_list]
    rows = []
    reports = []
    for i, s2 in enumerate(sig_list):
        s2 = _as_number(s2, f"pipeline.sigma_sq[{i}]", positive=True)
        rep = sequence_rate(s, alpha, big_l, big_m, s2, p_max=p_max)
        rows.append((s2, rep.J, rep.mu, rep.rate, rep.tr_F_mu_inv))
        reports.append({"sigma_sq": s2, "J": rep.J, "mu": rep.mu,
                        "rate": rep.rate, "tr_F_mu_inv": rep.tr_F_mu_inv,
                        "risk_bound": rep.risk_bound,
                        "prob_bound": rep.prob_bound})
    _write_metrics_csv(out_dir / "metrics.csv",
                       ["sigma_sq", "J", "mu", "rate", "tr_F_mu_inv"], rows)
    return {"rows": reports}, None, ["metrics.csv"]


def _pipe_bounds(cfg, exp, seed, out_dir):
    pl = _get(cfg, "pipeline", default=None)
    op = _get(pl, "op")
    if op == "z_gauss":
        stats = QuadFormStats(_as_number(_get(pl, "p"), "pipeline.p"),
                              _as_number(_get(pl, "v"), "pipeline.v"),
                              _as_number(_get(pl, "lam"), "pipeline.lam"))
        res = z_gauss(stats, _as_number(_get(pl, "x"), "pipeline.x"))
        metrics = {"value": res.value, "simplified": res.simplified}
    elif op == "chi2":
        upper_sq, upper_norm, lower_sq = chi2_bounds(
            _as_number(_get(pl, "p"), "pipeline.p"),
            _as_number(_get(pl, "x"), "pipeline.x"))
        metrics = {"upper_sq": upper_sq, "upper_norm": upper_norm,
                   "lower_sq": lower_sq}
    elif op == "z_nongauss":
        x = _as_number(_get(pl, "x"), "pipeline.x")
        g_exp = _as_number(_get(pl, "g_exp"), "pipeline.g_exp", positive=True)
        metrics = {
            "value": z_nongauss(_as_number(_get(pl, "p"), "pipeline.p"), x,
                                g_exp),
            "prob_bound": nongauss_prob_bound(x, g_exp),
        }
    elif op == "z_nongauss_form":
        stats = QuadFormStats(_as_number(_get(pl, "p"), "pipeline.p"),
                              _as_number(_get(pl, "v"), "pipeline.v"),
                              _as_number(_get(pl, "lam"), "pipeline.lam"))
        x = _as_number(_get(pl, "x"), "pipeline.x")
        g_exp = _as_number(_get(pl, "g_exp"), "pipeline.g_exp", positive=True)
        res = z_nongauss_form(stats, x, g_exp)
        metrics = {"value": res.value, "simplified": res.simplified,
                   "prelude_hypothesis_ok": res.prelude_hypothesis_ok,
                   "prob_bound": nongauss_prob_bound(x, g_exp)}
    elif op == "concavity_tail":
        metrics = {"value": concavity_tail(
            _as_number(_get(pl, "r0"), "pipeline.r0", positive=True),
            _as_number(_get(pl, "r"), "pipeline.r", positive=True),
            _as_number(_get(pl, "delta3"), "pipeline.delta3"))}
    elif op == "gauss_integral":
        res = gauss_integral_bound(
            _as_number(_get(pl, "p_tau"), "pipeline.p_tau"),
            _as_number(_get(pl, "x"), "pipeline.x", positive=True),
            _as_number(_get(pl, "C0"), "pipeline.C0", positive=True))
        metrics = {"r0_required": res.r0_required,
                   "numerator_bound": res.numerator_bound,
                   "denominator_bound": res.denominator_bound,
                   "up_to_constant": res.up_to_constant}
    elif op == "gaussian_comparison":
        pair = SpectrumPair(_as_vector(_get(pl, "lam_xi"), "pipeline.lam_xi"),
                            _as_vector(_get(pl, "lam_eta"), "pipeline.lam_eta"),
                            _as_vector(_get(pl, "a_shift"), "pipeline.a_shift"))
        res = gaussian_comparison(pair)
        metrics = {"value": res.value, "frobenius": res.frobenius,
                   "frobenius_applicable": res.frobenius_applicable,
                   "up_to_constant": res.up_to_constant}
    else:
        raise ConfigError(f"unknown bounds op {op!r}", field="pipeline.op")
    return metrics, None, []


def _pipe_coverage(cfg, exp: ExperimentConfig, seed, out_dir):
    pl = exp.pipeline
    alpha = _as_number(pl.get("alpha", 0.1), "pipeline.alpha", positive=True)
    if not alpha < 1:
        raise ConfigError("alpha must lie in (0, 1)", field="pipeline.alpha")
    n_rep = int(pl.get("n_rep", 200))
    n_mc = int(pl.get("n_mc", 50_000))
    q_raw = pl.get("Q")
    q_mat = (np.eye(exp.prior.dim_f) if q_raw is None
             else np.atleast_2d(np.asarray(q_raw, dtype=float)))
    res = coverage_experiment(exp.fstar, exp.sigma, exp.prior, exp.model,
                              q_mat, alpha, n_rep, master_seed=seed,
                              n_mc=n_mc)
    metrics = {"coverage": res.coverage, "miscoverage": res.miscoverage,
               "r_alpha": res.r_alpha, "bias_ratio": res.bias_ratio,
               "n_rep": res.n_rep, "alpha": alpha}
    _write_metrics_csv(out_dir / "metrics.csv",
                       ["coverage", "miscoverage", "r_alpha", "bias_ratio"],
                       [(res.coverage, res.miscoverage, res.r_alpha,
                         res.bias_ratio)])
    return metrics, None, ["metrics.csv"]


_NEEDS_MODEL = {"pmle": _pipe_pmle, "sample": _pipe_sample,
                "bvm-check": _pipe_bvm_check, "coverage": _pipe_coverage}
_STANDALONE = {"minimax-rate": _pipe_minimax_rate, "bounds": _pipe_bounds}


def run(command, config_path, seed, out_dir):
    """Execute one pipeline; returns the process exit code."""
    config_path = Path(config_path)
    try:
        raw = config_path.read_text()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 1
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as exc:
        print(f"error: config is not valid JSON: line {exc.lineno}, "
              f"column {exc.colno}", file=sys.stderr)
        return 1
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if command in _NEEDS_MODEL:
            exp = ExperimentConfig.parse(cfg, config_path.parent)
            metrics, flags, artifacts = _NEEDS_MODEL[command](cfg, exp, seed,
                                                              out)
        else:
            metrics, flags, artifacts = _STANDALONE[command](cfg, None, seed,
                                                             out)
    except ConfigError as exc:
        print(f"error: {exc} (field {exc.field})", file=sys.stderr)
        return 1
    except CalmingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    digest = hashlib.sha256(
        (json.dumps(cfg, sort_keys=True) + f"|{seed}").encode()).hexdigest()
    record = ResultRecord(pipeline=command, seed=seed, version=__version__,
                          inputs_hash=digest, metrics=metrics,
                          hypothesis_flags=flags, artifacts=artifacts)
    summary = {
        "pipeline": record.pipeline,
        "seed": record.seed,
        "version": record.version,
        "inputs_hash": record.inputs_hash,
        "metrics": record.metrics,
        "hypothesis_flags": record.hypothesis_flags,
        "artifacts": record.artifacts,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return 0 if record.flags_ok() else 2


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="calming",
        description="Experiment pipelines for the calming relaxation of "
                    "Bayesian nonlinear inverse problems")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("pmle", "fit the penalized MLE on synthetic data"),
        ("sample", "run the posterior sampler and dump draws"),
        ("bvm-check", "Gaussian-approximation diagnostics with flags"),
        ("minimax-rate", "sequence-model rate table"),
        ("bounds", "evaluate a single tail-bound formula"),
        ("coverage", "frequentist coverage of credible sets"),
    ]:
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="path to JSON config")
        sp.add_argument("--seed", type=int, default=0,
                        help="master seed (default 0)")
        sp.add_argument("--out", required=True, help="output directory")
    args = parser.parse_args(argv)
    return run(args.command, args.config, args.seed, args.out)


if __name__ == "__main__":
    sys.exit(main())
