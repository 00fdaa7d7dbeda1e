"""CLI harness: experiment configuration, rate fitting, CSV reporting.

Commands: rates, rademacher, gd-check, lower-bound, margin, verify.
Exit codes: 0 success, 1 usage/config error, 2 inequality-check violation.
All randomness flows from one root seed through named substreams, so CSV
outputs are byte-identical across runs of the same config (timing columns
are written as 0 unless --timing is passed).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import gdcheck as GD
from . import models as M
from . import optimize as opt
from . import rademacher as RC
from . import relu_lab as RL
from . import synthdata as SD
from .geometry import GeometryConfig, dual_norm_witness, norm, project
from .rngtools import substream

__all__ = ["ExperimentConfig", "parse_config_file", "fit_rate", "RateTable", "run", "main"]

COMMANDS = ("rates", "rademacher", "gd-check", "lower-bound", "margin", "verify")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    command: str = "verify"
    model: str = "glm"  # glm | rr | relu
    link: str = "logistic"
    d: int = 5
    n_grid: tuple = (128, 256, 512, 1024, 2048, 4096, 8192)
    eps_grid: tuple = (0.2, 0.1, 0.05)
    trials: int = 20
    seed: int = 0
    delta: float = 0.05
    out: str = "out"
    mc_draws: int = 1000
    oracle_m: int = 50_000
    design: str = "sphere_uniform"
    tol_scale: float = 1.0
    method: str = "pgd"  # pgd | regularized (rates command)
    kappa: float = 1.0
    tukey_c: float = M.TUKEY_DEFAULT_C
    noise_half_range: float = 0.3
    probes: int = 200
    lb_d_grid: tuple = (8, 16, 32)
    lb_N: int = 51
    phi_exponent: float = 0.5
    margin_n: int = 512
    timing: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not (0.0 < self.delta < 1.0):
            raise ConfigError("delta must lie in (0, 1)")
        if list(self.n_grid) != sorted(set(self.n_grid)):
            raise ConfigError("n_grid must be strictly increasing")


_INT_KEYS = {"d", "trials", "seed", "mc_draws", "oracle_m", "probes", "lb_N", "margin_n"}
_FLOAT_KEYS = {"delta", "tol_scale", "kappa", "tukey_c", "noise_half_range", "phi_exponent"}
_TUPLE_INT_KEYS = {"n_grid", "lb_d_grid"}
_TUPLE_FLOAT_KEYS = {"eps_grid"}
_KNOWN_KEYS = {f.name for f in fields(ExperimentConfig)} - {"command", "timing"}


def parse_config_file(path: str) -> dict:
    """Flat `key = value` file, '#' comments; unknown keys are rejected with
    the offending line number."""
    values: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected `key = value`")
            key, val = (part.strip() for part in line.split("=", 1))
            if key not in _KNOWN_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                if key in _INT_KEYS:
                    values[key] = int(val)
                elif key in _FLOAT_KEYS:
                    values[key] = float(val)
                elif key in _TUPLE_INT_KEYS:
                    values[key] = tuple(int(v) for v in val.split(",") if v.strip())
                elif key in _TUPLE_FLOAT_KEYS:
                    values[key] = tuple(float(v) for v in val.split(",") if v.strip())
                else:
                    values[key] = val
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from exc
    return values


def fit_rate(ns, errs) -> dict:
    """OLS fit of log(err) against log(n); nonpositive errors are dropped."""
    ns, errs = np.asarray(ns, dtype=float), np.asarray(errs, dtype=float)
    keep = errs > 0
    if np.any(~keep):
        print(f"fit_rate: dropping {int((~keep).sum())} nonpositive error value(s)",
              file=sys.stderr)
    ns, errs = ns[keep], errs[keep]
    if ns.size < 3:
        raise ValueError("rate fit needs at least 3 positive points")
    x, y = np.log(ns), np.log(errs)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 if ss_tot < 1e-300 else 1.0 - ss_res / ss_tot
    return {"slope": float(slope), "intercept": float(intercept), "r_squared": r2}


@dataclass
class RateTable:
    rows: list = field(default_factory=list)  # dicts with the schema columns
    fit: dict | None = None

    def fit_medians(self) -> dict:
        by_n: dict = {}
        for row in self.rows:
            by_n.setdefault(row["n"], []).append(row["excess_risk"])
        ns = sorted(by_n)
        medians = [float(np.median(by_n[n])) for n in ns]
        self.fit = fit_rate(ns, medians)
        return self.fit

    def to_csv(self, path) -> None:
        order = sorted(self.rows, key=lambda r: (r["n"], r["trial"]))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("n,d,trial,excess_risk,grad_norm,certificate,wall_ms\n")
            for r in order:
                fh.write("{n},{d},{trial},{excess_risk:.17g},{grad_norm:.17g},"
                         "{certificate:.17g},{wall_ms:.17g}\n".format(**r))


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("GRADCONV_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, items):
    nthreads = _threads()
    if nthreads == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=nthreads) as pool:
        return list(pool.map(fn, items))


def _build_model(cfg: ExperimentConfig) -> M.ModelSpec:
    geom = GeometryConfig.make(2.0, cfg.d, R=1.0, B=1.0)
    if cfg.model == "glm":
        return M.glm_model(geom, cfg.link)
    if cfg.model == "rr":
        return M.rr_model(geom, c=cfg.tukey_c, noise_half_range=cfg.noise_half_range)
    if cfg.model == "relu":
        return M.relu_model(cfg.d)
    raise ConfigError(f"unknown model {cfg.model!r}")


def _default_w_star(cfg: ExperimentConfig) -> np.ndarray:
    w = np.ones(cfg.d)
    return w / np.linalg.norm(w)


def _noise(cfg: ExperimentConfig):
    return SD.UniformNoise(cfg.noise_half_range) if cfg.model == "rr" else None


# ---------------------------------------------------------------------------
# rates
# ---------------------------------------------------------------------------


def run_rate_experiment(cfg: ExperimentConfig) -> RateTable:
    """Excess-risk decay over the n grid for pgd or regularized descent.

    The oracle sample used for the paired excess estimate is drawn once per
    experiment and shared read-only across trials.
    """
    model = _build_model(cfg)
    noise = _noise(cfg)
    if cfg.model == "rr":
        model.ensure_constants(noise_sampler=noise, rng=substream(cfg.seed, "rates/crho"))
    w_star = _default_w_star(cfg)
    oracle = SD.generate(model, w_star, cfg.oracle_m, substream(cfg.seed, "rates/oracle"),
                         noise=noise, dist=cfg.design)
    gd = GD.gd_constants(model, None, "norm_based")

    def one(job):
        n, trial = job
        t0 = time.perf_counter()
        data = SD.generate(model, w_star, n, substream(cfg.seed, f"rates/data/{n}/{trial}"),
                           noise=noise, dist=cfg.design)
        tol = cfg.tol_scale / math.sqrt(n)
        if cfg.method == "regularized":
            config = opt.OptimizerConfig(method="regularized_gd", grad_tolerance=1e-8,
                                         max_steps=200_000, reg_kappa=cfg.kappa,
                                         seed=cfg.seed + trial)
            result = opt.regularized_stationary(model, data, cfg.delta, config)
        else:
            config = opt.OptimizerConfig(grad_tolerance=tol, max_steps=20_000,
                                         restarts=3, seed=cfg.seed * 1000 + trial)
            result = opt.pgd(model, data, config)
        excess = SD.paired_excess_oracle(model, w_star, result.w_hat, sample=oracle)
        cert = GD.excess_risk_certificate(
            model, gd, result, data, RC.gradient_rc_bound(model, n), cfg.delta
        )
        wall = (time.perf_counter() - t0) * 1000.0 if cfg.timing else 0.0
        return {"n": n, "d": cfg.d, "trial": trial, "excess_risk": excess["excess"],
                "grad_norm": result.grad_norm_final, "certificate": cert.total,
                "wall_ms": wall}

    jobs = [(n, t) for n in cfg.n_grid for t in range(cfg.trials)]
    table = RateTable(rows=_map(one, jobs))
    table.fit_medians()
    return table


def cmd_rates(cfg: ExperimentConfig) -> int:
    table = run_rate_experiment(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    table.to_csv(os.path.join(cfg.out, "rates.csv"))
    fit = table.fit
    summary = (f"model={cfg.model} d={cfg.d} method={cfg.method} trials={cfg.trials}\n"
               f"slope={fit['slope']:.6g} intercept={fit['intercept']:.6g} "
               f"r_squared={fit['r_squared']:.6g}\n")
    with open(os.path.join(cfg.out, "rates_summary.txt"), "w", encoding="utf-8") as fh:
        fh.write(summary)
    print(summary, end="")
    return 0


# ---------------------------------------------------------------------------
# rademacher
# ---------------------------------------------------------------------------


def _random_smooth_instance(rng, n: int, d: int, K: int):
    """Random K-valued class f(w)_t = tanh(A_t w + b_t) over the unit l2 ball,
    with cosine h_t maps of known Lipschitz constant."""
    A = rng.standard_normal((n, K, d))

    def evaluate_many(W):
        return np.tanh(np.einsum("gd,nkd->gnk", np.atleast_2d(W), A))

    fc = RC.FunctionClass(domain=RC.BallDomain(2.0, 1.0, d), n=n, output_dim=K,
                          evaluate_many=evaluate_many)
    u = rng.standard_normal((n, K))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    phase = rng.uniform(0, 2 * math.pi, size=n)
    L = float(rng.uniform(0.5, 2.0))
    h_maps = [
        (lambda a, uu=u[t], ph=phase[t], LL=L: LL * np.cos(a @ uu + ph))
        for t in range(n)
    ]
    return fc, h_maps, L


def cmd_rademacher(cfg: ExperimentConfig) -> int:
    rows = []
    violations = 0
    rng = substream(cfg.seed, "rad/instances")

    for i in range(20):
        n, d, K = int(rng.integers(4, 7)), 2, int(rng.integers(1, 3))
        fc, h_maps, L = _random_smooth_instance(rng, n, d, K)
        cand, _ = RC.ball_grid(d, 2.0, 1.0, n_dirs=48, n_radii=8)
        res = RC.check_contraction(fc, h_maps, L, cand, mode="exact")
        violations += not res["holds"]
        rows.append(("contraction", n, d, res["lhs"], 0.0, 2 ** (n * K), res["rhs"]))

    geom = GeometryConfig.make(2.0, 2)
    model = M.glm_model(geom)
    for i in range(10):
        n = int(rng.integers(4, 9))
        data = SD.generate(model, np.array([0.6, -0.4]), n, substream(cfg.seed, f"rad/glm/{i}"))
        chain = RC.glm_chain(model, data)
        consts = model.ensure_constants()
        cand, _ = RC.ball_grid(2, 2.0, 1.0, n_dirs=48, n_radii=8)
        res = RC.check_chain_rule(chain, L_G=2 * consts.C_upper, L_F=geom.radius_R,
                                  w_candidates=cand, mode="exact")
        violations += not res["holds"]
        rows.append(("chain_rule", n, 2, res["lhs_half"], 0.0, 2**n, res["rhs"]))

    for i in range(20):
        n, d = int(rng.integers(2, 13)), int(rng.integers(1, 6))
        p = float(rng.choice([2.0, 3.0, 4.0]))
        X = rng.standard_normal((n, d))
        res = RC.check_smooth_type(X, p, mode="exact")
        violations += not res["holds"]
        rows.append((f"smooth_type_p{p:g}", n, d, res["lhs"], 0.0, 2**n, res["rhs"]))

    data = SD.generate(model, np.array([0.6, -0.4]), 10, substream(cfg.seed, "rad/oracle"))
    grid, _ = RC.ball_grid(2, 2.0, 1.0, n_dirs=96, n_radii=12)
    fc = RC.gradient_class(model, data)
    bf = RC.exact_rc_bruteforce(fc, grid, norm_p=2.0)
    mc = RC.estimate_normed_rc(fc, 2.0, draws=cfg.mc_draws, seed=cfg.seed,
                               sup_solver="grid", grid=grid)
    agree = abs(mc.value - bf.value) <= 3.0 * max(mc.stderr, 1e-12)
    violations += not agree
    rows.append(("oracle_agreement_mc", 10, 2, mc.value, mc.stderr, mc.draws, bf.value))

    os.makedirs(cfg.out, exist_ok=True)
    with open(os.path.join(cfg.out, "rademacher.csv"), "w", encoding="utf-8") as fh:
        fh.write("kind,n,d,value,stderr,draws,bound\n")
        for kind, n, d, value, stderr, draws, bound in rows:
            fh.write(f"{kind},{n},{d},{value:.17g},{stderr:.17g},{draws},{bound:.17g}\n")
    print(f"rademacher checks: {len(rows)} rows, {violations} violation(s)")
    return 2 if violations else 0


# ---------------------------------------------------------------------------
# gd-check
# ---------------------------------------------------------------------------


def cmd_gd_check(cfg: ExperimentConfig) -> int:
    model = _build_model(cfg)
    noise = _noise(cfg)
    if cfg.model == "rr":
        model.ensure_constants(noise_sampler=noise, rng=substream(cfg.seed, "gd/crho"))
    w_star = _default_w_star(cfg)
    cal = SD.generate(model, w_star, max(cfg.oracle_m, 20_000),
                      substream(cfg.seed, "gd/cov"), noise=noise, dist=cfg.design)
    cov = SD.covariance_summary(cal.X, w_star, cone_samples=2000,
                                seed_or_rng=substream(cfg.seed, "gd/cone"))
    os.makedirs(cfg.out, exist_ok=True)
    total_violations = 0
    for regime in ("norm_based", "l2_lowdim"):
        gd = GD.gd_constants(model, cov, regime)
        report = GD.verify_gd(model, w_star, gd, cfg.probes, cfg.oracle_m, cfg.seed,
                              noise=noise, dist=cfg.design)
        report.to_csv(os.path.join(cfg.out, f"gd_{cfg.model}_{regime}.csv"))
        print(f"gd-check {cfg.model}/{regime}: {report.violations} violation(s), "
              f"{report.inconclusive} inconclusive, worst slack {report.worst_slack:.4g}")
        total_violations += report.violations
    return 2 if total_violations else 0


# ---------------------------------------------------------------------------
# lower-bound
# ---------------------------------------------------------------------------


def cmd_lower_bound(cfg: ExperimentConfig) -> int:
    os.makedirs(cfg.out, exist_ok=True)
    rows = []
    for d in cfg.lb_d_grid:
        inst = RL.build_lb_instance(d, cfg.lb_N)
        est = RL.lb_rc_lower_estimate(inst, max(cfg.mc_draws, 1000), seed=cfg.seed)
        rows.append((d, cfg.lb_N, inst.n, est["mc_value"], est["analytic_lb"],
                     est["sqrt_dn_ratio"], est["stderr"]))
    with open(os.path.join(cfg.out, "lower_bound.csv"), "w", encoding="utf-8") as fh:
        fh.write("d,N,n,mc_value,analytic_lb,sqrt_dn_ratio,stderr\n")
        for row in rows:
            fh.write("{},{},{},{:.17g},{:.17g},{:.17g},{:.17g}\n".format(*row))
    kh = RL.khintchine_check(cfg.lb_N, max(cfg.mc_draws, 1000), seed=cfg.seed)
    print(f"lower-bound sweep over d={cfg.lb_d_grid}, N={cfg.lb_N}; "
          f"khintchine holds={kh['holds']}")
    for row in rows:
        print(f"  d={row[0]} mc={row[3]:.4g} ratio_sqrt_dn={row[5]:.4g}")
    return 0 if kh["holds"] else 2


# ---------------------------------------------------------------------------
# margin
# ---------------------------------------------------------------------------


def cmd_margin(cfg: ExperimentConfig) -> int:
    os.makedirs(cfg.out, exist_ok=True)
    model = M.relu_model(cfg.d)
    w_star = _default_w_star(cfg)
    gamma_grid = np.linspace(0.05, 0.5, 10)
    violations = 0
    for trial in range(cfg.trials):
        data = SD.generate(model, w_star, cfg.margin_n,
                           substream(cfg.seed, f"margin/data/{trial}"))
        pop = SD.sample_covariates("sphere_uniform", 10 * cfg.margin_n, cfg.d, 1.0,
                                   substream(cfg.seed, f"margin/pop/{trial}"))
        w = opt.uniform_ball_point(substream(cfg.seed, f"margin/w/{trial}"), cfg.d, 2.0, 1.0)
        if np.linalg.norm(w) < 1e-9:
            w = w_star
        res = RL.check_phi_convergence(w, data, pop, gamma_grid, cfg.delta)
        violations += res["violations"]
    phi = RL.MarginFunction("power", exponent=cfg.phi_exponent)
    grid = np.geomspace(1e-3, 0.25, 400)
    v1, g1 = RL.margin_bound_value(phi, 2**12, cfg.delta, grid)
    v2, g2 = RL.margin_bound_value(phi, 2**24, cfg.delta, grid)
    with open(os.path.join(cfg.out, "margin.csv"), "w", encoding="utf-8") as fh:
        fh.write("quantity,value\n")
        fh.write(f"xi_violations,{violations}\n")
        fh.write(f"bound_n4096,{v1:.17g}\n")
        fh.write(f"bound_n16m,{v2:.17g}\n")
        fh.write(f"bound_ratio,{v2 / v1:.17g}\n")
    print(f"margin: xi violations={violations}, bound ratio={v2 / v1:.4g} "
          f"(minimizers gamma={g1:.3g}->{g2:.3g})")
    return 2 if violations else 0


# ---------------------------------------------------------------------------
# verify: one fast pass over every module's invariant suite.
# ---------------------------------------------------------------------------


def _verify_geometry(seed: int):
    rng = substream(seed, "verify/geometry")
    ok, detail = True, []
    for p in (1.0, 2.0, math.inf):
        for _ in range(20):
            v = rng.standard_normal(6)
            u = dual_norm_witness(v, p)
            if abs(float(u @ v) - norm(v, p)) > 1e-9:
                ok = False
    detail.append("duality(20x3)")
    for exponent in (1, 2):
        for _ in range(5):
            v = rng.standard_normal(8) * 2.0
            w = project(v, exponent, 1.0)
            feas = rng.standard_normal((10_000, 8))
            feas /= np.maximum(
                np.abs(feas).sum(1, keepdims=True) if exponent == 1
                else np.linalg.norm(feas, axis=1, keepdims=True), 1e-12)
            feas *= rng.random((10_000, 1))
            if np.any(np.linalg.norm(feas - v, axis=1) < np.linalg.norm(w - v) - 1e-9):
                ok = False
    detail.append("projection-optimality(1e4)")
    for _ in range(200):
        x, y = rng.standard_normal(5), rng.standard_normal(5)
        lhs = 0.5 * np.linalg.norm(x) ** 2
        rhs = 0.5 * np.linalg.norm(y) ** 2 + y @ (x - y) + 0.5 * np.linalg.norm(x - y) ** 2
        if lhs > rhs + 1e-9:
            ok = False
    detail.append("beta@p=2")
    return ok, ",".join(detail)


def _verify_models(seed: int):
    rng = substream(seed, "verify/models")
    ok = True
    geom = GeometryConfig.make(2.0, 4)
    specs = [M.glm_model(geom, "logistic"), M.glm_model(geom, "probit"),
             M.rr_model(geom, c=1.0), M.rr_model(geom)]
    h = 1e-5
    for model in specs:
        for _ in range(100):
            w, x = rng.standard_normal(4) * 0.4, rng.standard_normal(4) * 0.4
            y = (rng.random() if model.family == "glm" else rng.uniform(-1, 1))
            g = M.grad(model, w, x, y)
            for j in range(4):
                e = np.zeros(4)
                e[j] = h
                fd = (M.loss(model, w + e, x, y) - M.loss(model, w - e, x, y)) / (2 * h)
                if abs(fd - g[j]) > 1e-5 * max(1.0, abs(g[j])):
                    ok = False
    relu = M.relu_model(3)
    w = np.array([1.0, 0.0, 0.0])
    x = np.array([0.0, 1.0, 0.0])  # <w, x> = 0: tie goes to the active branch
    if not np.allclose(M.grad(relu, w, x, 1.0), -x):
        ok = False
    return ok, "fd-gradients(4 specs x100),relu-tie"


def _verify_synthdata(seed: int):
    ok = True
    geom = GeometryConfig.make(2.0, 4)
    model = M.glm_model(geom)
    w_star = np.array([0.5, -0.5, 0.5, 0.5])
    d1 = SD.generate(model, w_star, 64, seed)
    d2 = SD.generate(model, w_star, 64, seed)
    ok &= np.array_equal(d1.X, d2.X) and np.array_equal(d1.y, d2.y)
    ok &= bool(np.all(np.linalg.norm(d1.X, axis=1) <= 1 + 1e-12))
    rng = substream(seed, "verify/cone")
    for _ in range(200):
        ws = np.zeros(6)
        ws[:3] = rng.standard_normal(3)
        w = rng.standard_normal(6)
        if norm(w, 1.0) > norm(ws, 1.0):
            w *= 0.9 * norm(ws, 1.0) / norm(w, 1.0)
        nu = w - ws
        s_mask = ws != 0
        if norm(nu[~s_mask], 1.0) > norm(nu[s_mask], 1.0) + 1e-12:
            ok = False
        if norm(nu, 1.0) > 2 * math.sqrt(int(s_mask.sum())) * np.linalg.norm(nu) + 1e-12:
            ok = False
    return ok, "determinism,feasibility,cone-lemma(200)"


def _verify_optimize(seed: int):
    ok = True
    geom = GeometryConfig.make(2.0, 4)
    model = M.glm_model(geom)
    w_star = np.full(4, 0.5)
    data = SD.generate(model, w_star, 256, seed)
    cfgo = opt.OptimizerConfig(grad_tolerance=1e-10, max_steps=400, restarts=2, seed=seed)
    res = opt.pgd(model, data, cfgo, record_trace=True)
    risks = [row[1] for row in res.trace]
    ok &= all(risks[i + 1] <= risks[i] + 1e-12 for i in range(len(risks) - 1))
    ok &= norm(res.w_hat, 2.0) <= 1 + 1e-12
    res2 = opt.pgd(model, data, cfgo)
    ok &= np.array_equal(res.w_hat, res2.w_hat)
    rc = opt.OptimizerConfig(grad_tolerance=1e-8, max_steps=50_000, lam=0.05)
    rres = opt.regularized_stationary(model, data, 0.05, rc)
    gn = np.linalg.norm(
        M.empirical_gradient(model, rres.w_hat, data.X, data.y) + 0.05 * rres.w_hat)
    ok &= gn <= 1e-8
    return ok, "descent,feasibility,determinism,regularized-optimality"


def _verify_rademacher(seed: int):
    ok = True
    geom = GeometryConfig.make(2.0, 2)
    model = M.glm_model(geom)
    data = SD.generate(model, np.array([0.6, -0.4]), 8, seed)
    grid, _ = RC.ball_grid(2, 2.0, 1.0, n_dirs=64, n_radii=10)
    fc = RC.gradient_class(model, data)
    bf = RC.exact_rc_bruteforce(fc, grid)
    mc = RC.estimate_normed_rc(fc, 2.0, draws=2000, seed=seed, sup_solver="grid", grid=grid)
    ok &= abs(mc.value - bf.value) <= 3 * mc.stderr
    rng = substream(seed, "verify/rc")
    for _ in range(10):
        n, K = int(rng.integers(3, 6)), int(rng.integers(1, 3))
        fcls, h_maps, L = _random_smooth_instance(rng, n, 2, K)
        cand, _ = RC.ball_grid(2, 2.0, 1.0, n_dirs=32, n_radii=6)
        ok &= RC.check_contraction(fcls, h_maps, L, cand, mode="exact")["holds"]
        X = rng.standard_normal((n, 3))
        ok &= RC.check_smooth_type(X, 3.0, mode="exact")["holds"]
    Mtest = rng.standard_normal((5, 5))
    Mtest = Mtest + Mtest.T
    ok &= abs(RC.power_spectral_norm(Mtest, iters=200, rng=rng)
              - np.abs(np.linalg.eigvalsh(Mtest)).max()) < 1e-6
    return ok, "oracle-agreement,contraction(10),smooth-type(10),power-iteration"


def _verify_gd(seed: int):
    geom = GeometryConfig.make(2.0, 4)
    model = M.glm_model(geom)
    w_star = np.full(4, 0.5)
    gd = GD.gd_constants(model, None, "norm_based")
    report = GD.verify_gd(model, w_star, gd, 50, 20_000, seed)
    ok = report.violations == 0
    weak = GD.GdSpec(alpha=gd.alpha, mu=gd.mu / 10.0, norm_p=gd.norm_p, regime=gd.regime)
    control = GD.verify_gd(model, w_star, weak, 50, 20_000, seed)
    ok &= control.violations >= 1
    return ok, f"holds(50 probes),negative-control({control.violations} violations)"


def _verify_relu(seed: int):
    ok = True
    for d in (3, 5, 8, 16):
        inst = RL.build_lb_instance(d, 3)
        ok &= float(np.max(np.abs(inst.B_matrix @ inst.B_inverse - np.eye(d)))) < 1e-10
        ok &= bool(np.all(np.linalg.norm(inst.B_matrix, axis=1) <= 1.0 + 1e-15))
    rng = substream(seed, "verify/relu")
    inst = RL.build_lb_instance(6, 3)
    for _ in range(100):
        sigma = rng.choice([-1.0, 1.0], size=6)
        w = RL.sign_pattern_weight(inst, sigma)
        ok &= bool(np.all(np.sign(inst.B_matrix @ w) == sigma))
    ok &= abs(RL.exact_mean_abs_sign_sum(3) - 1.5) < 1e-12
    ts = np.linspace(-3, 3, 2001)
    for gamma in (0.1, 0.4, 0.9):
        z = RL.zeta_gamma(ts, gamma)
        ok &= bool(np.all(z >= (np.abs(ts) <= gamma) - 1e-12))
        ok &= bool(np.all(z <= (np.abs(ts) <= 2 * gamma) + 1e-12))
    w = rng.standard_normal(5)
    X = rng.standard_normal((40, 5))
    prof = RL.margin_profile(w, X)
    gs = np.linspace(0, 1, 50)
    xs = prof.xi(gs)
    ok &= bool(np.all(np.diff(xs) >= 0)) and xs[-1] == 1.0
    return ok, "B-algebra(d<=16),sign-patterns(100),khintchine-exact,zeta-sandwich,margin-cdf"


def _verify_harness(seed: int):
    ok = True
    ns = [100, 200, 400, 800]
    fit = fit_rate(ns, [3.0 / math.sqrt(n) for n in ns])
    ok &= abs(fit["slope"] + 0.5) < 1e-9 and fit["r_squared"] > 1 - 1e-12
    fit = fit_rate(ns, [5.0 / n for n in ns])
    ok &= abs(fit["slope"] + 1.0) < 1e-9
    fit = fit_rate(ns, [2.0] * 4)
    ok &= abs(fit["slope"]) < 1e-12
    return ok, "fit-rate exact laws"


def cmd_verify(cfg: ExperimentConfig) -> int:
    checks = [
        ("geometry", _verify_geometry),
        ("models", _verify_models),
        ("synthdata", _verify_synthdata),
        ("optimize", _verify_optimize),
        ("rademacher", _verify_rademacher),
        ("gdcheck", _verify_gd),
        ("relu_lab", _verify_relu),
        ("harness", _verify_harness),
    ]
    failures = 0
    for name, fn in checks:
        ok, detail = fn(cfg.seed)
        failures += not ok
        print(f"check {name:<12} {'PASS' if ok else 'FAIL'}  [{detail}]")
    print(f"verify: {len(checks) - failures}/{len(checks)} module suites passed")
    return 2 if failures else 0


# ---------------------------------------------------------------------------
# CLI plumbing.
# ---------------------------------------------------------------------------


def run(cfg: ExperimentConfig) -> int:
    dispatch = {
        "rates": cmd_rates,
        "rademacher": cmd_rademacher,
        "gd-check": cmd_gd_check,
        "lower-bound": cmd_lower_bound,
        "margin": cmd_margin,
        "verify": cmd_verify,
    }
    if cfg.command not in dispatch:
        raise ConfigError(f"unknown command {cfg.command!r}")
    return dispatch[cfg.command](cfg)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="gradconv", description=__doc__)
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out")
    parser.add_argument("--model", choices=("glm", "rr", "relu"))
    parser.add_argument("--link", choices=("logistic", "probit"))
    parser.add_argument("--d", type=int)
    parser.add_argument("--trials", type=int)
    parser.add_argument("--delta", type=float)
    parser.add_argument("--draws", dest="mc_draws", type=int)
    parser.add_argument("--n-grid", dest="n_grid",
                        type=lambda s: tuple(int(v) for v in s.split(",")))
    parser.add_argument("--oracle-m", dest="oracle_m", type=int)
    parser.add_argument("--design", choices=SD.DESIGNS)
    parser.add_argument("--tol-scale", dest="tol_scale", type=float)
    parser.add_argument("--method", choices=("pgd", "regularized"))
    parser.add_argument("--kappa", type=float)
    parser.add_argument("--tukey-c", dest="tukey_c", type=float)
    parser.add_argument("--probes", type=int)
    parser.add_argument("--lb-N", dest="lb_N", type=int)
    parser.add_argument("--timing", action="store_true", default=None)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    values: dict = {}
    try:
        if args.config:
            values.update(parse_config_file(args.config))
        for key, val in vars(args).items():
            if key in ("config",) or val is None:
                continue
            values[key] = val
        cfg = ExperimentConfig(**values)
        return run(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
