"""Monte-Carlo and brute-force Rademacher complexity machinery.

Quantities estimated here:

* normed complexity   E_eps sup_w || sum_t eps_t f(w, z_t) ||
* vector complexity   E_Eps sup_w sum_t <Eps_t, f(w, z_t)>  (sign matrices)
* Hessian complexity  E_eps sup_w || sum_t eps_t hess l(w; z_t) ||_spectral

All inner suprema are evaluated over explicit finite candidate sets (dense
ball grids at d <= 3, optionally refined by projected gradient ascent), so
every estimate is a lower estimate of the true supremum.  Inequality
checkers evaluate both sides over the *same* sign-independent candidate
set; each contraction/chain-rule inequality holds verbatim for the
restricted finite class, which keeps exact-enumeration checks slack-free
and Monte-Carlo checks honest under sign pairing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import models as M
from .geometry import norm, project, smoothness_constant
from .rngtools import as_generator, substream
from .synthdata import Dataset

__all__ = [
    "RcEstimate",
    "BallDomain",
    "FunctionClass",
    "gradient_class",
    "gprime_class",
    "ball_grid",
    "estimate_normed_rc",
    "exact_rc_bruteforce",
    "check_contraction",
    "check_chain_rule",
    "check_smooth_type",
    "estimate_hessian_rc",
    "gradient_rc_bound",
    "hessian_rc_bound",
    "power_spectral_norm",
    "LinearChain",
    "glm_chain",
    "rr_chain",
    "PrecheckError",
]


class PrecheckError(ValueError):
    """A declared Lipschitz bound failed on the sample grid."""


@dataclass
class RcEstimate:
    value: float
    stderr: float
    draws: int
    inner_sup: dict = field(default_factory=dict)
    kind: str = "normed"

    def __post_init__(self):
        if self.kind in ("normed", "hessian_spectral") and self.value < -1e-12:
            raise ValueError("norm-valued complexity cannot be negative")


@dataclass(frozen=True)
class BallDomain:
    exponent: float  # q, the norm on weights
    radius: float
    dim: int


@dataclass
class FunctionClass:
    """A parametrized map (w, z_t) -> R^K over all n stored instances.

    evaluate_many maps a candidate stack W (G, d) to values (G, n, K).
    sum_grad, when available, returns the w-gradient of
    sum_{t,k} S[t,k] f(w, z_t)_k and enables ascent refinement.
    """

    domain: BallDomain
    n: int
    output_dim: int
    evaluate_many: callable
    sum_grad: callable | None = None


def gradient_class(model: M.ModelSpec, data: Dataset) -> FunctionClass:
    """The gradient class {(x, y) -> grad l(w; x, y) : w in W}."""
    X, y = data.X, data.y
    g = model.geometry

    def evaluate_many(W):
        U = np.atleast_2d(W) @ X.T  # (G, n)
        coef = M.grad_coef(model, U, y)
        return coef[:, :, None] * X[None, :, :]

    def sum_grad(w, S):
        u = X @ w
        inner = (S * X).sum(axis=1)  # sum_j S[t, j] x_{t j}
        return X.T @ (inner * M.hess_coef(model, u, y))

    return FunctionClass(
        domain=BallDomain(g.dual_exponent, g.radius_B, data.d),
        n=data.n,
        output_dim=data.d,
        evaluate_many=evaluate_many,
        sum_grad=sum_grad if model.family != "relu" else None,
    )


def gprime_class(model: M.ModelSpec, data: Dataset) -> FunctionClass:
    """Scalar class w -> d/du [loss](u)|_{u=<w,x_t>}, one output per sample."""
    X, y = data.X, data.y
    g = model.geometry

    def evaluate_many(W):
        U = np.atleast_2d(W) @ X.T
        return M.grad_coef(model, U, y)[:, :, None]

    def sum_grad(w, S):
        u = X @ w
        return X.T @ (S[:, 0] * M.hess_coef(model, u, y))

    return FunctionClass(
        domain=BallDomain(g.dual_exponent, g.radius_B, data.d),
        n=data.n,
        output_dim=1,
        evaluate_many=evaluate_many,
        sum_grad=sum_grad if model.family != "relu" else None,
    )


# ---------------------------------------------------------------------------
# Candidate sets and inner suprema.
# ---------------------------------------------------------------------------


def _unit_directions(d: int, count: int, rng=None) -> np.ndarray:
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        ang = np.linspace(0.0, 2 * math.pi, count, endpoint=False)
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    if d == 3:
        # Fibonacci sphere
        i = np.arange(count) + 0.5
        phi = math.pi * (1 + math.sqrt(5)) * i
        z = 1 - 2 * i / count
        r = np.sqrt(np.maximum(1 - z * z, 0.0))
        return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    gen = as_generator(rng)
    Z = gen.standard_normal((count, d))
    return Z / np.linalg.norm(Z, axis=1, keepdims=True)


def ball_grid(
    d: int,
    q: float,
    B: float,
    n_dirs: int = 128,
    n_radii: int = 16,
    radial_step: float | None = None,
    rng=None,
) -> tuple[np.ndarray, float]:
    """Candidate stack covering the ell_q ball, plus its radial resolution.

    With `radial_step` set, radii are absolute multiples of the step (grids
    for nested balls are then nested, which makes grid-restricted suprema
    monotone in the radius).
    """
    dirs = _unit_directions(d, n_dirs, rng)
    scale = np.array([norm(u, q) for u in dirs])
    dirs = dirs / scale[:, None]
    if radial_step is not None:
        radii = np.arange(1, int(B / radial_step) + 1) * radial_step
        resolution = radial_step
    else:
        radii = np.linspace(0.0, B, n_radii + 1)[1:]
        resolution = B / n_radii
    W = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, d)
    W = np.vstack([np.zeros((1, d)), W])
    return W, resolution


def _block_norms(V: np.ndarray, p: float) -> np.ndarray:
    """ell_p norms over the trailing axis."""
    if p == math.inf:
        return np.max(np.abs(V), axis=-1)
    if p == 1.0:
        return np.sum(np.abs(V), axis=-1)
    if p == 2.0:
        return np.sqrt(np.sum(V * V, axis=-1))
    return np.sum(np.abs(V) ** p, axis=-1) ** (1.0 / p)


def _grid_sup_values(FG: np.ndarray, E: np.ndarray, norm_p: float, chunk: int = 512) -> np.ndarray:
    """max over grid of ||sum_t eps_t f||_p, one value per sign row of E."""
    D = E.shape[0]
    out = np.empty(D)
    for lo in range(0, D, chunk):
        sub = E[lo : lo + chunk]
        V = np.einsum("dn,gnk->dgk", sub, FG)
        out[lo : lo + chunk] = _block_norms(V, norm_p).max(axis=1)
    return out


def _norm_subgradient(v: np.ndarray, p: float) -> np.ndarray:
    nv = norm(v, p)
    if nv == 0:
        return np.zeros_like(v)
    if p == 2.0:
        return v / nv
    if p == math.inf:
        g = np.zeros_like(v)
        i = int(np.argmax(np.abs(v)))
        g[i] = np.sign(v[i])
        return g
    return np.sign(v) * (np.abs(v) / nv) ** (p - 1.0)


def _ascent_sup(fc: FunctionClass, eps: np.ndarray, norm_p: float, rng, restarts: int,
                steps: int, step_size: float, starts_extra=None) -> float:
    """Multi-restart projected gradient ascent on w -> ||sum eps_t f(w)||."""
    dom = fc.domain
    qexp = int(dom.exponent)

    def value(w):
        V = fc.evaluate_many(w[None])[0]
        return norm(eps @ V, norm_p)

    def grad(w):
        V = fc.evaluate_many(w[None])[0]
        c = _norm_subgradient(eps @ V, norm_p)
        return fc.sum_grad(w, eps[:, None] * c[None, :])

    best = 0.0
    starts = list(starts_extra) if starts_extra is not None else []
    while len(starts) < restarts:
        z = rng.standard_normal(dom.dim)
        r = dom.radius * rng.random() ** (1.0 / dom.dim)
        starts.append(project(r * z / max(np.linalg.norm(z), 1e-300), qexp, dom.radius))
    for w0 in starts:
        w = project(np.asarray(w0, float), qexp, dom.radius)
        v = value(w)
        for _ in range(steps):
            w_next = project(w + step_size * grad(w), qexp, dom.radius)
            v_next = value(w_next)
            if v_next <= v + 1e-14:
                break
            w, v = w_next, v_next
        best = max(best, v)
    return best


def _estimate_ascent_step(fc: FunctionClass, eps: np.ndarray, norm_p: float, rng,
                          probes: int = 100) -> float:
    """Crude 1/H step from the maximal gradient-variation ratio on random
    probe pairs (per-instance, shared across draws)."""
    dom = fc.domain
    qexp = int(dom.exponent)

    def grad(w):
        V = fc.evaluate_many(w[None])[0]
        c = _norm_subgradient(eps @ V, norm_p)
        return fc.sum_grad(w, eps[:, None] * c[None, :])

    H = 0.0
    for _ in range(probes // 2):
        a = project(rng.standard_normal(dom.dim) * dom.radius, qexp, dom.radius)
        b = project(rng.standard_normal(dom.dim) * dom.radius, qexp, dom.radius)
        dist = np.linalg.norm(a - b)
        if dist > 1e-12:
            H = max(H, np.linalg.norm(grad(a) - grad(b)) / dist)
    return 1.0 / H if H > 0 else dom.radius


def _sign_matrix(rng, draws: int, n: int) -> np.ndarray:
    return rng.choice([-1.0, 1.0], size=(draws, n))


def _all_signs(n: int) -> np.ndarray:
    if n == 0:
        return np.zeros((1, 0))
    if n > 20:
        raise ValueError("exhaustive sign enumeration limited to n <= 20")
    bits = (np.arange(2**n)[:, None] >> np.arange(n)[None, :]) & 1
    return 2.0 * bits - 1.0


def estimate_normed_rc(
    fc: FunctionClass,
    norm_p: float,
    draws: int,
    seed: int = 0,
    sup_solver: str = "auto",
    grid: np.ndarray | None = None,
    restarts: int = 8,
    steps: int = 300,
    grid_dirs: int = 128,
    grid_radii: int = 16,
) -> RcEstimate:
    """Monte-Carlo estimate of E_eps sup_w ||sum_t eps_t f(w, z_t)||_p.

    Every per-draw supremum is taken over explicit feasible points (grid
    and/or ascent endpoints), so the estimate is a lower estimate of the
    true complexity.  Draw signs depend only on (seed, n), which keeps sign
    streams identical across domains of different radii.
    """
    if draws < 1:
        raise ValueError("draws must be >= 1")
    dom = fc.domain
    if sup_solver == "auto":
        sup_solver = "grid" if dom.dim <= 3 else "ascent"
    E = _sign_matrix(substream(seed, "rc/signs"), draws, fc.n)

    diagnostics = {"solver": sup_solver, "restarts": restarts}
    if sup_solver in ("grid", "both"):
        if grid is None:
            grid, resolution = ball_grid(dom.dim, dom.exponent, dom.radius,
                                         n_dirs=grid_dirs, n_radii=grid_radii)
            diagnostics["grid_resolution"] = resolution
        FG = fc.evaluate_many(grid)
        values = _grid_sup_values(FG, E, norm_p)
        diagnostics["grid_points"] = grid.shape[0]
    else:
        values = np.zeros(draws)

    if sup_solver in ("ascent", "both"):
        if fc.sum_grad is None:
            raise ValueError("ascent solver needs a sum_grad implementation")
        rng = substream(seed, "rc/ascent")
        step = _estimate_ascent_step(fc, E[0], norm_p, rng)
        diagnostics["ascent_step"] = step
        for i in range(draws):
            v = _ascent_sup(fc, E[i], norm_p, rng, restarts, steps, step)
            values[i] = max(values[i], v)

    return RcEstimate(
        value=float(values.mean()),
        stderr=float(values.std(ddof=1) / math.sqrt(draws)) if draws > 1 else 0.0,
        draws=draws,
        inner_sup=diagnostics,
        kind="normed",
    )


def exact_rc_bruteforce(
    fc: FunctionClass, w_grid: np.ndarray, norm_p: float = 2.0
) -> RcEstimate:
    """Exact expectation over all 2^n sign vectors of the grid-restricted sup."""
    if fc.n > 16:
        raise ValueError("brute force limited to n <= 16")
    E = _all_signs(fc.n)
    if fc.n == 0:
        return RcEstimate(value=0.0, stderr=0.0, draws=1, kind="normed",
                          inner_sup={"solver": "bruteforce", "grid_points": 0})
    FG = fc.evaluate_many(np.atleast_2d(w_grid))
    values = _grid_sup_values(FG, E, norm_p)
    return RcEstimate(
        value=float(values.mean()),
        stderr=0.0,
        draws=E.shape[0],
        inner_sup={"solver": "bruteforce", "grid_points": np.atleast_2d(w_grid).shape[0]},
        kind="normed",
    )


# ---------------------------------------------------------------------------
# Inequality checkers.  Both sides always share one finite candidate set;
# the inequalities hold for that restricted class, so exact enumeration
# admits no slack and Monte-Carlo runs use paired sign streams.
# ---------------------------------------------------------------------------


def _vector_sup_values(Fflat: np.ndarray, Eflat: np.ndarray, chunk: int = 512) -> np.ndarray:
    """sup over candidates of sum_t <Eps_t, f> for each flattened sign row."""
    D = Eflat.shape[0]
    out = np.empty(D)
    for lo in range(0, D, chunk):
        out[lo : lo + chunk] = (Eflat[lo : lo + chunk] @ Fflat.T).max(axis=1)
    return out


def check_contraction(
    fc: FunctionClass,
    h_maps,
    lipschitz_L: float,
    w_candidates: np.ndarray,
    mode: str = "exact",
    draws: int = 256,
    seed: int = 0,
) -> dict:
    """Scalar complexity of {sum_t eps_t h_t(f(w, z_t))} against
    sqrt(2) L times the vector complexity of the class.

    h_maps is a list of n scalar maps on R^K, each L-Lipschitz in ell_2.
    """
    n, K = fc.n, fc.output_dim
    F = fc.evaluate_many(np.atleast_2d(w_candidates))  # (G, n, K)
    G = F.shape[0]
    if len(h_maps) != n:
        raise ValueError("need one h_t per instance")
    HV = np.empty((G, n))
    for t, h in enumerate(h_maps):
        HV[:, t] = h(F[:, t, :])
    Fflat = F.reshape(G, n * K)

    if mode == "exact":
        if n * K > 20:
            raise ValueError("exact mode needs n*K <= 20")
        lhs = float((_all_signs(n) @ HV.T).max(axis=1).mean())
        rhs_vec = float(_vector_sup_values(Fflat, _all_signs(n * K)).mean())
        rhs = math.sqrt(2.0) * lipschitz_L * rhs_vec
        scale = max(abs(lhs), abs(rhs), 1.0)
        return {"lhs": lhs, "rhs": rhs, "holds": lhs <= rhs + 1e-9 * scale,
                "mode": mode, "stderr": 0.0}

    # paired Monte-Carlo: one K x n sign matrix per draw, row 0 reused as
    # the scalar stream
    rng = substream(seed, "contraction/signs")
    Em = _sign_matrix(rng, draws, n * K).reshape(draws, K, n)
    lhs_vals = (Em[:, 0, :] @ HV.T).max(axis=1)
    rhs_vals = _vector_sup_values(Fflat, Em.transpose(0, 2, 1).reshape(draws, n * K))
    diff = lhs_vals - math.sqrt(2.0) * lipschitz_L * rhs_vals
    stderr = float(diff.std(ddof=1) / math.sqrt(draws))
    return {
        "lhs": float(lhs_vals.mean()),
        "rhs": float(math.sqrt(2.0) * lipschitz_L * rhs_vals.mean()),
        "holds": float(diff.mean()) <= 3.0 * stderr,
        "mode": mode,
        "stderr": stderr,
        "paired_mean": float(diff.mean()),
    }


@dataclass
class LinearChain:
    """Composition instances l_t(w) = G_t(A_t w) with linear inner maps.

    A has shape (n, K, d); G_grad(t, a) returns the K-vector gradient of
    G_t at a (vectorized over leading axes of a).
    """

    A: np.ndarray
    G_grad: callable
    domain: BallDomain

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def K(self) -> int:
        return self.A.shape[1]

    def F_values(self, W: np.ndarray) -> np.ndarray:
        return np.einsum("gd,nkd->gnk", np.atleast_2d(W), self.A)

    def composed_grad_class(self) -> FunctionClass:
        def evaluate_many(W):
            FV = self.F_values(W)  # (G, n, K)
            GG = np.stack([self.G_grad(t, FV[:, t, :]) for t in range(self.n)], axis=1)
            return np.einsum("gnk,nkd->gnd", GG, self.A)

        d = self.A.shape[2]
        return FunctionClass(domain=self.domain, n=self.n, output_dim=d,
                             evaluate_many=evaluate_many)

    def gprime_vector_class(self) -> FunctionClass:
        def evaluate_many(W):
            FV = self.F_values(W)
            return np.stack([self.G_grad(t, FV[:, t, :]) for t in range(self.n)], axis=1)

        return FunctionClass(domain=self.domain, n=self.n, output_dim=self.K,
                             evaluate_many=evaluate_many)


def glm_chain(model: M.ModelSpec, data: Dataset) -> LinearChain:
    """K = 1 chain with G_t(s) = (sigma(s) - y_t)^2 and F_t(w) = <x_t, w>."""
    A = data.X[:, None, :]
    y = data.y

    def G_grad(t, a):
        return M.grad_coef(model, a[..., 0], y[t])[..., None]

    g = model.geometry
    return LinearChain(A=A, G_grad=G_grad,
                       domain=BallDomain(g.dual_exponent, g.radius_B, data.d))


rr_chain = glm_chain  # same structure; grad_coef dispatches on the family


def check_chain_rule(
    chain: LinearChain,
    L_G: float,
    L_F: float,
    w_candidates: np.ndarray,
    norm_p: float = 2.0,
    mode: str = "exact",
    draws: int = 256,
    seed: int = 0,
    precheck_points: int = 64,
) -> dict:
    """(1/2) normed RC of the composed gradient class against
    L_F * (vector RC of grad-G-after-F) + L_G * E sup ||sum_t JacF_t Eps_t||.

    The declared Lipschitz bounds are verified on a sample grid first.
    """
    n, K = chain.n, chain.K
    W = np.atleast_2d(w_candidates)
    rng = substream(seed, "chain/precheck")
    sample = W[rng.choice(W.shape[0], size=min(precheck_points, W.shape[0]), replace=False)]
    FV = chain.F_values(sample)
    for t in range(n):
        gg = np.linalg.norm(chain.G_grad(t, FV[:, t, :]), axis=-1)
        if gg.max() > L_G * (1 + 1e-9):
            raise PrecheckError(f"||grad G_{t}|| reaches {gg.max():.6g} > L_G = {L_G}")
        jac_frob = math.sqrt(float((chain.A[t] ** 2).sum()))
        if jac_frob > L_F * (1 + 1e-9):
            raise PrecheckError(f"Frobenius bound of JacF_{t} is {jac_frob:.6g} > L_F = {L_F}")

    composed = chain.composed_grad_class()
    Fcomp = composed.evaluate_many(W)  # (G, n, d)
    gvec = chain.gprime_vector_class()
    Fg = gvec.evaluate_many(W).reshape(W.shape[0], n * K)
    # Jacobians are constant (linear F): sum_t JacF_t Eps_t needs no sup
    Aflat = chain.A.reshape(n * K, -1)

    if mode == "exact":
        if max(n, n * K) > 20:
            raise ValueError("exact mode needs n*K <= 20")
        lhs_half = 0.5 * float(
            _grid_sup_values(Fcomp, _all_signs(n), norm_p).mean()
        )
        Em = _all_signs(n * K)
        term1 = float(_vector_sup_values(Fg, Em).mean())
        term2 = float(_block_norms(Em @ Aflat, norm_p).mean())
        rhs = L_F * term1 + L_G * term2
        scale = max(abs(lhs_half), abs(rhs), 1.0)
        return {"lhs_half": lhs_half, "rhs": rhs, "term_vector": term1,
                "term_data": term2, "holds": lhs_half <= rhs + 1e-9 * scale,
                "mode": mode, "stderr": 0.0}

    rng = substream(seed, "chain/signs")
    Em = _sign_matrix(rng, draws, n * K)
    eps_scalar = Em[:, :n]  # row-0 block of each K x n matrix
    lhs_vals = 0.5 * _grid_sup_values(Fcomp, eps_scalar, norm_p)
    term1_vals = _vector_sup_values(Fg, Em)
    term2_vals = _block_norms(Em @ Aflat, norm_p)
    diff = lhs_vals - (L_F * term1_vals + L_G * term2_vals)
    stderr = float(diff.std(ddof=1) / math.sqrt(draws))
    return {
        "lhs_half": float(lhs_vals.mean()),
        "rhs": float((L_F * term1_vals + L_G * term2_vals).mean()),
        "holds": float(diff.mean()) <= 3.0 * stderr,
        "mode": mode,
        "stderr": stderr,
        "paired_mean": float(diff.mean()),
    }


def check_smooth_type(
    x_rows: np.ndarray, p: float, mode: str = "exact", draws: int = 4096, seed: int = 0
) -> dict:
    """E || sum_t eps_t x_t ||_p against sqrt(beta sum_t ||x_t||_p^2).

    For p = inf the ell_q proxy norm (q = max(2, ln d)) replaces the max
    norm on both sides, matching the documented smoothness convention.
    """
    X = np.atleast_2d(np.asarray(x_rows, dtype=float))
    n, d = X.shape
    beta = smoothness_constant(p, d)
    p_eff = max(2.0, math.log(d)) if p == math.inf else p
    rhs = math.sqrt(beta * float(np.sum(_block_norms(X, p_eff) ** 2)))
    if mode == "exact":
        if n > 16:
            raise ValueError("exact mode limited to n <= 16")
        vals = _block_norms(_all_signs(n) @ X, p_eff)
        lhs = float(vals.mean())
        return {"lhs": lhs, "rhs": rhs, "holds": lhs <= rhs * (1 + 1e-12) + 1e-12,
                "stderr": 0.0, "mode": mode}
    E = _sign_matrix(substream(seed, "smoothtype"), draws, n)
    vals = _block_norms(E @ X, p_eff)
    lhs = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(draws))
    return {"lhs": lhs, "rhs": rhs, "holds": lhs <= rhs + 3.0 * stderr,
            "stderr": stderr, "mode": mode}


# ---------------------------------------------------------------------------
# Spectral norms and the Hessian complexity.
# ---------------------------------------------------------------------------


def power_spectral_norm(Mb: np.ndarray, iters: int = 50, tol: float = 1e-8, rng=None) -> np.ndarray:
    """Spectral norms of a stack of symmetric matrices by power iteration.

    Runs both sign branches through a Gershgorin shift (M + sI and sI - M
    are PSD), so max(|lambda_max|, |lambda_min|) is recovered even for
    indefinite matrices.
    """
    Mb = np.asarray(Mb, dtype=float)
    single = Mb.ndim == 2
    if single:
        Mb = Mb[None]
    B, d, _ = Mb.shape
    s = np.abs(Mb).sum(axis=2).max(axis=1)  # Gershgorin radius bound
    rng = as_generator(rng)
    out = np.zeros(B)
    for sign in (+1.0, -1.0):
        A = sign * Mb + s[:, None, None] * np.eye(d)[None]
        v = rng.standard_normal((B, d))
        v /= np.maximum(np.linalg.norm(v, axis=1, keepdims=True), 1e-300)
        lam = np.zeros(B)
        for _ in range(iters):
            u = np.einsum("bij,bj->bi", A, v)
            nrm = np.linalg.norm(u, axis=1)
            lam_new = nrm  # Rayleigh quotient for unit v after convergence
            if np.all(np.abs(lam_new - lam) <= tol * np.maximum(lam_new, 1.0)):
                lam = lam_new
                break
            lam = lam_new
            v = u / np.maximum(nrm[:, None], 1e-300)
        out = np.maximum(out, lam - s)
    return out[0] if single else out


def estimate_hessian_rc(
    model: M.ModelSpec,
    data: Dataset,
    draws: int,
    seed: int = 0,
    w_candidates: np.ndarray | None = None,
    power_iters: int = 50,
    power_tol: float = 1e-8,
    kappa: float = 1.0,
    mode: str = "mc",
) -> RcEstimate:
    """E_eps sup_w || sum_t eps_t hess l(w; x_t, y_t) ||_spectral, with the
    closed-form scaling bound attached for comparison."""
    if model.family == "relu":
        raise ValueError("Hessian complexity requires a smooth family")
    X, y = data.X, data.y
    n, d = X.shape
    dom = gradient_class(model, data).domain
    if w_candidates is None:
        w_candidates, _ = ball_grid(d, dom.exponent, dom.radius, n_dirs=64, n_radii=8)
    W = np.atleast_2d(w_candidates)
    U = W @ X.T
    coef = M.hess_coef(model, U, y)  # (G, n)
    outer = np.einsum("ti,tj->tij", X, X)  # (n, d, d)

    if mode == "exact":
        if n > 16:
            raise ValueError("exact mode limited to n <= 16")
        E = _all_signs(n)
    else:
        E = _sign_matrix(substream(seed, "hessrc/signs"), draws, n)
    rng = substream(seed, "hessrc/power")
    values = np.empty(E.shape[0])
    for i in range(E.shape[0]):
        Mstack = np.einsum("gt,tij->gij", E[i] * coef, outer)
        values[i] = power_spectral_norm(Mstack, iters=power_iters, tol=power_tol, rng=rng).max()
    stderr = 0.0 if mode == "exact" else float(values.std(ddof=1) / math.sqrt(len(values)))
    return RcEstimate(
        value=float(values.mean()),
        stderr=stderr,
        draws=E.shape[0],
        inner_sup={"solver": "grid+power", "grid_points": W.shape[0],
                   "bound": kappa * hessian_rc_bound(model, n, d)},
        kind="hessian_spectral",
    )


# ---------------------------------------------------------------------------
# Closed-form complexity bounds with explicit constants.
# ---------------------------------------------------------------------------


def _spectral_beta(d: int) -> float:
    # smoothness proxy for the spectral norm on d x d symmetric matrices,
    # mirroring the ell_inf convention with the log of the summed dimensions
    return max(2.0, math.log(2 * d)) - 1.0


def gradient_rc_bound(model: M.ModelSpec, n: int) -> float:
    """Closed-form bound on the gradient-class normed complexity.

    Constant conventions, factor by factor: the composition split
    contributes 2 * (L_F * [scalar term] + L_G * [data term]); the scalar
    slope class contracts with Lipschitz constant 4C^2 (squared-error link,
    |d/ds 2(sigma - y) sigma'| <= 4C^2) or 2C (rho' is 2C-Lipschitz under
    the grid bound used here), then pays B for the linear class; every
    signed data sum is bounded by sqrt(2 beta R^2 n) (the sqrt(2) is the
    moment-bound convention).
    """
    consts = model.ensure_constants()
    g = model.geometry
    B, R, beta = g.radius_B, g.radius_R, g.beta
    C = consts.C_upper
    data_term = math.sqrt(2.0 * beta * R * R * n)
    if model.family == "glm":
        # L_F = R, L_G = 2C; scalar class: 4C^2-Lipschitz slope, sup_w = B ||.||
        return 2.0 * (R * 4.0 * C * C * B + 2.0 * C) * data_term
    if model.family == "robust_regression":
        # L_F = R, L_G = C; scalar class: 2C-Lipschitz slope
        return 2.0 * (R * 2.0 * C * B + C) * data_term
    raise ValueError("closed-form gradient bound covers smooth families only")


def hessian_rc_bound(model: M.ModelSpec, n: int, d: int, kappa: float = 1.0) -> float:
    """Closed-form bound on the Hessian-class spectral complexity.

    Same tracing discipline as gradient_rc_bound: the second-order split
    pays 2 * (R^2 * [curvature-slope term] + [sup curvature] * [rank-one
    data term]); curvature slopes contract at 6C^2 (squared-error link) or
    the third-derivative bound (robust rho); the rank-one sum uses the
    spectral smoothness proxy max(2, ln 2d) - 1.
    """
    consts = model.ensure_constants()
    g = model.geometry
    B, R, beta = g.radius_B, g.radius_R, g.beta
    C = consts.C_upper
    vec_term = math.sqrt(2.0 * beta * R * R * n)
    spec_term = math.sqrt(2.0 * _spectral_beta(d) * R**4 * n)
    if model.family == "glm":
        return kappa * (2.0 * R * R * 6.0 * C * C * B * vec_term + 2.0 * 4.0 * C * C * spec_term)
    if model.family == "robust_regression":
        C3 = max(C, consts.third_deriv_upper)
        return kappa * (2.0 * R * R * C3 * B * vec_term + 2.0 * C * spec_term)
    raise ValueError("closed-form Hessian bound covers smooth families only")
