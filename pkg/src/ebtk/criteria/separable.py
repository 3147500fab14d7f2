"""PPT test, product-ensemble decompositions of Choi states, Holevo synthesis."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..channels import Channel, Ensemble, HolevoForm, Povm, basis_trace_distance, holevo_to_channel
from ..config import TOL_PSD, DecompositionConfig
from ..errors import NotAValidDecomposition
from ..linalg import hermitian_part, jacobi_eigh, partial_transpose, sqrtm_psd


@dataclass(frozen=True)
class PptResult:
    passed: bool
    min_eigenvalue: float
    # cross-check from the Jacobi eigensolver, filled in for refutations
    verified_min_eigenvalue: Optional[float] = None

    def __str__(self):
        return "Pass" if self.passed else f"Fail({self.min_eigenvalue:.3e})"


def ppt_check(c: Channel, verify: bool = False) -> PptResult:
    """Positivity of the Choi state under transposition of the input factor."""
    pt = partial_transpose(c.choi, c.dims, 0)
    lam = float(np.linalg.eigvalsh(hermitian_part(pt))[0])
    passed = lam >= -TOL_PSD
    verified = None
    if verify and not passed:
        verified = float(jacobi_eigh(pt)[0][0])
    return PptResult(passed, lam, verified)


@dataclass
class DecompositionResult:
    ensemble: Optional[Ensemble]
    residual: float
    terms: int
    attempts: int
    reason: str = ""

    @property
    def success(self) -> bool:
        return self.ensemble is not None


def _herm_coords(m: np.ndarray, iu) -> np.ndarray:
    """Real isometric coordinates along the last two axes (batched ``herm_to_real``)."""
    d = m.shape[-1]
    diag = np.diagonal(m, axis1=-2, axis2=-1).real
    up = m[..., iu[0], iu[1]]
    return np.concatenate([diag, np.sqrt(2.0) * up.real, np.sqrt(2.0) * up.imag], axis=-1)[..., : d * d]


def _product_vectors(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("ki,kj->kij", a, b).reshape(a.shape[0], -1)


def _reconstruct(a, b) -> np.ndarray:
    v = _product_vectors(a, b)
    return v.T @ v.conj()


def _fit_products(rho, dims, a, b, max_iters: int, target: float):
    """Damped Gauss-Newton on ``sum_k |a_k b_k><a_k b_k| = rho``.

    The parametrization keeps every term a PSD product operator, so any zero
    of the residual is a separable decomposition. Steps are minimum-norm
    (the problem is underdetermined), damped Levenberg-Marquardt style.
    """
    da, db = dims
    dd = da * db
    k = a.shape[0]
    iu = np.triu_indices(dd, 1)
    eye_a, eye_b = np.eye(da), np.eye(db)

    def residual(a, b):
        return _herm_coords(_reconstruct(a, b) - rho, iu)

    r = residual(a, b)
    f = np.linalg.norm(r)
    mu = 1e-3 * max(f, 1e-12)
    for it in range(max_iters):
        if f <= target:
            return a, b, f, it
        v = _product_vectors(a, b)  # k x dd
        dva = np.einsum("ij,kl->kijl", eye_a, b).reshape(k, da, dd)
        dvb = np.einsum("ki,jl->kjil", a, eye_b).reshape(k, db, dd)
        dv = np.concatenate([dva, dvb], axis=1)  # k x p x dd
        outer = np.einsum("kpi,kj->kpij", dv, v.conj())
        herm = outer + np.swapaxes(outer, -1, -2).conj()
        skew = 1j * (outer - np.swapaxes(outer, -1, -2).conj())
        jac = np.concatenate([_herm_coords(herm, iu), _herm_coords(skew, iu)], axis=1)
        jac = jac.reshape(-1, dd * dd).T  # residual coords x real params
        jjt = jac @ jac.T
        improved = False
        while mu < 1e10:
            y = np.linalg.solve(jjt + mu * np.eye(jjt.shape[0]), r)
            step = -(jac.T @ y).reshape(k, 2, da + db)
            delta = step[:, 0] + 1j * step[:, 1]
            a2, b2 = a + delta[:, :da], b + delta[:, da:]
            r2 = residual(a2, b2)
            f2 = np.linalg.norm(r2)
            if f2 < f:
                a, b, r, f = a2, b2, r2, f2
                mu = max(mu / 5, 1e-15)
                improved = True
                break
            mu *= 4
        if not improved:
            return a, b, f, it
    return a, b, f, max_iters


def _initial_terms(rho, dims, k: int, rng: np.random.Generator, use_eigen: bool):
    da, db = dims
    a = (rng.standard_normal((k, da)) + 1j * rng.standard_normal((k, da))) * 0.1 / np.sqrt(k)
    b = rng.standard_normal((k, db)) + 1j * rng.standard_normal((k, db))
    b /= np.linalg.norm(b, axis=1, keepdims=True)
    if use_eigen:
        w, v = np.linalg.eigh(rho)
        order = np.argsort(w)[::-1]
        for slot, idx in enumerate(order[:k]):
            if w[idx] <= 0:
                break
            u, s, vh = np.linalg.svd(v[:, idx].reshape(da, db))
            a[slot] += np.sqrt(w[idx]) * s[0] * u[:, 0]
            b[slot] = vh[0]
    return a, b


def _to_ensemble(a, b) -> Ensemble:
    na = np.sum(np.abs(a) ** 2, axis=1)
    nb = np.sum(np.abs(b) ** 2, axis=1)
    w = na * nb
    keep = w > 1e-15 * w.max()
    a, b, na, nb, w = a[keep], b[keep], na[keep], nb[keep], w[keep]
    left = tuple(np.outer(x, x.conj()) / n for x, n in zip(a, na))
    right = tuple(np.outer(x, x.conj()) / n for x, n in zip(b, nb))
    return Ensemble(w / w.sum(), left, right)


def _prune(ens: Ensemble, rho: np.ndarray, eps: float, floor: float = 1e-9) -> Ensemble:
    """Drop negligible-weight terms left over by the fit if the residual allows it."""
    keep = ens.weights > floor
    if keep.all() or not keep.any():
        return ens
    w = ens.weights[keep]
    pruned = Ensemble(
        w / w.sum(),
        tuple(s for s, k in zip(ens.left_states, keep) if k),
        tuple(t for t, k in zip(ens.right_states, keep) if k),
    )
    if np.linalg.norm(rho - pruned.reconstruct()) <= max(eps, np.linalg.norm(rho - ens.reconstruct())):
        return pruned
    return ens


def decompose_state(rho, dims, max_terms: int | None = None, cfg: DecompositionConfig | None = None) -> DecompositionResult:
    """Search for ``rho = sum_k w_k sigma_k (x) tau_k`` with at most ``max_terms`` terms.

    Restart 0 starts from product approximations of the eigenvectors of
    ``rho`` plus small random product terms; later restarts are random.
    """
    cfg = cfg or DecompositionConfig()
    rho = hermitian_part(np.asarray(rho, dtype=complex))
    da, db = dims
    k = max_terms or (da * db) ** 2
    target = min(1e-13, cfg.eps_sep * 1e-6)
    best = np.inf
    for attempt in range(cfg.restarts):
        rng = np.random.default_rng([cfg.seed, attempt, k])
        a, b = _initial_terms(rho, dims, k, rng, use_eigen=attempt == 0)
        a, b, f, _ = _fit_products(rho, dims, a, b, cfg.max_iters, target)
        if f <= cfg.eps_sep:
            ens = _prune(_to_ensemble(a, b), rho, cfg.eps_sep)
            res = float(np.linalg.norm(rho - ens.reconstruct()))
            if res <= cfg.eps_sep:
                return DecompositionResult(ens, res, len(ens), attempt + 1)
            f = res
        best = min(best, f)
    return DecompositionResult(None, float(best), k, cfg.restarts, reason="no product ensemble within eps_sep")


def separable_decomposition(c: Channel, max_terms: int | None = None, cfg: DecompositionConfig | None = None) -> DecompositionResult:
    """Finite separable decomposition of the channel's Choi state (PPT pre-filtered)."""
    ppt = ppt_check(c)
    if not ppt.passed:
        return DecompositionResult(None, np.inf, 0, 0, reason=f"PPT pre-filter: {ppt}")
    return decompose_state(c.choi, c.dims, max_terms, cfg)


def _holevo_from_effects(effects, preparations, dim_in: int, tol: float) -> HolevoForm:
    total = sum(effects)
    defect = float(np.max(np.abs(total - np.eye(dim_in))))
    if defect > tol:
        raise NotAValidDecomposition(f"effects sum to identity only within {defect:.2e}")
    s = sqrtm_psd(total, inverse=True)
    effects = [hermitian_part(s @ m @ s) for m in effects]
    effects[-1] = effects[-1] + (np.eye(dim_in) - sum(effects))
    return HolevoForm(Povm(tuple(effects)), tuple(preparations))


def holevo_from_decomposition(e: Ensemble, dim_in: int, tol: float = 1e-6) -> HolevoForm:
    """Effects ``M_i = d_in w_i sigma_i^T`` with the preparations ``tau_i``.

    The completeness defect (bounded by the decomposition residual) is
    removed by the congruence ``S^{-1/2} M_i S^{-1/2}`` with ``S = sum M_i``.
    """
    if e.dims[0] != dim_in:
        raise NotAValidDecomposition(f"ensemble input factor has dim {e.dims[0]}, expected {dim_in}")
    effects = [dim_in * w * s.T for w, s in zip(e.weights, e.left_states)]
    return _holevo_from_effects(effects, e.right_states, dim_in, tol)


def _fit_factored(rho, dims, p, q, max_iters: int, target: float):
    """Damped Gauss-Newton on ``sum_k (P_k P_k^H) (x) (Q_k Q_k^H) = rho``.

    Like :func:`_fit_products` but with square factors, so each term is a
    product of two arbitrary PSD operators rather than of two pure states.
    """
    da, db = dims
    dd = da * db
    k = p.shape[0]
    iu = np.triu_indices(dd, 1)
    eye_a, eye_b = np.eye(da), np.eye(db)

    def terms(p, q):
        return p @ np.swapaxes(p, -1, -2).conj(), q @ np.swapaxes(q, -1, -2).conj()

    def residual(p, q):
        a, b = terms(p, q)
        return _herm_coords(np.einsum("kab,kcd->acbd", a, b).reshape(dd, dd) - rho, iu)

    def directions(f, other, eye, left: bool):
        # d(F F^H) along unit entries (i, j) of F, real and imaginary
        n = f.shape[1]
        d = np.einsum("ai,kbj->kijab", eye, f.conj())
        herm = d + np.swapaxes(d, -1, -2).conj()
        skew = 1j * (d - np.swapaxes(d, -1, -2).conj())
        out = []
        for g in (herm, skew):
            if left:
                t = np.einsum("kijab,kcd->kijacbd", g, other)
            else:
                t = np.einsum("kcd,kijab->kijcadb", other, g)
            out.append(t.reshape(k, n * n, dd, dd))
        return out

    r = residual(p, q)
    f = np.linalg.norm(r)
    mu = 1e-3 * max(f, 1e-12)
    for it in range(max_iters):
        if f <= target:
            return p, q, f, it
        a, b = terms(p, q)
        pr, pi = directions(p, b, eye_a, True)
        qr, qi = directions(q, a, eye_b, False)
        jac = np.concatenate([pr, pi, qr, qi], axis=1)  # k x params x dd x dd
        jac = _herm_coords(jac, iu).reshape(-1, dd * dd).T
        jjt = jac @ jac.T
        improved = False
        while mu < 1e10:
            y = np.linalg.solve(jjt + mu * np.eye(jjt.shape[0]), r)
            step = -(jac.T @ y).reshape(k, -1)
            na, nb = da * da, db * db
            dp = (step[:, :na] + 1j * step[:, na : 2 * na]).reshape(k, da, da)
            dq = (step[:, 2 * na : 2 * na + nb] + 1j * step[:, 2 * na + nb :]).reshape(k, db, db)
            p2, q2 = p + dp, q + dq
            r2 = residual(p2, q2)
            f2 = np.linalg.norm(r2)
            if f2 < f:
                p, q, r, f = p2, q2, r2, f2
                mu = max(mu / 5, 1e-15)
                improved = True
                break
            mu *= 4
        if not improved:
            return p, q, f, it
    return p, q, f, max_iters


def factored_holevo(c: Channel, k: int, cfg: DecompositionConfig | None = None, tol: float = 1e-6):
    """Try to write the Choi state as ``sum_{i<=k} A_i (x) tau_i``; returns ``(HolevoForm | None, residual)``.

    A success is a k-outcome measure-and-prepare form ``M_i = d_in Tr(B_i) A_i^T``.
    """
    cfg = cfg or DecompositionConfig()
    da, db = c.dims
    rho = c.choi
    target = min(1e-13, cfg.eps_sep * 1e-6)
    best = np.inf
    for attempt in range(cfg.restarts):
        rng = np.random.default_rng([cfg.seed, attempt, k, 1])
        p = (rng.standard_normal((k, da, da)) + 1j * rng.standard_normal((k, da, da))) / np.sqrt(2 * k * da * db)
        q = (rng.standard_normal((k, db, db)) + 1j * rng.standard_normal((k, db, db))) / np.sqrt(2 * db)
        p, q, f, _ = _fit_factored(rho, (da, db), p, q, cfg.max_iters, target)
        best = min(best, f)
        if f > cfg.eps_sep:
            continue
        a = [x @ x.conj().T for x in p]
        b = [x @ x.conj().T for x in q]
        t = [np.trace(x).real for x in b]
        if min(t) <= 1e-14:
            continue
        effects = [da * ti * ai.T for ai, ti in zip(a, t)]
        preps = [hermitian_part(bi / ti) for bi, ti in zip(b, t)]
        try:
            return _holevo_from_effects(effects, preps, da, tol), float(f)
        except (NotAValidDecomposition, ValueError):
            continue
    return None, float(best)


def holevo_reconstruction_error(h: HolevoForm, c: Channel) -> float:
    return basis_trace_distance(holevo_to_channel(h), c)
