"""Decide and certify the ordered dominance conditions for Gaussian mixtures.

Four nested conditions are checked for a centered Gaussian target law
against a finite Gaussian mixture, from strongest to weakest:

* ``correl``   - a nonsingular change of basis under which all component
  covariances share one correlation matrix that also dominates the target
  through the weighted diagonal scales (:func:`check_correl_with`,
  :func:`find_correl_certificate`);
* ``inecov``   - a PSD coupling matrix with the component covariances as
  diagonal blocks whose weighted block sum dominates the target
  (:func:`check_inecov`);
* ``inecovf``  - the pairwise relaxation where only every 2d x 2d pair
  block must be PSD (:func:`check_inecovf`);
* ``inegsqrt`` - the directional test: for every direction, the target
  standard deviation is at most the mixture of component standard
  deviations (:func:`check_inegsqrt`).

Failures always carry a witness that re-verifies standalone; positive
certificates re-validate through :func:`validate_gamma_witness` and
:func:`validate_correl_certificate`. Everything is pure given (problem,
config, seed), so checkers can run concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import matcore, psdfeas
from .rng import CounterRng
from .utils import golden_section_minimize


class InvalidProblem(ValueError):
    """Mixture data violates shape, weight or PSD requirements."""


class SingularM(ValueError):
    """Candidate change of basis is singular or ill-conditioned."""


class NonCenteredMeans(ValueError):
    """Operation requires component means summing to zero (or all zero)."""


class DimensionMismatch(ValueError):
    """Operand shapes are inconsistent with the problem."""


class ChainViolation(RuntimeError):
    """Implication chain inverted: indicates a bug, never a valid outcome."""


class Status(str, Enum):
    HOLDS = "holds"
    FAILS = "fails"
    UNKNOWN = "unknown"


@dataclass
class Verdict:
    """Outcome of a checker: status, signed margin, witness, diagnostics.

    The margin is the signed distance to the decision boundary in the
    checker's own metric (directional slack for ``inegsqrt``, smallest
    slack eigenvalue for the coupling conditions).
    """

    status: Status
    margin: float
    witness: object = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.status is Status.HOLDS

    @property
    def fails(self) -> bool:
        return self.status is Status.FAILS


@dataclass
class MixtureProblem:
    """Target covariance, component weights/means/covariances.

    Weights must be in (0, 1) and sum to one; all covariances must be
    symmetric PSD. Means default to zero and only matter for couplings and
    expectation tests, where they must be centered under the weights.
    """

    p: np.ndarray
    covs: np.ndarray
    target: np.ndarray
    means: np.ndarray | None = None

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float).reshape(-1)
        self.target = matcore.require_symmetric(self.target, tol=1e-8)
        covs = np.asarray(self.covs, dtype=float)
        if covs.ndim != 3:
            raise InvalidProblem("component covariances must be a (n, d, d) array")
        self.covs = np.stack([matcore.require_symmetric(c, tol=1e-8) for c in covs])
        n, d = self.covs.shape[0], self.target.shape[0]
        if self.covs.shape[1] != d:
            raise InvalidProblem("component and target dimensions differ")
        if n < 2:
            raise InvalidProblem("need at least two mixture components")
        if self.p.shape[0] != n:
            raise InvalidProblem("one weight per component required")
        if np.any(self.p <= 0.0) or np.any(self.p >= 1.0):
            raise InvalidProblem("weights must lie strictly in (0, 1)")
        if abs(self.p.sum() - 1.0) > 1e-12:
            raise InvalidProblem(f"weights sum to {self.p.sum()!r}, expected 1")
        if self.means is None:
            self.means = np.zeros((n, d))
        else:
            self.means = np.asarray(self.means, dtype=float).reshape(n, d)
        if not np.all(np.isfinite(self.means)):
            raise InvalidProblem("means have non-finite entries")
        ok, lmin = matcore.is_psd(self.target)
        if not ok:
            err = InvalidProblem(f"target covariance not PSD (lambda_min={lmin:.3e})")
            err.lmin = lmin
            raise err
        for i, cov in enumerate(self.covs):
            ok, lmin = matcore.is_psd(cov)
            if not ok:
                raise InvalidProblem(f"component {i} covariance not PSD (lambda_min={lmin:.3e})")
        self._var_scale = float(
            max(matcore.spec_norm(self.target), max(matcore.spec_norm(c) for c in self.covs))
        )

    @property
    def n(self) -> int:
        return self.covs.shape[0]

    @property
    def d(self) -> int:
        return self.target.shape[0]

    def var_scale(self) -> float:
        return self._var_scale

    def std_scale(self) -> float:
        return math.sqrt(self._var_scale)

    def require_centered(self, tol: float = 1e-10):
        drift = np.linalg.norm(self.p @ self.means)
        if drift > tol * (1.0 + self.std_scale()):
            raise NonCenteredMeans(f"weighted mean norm {drift:.3e}")

    def mixture_covariance(self) -> np.ndarray:
        """Covariance of the mixture law (includes mean spread)."""
        within = np.einsum("i,ikl->kl", self.p, self.covs)
        spread = np.einsum("i,ik,il->kl", self.p, self.means, self.means)
        return matcore.symmetrize(within + spread)


@dataclass(frozen=True)
class SearchConfig:
    """Knobs for the directional search and the n = 2 cross checks."""

    tol: float = 1e-9  # relative decision tolerance
    random_starts: int = 64
    iters: int = 200
    grid_points: int = 720  # angular grid, d = 2 only
    alpha_points: int = 400  # log-spaced scan, n = 2 only
    ascent_iters: int = 200
    step0: float = 1.0
    seed: int = 0


@dataclass
class GammaWitness:
    """Symmetric nd x nd coupling certificate with pinned diagonal blocks."""

    gamma: np.ndarray
    n: int
    d: int

    def block(self, i: int, j: int) -> np.ndarray:
        d = self.d
        return self.gamma[i * d : (i + 1) * d, j * d : (j + 1) * d]


@dataclass
class CorrelCertificate:
    """Shared-correlation certificate: basis M, correlation C and scales.

    ``comp_scales[i]`` holds the diagonal of D_i = diag(sqrt((M S_i M*)_kk));
    ``mix_scale`` is the weight-combined diagonal of D and ``stacked`` the
    nd x d stack of the D_i satisfying (p_1 I, ..., p_n I) stacked == D.
    """

    m: np.ndarray
    corr: np.ndarray
    comp_scales: np.ndarray  # (n, d)
    mix_scale: np.ndarray  # (d,)
    stacked: np.ndarray  # (n*d, d)


# ---------------------------------------------------------------------------
# directional condition (inegsqrt)
# ---------------------------------------------------------------------------


def h_values(prob: MixtureProblem, xis) -> np.ndarray:
    """Directional slack sum_i p_i sqrt(xi' S_i xi) - sqrt(xi' S xi), rowwise."""
    xis = np.atleast_2d(np.asarray(xis, dtype=float))
    q_c = np.einsum("kij,mi,mj->km", prob.covs, xis, xis)
    q_t = np.einsum("ij,mi,mj->m", prob.target, xis, xis)
    mix = prob.p @ np.sqrt(np.clip(q_c, 0.0, None))
    return mix - np.sqrt(np.clip(q_t, 0.0, None))


def h_margin(prob: MixtureProblem, xi) -> float:
    """Single-direction slack; used to re-verify failure witnesses."""
    return float(h_values(prob, xi)[0])


def _h_and_grad(prob: MixtureProblem, xis: np.ndarray):
    prods_c = np.einsum("kij,mj->kmi", prob.covs, xis)
    q_c = np.einsum("kmi,mi->km", prods_c, xis)
    root_c = np.sqrt(np.clip(q_c, 0.0, None))
    prod_t = xis @ prob.target
    q_t = np.einsum("mi,mi->m", prod_t, xis)
    root_t = np.sqrt(np.clip(q_t, 0.0, None))
    h = prob.p @ root_c - root_t
    inv_c = np.where(root_c > 0.0, 1.0 / np.where(root_c > 0.0, root_c, 1.0), 0.0)
    inv_t = np.where(root_t > 0.0, 1.0 / np.where(root_t > 0.0, root_t, 1.0), 0.0)
    grad = np.einsum("k,km,kmi->mi", prob.p, inv_c, prods_c) - prod_t * inv_t[:, None]
    return h, grad


def _normalize_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1)
    norms = np.where(norms > 0.0, norms, 1.0)
    return x / norms[:, None]


def _eigvector_starts(prob: MixtureProblem) -> np.ndarray:
    mats = [prob.target, *prob.covs]
    vecs = [np.linalg.eigh(matcore.symmetrize(m))[1].T for m in mats]
    return np.vstack(vecs)


def _sphere_search(prob: MixtureProblem, cfg: SearchConfig):
    """Multistart projected subgradient descent of h over the unit sphere.

    Subgradients are normalized before stepping so the search behaves the
    same under rescaling of the covariances; at a degenerate direction the
    zero subgradient is used. For d = 2 an angular grid with golden-section
    refinement is added, which decides that case essentially exactly.
    """
    d = prob.d
    rng = CounterRng(cfg.seed, stream=17)
    starts = [_eigvector_starts(prob)]
    if cfg.random_starts > 0:
        starts.append(_normalize_rows(rng.normal_matrix(cfg.random_starts, d)))
    best_h = np.inf
    best_xi = np.zeros(d)
    diag: dict = {}

    if d == 2 and cfg.grid_points > 0:
        thetas = np.linspace(0.0, np.pi, cfg.grid_points, endpoint=False)
        grid = np.column_stack([np.cos(thetas), np.sin(thetas)])
        hs = h_values(prob, grid)
        order = np.argsort(hs)
        width = np.pi / cfg.grid_points

        def h_of(theta: float) -> float:
            return h_margin(prob, np.array([math.cos(theta), math.sin(theta)]))

        for idx in order[:3]:
            theta, val = golden_section_minimize(
                h_of, thetas[idx] - width, thetas[idx] + width, xtol=1e-12
            )
            if val < best_h:
                best_h = val
                best_xi = np.array([math.cos(theta), math.sin(theta)])
        starts.append(grid[order[:4]])
        diag["grid_min"] = float(hs.min())

    x = _normalize_rows(np.vstack(starts))
    for k in range(1, cfg.iters + 1):
        h, grad = _h_and_grad(prob, x)
        j = int(np.argmin(h))
        if h[j] < best_h:
            best_h = float(h[j])
            best_xi = x[j].copy()
        tangent = grad - np.sum(grad * x, axis=1)[:, None] * x
        norms = np.linalg.norm(tangent, axis=1)
        dirs = np.where(norms[:, None] > 1e-14, tangent / np.maximum(norms, 1e-14)[:, None], 0.0)
        x = _normalize_rows(x - (cfg.step0 / k) * dirs)
    h = h_values(prob, x)
    j = int(np.argmin(h))
    if h[j] < best_h:
        best_h = float(h[j])
        best_xi = x[j].copy()
    return best_h, best_xi, diag


def _alpha_scan(prob: MixtureProblem, cfg: SearchConfig):
    """n = 2 cross check: scan the weighted two-sided bound over alpha > 0.

    The directional condition holds iff
    ``p1^2 S1 + p2^2 S2 + p1 p2 (alpha S1 + S2/alpha) - S`` stays PSD for
    every positive alpha, so the smallest eigenvalue is scanned on a log
    grid and polished by golden section.
    """
    p1, p2 = prob.p
    s1, s2 = prob.covs
    base = p1 * p1 * s1 + p2 * p2 * s2 - prob.target

    def pencil(alpha: float) -> np.ndarray:
        return base + p1 * p2 * (alpha * s1 + s2 / alpha)

    alphas = np.logspace(-6.0, 6.0, cfg.alpha_points)
    mats = (
        base[None, :, :]
        + p1 * p2 * (alphas[:, None, None] * s1[None] + (1.0 / alphas)[:, None, None] * s2[None])
    )
    lmins = np.linalg.eigvalsh(mats)[:, 0]
    k = int(np.argmin(lmins))
    logstep = 12.0 / max(cfg.alpha_points - 1, 1)

    def f(t: float) -> float:
        return float(np.linalg.eigvalsh(pencil(10.0**t))[0])

    t0 = math.log10(alphas[k])
    t_best, val = golden_section_minimize(f, t0 - logstep, t0 + logstep, xtol=1e-12)
    if lmins[k] < val:
        t_best, val = t0, float(lmins[k])
    w, q = np.linalg.eigh(pencil(10.0**t_best))
    return float(val), 10.0**t_best, q[:, 0]


def check_inegsqrt(prob: MixtureProblem, cfg: SearchConfig | None = None) -> Verdict:
    """Decide the directional condition over all directions.

    Fails carry the violating unit direction as witness (which re-verifies
    through :func:`h_margin`); Holds report the smallest directional slack
    found. For n = 2 the independent alpha scan guards the sphere search;
    an irreconcilable borderline disagreement yields Unknown.
    """
    cfg = cfg or SearchConfig()
    tol_std = cfg.tol * (1.0 + prob.std_scale())
    tol_var = cfg.tol * (1.0 + prob.var_scale())
    diag: dict = {}

    if prob.d == 1:
        sig = math.sqrt(max(prob.target[0, 0], 0.0))
        sigs = np.sqrt(np.clip(prob.covs[:, 0, 0], 0.0, None))
        margin = float(prob.p @ sigs - sig)
        xi = np.array([1.0])
        diag["exact"] = True
        if margin < -tol_std:
            return Verdict(Status.FAILS, margin, xi, diag)
        diag["boundary"] = bool(abs(margin) <= 2.0 * tol_std)
        return Verdict(Status.HOLDS, margin, None, diag)

    margin, xi, search_diag = _sphere_search(prob, cfg)
    diag.update(search_diag)

    if prob.n == 2 and cfg.alpha_points > 0:
        scan_val, alpha_best, scan_xi = _alpha_scan(prob, cfg)
        diag["alpha_scan_min"] = scan_val
        diag["alpha_best"] = alpha_best
        if scan_val < -tol_var and margin >= -tol_std:
            recheck = h_margin(prob, scan_xi)
            if recheck < -tol_std:
                margin, xi = recheck, scan_xi
            else:
                diag["disagreement"] = True
                return Verdict(Status.UNKNOWN, min(margin, recheck), None, diag)

    if margin < -tol_std:
        return Verdict(Status.FAILS, margin, xi, diag)
    diag["boundary"] = bool(abs(margin) <= 2.0 * tol_std)
    return Verdict(Status.HOLDS, margin, None, diag)


# ---------------------------------------------------------------------------
# pair-contraction wrappers (the machinery lives next to the engine)
# ---------------------------------------------------------------------------


def contraction_ascent(prob: MixtureProblem, seed: int = 0, iters: int = 200):
    """Best smallest slack eigenvalue over admissible pair blocks.

    Delegates to :func:`gmcvx.psdfeas.contraction_ascent`; the value decides
    pairwise feasibility (it is the maximum of a concave program), the
    contractions build a witness, and the returned trace-one matrix feeds
    :func:`dual_refutation_value` when the value is negative.
    """
    return psdfeas.contraction_ascent(prob.p, prob.covs, prob.target, seed=seed, iters=iters)


def gamma_from_contractions(prob: MixtureProblem, ks) -> np.ndarray:
    """Coupling matrix whose pair blocks come from the given contractions."""
    return psdfeas.gamma_from_contractions(prob.p, prob.covs, ks)


def dual_refutation_value(prob: MixtureProblem, y: np.ndarray) -> float:
    """Re-verifiable refutation functional for the pairwise condition."""
    return psdfeas.dual_refutation_value(prob.p, prob.covs, prob.target, y)


def _colinear_structure(prob: MixtureProblem, tol: float = 1e-9):
    """Detect component covariances that are all multiples of one base."""
    norms = np.array([matcore.fro_norm(c) for c in prob.covs])
    ref = int(np.argmax(norms))
    if norms[ref] == 0.0:
        return np.zeros_like(prob.covs[0]), np.zeros(prob.n)
    base = prob.covs[ref]
    denom = float(np.sum(base * base))
    coeffs = np.array([max(float(np.sum(c * base)) / denom, 0.0) for c in prob.covs])
    for c, k in zip(prob.covs, coeffs):
        if matcore.fro_norm(c - k * base) > tol * (1.0 + matcore.fro_norm(c)):
            return None
    return base, coeffs


def _colinear_gamma(prob: MixtureProblem):
    found = _colinear_structure(prob)
    if found is None:
        return None
    base, coeffs = found
    weights = np.sqrt(coeffs)
    return np.kron(np.outer(weights, weights), base)


# ---------------------------------------------------------------------------
# coupling conditions (inecov / inecovf)
# ---------------------------------------------------------------------------


def validate_gamma_witness(prob: MixtureProblem, gamma, tol: float = 1e-7, pairwise: bool = False) -> dict:
    """Standalone re-validation of a coupling witness."""
    if isinstance(gamma, GammaWitness):
        gamma = gamma.gamma
    task = psdfeas.FeasibilityTask(
        prob.p, prob.covs, prob.target, psdfeas.PAIRWISE if pairwise else psdfeas.FULL
    )
    return psdfeas.validate_gamma(task, np.asarray(gamma, dtype=float), tol)


def _coupling_check(prob, cone, engine_cfg, search_cfg, extra_candidates, inegsqrt_verdict, seed):
    engine_cfg = engine_cfg or psdfeas.EngineConfig()
    v5 = inegsqrt_verdict if inegsqrt_verdict is not None else check_inegsqrt(prob, search_cfg)
    diag: dict = {"inegsqrt_margin": v5.margin}
    if v5.fails:
        return Verdict(Status.FAILS, v5.margin, v5.witness, {**diag, "refuted_by": "inegsqrt"}), None

    candidates = []
    for cand in extra_candidates:
        candidates.append(cand.gamma if isinstance(cand, GammaWitness) else np.asarray(cand, float))
    col = _colinear_gamma(prob)
    if col is not None:
        candidates.append(col)

    ascent = None
    if cone == psdfeas.PAIRWISE or prob.n == 2:
        iters = search_cfg.ascent_iters if search_cfg is not None else 200
        val, ks, y_avg = contraction_ascent(prob, seed=seed, iters=iters)
        ascent = (val, ks, y_avg)
        diag["pair_ascent_margin"] = val
        candidates.append(gamma_from_contractions(prob, ks))

    task = psdfeas.FeasibilityTask(prob.p, prob.covs, prob.target, cone)
    out = psdfeas.solve(task, engine_cfg, candidates)
    diag["engine_iterations"] = out.iterations
    diag["cone_dist"] = out.cone_dist
    diag["affine_dist"] = out.affine_dist

    if out.feasible:
        check = psdfeas.validate_gamma(task, out.gamma, max(engine_cfg.tol, 1e-9))
        diag.update(check)
        witness = GammaWitness(out.gamma, prob.n, prob.d)
        return Verdict(Status.HOLDS, check["lmin_slack"], witness, diag), ascent

    tol_var = max(engine_cfg.tol, 1e-9) * (1.0 + prob.var_scale())
    if ascent is not None and ascent[0] < -tol_var and ascent[2] is not None:
        fbar = dual_refutation_value(prob, ascent[2])
        diag["dual_bound"] = fbar
        if fbar < -tol_var:
            return Verdict(Status.FAILS, ascent[0], ("dual", ascent[2]), diag), ascent
    return Verdict(Status.UNKNOWN, -out.cone_dist, None, diag), ascent


def check_inecov(
    prob: MixtureProblem,
    engine_cfg: psdfeas.EngineConfig | None = None,
    search_cfg: SearchConfig | None = None,
    extra_candidates=(),
    inegsqrt_verdict: Verdict | None = None,
    seed: int = 0,
) -> Verdict:
    """Existence of a PSD coupling matrix dominating the target.

    Holds come with a validated :class:`GammaWitness`. Failure is declared
    only through necessary conditions: a directional violation, or for the
    two-component case a certified refutation of the pair-contraction
    program; when the projection engine merely stalls the verdict is
    Unknown with the residuals in the diagnostics.
    """
    verdict, _ = _coupling_check(
        prob, psdfeas.FULL, engine_cfg, search_cfg, extra_candidates, inegsqrt_verdict, seed
    )
    return verdict


def check_inecovf(
    prob: MixtureProblem,
    engine_cfg: psdfeas.EngineConfig | None = None,
    search_cfg: SearchConfig | None = None,
    extra_candidates=(),
    inegsqrt_verdict: Verdict | None = None,
    seed: int = 0,
) -> Verdict:
    """Pairwise relaxation: every 2d x 2d pair block PSD instead of the whole."""
    verdict, _ = _coupling_check(
        prob, psdfeas.PAIRWISE, engine_cfg, search_cfg, extra_candidates, inegsqrt_verdict, seed
    )
    return verdict


def validate_pairwise_blocks(prob: MixtureProblem, gamma, tol: float = 1e-8) -> dict:
    """Check each pair block of a coupling matrix for PSD-ness."""
    if isinstance(gamma, GammaWitness):
        gamma = gamma.gamma
    gamma = matcore.symmetrize(gamma)
    d = prob.d
    out = {}
    for i in range(prob.n):
        for j in range(i + 1, prob.n):
            blk = np.block(
                [
                    [gamma[i * d : (i + 1) * d, i * d : (i + 1) * d], gamma[i * d : (i + 1) * d, j * d : (j + 1) * d]],
                    [gamma[j * d : (j + 1) * d, i * d : (i + 1) * d], gamma[j * d : (j + 1) * d, j * d : (j + 1) * d]],
                ]
            )
            ok, lmin = matcore.is_psd(blk, tol)
            out[(i, j)] = (bool(ok), float(lmin))
    return out


# ---------------------------------------------------------------------------
# shared-correlation condition (correl)
# ---------------------------------------------------------------------------


def check_correl_with(prob: MixtureProblem, m, tol_match: float = 1e-8) -> Verdict:
    """Verify the shared-correlation condition for one candidate basis M.

    Builds the correlation matrix entrywise from every component alive on
    that entry (they must agree within ``tol_match``), fills entries no
    component constrains from the target itself, and then tests that the
    weighted diagonal scales dominate the transformed target. Holds return
    a :class:`CorrelCertificate`; the diagnostics report whether the built
    correlation is also associated with the diagonal-corrected target.
    """
    m = np.asarray(m, dtype=float)
    d = prob.d
    if m.shape != (d, d):
        raise SingularM(f"expected a {d} x {d} matrix, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise SingularM("candidate basis has non-finite entries")
    if np.linalg.cond(m) > 1e12:
        raise SingularM("candidate basis is singular or ill-conditioned")

    transformed = [matcore.symmetrize(m @ cov @ m.T) for cov in prob.covs]
    t_target = matcore.symmetrize(m @ prob.target @ m.T)
    diag: dict = {}

    col = _colinear_structure(prob)
    diag["colinear_components"] = col is not None

    corr_sum = np.zeros((d, d))
    corr_min = np.full((d, d), np.inf)
    corr_max = np.full((d, d), -np.inf)
    count = np.zeros((d, d))
    scales = np.zeros((prob.n, d))
    for i, t in enumerate(transformed):
        info = matcore.correlation_of(t)
        scales[i] = info.scales
        alive = info.scales > 0.0
        mask = np.outer(alive, alive)
        np.fill_diagonal(mask, False)
        corr_sum[mask] += info.corr[mask]
        corr_min[mask] = np.minimum(corr_min[mask], info.corr[mask])
        corr_max[mask] = np.maximum(corr_max[mask], info.corr[mask])
        count[mask] += 1.0

    multi = count >= 2.0
    if np.any(multi):
        spread = np.where(multi, corr_max - corr_min, 0.0)
        worst = float(spread.max())
        diag["correlation_spread"] = worst
        if worst > tol_match:
            k, l = np.unravel_index(int(np.argmax(spread)), spread.shape)
            witness = ("correlation_mismatch", (int(k), int(l), float(corr_min[k, l]), float(corr_max[k, l])))
            return Verdict(Status.FAILS, -worst, witness, diag)

    mix_scale = prob.p @ scales
    corr = np.where(count > 0.0, corr_sum / np.maximum(count, 1.0), 0.0)
    free = (count == 0.0) & (np.outer(mix_scale, mix_scale) > 0.0)
    np.fill_diagonal(free, False)
    fill = np.zeros((d, d))
    pos = np.outer(mix_scale, mix_scale)
    fill[free] = t_target[free] / pos[free]
    corr = matcore.symmetrize(np.where(free, fill, corr))
    np.fill_diagonal(corr, 1.0)

    ok_corr, lmin_corr = matcore.is_psd(corr, 1e-8)
    diag["corr_lmin"] = lmin_corr
    if not ok_corr:
        w, q = np.linalg.eigh(corr)
        return Verdict(Status.FAILS, lmin_corr, ("merged_correlation_not_psd", q[:, 0]), diag)

    dcd = np.outer(mix_scale, mix_scale) * corr
    gap = matcore.symmetrize(dcd - t_target)
    ok, lmin = matcore.is_psd(gap)

    sigma_hat = t_target.copy()
    np.fill_diagonal(sigma_hat, mix_scale**2)
    diag["sigma_hat_associated"] = bool(
        matcore.fro_norm(dcd - sigma_hat) <= tol_match * (1.0 + matcore.fro_norm(sigma_hat))
    )

    if not ok:
        w, q = np.linalg.eigh(gap)
        return Verdict(Status.FAILS, lmin, ("dcd_deficit", q[:, 0]), diag)

    stacked = np.vstack([np.diag(s) for s in scales])
    cert = CorrelCertificate(m, corr, scales, mix_scale, stacked)
    return Verdict(Status.HOLDS, lmin, cert, diag)


def validate_correl_certificate(prob: MixtureProblem, cert: CorrelCertificate, tol: float = 1e-7) -> dict:
    """Standalone re-validation of a shared-correlation certificate."""
    m = cert.m
    assoc_err = 0.0
    for i, cov in enumerate(prob.covs):
        t = matcore.symmetrize(m @ cov @ m.T)
        d_i = np.diag(cert.comp_scales[i])
        assoc_err = max(assoc_err, matcore.fro_norm(t - d_i @ cert.corr @ d_i) / (1.0 + matcore.fro_norm(t)))
    dcd = np.outer(cert.mix_scale, cert.mix_scale) * cert.corr
    gap = matcore.symmetrize(dcd - m @ prob.target @ m.T)
    ok, lmin = matcore.is_psd(gap)
    stack_err = matcore.fro_norm(
        np.einsum("i,ikl->kl", prob.p, cert.stacked.reshape(prob.n, prob.d, prob.d)) - np.diag(cert.mix_scale)
    )
    return {
        "ok": bool(assoc_err <= tol and ok and stack_err <= 1e-12 * (1.0 + float(cert.mix_scale.max(initial=0.0)))),
        "association_err": float(assoc_err),
        "lmin_gap": float(lmin),
        "stack_err": float(stack_err),
    }


def certificate_to_gamma(prob: MixtureProblem, cert: CorrelCertificate) -> np.ndarray:
    """Coupling witness induced by a shared-correlation certificate."""
    minv = np.linalg.inv(cert.m)
    n, d = prob.n, prob.d
    gamma = np.zeros((n * d, n * d))
    for i in range(n):
        d_i = np.diag(cert.comp_scales[i])
        for j in range(n):
            d_j = np.diag(cert.comp_scales[j])
            gamma[i * d : (i + 1) * d, j * d : (j + 1) * d] = minv @ d_i @ cert.corr @ d_j @ minv.T
    for i in range(n):
        gamma[i * d : (i + 1) * d, i * d : (i + 1) * d] = prob.covs[i]
    return matcore.symmetrize(gamma)


def _commuting_basis(prob: MixtureProblem, seed: int, tol: float = 1e-8):
    family = [prob.target, *prob.covs]
    for a in family:
        for b in family:
            comm = a @ b - b @ a
            if matcore.fro_norm(comm) > tol * (1.0 + matcore.fro_norm(a) * matcore.fro_norm(b)):
                return None
    rng = CounterRng(seed, stream=41)
    coeffs = 0.5 + rng.uniforms(len(family))
    combo = matcore.symmetrize(sum(c * f for c, f in zip(coeffs, family)))
    _, q = np.linalg.eigh(combo)
    return q.T


def _orthogonal_product_basis(prob: MixtureProblem, seed: int, tol: float = 1e-8):
    scale = 1.0 + prob.var_scale()
    for i in range(prob.n):
        for j in range(prob.n):
            if i == j:
                continue
            if matcore.fro_norm(prob.covs[i] @ prob.covs[j]) > tol * scale * scale:
                return None
    rng = CounterRng(seed, stream=43)
    coeffs = 0.5 + rng.uniforms(prob.n)
    combo = matcore.symmetrize(np.einsum("i,ikl->kl", coeffs, prob.covs))
    w, q = np.linalg.eigh(combo)
    lam_max = max(float(w[-1]), 0.0)
    owner = np.full(prob.d, prob.n)
    for k in range(prob.d):
        if w[k] <= 1e-12 * (1.0 + lam_max):
            continue
        v = q[:, k]
        owner[k] = int(np.argmax([float(v @ c @ v) for c in prob.covs]))
    order = np.lexsort((np.arange(prob.d), owner))
    return q[:, order].T


def find_correl_certificate(prob: MixtureProblem, extra_m=(), seed: int = 0, tol_match: float = 1e-8) -> Verdict:
    """Search the candidate-basis generators for a shared-correlation certificate.

    Candidates, in order: the identity, a co-diagonalizer when the target
    and components all commute, the block basis when component covariances
    annihilate each other, then any user-supplied bases. The first Holds
    wins; exhausting the generators yields Unknown (a full search over all
    nonsingular bases is out of scope).
    """
    candidates: list[tuple[str, np.ndarray]] = [("identity", np.eye(prob.d))]
    commuting = _commuting_basis(prob, seed)
    if commuting is not None:
        candidates.append(("commuting", commuting))
    orth = _orthogonal_product_basis(prob, seed)
    if orth is not None:
        candidates.append(("orthogonal_product", orth))
    for idx, m in enumerate(extra_m):
        candidates.append((f"user_{idx}", np.asarray(m, dtype=float)))

    diag: dict = {"tried": []}
    for name, m in candidates:
        try:
            verdict = check_correl_with(prob, m, tol_match=tol_match)
        except SingularM:
            diag["tried"].append((name, "singular", None))
            continue
        diag["tried"].append((name, verdict.status.value, verdict.margin))
        if verdict.holds:
            verdict.diagnostics["generator"] = name
            verdict.diagnostics["tried"] = diag["tried"]
            return verdict
    return Verdict(Status.UNKNOWN, -np.inf, None, diag)


# ---------------------------------------------------------------------------
# reverse dominance and n = 2 helpers
# ---------------------------------------------------------------------------


def check_dominated_by_single(prob: MixtureProblem, eps: float = matcore.EPS_PSD) -> Verdict:
    """Mixture dominated by the single target law: every component under it."""
    if np.abs(prob.means).max(initial=0.0) > 1e-10 * (1.0 + prob.std_scale()):
        raise NonCenteredMeans("reverse dominance requires zero component means")
    worst_lmin = np.inf
    worst = None
    all_ok = True
    for i, cov in enumerate(prob.covs):
        ok, lmin = matcore.is_psd(prob.target - cov, eps)
        if lmin < worst_lmin:
            worst_lmin = lmin
            _, q = np.linalg.eigh(matcore.symmetrize(prob.target - cov))
            worst = (i, q[:, 0])
        all_ok = all_ok and ok
    if all_ok:
        return Verdict(Status.HOLDS, float(worst_lmin), None, {})
    return Verdict(Status.FAILS, float(worst_lmin), worst, {})


def check_n2_theta(prob: MixtureProblem, theta) -> Verdict:
    """Verify one explicit off-diagonal block for a two-component mixture."""
    if prob.n != 2:
        raise DimensionMismatch("explicit block check requires exactly two components")
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (prob.d, prob.d):
        raise DimensionMismatch(f"expected block shape {(prob.d, prob.d)}, got {theta.shape}")
    s1, s2 = prob.covs
    block = np.block([[s1, theta], [theta.T, s2]])
    ok_b, lmin_b = matcore.is_psd(block)
    p1, p2 = prob.p
    rhs = p1 * p1 * s1 + p2 * p2 * s2 + p1 * p2 * (theta + theta.T)
    gap = matcore.symmetrize(rhs - prob.target)
    ok_g, lmin_g = matcore.is_psd(gap)
    margin = float(min(lmin_b, lmin_g))
    diag = {"block_lmin": float(lmin_b), "slack_lmin": float(lmin_g)}
    if ok_b and ok_g:
        return Verdict(Status.HOLDS, margin, None, diag)
    bad = block if lmin_b <= lmin_g else gap
    w, q = np.linalg.eigh(matcore.symmetrize(bad))
    which = "pair_block" if lmin_b <= lmin_g else "slack"
    return Verdict(Status.FAILS, margin, (which, q[:, 0]), diag)


def orthogonal_factors_from_gamma(prob: MixtureProblem, gamma, q: int | None = None):
    """Extract per-component orthogonal factors from a coupling witness.

    The rows of the witness square root give factors of each component
    covariance; polar factorization turns them into orthogonal matrices
    O_i such that the weighted sum of (padded) component square roots times
    O_i dominates the target. Returns ``(factors, verdict)``.
    """
    if isinstance(gamma, GammaWitness):
        gamma = gamma.gamma
    gamma = matcore.symmetrize(gamma)
    n, d = prob.n, prob.d
    if q is None:
        q = n * d
    if q < n * d:
        raise DimensionMismatch(f"q must be at least {n * d}")
    root = matcore.sqrt_psd(gamma)
    factors = []
    combined = np.zeros((d, q))
    ortho_defect = 0.0
    for i in range(n):
        theta = np.zeros((d, q))
        theta[:, : n * d] = root[i * d : (i + 1) * d, :]
        o_i = matcore.polar_factor(theta, prob.covs[i])
        factors.append(o_i)
        ortho_defect = max(ortho_defect, matcore.fro_norm(o_i @ o_i.T - np.eye(q)))
        sigma_i = np.zeros((d, q))
        sigma_i[:, :d] = matcore.sqrt_psd(prob.covs[i])
        combined += prob.p[i] * (sigma_i @ o_i)
    gap = matcore.symmetrize(combined @ combined.T - prob.target)
    ok, lmin = matcore.is_psd(gap, 1e-7)
    diag = {"ortho_defect": float(ortho_defect), "slack_lmin": float(lmin)}
    verdict = Verdict(Status.HOLDS if ok else Status.FAILS, float(lmin), None, diag)
    return factors, verdict


# ---------------------------------------------------------------------------
# implication chain
# ---------------------------------------------------------------------------


@dataclass
class ChainReport:
    """Ordered verdicts from strongest to weakest condition."""

    correl: Verdict
    inecov: Verdict
    inecovf: Verdict
    order_evidence: Verdict
    inegsqrt: Verdict

    def as_dict(self) -> dict:
        out = {}
        for name in ("correl", "inecov", "inecovf", "order_evidence", "inegsqrt"):
            v: Verdict = getattr(self, name)
            out[name] = {"status": v.status.value, "margin": float(v.margin)}
        return out


def implication_chain_report(
    prob: MixtureProblem,
    search_cfg: SearchConfig | None = None,
    engine_cfg: psdfeas.EngineConfig | None = None,
    mc_samples: int = 20000,
    seed: int = 0,
    chain_tol: float = 1e-7,
) -> ChainReport:
    """Run every checker and assert the implication chain is not inverted.

    Certificates found at a stronger level are handed down as warm starts,
    so a stronger Holds always propagates. Any inversion (stronger Holds
    with weaker Fails beyond tolerance) raises :class:`ChainViolation`.
    """
    from . import cxverify  # local import to avoid a module cycle

    v5 = check_inegsqrt(prob, search_cfg)
    v2 = find_correl_certificate(prob, seed=seed)
    extra = []
    if v2.holds:
        extra.append(certificate_to_gamma(prob, v2.witness))
    v3 = check_inecov(
        prob, engine_cfg, search_cfg, extra_candidates=extra, inegsqrt_verdict=v5, seed=seed
    )
    extra_f = list(extra)
    if v3.holds:
        extra_f.append(v3.witness.gamma)
    v3f = check_inecovf(
        prob, engine_cfg, search_cfg, extra_candidates=extra_f, inegsqrt_verdict=v5, seed=seed
    )
    lhs = cxverify.GaussianLaw(np.zeros(prob.d), prob.target)
    suite = cxverify.default_suite(prob, seed=seed)
    v4 = cxverify.test_convex_order(lhs, prob, suite, mc_samples=mc_samples, seed=seed, z=5.0)

    report = ChainReport(v2, v3, v3f, v4, v5)
    tol_std = chain_tol * (1.0 + prob.std_scale())
    problems = []
    if v2.holds and not v3.holds:
        problems.append("correl holds but inecov does not")
    if v3.holds and not v3f.holds:
        problems.append("inecov holds but inecovf does not")
    if v3f.holds and v5.fails and v5.margin < -tol_std:
        problems.append("inecovf holds but inegsqrt fails")
    if v3.holds and v4.fails:
        problems.append("inecov holds but an expectation test found a violation")
    if problems:
        raise ChainViolation("; ".join(problems))
    return report
