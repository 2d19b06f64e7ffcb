"""Block-constrained PSD feasibility by Dykstra alternating projections.

The engine looks for a symmetric ``nd x nd`` matrix Gamma whose diagonal
d-blocks equal prescribed component covariances, whose weighted block sum
``A Gamma A*`` dominates a target (tracked through a PSD slack S), and
which lives either in the full PSD cone or in the product of pairwise
``2d x 2d`` PSD constraints.

Projections onto the affine constraint set have a closed form (the linear
solve collapses to a scalar correction precomputed once per task); cone
constraints are handled one exact projection per constraint with Dykstra
correction terms, cycling until both distances fall under tolerance. The
engine never claims infeasibility: it either returns a feasible, exactly
block-pinned Gamma or the residuals it got stuck at.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import matcore

FULL = "full"
PAIRWISE = "pairwise"

FEASIBLE = "feasible"
MAX_ITERATIONS = "max_iterations"


@dataclass(frozen=True)
class EngineConfig:
    max_iter: int = 20000
    tol: float = 1e-8  # relative to problem scale


@dataclass
class FeasibilityTask:
    """Fixed diagonal blocks, weights, target and cone selector."""

    p: np.ndarray
    blocks: np.ndarray  # (n, d, d)
    target: np.ndarray  # (d, d)
    cone: str = FULL

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.blocks = np.asarray(self.blocks, dtype=float)
        self.target = matcore.symmetrize(self.target)
        self.n = int(self.p.shape[0])
        self.d = int(self.target.shape[0])
        if self.blocks.shape != (self.n, self.d, self.d):
            raise ValueError("component blocks must have shape (n, d, d)")
        if self.cone not in (FULL, PAIRWISE):
            raise ValueError(f"unknown cone {self.cone!r}")
        self.pairs = [(i, j) for i in range(self.n) for j in range(i + 1, self.n)]
        # affine-projection constants: S = A Gamma A* - target couples the
        # free off-diagonal blocks through a single scalar correction
        self.coupling = 2.0 * sum((self.p[i] * self.p[j]) ** 2 for i, j in self.pairs)
        self.offset = matcore.symmetrize(
            np.einsum("i,ikl->kl", self.p**2, self.blocks) - self.target
        )
        self.scale = 1.0 + max(
            matcore.fro_norm(self.target),
            max(matcore.fro_norm(b) for b in self.blocks),
        )

    def block_slice(self, i: int) -> slice:
        return slice(i * self.d, (i + 1) * self.d)


@dataclass
class FeasibilityOutcome:
    status: str
    gamma: np.ndarray
    iterations: int
    cone_dist: float
    affine_dist: float
    residual_history: list = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE


def mix_compress(gamma: np.ndarray, p: np.ndarray, d: int) -> np.ndarray:
    """``A Gamma A*`` for A = (p_1 I_d, ..., p_n I_d)."""
    n = len(p)
    g4 = np.asarray(gamma, dtype=float).reshape(n, d, n, d)
    return matcore.symmetrize(np.einsum("i,j,ikjl->kl", p, p, g4))


def offdiag_sym_sum(gamma: np.ndarray, task: FeasibilityTask) -> np.ndarray:
    total = mix_compress(gamma, task.p, task.d)
    fixed = np.einsum("i,ikl->kl", task.p**2, np.stack([
        gamma[task.block_slice(i), task.block_slice(i)] for i in range(task.n)
    ]))
    return matcore.symmetrize(total - fixed)


def _pin_blocks(gamma: np.ndarray, task: FeasibilityTask) -> np.ndarray:
    out = gamma.copy()
    for i in range(task.n):
        sl = task.block_slice(i)
        out[sl, sl] = task.blocks[i]
    return out


def _affine_project(task: FeasibilityTask, gamma: np.ndarray, slack: np.ndarray):
    """Orthogonal projection onto {blocks pinned, S = A Gamma A* - target}."""
    gamma = _pin_blocks(gamma, task)
    v0 = offdiag_sym_sum(gamma, task)
    r = (v0 + task.offset - slack) / (1.0 + task.coupling)
    for i, j in task.pairs:
        si, sj = task.block_slice(i), task.block_slice(j)
        gamma[si, sj] -= task.p[i] * task.p[j] * r
        gamma[sj, si] = gamma[si, sj].T
    return gamma, slack + r


def _neg_part_norm(a: np.ndarray) -> float:
    w = np.linalg.eigvalsh(0.5 * (a + a.T))
    neg = np.minimum(w, 0.0)
    return float(np.sqrt(np.sum(neg * neg)))


def cone_violation(task: FeasibilityTask, gamma: np.ndarray, slack: np.ndarray) -> float:
    """Frobenius distance from (Gamma, S) to the selected cone."""
    if task.cone == FULL:
        d_g = _neg_part_norm(gamma)
    else:
        d_g = 0.0
        for i, j in task.pairs:
            si, sj = task.block_slice(i), task.block_slice(j)
            blk = np.block([[gamma[si, si], gamma[si, sj]], [gamma[sj, si], gamma[sj, sj]]])
            d_g = max(d_g, _neg_part_norm(blk))
    return max(d_g, _neg_part_norm(slack))


# ---------------------------------------------------------------------------
# pair contractions: every admissible off-diagonal pair block writes
# root_i @ K @ root_j with the operator norm of K at most one, which turns
# pairwise feasibility into the concave program
# max lambda_min(C0 + sum w_ij (root_i K_ij root_j + sym)) over those balls
# ---------------------------------------------------------------------------


def contraction_pairs(p: np.ndarray, blocks: np.ndarray):
    roots = [matcore.sqrt_psd(b) for b in blocks]
    n = len(p)
    return [
        (float(p[i] * p[j]), roots[i], roots[j], (i, j))
        for i in range(n)
        for j in range(i + 1, n)
    ]


def base_gap(p: np.ndarray, blocks: np.ndarray, target: np.ndarray) -> np.ndarray:
    return matcore.symmetrize(np.einsum("i,ikl->kl", np.asarray(p) ** 2, blocks) - target)


def assemble_contraction_slack(c0: np.ndarray, pairs, ks) -> np.ndarray:
    h = c0.copy()
    for (w, a_i, a_j, _), k in zip(pairs, ks):
        t = a_i @ k @ a_j
        h += w * (t + t.T)
    return matcore.symmetrize(h)


def clip_operator_ball(k: np.ndarray) -> np.ndarray:
    u, s, vt = np.linalg.svd(k)
    if s.size == 0 or s[0] <= 1.0:
        return k
    return (u * np.minimum(s, 1.0)) @ vt


def _rotation_grid_2d(c0: np.ndarray, pair, count: int):
    """Best rotation or reflection contraction on a 2-d angular grid."""
    import math

    from .utils import golden_section_minimize

    w, a, b, _ = pair
    phis = np.linspace(0.0, 2.0 * np.pi, count, endpoint=False)
    c, s = np.cos(phis), np.sin(phis)
    best = (-np.inf, None)
    for branch in (1.0, -1.0):
        ks = np.empty((count, 2, 2))
        ks[:, 0, 0] = c
        ks[:, 0, 1] = -s * branch
        ks[:, 1, 0] = s
        ks[:, 1, 1] = c * branch

        def k_of(phi: float) -> np.ndarray:
            return np.array(
                [
                    [math.cos(phi), -math.sin(phi) * branch],
                    [math.sin(phi), math.cos(phi) * branch],
                ]
            )

        t = np.einsum("ij,mjk,kl->mil", a, ks, b)
        mats = c0[None] + w * (t + np.transpose(t, (0, 2, 1)))
        lmins = np.linalg.eigvalsh(mats)[:, 0]
        idx = int(np.argmax(lmins))
        width = 2.0 * np.pi / count

        def neg(phi: float) -> float:
            kk = k_of(phi)
            tt = a @ kk @ b
            return -float(np.linalg.eigvalsh(c0 + w * (tt + tt.T))[0])

        phi_best, negval = golden_section_minimize(
            neg, phis[idx] - width, phis[idx] + width, xtol=1e-12
        )
        if -negval > best[0]:
            best = (-negval, k_of(phi_best))
    return best


def _coordinate_rotation_polish(c0, pairs, ks, passes: int = 8, count: int = 128):
    """Cyclic exact maximization of each d = 2 contraction over rotations.

    Near a nonsmooth optimum the supergradient ascent closes the last few
    digits slowly; one pair at a time, the angular grid is exact and cheap.
    Only improving moves are accepted, so the value never decreases.
    """
    ks = [k.copy() for k in ks]
    for _ in range(passes):
        improved = False
        for idx, (w, a, b, _) in enumerate(pairs):
            rest = c0.copy()
            for jdx, (w2, a2, b2, _) in enumerate(pairs):
                if jdx == idx:
                    continue
                t = a2 @ ks[jdx] @ b2
                rest += w2 * (t + t.T)
            val, k_new = _rotation_grid_2d(rest, (w, a, b, None), count)
            t_old = a @ ks[idx] @ b
            old = float(np.linalg.eigvalsh(rest + w * (t_old + t_old.T))[0])
            if k_new is not None and val > old + 1e-15:
                ks[idx] = k_new
                improved = True
        if not improved:
            break
    return ks


def contraction_ascent(p, blocks, target, seed: int = 0, iters: int = 200):
    """Maximize the smallest slack eigenvalue over the pair contractions.

    Supergradient ascent on a concave objective, with a closed form for
    d = 1, an exact angular grid for a single d = 2 pair, and a cyclic
    per-pair grid polish for several d = 2 pairs. Returns the best value,
    the contractions, and a trace-one PSD average of bottom eigenvectors
    from the ascent tail (usable as a refutation functional).
    """
    import math

    from .rng import CounterRng

    p = np.asarray(p, dtype=float)
    blocks = np.asarray(blocks, dtype=float)
    pairs = contraction_pairs(p, blocks)
    c0 = base_gap(p, blocks, target)
    d = target.shape[0]

    def value_of(ks):
        return float(np.linalg.eigvalsh(assemble_contraction_slack(c0, pairs, ks))[0])

    if d == 1:
        # slack is linear in each scalar contraction: the maximum sits at
        # k = +1 for every pair (roots are nonnegative)
        ks = [np.ones((1, 1)) for _ in pairs]
        val = value_of(ks)
        y = np.array([[1.0]]) if val < 0 else None
        return val, ks, y

    rng = CounterRng(seed, stream=29)
    start_sets = [[np.zeros((d, d)) for _ in pairs], [np.eye(d) for _ in pairs]]
    if d == 2 and len(pairs) == 1:
        _, k_grid = _rotation_grid_2d(c0, pairs[0], 256)
        if k_grid is not None:
            start_sets.append([k_grid])
    rand = []
    for _ in pairs:
        g = rng.normal_matrix(d, d)
        u, _, vt = np.linalg.svd(g)
        rand.append(u @ vt)
    start_sets.append(rand)

    best_val = -np.inf
    best_ks = start_sets[0]
    tail: list[np.ndarray] = []
    for ks0 in start_sets:
        ks = [k.copy() for k in ks0]
        v0 = value_of(ks)
        if v0 > best_val:
            best_val, best_ks = v0, [k.copy() for k in ks]
        for it in range(1, iters + 1):
            slack = assemble_contraction_slack(c0, pairs, ks)
            w, q = np.linalg.eigh(slack)
            val = float(w[0])
            vec = q[:, 0]
            if val > best_val:
                best_val, best_ks = val, [k.copy() for k in ks]
            if it > iters - 25:
                tail.append(np.outer(vec, vec))
            grads = [2.0 * wij * np.outer(a_i @ vec, a_j @ vec) for (wij, a_i, a_j, _) in pairs]
            gnorm = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
            if gnorm < 1e-150:
                break
            step = 0.5 / math.sqrt(it)
            ks = [clip_operator_ball(k + step * g / gnorm) for k, g in zip(ks, grads)]
    if d == 2 and len(pairs) > 1:
        polished = _coordinate_rotation_polish(c0, pairs, best_ks)
        val = value_of(polished)
        if val > best_val:
            best_val, best_ks = val, polished
    y_avg = None
    if tail:
        y_avg = matcore.symmetrize(sum(tail) / len(tail))
        tr = float(np.trace(y_avg))
        if tr > 0:
            y_avg = y_avg / tr
    return best_val, best_ks, y_avg


def gamma_from_contractions(p, blocks, ks) -> np.ndarray:
    """Coupling matrix whose pair blocks come from the contractions."""
    p = np.asarray(p, dtype=float)
    blocks = np.asarray(blocks, dtype=float)
    pairs = contraction_pairs(p, blocks)
    n = len(p)
    d = blocks.shape[1]
    gamma = np.zeros((n * d, n * d))
    for i in range(n):
        gamma[i * d : (i + 1) * d, i * d : (i + 1) * d] = blocks[i]
    for (w, a_i, a_j, (i, j)), k in zip(pairs, ks):
        theta = a_i @ k @ a_j
        gamma[i * d : (i + 1) * d, j * d : (j + 1) * d] = theta
        gamma[j * d : (j + 1) * d, i * d : (i + 1) * d] = theta.T
    return gamma


def dual_refutation_value(p, blocks, target, y: np.ndarray) -> float:
    """Upper bound on the best pairwise slack at a PSD trace-one Y.

    A value below zero certifies that no admissible pair blocks can make
    the weighted block sum dominate the target, refuting the pairwise
    condition (and with it the full coupling condition).
    """
    y = matcore.symmetrize(y)
    pairs = contraction_pairs(p, blocks)
    total = float(np.sum(y * base_gap(p, blocks, target)))
    for w, a_i, a_j, _ in pairs:
        sv = np.linalg.svd(a_j @ y @ a_i, compute_uv=False)
        total += 2.0 * w * float(np.sum(sv))
    return total


def default_candidates(task: FeasibilityTask) -> list[np.ndarray]:
    """Canonical warm starts: block diagonal, shared-target off-diagonals
    (feasible when the target is dominated by every component), the
    optimal-transport pair coupling when n = 2, and the cheap contraction
    construction (closed form for d = 1, angular grid for d = 2 pairs)."""
    n, d = task.n, task.d
    cands = []
    blockdiag = np.zeros((n * d, n * d))
    for i in range(n):
        sl = task.block_slice(i)
        blockdiag[sl, sl] = task.blocks[i]
    cands.append(blockdiag)

    shared = blockdiag.copy()
    for i, j in task.pairs:
        si, sj = task.block_slice(i), task.block_slice(j)
        shared[si, sj] = task.target
        shared[sj, si] = task.target.T
    cands.append(shared)

    if n == 2:
        try:
            root1 = matcore.sqrt_psd(task.blocks[0])
            inner = matcore.sqrt_psd(root1 @ task.blocks[1] @ root1)
            # theta = S1 S2* of the optimal quadratic coupling when blocks[0]
            # is nonsingular; degenerate cases just yield a weaker candidate
            theta = root1 @ inner @ matcore.pinv_psd(root1)
            wass = blockdiag.copy()
            s0, s1 = task.block_slice(0), task.block_slice(1)
            wass[s0, s1] = theta
            wass[s1, s0] = theta.T
            cands.append(wass)
        except matcore.NotPSD:
            pass

    if task.d == 1 or (task.n == 2 and task.d == 2):
        _, ks, _ = contraction_ascent(task.p, task.blocks, task.target, iters=0)
        cands.append(gamma_from_contractions(task.p, task.blocks, ks))
    return cands


def warm_start_from(task: FeasibilityTask, candidates) -> np.ndarray:
    """Pick the candidate with the smallest combined residual.

    Residuals within rounding of each other count as ties, broken toward
    the larger slack margin so already-feasible starts keep their slack.
    """
    tie = 1e-12 * task.scale
    best = None
    best_key = None
    for cand in candidates:
        cand = np.asarray(cand, dtype=float)
        if cand.shape != (task.n * task.d, task.n * task.d):
            continue
        pinned = _pin_blocks(matcore.symmetrize(cand), task)
        slack = mix_compress(pinned, task.p, task.d) - task.target
        res = cone_violation(task, pinned, slack)
        lmin_slack = float(np.linalg.eigvalsh(slack)[0])
        key = (res if res > tie else 0.0, -lmin_slack)
        if best_key is None or key < best_key:
            best, best_key = pinned, key
    if best is None:
        best = _pin_blocks(np.zeros((task.n * task.d, task.n * task.d)), task)
    return best


def _project_psd_pair(gamma: np.ndarray, task: FeasibilityTask, i: int, j: int) -> np.ndarray:
    si, sj = task.block_slice(i), task.block_slice(j)
    blk = np.block([[gamma[si, si], gamma[si, sj]], [gamma[sj, si], gamma[sj, sj]]])
    proj = matcore.clamp_psd(blk)
    out = gamma.copy()
    d = task.d
    out[si, si] = proj[:d, :d]
    out[si, sj] = proj[:d, d:]
    out[sj, si] = proj[d:, :d]
    out[sj, sj] = proj[d:, d:]
    return out


def solve(task: FeasibilityTask, cfg: EngineConfig = EngineConfig(), candidates=()) -> FeasibilityOutcome:
    """Dykstra cycle between the affine set and the cone constraints.

    Starts from the best of ``candidates`` plus the canonical defaults.
    Feasibility is declared on the affine-projected iterate (its blocks are
    exact by construction) once its cone distance drops under
    ``cfg.tol * scale``; otherwise the residuals are reported.
    """
    tol_abs = cfg.tol * task.scale
    gamma = warm_start_from(task, list(candidates) + default_candidates(task))
    slack = mix_compress(gamma, task.p, task.d) - task.target

    if task.cone == FULL:
        cone_sets = [("psd", None)]
    else:
        cone_sets = [("pair", pair) for pair in task.pairs] + [("slack", None)]
    inc_g = [np.zeros_like(gamma) for _ in cone_sets]
    inc_s = [np.zeros_like(slack) for _ in cone_sets]

    history: list[float] = []
    affine_dist = 0.0
    viol = cone_violation(task, gamma, slack)
    if viol <= tol_abs:
        return FeasibilityOutcome(FEASIBLE, gamma, 0, viol, 0.0, [viol])

    for it in range(1, cfg.max_iter + 1):
        for k, (kind, pair) in enumerate(cone_sets):
            yg = gamma + inc_g[k]
            ys = slack + inc_s[k]
            if kind == "psd":
                pg = matcore.clamp_psd(yg)
                ps = matcore.clamp_psd(ys)
            elif kind == "pair":
                pg = _project_psd_pair(yg, task, *pair)
                ps = ys
            else:  # slack cone only
                pg = yg
                ps = matcore.clamp_psd(ys)
            inc_g[k] = yg - pg
            inc_s[k] = ys - ps
            gamma, slack = pg, ps
        pre_g, pre_s = gamma, slack
        gamma, slack = _affine_project(task, gamma, slack)
        affine_dist = float(
            np.sqrt(matcore.fro_norm(gamma - pre_g) ** 2 + matcore.fro_norm(slack - pre_s) ** 2)
        )
        viol = cone_violation(task, gamma, slack)
        history.append(viol)
        if viol <= tol_abs:
            return FeasibilityOutcome(FEASIBLE, gamma, it, viol, affine_dist, history)
    return FeasibilityOutcome(MAX_ITERATIONS, gamma, cfg.max_iter, viol, affine_dist, history)


def validate_gamma(task: FeasibilityTask, gamma: np.ndarray, tol: float) -> dict:
    """Re-validate a candidate witness against the task constraints."""
    gamma = matcore.symmetrize(gamma)
    tol_abs = tol * task.scale
    block_err = max(
        matcore.fro_norm(gamma[task.block_slice(i), task.block_slice(i)] - task.blocks[i])
        for i in range(task.n)
    )
    slack = mix_compress(gamma, task.p, task.d) - task.target
    _, lmin_gamma = matcore.is_psd(gamma)
    _, lmin_slack = matcore.is_psd(slack)
    if task.cone == PAIRWISE:
        lmin_pairs = []
        for i, j in task.pairs:
            si, sj = task.block_slice(i), task.block_slice(j)
            blk = np.block([[gamma[si, si], gamma[si, sj]], [gamma[sj, si], gamma[sj, sj]]])
            lmin_pairs.append(matcore.is_psd(blk)[1])
        lmin_gamma = min(lmin_pairs)
    ok = block_err <= tol_abs and lmin_gamma >= -tol_abs and lmin_slack >= -tol_abs
    return {
        "ok": bool(ok),
        "block_err": float(block_err),
        "lmin_gamma": float(lmin_gamma),
        "lmin_slack": float(lmin_slack),
    }
