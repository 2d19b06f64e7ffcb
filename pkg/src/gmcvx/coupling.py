"""Gaussian couplings realizing the convex order.

Given a validated coupling witness Gamma, the mean-preserving Markov
kernel transporting the centered target law onto the mixture is sampled in
three conditional steps: inflate the target draw by the residual
covariance, draw the joint component vector conditionally on its weighted
block sum, then pick a component and shift by its mean. All Gaussian
conditioning uses pseudo-inverses so singular covariances are fine, and
all randomness comes from counter-based streams, so batches reproduce
bit-identically regardless of scheduling.

The two classical pair couplings used as warm starts and references are
exposed as :func:`wasserstein_blocks` (optimal quadratic transport) and
:func:`knothe_blocks` (triangular rearrangement).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import matcore, psdfeas
from .conditions import GammaWitness, MixtureProblem
from .rng import CounterRng


class InvalidGamma(ValueError):
    """Coupling matrix fails witness validation."""


class BothSingular(ValueError):
    """Optimal-transport blocks need at least one nonsingular covariance."""


@dataclass
class CouplingSample:
    """One joint draw: target draw x, component index, mixture draw y."""

    x: np.ndarray
    index: int
    y: np.ndarray


@dataclass
class MartingaleKernel:
    """Precomputed conditioning data for the mean-preserving kernel."""

    prob: MixtureProblem
    gamma: np.ndarray
    mix_cov: np.ndarray  # A Gamma A*
    cond_mean_map: np.ndarray  # Gamma A* pinv(A Gamma A*), nd x d
    cond_sqrt: np.ndarray  # PSD sqrt of conditional covariance, nd x nd
    resid_cov: np.ndarray  # A Gamma A* - target, d x d
    resid_sqrt: np.ndarray
    target_sqrt: np.ndarray


def build_kernel(prob: MixtureProblem, gamma, tol: float = 1e-7) -> MartingaleKernel:
    """Validate the witness and precompute every conditioning matrix."""
    prob.require_centered()
    if isinstance(gamma, GammaWitness):
        gamma = gamma.gamma
    gamma = matcore.symmetrize(np.asarray(gamma, dtype=float))
    n, d = prob.n, prob.d
    if gamma.shape != (n * d, n * d):
        raise InvalidGamma(f"expected shape {(n * d, n * d)}, got {gamma.shape}")
    task = psdfeas.FeasibilityTask(prob.p, prob.covs, prob.target, psdfeas.FULL)
    check = psdfeas.validate_gamma(task, gamma, tol)
    if not check["ok"]:
        raise InvalidGamma(f"witness does not validate: {check}")
    for i in range(n):
        gamma[i * d : (i + 1) * d, i * d : (i + 1) * d] = prob.covs[i]

    mix_cov = psdfeas.mix_compress(gamma, prob.p, d)
    mix_pinv = matcore.pinv_psd(matcore.clamp_psd(mix_cov))
    gamma_at = gamma * np.repeat(prob.p, d)[None, :]  # Gamma A* as nd x d after summing
    gamma_at = gamma_at.reshape(n * d, n, d).sum(axis=1)
    cond_mean_map = gamma_at @ mix_pinv
    cond_cov = matcore.clamp_psd(gamma - cond_mean_map @ gamma_at.T)
    resid_cov = matcore.clamp_psd(mix_cov - prob.target)
    return MartingaleKernel(
        prob=prob,
        gamma=gamma,
        mix_cov=mix_cov,
        cond_mean_map=cond_mean_map,
        cond_sqrt=matcore.sqrt_psd(cond_cov),
        resid_cov=resid_cov,
        resid_sqrt=matcore.sqrt_psd(resid_cov),
        target_sqrt=matcore.sqrt_psd(prob.target),
    )


def sample_batch(kernel: MartingaleKernel, n_samples: int, rng: CounterRng, xs: np.ndarray | None = None):
    """Vectorized joint draws; returns (xs, indices, ys).

    When ``xs`` is omitted they are drawn from the centered target law.
    Consumption order of the stream is fixed, so results depend only on the
    stream state, not on thread count or batching of downstream work.
    """
    prob = kernel.prob
    d, n = prob.d, prob.n
    if xs is None:
        xs = rng.normal_matrix(n_samples, d) @ kernel.target_sqrt.T
    else:
        xs = np.asarray(xs, dtype=float).reshape(n_samples, d)
    zs = xs + rng.normal_matrix(n_samples, d) @ kernel.resid_sqrt.T
    ws = zs @ kernel.cond_mean_map.T + rng.normal_matrix(n_samples, n * d) @ kernel.cond_sqrt.T
    idx = rng.choice(prob.p, n_samples)
    blocks = ws.reshape(n_samples, n, d)[np.arange(n_samples), idx]
    ys = blocks + prob.means[idx]
    return xs, idx, ys


def sample(kernel: MartingaleKernel, x, rng: CounterRng) -> CouplingSample:
    """Single draw from the kernel at a given target point x."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    xs, idx, ys = sample_batch(kernel, 1, rng, xs=x)
    return CouplingSample(xs[0], int(idx[0]), ys[0])


def wasserstein_blocks(sigma1, sigma2, tol: float = 1e-8):
    """Factors (S1, S2) of the optimal quadratic coupling of two Gaussians.

    ``S1 S1* == sigma1`` and ``S2 S2* == sigma2`` with the cross block
    ``S1 S2*`` making the pair covariance singular along the transport map.
    Needs at least one nonsingular input (roles are swapped if needed).
    """
    s1 = matcore.symmetrize(sigma1)
    s2 = matcore.symmetrize(sigma2)
    d = s1.shape[0]
    ok1 = np.linalg.matrix_rank(s1, tol * (1.0 + matcore.fro_norm(s1))) == d
    ok2 = np.linalg.matrix_rank(s2, tol * (1.0 + matcore.fro_norm(s2))) == d
    if not ok1 and not ok2:
        raise BothSingular("optimal-transport blocks need a nonsingular side")
    if not ok1:
        b2, b1 = wasserstein_blocks(s2, s1, tol)
        return b1, b2
    root = matcore.sqrt_psd(s1)
    root_inv = matcore.pinv_psd(root)
    inner = matcore.sqrt_psd(matcore.symmetrize(root @ s2 @ root))
    return root, root_inv @ inner


def knothe_blocks(sigma1, sigma2):
    """Lower-triangular factors of the coordinatewise rearrangement coupling."""
    return matcore.cholesky_lower(sigma1), matcore.cholesky_lower(sigma2)
