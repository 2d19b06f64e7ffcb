#!/usr/bin/env python3
"""Locate verdict-flip thresholds along reference one-parameter families.

Three thresholds are bisected and compared against their closed forms:
the directional cutoff of the axis-swap pair on its diagonal axis
(3 + 2 sqrt 2), the shared-correlation cutoff of the diagonal triple
(6 + 4 sqrt 2), and the scalar mixture cutoff (weighted component spread).
"""

import argparse
import math
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))
sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

import numpy as np

from families import axis_swap_problem, three_diag_problem
from gmcvx.conditions import MixtureProblem, SearchConfig, check_correl_with
from gmcvx.sweep import boundary_bisect


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--xtol", type=float, default=1e-5)
    args = ap.parse_args()
    cfg = SearchConfig(iters=40, random_starts=16, grid_points=512, alpha_points=200)

    a_star = boundary_bisect(
        lambda a: axis_swap_problem(a, 0.0), "inegsqrt", 5.5, 6.0,
        xtol=args.xtol, search_cfg=cfg,
    )
    print(f"directional cutoff  a* = {a_star:.6f}   (exact {3 + 2 * math.sqrt(2):.6f})")

    s_star = boundary_bisect(
        lambda s: three_diag_problem(np.diag([s, s])),
        lambda prob: check_correl_with(prob, np.eye(2)),
        10.0, 13.0, xtol=args.xtol,
    )
    print(f"correlation cutoff  s* = {s_star:.6f}   (exact {6 + 4 * math.sqrt(2):.6f})")

    p, sig1, sig2 = 0.3, 1.0, 2.0

    def scalar(sig):
        return MixtureProblem(
            p=[p, 1 - p],
            covs=np.array([[[sig1**2]], [[sig2**2]]]),
            target=np.array([[sig**2]]),
        )

    t_star = boundary_bisect(scalar, "inegsqrt", 1.0, 2.5, xtol=1e-7)
    print(f"scalar cutoff    sig* = {t_star:.7f}   (exact {p * sig1 + (1 - p) * sig2:.7f})")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
