"""Command-line front end: problem ingestion, checkers, sweeps, couplings.

Subcommands
-----------
``check``    run one condition checker on a problem file, optionally
             emitting a certificate file bound to the input by digest.
``sweep``    evaluate checkers over a two-parameter grid described by a
             JSON spec with expression-valued matrix entries.
``couple``   sample the mean-preserving coupling given a problem and a
             stored coupling certificate; writes sample CSV and prints
             martingale diagnostics as JSON.
``mcverify`` expectation-suite comparison of the target law against the
             mixture (evidence only).

Exit codes: 0 holds, 1 fails, 2 unknown, 64 malformed JSON, 65 invariant
violation, 66 usage or IO error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys

import numpy as np

from . import __version__, coupling, cxverify, matcore, psdfeas, sweep as sweep_mod
from .conditions import (
    ChainViolation,
    CorrelCertificate,
    GammaWitness,
    InvalidProblem,
    MixtureProblem,
    NonCenteredMeans,
    SearchConfig,
    SingularM,
    Status,
    Verdict,
    check_dominated_by_single,
    check_inecov,
    check_inecovf,
    check_inegsqrt,
    find_correl_certificate,
    implication_chain_report,
    validate_correl_certificate,
    validate_gamma_witness,
)
from .rng import CounterRng

EXIT_HOLDS = 0
EXIT_FAILS = 1
EXIT_UNKNOWN = 2
EXIT_BAD_JSON = 64
EXIT_INVARIANT = 65
EXIT_USAGE = 66

_STATUS_EXIT = {Status.HOLDS: EXIT_HOLDS, Status.FAILS: EXIT_FAILS, Status.UNKNOWN: EXIT_UNKNOWN}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits 2, which is taken
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


class CliFailure(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def canonical_digest(doc) -> str:
    """Digest of the canonical JSON serialization, binding certificates."""
    payload = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _load_json(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise CliFailure(EXIT_USAGE, f"cannot read {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise CliFailure(EXIT_BAD_JSON, f"malformed JSON in {path}: {exc}")


def problem_from_doc(doc) -> tuple[MixtureProblem, str]:
    """Validate a problem document and build the mixture problem."""
    try:
        d = int(doc["d"])
        n = int(doc["n"])
        p = np.asarray(doc["p"], dtype=float)
        target = np.asarray(doc["target"], dtype=float)
        comps = doc["components"]
    except (KeyError, TypeError, ValueError) as exc:
        raise CliFailure(EXIT_BAD_JSON, f"problem document missing or mistyped field: {exc}")
    if len(comps) != n or p.shape != (n,) or target.shape != (d, d):
        raise CliFailure(EXIT_INVARIANT, "problem document shapes are inconsistent")
    if abs(float(p.sum()) - 1.0) > 1e-10 or np.any(p <= 0.0):
        raise CliFailure(EXIT_INVARIANT, "weights must be positive and sum to one")
    covs = []
    means = []
    for k, comp in enumerate(comps):
        try:
            cov = np.asarray(comp["cov"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise CliFailure(EXIT_BAD_JSON, f"component {k}: {exc}")
        if cov.shape != (d, d):
            raise CliFailure(EXIT_INVARIANT, f"component {k} covariance must be {d} x {d}")
        mean = np.asarray(comp.get("mean", [0.0] * d), dtype=float)
        if mean.shape != (d,):
            raise CliFailure(EXIT_INVARIANT, f"component {k} mean must have length {d}")
        covs.append(cov)
        means.append(mean)
    for name, mat in [("target", target)] + [(f"component {k}", c) for k, c in enumerate(covs)]:
        try:
            matcore.require_symmetric(mat, tol=1e-12)
        except matcore.InvalidMatrix as exc:
            raise CliFailure(EXIT_INVARIANT, f"{name}: {exc}")
    try:
        prob = MixtureProblem(p=p, covs=np.stack(covs), target=target, means=np.stack(means))
    except InvalidProblem as exc:
        raise CliFailure(EXIT_INVARIANT, str(exc))
    return prob, canonical_digest(doc)


def _witness_summary(witness) -> object:
    if witness is None:
        return None
    if isinstance(witness, GammaWitness):
        _, lmin = matcore.is_psd(witness.gamma)
        return {"kind": "gamma", "shape": list(witness.gamma.shape), "lmin": lmin}
    if isinstance(witness, CorrelCertificate):
        return {"kind": "correl", "m": witness.m.tolist(), "corr": witness.corr.tolist()}
    if isinstance(witness, np.ndarray):
        return {"kind": "direction", "xi": witness.tolist()}
    if isinstance(witness, tuple):
        return {"kind": "tuple", "value": [_witness_summary(w) for w in witness]}
    if isinstance(witness, (int, float, str)):
        return witness
    if isinstance(witness, dict):
        return {k: _witness_summary(v) for k, v in witness.items()}
    return repr(witness)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _report(condition: str, verdict: Verdict, digest: str, extra: dict | None = None) -> dict:
    doc = {
        "schema_version": 1,
        "tool": "gmcvx",
        "version": __version__,
        "condition": condition,
        "status": verdict.status.value,
        "margin": _jsonable(verdict.margin),
        "witness": _jsonable(_witness_summary(verdict.witness)),
        "diagnostics": _jsonable(verdict.diagnostics),
        "input_digest": digest,
    }
    if extra:
        doc.update(extra)
    return doc


def _emit_certificate(path: str, verdict: Verdict, digest: str, tol: float):
    witness = verdict.witness
    if isinstance(witness, GammaWitness):
        doc = {
            "kind": "gamma",
            "gamma": witness.gamma.tolist(),
            "tolerances": {"validation": tol},
            "tool_version": __version__,
            "input_digest": digest,
        }
    elif isinstance(witness, CorrelCertificate):
        doc = {
            "kind": "correl",
            "m": witness.m.tolist(),
            "corr": witness.corr.tolist(),
            "comp_scales": witness.comp_scales.tolist(),
            "mix_scale": witness.mix_scale.tolist(),
            "stacked": witness.stacked.tolist(),
            "tolerances": {"validation": tol},
            "tool_version": __version__,
            "input_digest": digest,
        }
    else:
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_certificate(path: str, prob: MixtureProblem, digest: str):
    doc = _load_json(path)
    if doc.get("input_digest") not in (None, digest):
        raise CliFailure(EXIT_INVARIANT, "certificate digest does not match the problem file")
    kind = doc.get("kind")
    if kind == "gamma":
        gamma = np.asarray(doc["gamma"], dtype=float)
        return GammaWitness(gamma, prob.n, prob.d)
    if kind == "correl":
        return CorrelCertificate(
            m=np.asarray(doc["m"], dtype=float),
            corr=np.asarray(doc["corr"], dtype=float),
            comp_scales=np.asarray(doc["comp_scales"], dtype=float),
            mix_scale=np.asarray(doc["mix_scale"], dtype=float),
            stacked=np.asarray(doc["stacked"], dtype=float),
        )
    raise CliFailure(EXIT_BAD_JSON, f"unknown certificate kind {kind!r}")


def cmd_check(args) -> int:
    doc = _load_json(args.input)
    prob, digest = problem_from_doc(doc)
    cfg = SearchConfig(tol=args.tol, seed=args.seed) if args.tol else SearchConfig(seed=args.seed)
    engine_cfg = psdfeas.EngineConfig()
    extra_m = []
    if args.with_m:
        mdoc = _load_json(args.with_m)
        if isinstance(mdoc, dict) and "matrices" in mdoc:
            extra_m = [np.asarray(m, dtype=float) for m in mdoc["matrices"]]
        elif isinstance(mdoc, dict) and "M" in mdoc:
            extra_m = [np.asarray(mdoc["M"], dtype=float)]
        elif isinstance(mdoc, list):
            extra_m = [np.asarray(m, dtype=float) for m in mdoc]
        else:
            raise CliFailure(EXIT_BAD_JSON, "cannot interpret the candidate-basis file")

    try:
        if args.condition == "inegsqrt":
            verdict = check_inegsqrt(prob, cfg)
        elif args.condition == "inecov":
            verdict = check_inecov(prob, engine_cfg, cfg, seed=args.seed)
        elif args.condition == "inecovf":
            verdict = check_inecovf(prob, engine_cfg, cfg, seed=args.seed)
        elif args.condition == "correl":
            verdict = find_correl_certificate(prob, extra_m=extra_m, seed=args.seed)
        elif args.condition == "dominates":
            verdict = check_dominated_by_single(prob)
        else:  # chain
            report = implication_chain_report(prob, cfg, engine_cfg, seed=args.seed)
            if report.inecov.holds:
                verdict = Verdict(Status.HOLDS, report.inecov.margin, None, report.as_dict())
            elif report.inegsqrt.fails:
                verdict = Verdict(Status.FAILS, report.inegsqrt.margin, None, report.as_dict())
            else:
                verdict = Verdict(Status.UNKNOWN, report.inegsqrt.margin, None, report.as_dict())
    except (NonCenteredMeans, SingularM) as exc:
        raise CliFailure(EXIT_INVARIANT, str(exc))
    except ChainViolation as exc:
        raise CliFailure(EXIT_INVARIANT, f"chain violation: {exc}")

    if args.emit_certificate and verdict.holds:
        try:
            _emit_certificate(args.emit_certificate, verdict, digest, engine_cfg.tol)
        except OSError as exc:
            raise CliFailure(EXIT_USAGE, f"cannot write {args.emit_certificate}: {exc}")
    print(json.dumps(_report(args.condition, verdict, digest), sort_keys=True))
    return _STATUS_EXIT[verdict.status]


def _template_from_doc(doc, axis_names):
    base = doc["problem"]

    def build(v1: float, v2: float) -> MixtureProblem:
        env = {
            axis_names[0]: float(v1),
            axis_names[1]: float(v2),
            "sqrt": math.sqrt,
            "abs": abs,
            "min": min,
            "max": max,
            "pi": math.pi,
            "exp": math.exp,
            "log": math.log,
            "sin": math.sin,
            "cos": math.cos,
        }

        def leaf(value):
            if isinstance(value, str):
                return float(eval(value, {"__builtins__": {}}, env))  # noqa: S307 - trusted local spec
            return float(value)

        def mat(rows):
            return [[leaf(v) for v in row] for row in rows]

        d = int(base["d"])
        comps = [
            {
                "cov": mat(c["cov"]),
                "mean": [leaf(v) for v in c.get("mean", [0.0] * d)],
            }
            for c in base["components"]
        ]
        return MixtureProblem(
            p=np.asarray(base["p"], dtype=float),
            covs=np.stack([np.asarray(c["cov"], dtype=float) for c in comps]),
            target=np.asarray(mat(base["target"]), dtype=float),
            means=np.stack([np.asarray(c["mean"], dtype=float) for c in comps]),
        )

    return build


def cmd_sweep(args) -> int:
    doc = _load_json(args.spec)
    try:
        axes = [sweep_mod.Axis(a["name"], a["min"], a["max"], a["step"]) for a in doc["axes"]]
        checkers = tuple(doc.get("checkers", ["inegsqrt"]))
        seed = int(doc.get("seed", 0))
        template = _template_from_doc(doc, [axes[0].name, axes[1].name])
        spec = sweep_mod.SweepSpec(template, axes[0], axes[1], checkers, seed)
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise CliFailure(EXIT_BAD_JSON, f"bad sweep spec: {exc}")
    cells = sweep_mod.run_sweep(spec, SearchConfig(seed=seed))
    try:
        sweep_mod.write_region_csv(cells, args.out)
    except OSError as exc:
        raise CliFailure(EXIT_USAGE, f"cannot write {args.out}: {exc}")
    print(json.dumps({"cells": len(cells), "out": args.out}))
    return EXIT_HOLDS


def cmd_couple(args) -> int:
    doc = _load_json(args.input)
    prob, digest = problem_from_doc(doc)
    cert = load_certificate(args.gamma, prob, digest)
    if not isinstance(cert, GammaWitness):
        raise CliFailure(EXIT_INVARIANT, "coupling needs a gamma certificate")
    try:
        kernel = coupling.build_kernel(prob, cert)
    except (coupling.InvalidGamma, NonCenteredMeans) as exc:
        raise CliFailure(EXIT_INVARIANT, str(exc))
    rng = CounterRng(args.seed)
    xs, idx, ys = coupling.sample_batch(kernel, args.samples, rng)
    d = prob.d
    header = ",".join([f"x{k + 1}" for k in range(d)] + ["i"] + [f"y{k + 1}" for k in range(d)])
    lines = [header]
    for row in range(args.samples):
        vals = [repr(float(v)) for v in xs[row]] + [str(int(idx[row]) + 1)] + [
            repr(float(v)) for v in ys[row]
        ]
        lines.append(",".join(vals))
    try:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise CliFailure(EXIT_USAGE, f"cannot write {args.out}: {exc}")

    resid = ys - xs
    diags = {
        "samples": args.samples,
        "mean_y": ys.mean(axis=0).tolist(),
        "cov_y": np.cov(ys.T, ddof=1).reshape(d, d).tolist(),
        "mixture_cov": prob.mixture_covariance().tolist(),
        "martingale_residual": (resid.mean(axis=0)).tolist(),
        "martingale_residual_se": (resid.std(axis=0, ddof=1) / math.sqrt(args.samples)).tolist(),
    }
    print(json.dumps(_jsonable(diags), sort_keys=True))
    return EXIT_HOLDS


def cmd_mcverify(args) -> int:
    doc = _load_json(args.input)
    prob, digest = problem_from_doc(doc)
    lhs = cxverify.GaussianLaw(np.zeros(prob.d), prob.target)
    suite = cxverify.default_suite(prob, seed=args.seed)
    verdict = cxverify.test_convex_order(lhs, prob, suite, mc_samples=args.samples, seed=args.seed)
    print(json.dumps(_report("order_evidence", verdict, digest), sort_keys=True))
    return _STATUS_EXIT[verdict.status]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gmcvx", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="run one condition checker")
    p_check.add_argument("--condition", required=True,
                         choices=["inegsqrt", "inecov", "inecovf", "correl", "dominates", "chain"])
    p_check.add_argument("--input", required=True)
    p_check.add_argument("--tol", type=float, default=None)
    p_check.add_argument("--seed", type=int, default=0)
    p_check.add_argument("--emit-certificate", dest="emit_certificate", default=None)
    p_check.add_argument("--with-M", dest="with_m", default=None)
    p_check.set_defaults(func=cmd_check)

    p_sweep = sub.add_parser("sweep", help="two-parameter region map")
    p_sweep.add_argument("--spec", required=True)
    p_sweep.add_argument("--out", required=True)
    p_sweep.set_defaults(func=cmd_sweep)

    p_couple = sub.add_parser("couple", help="sample the mean-preserving coupling")
    p_couple.add_argument("--input", required=True)
    p_couple.add_argument("--gamma", required=True)
    p_couple.add_argument("--samples", type=int, default=100000)
    p_couple.add_argument("--seed", type=int, default=0)
    p_couple.add_argument("--out", required=True)
    p_couple.set_defaults(func=cmd_couple)

    p_mc = sub.add_parser("mcverify", help="expectation-suite comparison")
    p_mc.add_argument("--input", required=True)
    p_mc.add_argument("--samples", type=int, default=100000)
    p_mc.add_argument("--seed", type=int, default=0)
    p_mc.set_defaults(func=cmd_mcverify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
