"""Command-line surface: certify, recheck, sample-size, oracle.

Exit codes are a stable contract:
  certify   0 Certified / 2 Rejected / 3 Indeterminate / 1 operational error
  recheck   0 Confirmed / 2 Defeated  / 3 Invalid       / 1 operational error
  others    0 success / 1 error
Human-readable text goes to stdout; machine output goes to files or --json.
"""

from __future__ import annotations

import argparse
import json
import os
import secrets
import sys
from typing import Optional

from . import __version__
from .adapters import DEFAULT_TIMEOUT_SECS, open_model
from .certify import (
    plan_sample_size,
    recheck,
    run_certification,
    write_certificate,
    DEFAULT_FEASIBILITY_CEILING,
    RecheckOutcome,
)
from .core import Verdict, load_certificate, load_spec
from .dataset import load_dataset
from .errors import CertboundError
from .oracle import DEFAULT_BUDGET, oracle_compare, plan_enumeration
from .roma import Fallback, RomaConfig
from .stats import hoeffding_sample_size

_VERDICT_EXIT = {Verdict.CERTIFIED: 0, Verdict.REJECTED: 2, Verdict.INDETERMINATE: 3}
_RECHECK_EXIT = {RecheckOutcome.CONFIRMED: 0, RecheckOutcome.DEFEATED: 2, RecheckOutcome.INVALID: 3}


def _env_workers(value: Optional[int]) -> int:
    if value is not None:
        return value
    env = os.environ.get("CERTBOUND_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1

def _env_timeout(value: Optional[float]) -> float:
    if value is not None:
        return value
    env = os.environ.get("CERTBOUND_TIMEOUT_SECS")
    if env:
        return float(env)
    return DEFAULT_TIMEOUT_SECS


def _config(spec, args) -> RomaConfig:
    kwargs = {"k": spec.samples_per_point}
    if getattr(args, "ad_level", None) is not None:
        kwargs["ad_level"] = args.ad_level
    if getattr(args, "fallback_order", None):
        kwargs["fallback_order"] = tuple(
            Fallback(name.strip()) for name in args.fallback_order.split(",")
        )
    return RomaConfig(**kwargs)


def _reject_seed_override(args) -> None:
    if getattr(args, "seed", None) is not None and getattr(args, "spec", None):
        raise CertboundError(
            "--seed cannot override the spec: the normative record fixes the seed"
        )


def _cmd_certify(args) -> int:
    _reject_seed_override(args)
    spec = load_spec(args.spec)
    dataset = load_dataset(args.dataset)
    with open_model(args.model, timeout=_env_timeout(args.timeout)) as model:
        cert = run_certification(
            spec, model, dataset, cfg=_config(spec, args), workers=_env_workers(args.workers)
        )
    write_certificate(cert, args.out)
    if args.json:
        print(json.dumps({
            "verdict": cert.verdict.value,
            "p_total": cert.p_total,
            "delta": spec.delta,
            "content_hash": cert.content_hash,
            "certificate": args.out,
        }))
    else:
        print(f"verdict:      {cert.verdict.value}")
        print(f"p_total:      {cert.p_total:.6g} (delta {spec.delta:.6g})")
        for r in cert.per_domain:
            flag = " [indeterminate]" if r.indeterminate else ""
            print(
                f"  {r.domain_name}: p_mean {r.p_mean:.6g} + radius {r.hoeffding_radius:.6g}"
                f" -> p_upper {r.p_upper:.6g}, non-normal points {r.normality_failures}/{r.n}{flag}"
            )
        print(f"content_hash: {cert.content_hash}")
        print(f"certificate written to {args.out}")
    return _VERDICT_EXIT[cert.verdict]


def _cmd_recheck(args) -> int:
    _reject_seed_override(args)
    cert = load_certificate(args.certificate)
    spec = load_spec(args.spec)
    dataset = load_dataset(args.dataset)
    fresh_seed = None
    if args.fresh_seed is not None:
        fresh_seed = args.fresh_seed if args.fresh_seed >= 0 else secrets.randbits(63)
    with open_model(args.model, timeout=_env_timeout(args.timeout)) as model:
        report = recheck(
            cert, spec, model, dataset,
            cfg=_config(spec, args),
            workers=_env_workers(args.workers),
            fresh_seed=fresh_seed,
        )
    if args.json:
        print(json.dumps(report.to_doc()))
    else:
        print(f"outcome: {report.outcome.value} ({report.mode})")
        print(report.detail)
    return _RECHECK_EXIT[report.outcome]


def _cmd_sample_size(args) -> int:
    if args.spec:
        spec = load_spec(args.spec)
        plan = plan_sample_size(spec, headroom=args.headroom, ceiling=args.ceiling)
        if args.json:
            print(json.dumps(plan.to_doc()))
            return 0
        for d in plan.domains:
            if not d.feasible:
                print(
                    f"{d.domain_name}: statistically infeasible at this scale "
                    f"(required n = {d.required_n:.3g} exceeds ceiling {plan.ceiling:.3g})"
                )
            else:
                status = "sufficient" if d.sufficient else "insufficient"
                print(
                    f"{d.domain_name}: required n = {int(d.required_n) + 1} for margin "
                    f"{d.margin:.6g}; spec provides {plan.points_per_category} ({status})"
                )
        return 0
    n = hoeffding_sample_size(args.alpha, args.radius)
    print(json.dumps({"n": n}) if args.json else n)
    return 0


def _cmd_oracle(args) -> int:
    _reject_seed_override(args)
    spec = load_spec(args.spec)
    dataset = load_dataset(args.dataset)
    if args.domain:
        matches = [d for d in spec.domains if d.name == args.domain]
        if not matches:
            raise CertboundError(f"spec has no domain named {args.domain!r}")
        domain = matches[0]
    else:
        domain = spec.domains[0]
    point = dataset.by_id(args.point)
    with open_model(args.model, timeout=_env_timeout(args.timeout)) as model:
        plan = plan_enumeration(domain, point, budget=args.budget, grid_per_dim=args.grid)
        report = oracle_compare(point, model, domain, _config(spec, args), plan, spec.seed)
    print(json.dumps(report.to_doc()))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="certbound",
        description="Statistical robustness certification for black-box classifiers.",
    )
    parser.add_argument("--version", action="version", version=f"certbound {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_out=False):
        p.add_argument("--spec", required=True, help="normative spec JSON path")
        p.add_argument(
            "--model", required=True,
            help="model locator: builtin:<weights.json>, cmd:<command line>, or http(s)://host:port",
        )
        p.add_argument("--dataset", required=True, help="dataset JSONL file or directory")
        if with_out:
            p.add_argument("--out", required=True, help="certificate output path")
        p.add_argument("--workers", type=int, default=None,
                       help="parallel point evaluations (default: logical cores / CERTBOUND_WORKERS)")
        p.add_argument("--timeout", type=float, default=None,
                       help="adapter timeout seconds (default: 30 / CERTBOUND_TIMEOUT_SECS)")
        p.add_argument("--seed", type=int, default=None,
                       help="rejected when --spec provides one; the spec is authoritative")
        p.add_argument("--ad-level", type=float, default=None, dest="ad_level",
                       help="significance level for the normality gate (0.05 or 0.01)")
        p.add_argument("--fallback-order", default=None, dest="fallback_order",
                       help="comma list from BoxCox,NarrowDomain,ExactCount,EmpiricalFraction")
        p.add_argument("--json", action="store_true", help="machine-readable summary on stdout")

    p = sub.add_parser("certify", help="run the full two-stage certification")
    common(p, with_out=True)
    p.set_defaults(func=_cmd_certify)

    p = sub.add_parser("recheck", help="confirm or defeat an issued certificate")
    p.add_argument("--certificate", required=True, help="certificate JSON path")
    common(p)
    p.add_argument("--fresh-seed", type=int, nargs="?", const=-1, default=None,
                   help="independent statistical re-test; optional explicit seed (random if omitted)")
    p.set_defaults(func=_cmd_recheck)

    p = sub.add_parser("sample-size", help="pre-calculate required sample sizes")
    p.add_argument("--alpha", type=float, help="statistical risk level")
    p.add_argument("--radius", type=float, help="target concentration radius")
    p.add_argument("--spec", help="per-domain feasibility report for a spec")
    p.add_argument("--headroom", type=float, default=0.0,
                   help="expected estimate headroom subtracted from each sub-budget")
    p.add_argument("--ceiling", type=float, default=DEFAULT_FEASIBILITY_CEILING,
                   help="required-n ceiling above which a domain is flagged infeasible")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_sample_size)

    p = sub.add_parser("oracle", help="compare the statistical estimate against exact counting")
    common(p)
    p.add_argument("--point", required=True, help="dataset point id")
    p.add_argument("--grid", type=int, default=None, help="grid points per input dimension")
    p.add_argument("--domain", default=None, help="domain name (default: first in spec)")
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET,
                   help="maximum enumerated inputs before the plan is rejected")
    p.set_defaults(func=_cmd_oracle)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "sample-size" and not args.spec:
        if args.alpha is None or args.radius is None:
            parser.error("sample-size needs either --spec or both --alpha and --radius")
    try:
        return args.func(args)
    except CertboundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
