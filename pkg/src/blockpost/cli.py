"""Command-line interface.

Subcommands: simulate, posterior, map, kl, rate, bounds, verify
(lemma-diff | prop1 | concentration), sweep (convergence | sparse).

Every subcommand is a thin wrapper over the library: identical seeds
give byte-identical outputs.  Exit codes: 0 success, 1 usage or input
error, 2 theory-precondition violation, 3 resource-cap error.  Errors
are written to standard error as single-line JSON.
"""

from __future__ import annotations

import argparse
import json
import math
import secrets
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import theorem_constants
from .divergence import kappa_max, kappa_min, lipschitz_L0
from .errors import CapExceededError, SpecError, TheoryPreconditionError
from .families import family_from_dict
from .harness import (
    ExperimentPlan,
    run_concentration_check,
    run_convergence_sweep,
    run_exhaustive_checks,
    run_sparse_sweep,
    sample_config_at_distance,
)
from .io import (
    load_spec,
    observations_text,
    read_configuration,
    read_observations,
    write_configuration,
    write_csv,
    write_sidecar,
)
from .model import (
    Configuration,
    derive_seed,
    in_good_set,
    make_rng,
    sample_configuration,
    sample_observations,
)
from .posterior import exact_posterior, misclassification, posterior_mass_of_class
from .rates import exact_chernoff_rate, rate_function
from .symmetry import check_bound_number, detect_symmetry_group

SCHEMA_VERSION = 1


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _grid_spec(text: str) -> list[int]:
    """Parse 'a:b:step' (inclusive) or a comma list into sizes."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise _UsageError(f"grid must be a:b:step, got {text!r}")
        a, b, step = (int(p) for p in parts)
        if step <= 0 or b < a:
            raise _UsageError(f"bad grid range {text!r}")
        return list(range(a, b + 1, step))
    return [int(p) for p in text.split(",") if p]


def _float_grid(text: str) -> list[float]:
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise _UsageError(f"grid must be a:b:step, got {text!r}")
        a, b, step = (float(p) for p in parts)
        if step <= 0 or b < a:
            raise _UsageError(f"bad grid range {text!r}")
        out = []
        v = a
        while v <= b + 1e-12:
            out.append(round(v, 12))
            v += step
        return out
    return [float(p) for p in text.split(",") if p]


def _resolve_seed(args) -> int:
    """Explicit seed, or a recorded draw from entropy."""
    if args.seed is not None:
        return int(args.seed)
    return secrets.randbits(63)


def _emit(args, name: str, text: str, sidecar: dict) -> None:
    """Write a primary output (stdout for '-', file in the out dir
    otherwise); directory mode also records the resolved run config."""
    if args.out == "-":
        sys.stdout.write(text)
        return
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)
    write_sidecar(out / "run.json", sidecar)


def _run_config(args, seed: int | None = None) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("func",)}
    cfg["resolved_seed"] = seed
    cfg["version"] = f"{__version__} (spec-schema {SCHEMA_VERSION})"
    return cfg


def _family_arg(text: str):
    """Family given inline as JSON or as a path to a JSON file."""
    t = text.strip()
    if t.startswith("{"):
        return family_from_dict(json.loads(t))
    with open(t) as fh:
        return family_from_dict(json.load(fh))


# ----------------------------------------------------------------------
# subcommands


def _cmd_simulate(args) -> int:
    spec = load_spec(args.spec)
    seed = _resolve_seed(args)
    n = args.n
    m = args.m if args.m is not None else n
    truth = sample_configuration(spec, n, m, derive_seed(seed, 0))
    x = sample_observations(spec, truth, derive_seed(seed, 1))
    text = observations_text(x)
    if args.out == "-":
        sys.stdout.write(text)
        return 0
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "data.csv").write_text(text)
    write_configuration(truth, out / "truth.json", sbm=spec.variant.is_sbm)
    write_sidecar(out / "run.json", _run_config(args, seed))
    return 0


def _load_data(args, spec):
    n, m = _infer_dims(args.data, spec.variant)
    return read_observations(args.data, spec.variant, n, m)


def _infer_dims(path, variant):
    max_i = max_j = 0
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.lower() == "i,j,value":
                continue
            parts = line.split(",")
            max_i = max(max_i, int(parts[0]))
            max_j = max(max_j, int(parts[1]))
    if variant.kind == "sbm":
        n = max(max_i, max_j)
        return n, n
    return max_i, max_j


def _cmd_posterior(args) -> int:
    spec = load_spec(args.spec)
    x = _load_data(args, spec)
    pi_eval = None
    perturb_seed = None
    if args.theta_perturb:
        from .harness import perturb_connectivity

        sigma = detect_symmetry_group(spec.pi, spec.variant)
        report = theorem_constants(spec, 0.0, sigma=sigma)
        if args.theta_perturb >= report.c / (2.0 * report.L0):
            raise TheoryPreconditionError(
                f"perturbation radius must stay below c/(2 L0) = "
                f"{report.c / (2.0 * report.L0):.6g}"
            )
        perturb_seed = args.perturb_seed if args.perturb_seed is not None else _resolve_seed(args)
        pi_eval = perturb_connectivity(
            spec, args.theta_perturb, sigma, make_rng(derive_seed(perturb_seed, 2))
        )
    table = exact_posterior(x, spec, pi=pi_eval, cap=args.cap)
    sigma = detect_symmetry_group(spec.pi, spec.variant)
    flat = table.log_values.reshape(-1)
    order = np.argsort(-flat, kind="stable")[: args.top]
    top = []
    for fi in order:
        cfg = table.config_from_flat(int(fi))
        z1, w1 = cfg.one_based()
        entry = {"z": z1, "mass": float(np.exp(flat[fi]))}
        if not spec.variant.is_sbm:
            entry["w"] = w1
        top.append(entry)
    uniq, agg = table.class_view(sigma)
    class_order = np.argsort(-agg, kind="stable")[: args.top]
    classes = []
    for ci in class_order:
        cfg = table.config_from_flat(int(uniq[ci]))
        z1, w1 = cfg.one_based()
        entry = {"z": z1, "mass": float(agg[ci])}
        if not spec.variant.is_sbm:
            entry["w"] = w1
        classes.append(entry)
    payload = {
        "top": top,
        "classes": classes,
        "log_normalizer": table.log_norm,
        "neg_inf_configs": table.neg_inf_count,
        "sigma_order": sigma.order,
        "perturb_seed": perturb_seed,
    }
    text = json.dumps(payload, indent=2) + "\n"
    _emit(args, "posterior.json", text, _run_config(args, perturb_seed))
    return 0


def _cmd_map(args) -> int:
    spec = load_spec(args.spec)
    x = _load_data(args, spec)
    table = exact_posterior(x, spec, cap=args.cap)
    sigma = detect_symmetry_group(spec.pi, spec.variant)
    map_cfg = table.map_configuration()
    z1, w1 = map_cfg.one_based()
    payload = {"z": z1, "mass": table.prob(map_cfg)}
    if not spec.variant.is_sbm:
        payload["w"] = w1
    payload["class_mass"] = posterior_mass_of_class(table, map_cfg, sigma)
    if args.truth:
        truth = read_configuration(args.truth, sbm=spec.variant.is_sbm)
        raw, up = misclassification(map_cfg, truth, sigma)
        payload["misclassified_raw"] = raw
        payload["misclassified_up_to_equivalence"] = up
    text = json.dumps(payload, indent=2) + "\n"
    _emit(args, "map.json", text, _run_config(args))
    return 0


def _cmd_kl(args) -> int:
    spec = load_spec(args.spec)
    fam = spec.family
    eff = spec.pi.effective()
    rows = []
    for q in range(spec.Q):
        for l in range(spec.L):
            for q2 in range(spec.Q):
                for l2 in range(spec.L):
                    if (q, l) == (q2, l2):
                        continue
                    d = float(fam.kl(eff[q, l], eff[q2, l2]))
                    rows.append([q + 1, l + 1, q2 + 1, l2 + 1, d])
    consts = {
        "kappa_min": kappa_min(spec.pi),
        "kappa_max": kappa_max(fam),
        "L0": lipschitz_L0(fam),
    }
    if args.format == "json":
        payload = {
            "pairs": [
                {"q": r[0], "l": r[1], "q_prime": r[2], "l_prime": r[3], "divergence": r[4]}
                for r in rows
            ],
            **consts,
        }
        text = json.dumps(payload, indent=2) + "\n"
        _emit(args, "kl.json", text, _run_config(args))
    else:
        text = write_csv(None, ["q", "l", "q_prime", "l_prime", "divergence"], rows)
        text += "# " + json.dumps(consts) + "\n"
        _emit(args, "kl.csv", text, _run_config(args))
    return 0


def _cmd_rate(args) -> int:
    fam = _family_arg(args.family)
    mu = args.mu_min
    rf = rate_function(fam, mu, args.variant)
    oracle = exact_chernoff_rate(fam, mu)
    rows = []
    for xv in _float_grid(args.x_grid):
        rows.append([xv, float(rf(xv)), float(oracle(xv))])
    text = write_csv(None, ["x", "psi_star", "exact_chernoff"], rows)
    _emit(args, "rate.csv", text, _run_config(args))
    return 0


def _cmd_bounds(args) -> int:
    spec = load_spec(args.spec)
    report = theorem_constants(spec, args.eta)
    rows = []
    for n in _grid_spec(args.n_grid):
        if spec.variant.is_sbm or args.m_rule == "n":
            m = n
        else:
            m = max(1, math.ceil(n / math.log(max(n, 3))))
        rows.append(
            [
                n,
                m,
                report.c,
                report.C,
                report.K,
                report.a_nm(n, m),
                report.b_nm(n, m),
                report.eps_nm(n, m),
            ]
        )
    text = write_csv(None, ["n", "m", "c", "C", "K", "a_nm", "b_nm", "eps_nm"], rows)
    _emit(args, "bounds.csv", text, _run_config(args))
    return 0


def _cmd_verify_lemma_diff(args) -> int:
    spec = load_spec(args.spec)
    if args.Q is not None and args.Q != spec.Q:
        raise _UsageError(f"spec has Q={spec.Q}, not {args.Q}")
    if args.L is not None and args.L != spec.L:
        raise _UsageError(f"spec has L={spec.L}, not {args.L}")
    n, m = args.n, args.m if args.m is not None else args.n
    sigma = detect_symmetry_group(spec.pi, spec.variant)
    from .posterior import enumerate_label_vectors

    total = spec.Q**n if spec.variant.is_sbm else spec.Q**n * spec.L**m
    if total * total > args.pair_cap:
        raise CapExceededError(f"{total * total} pairs exceed the cap {args.pair_cap}")
    z_all = enumerate_label_vectors(spec.Q, n)
    w_all = None if spec.variant.is_sbm else enumerate_label_vectors(spec.L, m)
    refs = []
    for zi in range(z_all.shape[0]):
        if spec.variant.is_sbm:
            cfg = Configuration(z_all[zi])
            if in_good_set(cfg, spec):
                refs.append(cfg)
        else:
            for wi in range(w_all.shape[0]):
                cfg = Configuration(z_all[zi], w_all[wi])
                if in_good_set(cfg, spec):
                    refs.append(cfg)
    others = []
    for zi in range(z_all.shape[0]):
        if spec.variant.is_sbm:
            others.append(Configuration(z_all[zi]))
        else:
            for wi in range(w_all.shape[0]):
                others.append(Configuration(z_all[zi], w_all[wi]))
    from .symmetry import config_distance

    rows = []
    for ref in refs:
        for other in others:
            holds, lhs, rhs = check_bound_number(
                ref, other, spec.pi, sigma, spec.mu_min, spec.variant
            )
            _, _, r1, r2 = config_distance(other, ref, sigma)
            rows.append([r1, r2, lhs, rhs, holds])
    text = write_csv(None, ["r1", "r2", "lhs", "rhs", "holds"], rows)
    _emit(args, "lemma_diff.csv", text, _run_config(args))
    return 0 if all(r[4] for r in rows) else 2


def _cmd_verify_prop1(args) -> int:
    spec = load_spec(args.spec)
    n, m = args.n, args.m if args.m is not None else args.n
    rep = run_exhaustive_checks(
        spec,
        n,
        m,
        eta=args.eta,
        n_perturbations=args.perturbations,
        master_seed=_resolve_seed(args),
    )
    payload = {
        "n": rep.n,
        "m": rep.m,
        "lemma_pairs": rep.lemma_pairs,
        "lemma_violations": rep.lemma_violations,
        "prop_pairs": rep.prop_pairs,
        "prop_lower_violations": rep.prop_lower_violations,
        "prop_upper_violations": rep.prop_upper_violations,
        "worst_lower_slack": rep.prop_worst_lower_slack,
        "worst_upper_slack": rep.prop_worst_upper_slack,
        "perturbations": rep.perturbations,
        "ok": rep.ok,
    }
    text = json.dumps(payload, indent=2) + "\n"
    _emit(args, "prop1.json", text, _run_config(args))
    return 0 if rep.ok else 2


def _cmd_verify_concentration(args) -> int:
    spec = load_spec(args.spec)
    seed = _resolve_seed(args)
    n = args.n
    m = args.m if args.m is not None else n
    rng = make_rng(derive_seed(seed, 99))
    truth = None
    for _ in range(1000):
        cand = sample_configuration(spec, n, m, rng.integers(0, 2**62))
        if in_good_set(cand, spec):
            truth = cand
            break
    if truth is None:
        raise TheoryPreconditionError("could not sample a well-balanced configuration")
    pairs = []
    for r in (1, max(2, n // 2)):
        pairs.append(
            (
                truth,
                sample_config_at_distance(truth, r, spec.Q, spec.L, spec.variant.is_sbm, rng),
            )
        )
    rows = run_concentration_check(
        spec, pairs, _float_grid(args.eps_grid), args.replicates, seed
    )
    cols = ["pair", "r1", "r2", "eps", "threshold", "hits", "replicates", "empirical", "bound", "vacuous", "ok"]
    text = write_csv(None, cols, [[row[c] for c in cols] for row in rows])
    _emit(args, "concentration.csv", text, _run_config(args, seed))
    return 0 if all(row["ok"] for row in rows) else 2


def _cmd_sweep(args) -> int:
    with open(args.plan) as fh:
        plan_dict = json.load(fh)
    if "spec_path" in plan_dict and "spec" not in plan_dict:
        plan_dict["spec"] = json.loads(Path(plan_dict.pop("spec_path")).read_text())
    plan = ExperimentPlan.from_dict(plan_dict)
    if args.kind == "convergence":
        result = run_convergence_sweep(plan)
    else:
        result = run_sparse_sweep(plan)
    if args.out == "-":
        sys.stdout.write(result.to_csv_text())
        return 0
    result.save(args.out)
    write_sidecar(Path(args.out) / "run.json", _run_config(args))
    return 0


# ----------------------------------------------------------------------
# parser


def build_parser() -> _Parser:
    p = _Parser(prog="blockpost", description=__doc__)
    p.add_argument(
        "--version",
        action="version",
        version=f"%(prog)s {__version__} (spec-schema {SCHEMA_VERSION})",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed; drawn and recorded if absent")
    common.add_argument("--out", default="-", help="output directory, or '-' for stdout")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--threads", type=int, default=None, help="worker bound; execution is schedule-independent")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", parents=[common], help="draw labels and data from a spec")
    sp.add_argument("--spec", required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--m", type=int, default=None)
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("posterior", parents=[common], help="exact posterior over all configurations")
    sp.add_argument("--spec", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--top", type=int, default=10)
    sp.add_argument("--theta-perturb", type=float, default=0.0)
    sp.add_argument("--perturb-seed", type=int, default=None)
    sp.add_argument("--cap", type=int, default=2**24)
    sp.set_defaults(func=_cmd_posterior)

    sp = sub.add_parser("map", parents=[common], help="posterior mode and misclassification")
    sp.add_argument("--spec", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--truth", default=None)
    sp.add_argument("--cap", type=int, default=2**24)
    sp.set_defaults(func=_cmd_map)

    sp = sub.add_parser("kl", parents=[common], help="pairwise divergences of connectivity entries")
    sp.add_argument("--spec", required=True)
    sp.set_defaults(func=_cmd_kl)

    sp = sub.add_parser("rate", parents=[common], help="rate function against the exact envelope")
    sp.add_argument("--family", required=True, help="family JSON (inline or file path)")
    sp.add_argument("--mu-min", type=float, required=True)
    sp.add_argument("--x-grid", required=True, help="a:b:step or comma list")
    sp.add_argument("--variant", default=None)
    sp.set_defaults(func=_cmd_rate)

    sp = sub.add_parser("bounds", parents=[common], help="finite-size bound sequences")
    sp.add_argument("--spec", required=True)
    sp.add_argument("--eta", type=float, required=True)
    sp.add_argument("--n-grid", required=True)
    sp.add_argument("--m-rule", choices=("n", "n_over_log_n"), default="n")
    sp.set_defaults(func=_cmd_bounds)

    vp = sub.add_parser("verify", help="exhaustive and Monte Carlo checks")
    vsub = vp.add_subparsers(dest="check", required=True)

    sp = vsub.add_parser("lemma-diff", parents=[common])
    sp.add_argument("--spec", required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--m", type=int, default=None)
    sp.add_argument("--Q", type=int, default=None)
    sp.add_argument("--L", type=int, default=None)
    sp.add_argument("--pair-cap", type=int, default=1_000_000)
    sp.set_defaults(func=_cmd_verify_lemma_diff)

    sp = vsub.add_parser("prop1", parents=[common])
    sp.add_argument("--spec", required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--m", type=int, default=None)
    sp.add_argument("--eta", type=float, default=0.0)
    sp.add_argument("--perturbations", type=int, default=0)
    sp.set_defaults(func=_cmd_verify_prop1)

    sp = vsub.add_parser("concentration", parents=[common])
    sp.add_argument("--spec", required=True)
    sp.add_argument("--n", type=int, default=12)
    sp.add_argument("--m", type=int, default=None)
    sp.add_argument("--eps-grid", default="0.5,1.0,2.0,5.0")
    sp.add_argument("--replicates", type=int, default=10000)
    sp.set_defaults(func=_cmd_verify_concentration)

    sp = sub.add_parser("sweep", parents=[common], help="Monte Carlo sweeps from a plan file")
    sp.add_argument("kind", choices=("convergence", "sparse"))
    sp.add_argument("--plan", required=True)
    sp.set_defaults(func=_cmd_sweep)

    return p


def _error_json(kind: str, message: str) -> str:
    return json.dumps({"error": kind, "message": message})


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(_error_json("usage", str(exc)), file=sys.stderr)
        return 1
    except TheoryPreconditionError as exc:
        print(_error_json("theory-precondition", str(exc)), file=sys.stderr)
        return 2
    except CapExceededError as exc:
        print(_error_json("resource-cap", str(exc)), file=sys.stderr)
        return 3
    except (SpecError, FileNotFoundError, json.JSONDecodeError, ValueError) as exc:
        print(_error_json("input", str(exc)), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
