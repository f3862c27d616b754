"""Command-line entry point: ``verify``, ``sample``, ``couple``, ``bias``.

Every run echoes its fully resolved configuration as ``#``-prefixed header
lines of the output CSV and formats floats with 17 significant digits, so
rerunning with identical flags and seed reproduces byte-identical files.
Exit codes: 0 success, 1 validation/usage failure, 2 numerical abort.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import harmonic, metrics
from .coupling import couple_run, fit_rate
from .potential import MODEL_NAMES, PhaseState, model_by_name, validate_step
from .samplers import NumericalAbort, Scheme, SchemeConfig, run_chain

SEED_ENV_VAR = "HLMC_SEED"


class _Parser(argparse.ArgumentParser):
    """argparse variant whose usage errors exit 1 instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _write_csv(path: str | None, meta: dict, columns: list[str], rows) -> None:
    lines = [f"# {key} = {_fmt(val)}" for key, val in meta.items()]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    text = "\n".join(lines) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV_VAR)
    return int(env) if env else 0


def _parse_floats(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _parse_state(text: str, d: int) -> PhaseState:
    vals = _parse_floats(text)
    if len(vals) != 2 * d:
        raise ValueError(f"state needs {2 * d} comma-separated numbers, got {len(vals)}")
    return PhaseState(np.array(vals[:d]), np.array(vals[d:]))


def _warn_validity(model, gamma: float, h: float, scheme: str) -> None:
    if scheme not in ("pg", "pgp"):
        return
    report = validate_step(model, gamma, h, scheme)
    if not report.passed:
        failing = [c.name for c in report.conditions if not c.satisfied]
        sys.stderr.write(
            f"warning: step conditions not satisfied for {scheme}: "
            f"{'; '.join(failing)} (binding: {report.binding}, h_max={report.h_max:g}); "
            "continuing anyway\n")
    for note in report.notes:
        sys.stderr.write(f"note: {note}\n")


# ---------------------------------------------------------------------------
# subcommands

def _cmd_verify(args) -> int:
    rows = harmonic.verification_grid()
    worst_drift = max(r.dev_drift for r in rows)
    worst_cov = max(r.dev_cov for r in rows)
    meta = {
        "subcommand": "verify",
        "tol_drift": harmonic.DEV_TOL_DRIFT,
        "tol_cov": harmonic.DEV_TOL_COV,
        "max_dev_drift": worst_drift,
        "max_dev_cov": worst_cov,
    }
    _write_csv(args.out, meta,
               ["k", "gamma", "h", "regime", "dev_drift", "dev_cov", "dev_direct"],
               [(r.k, r.gamma, r.h, r.regime, r.dev_drift, r.dev_cov, r.dev_direct)
                for r in rows])
    ok = worst_drift <= harmonic.DEV_TOL_DRIFT and worst_cov <= harmonic.DEV_TOL_COV
    sys.stderr.write(f"verify: max drift dev {worst_drift:.3e}, "
                     f"max covariance dev {worst_cov:.3e} -> {'ok' if ok else 'FAIL'}\n")
    return 0 if ok else 1


def _cmd_sample(args) -> int:
    model = model_by_name(args.model)
    seed = _resolve_seed(args)
    _warn_validity(model, args.gamma, args.h, args.scheme)
    config = SchemeConfig(scheme=Scheme(args.scheme), gamma=args.gamma, h=args.h, seed=seed)
    init = _parse_state(args.init, model.d)
    out = run_chain(model, config, init, args.steps, thin=args.thin)
    meta = {
        "subcommand": "sample", "model": model.name, "scheme": config.scheme.value,
        "gamma": args.gamma, "h": args.h, "steps": args.steps, "thin": args.thin,
        "seed": seed, "init": args.init, "d": model.d,
    }
    columns = ["step"] + [f"x_{j + 1}" for j in range(model.d)] \
        + [f"v_{j + 1}" for j in range(model.d)]
    rows = ((int(out.steps[i]), *out.xs[i], *out.vs[i]) for i in range(out.steps.size))
    _write_csv(args.out, meta, columns, rows)
    return 0


def _cmd_couple(args) -> int:
    model = model_by_name(args.model)
    seed = _resolve_seed(args)
    schemes = [s.strip().lower() for s in args.schemes.split(",") if s.strip()]
    init_a = _parse_state(args.init_a, model.d)
    init_b = _parse_state(args.init_b, model.d)
    results = []
    for scheme in schemes:
        _warn_validity(model, args.gamma, args.h, scheme)
        config = SchemeConfig(scheme=Scheme(scheme), gamma=args.gamma, h=args.h, seed=seed)
        results.append(couple_run(model, config, init_a, init_b, args.steps, args.replicas))
    meta = {
        "subcommand": "couple", "model": model.name, "schemes": ",".join(schemes),
        "gamma": args.gamma, "h": args.h, "steps": args.steps,
        "replicas": args.replicas, "seed": seed,
        "init_a": args.init_a, "init_b": args.init_b,
    }

    def rows():
        for res in results:
            for i in range(res.steps.size):
                yield (res.scheme, int(res.steps[i]), res.times[i], res.mean_rho[i],
                       res.se_rho[i], res.mean_euclid[i], res.se_euclid[i])

    _write_csv(args.out, meta,
               ["scheme", "step", "time", "mean_rho", "se_rho", "mean_euclid", "se_euclid"],
               rows())
    for res in results:
        try:
            fit = fit_rate(res.times, res.mean_rho)
            sys.stderr.write(f"couple[{res.scheme}]: rho-rate {fit.rate:.4f} "
                             f"(r^2={fit.r_squared:.4f}, {fit.n_points} pts)\n")
        except ValueError as exc:
            sys.stderr.write(f"couple[{res.scheme}]: rate fit unavailable ({exc})\n")
    return 0


def _cmd_bias(args) -> int:
    model = model_by_name(args.model)
    seed = _resolve_seed(args)
    schemes = [s.strip().lower() for s in args.schemes.split(",") if s.strip()]
    h_list = _parse_floats(args.h_list)
    for scheme in schemes:
        for h in h_list:
            _warn_validity(model, args.gamma, h, scheme)
    result = metrics.bias_sweep(model, schemes, args.gamma, h_list, args.steps,
                                seed, estimator=args.estimator,
                                replicas=args.replicas)
    meta = {
        "subcommand": "bias", "model": model.name, "schemes": ",".join(schemes),
        "gamma": args.gamma, "h_list": args.h_list, "steps": args.steps,
        "seed": seed, "estimator": args.estimator, "replicas": args.replicas,
    }
    _write_csv(args.out, meta,
               ["h", "scheme", "moment", "estimate", "reference", "abs_bias", "se", "used"],
               [(r.h, r.scheme, r.moment, r.estimate, r.reference, r.abs_bias,
                 r.se, r.used) for r in result.rows])
    for (scheme, moment), fit in sorted(result.fits.items()):
        if moment not in ("x1^2", result.meta["budget_moment"]):
            continue
        if fit.conclusive:
            sys.stdout.write(f"order[{scheme}, {moment}]: slope {fit.slope:.3f} "
                             f"+/- {fit.slope_se:.3f} ({fit.n_used} used points)\n")
        else:
            sys.stdout.write(f"order[{scheme}, {moment}]: inconclusive "
                             f"({fit.n_used} bias points exceed 5 SE)\n")
    return 0


# ---------------------------------------------------------------------------

def _apply_config(argv: list[str]) -> list[str]:
    """Expand ``--config FILE`` into leading flag defaults; explicit flags
    stay later in argv, so argparse's last-wins rule keeps them in force."""
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if not known.config:
        return argv
    explicit = {tok[2:].split("=", 1)[0] for tok in argv if tok.startswith("--")}
    injected: list[str] = []
    with open(known.config, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            flag = key.strip().replace("_", "-")
            if flag and flag not in explicit:
                injected.extend([f"--{flag}", value.strip()])
    for i, tok in enumerate(argv):
        if not tok.startswith("-"):
            return argv[: i + 1] + injected + argv[i + 1:]
    return argv + injected


def _build_parser() -> _Parser:
    parser = _Parser(prog="hlmc", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file with flag defaults (flags win)")
    common.add_argument("--seed", type=int, default=None,
                        help=f"RNG seed (default: ${SEED_ENV_VAR} or 0)")
    common.add_argument("--out", default=None, help="output CSV path ('-' = stdout)")

    p = sub.add_parser("verify", parents=[common],
                       help="oracle-deviation table for the integrator coefficients")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("sample", parents=[common], help="run one chain, store samples")
    p.add_argument("--model", required=True, choices=MODEL_NAMES)
    p.add_argument("--scheme", required=True, choices=[s.value for s in Scheme])
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--init", default=None, help="x_1,..,x_d,v_1,..,v_d (default zeros)")
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("couple", parents=[common],
                       help="synchronous-coupling contraction experiment")
    p.add_argument("--model", required=True, choices=MODEL_NAMES)
    p.add_argument("--schemes", required=True, help="comma list, e.g. pgp,obabo")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--replicas", type=int, default=200)
    p.add_argument("--init-a", required=True, help="x_1,..,x_d,v_1,..,v_d")
    p.add_argument("--init-b", required=True, help="x_1,..,x_d,v_1,..,v_d")
    p.set_defaults(func=_cmd_couple)

    p = sub.add_parser("bias", parents=[common], help="invariant-bias step-size sweep")
    p.add_argument("--model", required=True, choices=MODEL_NAMES)
    p.add_argument("--schemes", required=True, help="comma list, e.g. pg,pgp")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--h-list", "--h", dest="h_list", required=True,
                   help="comma list of step sizes")
    p.add_argument("--steps", type=int, default=800_000_000,
                   help="cap on post-burn-in replica-steps per (scheme, h) cell")
    p.add_argument("--replicas", type=int, default=1024)
    p.add_argument("--estimator", choices=["coupled", "plain"], default="coupled")
    p.set_defaults(func=_cmd_bias)
    return parser


_NUMERIC_LIST = frozenset("0123456789.,+-eE")


def _merge_numeric_values(argv: list[str]) -> list[str]:
    """Turn ``--flag -1,-1`` into ``--flag=-1,-1`` so argparse does not
    mistake negative numeric lists for option names."""
    out: list[str] = []
    skip = False
    for i, tok in enumerate(argv):
        if skip:
            skip = False
            continue
        nxt = argv[i + 1] if i + 1 < len(argv) else None
        if (tok.startswith("--") and "=" not in tok and nxt is not None
                and nxt.startswith("-") and len(nxt) > 1
                and (nxt[1].isdigit() or nxt[1] == ".") and set(nxt) <= _NUMERIC_LIST):
            out.append(f"{tok}={nxt}")
            skip = True
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(_apply_config(_merge_numeric_values(argv)))
        if args.subcommand == "sample" and args.init is None:
            model = model_by_name(args.model)
            args.init = ",".join(["0"] * (2 * model.d))
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except NumericalAbort as exc:
        sys.stderr.write(f"hlmc: numerical abort: {exc}\n")
        return 2
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"hlmc: error: {exc}\n")
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
