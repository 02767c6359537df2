"""Command line interface: ``haarfactor <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bounds
from .diagonalize import DiagonalizationParams, choose_m, residual_check, search
from .errors import HaarFactorError
from .operators import (FactorizationCertificate, HaarMultiplier, OperatorMatrix, compose,
                        op_norm_exact_l2, op_norm_lower, op_norm_upper, operator_from_json,
                        random_operator)
from .reduce_positive import ntilde_min, reduce
from .runner import ConfigError, ScenarioConfig, assertions_pass, bundled_scenario, run
from .spaces import HaarVector, MonteCarlo, SpaceSpec, hshs_norm
from .stabilize import StabilizationParams, factorize, ntilde


class CliError(HaarFactorError):
    pass


def _emit(obj, out=None):
    text = json.dumps(obj, indent=2, default=str)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise CliError(f"no such file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON: {exc}") from exc


def _operator(args, ambient, mode="none", delta=0.0) -> OperatorMatrix:
    if args.operator:
        return operator_from_json(_load_json(args.operator))
    if ambient is None:
        raise CliError("pass --operator or the ambient level to generate one")
    if args.seed is None:
        raise CliError("--seed is required to generate a random operator")
    return random_operator(ambient, args.gamma, delta, mode, seed=args.seed)


# -- subcommands -------------------------------------------------------------

def cmd_nmin(args):
    out = {
        "eta": str(bounds.eta_from_epsilon(args.epsilon)),
        "nmin": bounds.nmin(args.gamma, args.delta, args.epsilon, args.n),
        "ntilde_stabilization": ntilde(args.n, args.gamma, args.delta,
                                       bounds.eta_from_epsilon(args.epsilon), args.K),
        "corollary_ntilde": bounds.corollary_ntilde(args.gamma, args.delta, args.epsilon,
                                                    args.n, args.K),
    }
    if args.K is not None:
        out["nmin_unconditional"] = bounds.nmin_unconditional(args.gamma, args.delta,
                                                              args.epsilon, args.n, args.K)
    if args.N is not None:
        out["ntilde_min"] = ntilde_min(args.N, args.epsilon)
    if args.desk_ntilde is not None:
        out["desk"] = {"ntilde": args.desk_ntilde, "m": args.desk_m}
    _emit({k: (str(v) if isinstance(v, int) and v.bit_length() > 53 else v)
           for k, v in out.items()})
    return 0


def cmd_gen_operator(args):
    T = random_operator(args.N, args.gamma, args.delta, args.mode, seed=args.seed,
                        spec=SpaceSpec.parse(args.spec), noise=args.noise)
    _emit(T.to_json(), args.out)
    return 0


def cmd_norm(args):
    spec = SpaceSpec.parse(args.spec)
    data = _load_json(args.input)
    if "coeffs" in data:
        x = HaarVector.from_json(data)
        method = "exact" if args.samples is None else MonteCarlo(args.samples, args.seed)
        val = hshs_norm(x, spec, method)
        out = {"kind": "vector", "spec": str(spec)}
        out.update({"value": val} if isinstance(val, float)
                   else {"value": val.value, "stderr": val.stderr})
    else:
        T = operator_from_json(data)
        lower, witness = op_norm_lower(T, spec, budget=args.budget, seed=args.seed,
                                        refine=args.refine)
        out = {"kind": "operator", "spec": str(spec), "lower_bound": lower,
               "upper_bound": op_norm_upper(T, spec), "witness": witness.to_json()}
        if spec.is_hilbert:
            out["exact"] = op_norm_exact_l2(T)
    _emit(out, args.out)
    return 0


def cmd_diagonalize(args):
    T = _operator(args, args.N)
    m = args.m if args.m is not None else choose_m(args.n, args.gamma, args.delta, args.eta)
    params = DiagonalizationParams(n=args.n, gamma=args.gamma, delta=args.delta, eta=args.eta,
                                   m=m, threshold_off=args.threshold,
                                   threshold_diag=args.threshold, max_tries=args.max_tries,
                                   seed=args.seed)
    res = search(T, params)
    out = res.to_json()
    out["paper_m"] = choose_m(args.n, args.gamma, args.delta, args.eta)
    if res.success:
        chk = residual_check(T, res, seed=args.seed)
        out["residual_lower_bound"] = chk.measured_lower_bound
        out["residual_check_passed"] = chk.passed
    _emit(out, args.out)
    return 0 if res.success else 1


def cmd_factorize(args):
    spec = SpaceSpec.parse(args.spec)
    mode = "positive" if args.mode == "positive" else "none"
    T = _operator(args, args.N, mode=mode, delta=args.delta if mode == "positive" else 0.0)
    params = StabilizationParams(
        n=args.n, gamma=args.gamma, delta=args.delta, epsilon=args.epsilon, eta=args.eta,
        ntilde=args.ntilde, m=args.m, threshold_off=args.threshold, threshold_diag=args.threshold,
        width=args.width, max_tries=args.max_tries, seed=args.seed, spec=spec)
    cert = factorize(T, params, "positive_diagonal" if args.mode == "positive" else "identity_split")
    _emit(cert.to_json(), args.certificate_out)
    if args.certificate_out:
        _emit({"residual": cert.residual, "constant_bound": cert.constant_bound,
               "target": cert.target})
    return 0 if cert.residual <= 1e-8 else 1


def cmd_reduce_positive(args):
    T = _operator(args, args.Ntilde, mode="signed", delta=args.delta)
    if args.unconditional:
        signs = np.sign(np.diag(T.matrix))
        Tpos = compose(HaarMultiplier(T.ambient, signs).as_operator(), T)
        _emit({"Tpos": Tpos.to_json(), "constant": "K"}, args.out)
        return 0
    red = reduce(T, args.N, args.delta, args.epsilon, override=args.override)
    _emit({
        "sigma": red.sigma, "s": red.s, "l": red.l, "a_bound": red.a_bound,
        "override": red.override, "measure_inequality_holds": red.eq_measure_holds,
        "generation_measures": red.measures,
        "system": red.system.to_json(), "A": red.A.to_json(), "B": red.B.to_json(),
        "Tpos": red.Tpos.to_json(),
    }, args.out)
    return 0


def cmd_run(args):
    path = bundled_scenario(args.scenario) if args.scenario else args.config
    if path is None:
        raise CliError("pass a config path or --scenario NAME")
    if not Path(path).exists():
        raise CliError(f"no such config: {path}")
    config = ScenarioConfig.load(path)
    if args.seed is not None:
        config.seeds = [args.seed]
    report = run(config)
    if args.out:
        _emit(report.to_json(), args.out)
    if args.csv:
        Path(args.csv).write_text(report.to_csv())
    passed = assertions_pass(config, report)
    _emit({"name": config.name, "success_rate": report.success_rate,
           "max_residual": report.max_residual, "assertions_passed": passed,
           "paper_sizes": report.paper_sizes})
    return 0 if passed else 1


def cmd_verify_certificate(args):
    cert = FactorizationCertificate.from_json(_load_json(args.certificate))
    T = operator_from_json(_load_json(args.operator))
    residual = cert.measure_residual(T)
    ok = residual <= args.tol
    _emit({"residual": residual, "recorded_residual": cert.residual, "target": cert.target,
           "passed": ok})
    return 0 if ok else 1


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="haarfactor",
                                description="Factor the identity through operators on Haar spans.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed_required=False):
        sp.add_argument("--gamma", type=float, default=1.0)
        sp.add_argument("--delta", type=float, default=0.5)
        sp.add_argument("--seed", type=int, required=seed_required)

    s = sub.add_parser("nmin", help="paper-mandated sizes (exact integers)")
    s.add_argument("--gamma", type=float, default=1.0)
    s.add_argument("--delta", type=float, default=1.0)
    s.add_argument("--epsilon", type=float, default=1.0)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--K", type=float)
    s.add_argument("--N", type=int, help="also report ntilde_min(N, epsilon)")
    s.add_argument("--desk-ntilde", type=int)
    s.add_argument("--desk-m", type=int)
    s.set_defaults(func=cmd_nmin)

    s = sub.add_parser("gen-operator", help="seeded random operator with certified norm")
    common(s, seed_required=True)
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--mode", choices=["positive", "signed", "none"], default="positive")
    s.add_argument("--spec", default="2,constant")
    s.add_argument("--noise", type=float, default=0.5)
    s.add_argument("--out")
    s.set_defaults(func=cmd_gen_operator)

    s = sub.add_parser("norm", help="norm of a vector or bounds for an operator")
    s.add_argument("input")
    s.add_argument("--spec", default="2,constant")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--samples", type=int, help="Monte Carlo samples (vectors only)")
    s.add_argument("--budget", type=int, default=50)
    s.add_argument("--refine", type=int, default=1,
                   help="starts improved by coordinate search (cost grows with dim**2)")
    s.add_argument("--out")
    s.set_defaults(func=cmd_norm)

    s = sub.add_parser("diagonalize", help="random faithful diagonalization")
    common(s, seed_required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--m", type=int)
    s.add_argument("--N", type=int)
    s.add_argument("--eta", type=float, default=0.1)
    s.add_argument("--threshold", type=float)
    s.add_argument("--max-tries", type=int, default=50)
    s.add_argument("--operator")
    s.add_argument("--out")
    s.set_defaults(func=cmd_diagonalize)

    s = sub.add_parser("factorize", help="factor I_{Y_n} through T or I - T")
    common(s, seed_required=True)
    s.add_argument("--mode", choices=["positive", "split"], default="positive")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--N", type=int)
    s.add_argument("--ntilde", type=int)
    s.add_argument("--m", type=int)
    s.add_argument("--eta", type=float)
    s.add_argument("--epsilon", type=float, default=1.0)
    s.add_argument("--threshold", type=float)
    s.add_argument("--width", type=float)
    s.add_argument("--max-tries", type=int, default=50)
    s.add_argument("--spec", default="2,constant")
    s.add_argument("--operator")
    s.add_argument("--certificate-out")
    s.set_defaults(func=cmd_factorize)

    s = sub.add_parser("reduce-positive", help="reduce a signed large diagonal to a positive one")
    common(s)
    s.add_argument("--Ntilde", type=int)
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--epsilon", type=float, default=1.0)
    s.add_argument("--override", action="store_true")
    s.add_argument("--unconditional", action="store_true",
                   help="compose with the +-1 sign multiplier instead")
    s.add_argument("--operator")
    s.add_argument("--out")
    s.set_defaults(func=cmd_reduce_positive)

    s = sub.add_parser("run", help="run a scenario config")
    s.add_argument("config", nargs="?")
    s.add_argument("--scenario", help="bundled scenario name, e.g. smoke")
    s.add_argument("--seed", type=int, help="run a single seed instead of the config's list")
    s.add_argument("--out")
    s.add_argument("--csv")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("verify-certificate", help="recompute a certificate residual")
    s.add_argument("--certificate", required=True)
    s.add_argument("--operator", required=True)
    s.add_argument("--tol", type=float, default=1e-8)
    s.set_defaults(func=cmd_verify_certificate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (HaarFactorError, ConfigError, ValueError, KeyError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
