"""Command line front end: ``twistkac <subcommand> [options]``.

Every run prints (or writes) a JSON document holding the resolved
configuration, a schema version and the result.  Floats carry 17
significant digits so outputs round-trip exactly.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import field as fld
from . import fock, nongaussian, oscillator, paths
from .twist import DivergenceError, PolyPotential, TwistSpec, is_singular

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_VERIFY_FAILED = 3


class ValidationError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ValidationError(message)


def _encode(obj):
    """JSON text with 17-significant-digit floats and complex numbers as [re, im]."""
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x) or math.isinf(x):
            return json.dumps(str(x))
        return format(x, ".17g")
    if isinstance(obj, (complex, np.complexfloating)):
        return _encode([obj.real, obj.imag])
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        items = sorted((str(k), v) for k, v in obj.items())
        return "{" + ", ".join(f"{json.dumps(k)}: {_encode(v)}" for k, v in items) + "}"
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    if hasattr(obj, "to_dict"):
        return _encode(obj.to_dict())
    raise TypeError(f"cannot encode {type(obj).__name__}")


def _floats(text: str) -> list[float]:
    return [float(x) for x in str(text).replace(",", " ").split()]


def _add_spec(p):
    p.add_argument("--m", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--omega", type=str, help="comma separated weights")


def _add_mc(p):
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--T", type=int)


DEFAULTS = {
    "m": 1.0, "beta": 1.0, "theta": 0.0, "omega": "1", "samples": 20000, "seed": 0, "T": 256,
    "n_cut": 20, "lambda": 1.0, "xi": 0.0, "eps": 0.0, "N": 16, "k_cut": 4.0,
    "periods": str(2 * math.pi), "tau": "0", "chi": "gaussian", "points": 16, "E_max": 100.0,
    "masses": "0.1,0.01,0.001", "conj_times": "", "plain_times": "",
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="twistkac", description="Twisted oscillator and field toolkit")
    parser.add_argument("--config", type=str, help="JSON file with default parameters")
    parser.add_argument("--output", type=str, help="write JSON here instead of stdout")
    # the same two options are accepted after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=argparse.SUPPRESS)
    common.add_argument("--output", type=str, default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("exact", parents=[common], help="closed-form oscillator quantities")
    _add_spec(p)
    p.add_argument("--op", choices=["partition", "kernel", "kernel-extended", "spectrum-bound",
                                    "mass-renormalized", "zero-mass", "equal-time"], default="partition")
    p.add_argument("--xi", type=float)
    p.add_argument("--xi-im", type=float, dest="xi_im")
    p.add_argument("--eps", type=float)

    p = sub.add_parser("sample", parents=[common], help="Gaussian path sampling and moments")
    _add_spec(p)
    _add_mc(p)
    p.add_argument("--op", choices=["path", "moment"], default="moment")
    p.add_argument("--conj-times", dest="conj_times", type=str)
    p.add_argument("--plain-times", dest="plain_times", type=str)

    p = sub.add_parser("oracle", parents=[common], help="truncated Fock-space traces")
    _add_spec(p)
    p.add_argument("--n-cut", dest="n_cut", type=int)
    p.add_argument("--potential", type=str)
    p.add_argument("--lambda", dest="lambda", type=float)
    p.add_argument("--op", choices=["trace", "ratio", "expectation", "trotter"], default="trace")
    p.add_argument("--N", type=int)
    p.add_argument("--conj-times", dest="conj_times", type=str)
    p.add_argument("--plain-times", dest="plain_times", type=str)

    p = sub.add_parser("mc", parents=[common], help="reweighted Monte Carlo")
    _add_spec(p)
    _add_mc(p)
    p.add_argument("--potential", type=str)
    p.add_argument("--lambda", dest="lambda", type=float)
    p.add_argument("--op", choices=["partition", "expectation"], default="partition")
    p.add_argument("--conj-times", dest="conj_times", type=str)
    p.add_argument("--plain-times", dest="plain_times", type=str)

    p = sub.add_parser("field", parents=[common], help="free fields on the torus")
    _add_spec(p)
    p.add_argument("--periods", type=str)
    p.add_argument("--tau", type=str)
    p.add_argument("--k-cut", dest="k_cut", type=float)
    p.add_argument("--real", action="store_true", default=None)
    p.add_argument("--chi", type=str)
    p.add_argument("--E-max", dest="E_max", type=float)
    p.add_argument("--op", choices=["partition", "spectrum", "sample", "mc"], default="partition")
    p.add_argument("--potential", type=str)
    p.add_argument("--lambda", dest="lambda", type=float)
    p.add_argument("--points", type=int)
    _add_mc(p)

    p = sub.add_parser("limits", parents=[common], help="zero-mass sweeps")
    _add_spec(p)
    _add_mc(p)
    p.add_argument("--masses", type=str)
    p.add_argument("--potential", type=str)
    p.add_argument("--lambda", dest="lambda", type=float)
    p.add_argument("--op", choices=["kernel", "mc"], default="kernel")
    p.add_argument("--xi", type=float)

    p = sub.add_parser("verify", parents=[common], help="run invariant checks")
    p.add_argument("--suite", choices=["oscillator", "paths", "fock", "field", "all"], default="all")
    _add_mc(p)
    return parser


def _resolve(args, parser) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            cfg.update(json.loads(Path(args.config).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config: {exc}")
    for key, val in vars(args).items():
        if key in ("config", "output") or val is None:
            continue
        cfg[key] = val
    cfg["command"] = args.command
    return cfg


def _spec(cfg) -> TwistSpec:
    try:
        return TwistSpec(float(cfg["m"]), float(cfg["beta"]), float(cfg["theta"]), tuple(_floats(cfg["omega"])))
    except ValueError as exc:
        raise ValidationError(str(exc))


def _potential(cfg, n: int) -> PolyPotential:
    path = cfg.get("potential")
    if not path:
        V = PolyPotential.modulus_power(n, 2)
    else:
        try:
            V = PolyPotential.from_json(Path(path).read_text())
        except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
            raise ValidationError(f"bad potential file: {exc}")
    lam = float(cfg.get("lambda", 1.0))
    return V if lam == 1.0 else V.scaled(lam)


def _request(cfg) -> paths.MomentRequest:
    return paths.MomentRequest(tuple(_floats(cfg.get("conj_times", ""))),
                               tuple(_floats(cfg.get("plain_times", ""))))


def cmd_exact(cfg):
    spec = _spec(cfg)
    op = cfg.get("op", "partition")
    if op == "partition":
        return oscillator.partition_function(spec)
    if op == "kernel":
        return complex(oscillator.pair_correlation(spec, float(cfg["xi"]), 0)) if spec.m > 0 \
            else complex(oscillator.zero_mass_kernel(spec, float(cfg["xi"])))
    if op == "kernel-extended":
        return complex(oscillator.pair_correlation_extended(spec, complex(cfg["xi"], cfg.get("xi_im") or 0.0)))
    if op == "spectrum-bound":
        return oscillator.spectrum_bound(spec)
    if op == "mass-renormalized":
        return oscillator.mass_renormalized_Z(spec, float(cfg["eps"]))
    if op == "zero-mass":
        return oscillator.zero_mass_covariance(spec)
    return oscillator.equal_time_constant(spec)


def cmd_sample(cfg):
    spec = _spec(cfg)
    if cfg.get("op") == "path":
        sample = paths.sample_path(spec, int(cfg["T"]), seed=int(cfg["seed"]))
        return {"t": sample.grid, "values": sample.values, "wrap_residual": sample.wrap_residual()}
    return paths.estimate_moment_mc(_request(cfg), spec, int(cfg["samples"]), int(cfg["seed"]), int(cfg["T"]))


def cmd_oracle(cfg):
    spec = _spec(cfg)
    op = cfg.get("op", "trace")
    n_cut = int(cfg["n_cut"])
    V = _potential(cfg, spec.n) if cfg.get("potential") or op in ("ratio", "trotter") else None
    if op == "trace":
        return fock.oracle_trace_report(spec, V, n_cut)
    rep = fock.build_fock(spec, n_cut)
    if op == "trotter":
        value = fock.trotter_trace(rep, V, spec.theta, spec.beta, int(cfg["N"]))
        return {"trace_re": value.real, "trace_im": value.imag, "n_cut": n_cut, "N": int(cfg["N"])}
    H = fock.assemble_hamiltonian(rep, V)
    if op == "ratio":
        value = fock.twisted_trace(rep, H, spec.theta, spec.beta) / fock.twisted_trace(rep, None, spec.theta,
                                                                                       spec.beta)
        return {"ratio_re": value.real, "ratio_im": value.imag, "n_cut": n_cut}
    value = fock.twisted_expectation(rep, H, _request(cfg), spec.theta, spec.beta)
    return {"value_re": value.real, "value_im": value.imag, "n_cut": n_cut}


def cmd_mc(cfg):
    spec = _spec(cfg)
    V = _potential(cfg, spec.n)
    T, samples, seed = int(cfg["T"]), int(cfg["samples"]), int(cfg["seed"])
    if cfg.get("op") == "expectation":
        return nongaussian.gibbs_expectation_mc(spec, V, _request(cfg), T, samples, seed)
    return nongaussian.relative_partition_mc(spec, V, T, samples, seed)


def _field_spec(cfg) -> fld.FieldSpec:
    try:
        return fld.FieldSpec(float(cfg["m"]), float(cfg["beta"]), float(cfg["theta"]),
                             tuple(_floats(cfg["periods"])), tuple(_floats(cfg["tau"])),
                             tuple(_floats(cfg["omega"])), float(cfg["k_cut"]), cfg.get("chi", "gaussian"),
                             bool(cfg.get("real") or False))
    except ValueError as exc:
        raise ValidationError(str(exc))


def cmd_field(cfg):
    spec = _field_spec(cfg)
    op = cfg.get("op", "partition")
    if op == "partition":
        return {"log_z": fld.log_field_partition_function(spec), "z": fld.field_partition_function(spec),
                "k_modes": len(fld.momentum_lattice(spec)), "tail_bound": fld.shell_tail_bound(spec)}
    if op == "spectrum":
        spectrum = fld.covariance_spectrum(spec, float(cfg["E_max"]))
        return {"max": spectrum[-1], "min": spectrum[0], "count": len(spectrum),
                "closed_form_max": fld.spectrum_max_closed_form(spec)}
    if op == "sample":
        sample = fld.sample_random_field(spec, seed=int(cfg["seed"]))
        return {"x": sample.x, "t": sample.t, "values": sample.values, "wrap_residual": sample.wrap_residual()}
    V = _potential(cfg, spec.n)
    return fld.field_relative_partition_mc(spec, V, None, int(cfg["points"]), int(cfg["T"]), int(cfg["samples"]),
                                           int(cfg["seed"]))


def cmd_limits(cfg):
    spec = _spec(cfg)
    masses = _floats(cfg["masses"])
    if cfg.get("op") == "mc":
        V = _potential(cfg, spec.n) if cfg.get("potential") else None
        return nongaussian.zero_mass_sweep(spec, V, masses, int(cfg["T"]), int(cfg["samples"]), int(cfg["seed"]))
    if is_singular(spec):
        raise DivergenceError("singular twist: zero-mass kernel diverges")
    xi = float(cfg["xi"])
    rows = [{"m": m, "kernel": complex(oscillator.pair_correlation(spec.replace(m=m), xi, 0)),
             "z": oscillator.partition_function(spec.replace(m=m))} for m in masses]
    return {"rows": rows, "limit_kernel": complex(oscillator.zero_mass_kernel(spec, xi)),
            "limit_z": oscillator.partition_function(spec.replace(m=0.0))}


def _verify_oscillator(cfg) -> list:
    spec = TwistSpec(1.0, 1.0, 1.0)
    checks = []
    rep = fock.build_fock(spec, 30)
    tr = fock.twisted_trace(rep, None, spec.theta, spec.beta)
    checks.append(("trace_vs_closed_form", abs(tr / oscillator.partition_function(spec) - 1) < 1e-8))
    xi = 0.37
    k = oscillator.pair_correlation(spec, xi, 0)
    f = oscillator.fourier_sum(spec, xi, 4096)
    o = fock.twisted_expectation(rep, None, fock.TimeOrderedRequest((("zbar", xi), ("z", 0.0))),
                                 spec.theta, spec.beta)
    checks.append(("kernel_three_way", max(abs(k - f), abs(k - o), abs(f - o)) < 1e-6))
    est = paths.estimate_moment_mc(paths.MomentRequest((xi,), (0.0,)), spec, int(cfg.get("samples") or 20000),
                                   int(cfg.get("seed") or 0), 256)
    checks.append(("kernel_mc", abs(est.estimate - k) < 3 * est.stderr + abs(paths.truncation_bias(spec, 256))))
    return checks


def _verify_paths(cfg) -> list:
    spec = TwistSpec(1.0, 1.0, 0.8)
    req = paths.MomentRequest((0.1, 0.6), (0.3, 0.9))
    rep = fock.build_fock(spec, 40)
    return [("wick_vs_oracle", abs(paths.wick_moment(req, spec) - fock.twisted_expectation(
        rep, None, req, spec.theta, spec.beta)) < 1e-8),
        ("wrap", paths.sample_path(spec, 64, seed=1).wrap_residual() < 1e-10)]


def _verify_fock(cfg) -> list:
    spec = TwistSpec(1.0, 1.0, 1.0)
    rep = fock.build_fock(spec, 30)
    out = []
    for S in fock.HOLONOMY_S:
        r = fock.holonomy_residual(rep, S, ["a-", "a-*"])
        out.append((f"holonomy_{S}", abs(r["residual"]) < 1e-8 * r["scale"]))
    return out


def _verify_field(cfg) -> list:
    spec = fld.FieldSpec(1.0, 1.0, 1.7, (2 * math.pi,), (0.3,), k_cut=4.0)
    z1 = fld.field_partition_function(spec)
    z2 = fld.mode_product_partition_function(spec)
    return [("factorization", abs(z1 / z2 - 1) < 1e-12),
            ("wrap", fld.sample_random_field(spec, seed=1).wrap_residual() < 1e-10)]


def cmd_verify(cfg):
    suites = {"oscillator": _verify_oscillator, "paths": _verify_paths, "fock": _verify_fock,
              "field": _verify_field}
    chosen = list(suites) if cfg.get("suite", "all") == "all" else [cfg["suite"]]
    results = {}
    for name in chosen:
        for check, ok in suites[name](cfg):
            results[f"{name}.{check}"] = bool(ok)
    return {"checks": results, "passed": all(results.values())}


COMMANDS = {"exact": cmd_exact, "sample": cmd_sample, "oracle": cmd_oracle, "mc": cmd_mc,
            "field": cmd_field, "limits": cmd_limits, "verify": cmd_verify}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _resolve(args, parser)
        result = COMMANDS[args.command](cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (ValueError, DivergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    doc = {"schema_version": SCHEMA_VERSION, "config": cfg, "result": result}
    text = _encode(doc) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    if args.command == "verify" and not result["passed"]:
        return EXIT_VERIFY_FAILED
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
