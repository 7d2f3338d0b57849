"""The ``fano`` command.

Exit codes: 0 on success, 1 on a domain error (the error is printed as JSON
on stdout), 2 on a usage error.
"""

from __future__ import annotations

import argparse
import os
import re
import sys
from fractions import Fraction
from pathlib import Path

from . import jsonio
from .asymptotics import (
    SourceFamily,
    equivocation_trace,
    symbolwise_trace,
    trace_to_csv,
)
from .errors import FanoError
from .errprob import (
    SystemSpec,
    describe_y_card,
    feasible_range,
    list_map_error,
    parse_y_card,
    restricted_list_error,
)
from .extremal import endpoint_achievers, extremal_joint_type1, extremal_joint_type2, verify_extremal
from .fano import bound, fano_type1, fano_type2, ho_yeung_truncation
from .measures import JointDist, Measure
from .oracle import OracleConfig, brute_force_sup, exhaustive_small, tv_ball_min_entropy, tv_grid_slack

DEFAULT_SEED = 7


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _input(text: str) -> str:
    """A JSON file path, ``-`` for stdin, or inline JSON."""
    s = text.strip()
    if s == "-" or s.startswith(("[", "{")):
        return s
    if not Path(s).is_file():
        raise argparse.ArgumentTypeError(f"no such file: {text}")
    return s


def _read(source: str):
    if source == "-":
        return jsonio.loads(sys.stdin.read())
    return jsonio.read(source)


def _number(text: str) -> float:
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        try:
            return float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text}") from None


def _y_card(text: str):
    try:
        return parse_y_card(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad |Y|: {text} (use inf, N or finite:N)") from None


def _measure(text: str) -> Measure:
    try:
        return Measure.parse(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _index_range(text: str) -> list[int]:
    """``a..b`` (inclusive), ``a,b,c`` or a single integer."""
    m = re.fullmatch(r"\s*(\d+)\s*\.\.\s*(\d+)\s*", text)
    try:
        if m:
            a, b = int(m.group(1)), int(m.group(2))
            if a > b:
                raise ValueError
            return list(range(a, b + 1))
        out = [int(float(x)) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad index list: {text}") from None
    if any(n < 1 for n in out):
        raise argparse.ArgumentTypeError("indices must be at least 1")
    return out


def _schedule(text: str, allow=()):
    """A constant, ``c/n``, ``c^n`` / ``c**n``, or one of the names in ``allow``."""
    s = text.strip().replace("**", "^")
    if s in allow:
        return s
    m = re.fullmatch(r"([0-9.eE+-]+)\s*/\s*n", s)
    if m:
        c = float(m.group(1))
        return lambda n: c / n
    m = re.fullmatch(r"([0-9.eE+-]+)\s*\^\s*n", s)
    if m:
        c = float(m.group(1))
        return lambda n: c**n
    v = _number(s)
    return lambda n: v


def _seed_default() -> int:
    env = os.environ.get("FANO_SEED")
    if env is None or not env.strip():
        return DEFAULT_SEED
    try:
        return int(env)
    except ValueError:
        return DEFAULT_SEED


def _add_system(p: argparse.ArgumentParser) -> None:
    p.add_argument("--q", type=_input, required=True, help="marginal: JSON file or inline list")
    p.add_argument("-L", "--list-size", dest="L", type=int, required=True, help="list size")
    p.add_argument("--eps", type=_number, required=True, help="error budget")
    p.add_argument("--y", type=_y_card, default=None, help="|Y|: inf, N or finite:N (default inf)")
    p.add_argument("--renormalize", action="store_true", help="rescale masses that do not sum to one")


def _add_output(p: argparse.ArgumentParser, formats=("json",)) -> None:
    p.add_argument("--out", help="write output here instead of stdout")
    p.add_argument("--format", choices=formats, default=formats[0])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fano", description="Fano-type bounds for list decoding.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("bound", help="evaluate the Fano-type bound")
    _add_system(p)
    p.add_argument("--measure", type=_measure, default=Measure("shannon"))
    _add_output(p)

    p = sub.add_parser("extremal", help="build a joint that attains the bound")
    _add_system(p)
    p.add_argument(
        "--endpoint",
        choices=("upper", "lower"),
        help="instead build the joint attaining an end of the feasible error range",
    )
    _add_output(p)

    p = sub.add_parser("verify", help="certify that a joint attains the bound")
    p.add_argument("--joint", type=_input, required=True, help="joint JSON (as written by 'fano extremal')")
    p.add_argument("--q", type=_input, help="marginal (default: from the input or the joint)")
    p.add_argument("-L", "--list-size", dest="L", type=int)
    p.add_argument("--eps", type=_number)
    p.add_argument("--y", type=_y_card, default=argparse.SUPPRESS)
    p.add_argument("--measure", type=_measure)
    _add_output(p)

    p = sub.add_parser("oracle", help="numerical search for the extremal value")
    _add_system(p)
    p.add_argument("--measure", type=_measure, default=Measure("shannon"))
    p.add_argument("--method", choices=("search", "exhaustive", "tv-ball"), default="search")
    p.add_argument("--seed", type=int, default=None, help="default 7, or $FANO_SEED")
    p.add_argument("--restarts", type=int, default=OracleConfig.restarts)
    p.add_argument("--mesh", type=int, default=64, help="mesh divisions for --method exhaustive")
    p.add_argument("--delta", type=_number, help="ball radius for --method tv-ball")
    p.add_argument("--grid", type=int, default=OracleConfig.grid_resolution, help="grid resolution for tv-ball")
    _add_output(p)

    p = sub.add_parser("errprob", help="list-decoding error of a joint")
    p.add_argument("--joint", type=_input, required=True)
    p.add_argument("-L", "--list-size", dest="L", type=int, required=True)
    p.add_argument("--z", help="restrict guesses to these 0-based symbols, e.g. 0,2")
    _add_output(p)

    p = sub.add_parser("measure", help="evaluate a measure on a marginal or a joint")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--q", type=_input)
    src.add_argument("--joint", type=_input)
    p.add_argument("--measure", type=_measure, default=Measure("shannon"))
    p.add_argument("--renormalize", action="store_true")
    _add_output(p)

    p = sub.add_parser("asym", help="finite-n traces for source families")
    asub = p.add_subparsers(dest="family", metavar="FAMILY", parser_class=_Parser)
    asub.required = True

    a = asub.add_parser("poisson", help="Poisson sources with mean schedule")
    a.add_argument("--mean", default="10^n", help="mean schedule (default 10^n)")
    a.add_argument("--n", type=_index_range, default=_index_range("2..6"))
    a.add_argument("-L", "--list-size", dest="L", type=int, default=1)
    a.add_argument("--eps", default="1/n", help="error schedule: constant, c/n, or 'blind'")
    a.add_argument("--measure", type=_measure, default=Measure("shannon"))
    _add_output(a, ("csv", "json"))

    a = asub.add_parser("counterexample", help="uniform head with a slowly decaying geometric tail")
    a.add_argument("--gamma", type=_number, default=1.0)
    a.add_argument("-L", "--list-size", dest="L", type=int, default=2)
    a.add_argument("--delta", default="1/n", help="tail-mass schedule (default 1/n)")
    a.add_argument("--n", type=_index_range, default=_index_range("10,100,1000,10000"))
    a.add_argument("--eps", default="delta", help="error schedule: constant, c/n, 'delta' or 'blind'")
    a.add_argument("--measure", type=_measure, default=Measure("shannon"))
    _add_output(a, ("csv", "json"))

    a = asub.add_parser("symbolwise", help="per-position errors and bounds for a block of joints")
    g = a.add_mutually_exclusive_group(required=True)
    g.add_argument("--joints", type=_input, help="JSON list of joints")
    g.add_argument("--example5", type=int, metavar="N", help="N positions, uniform bit, Y independent")
    a.add_argument("-L", "--list-size", dest="L", type=int, default=2)
    a.add_argument("--reference", type=_input, help="common marginal for the averaged bound")
    _add_output(a)
    return parser


# --------------------------------------------------------------------------
# Command handlers: each returns a JSON-ready object or a string
# --------------------------------------------------------------------------


def _system(args) -> SystemSpec:
    q = jsonio.pmf_from_json(_read(args.q), args.renormalize)
    return SystemSpec(q, args.L, args.eps, args.y)


def _system_dict(sys_: SystemSpec) -> dict:
    return {"q": sys_.q.to_dict(), "L": sys_.L, "eps": sys_.eps, "y": describe_y_card(sys_.y_card)}


def _cmd_bound(args):
    sys_ = _system(args)
    out = bound(sys_, args.measure).to_dict()
    out["range"] = list(sys_.range)
    return out


def _cmd_extremal(args):
    sys_ = _system(args)
    if args.endpoint:
        upper, lower = endpoint_achievers(sys_.q, sys_.L, sys_.y_card)
        J = upper if args.endpoint == "upper" else lower
        eps = list_map_error(J, sys_.L)
        return {
            "system": {**_system_dict(sys_), "eps": eps},
            "endpoint": args.endpoint,
            "joint": J.to_dict(),
        }
    if sys_.y_card is None:
        P, idx = fano_type1(sys_.q, sys_.L, sys_.eps)
        J = extremal_joint_type1(sys_.q, sys_.L, sys_.eps)
    else:
        P, idx = fano_type2(sys_.q, sys_.L, sys_.eps, sys_.y_card)
        J = extremal_joint_type2(sys_.q, sys_.L, sys_.eps, sys_.y_card)
    return {
        "system": _system_dict(sys_),
        "fano": P.to_dict(),
        "indices": idx.to_dict(),
        "joint": J.to_dict(),
    }


def _cmd_verify(args):
    data = _read(args.joint)
    J = jsonio.joint_from_json(data)
    stored = data.get("system", {}) if isinstance(data, dict) else {}
    if args.q is not None:
        q = jsonio.pmf_from_json(_read(args.q))
    elif "q" in stored:
        q = jsonio.pmf_from_json(stored["q"])
    else:
        q = J.marginal()
    L = args.L if args.L is not None else stored.get("L")
    if L is None:
        raise ValueError("list size unknown: pass -L")
    eps = args.eps if args.eps is not None else stored.get("eps", list_map_error(J, L))
    y = getattr(args, "y", stored.get("y"))
    measure = args.measure or Measure("shannon")
    cert = verify_extremal(J, SystemSpec(q, L, eps, y), measure)
    return cert.to_dict(), (0 if cert.passed else 1)


def _config(args) -> OracleConfig:
    seed = args.seed if args.seed is not None else _seed_default()
    return OracleConfig(restarts=args.restarts, seed=seed, grid_resolution=args.grid)


def _cmd_oracle(args):
    cfg = _config(args)
    q = jsonio.pmf_from_json(_read(args.q), args.renormalize)
    m = args.measure
    if args.method == "tv-ball":
        if args.delta is None:
            raise ValueError("--method tv-ball needs --delta")
        H, P = tv_ball_min_entropy(q, args.delta, cfg)
        exact = ho_yeung_truncation(q, args.delta).entropy
        return {
            "method": "tv-ball",
            "measure": "shannon",
            "direction": "lower",
            "oracle_value": H,
            "bound_value": exact,
            "gap": H - exact,
            "delta": args.delta,
            "grid_resolution": cfg.grid_resolution,
            "slack": tv_grid_slack(len(q), cfg.grid_resolution),
            "minimiser": P.to_dict(),
        }
    sys_ = SystemSpec(q, args.L, args.eps, args.y)
    if sys_.y_card is None:
        raise ValueError("the oracle needs a finite |Y|: pass --y N")
    if m.name == "renyi":
        m = Measure("arimoto", m.alpha)
    phi = m.phi(len(q))
    if args.method == "exhaustive":
        v, J = exhaustive_small(q, sys_.L, sys_.eps, sys_.y_card, phi, args.mesh)
    else:
        v, J = brute_force_sup(q, sys_.L, sys_.eps, sys_.y_card, phi, cfg)
    b = bound(sys_, m)
    value = m.from_phi(v)
    return {
        "method": args.method,
        "measure": str(m),
        "direction": "upper" if b.upper else "lower",
        "oracle_value": value,
        "bound_value": b.value,
        "gap": b.value - value if b.upper else value - b.value,
        "seed": cfg.seed,
        "restarts": cfg.restarts,
        "system": _system_dict(sys_),
        "argmax_joint": J.to_dict(),
    }


def _cmd_errprob(args):
    J = jsonio.joint_from_json(_read(args.joint))
    out = {
        "L": args.L,
        "list_error": list_map_error(J, args.L),
        "outputs": J.n_y,
        "range": list(feasible_range(J.marginal(), args.L, J.n_y)),
    }
    if args.z:
        Z = [int(z) for z in args.z.split(",")]
        out["z"] = Z
        out["restricted_error"] = restricted_list_error(J, args.L, Z)
    return out


def _cmd_measure(args):
    m = args.measure
    if args.q is not None:
        P = jsonio.pmf_from_json(_read(args.q), args.renormalize)
        return {"measure": str(m), "of": "marginal", "value": m.of_pmf(P)}
    J = jsonio.joint_from_json(_read(args.joint))
    if m.name == "renyi":
        m = Measure("arimoto", m.alpha)
    return {"measure": str(m), "of": "joint", "value": m.of_joint(J)}


def _eps_schedule(text, delta=None):
    s = _schedule(text, allow=("blind", "delta"))
    if s == "blind":
        return None
    if s == "delta":
        if delta is None:
            raise ValueError("'delta' schedule only applies to the counterexample family")
        return delta
    return s


def _trace_output(rows, fmt):
    if fmt == "csv":
        return trace_to_csv(rows)
    return {"rows": [r.to_dict() for r in rows]}


def _cmd_asym(args):
    if args.family == "poisson":
        mean = _schedule(args.mean)
        rows = equivocation_trace(
            SourceFamily.poisson(mean), args.L, args.n, _eps_schedule(args.eps), args.measure
        )
        return _trace_output(rows, args.format)
    if args.family == "counterexample":
        delta = _schedule(args.delta)
        src = SourceFamily.counterexample4(args.gamma, args.L, delta)
        rows = equivocation_trace(src, args.L, args.n, _eps_schedule(args.eps, delta), args.measure)
        return _trace_output(rows, args.format)
    if args.example5 is not None:
        if args.example5 < 1:
            raise ValueError("need at least one position")
        joints = [JointDist.independent([0.5, 0.5])] * args.example5
    else:
        data = _read(args.joints)
        if not isinstance(data, list):
            raise ValueError("--joints must hold a JSON list of joints")
        joints = [jsonio.joint_from_json(d) for d in data]
    ref = jsonio.pmf_from_json(_read(args.reference)) if args.reference else None
    return symbolwise_trace(joints, args.L, ref).to_dict()


_HANDLERS = {
    "bound": _cmd_bound,
    "extremal": _cmd_extremal,
    "verify": _cmd_verify,
    "oracle": _cmd_oracle,
    "errprob": _cmd_errprob,
    "measure": _cmd_measure,
    "asym": _cmd_asym,
}


def _emit(text: str, out: str | None) -> None:
    if not text.endswith("\n"):
        text += "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def run(args) -> int:
    try:
        result = _HANDLERS[args.command](args)
    except FanoError as e:
        _emit(jsonio.dumps(e.to_dict()), None)
        return 1
    except (ValueError, OverflowError) as e:
        _emit(jsonio.dumps({"error": "InvalidInput", "message": str(e)}), None)
        return 1
    code = 0
    if isinstance(result, tuple):
        result, code = result
    text = result if isinstance(result, str) else jsonio.dumps(result)
    _emit(text, getattr(args, "out", None))
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
