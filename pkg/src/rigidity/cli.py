"""Command-line entry point.

Exit status: 0 when every requested certificate passes, 1 when a certificate
or construction fails, 2 on bad input.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__, analysis, certify
from .circle import PrecisionError, UnitPoint, unit_point_from_rational, unit_point_from_real
from .construction import (
    AllRootsOfChain,
    ConstructionError,
    IrrationalOrbit,
    RootsOfPowers,
    Scheme,
    build_rigidity,
    dense_from_json,
    epsilon_for_tolerance,
    state_to_json,
    verify_certificate,
)
from .measure import MeasureError, coefficient_table, measure_from_json, measure_to_json
from .semigroup import SemigroupError, build_semigroup, coefficient_scan, furstenberg_measure
from .sequences import (
    DiagonalSlice,
    DivisibilityChain,
    ChainMultiples,
    Explicit,
    Geometric,
    Integers,
    LinearIndexMap,
    ConvergentDenominators,
    Smooth,
    spec_from_json,
    terms_to_csv,
)

SCHEMA_VERSION = "1.0"


class InputError(ValueError):
    pass


# -- argument parsing helpers -------------------------------------------------------------


def _ints(text: str) -> tuple:
    try:
        return tuple(int(t) for t in text.replace(";", ",").split(",") if t.strip())
    except ValueError as exc:
        raise InputError(f"expected comma-separated integers, got {text!r}") from exc


def _number(text: str):
    """Exact Fraction for '1/3' or '0.45', float otherwise."""
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        try:
            return float(text)
        except ValueError as exc:
            raise InputError(f"not a number: {text!r}") from exc


def _load_json_arg(text: str):
    if text.lstrip().startswith("{"):
        return json.loads(text)
    path = Path(text)
    if path.is_file():
        return json.loads(path.read_text(encoding="utf-8"))
    return None


def parse_sequence(text: str):
    """Sequence from a JSON file, inline JSON, or a shorthand such as ``geometric:2``.

    Shorthands: geometric:B, integers[:START], furstenberg, smooth:G1,G2,...,
    slice:G1,G2,...:PIVOT, chain:M1,M2,..., factorial, explicit:V1,V2,...,
    convergents:A0,A1,...[;P1,P2,...], multiples:M1,M2,...
    """
    obj = _load_json_arg(text)
    if obj is not None:
        return spec_from_json(obj)
    name, _, rest = text.partition(":")
    name = name.strip().lower()
    if name in ("geometric", "powers"):
        return Geometric(int(rest))
    if name == "integers":
        return Integers(int(rest) if rest else 1)
    if name == "furstenberg":
        return Smooth((2, 3))
    if name == "smooth":
        return Smooth(_ints(rest))
    if name == "slice":
        gens, _, pivot = rest.rpartition(":")
        return DiagonalSlice(_ints(gens), int(pivot), LinearIndexMap(1, 0))
    if name == "chain":
        return DivisibilityChain(_ints(rest))
    if name == "factorial":
        return DivisibilityChain((), 1, "factorial")
    if name == "explicit":
        return Explicit(_ints(rest))
    if name == "convergents":
        prefix, _, period = rest.partition(";")
        return ConvergentDenominators(_ints(prefix), _ints(period))
    if name == "multiples":
        return ChainMultiples(DivisibilityChain(_ints(rest)) if rest else DivisibilityChain((2,)))
    raise InputError(f"unknown sequence {text!r}")


def parse_dense(text: str | None, seq):
    """Dense set from a shorthand (roots:B, chain, orbit:A0,...;P1,...[:BITS]) or JSON; default from the sequence."""
    if text is None:
        if isinstance(seq, Geometric):
            return RootsOfPowers(seq.base)
        if isinstance(seq, DiagonalSlice):
            return RootsOfPowers(seq.pivot)
        if isinstance(seq, DivisibilityChain):
            return AllRootsOfChain(seq)
        if isinstance(seq, ChainMultiples):
            return AllRootsOfChain(seq.chain)
        raise InputError("this sequence needs an explicit --dense")
    obj = _load_json_arg(text)
    if obj is not None:
        return dense_from_json(obj)
    name, _, rest = text.partition(":")
    if name == "roots":
        return RootsOfPowers(int(rest))
    if name == "chain":
        return AllRootsOfChain(parse_sequence(rest) if rest else seq)
    if name == "orbit":
        cf, _, bits = rest.partition(":")
        prefix, _, period = cf.partition(";")
        return IrrationalOrbit(_ints(prefix), _ints(period), int(bits) if bits else 256)
    raise InputError(f"unknown dense set {text!r}")


def parse_theta(text: str, bits: int) -> UnitPoint:
    """Angle as a rational 'a/q', a decimal, or a continued fraction 'cf:A0,A1,...[;P1,...]'."""
    if text.startswith("cf:"):
        prefix, _, period = text[3:].partition(";")
        return IrrationalOrbit(_ints(prefix), _ints(period), bits).theta()
    if "/" in text:
        a, q = text.split("/")
        return unit_point_from_rational(int(a), int(q))
    try:
        frac = Fraction(text)
    except ValueError as exc:
        raise InputError(f"not an angle: {text!r}") from exc
    if frac.denominator == 1 or len(text) < 18:
        return unit_point_from_rational(frac.numerator, frac.denominator)
    return unit_point_from_real(text, bits)


# -- output helpers -----------------------------------------------------------------------


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


class Outputs:
    """Collects artifacts and writes them with a manifest, or prints a summary."""

    def __init__(self, args, command: str):
        self.dir = Path(args.out) if getattr(args, "out", None) else None
        self.command = command
        self.params = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out")}
        self.files: dict[str, str] = {}
        self.inputs: dict[str, str] = {}
        self.exact = True

    def add_input(self, text: str | None) -> None:
        if text and Path(text).is_file():
            self.inputs[text] = hashlib.sha256(Path(text).read_bytes()).hexdigest()

    def add(self, name: str, content) -> None:
        if isinstance(content, (dict, list)):
            if isinstance(content, dict):
                content = {"schema_version": SCHEMA_VERSION, **content}
            content = _dump(content)
        self.files[name] = content

    def finish(self, summary: dict) -> None:
        if self.dir is None:
            sys.stdout.write(_dump(summary))
            return
        self.dir.mkdir(parents=True, exist_ok=True)
        for name, content in self.files.items():
            (self.dir / name).write_text(content, encoding="utf-8")
        manifest = {
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "parameters": self.params,
            "inputs": self.inputs,
            "outputs": sorted(self.files),
            "tool_version": __version__,
            "exact_mode": self.exact,
        }
        (self.dir / "manifest.json").write_text(_dump(manifest), encoding="utf-8")
        sys.stdout.write(_dump(summary))


def _report_failures(failures) -> None:
    for f in failures:
        print(f"property {f.name} failed: witness {json.dumps(f.witness, sort_keys=True)} {f.detail}",
              file=sys.stderr)


# -- commands -------------------------------------------------------------------------------


def cmd_build_rigidity(args) -> int:
    seq = parse_sequence(args.seq)
    dense = parse_dense(args.dense, seq)
    if args.scheme == "uniform":
        scheme = Scheme.uniform()
    elif args.tolerance is not None:
        scheme = Scheme.geometric(epsilon_for_tolerance(Fraction(args.tolerance)))
    else:
        scheme = Scheme.geometric(Fraction(args.epsilon))
    state, measure, cert = build_rigidity(seq, dense, args.depth, scheme, args.horizon)
    out = Outputs(args, "build-rigidity")
    out.add_input(args.seq)
    out.add_input(args.dense)
    out.exact = all(x.is_rational for x, _ in measure.atoms)
    count = min(cert.horizon.get("index", 0) + 1, args.table)
    values = [t.value for t in seq.realize(count)]
    out.add("measure.json", {"type": "measure", **measure_to_json(measure)})
    out.add("state.json", state_to_json(state))
    out.add("certificate.json", cert.to_json())
    out.add("coefficients.csv", coefficient_table(measure, values).to_csv())
    out.finish({"command": "build-rigidity", "passed": cert.passed, "depth": cert.depth,
                "atoms": len(measure.atoms), "sup_deviation": cert.sup_deviation,
                "tolerance": cert.tolerance, "horizon": cert.horizon})
    _report_failures(cert.failures)
    return 0 if cert.passed else 1


def cmd_build_semigroup(args) -> int:
    measure, witness = build_semigroup(_ints(args.generators), Fraction(args.tolerance), args.depth, args.box,
                                       Fraction(args.rajchman_r),
                                       Fraction(args.target) if args.target is not None else None)
    return _finish_witness(args, "build-semigroup", measure, witness)


def cmd_build_furstenberg(args) -> int:
    measure, witness = furstenberg_measure(Fraction(args.delta), args.depth, args.box, args.experimental)
    return _finish_witness(args, "build-furstenberg", measure, witness)


def _finish_witness(args, command, measure, witness) -> int:
    out = Outputs(args, command)
    out.add("measure.json", {"type": "measure", **measure_to_json(measure)})
    out.add("witness.json", witness.to_json())
    out.add("coefficients.csv", witness.scan.table.to_csv())
    out.finish({"command": command, "passed": witness.passed, "claim": witness.claim,
                "minimum": witness.scan.minimum, "certified_lower": witness.scan.certified_lower,
                "argmin": list(witness.scan.argmin)})
    for c in witness.certificates:
        _report_failures(c.failures)
    return 0 if witness.passed else 1


def cmd_verify(args) -> int:
    record = json.loads(Path(args.input).read_text(encoding="utf-8"))
    cert = verify_certificate(record)
    out = Outputs(args, "verify")
    out.add_input(args.input)
    out.add("certificate.json", cert.to_json())
    out.finish(cert.to_json())
    _report_failures(cert.failures)
    return 0 if cert.passed else 1


def cmd_scan(args) -> int:
    measure = measure_from_json(json.loads(Path(args.measure).read_text(encoding="utf-8")))
    out = Outputs(args, "scan")
    out.add_input(args.measure)
    if args.generators:
        gens = _ints(args.generators)
        result = coefficient_scan(measure, gens, (args.box,) * len(gens))
        table, summary = result.table, {"command": "scan", **result.to_json()}
    elif args.seq:
        values = [t.value for t in parse_sequence(args.seq).realize(args.count)]
        table = coefficient_table(measure, values)
        summary = {"command": "scan", "count": len(values)}
    else:
        raise InputError("scan needs --generators or --seq")
    if args.emit == "csv" and out.dir is None:
        sys.stdout.write(table.to_csv())
        return 0
    out.add("coefficients.csv", table.to_csv())
    out.finish(summary)
    return 0


def cmd_weyl(args) -> int:
    seq = parse_sequence(args.seq)
    theta = parse_theta(args.theta, args.bits)
    out = Outputs(args, "weyl")
    out.exact = theta.is_rational
    if args.modes:
        report = analysis.aud_nonuniform_witness(seq, theta, _ints(args.modes), args.n, args.tol,
                                                 _ints(args.checkpoints) if args.checkpoints else ())
        out.add("witness.json", report)
        out.finish(report)
        return 0
    result = analysis.weyl_sum(seq, theta, args.m, args.n)
    if args.emit == "csv" and out.dir is None:
        sys.stdout.write(result.to_csv())
        return 0
    summary = {"command": "weyl", "n": args.n, "m": args.m,
               "average": [result.average.real, result.average.imag], "abs": abs(result.average)}
    out.add("trajectory.csv", result.to_csv())
    out.finish(summary)
    return 0


def cmd_enumerate(args) -> int:
    if args.generators:
        seq = Smooth(_ints(args.generators))
    elif args.seq:
        seq = parse_sequence(args.seq)
    else:
        raise InputError("enumerate needs --generators or --seq")
    text = terms_to_csv(seq.realize(args.count))
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _kazhdan_value(x) -> dict:
    if isinstance(x, analysis.Surd):
        return x.to_json()
    if isinstance(x, Fraction):
        return {"symbolic": str(x), "decimal": repr(float(x))}
    return {"symbolic": None, "decimal": repr(float(x))}


def cmd_kazhdan(args) -> int:
    result: dict = {"type": "kazhdan"}
    if args.from_delta is not None:
        delta = _number(args.from_delta)
        bound = analysis.bound_from_delta(delta, args.set, f"coefficients >= {args.from_delta} on the set")
        result["bound"] = bound.to_json()
        conv = analysis.kazhdan_conversions(delta=delta)
    elif args.from_epsilon is not None:
        conv = analysis.kazhdan_conversions(epsilon=_number(args.from_epsilon))
    elif args.from_gamma is not None:
        conv = analysis.kazhdan_conversions(gamma=_number(args.from_gamma))
    elif args.kappa_tilde is not None:
        conv = None
        result["invariant_coeff_bound"] = _kazhdan_value(analysis.invariant_coeff_bound(_number(args.kappa_tilde)))
    elif args.nu1 is not None:
        conv = None
        parts = [float(t) for t in args.nu1.split(",")]
        result["aud_lower_bound"] = {"decimal": repr(analysis.aud_lower_bound(complex(*parts)))}
    else:
        raise InputError("kazhdan needs one of --from-delta, --from-epsilon, --from-gamma, --kappa-tilde, --nu1")
    if conv is not None:
        result["conversions"] = {k: (v if k == "input" else _kazhdan_value(v)) for k, v in conv.items()}
    out = Outputs(args, "kazhdan")
    out.add("kazhdan.json", result)
    out.finish({"schema_version": SCHEMA_VERSION, **result})
    return 0


# -- parser ---------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rigidity", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-rigidity", help="build and certify an atomic measure along a sequence")
    p.add_argument("--seq", required=True, help="sequence shorthand or JSON file")
    p.add_argument("--dense", help="dense set shorthand or JSON file (default: from the sequence)")
    eps = p.add_mutually_exclusive_group()
    eps.add_argument("--epsilon", default="1/10", help="internal epsilon; the sup bound is 3*epsilon")
    eps.add_argument("--tolerance", help="target sup_k |mu^(n_k) - 1|; sets epsilon = tolerance/3")
    p.add_argument("--scheme", choices=("geometric", "uniform"), default="geometric")
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--horizon", type=int, help="finite horizon K_max when no exact horizon exists")
    p.add_argument("--table", type=int, default=256, help="rows in coefficients.csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_build_rigidity)

    p = sub.add_parser("build-semigroup", help="composite measure bounded below on a multiplicative semigroup")
    p.add_argument("--generators", required=True)
    p.add_argument("--tolerance", default="3/10")
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--box", type=int, default=12)
    p.add_argument("--rajchman-r", default="1/2")
    p.add_argument("--target", help="require the certified box minimum to exceed this value")
    p.add_argument("--out")
    p.set_defaults(func=cmd_build_semigroup)

    p = sub.add_parser("build-furstenberg", help="measure with coefficients > delta on 2^k 3^k'")
    p.add_argument("--delta", required=True)
    p.add_argument("--depth", type=int, default=5)
    p.add_argument("--box", type=int, default=30)
    p.add_argument("--experimental", action="store_true", help="allow delta >= 1/2 with no claim")
    p.add_argument("--out")
    p.set_defaults(func=cmd_build_furstenberg)

    p = sub.add_parser("verify", help="re-check a serialised construction state")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("scan", help="coefficient table of a stored measure")
    p.add_argument("--measure", required=True)
    p.add_argument("--generators")
    p.add_argument("--box", type=int, default=10)
    p.add_argument("--seq")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--emit", choices=("csv", "json"), default="json")
    p.add_argument("--out")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("weyl", help="Weyl averages of exp(2 pi i m n_k theta)")
    p.add_argument("--seq", required=True)
    p.add_argument("--theta", required=True)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--bits", type=int, default=256)
    p.add_argument("--modes", help="comma-separated modes: report a non-uniformity witness instead")
    p.add_argument("--tol", type=float, default=0.2)
    p.add_argument("--checkpoints")
    p.add_argument("--emit", choices=("csv", "json"), default="json")
    p.add_argument("--out")
    p.set_defaults(func=cmd_weyl)

    p = sub.add_parser("enumerate", help="list sequence terms as CSV")
    p.add_argument("--generators")
    p.add_argument("--seq")
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--out", help="CSV file to write")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("kazhdan", help="Kazhdan-constant bounds and conversions")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--from-delta")
    g.add_argument("--from-epsilon")
    g.add_argument("--from-gamma")
    g.add_argument("--kappa-tilde")
    g.add_argument("--nu1", help="re[,im] of the first coefficient")
    p.add_argument("--set", default="2^k 3^k'")
    p.add_argument("--out")
    p.set_defaults(func=cmd_kazhdan)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConstructionError, SemigroupError, certify.Undecided) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (InputError, MeasureError, PrecisionError, ValueError, KeyError, TypeError,
            json.JSONDecodeError, OSError, ZeroDivisionError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
