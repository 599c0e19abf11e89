"""Command-line entry point: ``cdo-engine <command> [options]``.

Exit codes: 0 when every check passes, 1 when a check fails, 2 for bad input.
Reports stream as JSON lines (default) or as human-readable text.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from fractions import Fraction

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import acceptance
from . import free_va as fva
from . import genus as gn
from .algebroid import (ConnectionData, PreconditionError, check_axioms, coordinate_structure,
                        cs_identity_residual, global_structure, homotopy)
from .coord_change import (DiffeoError, PolyDiffeo, compose_check, conformal_transform,
                           verify_delta_map)
from .cs_geometry import ChartDataError, DolbeaultChart, PiEChart
from .expr import ExprError, parse_form, parse_matrix
from .report import CheckResult, Report
from .scalars import format_scalar
from .superpoly import ChartSignature, MatrixForm, supertrace

COMMANDS = ("check-axioms", "check-coord", "virasoro", "q-lift", "cdr", "cs-verify",
            "genus", "character-count", "selftest")
MODELS = ("coordinate", "pi_e", "de_rham", "dolbeault")


class InputError(Exception):
    """Bad command-line or input-file; reported with its location."""


# --------------------------------------------------------------------------
# input files


@dataclass
class ChartSpec:
    model: str
    sig: ChartSignature
    aliases: dict
    conn: ConnectionData | None = None
    chart: PiEChart | None = None
    forms: dict = field(default_factory=dict)


def _load_toml(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"{path}: {exc}") from None


def _chart_names(model, p, q):
    if model == "coordinate":
        return [f"b{i + 1}" for i in range(p + q)]
    if model == "pi_e":
        return [f"x{i + 1}" for i in range(p)] + [f"e{k + 1}" for k in range(q)]
    if model == "de_rham":
        return [f"x{i + 1}" for i in range(p)] + [f"dx{i + 1}" for i in range(p)]
    d, r = p // 2, q - p // 2
    return ([f"z{i + 1}" for i in range(d)] + [f"zb{i + 1}" for i in range(d)]
            + [f"zetab{i + 1}" for i in range(d)] + [f"e{k + 1}" for k in range(r)])


def _int(sec: dict, key: str, where: str, default=None) -> int:
    v = sec.get(key, default)
    if not isinstance(v, int) or v < 0:
        raise InputError(f"{where}.{key}: expected a non-negative integer, got {v!r}")
    return v


def load_chart(path: str) -> ChartSpec:
    """Read a chart file (TOML sections [chart], [connection], [forms])."""
    data = _load_toml(path)
    sec = data.get("chart")
    if not isinstance(sec, dict):
        raise InputError(f"{path}: missing [chart] section")
    model = sec.get("model", "coordinate")
    if model not in MODELS:
        raise InputError(f"{path}: chart.model must be one of {', '.join(MODELS)}")
    where = f"{path}: chart"
    if model == "coordinate":
        p, q = _int(sec, "p", where), _int(sec, "q", where)
    elif model == "de_rham":
        p = q = _int(sec, "d", where)
    elif model == "pi_e":
        p, q = _int(sec, "d", where), _int(sec, "r", where)
    else:
        d, r = _int(sec, "d", where), _int(sec, "r", where, 0)
        p, q = 2 * d, d + r
    sig = ChartSignature(p, q)
    aliases = {name: i for i, name in enumerate(_chart_names(model, p, q))}
    spec = ChartSpec(model, sig, aliases)

    def parse(value, key):
        try:
            return parse_form(value, sig, aliases)
        except ExprError as exc:
            raise InputError(f"{path}: {key}: {exc}") from None

    def matrix(value, key, n):
        try:
            return parse_matrix(value, sig, aliases, n)
        except ExprError as exc:
            raise InputError(f"{path}: {key}: {exc}") from None

    conn_sec = data.get("connection", {})
    try:
        if model == "coordinate":
            if "gamma" in conn_sec:
                spec.conn = ConnectionData(MatrixForm(sig, matrix(conn_sec["gamma"], "connection.gamma", sig.n)))
        elif model == "pi_e":
            gM = matrix(conn_sec["gamma_M"], "connection.gamma_M", p) if "gamma_M" in conn_sec else None
            gE = matrix(conn_sec["gamma_E"], "connection.gamma_E", q) if "gamma_E" in conn_sec else None
            spec.chart = PiEChart(p, q, gM, gE, _chart_names(model, p, q))
        elif model == "de_rham":
            gM = matrix(conn_sec["gamma_M"], "connection.gamma_M", p) if "gamma_M" in conn_sec else None
            spec.chart = PiEChart.de_rham(p, gM)
        else:
            d, r = p // 2, q - p // 2
            gM = matrix(conn_sec["gamma_M"], "connection.gamma_M", d) if "gamma_M" in conn_sec else None
            gE = matrix(conn_sec["gamma_E"], "connection.gamma_E", r) if "gamma_E" in conn_sec else None
            spec.chart = DolbeaultChart(d, r, gM, gE, symmetrize=bool(conn_sec.get("symmetrize", False)))
    except (ValueError, ChartDataError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"{path}: connection: {exc}") from None
    if spec.chart is not None:
        spec.conn = spec.chart.affine_connection()
    for key, value in data.get("forms", {}).items():
        if key not in ("H", "omega", "B", "H2"):
            raise InputError(f"{path}: forms.{key}: unknown form (expected H, omega, B, H2)")
        spec.forms[key] = None if value == "auto" else parse(value, f"forms.{key}")
    return spec


def _auto_H(spec: ChartSpec):
    H = spec.forms.get("H")
    if H is None and spec.conn is not None:
        H = homotopy(supertrace(spec.conn.R @ spec.conn.R))
    return H


def load_diffeos(path: str, sig: ChartSignature | None):
    """[[diffeo]] entries with forward, inverse and optional xi, omega."""
    data = _load_toml(path)
    if sig is None:
        sec = data.get("chart", {})
        sig = ChartSignature(_int(sec, "p", f"{path}: chart"), _int(sec, "q", f"{path}: chart"))
    entries = data.get("diffeo")
    if not isinstance(entries, list) or not entries:
        raise InputError(f"{path}: expected at least one [[diffeo]] table")
    out = []
    for k, e in enumerate(entries):
        where = f"{path}: diffeo[{k}]"
        try:
            fwd = [parse_form(x, sig) for x in e["forward"]]
            inv = [parse_form(x, sig) for x in e["inverse"]]
            xi = parse_form(e["xi"], sig) if e.get("xi", "auto") != "auto" else None
            omega = parse_form(e["omega"], sig) if "omega" in e else None
            phi = PolyDiffeo(sig, fwd, inv, e.get("name", f"phi{k + 1}"))
        except KeyError as exc:
            raise InputError(f"{where}: missing key {exc}") from None
        except (ExprError, DiffeoError) as exc:
            raise InputError(f"{where}: {exc}") from None
        out.append((phi, xi, omega))
    return sig, out


# --------------------------------------------------------------------------
# commands


def cmd_check_axioms(args) -> Report:
    spec = load_chart(_need(args.chart, "--chart"))
    if spec.conn is None:
        V = coordinate_structure(spec.sig)
    else:
        V = global_structure(spec.conn, _auto_H(spec))
    return check_axioms(V, samples=args.samples, seed=args.seed,
                        exhaustive_degree=args.exhaustive, max_degree=args.max_degree)


def cmd_check_coord(args) -> Report:
    sig = load_chart(args.chart).sig if args.chart else None
    sig, diffeos = load_diffeos(_need(args.diffeo, "--diffeo"), sig)
    from .coord_change import primitive_of_wz
    out = Report()
    resolved = []
    for phi, xi, omega in diffeos:
        xi = xi if xi is not None else primitive_of_wz(phi)
        resolved.append((phi, xi))
        out.extend_report(verify_delta_map(phi, xi, samples=args.samples, seed=args.seed), f"{phi.name} ")
        out.extend_report(conformal_transform(phi, xi, omega), f"{phi.name} ")
    for (a, xa), (b, xb) in zip(resolved, resolved[1:]):
        out.extend_report(compose_check(a, xa, b, xb), f"{b.name} after {a.name} ")
    return out


def cmd_virasoro(args) -> Report:
    sig = ChartSignature(args.p, args.q)
    omega = _parse_cli_form(args.omega, sig, "--omega") if args.omega else None
    return fva.virasoro_report(sig, omega, max_weight=args.max_weight)


def cmd_q_lift(args) -> Report:
    spec = load_chart(_need(args.chart, "--chart"))
    if spec.model != "dolbeault":
        raise InputError(f"{args.chart}: q-lift needs a dolbeault chart")
    H = _auto_H(spec)
    out = Report()
    out.extend_report(fva.q_lift_report(spec.chart, H, spec.forms.get("omega")))
    out.extend_report(fva.fermion_report(spec.chart, H))
    return out


def cmd_cdr(args) -> Report:
    spec = load_chart(_need(args.chart, "--chart"))
    if spec.model != "de_rham":
        raise InputError(f"{args.chart}: cdr needs a de_rham chart")
    return fva.cdr_report(spec.chart)


def cmd_cs_verify(args) -> Report:
    spec = load_chart(_need(args.chart, "--chart"))
    if spec.chart is None:
        conn = spec.conn or ConnectionData.flat(spec.sig)
        r = CheckResult("d CS = Str(R^R)", "Chern-Simons transgression", samples=1)
        res = cs_identity_residual(conn)
        if not res.is_zero():
            r.fail(str(res))
        b = CheckResult("Bianchi identity", "dR = R^Gamma - Gamma^R", samples=1)
        if not conn.bianchi_residual().is_zero():
            b.fail(str(conn.bianchi_residual()))
        return Report([r, b])
    return acceptance.chart_suite(spec.chart, "", spec.chart.has_q)


_EXAMPLE_KEYS = {"0": "E0", "e0": "E0", "tm": "ETM", "etm": "ETM", "det_tm": "Edet",
                 "edet": "Edet", "det_tm^2-det_tm": "Edet2", "edet2": "Edet2"}


def cmd_genus(args):
    try:
        M = gn.parse_model(args.model)
        E = gn.parse_bundle(M, args.bundle)
        series = gn.chiral_character(M, E, args.order, args.refined)
    except gn.GenusError as exc:
        raise InputError(str(exc)) from None
    d, rank = M.dim, E.rank
    normalization = {"prefactor": f"q^(-({d}-({rank}))/12)", "central charge": 2 * (d - rank)}
    example = _EXAMPLE_KEYS.get(args.bundle.strip().lower().replace(" ", ""))
    if example is not None:
        meta = gn.example_series(M, example, args.order, args.refined).metadata
        normalization.update({k: v for k, v in meta.items() if k not in normalization})
        normalization["prefactor"] = meta["prefactor"]
        normalization["example"] = example
    elif args.refined:
        normalization["y^-d normalized"] = series.shift_y(-d).render()
    payload = {
        "model": M.name,
        "bundle": E.name,
        "refined": bool(args.refined),
        "series": [{"q": a, "y": b, "coeff": format_scalar(c)} for (a, b), c in series.items()],
        "normalization": normalization,
    }
    report = gn.chern_root_integrand_check(M, E, args.order) if args.check else Report()
    return payload, report


def cmd_character_count(args) -> Report:
    sig = ChartSignature(args.p, args.q)
    series = fva.character_series(sig, args.order)
    r = CheckResult("PBW character", "prod (1+q^l)^(2q) / (1-q^l)^(2p)")
    counts = []
    for k in range(args.order + 1):
        r.samples += 1
        c = fva.pbw_count(sig, k)
        counts.append(c)
        if c != series.coeff(k):
            r.fail(f"weight {k}: {c} vs {series.coeff(k)}")
    r.detail["counts"] = counts
    return Report([r])


def cmd_selftest(args):
    numbers = None
    if args.criteria:
        try:
            numbers = [int(x) for x in args.criteria.split(",")]
        except ValueError:
            raise InputError(f"--criteria: expected comma-separated numbers, got {args.criteria!r}") from None
        bad = [n for n in numbers if n not in acceptance.CRITERIA]
        if bad:
            raise InputError(f"--criteria: unknown criteria {bad}")
    seed = args.seed if args.seed is not None else acceptance.DEFAULT_SEED
    return acceptance.run_suite(seed, numbers)


# --------------------------------------------------------------------------


def _need(value, flag):
    if not value:
        raise InputError(f"missing required option {flag}")
    return value


def _parse_cli_form(text, sig, flag):
    try:
        return parse_form(text, sig)
    except ExprError as exc:
        raise InputError(f"{flag}: {exc}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cdo-engine", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--format", choices=("json", "text"), default="json")
        sp.add_argument("--seed", type=int, default=None)
        if name in ("check-axioms", "check-coord", "q-lift", "cdr", "cs-verify"):
            sp.add_argument("--chart")
        if name == "check-coord":
            sp.add_argument("--diffeo")
        if name in ("check-axioms", "check-coord"):
            sp.add_argument("--samples", type=int, default=50)
        if name == "check-axioms":
            sp.add_argument("--exhaustive", type=int, default=None,
                            help="also sweep basis inputs up to this total degree")
            sp.add_argument("--max-degree", type=int, default=3)
        if name in ("virasoro", "character-count"):
            sp.add_argument("--p", type=int, required=True)
            sp.add_argument("--q", type=int, required=True)
        if name == "virasoro":
            sp.add_argument("--omega")
            sp.add_argument("--max-weight", type=int, default=3)
        if name == "genus":
            sp.add_argument("--model", required=True)
            sp.add_argument("--bundle", default="tm")
            sp.add_argument("--refined", action="store_true")
            sp.add_argument("--check", action="store_true",
                            help="also compare the integrand with its rewritten forms")
        if name in ("genus", "character-count"):
            sp.add_argument("--order", type=int, default=10 if name == "genus" else 6)
        if name == "selftest":
            sp.add_argument("--criteria", help="comma-separated subset, e.g. 1,4,10")
    return parser


def _emit_report(report, fmt, out, prefix_fields=None):
    for r in report:
        if fmt == "json":
            d = r.to_dict()
            if prefix_fields:
                d.update(prefix_fields)
            out.write(json.dumps(d, sort_keys=True, default=str) + "\n")
        else:
            out.write(r.to_text() + "\n")


def run(argv=None, out=None) -> int:
    out = out or sys.stdout
    err = sys.stderr
    try:
        args = build_parser().parse_args(argv)
        if not args.command:
            raise InputError(f"missing command; choose one of {', '.join(COMMANDS)}")
        if getattr(args, "seed", None) is None and args.command != "selftest":
            args.seed = 0
        for flag in ("samples", "order", "max_weight", "p", "q"):
            v = getattr(args, flag, None)
            if v is not None and v < 0:
                raise InputError(f"--{flag.replace('_', '-')} must be non-negative")
        if args.command == "genus":
            payload, report = cmd_genus(args)
            if args.format == "json":
                out.write(json.dumps(payload, sort_keys=True) + "\n")
            else:
                out.write(f"{payload['model']} {payload['bundle']}: "
                          f"prefactor {payload['normalization']['prefactor']}\n")
                for t in payload["series"]:
                    out.write(f"  q^{t['q']} y^{t['y']}: {t['coeff']}\n")
            _emit_report(report, args.format, out)
            return 0 if report.passed else 1
        if args.command == "selftest":
            results = cmd_selftest(args)
            for line in acceptance.transcript(results, args.format):
                out.write(line + "\n")
            return 0 if all(rep.passed for _, _, rep in results) else 1
        handler = {
            "check-axioms": cmd_check_axioms, "check-coord": cmd_check_coord,
            "virasoro": cmd_virasoro, "q-lift": cmd_q_lift, "cdr": cmd_cdr,
            "cs-verify": cmd_cs_verify, "character-count": cmd_character_count,
        }[args.command]
        report = handler(args)
    except InputError as exc:
        err.write(f"error: {exc}\n")
        return 2
    except (PreconditionError, fva.ConformalError) as exc:
        err.write(f"error: precondition failed: {exc}\n")
        return 2
    _emit_report(report, args.format, out)
    return 0 if report.passed else 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
