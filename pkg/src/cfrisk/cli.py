"""Command-line entry point.

Exit codes: 0 success, 2 invalid input, 3 negative certificate (loss not
additive, no standard loss, infeasible marginals), 4 enumeration guard
exceeded.
"""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import List, Optional

from . import additivity, distributions, equivalence, estimation, losses, oracle, risk
from .documents import dumps, format_rational, format_value
from .errors import GuardExceeded, NegativeCertificate, ValidationError
from .spaces import Spaces, dump_loss, dump_standard_loss, load_loss

EXIT_OK, EXIT_INVALID, EXIT_NEGATIVE, EXIT_GUARD = 0, 2, 3, 4


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _value(v, mode: str):
    if v is None:
        return None
    if mode == "float":
        return float(v)
    return format_value(v)


def _map(m, mode):
    return None if m is None else {x: _value(v, mode) for x, v in m.items()}


def _report_doc(report: risk.RiskReport, mode: str) -> dict:
    return {
        "total": _value(report.total, mode),
        "conditional": _map(report.conditional, mode),
        "identified_part": _map(report.identified_part, mode),
        "identified_total": _value(report.identified_total, mode),
        "constant_part": _map(report.constant_part, mode),
        "constant_total": _value(report.constant_total, mode),
        "exact": report.exact,
    }


def _decompose_or_fail(loss, variant=additivity.Variant.FULL):
    result = additivity.decompose(loss, variant)
    if isinstance(result, additivity.NotAdditive):
        raise _NotAdditiveExit(result)
    return result


class _NotAdditiveExit(Exception):
    def __init__(self, cert):
        super().__init__("loss is not additive")
        self.cert = cert


def _model(path: str, mode: str) -> distributions.JointModel:
    model = distributions.load_model(path)
    return model.to_float() if mode == "float" else model


def _check_same(loss, model):
    sp, mp = loss.spaces, model.spaces
    if (sp.K, sp.M, sp.strata) != (mp.K, mp.M, mp.strata):
        raise ValidationError("loss and model disagree on K, M or strata")


# --- subcommands -----------------------------------------------------------

def cmd_check_additivity(args) -> int:
    loss = load_loss(args.loss)
    variant = additivity.Variant.parse(args.variant or "full")
    result = additivity.decompose(loss, variant)
    label = additivity.classify(loss)
    if isinstance(result, additivity.NotAdditive):
        doc = {"additive": False, "regime": label.regime.value,
               "certificate": additivity.not_additive_to_document(result)}
        _emit(dumps(doc), args.out)
        for x in result.failing_strata:
            print(f"not additive in stratum {x!r}", file=sys.stderr)
        return EXIT_NEGATIVE
    doc = {"additive": True, "regime": label.regime.value,
           "decomposition": additivity.decomposition_to_document(result)}
    _emit(dumps(doc), args.out)
    return EXIT_OK


def cmd_weights(args) -> int:
    loss = load_loss(args.loss)
    dec = _decompose_or_fail(loss, additivity.Variant.parse(args.variant or "full"))
    _emit(additivity.dump_decomposition(dec), args.out)
    return EXIT_OK


def cmd_matrix(args) -> int:
    sp = Spaces(args.K, args.M)
    mat = additivity.build_structure_matrix(sp, args.variant or "full")
    if args.published_layout:
        mat = mat.published_layout()
    if args.format == "json":
        doc = {"K": sp.K, "M": sp.M, "variant": mat.variant.value, "rank": mat.rank(),
               "row_labels": list(mat.row_labels), "column_labels": list(mat.column_labels),
               "rows": [list(r) for r in mat.rows]}
        _emit(dumps(doc), args.out)
    else:
        _emit(mat.to_grid(), args.out)
    return EXIT_OK


def cmd_risk(args) -> int:
    loss = load_loss(args.loss)
    model = _model(args.model[0], args.mode)
    _check_same(loss, model)
    view_variant = distributions.View.parse(args.variant or "b")
    doc = {"true": _report_doc(risk.true_risk(loss, model), args.mode)}
    result = additivity.decompose(loss)
    if isinstance(result, additivity.NotAdditive):
        doc["identified"] = None
        doc["note"] = "loss is not additive; only the true risk is available"
    else:
        view = risk.observable_from_model(model, view_variant)
        doc["identified"] = _report_doc(risk.identified_risk(result, view, allow_unknown_constant=True), args.mode)
        if loss.spaces.M == 2:
            bd = risk.binary_decomposition(result, view)
            if args.table:
                _emit(bd.to_table(), None)
                return EXIT_OK
            doc["terms"] = {x: {"accuracy": _value(bd.accuracy_term(x), args.mode),
                                "difficulty": _value(bd.difficulty_term(x), args.mode),
                                "baseline": _value(bd.baseline_term(x), args.mode),
                                "constant": _value(bd.constant[x], args.mode)} for x in loss.spaces.strata}
    _emit(dumps(doc), args.out)
    return EXIT_OK


def cmd_risk_diff(args) -> int:
    if len(args.model or []) != 2:
        raise ValidationError("risk-diff needs exactly two --model files")
    loss = load_loss(args.loss)
    first, second = (_model(p, args.mode) for p in args.model)
    for m in (first, second):
        _check_same(loss, m)
    dec = _decompose_or_fail(loss)
    variant = distributions.View.parse(args.variant or "a")
    diff = risk.identified_difference(dec, risk.observable_from_model(first, variant),
                                      risk.observable_from_model(second, variant))
    truth = risk.true_risk(loss, first).total - risk.true_risk(loss, second).total
    doc = {"identified_difference": _value(diff.total, args.mode),
           "conditional": _map(diff.conditional, args.mode),
           "true_difference": _value(truth, args.mode)}
    _emit(dumps(doc), args.out)
    return EXIT_OK


def cmd_optimize_policy(args) -> int:
    loss = load_loss(args.loss)
    model = _model(args.model[0], args.mode)
    _check_same(loss, model)
    dec = _decompose_or_fail(loss)
    view = risk.observable_from_model(model, distributions.View.parse(args.variant or "a"))
    policy, report = risk.optimize_policy(dec, view)
    _emit(dumps({"policy": policy.to_document(), "report": _report_doc(report, args.mode)}), args.out)
    return EXIT_OK


def cmd_to_standard(args) -> int:
    loss = load_loss(args.loss)
    dec = _decompose_or_fail(loss)
    _emit(dump_standard_loss(equivalence.to_standard_loss(dec)), args.out)
    return EXIT_OK


def cmd_std_exists(args) -> int:
    loss = load_loss(args.loss)
    dec = _decompose_or_fail(loss)
    cert = equivalence.standard_loss_exists(dec)
    _emit(dumps(equivalence.certificate_to_document(cert)), args.out)
    return EXIT_OK if cert.exists else EXIT_NEGATIVE


def _joint_doc(sp: Spaces, p, x: str) -> dict:
    return {"K": sp.K, "M": sp.M, "strata": [{
        "label": x, "weight": "1", "propensity": [format_rational(Fraction(1, sp.K))] * sp.K,
        "p": [{"d_star": d, "y": list(y), "prob": format_rational(p[i])}
              for i, (d, y) in enumerate(sp.cells) if p[i]]}]}


def _interval_doc(sp: Spaces, interval: oracle.RiskInterval, x: str) -> dict:
    doc = {"stratum": x, "min": format_rational(interval.min), "max": format_rational(interval.max),
           "width": format_rational(interval.width), "identifiable": interval.identifiable,
           "argmin": [format_rational(v) for v in interval.argmin],
           "argmax": [format_rational(v) for v in interval.argmax]}
    if not interval.identifiable and len(interval.argmin) == sp.N:
        doc["counterexample"] = {"p1": _joint_doc(sp, interval.argmin, x), "p2": _joint_doc(sp, interval.argmax, x)}
    return doc


def cmd_oracle(args) -> int:
    loss = load_loss(args.loss)
    variant = distributions.View.parse(args.variant or "a")
    models = args.model or []
    if len(models) == 2:
        first, second = (distributions.load_model(p) for p in models)
        intervals = [_interval_doc(loss.spaces, oracle.difference_bounds(loss, (first, second), variant, x=x), x)
                     for x in loss.spaces.strata]
        _emit(dumps({"kind": "difference", "variant": variant.value, "intervals": intervals}), args.out)
        return EXIT_OK
    if len(models) == 1:
        model = distributions.load_model(models[0])
        _check_same(loss, model)
        view = distributions.marginalize(model, variant)
        intervals = [_interval_doc(loss.spaces, oracle.risk_bounds(oracle.FiberProblem.from_view(loss, view, x)), x)
                     for x in loss.spaces.strata]
        _emit(dumps({"kind": "level", "variant": variant.value, "intervals": intervals}), args.out)
        return EXIT_OK
    report = oracle.certify_identifiability(loss, variant, args.trials, args.seed, args.jobs)
    doc = {"kind": "certify", "variant": variant.value, "trials": report.trials, "verdict": report.verdict,
           "max_width": format_rational(report.max_width), "regime": report.regime.value,
           "agreement": report.agreement}
    if report.counterexample is not None:
        c = report.counterexample
        doc["counterexample"] = {"q": [format_rational(v) for v in c.q], "gap": format_rational(c.gap),
                                 "p1": _joint_doc(loss.spaces, c.p1, c.stratum),
                                 "p2": _joint_doc(loss.spaces, c.p2, c.stratum)}
    _emit(dumps(doc), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    model = distributions.load_model(args.model[0])
    batch = distributions.simulate_records(model, args.n, args.seed)
    _emit(batch.to_csv(), args.out)
    return EXIT_OK


def cmd_estimate(args) -> int:
    loss = load_loss(args.loss)
    dec = _decompose_or_fail(loss)
    batch = distributions.read_records(args.records, loss.spaces)
    view = estimation.empirical_view(batch)
    report = estimation.estimate_identified_risk(dec, view, level=not args.difference_only)
    doc = {"estimator": "plug-in", "n": len(batch), "report": _report_doc(report, "float"),
           "stratum_weights": {x: view.stratum_weights[x] for x in loss.spaces.strata}}
    _emit(dumps(doc), args.out)
    return EXIT_OK


def _parse_params(items: List[str]) -> dict:
    params = {}
    for item in items or []:
        if "=" not in item:
            raise ValidationError(f"parameter {item!r} must look like name=value")
        key, value = item.split("=", 1)
        params[key.strip()] = value.strip()
    return params


def cmd_example(args) -> int:
    params = _parse_params(args.param)
    strata = tuple(args.strata.split(",")) if args.strata else ("all",)
    if args.decomposition:
        dec = losses.builtin_decomposition(args.name, params, strata)
        _emit(additivity.dump_decomposition(dec), args.out)
    else:
        _emit(dump_loss(losses.builtin_example(args.name, params, strata)), args.out)
    return EXIT_OK


COMMANDS = {
    "check-additivity": (cmd_check_additivity, "decide additivity; emit weights or a residual certificate"),
    "weights": (cmd_weights, "emit an additive decomposition document"),
    "matrix": (cmd_matrix, "print the structure matrix"),
    "risk": (cmd_risk, "true and identified risk of a loss under a model"),
    "risk-diff": (cmd_risk_diff, "identified risk difference between two models"),
    "optimize-policy": (cmd_optimize_policy, "best per-stratum decision rule"),
    "to-standard": (cmd_to_standard, "equivalent standard loss for two decisions"),
    "std-exists": (cmd_std_exists, "standard-loss existence certificate for three or more decisions"),
    "oracle": (cmd_oracle, "exact risk bounds over the fiber of observationally equivalent joints"),
    "simulate": (cmd_simulate, "draw records from a model"),
    "estimate": (cmd_estimate, "plug-in risk estimate from records"),
    "example": (cmd_example, "emit a built-in example loss"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfrisk", description="Counterfactual risk on finite spaces.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--out", help="output path (default: stdout)")
        if name == "matrix":
            p.add_argument("--K", type=int, required=True)
            p.add_argument("--M", type=int, required=True)
            p.add_argument("--variant", choices=["full", "restricted"], default="full")
            p.add_argument("--paper-layout", dest="published_layout", action="store_true",
                           help="reorder rows and columns into the published K=M=2 layout")
            p.add_argument("--format", choices=["grid", "json"], default="grid")
            continue
        if name == "example":
            p.add_argument("name", choices=sorted(losses.REQUIRED))
            p.add_argument("--param", action="append", metavar="NAME=VALUE")
            p.add_argument("--strata", help="comma-separated stratum labels")
            p.add_argument("--decomposition", action="store_true", help="emit the closed-form weights instead")
            continue
        if name != "simulate":
            p.add_argument("--loss", required=True)
        if name in ("risk", "risk-diff", "optimize-policy", "oracle", "simulate"):
            p.add_argument("--model", action="append", required=name != "oracle")
        if name in ("check-additivity", "weights"):
            p.add_argument("--variant", choices=["full", "restricted"])
        if name in ("risk", "risk-diff", "optimize-policy", "oracle"):
            p.add_argument("--variant", choices=["a", "b"])
            p.add_argument("--mode", choices=["rational", "float"], default="rational")
        if name == "risk":
            p.add_argument("--table", action="store_true", help="print the accuracy/difficulty table")
        if name == "oracle":
            p.add_argument("--trials", type=int, default=50)
            p.add_argument("--seed", type=int, default=0)
            p.add_argument("--jobs", type=int, default=1)
        if name == "simulate":
            p.add_argument("--n", type=int, required=True)
            p.add_argument("--seed", type=int, required=True)
        if name == "estimate":
            p.add_argument("--records", required=True)
            p.add_argument("--difference-only", action="store_true",
                           help="allow a nonzero intercept and report the identified part only")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = COMMANDS[args.command][0]
    try:
        return handler(args)
    except _NotAdditiveExit as exc:
        _emit(dumps({"additive": False, "certificate": additivity.not_additive_to_document(exc.cert)}), None)
        print("error: loss is not additive", file=sys.stderr)
        return EXIT_NEGATIVE
    except NegativeCertificate as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NEGATIVE
    except GuardExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (ValidationError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
