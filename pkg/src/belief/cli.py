"""Command line entry point: ``belief <subcommand> [flags]``.

Exit codes: 0 success, 2 usage or configuration error, 3 data or schema
error, 4 refusal on numerically degenerate input.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from pathlib import Path
from typing import Sequence

import jsonschema
import numpy as np

from . import estimator as est
from .errors import BeliefError, ConfigError, DataError, DegeneracyError
from .expansion import ExpansionConfig, build_panel, encode_binary, load_config, read_csv_columns
from .glm_bridge import hidden_interaction_report
from .inference import independence_report, significant_slopes
from .simharness import SCENARIOS, run_comparison

POPULATION_NONZERO = 1e-12

_MASK_LIST = {
    "type": "array",
    "items": {
        "type": "object",
        "required": ["mask", "label"],
        "properties": {"mask": {"type": "integer", "minimum": 0}, "label": {"type": "string"}},
    },
}

OUTPUT_SCHEMAS = {
    "infer": {
        "type": "object",
        "required": ["alpha", "adjusted_alpha", "degeneracy_case", "tests", "significant", "independence"],
        "properties": {
            "tests": {"type": "array"},
            "significant": _MASK_LIST,
            "independence": {"type": "object", "required": ["statement", "generators", "k"]},
        },
    },
    "glm-compare": {
        "type": "object",
        "required": ["scale", "masks", "beta", "gamma"],
        "properties": {
            "scale": {"enum": ["expectation", "probability"]},
            "masks": _MASK_LIST,
            "beta": {"type": "array", "items": {"type": "number"}},
            "gamma": {"type": "array", "items": {"type": "number"}},
        },
    },
    "simulate": {
        "type": "object",
        "required": ["scenario", "seed", "n_train", "n_test", "auc"],
        "properties": {
            "scenario": {"enum": sorted(SCENARIOS)},
            "auc": {"type": "object", "additionalProperties": {"type": "number", "minimum": 0, "maximum": 1}},
        },
    },
}


def _write_json(doc: dict, path: str | None, schema: dict | None = None) -> None:
    if schema is not None:
        jsonschema.validate(doc, schema)
    text = json.dumps(doc, indent=2, ensure_ascii=False)
    if path is None or path == "-":
        print(text)
    else:
        Path(path).write_text(text + "\n", encoding="utf-8")


def _parse_depths(items: Sequence[str]) -> dict[str, int]:
    out = {}
    for item in items:
        name, sep, d = item.partition("=")
        if not sep or not name:
            raise ConfigError(f"--depth expects name=depth, got {item!r}")
        try:
            out[name] = int(d)
        except ValueError:
            raise ConfigError(f"--depth {item!r}: depth is not an integer") from None
    return out


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma separated list of integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma separated list of numbers, got {text!r}") from None


def _expansion_config(args) -> ExpansionConfig:
    if args.config and args.depth:
        raise ConfigError("give either --config or --depth, not both")
    if args.config:
        cfg, _ = load_config(args.config)
        return cfg
    if not args.depth:
        raise ConfigError("need --depth name=d (repeatable) or --config")
    return ExpansionConfig.from_depths(_parse_depths(args.depth))


def _load_data(args, need_response: bool):
    cfg = _expansion_config(args)
    cols = read_csv_columns(args.input)
    if need_response:
        if not args.response:
            raise ConfigError("--response is required")
        if args.response not in cols:
            raise ConfigError(f"response column {args.response!r} not found in {args.input}")
        if args.response in cfg.names:
            raise ConfigError("the response cannot also be a predictor")
    for name in cfg.names:
        if name not in cols:
            raise ConfigError(f"predictor column {name!r} not found in {args.input}")
    return cfg, cols


def _reference(cfg: ExpansionConfig, cols) -> dict[str, list[float]]:
    return {
        v.name: [float(x) for x in cols[v.name]]
        for v in cfg.variables
        if v.kind == "continuous-ecdf"
    }


def cmd_expand(args) -> int:
    cfg, cols = _load_data(args, need_response=False)
    if args.response and args.response not in cols:
        raise ConfigError(f"response column {args.response!r} not found in {args.input}")
    panel = build_panel(cols, cfg)
    out = sys.stdout if args.output in (None, "-") else open(args.output, "w", newline="", encoding="utf-8")
    try:
        w = csv.writer(out)
        extra = [args.response] if args.response else []
        w.writerow(panel.labels + ["cell"] + extra)
        for i in range(panel.n):
            row = [int(b) for b in panel.bits[i]] + [int(panel.cell[i])]
            if args.response:
                row.append(cols[args.response][i])
            w.writerow(row)
    finally:
        if out is not sys.stdout:
            out.close()
    for name, k in panel.clamped.items():
        if k:
            print(f"warning: {k} values of {name!r} fell outside the declared range and were clamped", file=sys.stderr)
    return 0


def _fit_report(fit, table) -> str:
    lines = [f"estimator: {fit.estimator_kind}" + (f" (lambda={fit.lam:g})" if fit.estimator_kind == "ridge" else "")]
    lines.append(f"n = {fit.n}, P = {fit.P}, cells = {1 << fit.P}")
    lines.append("")
    lines.append(f"{'mask':>6}  {'term':<30} {'slope':>12}")
    for m, label, b in fit.slope_table():
        lines.append(f"{m:>6}  {label:<30} {b:>12.6f}")
    lines.append("")
    sep = est.detect_separation(fit)
    if sep.separated:
        event = " OR ".join(f"cell {t}" for t in sep.event_cells) or "(empty event)"
        lines.append(f"perfect separation: ||beta|| = {sep.norm:.12g}; B = +1 exactly on the event {{{event}}}")
    else:
        lines.append(f"no perfect separation (||beta|| = {sep.norm:.6f})")
    bounds = est.check_bounds(fit)
    lines.append(
        "bounds: max|H beta| = {:.6f}, ||beta|| = {:.6f} ({})".format(
            bounds.cell_max, bounds.norm, "ok" if bounds.ok else "VIOLATED"
        )
    )
    deg = est.classify_degeneracy(table, fit)
    lines.append(f"degeneracy case {deg.case}: {deg.note}")
    lines.append("empty cells: " + (", ".join(map(str, fit.empty_cells)) if fit.empty_cells else "none"))
    if deg.separated_cells:
        lines.append("deterministic cells: " + ", ".join(map(str, deg.separated_cells)))
    return "\n".join(lines)


def cmd_fit(args) -> int:
    if args.estimator == "ridge" and args.lam is None:
        raise ConfigError("--estimator ridge needs --lambda")
    if args.estimator != "ridge" and args.lam is not None:
        raise ConfigError("--lambda only applies to the ridge estimator")
    cfg, cols = _load_data(args, need_response=True)
    response = encode_binary(cols[args.response], args.positive_level, args.response)
    panel = build_panel(cols, cfg)
    table = est.aggregate(panel, response)
    fit = est.fit(table, args.estimator, args.lam, labels=panel.labels)
    expansion = {"config": cfg.to_dict(), "reference": _reference(cfg, cols), "response": args.response,
                 "positive_level": args.positive_level}
    doc = est.model_to_dict(fit, expansion)
    _write_json(doc, args.output)
    report = _fit_report(fit, table)
    if args.report:
        Path(args.report).write_text(report + "\n", encoding="utf-8")
    # the model goes to stdout when no output path is given, so keep the report off it
    print(report, file=sys.stderr if args.output in (None, "-") else sys.stdout)
    return 0


def cmd_predict(args) -> int:
    fit, doc = est.load_model(args.model)
    exp = doc.get("expansion")
    if not exp or "config" not in exp:
        raise DataError("model has no expansion settings; refit it with this tool")
    cfg = ExpansionConfig.from_dict(exp["config"])
    cols = read_csv_columns(args.input)
    for name in cfg.names:
        if name not in cols:
            raise ConfigError(f"predictor column {name!r} not found in {args.input}")
    panel = build_panel(cols, cfg, reference=exp.get("reference") or None)
    e, p = est.predict(fit, panel.cell)
    out = sys.stdout if args.output in (None, "-") else open(args.output, "w", newline="", encoding="utf-8")
    try:
        w = csv.writer(out)
        w.writerow(["cell", "expectation", "prob_plus"])
        for t, ei, pi in zip(panel.cell, e, p):
            w.writerow([int(t), f"{ei:.12g}", f"{pi:.12g}"])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_infer(args) -> int:
    fit, _ = est.load_model(args.model)
    table = fit.table
    if table.n == 0 or int(table.counts.sum()) != fit.n:
        raise DataError("model lacks per-cell counts and sums; inference needs them")
    deg = est.classify_degeneracy(table, fit)
    doc: dict = {"alpha": args.alpha, "adjusted_alpha": args.alpha / (1 << fit.P), "degeneracy_case": deg.case,
                 "note": "", "tests": [], "significant": []}
    labels = fit.mask_labels()
    if args.population:
        nonzero = [m for m in range(fit.beta.size) if abs(fit.beta[m]) > POPULATION_NONZERO]
        doc["note"] = "slopes treated as population values: nonzero means |beta| > 1e-12"
    elif deg.case == 1:
        tests = significant_slopes(fit, table, alpha=args.alpha)
        doc["tests"] = [t.to_dict() for t in tests]
        nonzero = [t.mask for t in tests if t.significant]
    elif args.strict:
        raise DegeneracyError(f"degeneracy case {deg.case}: {deg.note}")
    else:
        # the asymptotic covariance is degenerate or undefined; report what can be said
        doc["note"] = (
            f"degeneracy case {deg.case}: {deg.note}. Significance tests are not available; "
            "the independence statement uses every slope with |beta| > 1e-12"
        )
        nonzero = [m for m in range(fit.beta.size) if abs(fit.beta[m]) > POPULATION_NONZERO]
    doc["significant"] = [{"mask": m, "label": labels[m]} for m in nonzero]
    stmt = independence_report(nonzero, fit.bit_labels, fit.P)
    doc["independence"] = stmt.to_dict()
    _write_json(doc, args.output, OUTPUT_SCHEMAS["infer"])
    if args.output not in (None, "-"):
        print(stmt.statement)
    return 0


def cmd_glm_compare(args) -> int:
    if args.depth < 1:
        raise ConfigError("--depth must be at least 1")
    rep = hidden_interaction_report(
        args.intercept, _float_list(args.coefs), link=args.link, depth=args.depth,
        weights=args.weights, mode=args.mode,
    )
    _write_json(rep.to_dict(args.scale), args.output, OUTPUT_SCHEMAS["glm-compare"])
    return 0


def cmd_simulate(args) -> int:
    if args.scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {args.scenario}; choose from {sorted(SCENARIOS)}")
    depths = _int_list(args.depths)
    if not depths or min(depths) < 1:
        raise ConfigError("--depths needs positive integers")
    res = run_comparison(args.scenario, depths, args.n_train, args.n_test, args.seed)
    doc = res.summary()
    _write_json(doc, args.output, OUTPUT_SCHEMAS["simulate"])
    if args.output not in (None, "-"):
        out = Path(args.output)
        res.write_roc_csv(out.with_name(out.stem + "_roc.csv"))
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(ConfigError.exit_code)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="belief", description="Binary expansion linear effect models for a binary response.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def data_flags(sp, response_required: bool):
        sp.add_argument("--input", required=True, help="CSV file with a header row")
        sp.add_argument("--output", help="output path (default: stdout)")
        sp.add_argument("--response", required=response_required, help="binary response column")
        sp.add_argument("--depth", action="append", default=[], metavar="NAME=D",
                        help="ECDF-expanded predictor and its depth (repeatable)")
        sp.add_argument("--config", help="JSON expansion config with a 'variables' list")

    sp = sub.add_parser("expand", help="write the +-1 bits of each row")
    data_flags(sp, response_required=False)
    sp.set_defaults(func=cmd_expand)

    sp = sub.add_parser("fit", help="fit slopes and write a model JSON")
    data_flags(sp, response_required=True)
    sp.add_argument("--positive-level", help="response level coded +1 (default '1' for 0/1 data)")
    sp.add_argument("--estimator", choices=["lse", "mp", "ridge"], default="lse")
    sp.add_argument("--lambda", dest="lam", type=float, help="ridge penalty")
    sp.add_argument("--report", help="also write the text report here")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("predict", help="fitted probabilities for new rows")
    sp.add_argument("--model", required=True)
    sp.add_argument("--input", required=True)
    sp.add_argument("--output")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("infer", help="slope tests and the conditional independence statement")
    sp.add_argument("--model", required=True)
    sp.add_argument("--alpha", type=float, default=0.01)
    sp.add_argument("--output")
    sp.add_argument("--population", action="store_true",
                    help="treat the model slopes as exact; nonzero means |beta| > 1e-12")
    sp.add_argument("--strict", action="store_true",
                    help="exit with code 4 instead of a partial report on degenerate models")
    sp.set_defaults(func=cmd_infer)

    sp = sub.add_parser("glm-compare", help="BELIEF slopes implied by a main-effects GLM in uniform covariates")
    sp.add_argument("--intercept", type=float, default=0.0)
    sp.add_argument("--coefs", required=True, help="comma separated coefficients, one per variable")
    sp.add_argument("--link", choices=["logit", "probit"], default="logit")
    sp.add_argument("--depth", type=int, default=1)
    sp.add_argument("--weights", choices=["dyadic", "unit"], default="dyadic")
    sp.add_argument("--mode", choices=["truncated", "cell-average"], default="truncated")
    sp.add_argument("--scale", choices=["expectation", "probability"], default="expectation")
    sp.add_argument("--output")
    sp.set_defaults(func=cmd_glm_compare)

    sp = sub.add_parser("simulate", help="AUC comparison on a simulated scenario")
    sp.add_argument("--scenario", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--depths", default="1,2,3")
    sp.add_argument("--n-train", type=int, default=8192)
    sp.add_argument("--n-test", type=int, default=4096)
    sp.add_argument("--output", help="AUC JSON; ROC points go to <stem>_roc.csv beside it")
    sp.set_defaults(func=cmd_simulate)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", est.DegenerateVarianceWarning)
            return int(args.func(args))
    except BeliefError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except jsonschema.ValidationError as exc:
        print(f"error: output failed schema validation: {exc.message}", file=sys.stderr)
        return DataError.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DegeneracyError.exit_code


if __name__ == "__main__":
    sys.exit(main())
