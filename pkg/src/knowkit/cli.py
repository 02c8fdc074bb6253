"""Command-line front end binding the toolkit together.

Exit codes: 0 success, 1 validation findings or publish drift, 2 usage
error, 3 unreadable or unparseable input. Output carries no timestamps,
so identical invocations print identical bytes.
"""

from __future__ import annotations

import argparse
import os
import re
import shlex
import sys
from decimal import Decimal, InvalidOperation
from pathlib import Path

from .interchange import emit_kb, kb_to_triples, parse_kb, triples_to_kb
from .model import KnowledgeError, validate_structure
from .ontology import (
    OntologyError,
    canonicalize,
    export_inference_spec,
    parse_ontology,
    validate_kb,
)
from .publisher import (
    PageTemplate,
    PublishError,
    build_site,
    check_site,
    parse_template,
)
from .rules import (
    FactEffect,
    NotDerivedError,
    ValueEffect,
    WorkingMemory,
    backward_chain,
    explain,
    format_explanation,
    forward_chain,
    parse_rules,
)
from .triples import InferenceSpec, Term, TripleError, emit_triples, load_triples

OK, FINDINGS, USAGE, BAD_INPUT = 0, 1, 2, 3


def _read(path) -> str:
    return Path(path).read_text(encoding="utf-8")


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------

def _gather_findings(kb_text: str, ontology_text: str | None):
    """(severity, source, subject, message) rows: structural checks, a
    canonicalization dry run, then the ontology validators."""
    kb = parse_kb(kb_text)
    rows = []
    for err in validate_structure(kb):
        subject = err.ids[0] if err.ids else ""
        rows.append(("error", err.kind, subject, err.message))
    if ontology_text is not None:
        ont = parse_ontology(ontology_text)
        try:
            kb, _ = canonicalize(kb, ont)
        except OntologyError as exc:
            rows.append(("error", "canonicalize", "", str(exc)))
        report = validate_kb(kb, ont)
        rows.extend((f.severity, f.source, f.subject, f.message)
                    for f in report.findings)
    return rows


def cmd_validate(args) -> int:
    rows = _gather_findings(_read(args.kb),
                            _read(args.ontology) if args.ontology else None)
    errors = sum(1 for severity, *_ in rows if severity == "error")
    warnings = len(rows) - errors
    if args.format == "tsv":
        for row in rows:
            print("\t".join(row))
    else:
        for severity, source, subject, message in rows:
            where = f" {subject}:" if subject else ""
            print(f"{severity}:{where} {message} [{source}]")
        print(f"{errors} errors, {warnings} warnings")
    return FINDINGS if errors else OK


# ---------------------------------------------------------------------------
# infer
# ---------------------------------------------------------------------------

_FACT_CF = re.compile(r"^(.*\S)\s+cf\s+([0-9./]+)\s*$", re.IGNORECASE)


def load_facts(text: str, wm: WorkingMemory) -> WorkingMemory:
    """Facts files: one entry per line. `attribute = number` binds a value,
    anything else asserts a fact, optionally weighted by a trailing
    `CF 0.7`. Blank lines and # comments are skipped."""
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" in line:
            attribute, _, value = line.partition("=")
            wm.bind(attribute.strip(), value.strip())
            continue
        m = _FACT_CF.match(line)
        if m:
            wm.assert_fact(m.group(1), m.group(2))
        else:
            wm.assert_fact(line)
    return wm


def _print_effect(step, effect) -> None:
    if isinstance(effect, FactEffect):
        suffix = " [action]" if effect.action else ""
        print(f"cycle {step.cycle}: {step.rule_id} => "
              f"{effect.fact} (cf {effect.cf}){suffix}")
    elif isinstance(effect, ValueEffect):
        print(f"cycle {step.cycle}: {step.rule_id} => "
              f"{effect.attribute} = {effect.value}")


def _format_proof(node, indent: int = 0) -> str:
    tag = f"[rule {node.via}]" if node.via else "[given]"
    lines = ["  " * indent + f"{node.goal}  {tag}"]
    for child in node.children:
        lines.append(_format_proof(child, indent + 1))
    return "\n".join(lines)


def _run_forward(ruleset, wm, args) -> int:
    final, trace = forward_chain(ruleset, wm)
    for step in trace.steps:
        if step.error:
            print(f"cycle {step.cycle}: {step.rule_id} failed: {step.error}")
            continue
        for effect in step.applied:
            _print_effect(step, effect)
    if trace.cycle_limit_exceeded:
        print("warning: cycle limit exceeded", file=sys.stderr)
    derived = trace.derived_facts()
    print("derived: " + (", ".join(derived) if derived else "nothing"))
    if args.explain:
        try:
            print(format_explanation(explain(trace, args.explain)))
        except NotDerivedError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return FINDINGS
    return OK


def _parse_answer(raw: str):
    """yes/no/a bare certainty; None means the fact stays unknown."""
    answer = raw.strip().lower()
    if answer in ("y", "yes", "true"):
        return Decimal(1)
    if answer in ("n", "no", "false", ""):
        return None
    try:
        return Decimal(answer)
    except InvalidOperation:
        return None


def _run_backward(ruleset, wm, args) -> int:
    result = backward_chain(ruleset, wm, args.goal)
    asked: set[str] = set()
    while args.ask and result.status == "unknowns":
        fresh = [u for u in result.unknowns if u not in asked]
        if not fresh:
            break
        answered = False
        for unknown in fresh:
            print(f"? {unknown}")
            line = sys.stdin.readline()
            if not line:
                asked.update(fresh)
                break
            asked.add(unknown)
            cf = _parse_answer(line)
            if cf is not None and 0 < cf <= 1:
                wm.assert_fact(unknown, cf)
                answered = True
        if not answered:
            break
        result = backward_chain(ruleset, wm, args.goal)
    if result.proved:
        print(f"PROVED {args.goal} (cf {result.cf})")
        print(_format_proof(result.tree))
    else:
        print(f"UNPROVABLE {args.goal}")
        if result.unknowns:
            print("unknowns: " + ", ".join(result.unknowns))
    return OK


def cmd_infer(args) -> int:
    if args.mode == "backward" and not args.goal:
        print("error: --goal is required with --mode backward", file=sys.stderr)
        return USAGE
    ruleset = parse_rules(_read(args.rules))
    wm = WorkingMemory()
    if args.facts:
        load_facts(_read(args.facts), wm)
    if args.mode == "forward":
        return _run_forward(ruleset, wm, args)
    return _run_backward(ruleset, wm, args)


# ---------------------------------------------------------------------------
# triples
# ---------------------------------------------------------------------------

_DATE_TOKEN = re.compile(r"\d{4}-\d{2}-\d{2}$")


def parse_pattern_term(token: str):
    """?var stays a variable; quoted text, dates and numbers become typed
    terms; anything else is a uri."""
    if token.startswith("?"):
        return token
    if len(token) >= 2 and token[0] == '"' and token[-1] == '"':
        return Term.text(token[1:-1])
    if _DATE_TOKEN.match(token):
        return Term.date(token)
    try:
        return Term.num(token)
    except TripleError:
        return Term.uri(token)


def _parse_pattern(text: str):
    tokens = shlex.split(text)
    if len(tokens) != 3:
        raise KnowledgeError(f"pattern needs 3 terms, got {len(tokens)}: {text!r}")
    return tuple(parse_pattern_term(token) for token in tokens)


def _parse_filter(text: str):
    tokens = shlex.split(text)
    if len(tokens) != 3 or not tokens[0].startswith("?"):
        raise KnowledgeError(f"filter needs '?var op number': {text!r}")
    try:
        bound = Decimal(tokens[2])
    except InvalidOperation:
        raise KnowledgeError(f"filter bound {tokens[2]!r} is not numeric") from None
    return tokens[0], tokens[1], bound


def _term_field(term: Term) -> str:
    return str(term.value)


def cmd_triples_load(args) -> int:
    store = load_triples(_read(args.file))
    print(f"{len(store)} triples")
    return OK


def cmd_triples_query(args) -> int:
    store = load_triples(_read(args.file))
    try:
        patterns = [_parse_pattern(p) for p in args.pattern]
        filters = [_parse_filter(f) for f in args.filter]
    except KnowledgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE
    rows = store.query(patterns, filters)
    variables = []
    for pattern in patterns:
        for slot in pattern:
            if isinstance(slot, str) and slot not in variables:
                variables.append(slot)
    print("\t".join(variables))
    for row in rows:
        print("\t".join(_term_field(row[v]) for v in variables))
    return OK


def cmd_triples_closure(args) -> int:
    store = load_triples(_read(args.file))
    if args.ontology:
        spec = export_inference_spec(parse_ontology(_read(args.ontology)))
    else:
        spec = InferenceSpec()
    stats = store.materialize(spec)
    print(f"+{stats.added} inferred in {stats.iterations} iterations")
    if args.out:
        Path(args.out).write_text(emit_triples(store), encoding="utf-8")
    return OK


def cmd_triples_stats(args) -> int:
    store = load_triples(_read(args.file))
    subjects, predicates, objects = set(), set(), set()
    for _, s, p, o in store.triples():
        subjects.add(s)
        predicates.add(p)
        objects.add(o)
    print(f"triples\t{len(store)}")
    print(f"subjects\t{len(subjects)}")
    print(f"predicates\t{len(predicates)}")
    print(f"objects\t{len(objects)}")
    return OK


# ---------------------------------------------------------------------------
# publish
# ---------------------------------------------------------------------------

def cmd_publish(args) -> int:
    kb = parse_kb(_read(args.kb))
    ont = parse_ontology(_read(args.ontology)) if args.ontology else None
    template = (parse_template(_read(args.template)) if args.template
                else PageTemplate())
    if args.check:
        diffs = check_site(kb, ont, template, args.outdir, jobs=args.jobs)
        print(f"{len(diffs)} differences")
        for path in diffs:
            print(path)
        return FINDINGS if diffs else OK
    manifest = build_site(kb, ont, template, args.outdir, jobs=args.jobs)
    root = Path(args.outdir)
    total = sum((root / entry.path).stat().st_size
                for entry in manifest.entries)
    total += (root / "manifest.json").stat().st_size
    print(f"{len(manifest.entries)} files, {total} bytes")
    return OK


# ---------------------------------------------------------------------------
# convert
# ---------------------------------------------------------------------------

def cmd_convert(args) -> int:
    text = _read(args.input)
    kb = parse_kb(text) if text.lstrip().startswith("<") else None
    if args.to == "kt-xml":
        out = emit_kb(kb if kb is not None else triples_to_kb(load_triples(text)))
    else:
        store = kb_to_triples(kb) if kb is not None else load_triples(text)
        out = emit_triples(store)
    if args.out:
        Path(args.out).write_text(out, encoding="utf-8")
    else:
        sys.stdout.write(out)
    return OK


# ---------------------------------------------------------------------------
# Wiring
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="knowkit",
        description="Knowledge-base validation, inference, triple queries "
                    "and Knowledge Web publishing.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a knowledge base")
    p.add_argument("kb", help="KT-XML knowledge base")
    p.add_argument("--ontology", help="ontology file for semantic checks")
    p.add_argument("--format", choices=("text", "tsv"), default="text")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("infer", help="run the rule engine")
    p.add_argument("rules", help="rule file")
    p.add_argument("--facts", help="initial facts and bindings")
    p.add_argument("--mode", choices=("forward", "backward"), default="forward")
    p.add_argument("--goal", help="goal fact for backward chaining")
    p.add_argument("--explain", metavar="FACT",
                   help="print the explanation tree for a derived fact")
    p.add_argument("--ask", action="store_true",
                   help="prompt for unknowns on standard input")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("triples", help="triple store operations")
    tsub = p.add_subparsers(dest="subcommand", required=True)
    t = tsub.add_parser("load", help="parse a triples file and count it")
    t.add_argument("file")
    t.set_defaults(func=cmd_triples_load)
    t = tsub.add_parser("query", help="run a conjunctive query")
    t.add_argument("file")
    t.add_argument("--pattern", action="append", required=True,
                   help="'s p o' with ?vars; repeat for joins")
    t.add_argument("--filter", action="append", default=[],
                   help="'?var op number' numeric guard")
    t.set_defaults(func=cmd_triples_query)
    t = tsub.add_parser("closure", help="materialize inferences")
    t.add_argument("file")
    t.add_argument("--ontology", help="ontology exporting the inference spec")
    t.add_argument("--out", help="write the closed store here")
    t.set_defaults(func=cmd_triples_closure)
    t = tsub.add_parser("stats", help="index sizes")
    t.add_argument("file")
    t.set_defaults(func=cmd_triples_stats)

    p = sub.add_parser("publish", help="build a Knowledge Web")
    p.add_argument("kb", help="KT-XML knowledge base")
    p.add_argument("--outdir", required=True)
    p.add_argument("--ontology")
    p.add_argument("--template", help="page template (JSON)")
    p.add_argument("--check", action="store_true",
                   help="compare a fresh build against the site on disk")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.set_defaults(func=cmd_publish)

    p = sub.add_parser("convert", help="convert between KT-XML and KT-Triples")
    p.add_argument("input")
    p.add_argument("--to", required=True, choices=("kt-xml", "kt-triples"))
    p.add_argument("--out", help="output file (default standard output)")
    p.set_defaults(func=cmd_convert)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return OK if exc.code in (0, None) else USAGE
    try:
        return args.func(args)
    except PublishError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FINDINGS
    except KnowledgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return BAD_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return BAD_INPUT
