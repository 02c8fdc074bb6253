"""Triple store with conjunctive queries and materialized inference.

Statements are (subject, predicate, object) over typed terms. Terms are
interned to integers once and all indexing works on the integers; three
nested-map permutation indexes (SPO, POS, OSP) give direct candidate
enumeration for every bound-slot combination. Triple ids are 1-based and
follow insertion order; re-inserting an existing statement returns the
existing id, so loading the same data twice cannot duplicate.

A statement about a statement is made by reifying a triple id into a
``ref`` term and using that as a subject (or object). Subjects are uris or
refs, never literals; predicates are always uris.

Inference is a forward fixpoint over a declarative spec: transitive
predicates, mutually inverse predicate pairs, class-definition rules
(membership in all listed classes implies membership in the defined class),
and general production rules (body patterns imply head templates).
Evaluation is semi-naive: each round only joins rows that touch the
previous round's new triples, so quiet regions of a large store cost
nothing. Derived triples carry provenance "inferred"; asserted statements
always shadow and are never removed.

Default values are a separate operation, not a rule family: an instance
missing an asserted value for an attribute predicate receives the default
declared on its nearest class (breadth-first up the class graph, ties
broken by lexicographic class uri).

The line format (one statement per line) is four TAB-separated fields:
subject, predicate, object, object-kind; object-kind is one of uri / num /
text / date / ref. Text objects escape backslash, TAB and LF as ``\\\\``,
``\\t``, ``\\n``. A subject that is a reified statement is written
``ref:<id>``. Lines starting ``#`` are comments. Files are UTF-8 with LF
line ends and end with a newline. Provenance is working state, not data,
and is not serialized.
"""

from __future__ import annotations

import datetime
import re
import time
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation

from .model import KnowledgeError

INSTANCE_OF = "instanceOf"
SUB_CLASS_OF = "subClassOf"

TERM_KINDS = ("uri", "num", "text", "date", "ref")


class TripleError(KnowledgeError):
    pass


class QueryError(KnowledgeError):
    pass


class ClosureLimitError(KnowledgeError):
    pass


@dataclass(frozen=True)
class Term:
    """Typed node: uri / num (exact decimal) / text / date / ref (triple id)."""

    kind: str
    value: object

    def __post_init__(self):
        if self.kind not in TERM_KINDS:
            raise TripleError(f"unknown term kind {self.kind!r}")

    @classmethod
    def uri(cls, value: str) -> "Term":
        value = str(value)
        if not value or any(c in value for c in "\t\n"):
            raise TripleError(f"bad uri {value!r}")
        return cls("uri", value)

    @classmethod
    def num(cls, value) -> "Term":
        try:
            return cls("num", Decimal(str(value)))
        except InvalidOperation:
            raise TripleError(f"bad numeric literal {value!r}") from None

    @classmethod
    def text(cls, value: str) -> "Term":
        return cls("text", str(value))

    @classmethod
    def date(cls, value: str) -> "Term":
        try:
            datetime.date.fromisoformat(value)
        except ValueError:
            raise TripleError(f"bad date {value!r} (want YYYY-MM-DD)") from None
        return cls("date", value)

    @classmethod
    def ref(cls, triple_id: int) -> "Term":
        if not isinstance(triple_id, int) or triple_id < 1:
            raise TripleError(f"bad triple id {triple_id!r}")
        return cls("ref", triple_id)

    def sort_key(self):
        if self.kind == "num":
            return (self.kind, "", self.value)
        if self.kind == "ref":
            return (self.kind, "", Decimal(self.value))
        return (self.kind, str(self.value), Decimal(0))


def is_variable(slot) -> bool:
    return isinstance(slot, str)


def _check_variable(slot: str) -> str:
    if not re.fullmatch(r"\?[A-Za-z_][A-Za-z0-9_]*", slot):
        raise QueryError(f"bad variable {slot!r} (want ?name); wrap constants in Term")
    return slot


@dataclass(frozen=True)
class QueryStats:
    rows: int
    full_scans: int


@dataclass(frozen=True)
class ClosureStats:
    added: int
    iterations: int
    wall_ms: float


@dataclass(frozen=True)
class DefaultValue:
    class_uri: str
    predicate: str
    value: Term


@dataclass(frozen=True)
class SpecRule:
    """Production rule: every body match instantiates the head templates.
    Head variables must occur in the body."""

    body: tuple
    head: tuple
    name: str = ""

    def __post_init__(self):
        body_vars = {s for pat in self.body for s in pat if is_variable(s)}
        for pat in self.body + self.head:
            if len(pat) != 3:
                raise TripleError(f"rule {self.name!r}: pattern {pat!r} is not a triple")
        for pat in self.head:
            for slot in pat:
                if is_variable(slot) and slot not in body_vars:
                    raise TripleError(
                        f"rule {self.name!r}: head variable {slot} not bound by the body")
        if not self.body:
            raise TripleError(f"rule {self.name!r} has an empty body")


@dataclass(frozen=True)
class InferenceSpec:
    """Declarative closure spec; normalized to production rules internally."""

    transitive: tuple = ()          # predicate uris
    inverse: tuple = ()             # (p, q) mutually inverse uri pairs
    class_rules: tuple = ()         # (defined class uri, member-of class uris)
    rules: tuple = ()               # SpecRule
    defaults: tuple = ()            # DefaultValue

    def normalized_rules(self) -> list[SpecRule]:
        out: list[SpecRule] = []
        for p in self.transitive:
            pred = Term.uri(p)
            out.append(SpecRule(
                body=(("?a", pred, "?b"), ("?b", pred, "?c")),
                head=(("?a", pred, "?c"),),
                name=f"transitive:{p}"))
        for p, q in self.inverse:
            tp, tq = Term.uri(p), Term.uri(q)
            out.append(SpecRule(body=(("?a", tp, "?b"),), head=(("?b", tq, "?a"),),
                                name=f"inverse:{p}->{q}"))
            out.append(SpecRule(body=(("?a", tq, "?b"),), head=(("?b", tp, "?a"),),
                                name=f"inverse:{q}->{p}"))
        instance_of = Term.uri(INSTANCE_OF)
        for defined, members in self.class_rules:
            if not members:
                raise TripleError(f"class rule {defined!r} lists no member classes")
            body = tuple(("?x", instance_of, Term.uri(m)) for m in members)
            out.append(SpecRule(body=body, head=(("?x", instance_of, Term.uri(defined)),),
                                name=f"class:{defined}"))
        out.extend(self.rules)
        return out


class TripleStore:
    def __init__(self):
        self._term_ids: dict[Term, int] = {}
        self._terms: list[Term] = []
        self._triples: list[tuple[int, int, int]] = []
        self._triple_ids: dict[tuple[int, int, int], int] = {}
        self._provenance: list[str] = []
        self._spo: dict[int, dict[int, set[int]]] = {}
        self._pos: dict[int, dict[int, set[int]]] = {}
        self._osp: dict[int, dict[int, set[int]]] = {}

    # -- terms ---------------------------------------------------------------

    def _intern(self, term: Term) -> int:
        tid = self._term_ids.get(term)
        if tid is None:
            tid = len(self._terms)
            self._term_ids[term] = tid
            self._terms.append(term)
        return tid

    def _term(self, tid: int) -> Term:
        return self._terms[tid]

    # -- statements ----------------------------------------------------------

    def insert(self, subject: Term, predicate: Term, obj: Term,
               provenance: str = "asserted") -> int:
        if provenance not in ("asserted", "inferred"):
            raise TripleError(f"bad provenance {provenance!r}")
        if subject.kind not in ("uri", "ref"):
            raise TripleError(f"subject must be a uri or a ref, got {subject.kind}")
        if predicate.kind != "uri":
            raise TripleError(f"predicate must be a uri, got {predicate.kind}")
        for term in (subject, obj):
            if term.kind == "ref" and not (1 <= term.value <= len(self._triples)):
                raise TripleError(f"ref to unknown triple id {term.value}")
        key = (self._intern(subject), self._intern(predicate), self._intern(obj))
        existing = self._triple_ids.get(key)
        if existing is not None:
            if provenance == "asserted":
                self._provenance[existing - 1] = "asserted"
            return existing
        self._triples.append(key)
        self._provenance.append(provenance)
        triple_id = len(self._triples)
        self._triple_ids[key] = triple_id
        s, p, o = key
        self._spo.setdefault(s, {}).setdefault(p, set()).add(o)
        self._pos.setdefault(p, {}).setdefault(o, set()).add(s)
        self._osp.setdefault(o, {}).setdefault(s, set()).add(p)
        return triple_id

    def reify(self, triple_id: int) -> Term:
        if not (1 <= triple_id <= len(self._triples)):
            raise TripleError(f"ref to unknown triple id {triple_id}")
        return Term.ref(triple_id)

    def __len__(self) -> int:
        return len(self._triples)

    def triple(self, triple_id: int) -> tuple[Term, Term, Term]:
        if not (1 <= triple_id <= len(self._triples)):
            raise TripleError(f"unknown triple id {triple_id}")
        s, p, o = self._triples[triple_id - 1]
        return (self._term(s), self._term(p), self._term(o))

    def provenance(self, triple_id: int) -> str:
        if not (1 <= triple_id <= len(self._triples)):
            raise TripleError(f"unknown triple id {triple_id}")
        return self._provenance[triple_id - 1]

    def contains(self, subject: Term, predicate: Term, obj: Term) -> bool:
        try:
            key = (self._term_ids[subject], self._term_ids[predicate], self._term_ids[obj])
        except KeyError:
            return False
        return key in self._triple_ids

    def triples(self):
        """All statements as (id, subject, predicate, object), id order."""
        for i, (s, p, o) in enumerate(self._triples, start=1):
            yield i, self._term(s), self._term(p), self._term(o)

    # -- conjunctive queries ---------------------------------------------------

    def query(self, patterns, filters=(), allow_disconnected: bool = False):
        rows, _ = self.query_with_stats(patterns, filters, allow_disconnected)
        return rows

    def query_with_stats(self, patterns, filters=(), allow_disconnected: bool = False):
        """Match conjunctive patterns; returns (rows, stats).

        Each pattern is (subject, predicate, object) mixing Terms with
        ``?var`` strings. Rows map variable names to Terms and come back
        deterministically sorted. Filters are (?var, op, number) numeric
        guards with op in < > <= >= = !=.
        """
        patterns = [tuple(pat) for pat in patterns]
        if not patterns:
            raise QueryError("no patterns")
        var_order: list[str] = []
        for pat in patterns:
            if len(pat) != 3:
                raise QueryError(f"pattern {pat!r} is not a triple")
            for slot in pat:
                if is_variable(slot):
                    _check_variable(slot)
                    if slot not in var_order:
                        var_order.append(slot)
                elif not isinstance(slot, Term):
                    raise QueryError(f"pattern slot {slot!r} is neither Term nor ?var")
        guards = self._compile_filters(filters, set(var_order))
        order = self._plan(patterns, allow_disconnected)

        rows: set[tuple] = set()
        full_scans = 0

        def extend(idx: int, binding: dict[str, int]):
            nonlocal full_scans
            if idx == len(order):
                rows.add(tuple(binding[v] for v in var_order))
                return
            pattern = patterns[order[idx]]
            fixed = []
            for slot in pattern:
                if is_variable(slot):
                    fixed.append(binding.get(slot))
                else:
                    tid = self._term_ids.get(slot)
                    if tid is None:
                        return  # constant term absent: no match possible
                    fixed.append(tid)
            scanned, candidates = self._candidates(*fixed)
            if scanned:
                full_scans += 1
            for s, p, o in candidates:
                new_binding = binding
                ok = True
                for slot, value in zip(pattern, (s, p, o)):
                    if not is_variable(slot):
                        continue
                    bound = new_binding.get(slot)
                    if bound is None:
                        if new_binding is binding:
                            new_binding = dict(binding)
                        new_binding[slot] = value
                    elif bound != value:
                        ok = False
                        break
                if not ok:
                    continue
                if not all(g(new_binding) for g in guards):
                    continue
                extend(idx + 1, new_binding)

        extend(0, {})
        decoded = [
            {v: self._term(t) for v, t in zip(var_order, row)}
            for row in sorted(rows, key=lambda r: tuple(self._term(t).sort_key() for t in r))
        ]
        return decoded, QueryStats(rows=len(decoded), full_scans=full_scans)

    def _compile_filters(self, filters, known_vars):
        import operator
        ops = {"<": operator.lt, ">": operator.gt, "<=": operator.le,
               ">=": operator.ge, "=": operator.eq, "!=": operator.ne}
        guards = []
        for var, op, bound in filters:
            _check_variable(var)
            if var not in known_vars:
                raise QueryError(f"filter variable {var} not used in any pattern")
            if op not in ops:
                raise QueryError(f"unknown filter operator {op!r}")
            bound = Decimal(str(bound))
            fn = ops[op]

            def guard(binding, var=var, fn=fn, bound=bound):
                tid = binding.get(var)
                if tid is None:
                    return True  # not bound yet; checked again once bound
                term = self._term(tid)
                return term.kind == "num" and fn(term.value, bound)

            guards.append(guard)
        return guards

    def _plan(self, patterns, allow_disconnected) -> list[int]:
        """Join order: most-constant pattern first, then always a pattern
        sharing a variable with what is already bound (connectivity)."""
        def pattern_vars(pat):
            return {s for s in pat if is_variable(s)}

        remaining = list(range(len(patterns)))
        remaining.sort(key=lambda i: (-sum(1 for s in patterns[i] if not is_variable(s)), i))
        order: list[int] = []
        bound: set[str] = set()
        while remaining:
            pick = None
            for i in remaining:
                pv = pattern_vars(patterns[i])
                if not pv or not bound or pv & bound:
                    pick = i
                    break
            if pick is None:
                if not allow_disconnected:
                    raise QueryError(
                        "pattern graph is disconnected (cross product); "
                        "pass allow_disconnected=True to run it anyway")
                pick = remaining[0]
            order.append(pick)
            bound |= pattern_vars(patterns[pick])
            remaining.remove(pick)
        return order

    def _candidates(self, s, p, o):
        """Candidate (s,p,o) int triples for one pattern; any of s/p/o may be
        None (unbound). Returns (was_full_scan, iterator)."""
        if s is not None and p is not None and o is not None:
            present = (s, p, o) in self._triple_ids
            return False, ([(s, p, o)] if present else [])
        if s is not None and p is not None:
            return False, [(s, p, o2) for o2 in self._spo.get(s, {}).get(p, ())]
        if p is not None and o is not None:
            return False, [(s2, p, o) for s2 in self._pos.get(p, {}).get(o, ())]
        if s is not None and o is not None:
            return False, [(s, p2, o) for p2 in self._osp.get(o, {}).get(s, ())]
        if s is not None:
            return False, [(s, p2, o2)
                           for p2, objs in self._spo.get(s, {}).items() for o2 in objs]
        if p is not None:
            return False, [(s2, p, o2)
                           for o2, subs in self._pos.get(p, {}).items() for s2 in subs]
        if o is not None:
            return False, [(s2, p2, o)
                           for s2, preds in self._osp.get(o, {}).items() for p2 in preds]
        return True, list(self._triples)

    # -- materialized inference ------------------------------------------------

    def materialize(self, spec: InferenceSpec, max_iterations: int = 10_000) -> ClosureStats:
        """Forward fixpoint of the spec's rules, semi-naive. Every derived
        triple is inserted with provenance "inferred". Defaults are not
        applied here; see apply_defaults."""
        started = time.perf_counter()
        rules = spec.normalized_rules()
        added_total = 0
        delta: set[tuple[int, int, int]] = set(self._triples)
        iterations = 0
        while delta:
            iterations += 1
            if iterations > max_iterations:
                raise ClosureLimitError(
                    f"closure did not converge within {max_iterations} iterations")
            new_delta: set[tuple[int, int, int]] = set()
            for rule in rules:
                for binding in self._rule_matches(rule, delta):
                    for head in rule.head:
                        triple = tuple(
                            binding[slot] if is_variable(slot) else self._intern(slot)
                            for slot in head)
                        if triple not in self._triple_ids:
                            subject, predicate, obj = (self._term(t) for t in triple)
                            self.insert(subject, predicate, obj, provenance="inferred")
                            new_delta.add(triple)
            added_total += len(new_delta)
            delta = new_delta
        wall_ms = (time.perf_counter() - started) * 1000.0
        return ClosureStats(added=added_total, iterations=iterations, wall_ms=wall_ms)

    def _rule_matches(self, rule: SpecRule, delta):
        """Body matches where at least one atom lies in delta: evaluate once
        per delta position, pinning that atom to delta rows and joining it
        first. Matches touching delta at two positions surface twice; the
        idempotent insert absorbs that."""
        body = rule.body
        for delta_idx in range(len(body)):
            order = _body_order(body, delta_idx)
            yield from self._match_body(body, order, 0, delta_idx, delta, {})

    def _match_body(self, body, order, at, delta_idx, delta, binding):
        if at == len(order):
            yield binding
            return
        index = order[at]
        pattern = body[index]
        fixed = []
        for slot in pattern:
            if is_variable(slot):
                fixed.append(binding.get(slot))
            else:
                tid = self._term_ids.get(slot)
                if tid is None:
                    return
                fixed.append(tid)
        if index == delta_idx:
            f_s, f_p, f_o = fixed
            candidates = (
                t for t in delta
                if (f_s is None or t[0] == f_s)
                and (f_p is None or t[1] == f_p)
                and (f_o is None or t[2] == f_o))
        else:
            _, candidates = self._candidates(*fixed)
        for s, p, o in candidates:
            new_binding = dict(binding)
            ok = True
            for slot, value in zip(pattern, (s, p, o)):
                if not is_variable(slot):
                    continue
                bound = new_binding.get(slot)
                if bound is None:
                    new_binding[slot] = value
                elif bound != value:
                    ok = False
                    break
            if ok:
                yield from self._match_body(body, order, at + 1, delta_idx, delta, new_binding)

    # -- defaults ----------------------------------------------------------------

    def apply_defaults(self, defaults, instance_of: str = INSTANCE_OF,
                       sub_class_of: str = SUB_CLASS_OF) -> int:
        """Give instances the default values declared on their classes.

        An instance that already has any asserted or inferred value for the
        predicate keeps it. Otherwise the default on the nearest class wins:
        breadth-first from the direct classes up sub-class links, ties at
        equal depth broken by lexicographic class uri. Returns the number of
        triples added."""
        by_class: dict[str, dict[str, Term]] = {}
        for d in defaults:
            per = by_class.setdefault(d.class_uri, {})
            if d.predicate in per:
                raise TripleError(
                    f"two defaults for {d.predicate!r} on class {d.class_uri!r}")
            per[d.predicate] = d.value

        inst_tid = self._term_ids.get(Term.uri(instance_of))
        if inst_tid is None:
            return 0
        sub_tid = self._term_ids.get(Term.uri(sub_class_of))

        parents: dict[int, list[int]] = {}
        if sub_tid is not None:
            for s, objs in ((s, self._spo.get(s, {}).get(sub_tid)) for s in self._spo):
                if objs:
                    parents[s] = sorted(objs, key=lambda t: str(self._term(t).value))

        added = 0
        instances = sorted(
            {s for o, subs in self._pos.get(inst_tid, {}).items() for s in subs},
            key=lambda t: str(self._term(t).value))
        for instance in instances:
            direct = self._spo.get(instance, {}).get(inst_tid, set())
            chosen: dict[str, Term] = {}
            depth = sorted(direct, key=lambda t: str(self._term(t).value))
            seen = set(depth)
            while depth:
                for class_tid in depth:
                    class_uri = self._term(class_tid)
                    if class_uri.kind != "uri":
                        continue
                    for predicate, value in by_class.get(class_uri.value, {}).items():
                        if predicate not in chosen:
                            chosen[predicate] = value
                nxt = []
                for class_tid in depth:
                    for parent in parents.get(class_tid, ()):
                        if parent not in seen:
                            seen.add(parent)
                            nxt.append(parent)
                depth = sorted(nxt, key=lambda t: str(self._term(t).value))
            subject = self._term(instance)
            for predicate, value in chosen.items():
                pred_term = Term.uri(predicate)
                pred_tid = self._term_ids.get(pred_term)
                if pred_tid is not None and self._spo.get(instance, {}).get(pred_tid):
                    continue  # any existing value shadows the default
                self.insert(subject, pred_term, value, provenance="inferred")
                added += 1
        return added


def _body_order(body, delta_idx) -> list[int]:
    """Join order for one delta position: the pinned atom first, then atoms
    connected through shared variables, disconnected ones last."""
    def vars_of(i):
        return {s for s in body[i] if is_variable(s)}

    order = [delta_idx]
    bound = vars_of(delta_idx)
    remaining = [i for i in range(len(body)) if i != delta_idx]
    while remaining:
        pick = next((i for i in remaining if vars_of(i) & bound or not vars_of(i)),
                    remaining[0])
        order.append(pick)
        bound |= vars_of(pick)
        remaining.remove(pick)
    return order


# ---------------------------------------------------------------------------
# Line format
# ---------------------------------------------------------------------------

def _escape_text(s: str) -> str:
    return s.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")


def _unescape_text(s: str, line_no: int) -> str:
    out = []
    i = 0
    while i < len(s):
        c = s[i]
        if c != "\\":
            out.append(c)
            i += 1
            continue
        if i + 1 >= len(s):
            raise TripleError(f"line {line_no}: dangling escape")
        nxt = s[i + 1]
        if nxt == "\\":
            out.append("\\")
        elif nxt == "t":
            out.append("\t")
        elif nxt == "n":
            out.append("\n")
        else:
            raise TripleError(f"line {line_no}: unknown escape \\{nxt}")
        i += 2
    return "".join(out)


def emit_triples(store: TripleStore) -> str:
    """Serialize all statements (asserted and inferred alike) in id order."""
    lines = []
    for triple_id, subject, predicate, obj in store.triples():
        if subject.kind == "ref":
            subject_field = f"ref:{subject.value}"
        else:
            subject_field = subject.value
        if obj.kind == "uri" or obj.kind == "date":
            object_field = obj.value
        elif obj.kind == "num":
            object_field = str(obj.value)
        elif obj.kind == "ref":
            object_field = str(obj.value)
        else:
            object_field = _escape_text(obj.value)
        lines.append(f"{subject_field}\t{predicate.value}\t{object_field}\t{obj.kind}")
    return "\n".join(lines) + "\n" if lines else ""


def load_triples(text: str, store: TripleStore | None = None) -> TripleStore:
    """Parse the line format into a store (a fresh one unless given)."""
    store = store if store is not None else TripleStore()
    for line_no, line in enumerate(text.split("\n"), start=1):
        if not line or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise TripleError(
                f"line {line_no}: want 4 TAB-separated fields, got {len(fields)}")
        subject_field, predicate_field, object_field, kind = fields
        if subject_field.startswith("ref:"):
            try:
                subject = Term.ref(int(subject_field[4:]))
            except ValueError:
                raise TripleError(f"line {line_no}: bad subject ref {subject_field!r}") from None
        else:
            subject = Term.uri(subject_field)
        predicate = Term.uri(predicate_field)
        if kind == "uri":
            obj = Term.uri(object_field)
        elif kind == "num":
            try:
                obj = Term.num(object_field)
            except TripleError:
                raise TripleError(f"line {line_no}: bad number {object_field!r}") from None
        elif kind == "text":
            obj = Term.text(_unescape_text(object_field, line_no))
        elif kind == "date":
            try:
                obj = Term.date(object_field)
            except TripleError:
                raise TripleError(f"line {line_no}: bad date {object_field!r}") from None
        elif kind == "ref":
            try:
                obj = Term.ref(int(object_field))
            except ValueError:
                raise TripleError(f"line {line_no}: bad ref {object_field!r}") from None
        else:
            raise TripleError(f"line {line_no}: unknown object kind {kind!r}")
        try:
            store.insert(subject, predicate, obj)
        except TripleError as exc:
            raise TripleError(f"line {line_no}: {exc}") from None
    return store
