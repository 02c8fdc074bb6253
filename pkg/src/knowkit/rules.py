"""Production rules, working memory, and forward/backward chaining.

Rule files are UTF-8 text. A rule is one paragraph (blank lines separate
paragraphs) or one ``;``-terminated statement:

    rule      := ["RULE" name ["CF" decimal] ":"] "IF" cond "THEN" cons {"AND" cons}
    cond      := operand {("AND" | "OR") operand}     -- one connective per level
    operand   := "(" cond ")" | comparison | proposition
    comparison:= words op number ; op := "<" | ">" | "=" | "<=" | ">="
    cons      := words "=" arith | proposition-or-action
    arith     := term {("+"|"-") term} ; term := factor {("*"|"/") factor}
    factor    := number | words | "(" arith ")"

Mixing AND with OR at one parenthesization level is a parse error, not a
precedence guess. Keywords (RULE, CF, IF, THEN, AND, OR) are
case-insensitive and reserved: they cannot occur inside a proposition.
Hyphens bind into words between letters ("P-valve"); a spaced ``-`` is
subtraction. ``x`` and ``÷`` are accepted for ``*`` and ``/``.

Certainties are exact decimals. Antecedents aggregate by min, a firing
concludes at rule-cf x condition-cf, and repeated support for one fact
combines by the complement product (see :func:`combine_cf`); these
conventions are documented rather than prescribed by any one classic shell.
Numeric state is exact rational arithmetic, so ``> 20`` style thresholds
compare exactly and division never rounds.

There is no negation: the language is monotone, which is what makes
forward/backward agreement and termination provable. Actions ("open the
U-valve") are terminal facts: a consequent proposition that no rule ever
tests is classified as an action and additionally appended to the working
memory's action log when derived. No side effects are executed.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from decimal import Decimal
from fractions import Fraction

from .model import KnowledgeError, fraction_to_literal

KEYWORDS = {"rule", "cf", "if", "then", "and", "or"}

ONE = Decimal(1)
ZERO = Decimal(0)


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Token:
    kind: str  # word / number / op / punct
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""(?P<ws>[^\S\n]+)
      | (?P<number>[0-9]+(?:\.[0-9]+)?)
      | (?P<word>[A-Za-z_](?:[A-Za-z0-9_']|-(?=[A-Za-z]))*)
      | (?P<op><=|>=|[<>=])
      | (?P<punct>[()+\-*/;:]|×|÷)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Diagnostic:
    line: int
    col: int
    message: str

    def __str__(self):
        return f"line {self.line}, col {self.col}: {self.message}"


class RuleParseError(KnowledgeError):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics))


def _lex_line(text: str, line_no: int, out: list[Token], errors: list[Diagnostic]) -> None:
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            errors.append(Diagnostic(line_no, pos + 1, f"unexpected character {text[pos]!r}"))
            pos += 1
            continue
        pos = m.end()
        kind = m.lastgroup
        if kind == "ws":
            continue
        tok = m.group()
        if kind == "punct" and tok in ("×", "÷"):
            tok = "*" if tok == "×" else "/"
        out.append(Token(kind, tok, line_no, m.start() + 1))


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Proposition:
    fact: str


@dataclass(frozen=True)
class Comparison:
    attribute: str
    op: str
    literal: Decimal


@dataclass(frozen=True)
class Conjunction:
    parts: tuple


@dataclass(frozen=True)
class Disjunction:
    parts: tuple


@dataclass(frozen=True)
class Num:
    value: Decimal


@dataclass(frozen=True)
class Ref:
    attribute: str


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class AssertFact:
    fact: str


@dataclass(frozen=True)
class SetValue:
    attribute: str
    expression: object


@dataclass(frozen=True)
class Rule:
    id: str
    condition: object
    consequents: tuple
    cf: Decimal = ONE
    order: int = 0

    def __post_init__(self):
        if not (ZERO <= self.cf <= ONE):
            raise KnowledgeError(f"rule {self.id!r}: cf {self.cf} outside [0,1]")
        if not self.consequents:
            raise KnowledgeError(f"rule {self.id!r} has no consequents")


def _condition_propositions(cond) -> set[str]:
    if isinstance(cond, Proposition):
        return {cond.fact}
    if isinstance(cond, (Conjunction, Disjunction)):
        out: set[str] = set()
        for p in cond.parts:
            out |= _condition_propositions(p)
        return out
    return set()


def _expression_refs(expr) -> set[str]:
    if isinstance(expr, Ref):
        return {expr.attribute}
    if isinstance(expr, BinOp):
        return _expression_refs(expr.left) | _expression_refs(expr.right)
    return set()


def _condition_attributes(cond) -> set[str]:
    if isinstance(cond, Comparison):
        return {cond.attribute}
    if isinstance(cond, (Conjunction, Disjunction)):
        out: set[str] = set()
        for p in cond.parts:
            out |= _condition_attributes(p)
        return out
    return set()


@dataclass(frozen=True)
class RuleSet:
    """Immutable, shareable between concurrent chaining runs."""

    rules: tuple[Rule, ...]
    action_facts: frozenset[str] = field(default=frozenset())

    @classmethod
    def of(cls, rules) -> "RuleSet":
        rules = tuple(replace(r, order=i) for i, r in enumerate(rules))
        tested: set[str] = set()
        for r in rules:
            tested |= _condition_propositions(r.condition)
        actions = {
            c.fact
            for r in rules
            for c in r.consequents
            if isinstance(c, AssertFact) and c.fact not in tested
        }
        return cls(rules=rules, action_facts=frozenset(actions))

    def concluding(self, fact: str) -> list[Rule]:
        return [
            r for r in self.rules
            if any(isinstance(c, AssertFact) and c.fact == fact for c in r.consequents)
        ]

    def setting(self, attribute: str) -> list[Rule]:
        return [
            r for r in self.rules
            if any(isinstance(c, SetValue) and c.attribute == attribute for c in r.consequents)
        ]


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _RuleParser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> Token | None:
        tok = self.peek()
        if tok is not None:
            self.pos += 1
        return tok

    def at_keyword(self, *names: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind == "word" and tok.text.lower() in names

    def expect_keyword(self, name: str) -> Token:
        tok = self.next()
        if tok is None or tok.kind != "word" or tok.text.lower() != name:
            raise self.fail(tok, f"expected {name.upper()}")
        return tok

    def fail(self, tok: Token | None, message: str) -> RuleParseError:
        if tok is None:
            last = self.tokens[-1] if self.tokens else Token("punct", "", 1, 1)
            return RuleParseError([Diagnostic(last.line, last.col + len(last.text), message)])
        return RuleParseError([Diagnostic(tok.line, tok.col, message)])

    def words(self) -> str:
        """A run of non-keyword words joined by single spaces."""
        parts = []
        while True:
            tok = self.peek()
            if tok is None or tok.kind != "word" or tok.text.lower() in KEYWORDS:
                break
            parts.append(self.next().text)
        if not parts:
            raise self.fail(self.peek(), "expected a word")
        return " ".join(parts)

    # -- conditions --

    def condition(self) -> object:
        first = self.operand()
        operands = [first]
        connective = None
        while self.at_keyword("and", "or"):
            tok = self.next()
            kind = tok.text.lower()
            if connective is None:
                connective = kind
            elif connective != kind:
                raise RuleParseError([Diagnostic(
                    tok.line, tok.col,
                    "mixed AND/OR needs parentheses to fix the grouping")])
            operands.append(self.operand())
        if connective is None:
            return first
        parts = tuple(operands)
        return Conjunction(parts) if connective == "and" else Disjunction(parts)

    def operand(self) -> object:
        tok = self.peek()
        if tok is None:
            raise self.fail(tok, "expected a condition")
        if tok.kind == "punct" and tok.text == "(":
            self.next()
            inner = self.condition()
            closing = self.next()
            if closing is None or closing.text != ")":
                raise self.fail(closing, "expected ')'")
            return inner
        name = self.words()
        nxt = self.peek()
        if nxt is not None and nxt.kind == "op":
            op = self.next().text
            num = self.next()
            if num is None or num.kind != "number":
                raise self.fail(num, f"expected a number after {op!r}")
            trailing = self.peek()
            if trailing is not None and trailing.kind == "number":
                raise self.fail(trailing, "unexpected second number in comparison")
            return Comparison(name, op, Decimal(num.text))
        return Proposition(name)

    # -- consequents --

    def consequent(self) -> object:
        name = self.words()
        tok = self.peek()
        if tok is not None and tok.kind == "op" and tok.text == "=":
            self.next()
            return SetValue(name, self.arith())
        if tok is not None and tok.kind == "op":
            raise self.fail(tok, f"operator {tok.text!r} not allowed in a consequent")
        return AssertFact(name)

    def arith(self):
        node = self.term()
        while self.peek() is not None and self.peek().text in ("+", "-"):
            op = self.next().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek() is not None and self.peek().text in ("*", "/"):
            op = self.next().text
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        tok = self.peek()
        if tok is None:
            raise self.fail(tok, "expected an arithmetic operand")
        if tok.kind == "number":
            self.next()
            return Num(Decimal(tok.text))
        if tok.kind == "punct" and tok.text == "(":
            self.next()
            inner = self.arith()
            closing = self.next()
            if closing is None or closing.text != ")":
                raise self.fail(closing, "expected ')' in expression")
            return inner
        if tok.kind == "word" and tok.text.lower() not in KEYWORDS:
            return Ref(self.words())
        raise self.fail(tok, "expected a number, attribute or '('")

    # -- whole rule --

    def rule(self, default_id: str) -> Rule:
        rule_id = default_id
        cf = ONE
        if self.at_keyword("rule"):
            self.next()
            name_tok = self.next()
            if name_tok is None or name_tok.kind not in ("word", "number"):
                raise self.fail(name_tok, "expected a rule name after RULE")
            rule_id = name_tok.text
            if self.at_keyword("cf"):
                self.next()
                cf_tok = self.next()
                if cf_tok is None or cf_tok.kind != "number":
                    raise self.fail(cf_tok, "expected a decimal after CF")
                cf = Decimal(cf_tok.text)
                if not (ZERO <= cf <= ONE):
                    raise self.fail(cf_tok, f"CF {cf} outside [0,1]")
            colon = self.next()
            if colon is None or colon.text != ":":
                raise self.fail(colon, "expected ':' after the rule header")
        self.expect_keyword("if")
        condition = self.condition()
        self.expect_keyword("then")
        consequents = [self.consequent()]
        while self.at_keyword("and"):
            self.next()
            consequents.append(self.consequent())
        leftover = self.peek()
        if leftover is not None:
            raise self.fail(leftover, f"unexpected {leftover.text!r} after the consequents")
        return Rule(id=rule_id, condition=condition, consequents=tuple(consequents), cf=cf)


def parse_rules(text: str) -> RuleSet:
    """Parse a rule file into a RuleSet; raises RuleParseError with all
    per-rule diagnostics collected."""
    lines = text.split("\n")
    paragraphs: list[list[Token]] = []
    current: list[Token] = []
    lex_errors: list[Diagnostic] = []
    for i, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            if current:
                paragraphs.append(current)
                current = []
            continue
        _lex_line(line, i, current, lex_errors)
    if current:
        paragraphs.append(current)
    if lex_errors:
        raise RuleParseError(lex_errors)

    statements: list[list[Token]] = []
    for para in paragraphs:
        stmt: list[Token] = []
        for tok in para:
            if tok.kind == "punct" and tok.text == ";":
                if stmt:
                    statements.append(stmt)
                stmt = []
            else:
                stmt.append(tok)
        if stmt:
            statements.append(stmt)

    rules: list[Rule] = []
    diagnostics: list[Diagnostic] = []
    for ordinal, stmt in enumerate(statements, start=1):
        parser = _RuleParser(stmt)
        try:
            rules.append(parser.rule(default_id=f"rule-{ordinal}"))
        except RuleParseError as exc:
            diagnostics.extend(exc.diagnostics)
    if diagnostics:
        raise RuleParseError(diagnostics)
    seen_ids: set[str] = set()
    for r in rules:
        if r.id in seen_ids:
            raise RuleParseError([Diagnostic(1, 1, f"duplicate rule id {r.id!r}")])
        seen_ids.add(r.id)
    return RuleSet.of(rules)


# ---------------------------------------------------------------------------
# Working memory & trace
# ---------------------------------------------------------------------------

class WorkingMemory:
    """Case-specific state: graded facts, exact numeric bindings, and the
    refraction record of fired (rule, binding) pairs."""

    def __init__(self, facts=None, bindings=None):
        self.facts: dict[str, Decimal] = {}
        self.bindings: dict[str, Fraction] = {}
        self.fired: set[tuple[str, str]] = set()
        self.action_log: list[str] = []
        for fact, cf in (facts or {}).items():
            self.assert_fact(fact, cf)
        for attr, value in (bindings or {}).items():
            self.bind(attr, value)

    def assert_fact(self, fact: str, cf=ONE) -> None:
        cf = Decimal(str(cf))
        if not (ZERO < cf <= ONE):
            raise KnowledgeError(f"certainty for {fact!r} must be in (0,1], got {cf}")
        self.facts[fact] = cf

    def bind(self, attribute: str, value) -> None:
        self.bindings[attribute] = Fraction(str(value)) if not isinstance(value, Fraction) else value

    def certainty(self, fact: str) -> Decimal:
        return self.facts.get(fact, ZERO)

    def copy(self) -> "WorkingMemory":
        wm = WorkingMemory()
        wm.facts = dict(self.facts)
        wm.bindings = dict(self.bindings)
        wm.fired = set(self.fired)
        wm.action_log = list(self.action_log)
        return wm

    def canonical(self) -> str:
        """Deterministic serialization used by replay equality checks."""
        lines = []
        for fact in sorted(self.facts):
            lines.append(f"fact\t{fact}\t{self.facts[fact]}")
        for attr in sorted(self.bindings):
            lines.append(f"bind\t{attr}\t{fraction_to_literal(self.bindings[attr])}")
        for action in self.action_log:
            lines.append(f"action\t{action}")
        return "\n".join(lines) + "\n"

    def __eq__(self, other):
        return isinstance(other, WorkingMemory) and self.canonical() == other.canonical()


@dataclass(frozen=True)
class MatchedFact:
    fact: str
    cf: Decimal


@dataclass(frozen=True)
class MatchedComparison:
    attribute: str
    op: str
    literal: str
    observed: str


@dataclass(frozen=True)
class FactEffect:
    fact: str
    cf: Decimal
    action: bool = False


@dataclass(frozen=True)
class ValueEffect:
    attribute: str
    value: str  # canonical numeric literal


@dataclass(frozen=True)
class TraceStep:
    cycle: int
    rule_id: str
    matched: tuple
    applied: tuple
    certainty: Decimal
    error: str | None = None


@dataclass
class Trace:
    steps: list[TraceStep] = field(default_factory=list)
    initial_facts: dict[str, Decimal] = field(default_factory=dict)
    initial_bindings: dict[str, Fraction] = field(default_factory=dict)
    cycle_limit_exceeded: bool = False

    def derived_facts(self) -> list[str]:
        out = []
        for step in self.steps:
            for eff in step.applied:
                if isinstance(eff, FactEffect):
                    out.append(eff.fact)
        return out


# ---------------------------------------------------------------------------
# Certainty algebra
# ---------------------------------------------------------------------------

def combine_cf(existing, incoming) -> Decimal:
    """Combine independent support for one conclusion:
    existing + incoming * (1 - existing). Commutative, associative, monotone;
    0 is the identity and 1 absorbs. Exact under decimal arithmetic."""
    a, b = Decimal(str(existing)), Decimal(str(incoming))
    for v in (a, b):
        if not (ZERO <= v <= ONE):
            raise KnowledgeError(f"certainty {v} outside [0,1]")
    return a + b * (ONE - a)


# ---------------------------------------------------------------------------
# Condition evaluation
# ---------------------------------------------------------------------------

def _eval_condition(cond, wm: WorkingMemory):
    """Returns (satisfied, certainty, matched-leaves). Conjunction certainty
    is the min over parts, disjunction the max over its satisfied parts;
    leaves of every satisfied disjunct are kept for explanation."""
    if isinstance(cond, Proposition):
        cf = wm.certainty(cond.fact)
        if cf > ZERO:
            return True, cf, [MatchedFact(cond.fact, cf)]
        return False, ZERO, []
    if isinstance(cond, Comparison):
        observed = wm.bindings.get(cond.attribute)
        if observed is None:
            return False, ZERO, []
        lit = Fraction(str(cond.literal))
        ok = {
            "<": observed < lit,
            ">": observed > lit,
            "=": observed == lit,
            "<=": observed <= lit,
            ">=": observed >= lit,
        }[cond.op]
        if not ok:
            return False, ZERO, []
        leaf = MatchedComparison(cond.attribute, cond.op, str(cond.literal),
                                 fraction_to_literal(observed))
        return True, ONE, [leaf]
    if isinstance(cond, Conjunction):
        cf = ONE
        leaves = []
        for part in cond.parts:
            ok, part_cf, part_leaves = _eval_condition(part, wm)
            if not ok:
                return False, ZERO, []
            cf = min(cf, part_cf)
            leaves.extend(part_leaves)
        return True, cf, leaves
    if isinstance(cond, Disjunction):
        best = ZERO
        leaves = []
        any_ok = False
        for part in cond.parts:
            ok, part_cf, part_leaves = _eval_condition(part, wm)
            if ok:
                any_ok = True
                best = max(best, part_cf)
                leaves.extend(part_leaves)
        return any_ok, best, leaves
    raise KnowledgeError(f"unknown condition node {cond!r}")


class _DivisionByZero(Exception):
    pass


def _eval_expression(expr, bindings: dict[str, Fraction]) -> Fraction:
    if isinstance(expr, Num):
        return Fraction(str(expr.value))
    if isinstance(expr, Ref):
        if expr.attribute not in bindings:
            raise KnowledgeError(f"attribute {expr.attribute!r} is unbound")
        return bindings[expr.attribute]
    if isinstance(expr, BinOp):
        left = _eval_expression(expr.left, bindings)
        right = _eval_expression(expr.right, bindings)
        if expr.op == "+":
            return left + right
        if expr.op == "-":
            return left - right
        if expr.op == "*":
            return left * right
        if right == 0:
            raise _DivisionByZero()
        return left / right
    raise KnowledgeError(f"unknown expression node {expr!r}")


def _binding_signature(rule: Rule, wm: WorkingMemory) -> str:
    """The values this rule reads, canonicalized; refraction key component."""
    read = _condition_attributes(rule.condition)
    for c in rule.consequents:
        if isinstance(c, SetValue):
            read |= _expression_refs(c.expression)
    parts = []
    for attr in sorted(read):
        value = wm.bindings.get(attr)
        parts.append(f"{attr}={'?' if value is None else fraction_to_literal(value)}")
    return "|".join(parts)


# ---------------------------------------------------------------------------
# Forward chaining
# ---------------------------------------------------------------------------

def forward_chain(ruleset: RuleSet, wm: WorkingMemory, max_cycles: int = 10_000):
    """Run match-select-fire cycles until quiescence or max_cycles.

    One rule fires per cycle: the lowest file-order rule among satisfiable
    (rule, binding) pairs not yet in the refraction record. All consequents
    of the fired rule apply atomically; a division by zero aborts the whole
    firing and records an error step instead. The input memory is not
    mutated. Returns (final WorkingMemory, Trace).
    """
    if max_cycles < 1:
        raise KnowledgeError("max_cycles must be >= 1")
    state = wm.copy()
    trace = Trace(initial_facts=dict(wm.facts), initial_bindings=dict(wm.bindings))

    for cycle in range(1, max_cycles + 1):
        fired = _fire_one(ruleset, state, trace, cycle)
        if not fired:
            return state, trace
    # stopped by the cap: flag only if more could still fire
    if _find_firable(ruleset, state) is not None:
        trace.cycle_limit_exceeded = True
    return state, trace


def _find_firable(ruleset: RuleSet, state: WorkingMemory):
    for rule in ruleset.rules:
        signature = _binding_signature(rule, state)
        if (rule.id, signature) in state.fired:
            continue
        ok, cf, leaves = _eval_condition(rule.condition, state)
        if ok:
            return rule, signature, cf, leaves
    return None


def _fire_one(ruleset: RuleSet, state: WorkingMemory, trace: Trace, cycle: int) -> bool:
    found = _find_firable(ruleset, state)
    if found is None:
        return False
    rule, signature, cond_cf, leaves = found
    state.fired.add((rule.id, signature))
    conclusion_cf = rule.cf * cond_cf

    effects = []
    try:
        staged_bindings = dict(state.bindings)
        for consequent in rule.consequents:
            if isinstance(consequent, AssertFact):
                incoming = conclusion_cf
                updated = combine_cf(state.certainty(consequent.fact), incoming)
                is_action = consequent.fact in ruleset.action_facts
                effects.append(FactEffect(consequent.fact, updated, is_action))
            else:
                result = _eval_expression(consequent.expression, staged_bindings)
                staged_bindings[consequent.attribute] = result
                effects.append(ValueEffect(consequent.attribute, fraction_to_literal(result)))
    except _DivisionByZero:
        trace.steps.append(TraceStep(
            cycle=cycle, rule_id=rule.id, matched=tuple(leaves), applied=(),
            certainty=conclusion_cf, error="division by zero"))
        return True

    for eff in effects:
        if isinstance(eff, FactEffect):
            state.facts[eff.fact] = eff.cf
            if eff.action:
                state.action_log.append(eff.fact)
        else:
            state.bindings[eff.attribute] = Fraction(eff.value)
    trace.steps.append(TraceStep(
        cycle=cycle, rule_id=rule.id, matched=tuple(leaves),
        applied=tuple(effects), certainty=conclusion_cf))
    return True


def replay(trace: Trace, wm: WorkingMemory) -> WorkingMemory:
    """Re-apply a trace's recorded effects to an initial memory. Verifies
    each step's matched leaves still hold in the state preceding it."""
    state = wm.copy()
    for step in trace.steps:
        for leaf in step.matched:
            if isinstance(leaf, MatchedFact):
                if state.certainty(leaf.fact) <= ZERO:
                    raise KnowledgeError(
                        f"replay: step {step.cycle} antecedent {leaf.fact!r} does not hold")
            else:
                observed = state.bindings.get(leaf.attribute)
                if observed is None or fraction_to_literal(observed) != leaf.observed:
                    raise KnowledgeError(
                        f"replay: step {step.cycle} binding {leaf.attribute!r} drifted")
        for eff in step.applied:
            if isinstance(eff, FactEffect):
                state.facts[eff.fact] = eff.cf
                if eff.action:
                    state.action_log.append(eff.fact)
            else:
                state.bindings[eff.attribute] = Fraction(eff.value)
    return state


# ---------------------------------------------------------------------------
# Backward chaining
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProofNode:
    goal: str
    via: str | None  # rule id, or None for a given leaf
    cf: Decimal
    children: tuple = ()


@dataclass
class ProofResult:
    status: str  # proved | unprovable | unknowns
    cf: Decimal | None = None
    tree: ProofNode | None = None
    unknowns: tuple[str, ...] = ()

    @property
    def proved(self) -> bool:
        return self.status == "proved"


def backward_chain(ruleset: RuleSet, wm: WorkingMemory, goal: str) -> ProofResult:
    """Depth-first goal decomposition with memoized proofs and cycle cuts.

    A goal already on the current path is unprovable along that path only.
    When the search fails, facts that are absent from working memory and
    concluded by no rule — plus unbound attributes tested by comparisons —
    come back sorted as askable unknowns. The reported certainty is that of
    the exhibited derivation (first proving rule in file order).
    """
    proved_memo: dict[str, ProofNode] = {}
    failed_memo: set[str] = set()
    askables: set[str] = set()

    def prove_fact(fact: str, path: tuple[str, ...]):
        """Returns (node-or-None, clean). clean=False means a cycle cut
        happened underneath, so a failure must not be memoized."""
        if fact in wm.facts:
            return ProofNode(fact, None, wm.facts[fact]), True
        if fact in proved_memo:
            return proved_memo[fact], True
        if fact in failed_memo:
            return None, True
        if fact in path:
            return None, False
        candidates = ruleset.concluding(fact)
        if not candidates:
            askables.add(fact)
            failed_memo.add(fact)
            return None, True
        clean = True
        for rule in candidates:
            ok, cf, children, sub_clean = prove_condition(rule.condition, path + (fact,))
            clean = clean and sub_clean
            if ok:
                node = ProofNode(fact, rule.id, rule.cf * cf, tuple(children))
                proved_memo[fact] = node
                return node, True
        if clean:
            failed_memo.add(fact)
        return None, clean

    def prove_condition(cond, path):
        """Returns (ok, cf, children, clean)."""
        if isinstance(cond, Proposition):
            node, clean = prove_fact(cond.fact, path)
            if node is None:
                return False, ZERO, [], clean
            return True, node.cf, [node], clean
        if isinstance(cond, Comparison):
            observed = wm.bindings.get(cond.attribute)
            if observed is None:
                askables.add(cond.attribute)
                return False, ZERO, [], True
            ok, _, leaves = _eval_condition(cond, wm)
            if not ok:
                return False, ZERO, [], True
            label = f"{cond.attribute} {cond.op} {cond.literal}"
            return True, ONE, [ProofNode(label, None, ONE)], True
        if isinstance(cond, Conjunction):
            cf = ONE
            children = []
            clean = True
            all_ok = True
            # a failed part does not stop the walk: remaining parts are still
            # probed so every askable surfaces in one pass
            for part in cond.parts:
                ok, part_cf, part_children, part_clean = prove_condition(part, path)
                clean = clean and part_clean
                if not ok:
                    all_ok = False
                    continue
                cf = min(cf, part_cf)
                children.extend(part_children)
            if not all_ok:
                return False, ZERO, [], clean
            return True, cf, children, clean
        if isinstance(cond, Disjunction):
            clean = True
            for part in cond.parts:
                ok, part_cf, part_children, part_clean = prove_condition(part, path)
                clean = clean and part_clean
                if ok:
                    return True, part_cf, part_children, clean
            return False, ZERO, [], clean
        raise KnowledgeError(f"unknown condition node {cond!r}")

    node, _ = prove_fact(goal, ())
    if node is not None:
        return ProofResult(status="proved", cf=node.cf, tree=node)
    if askables:
        return ProofResult(status="unknowns", unknowns=tuple(sorted(askables)))
    return ProofResult(status="unprovable")


# ---------------------------------------------------------------------------
# Explanation
# ---------------------------------------------------------------------------

class NotDerivedError(KnowledgeError):
    pass


@dataclass(frozen=True)
class ExplanationNode:
    label: str
    kind: str  # derived | given
    rule_id: str | None = None
    children: tuple = ()


def explain(trace: Trace, fact: str) -> ExplanationNode:
    """Explanation tree for a derived fact: the firing step plus, recursively,
    the steps that established each matched antecedent. Facts and bindings
    present initially are leaves labelled "given"."""
    asserting_step: dict[str, int] = {}
    setting_step: dict[str, list[int]] = {}
    for i, step in enumerate(trace.steps):
        for eff in step.applied:
            if isinstance(eff, FactEffect):
                asserting_step.setdefault(eff.fact, i)
            else:
                setting_step.setdefault(eff.attribute, []).append(i)

    def fact_node(name: str, before: int) -> ExplanationNode:
        idx = asserting_step.get(name)
        if idx is not None and idx < before:
            return step_node(name, idx)
        if name in trace.initial_facts:
            return ExplanationNode(name, "given")
        raise NotDerivedError(f"{name!r} neither given nor derived before step {before}")

    def binding_node(attribute: str, observed: str, before: int) -> ExplanationNode:
        label = f"{attribute} = {observed}"
        prior = [i for i in setting_step.get(attribute, []) if i < before]
        if prior:
            return step_node(label, prior[-1])
        return ExplanationNode(label, "given")

    def step_node(label: str, idx: int) -> ExplanationNode:
        step = trace.steps[idx]
        children = []
        for leaf in step.matched:
            if isinstance(leaf, MatchedFact):
                children.append(fact_node(leaf.fact, idx))
            else:
                children.append(binding_node(leaf.attribute, leaf.observed, idx))
        return ExplanationNode(label, "derived", step.rule_id, tuple(children))

    if fact in asserting_step:
        return step_node(fact, asserting_step[fact])
    if fact in trace.initial_facts:
        return ExplanationNode(fact, "given")
    raise NotDerivedError(f"{fact!r} was never derived in this trace")


def format_explanation(node: ExplanationNode, indent: int = 0) -> str:
    pad = "  " * indent
    if node.kind == "given":
        head = f"{pad}{node.label}  [given]"
    else:
        head = f"{pad}{node.label}  [rule {node.rule_id}]"
    lines = [head]
    for child in node.children:
        lines.append(format_explanation(child, indent + 1))
    return "\n".join(lines)
