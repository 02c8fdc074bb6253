"""Independent reference implementations the engine suites are checked
against. These are deliberately naive: set-based fixpoints and cubic
closures whose correctness is obvious by inspection."""

import random


def propositional_closure(abstract_rules, initial):
    """Semantic closure of monotone propositional rules.

    abstract_rules: iterable of (connective, antecedent_facts, consequent_facts)
    with connective "AND" or "OR". Returns the least fixpoint as a frozenset.
    """
    facts = set(initial)
    changed = True
    while changed:
        changed = False
        for connective, antecedents, consequents in abstract_rules:
            if connective == "AND":
                ok = all(a in facts for a in antecedents)
            else:
                ok = any(a in facts for a in antecedents)
            if ok:
                for c in consequents:
                    if c not in facts:
                        facts.add(c)
                        changed = True
    return frozenset(facts)


def random_rule_system(rng: random.Random, max_rules=8, max_facts=6):
    """A random monotone propositional rule system plus initial facts.

    Returns (abstract_rules, initial_facts, rule_text) where rule_text is the
    same system rendered in the rule language, so the oracle and the engine
    consume independent encodings.
    """
    alphabet = [f"f{i}" for i in range(max_facts)]
    n_rules = rng.randint(1, max_rules)
    abstract = []
    lines = []
    for i in range(n_rules):
        connective = rng.choice(["AND", "OR"])
        antecedents = tuple(rng.sample(alphabet, rng.randint(1, 3)))
        consequents = tuple(rng.sample(alphabet, rng.randint(1, 2)))
        abstract.append((connective, antecedents, consequents))
        cond = f" {connective} ".join(antecedents)
        cons = " AND ".join(consequents)
        lines.append(f"RULE r{i}: IF {cond} THEN {cons};")
    initial = frozenset(rng.sample(alphabet, rng.randint(0, max_facts)))
    return abstract, initial, "\n".join(lines)


def cubic_transitive_closure(edges, nodes=None):
    """Reachability by repeated squaring-free warshall-style passes."""
    reach = {}
    node_set = set(nodes or [])
    for a, b in edges:
        node_set.add(a)
        node_set.add(b)
        reach.setdefault(a, set()).add(b)
    for k in node_set:
        via_k = reach.get(k, set())
        for a in node_set:
            if k in reach.get(a, set()):
                reach.setdefault(a, set()).update(via_k)
    return {(a, b) for a, succ in reach.items() for b in succ}


def random_digraph(rng: random.Random, max_nodes=50, density_range=(0.1, 0.5)):
    n = rng.randint(2, max_nodes)
    density = rng.uniform(*density_range)
    nodes = [f"n{i}" for i in range(n)]
    edges = set()
    for a in nodes:
        for b in nodes:
            if a != b and rng.random() < density:
                edges.add((a, b))
    return nodes, sorted(edges)


def random_kb(rng: random.Random, size=50):
    """A randomized knowledge base within the file format's representable
    subset: attribute ids are slugs of their display names, categorical
    allowed sets equal the values actually used, number values carry their
    attribute's unit. Taxonomy edges always point at earlier concepts, so
    the result is acyclic by construction."""
    from knowkit.model import KnowledgeBaseBuilder, Value, ValueKind

    kinds = ["number", "category", "ordinal", "text", "reference"]
    units = [None, "mph", "kg"]
    palette = ["red", "green", "blue", "amber"]
    words = ["gear", "shaft", "rotor", "vane", "casing", "seal"]
    n_attrs = rng.randint(2, 6)
    attr_defs = []
    for k in range(n_attrs):
        kind = kinds[k % len(kinds)]
        unit = rng.choice(units) if kind == "number" else None
        attr_defs.append((f"attr-{k}", f"attr {k}", kind, unit))

    ids = [f"c{i}" for i in range(size)]
    builder = KnowledgeBaseBuilder()
    used_categories = {}
    value_plan = []
    for i, cid in enumerate(ids):
        parents = tuple(
            rng.sample(ids[:i], rng.randint(1, min(2, i)))) if i and rng.random() < 0.5 else ()
        synonyms = tuple(
            f"alias {cid} {j}" for j in range(rng.randint(0, 2)))
        builder.add_concept(
            cid,
            name=f"Thing {cid}" if rng.random() < 0.5 else cid,
            synonyms=synonyms,
            class_ids=parents,
            description=rng.choice(["", f"about {cid}"]),
        )
        if rng.random() < 0.3:
            builder.flag_glossary(cid)
        for attr_id, _, kind, unit in attr_defs:
            if rng.random() > 0.4:
                continue
            if kind == "number":
                value = Value.number(str(rng.randint(-99, 999)), unit)
            elif kind == "category":
                choice = rng.choice(palette)
                used_categories.setdefault(attr_id, set()).add(choice)
                value = Value.category(choice)
            elif kind == "ordinal":
                value = Value.ordinal(rng.randint(0, 9))
            elif kind == "reference":
                value = Value.reference(rng.choice(ids))
            else:
                value = Value.text(rng.choice(words))
            value_plan.append((cid, attr_id, value))

    for attr_id, name, kind, unit in attr_defs:
        if kind == "number":
            vk = ValueKind.number(unit)
        elif kind == "category":
            vk = ValueKind.categorical(used_categories.get(attr_id) or palette)
        elif kind == "ordinal":
            vk = ValueKind.ordinal()
        elif kind == "reference":
            vk = ValueKind.reference()
        else:
            vk = ValueKind.text()
        builder.add_attribute(attr_id, name, vk)
    for cid, attr_id, value in value_plan:
        builder.set_value(cid, attr_id, value)

    rel_pool = [("touches", "touches"), ("feeds", "feeds"), ("is-a", "is a")]
    for rel_id, name in rel_pool:
        builder.add_relation(rel_id, name)
    for _ in range(size):
        i, j = rng.sample(range(size), 2)
        rel_id, _ = rng.choice(rel_pool)
        if rel_id == "is-a" and i < j:
            i, j = j, i  # taxonomy edges point at earlier concepts only
        builder.add_relationship(ids[i], rel_id, ids[j])
    return builder.build()
