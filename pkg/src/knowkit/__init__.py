"""Knowledge capture toolkit: structured knowledge bases, graded production
rules, a triple store with materialized inference, frame ontologies, plain
interchange formats, and a static hyperlinked site publisher."""

from .model import (
    Concept,
    KnowledgeBase,
    KnowledgeBaseBuilder,
    KnowledgeError,
    Value,
    ValueKind,
    effective_attributes,
    resolve,
    validate_structure,
)
from .rules import (
    WorkingMemory,
    backward_chain,
    combine_cf,
    explain,
    forward_chain,
    parse_rules,
)
from .triples import InferenceSpec, Term, TripleStore, emit_triples, load_triples
from .interchange import emit_kb, kb_to_triples, parse_kb, triples_to_kb
from .ontology import (
    Ontology,
    apply_axioms,
    canonicalize,
    export_inference_spec,
    parse_ontology,
    validate_kb,
)
from .publisher import (
    MatrixSpec,
    PageTemplate,
    SiteManifest,
    build_site,
    parse_template,
    render_annotation_page,
)

__version__ = "0.1.0"

__all__ = [
    "Concept",
    "InferenceSpec",
    "KnowledgeBase",
    "KnowledgeBaseBuilder",
    "KnowledgeError",
    "MatrixSpec",
    "Ontology",
    "PageTemplate",
    "SiteManifest",
    "Term",
    "TripleStore",
    "Value",
    "ValueKind",
    "WorkingMemory",
    "apply_axioms",
    "backward_chain",
    "build_site",
    "canonicalize",
    "combine_cf",
    "effective_attributes",
    "emit_kb",
    "emit_triples",
    "explain",
    "export_inference_spec",
    "forward_chain",
    "kb_to_triples",
    "load_triples",
    "parse_kb",
    "parse_ontology",
    "parse_rules",
    "parse_template",
    "render_annotation_page",
    "resolve",
    "triples_to_kb",
    "validate_kb",
    "validate_structure",
]
