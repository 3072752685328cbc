"""Python bindings for the bertkit C++ core.

The `_core` extension exposes the main pipeline operations: corpus
ingestion and splitting, WordPiece vocabulary induction and tokenization,
sentence-order/masking example generation, annotation flattening, and the
evaluation metrics.
"""

from ._core import (
    AccuracySummary,
    MaskedExampleData,
    SpanF1Summary,
    Vocab,
    corpus_stats_json,
    detokenize,
    flatten_highest_level,
    flatten_modifiers,
    flatten_str,
    generate_masked_examples,
    induce_vocabulary_from_jsonl,
    ingest_text,
    macro_f1,
    read_conll,
    render_table,
    span_f1,
    split_corpus_jsonl,
    synth_corpus_text,
    token_accuracy,
    tokenize,
    write_conll,
)

__all__ = [
    "AccuracySummary",
    "MaskedExampleData",
    "SpanF1Summary",
    "Vocab",
    "corpus_stats_json",
    "detokenize",
    "flatten_highest_level",
    "flatten_modifiers",
    "flatten_str",
    "generate_masked_examples",
    "induce_vocabulary_from_jsonl",
    "ingest_text",
    "macro_f1",
    "read_conll",
    "render_table",
    "span_f1",
    "split_corpus_jsonl",
    "synth_corpus_text",
    "token_accuracy",
    "tokenize",
    "write_conll",
]
