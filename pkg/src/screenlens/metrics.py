"""Extraction-quality metrics: CER, WER, and position-independent WER.

All three compare a hypothesis (recognizer output) against a reference
(ground-truth transcription) and normalize by the reference length:

* CER / WER: minimum insertions + substitutions + deletions transforming the
  hypothesis into the reference, at character and whitespace-word granularity.
* PER: bag-of-words variant that ignores word order, so PER <= WER always.

Comparisons are case- and punctuation-sensitive by default; the
normalization switches exist for diagnostics only. Characters are Unicode
scalar values, not grapheme clusters.
"""

from __future__ import annotations

import unicodedata
from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import kernels


class EmptyReference(ValueError):
    """Raised when a rate is requested against an empty reference."""


@dataclass(frozen=True)
class EditCounts:
    """Insertions, substitutions, deletions transforming hypothesis into reference."""

    insertions: int
    substitutions: int
    deletions: int

    @property
    def total(self) -> int:
        return self.insertions + self.substitutions + self.deletions


@dataclass(frozen=True)
class EvalResult:
    """Edit counts and rates for one reference/hypothesis pair."""

    char_counts: EditCounts
    char_ref_len: int
    word_counts: EditCounts
    word_ref_len: int
    per_errors: int
    cer: float
    wer: float
    per: float


@dataclass(frozen=True)
class CorpusReport:
    """Per-document results plus micro-averaged rates (summed counts over summed lengths)."""

    results: tuple[tuple[str, EvalResult], ...]
    failures: tuple[tuple[str, str], ...]
    micro_cer: float | None
    micro_wer: float | None
    micro_per: float | None

    @property
    def document_count(self) -> int:
        return len(self.results)


def _encode_chars(text: str) -> np.ndarray:
    return np.frombuffer(text.encode("utf-32-le"), dtype=np.uint32).astype(np.int64)


def _encode_tokens(ref: list, hyp: list) -> tuple[np.ndarray, np.ndarray]:
    vocab: dict = {}
    a = np.array([vocab.setdefault(t, len(vocab)) for t in ref], dtype=np.int64)
    b = np.array([vocab.setdefault(t, len(vocab)) for t in hyp], dtype=np.int64)
    return a, b


def edit_counts(ref, hyp) -> EditCounts:
    """Minimum-edit alignment counts between two strings or token sequences.

    Among cost-equal alignments the counts come from the alignment preferring
    substitution over insertion over deletion at every tie, so results are
    deterministic.
    """
    if isinstance(ref, str) and isinstance(hyp, str):
        a, b = _encode_chars(ref), _encode_chars(hyp)
    else:
        a, b = _encode_tokens(list(ref), list(hyp))
    ins, sub, dele = kernels.levenshtein_counts(a, b)
    return EditCounts(ins, sub, dele)


def tokenize_words(text: str) -> list[str]:
    """Split on runs of Unicode whitespace; punctuation stays attached."""
    return text.split()


def normalize_text(text: str, *, lowercase: bool = False, strip_punctuation: bool = False) -> str:
    """Diagnostic-only normalization; rates are computed raw by default."""
    if lowercase:
        text = text.lower()
    if strip_punctuation:
        text = "".join(c for c in text if not unicodedata.category(c).startswith("P"))
    return text


def cer(ref: str, hyp: str) -> float:
    """Character error rate: edit total over reference character count."""
    if len(ref) == 0:
        if len(hyp) == 0:
            return 0.0
        raise EmptyReference("reference has no characters")
    return edit_counts(ref, hyp).total / len(ref)


def wer(ref: str, hyp: str) -> float:
    """Word error rate over whitespace tokens; can exceed 1 for long hypotheses."""
    ref_words = tokenize_words(ref)
    hyp_words = tokenize_words(hyp)
    if not ref_words:
        if not hyp_words:
            return 0.0
        raise EmptyReference("reference has no words")
    return edit_counts(ref_words, hyp_words).total / len(ref_words)


def _bag_errors(ref_words: list[str], hyp_words: list[str]) -> int:
    matched = sum((Counter(ref_words) & Counter(hyp_words)).values())
    return max(len(ref_words), len(hyp_words)) - matched


def per(ref: str, hyp: str) -> float:
    """Position-independent word error rate (bag-of-words matching)."""
    ref_words = tokenize_words(ref)
    hyp_words = tokenize_words(hyp)
    if not ref_words:
        if not hyp_words:
            return 0.0
        raise EmptyReference("reference has no words")
    return _bag_errors(ref_words, hyp_words) / len(ref_words)


def evaluate_pair(
    ref: str,
    hyp: str,
    *,
    lowercase: bool = False,
    strip_punctuation: bool = False,
) -> EvalResult:
    """All three rates plus the raw counts for one document pair."""
    ref = normalize_text(ref, lowercase=lowercase, strip_punctuation=strip_punctuation)
    hyp = normalize_text(hyp, lowercase=lowercase, strip_punctuation=strip_punctuation)
    ref_words = tokenize_words(ref)
    if len(ref) == 0 or not ref_words:
        raise EmptyReference("reference is empty")
    hyp_words = tokenize_words(hyp)
    cc = edit_counts(ref, hyp)
    wc = edit_counts(ref_words, hyp_words)
    bag = _bag_errors(ref_words, hyp_words)
    return EvalResult(
        char_counts=cc,
        char_ref_len=len(ref),
        word_counts=wc,
        word_ref_len=len(ref_words),
        per_errors=bag,
        cer=cc.total / len(ref),
        wer=wc.total / len(ref_words),
        per=bag / len(ref_words),
    )


def evaluate_corpus(pairs) -> CorpusReport:
    """Evaluate (doc_id, ref, hyp) triples; empty references are recorded, not fatal."""
    results = []
    failures = []
    char_edits = char_total = 0
    word_edits = word_total = 0
    bag_edits = 0
    for doc_id, ref, hyp in pairs:
        try:
            res = evaluate_pair(ref, hyp)
        except EmptyReference as exc:
            failures.append((doc_id, str(exc)))
            continue
        results.append((doc_id, res))
        char_edits += res.char_counts.total
        char_total += res.char_ref_len
        word_edits += res.word_counts.total
        word_total += res.word_ref_len
        bag_edits += res.per_errors
    return CorpusReport(
        results=tuple(results),
        failures=tuple(failures),
        micro_cer=char_edits / char_total if char_total else None,
        micro_wer=word_edits / word_total if word_total else None,
        micro_per=bag_edits / word_total if word_total else None,
    )
