"""From-scratch inverted index with BM25 ranking and category boosting.

Two indexed fields: the extracted screenshot text and the optional category
label. Each maps terms to (doc ordinal, term frequency) postings. Scoring is
Okapi BM25,

    score(D, Q) = sum_q idf(q) * f(q, D) * (k1 + 1)
                          / (f(q, D) + k1 * (1 - b + b * |D| / avdl))

with idf(q) = ln((N - n(q) + 0.5) / (n(q) + 0.5)), where n(q) is the
per-field document frequency. idf can go negative for terms in more than
half the corpus; that is kept as-is so oracle and implementation agree.
Document length |D| and avdl count text-field tokens only; the category
field reuses them. Query matches on the category field are boosted by a
multiplicative weight added to the text score, which is what pushes a
category-labeled document above an otherwise identical one.

The index builds single-writer, serves immutably, and persists to a
versioned, checksummed single file whose bytes are deterministic for a given
corpus (re-indexing the same batch reproduces the identical file).
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import struct
import zlib
from bisect import bisect_left
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .docmodel import DuplicateId, ScreenshotDocument, parse_timestamp

MAGIC = b"SLENSIDX"
FORMAT_VERSION = 1

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75
DEFAULT_CATEGORY_BOOST = 3.0

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class CorruptIndex(RuntimeError):
    pass


def analyze(text: str) -> list[str]:
    """Lowercased alphanumeric runs; no stemming, no stopwords."""
    return [t.lower() for t in _TOKEN_RE.findall(text)]


def bm25_term_score(idf: float, f: int, dl: int, avdl: float, k1: float, b: float) -> float:
    """One term's contribution for one document, straight from the formula."""
    if f == 0 or avdl == 0:
        return 0.0
    return idf * (f * (k1 + 1)) / (f + k1 * (1 - b + b * dl / avdl))


@dataclass(frozen=True)
class SearchHit:
    doc_id: str
    score: float
    rank: int
    matched_fields: frozenset


class InvertedIndex:
    """Builds from ScreenshotDocuments; serves ranked bag-of-terms queries."""

    def __init__(
        self,
        k1: float = DEFAULT_K1,
        b: float = DEFAULT_B,
        category_boost: float = DEFAULT_CATEGORY_BOOST,
    ):
        self.k1 = k1
        self.b = b
        self.category_boost = category_boost
        self._text: dict[str, list[tuple[int, int]]] = {}
        self._category: dict[str, list[tuple[int, int]]] = {}
        self._lengths: list[int] = []
        self._docs: list[ScreenshotDocument] = []
        self._ordinals: dict[str, int] = {}

    # -- building -----------------------------------------------------------

    def add_document(self, doc: ScreenshotDocument) -> int:
        """Index one document; returns its ordinal. Ids must be unique."""
        if doc.id in self._ordinals:
            raise DuplicateId(doc.id)
        ordinal = len(self._docs)
        text_terms = analyze(doc.text)
        for term, freq in sorted(Counter(text_terms).items()):
            self._text.setdefault(term, []).append((ordinal, freq))
        if doc.category:
            for term, freq in sorted(Counter(analyze(doc.category)).items()):
                self._category.setdefault(term, []).append((ordinal, freq))
        self._docs.append(doc)
        self._lengths.append(len(text_terms))
        self._ordinals[doc.id] = ordinal
        return ordinal

    # -- lookups ------------------------------------------------------------

    @property
    def doc_count(self) -> int:
        return len(self._docs)

    @property
    def avdl(self) -> float:
        return sum(self._lengths) / len(self._lengths) if self._lengths else 0.0

    @property
    def distinct_terms(self) -> int:
        return len(self._text.keys() | self._category.keys())

    def get(self, doc_id: str) -> ScreenshotDocument | None:
        ordinal = self._ordinals.get(doc_id)
        return self._docs[ordinal] if ordinal is not None else None

    def documents(self) -> list[ScreenshotDocument]:
        return list(self._docs)

    def doc_frequency(self, term: str, field: str = "text") -> int:
        return len(self._postings(field).get(term, ()))

    def _postings(self, field: str) -> dict[str, list[tuple[int, int]]]:
        if field == "text":
            return self._text
        if field == "category":
            return self._category
        raise ValueError(f"unknown field {field!r}")

    def _term_frequency(self, term: str, ordinal: int, field: str) -> int:
        plist = self._postings(field).get(term)
        if not plist:
            return 0
        pos = bisect_left(plist, (ordinal,))
        if pos < len(plist) and plist[pos][0] == ordinal:
            return plist[pos][1]
        return 0

    # -- scoring ------------------------------------------------------------

    def idf(self, term: str, field: str = "text") -> float:
        """ln((N - n + 0.5) / (n + 0.5)); negative when n > N/2, by design."""
        n = self.doc_frequency(term, field)
        return math.log((self.doc_count - n + 0.5) / (n + 0.5))

    def bm25(self, ordinal: int, terms: list[str], field: str = "text") -> float:
        """Sum of term scores for one document; duplicate query terms count twice."""
        dl = self._lengths[ordinal]
        avdl = self.avdl
        return sum(
            bm25_term_score(
                self.idf(term, field),
                self._term_frequency(term, ordinal, field),
                dl,
                avdl,
                self.k1,
                self.b,
            )
            for term in terms
        )

    def _matching_ordinals(self, terms: list[str], field: str) -> set[int]:
        postings = self._postings(field)
        out: set[int] = set()
        for term in set(terms):
            out.update(ordinal for ordinal, _ in postings.get(term, ()))
        return out

    def search(
        self, query: str, category: str | None = None, k: int = 10
    ) -> list[SearchHit]:
        """Top-k documents for a bag-of-terms query.

        Without a category filter, candidates are documents matching at least
        one query term in either field. With one, the filter is hard: only
        documents whose category carries every filter token are candidates,
        and the filter tokens also contribute a boosted category score so a
        filter-only search still ranks by category relevance.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        q_terms = analyze(query)
        f_terms = analyze(category) if category is not None else []
        if category is not None:
            candidates = None
            for term in f_terms or [""]:
                matching = {o for o, _ in self._category.get(term, ())}
                candidates = matching if candidates is None else candidates & matching
            candidates = candidates or set()
        else:
            candidates = self._matching_ordinals(q_terms, "text") | self._matching_ordinals(
                q_terms, "category"
            )
        scored = []
        for ordinal in candidates:
            score = self.bm25(ordinal, q_terms, "text")
            score += self.category_boost * self.bm25(ordinal, q_terms, "category")
            if f_terms:
                score += self.category_boost * self.bm25(ordinal, f_terms, "category")
            matched = frozenset(
                name
                for name, fld_terms, fld in (
                    ("text", q_terms, "text"),
                    ("category", q_terms + f_terms, "category"),
                )
                if any(self._term_frequency(t, ordinal, fld) for t in fld_terms)
            )
            scored.append((score, self._docs[ordinal].id, matched))
        scored.sort(key=lambda item: (-item[0], item[1]))
        return [
            SearchHit(doc_id=doc_id, score=score, rank=rank, matched_fields=matched)
            for rank, (score, doc_id, matched) in enumerate(scored[:k], start=1)
        ]

    # -- persistence --------------------------------------------------------

    def save(self, path: str | Path) -> None:
        """Write a versioned, checksummed snapshot; bytes are deterministic."""
        payload = {
            "params": {"k1": self.k1, "b": self.b, "category_boost": self.category_boost},
            "docs": [
                {
                    "id": d.id,
                    "timestamp": d.timestamp.strftime("%Y-%m-%dT%H:%M:%SZ"),
                    "category": d.category,
                    "text": d.text,
                    "previous_image": d.previous_image,
                    "next_image": d.next_image,
                    "image_path": d.image_path,
                }
                for d in self._docs
            ],
            "lengths": self._lengths,
            "text_postings": {t: p for t, p in sorted(self._text.items())},
            "category_postings": {t: p for t, p in sorted(self._category.items())},
        }
        blob = zlib.compress(
            json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":")).encode(
                "utf-8"
            ),
            9,
        )
        path = Path(path)
        tmp = path.with_suffix(path.suffix + ".tmp")
        with open(tmp, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack(">IQ", FORMAT_VERSION, len(blob)))
            fh.write(hashlib.sha256(blob).digest())
            fh.write(blob)
        tmp.replace(path)

    @classmethod
    def load(cls, path: str | Path) -> "InvertedIndex":
        with open(path, "rb") as fh:
            data = fh.read()
        header_len = len(MAGIC) + 12 + 32
        if len(data) < header_len or data[: len(MAGIC)] != MAGIC:
            raise CorruptIndex(f"{path}: not a screenlens index file")
        version, blob_len = struct.unpack(
            ">IQ", data[len(MAGIC):len(MAGIC) + 12]
        )
        if version != FORMAT_VERSION:
            raise CorruptIndex(
                f"{path}: index format version {version}, this build reads {FORMAT_VERSION}"
            )
        digest = data[len(MAGIC) + 12:header_len]
        blob = data[header_len:]
        if len(blob) != blob_len:
            raise CorruptIndex(f"{path}: truncated (expected {blob_len} bytes, got {len(blob)})")
        if hashlib.sha256(blob).digest() != digest:
            raise CorruptIndex(f"{path}: checksum mismatch")
        try:
            payload = json.loads(zlib.decompress(blob).decode("utf-8"))
        except (zlib.error, json.JSONDecodeError) as exc:
            raise CorruptIndex(f"{path}: undecodable payload: {exc}") from exc
        idx = cls(
            k1=payload["params"]["k1"],
            b=payload["params"]["b"],
            category_boost=payload["params"]["category_boost"],
        )
        idx._docs = [
            ScreenshotDocument(
                id=d["id"],
                timestamp=parse_timestamp(d["timestamp"]),
                category=d["category"],
                text=d["text"],
                previous_image=d["previous_image"],
                next_image=d["next_image"],
                image_path=d.get("image_path") or "",
            )
            for d in payload["docs"]
        ]
        idx._lengths = list(payload["lengths"])
        idx._text = {t: [tuple(p) for p in plist] for t, plist in payload["text_postings"].items()}
        idx._category = {
            t: [tuple(p) for p in plist] for t, plist in payload["category_postings"].items()
        }
        idx._ordinals = {d.id: i for i, d in enumerate(idx._docs)}
        return idx
