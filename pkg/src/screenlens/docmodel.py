"""Structured screenshot records: ids, XML serialization, timeline links.

Each screenshot becomes a six-field record -- id, timestamp, category, text,
previous_image, next_image -- serialized as::

    <add>
      <doc>
        <field name="id">...</field>
        ...
      </doc>
    </add>

One ``<add>`` batch may carry many ``<doc>`` elements. The id concatenates
the subject id and the capture time (``<subject>_<YYYYMMDDTHHMMSS>``), which
keeps ids parseable and unique at second resolution. Timeline linking chains
each subject's records chronologically through the previous/next fields.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, replace
from datetime import datetime, timezone

COMPACT_TS = "%Y%m%dT%H%M%S"
ISO_TS = "%Y-%m-%dT%H:%M:%SZ"

FIELD_ORDER = ("id", "timestamp", "category", "text", "previous_image", "next_image")


class InvalidSubject(ValueError):
    pass


class SchemaError(ValueError):
    """Unexpected XML structure; the message names the offending element."""


class TimestampError(ValueError):
    """Unparseable timestamp; the message carries the raw value."""


class DuplicateId(ValueError):
    pass


@dataclass(frozen=True)
class ScreenshotDocument:
    """One captured screen: identity, capture time, extracted text, links.

    ``image_path`` is a local storage reference and is never serialized; the
    wire schema carries only the six fields above.
    """

    id: str
    timestamp: datetime
    category: str | None = None
    text: str = ""
    previous_image: str | None = None
    next_image: str | None = None
    image_path: str = ""

    def __post_init__(self):
        if not self.id:
            raise ValueError("document id must be non-empty")


def _as_utc(ts: datetime) -> datetime:
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def make_id(subject: str, captured_at: datetime) -> str:
    """``<subject>_<YYYYMMDDTHHMMSS>``; injective at second resolution."""
    if not subject:
        raise InvalidSubject("subject id must be non-empty")
    if "_" in subject:
        raise InvalidSubject(f"subject id may not contain '_': {subject!r}")
    return f"{subject}_{_as_utc(captured_at).strftime(COMPACT_TS)}"


def split_id(doc_id: str) -> tuple[str, datetime]:
    """Inverse of make_id."""
    subject, sep, stamp = doc_id.partition("_")
    if not sep or not subject:
        raise InvalidSubject(f"id not of the form subject_YYYYMMDDTHHMMSS: {doc_id!r}")
    return subject, parse_timestamp(stamp)


def parse_timestamp(raw: str) -> datetime:
    """Accepts the ISO-8601 wire form, offsets, or the compact id-embedded form."""
    for fmt in (ISO_TS, COMPACT_TS):
        try:
            return datetime.strptime(raw, fmt).replace(tzinfo=timezone.utc)
        except ValueError:
            pass
    try:
        return _as_utc(datetime.fromisoformat(raw))
    except ValueError:
        raise TimestampError(f"unparseable timestamp: {raw!r}") from None


def _check_serializable(value: str) -> str:
    for ch in value:
        if ord(ch) < 0x20 and ch not in "\t\n":
            raise ValueError(
                f"control character {ch!r} cannot be represented in XML 1.0"
            )
    return value


def _doc_element(doc: ScreenshotDocument) -> ET.Element:
    el = ET.Element("doc")
    values = {
        "id": doc.id,
        "timestamp": _as_utc(doc.timestamp).strftime(ISO_TS),
        "category": doc.category or "",
        "text": doc.text,
        "previous_image": doc.previous_image or "",
        "next_image": doc.next_image or "",
    }
    for name in FIELD_ORDER:
        field = ET.SubElement(el, "field", name=name)
        field.text = _check_serializable(values[name])
    return el


def _serialize(root: ET.Element) -> str:
    ET.indent(root, space="    ")
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(
        root, encoding="unicode"
    ) + "\n"


def to_xml(doc: ScreenshotDocument) -> str:
    """Serialize one document as a single-entry batch."""
    return batch_to_xml([doc])


def batch_to_xml(docs: list[ScreenshotDocument]) -> str:
    """Serialize many documents under one ``<add>`` element."""
    root = ET.Element("add")
    for doc in docs:
        root.append(_doc_element(doc))
    return _serialize(root)


def from_xml(source: str | bytes) -> list[ScreenshotDocument]:
    """Parse an ``<add>`` batch back into documents.

    Raises SchemaError naming the first offending element and TimestampError
    carrying the raw value. Empty category/link fields come back as None;
    empty timestamps fall back to the time embedded in the id.
    """
    if isinstance(source, str):
        source = source.encode("utf-8")
    try:
        root = ET.fromstring(source)
    except ET.ParseError as exc:
        raise SchemaError(f"not well-formed XML: {exc}") from exc
    if root.tag != "add":
        raise SchemaError(f"expected root element 'add', found {root.tag!r}")
    docs = []
    for child in root:
        if child.tag != "doc":
            raise SchemaError(f"expected 'doc' element, found {child.tag!r}")
        fields: dict[str, str] = {}
        for el in child:
            if el.tag != "field":
                raise SchemaError(f"expected 'field' element, found {el.tag!r}")
            name = el.get("name")
            if name not in FIELD_ORDER:
                raise SchemaError(f"unknown field {name!r}")
            fields[name] = el.text or ""
        if "id" not in fields or not fields["id"]:
            raise SchemaError("id")
        raw_ts = fields.get("timestamp", "")
        if raw_ts:
            ts = parse_timestamp(raw_ts)
        else:
            _, ts = split_id(fields["id"])
        docs.append(
            ScreenshotDocument(
                id=fields["id"],
                timestamp=ts,
                category=fields.get("category") or None,
                text=fields.get("text", ""),
                previous_image=fields.get("previous_image") or None,
                next_image=fields.get("next_image") or None,
            )
        )
    return docs


def link_timeline(docs: list[ScreenshotDocument]) -> list[ScreenshotDocument]:
    """Chain each subject's documents chronologically via previous/next links.

    Links hold the neighbor's image path when known, else its id. Endpoint
    documents keep absent links. Output preserves input order.
    """
    seen: set[str] = set()
    for doc in docs:
        if doc.id in seen:
            raise DuplicateId(doc.id)
        seen.add(doc.id)
    by_subject: dict[str, list[ScreenshotDocument]] = {}
    for doc in docs:
        subject, _ = split_id(doc.id)
        by_subject.setdefault(subject, []).append(doc)
    links: dict[str, tuple[str | None, str | None]] = {}
    for chain in by_subject.values():
        chain = sorted(chain, key=lambda d: (_as_utc(d.timestamp), d.id))
        refs = [d.image_path or d.id for d in chain]
        for i, doc in enumerate(chain):
            prev_ref = refs[i - 1] if i > 0 else None
            next_ref = refs[i + 1] if i + 1 < len(chain) else None
            links[doc.id] = (prev_ref, next_ref)
    return [
        replace(doc, previous_image=links[doc.id][0], next_image=links[doc.id][1])
        for doc in docs
    ]
