"""Batch orchestration: extract, evaluate, index, query.

``cmd_extract`` walks an image directory in filename order, runs
segmentation + recognition per image, writes one ``<stem>.txt`` per
screenshot plus a single timeline-linked XML batch (written atomically at
the end, so a per-image failure never leaves a partial batch).
``cmd_evaluate`` compares two directories of stem-matched transcripts,
``cmd_index`` builds and persists the search index from an XML batch, and
``cmd_query`` runs the same ranking the HTTP service serves.
"""

from __future__ import annotations

import logging
import os
import re
import shlex
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import ocr
from .docmodel import ScreenshotDocument, batch_to_xml, from_xml, link_timeline, parse_timestamp
from .imaging import RasterImage, SegmentationParams
from .index import InvertedIndex, SearchHit
from .metrics import CorpusReport, evaluate_corpus
from .ocr import ExtractedText, OcrEngineConfig, extract_text

log = logging.getLogger(__name__)

ENGINE_ENV_VAR = "SCREENLENS_OCR_CMD"
DEFAULT_FILENAME_PATTERN = (
    r"^(?P<subject>[^_]+)_(?P<timestamp>\d{8}T\d{6})\.(?:png|jpe?g)$"
)
IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}
BATCH_FILENAME = "documents.xml"


class FatalConfig(ValueError):
    """Configuration problems that abort the whole batch."""


@dataclass
class PipelineConfig:
    input_dir: Path
    output_dir: Path
    segmentation: SegmentationParams = SegmentationParams()
    engine: OcrEngineConfig | None = None
    banner_strip: bool = True
    parallelism: int = 1
    filename_pattern: str = DEFAULT_FILENAME_PATTERN

    def resolved_engine(self) -> OcrEngineConfig:
        """Engine template resolution: env override beats configuration."""
        env_cmd = os.environ.get(ENGINE_ENV_VAR)
        if env_cmd:
            base = self.engine
            try:
                return OcrEngineConfig(
                    command=env_cmd,
                    timeout=base.timeout if base else 30.0,
                    label=base.label if base else "env",
                )
            except ValueError as exc:
                raise FatalConfig(f"{ENGINE_ENV_VAR}: {exc}") from exc
        if self.engine is None:
            raise FatalConfig(
                f"no OCR engine configured (set --engine-cmd or {ENGINE_ENV_VAR})"
            )
        return self.engine


@dataclass
class ExtractSummary:
    images_processed: int = 0
    segments_recognized: int = 0
    docs_written: int = 0
    failures: list[tuple[str, str]] = field(default_factory=list)
    xml_path: Path | None = None


@dataclass(frozen=True)
class IndexStats:
    documents: int
    distinct_terms: int
    avdl: float


def _compile_pattern(pattern: str) -> re.Pattern:
    try:
        compiled = re.compile(pattern)
    except re.error as exc:
        raise FatalConfig(f"bad filename pattern: {exc}") from exc
    groups = compiled.groupindex
    if "subject" not in groups or "timestamp" not in groups:
        raise FatalConfig(
            "filename pattern must define named groups 'subject' and 'timestamp'"
        )
    return compiled


def _check_engine_resolvable(engine: OcrEngineConfig) -> None:
    argv0 = shlex.split(engine.command)[0]
    if "{input}" in argv0 or "{output}" in argv0:
        return  # cannot pre-check a templated executable; fails per image instead
    if shutil.which(argv0) is None and not Path(argv0).is_file():
        raise FatalConfig(f"OCR engine executable not found: {argv0}")


def _process_image(
    path: Path,
    pattern: re.Pattern,
    cfg: PipelineConfig,
    engine: OcrEngineConfig,
) -> tuple[ScreenshotDocument, ExtractedText]:
    match = pattern.match(path.name)
    if not match:
        raise ValueError(f"filename does not match the capture pattern: {path.name}")
    subject = match.group("subject")
    timestamp = parse_timestamp(match.group("timestamp"))
    image = RasterImage.from_file(path)
    extracted = extract_text(
        image, cfg.segmentation, engine, banner_strip=cfg.banner_strip
    )
    doc = ScreenshotDocument(
        id=f"{subject}_{match.group('timestamp')}",
        timestamp=timestamp,
        text=extracted.text,
        image_path=str(path),
    )
    return doc, extracted


def cmd_extract(cfg: PipelineConfig) -> ExtractSummary:
    """Recognize every image in the input directory; emit texts + XML batch."""
    if not cfg.input_dir.is_dir():
        raise FatalConfig(f"input directory does not exist: {cfg.input_dir}")
    if cfg.parallelism < 1:
        raise FatalConfig("parallelism must be >= 1")
    pattern = _compile_pattern(cfg.filename_pattern)
    engine = cfg.resolved_engine()
    _check_engine_resolvable(engine)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    ocr.set_max_engine_processes(cfg.parallelism)

    images = sorted(
        p for p in cfg.input_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES
    )
    summary = ExtractSummary()
    results: list[tuple[ScreenshotDocument, ExtractedText] | None] = [None] * len(images)

    def work(i_path):
        i, path = i_path
        return i, _process_image(path, pattern, cfg, engine)

    with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
        futures = {pool.submit(work, (i, p)): p for i, p in enumerate(images)}
        for future, path in futures.items():
            try:
                i, result = future.result()
                results[i] = result
            except Exception as exc:
                log.warning("image %s failed: %s", path.name, exc)
                summary.failures.append((path.name, str(exc)))

    docs = []
    for path, result in zip(images, results):
        if result is None:
            continue
        doc, extracted = result
        (cfg.output_dir / f"{path.stem}.txt").write_text(
            extracted.text + "\n", encoding="utf-8"
        )
        docs.append(doc)
        summary.images_processed += 1
        summary.segments_recognized += len(extracted.segments)

    linked = link_timeline(docs)
    xml_path = cfg.output_dir / BATCH_FILENAME
    tmp = xml_path.with_suffix(".xml.tmp")
    tmp.write_text(batch_to_xml(linked), encoding="utf-8")
    tmp.replace(xml_path)
    summary.docs_written = len(linked)
    summary.xml_path = xml_path
    return summary


def _read_text_dir(path: Path) -> dict[str, str]:
    return {
        p.stem: p.read_text(encoding="utf-8")
        for p in sorted(path.iterdir())
        if p.suffix == ".txt"
    }


def cmd_evaluate(
    hyp_dir: Path, ref_dir: Path
) -> tuple[CorpusReport, list[str], list[str]]:
    """Stem-match transcript directories and score hypothesis against reference.

    Returns the corpus report plus the stems present on only one side.
    """
    refs = _read_text_dir(ref_dir)
    hyps = _read_text_dir(hyp_dir)
    shared = sorted(refs.keys() & hyps.keys())
    ref_only = sorted(refs.keys() - hyps.keys())
    hyp_only = sorted(hyps.keys() - refs.keys())
    for stem in ref_only:
        log.warning("no hypothesis for reference %s", stem)
    for stem in hyp_only:
        log.warning("no reference for hypothesis %s", stem)
    report = evaluate_corpus(
        (stem, refs[stem].rstrip("\n"), hyps[stem].rstrip("\n")) for stem in shared
    )
    return report, ref_only, hyp_only


def render_table(report: CorpusReport) -> str:
    """ER/Accuracy columns at character and word level plus PER, per document."""
    header = (
        f"{'Document':<28} {'Char ER':>9} {'Char Acc':>9} "
        f"{'Word ER':>9} {'Word Acc':>9} {'PER':>9} {'PER Acc':>9}"
    )
    lines = [header, "-" * len(header)]

    def row(name, cer, wer, per):
        cells = []
        for er in (cer, wer, per):
            cells.append(f"{er * 100:8.2f}%")
            cells.append(f"{(1 - er) * 100:8.2f}%")
        return f"{name:<28} " + " ".join(cells)

    for doc_id, res in report.results:
        lines.append(row(doc_id, res.cer, res.wer, res.per))
    if report.micro_cer is not None:
        lines.append("-" * len(header))
        lines.append(
            row("micro-average", report.micro_cer, report.micro_wer, report.micro_per)
        )
    for doc_id, reason in report.failures:
        lines.append(f"{doc_id:<28} skipped: {reason}")
    return "\n".join(lines)


def report_to_json(report: CorpusReport) -> dict:
    """Machine-readable counts for every document plus the micro averages."""

    def counts(c):
        return {
            "insertions": c.insertions,
            "substitutions": c.substitutions,
            "deletions": c.deletions,
        }

    return {
        "documents": [
            {
                "id": doc_id,
                "char": {**counts(r.char_counts), "reference_length": r.char_ref_len},
                "word": {**counts(r.word_counts), "reference_length": r.word_ref_len},
                "bag_errors": r.per_errors,
                "cer": r.cer,
                "wer": r.wer,
                "per": r.per,
            }
            for doc_id, r in report.results
        ],
        "failures": [{"id": doc_id, "reason": reason} for doc_id, reason in report.failures],
        "micro": {
            "cer": report.micro_cer,
            "wer": report.micro_wer,
            "per": report.micro_per,
        },
        "document_count": report.document_count,
    }


def cmd_index(
    xml_path: Path,
    index_path: Path,
    *,
    k1: float | None = None,
    b: float | None = None,
    boost: float | None = None,
) -> IndexStats:
    """Index an XML batch and persist the result."""
    kwargs = {}
    if k1 is not None:
        kwargs["k1"] = k1
    if b is not None:
        kwargs["b"] = b
    if boost is not None:
        kwargs["category_boost"] = boost
    idx = InvertedIndex(**kwargs)
    for doc in from_xml(Path(xml_path).read_bytes()):
        idx.add_document(doc)
    idx.save(index_path)
    return IndexStats(
        documents=idx.doc_count, distinct_terms=idx.distinct_terms, avdl=idx.avdl
    )


def cmd_query(
    index_path: Path,
    query: str,
    k: int = 10,
    category: str | None = None,
    *,
    boost: float | None = None,
) -> list[SearchHit]:
    """Rank against a persisted index; the HTTP service returns the same order."""
    idx = InvertedIndex.load(index_path)
    if boost is not None:
        idx.category_boost = boost
    return idx.search(query, category=category, k=k)
