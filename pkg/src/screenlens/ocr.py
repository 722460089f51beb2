"""External OCR engine orchestration and text assembly.

A recognizer is any command-line tool invoked per segment through a template
with an ``{input}`` image-path placeholder and an ``{output}`` placeholder
for the result path base (the engine may write ``<output>.txt`` or
``<output>``; both are read back). Segment texts are joined in scan order;
an optional heuristic strips the phone status bar when it is recognized as
the first line and other text exists below it.
"""

from __future__ import annotations

import logging
import re
import shlex
import subprocess
import tempfile
import threading
from dataclasses import dataclass
from pathlib import Path

from .imaging import BoundingBox, GrayImage, RasterImage, SegmentationParams, segment

log = logging.getLogger(__name__)

DEFAULT_MAX_ENGINE_PROCESSES = 8
_engine_gate = threading.BoundedSemaphore(DEFAULT_MAX_ENGINE_PROCESSES)


def set_max_engine_processes(n: int) -> None:
    """Cap simultaneous engine subprocesses. Call before starting workers."""
    global _engine_gate
    if n < 1:
        raise ValueError("cap must be >= 1")
    _engine_gate = threading.BoundedSemaphore(n)


class EngineError(RuntimeError):
    """Base class for recognizer invocation failures; carries the segment box."""

    def __init__(self, message: str, box: BoundingBox | None = None):
        super().__init__(message)
        self.box = box


class EngineNotFound(EngineError):
    pass


class EngineTimeout(EngineError):
    pass


class EngineFailure(EngineError):
    pass


@dataclass(frozen=True)
class OcrEngineConfig:
    """How to run the external recognizer.

    ``command`` must contain ``{input}`` and ``{output}`` exactly once each;
    any other tokens are passed through verbatim.
    """

    command: str
    timeout: float = 30.0
    label: str = "external"

    def __post_init__(self):
        for ph in ("{input}", "{output}"):
            if self.command.count(ph) != 1:
                raise ValueError(f"command template must contain {ph} exactly once")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")

    def argv(self, input_path: str, output_base: str) -> list[str]:
        return [
            tok.replace("{input}", input_path).replace("{output}", output_base)
            for tok in shlex.split(self.command)
        ]


@dataclass(frozen=True)
class ExtractedText:
    """Assembled recognition output for one screenshot.

    ``text`` is the newline join of the per-segment texts (scan order);
    when ``banner_removed`` is set, the status-bar line has additionally been
    dropped from ``text``.
    """

    text: str
    segments: tuple[tuple[BoundingBox, str], ...] = ()
    banner_removed: bool = False


@dataclass(frozen=True)
class BannerRule:
    """Token classes that make a line look like a phone status bar.

    Kept configurable so analysts can extend the network-badge vocabulary per
    device family.
    """

    clock: re.Pattern = re.compile(r"^\d{1,2}:\d{2}(?:[ap]m)?$", re.IGNORECASE)
    meridiem: re.Pattern = re.compile(r"^[ap]m$", re.IGNORECASE)
    percent: re.Pattern = re.compile(r"^\d{1,3}%$")
    network_tokens: frozenset = frozenset(
        {"2g", "3g", "4g", "5g", "lte", "wifi", "wi-fi", "volte", "edge", "gprs",
         "hspa", "hspa+", "e", "h", "h+"}
    )

    def matches(self, line: str) -> bool:
        tokens = line.split()
        if not tokens:
            return False
        has_clock = False
        for tok in tokens:
            if self.clock.match(tok):
                has_clock = True
            elif self.meridiem.match(tok):
                pass
            elif self.percent.match(tok):
                pass
            elif tok.lower() in self.network_tokens:
                pass
            elif not any(c.isalnum() for c in tok):
                pass  # pure symbol run (battery/signal glyphs mangled by OCR)
            else:
                return False
        return has_clock


DEFAULT_BANNER_RULE = BannerRule()


def strip_banner(text: str, rule: BannerRule = DEFAULT_BANNER_RULE) -> tuple[str, bool]:
    """Drop a leading status-bar line, but only when other text remains.

    A screenshot whose only content is the status bar keeps it: stripping
    would leave nothing to index.
    """
    lines = text.split("\n")
    if len(lines) < 2:
        return text, False
    if not any(line.strip() for line in lines[1:]):
        return text, False
    if rule.matches(lines[0]):
        return "\n".join(lines[1:]), True
    return text, False


def _read_engine_output(output_base: Path) -> str | None:
    for candidate in (output_base.with_name(output_base.name + ".txt"), output_base):
        if candidate.is_file():
            return candidate.read_text(encoding="utf-8", errors="replace")
    return None


def recognize_segment(
    crop: GrayImage, cfg: OcrEngineConfig, box: BoundingBox | None = None
) -> str:
    """Run the engine on one crop and return its text, trailing whitespace trimmed.

    The crop goes to the engine via a temporary PNG; the result comes back
    through the ``{output}`` path. Line endings are normalized to ``\\n``.
    """
    from PIL import Image

    with tempfile.TemporaryDirectory(prefix="screenlens-ocr-") as td:
        tdir = Path(td)
        input_path = tdir / "segment.png"
        output_base = tdir / "segment-out"
        Image.fromarray(crop.pixels, mode="L").save(input_path)
        argv = cfg.argv(str(input_path), str(output_base))
        try:
            with _engine_gate:
                proc = subprocess.run(
                    argv, capture_output=True, timeout=cfg.timeout
                )
        except FileNotFoundError as exc:
            raise EngineNotFound(f"engine executable not found: {argv[0]}", box) from exc
        except subprocess.TimeoutExpired as exc:
            raise EngineTimeout(
                f"engine exceeded {cfg.timeout}s: {argv[0]}", box
            ) from exc
        if proc.returncode != 0:
            stderr = proc.stderr.decode("utf-8", "replace").strip()[-500:]
            raise EngineFailure(
                f"engine exited {proc.returncode}: {stderr or argv[0]}", box
            )
        text = _read_engine_output(output_base)
        if text is None:
            raise EngineFailure("engine produced no output file", box)
    return text.replace("\r\n", "\n").replace("\r", "\n").rstrip()


def extract_text(
    img: RasterImage,
    params: SegmentationParams,
    cfg: OcrEngineConfig,
    *,
    on_error: str = "skip",
    banner_strip: bool = False,
    banner_rule: BannerRule = DEFAULT_BANNER_RULE,
) -> ExtractedText:
    """Segment, recognize each crop, and join the non-empty texts in scan order.

    ``on_error='skip'`` (default) drops failing segments with a warning so one
    bad crop cannot void a screenshot; ``'abort'`` re-raises.
    """
    if on_error not in ("skip", "abort"):
        raise ValueError(f"unknown on_error policy: {on_error!r}")
    parts: list[tuple[BoundingBox, str]] = []
    for box, crop in segment(img, params):
        try:
            text = recognize_segment(crop, cfg, box=box)
        except EngineError as exc:
            if on_error == "abort":
                raise
            log.warning("segment %s skipped: %s", box, exc)
            continue
        if text:
            parts.append((box, text))
    full = "\n".join(t for _, t in parts)
    removed = False
    if banner_strip:
        full, removed = strip_banner(full, banner_rule)
    return ExtractedText(text=full, segments=tuple(parts), banner_removed=removed)
