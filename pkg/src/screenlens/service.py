"""Read-only HTTP search API over a loaded index snapshot.

Endpoints:
  GET /search?q=&category=&page=&page_size=   ranked hits, paginated
  GET /doc/{id}                               the full six-field record
  GET /doc/{id}/image                         the screenshot bytes
  GET /doc/{id}/neighbors                     previous/next ids on the timeline

The app holds an immutable index snapshot on ``app.state``; swapping in a
freshly built index is a single reference assignment, so concurrent readers
never observe a torn state. No endpoint mutates the index.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response

from .index import InvertedIndex

EXCERPT_CHARS = 200
MAX_PAGE_SIZE = 100
_MEDIA_TYPES = {".png": "image/png", ".jpg": "image/jpeg", ".jpeg": "image/jpeg"}


def _resolve_neighbor(idx: InvertedIndex, link: str | None) -> str | None:
    """Map a stored timeline link (image path or id) back to a document id."""
    if not link:
        return None
    if idx.get(link) is not None:
        return link
    stem = Path(link).stem
    if idx.get(stem) is not None:
        return stem
    return None


def _image_file(idx: InvertedIndex, doc, images_dir: Path | None) -> Path | None:
    if doc.image_path:
        return Path(doc.image_path)
    if images_dir is not None:
        for suffix in _MEDIA_TYPES:
            candidate = images_dir / f"{doc.id}{suffix}"
            if candidate.is_file():
                return candidate
        return images_dir / f"{doc.id}.png"  # definite miss; reported as 410
    return None


def create_app(index: InvertedIndex, images_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="screenlens search")
    app.state.index = index
    app.state.images_dir = Path(images_dir) if images_dir else None
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["GET"], allow_headers=["*"]
    )

    @app.exception_handler(RequestValidationError)
    async def bad_request(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    def doc_or_404(doc_id: str):
        doc = app.state.index.get(doc_id)
        if doc is None:
            raise HTTPException(status_code=404, detail=f"unknown document id: {doc_id}")
        return doc

    def timestamp_str(doc):
        return doc.timestamp.strftime("%Y-%m-%dT%H:%M:%SZ")

    @app.get("/search")
    def search(q: str = "", category: str | None = None, page: int = 1, page_size: int = 20):
        if page < 1:
            raise HTTPException(status_code=400, detail="page must be >= 1")
        if not 1 <= page_size <= MAX_PAGE_SIZE:
            raise HTTPException(
                status_code=400, detail=f"page_size must be in [1, {MAX_PAGE_SIZE}]"
            )
        idx: InvertedIndex = app.state.index
        ranked = idx.search(q, category=category, k=max(idx.doc_count, 1))
        start = (page - 1) * page_size
        hits = []
        for hit in ranked[start:start + page_size]:
            doc = idx.get(hit.doc_id)
            hits.append(
                {
                    "id": doc.id,
                    "timestamp": timestamp_str(doc),
                    "category": doc.category,
                    "score": hit.score,
                    "excerpt": doc.text[:EXCERPT_CHARS],
                    "image": f"/doc/{doc.id}/image",
                    "previous": _resolve_neighbor(idx, doc.previous_image),
                    "next": _resolve_neighbor(idx, doc.next_image),
                }
            )
        return {"total": len(ranked), "hits": hits}

    @app.get("/doc/{doc_id}")
    def get_doc(doc_id: str):
        doc = doc_or_404(doc_id)
        return {
            "id": doc.id,
            "timestamp": timestamp_str(doc),
            "category": doc.category,
            "text": doc.text,
            "previous_image": doc.previous_image,
            "next_image": doc.next_image,
        }

    @app.get("/doc/{doc_id}/image")
    def get_image(doc_id: str):
        doc = doc_or_404(doc_id)
        path = _image_file(app.state.index, doc, app.state.images_dir)
        if path is None or not path.is_file():
            raise HTTPException(status_code=410, detail=f"image file missing for {doc_id}")
        media_type = _MEDIA_TYPES.get(path.suffix.lower(), "application/octet-stream")
        return Response(content=path.read_bytes(), media_type=media_type)

    @app.get("/doc/{doc_id}/neighbors")
    def get_neighbors(doc_id: str):
        doc = doc_or_404(doc_id)
        idx: InvertedIndex = app.state.index
        return {
            "previous": _resolve_neighbor(idx, doc.previous_image),
            "next": _resolve_neighbor(idx, doc.next_image),
        }

    return app
