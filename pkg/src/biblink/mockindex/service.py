"""HTTP front end for :class:`MockIndex`, speaking the ``/evaluate`` wire format."""

from __future__ import annotations

import json
from typing import Optional

from fastapi import FastAPI, Header, HTTPException, Query
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict

from ..indexclient import API_KEY_HEADER
from ..queryexpr import QuerySyntaxError
from .core import MockIndex, render_evaluate

__all__ = ["EvaluateResponse", "InProcessTransport", "create_app", "serve"]

MAX_COUNT = 1000


class Author(BaseModel):
    AuN: str


class Journal(BaseModel):
    JN: str


class Extended(BaseModel):
    DOI: str


class Entity(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    Id: int
    Ti: Optional[str] = None
    Y: Optional[int] = None
    CC: Optional[int] = None
    AA: Optional[list[Author]] = None
    J: Optional[Journal] = None
    E: Optional[Extended] = None


class EvaluateResponse(BaseModel):
    expr: str
    entities: list[Entity]


class ErrorDetail(BaseModel):
    message: str
    offset: Optional[int] = None


def _split_attributes(attributes: str | None) -> list[str] | None:
    if not attributes:
        return None
    return [a.strip() for a in attributes.split(",") if a.strip()]


def create_app(index: MockIndex, api_key: str | None = None) -> FastAPI:
    """Build the service. With ``api_key`` set, requests must present it."""
    app = FastAPI(title="biblink mock index")
    app.state.index = index

    @app.get("/evaluate", response_model=EvaluateResponse, response_model_exclude_none=True,
             responses={400: {"model": ErrorDetail}})
    def evaluate(
        expr: str = Query(...),
        count: int = Query(10, ge=1, le=MAX_COUNT),
        attributes: Optional[str] = Query(None),
        key: Optional[str] = Header(None, alias=API_KEY_HEADER),
    ):
        if api_key is not None and key != api_key:
            raise HTTPException(status_code=401, detail="invalid subscription key")
        try:
            return render_evaluate(index, expr, count, _split_attributes(attributes))
        except QuerySyntaxError as exc:
            return JSONResponse(status_code=400,
                                content={"message": str(exc), "offset": exc.offset})

    @app.get("/health")
    def health():
        return {"documents": len(index)}

    return app


class InProcessTransport:
    """Client transport that answers from a :class:`MockIndex` without sockets.

    Produces the same status codes and JSON bodies as the HTTP service, so
    the client's parsing path is exercised unchanged.
    """

    def __init__(self, index: MockIndex, api_key: str | None = None):
        self.index = index
        self.api_key = api_key
        self.requests = 0

    def __call__(self, url, params, headers):
        self.requests += 1
        if not url.endswith("/evaluate"):
            return 404, json.dumps({"detail": "Not Found"})
        if self.api_key is not None and headers.get(API_KEY_HEADER) != self.api_key:
            return 401, json.dumps({"detail": "invalid subscription key"})
        try:
            count = int(params.get("count", 10))
        except ValueError:
            return 422, json.dumps({"detail": "count must be an integer"})
        if not 1 <= count <= MAX_COUNT:
            return 422, json.dumps({"detail": "count out of range"})
        try:
            body = render_evaluate(self.index, params["expr"], count,
                                   _split_attributes(params.get("attributes")))
        except QuerySyntaxError as exc:
            return 400, json.dumps({"message": str(exc), "offset": exc.offset})
        return 200, json.dumps(body, separators=(",", ":"))


def serve(index: MockIndex, host: str = "127.0.0.1", port: int = 8000,
          api_key: str | None = None) -> None:
    """Run the service until interrupted."""
    import uvicorn

    uvicorn.run(create_app(index, api_key), host=host, port=port, log_level="info")
