"""FastAPI application exposing the route table."""

from __future__ import annotations

from importlib.metadata import PackageNotFoundError, version

from fastapi import FastAPI, HTTPException

from ..errors import NetsymError
from . import schemas as s
from .handlers import ROUTES


def _version() -> str:
    try:
        return version("netsym")
    except PackageNotFoundError:
        return "0.0.0+local"


def create_app() -> FastAPI:
    app = FastAPI(
        title="netsym",
        description=(
            "Permutation symmetry of layered networks: canonical reordering, "
            "pre-pruning masks, polynomial layers, and noisy-gradient equilibria."
        ),
        version=_version(),
    )

    @app.get("/health", response_model=s.HealthResponse)
    def health() -> s.HealthResponse:
        return s.HealthResponse(status="ok", version=_version())

    def _register(path: str, request_model: type, handler, response_model: type) -> None:
        def endpoint(req: request_model):  # type: ignore[valid-type]
            try:
                return handler(req)
            except (NetsymError, ValueError) as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc

        app.post(path, response_model=response_model, name=handler.__name__)(endpoint)

    for path, (request_model, handler, response_model) in ROUTES.items():
        _register(path, request_model, handler, response_model)

    return app


app = create_app()
