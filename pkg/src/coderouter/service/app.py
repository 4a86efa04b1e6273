"""HTTP gateway: loads trained artifacts at startup and serves routing
decisions, optionally proxying generation to OpenAI-compatible backends.

Requests never mutate state; the loaded router is shared read-only across
concurrent requests.
"""

from __future__ import annotations

import logging
import time
from contextlib import asynccontextmanager

import httpx
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from ..router import GatewayConfig, Router
from .schemas import (
    GenerateRequest,
    HealthResponse,
    ModelInfo,
    ModelsResponse,
    RouteDecisionModel,
    RouteRequest,
)

log = logging.getLogger("coderouter.service")


def _setup_logging() -> None:
    if log.handlers:
        return
    handler = logging.StreamHandler()
    formatter = logging.Formatter(
        "%(asctime)s.%(msecs)03dZ %(levelname)s %(name)s %(message)s",
        datefmt="%Y-%m-%dT%H:%M:%S",
    )
    formatter.converter = time.gmtime  # UTC ISO-8601 timestamps
    handler.setFormatter(formatter)
    log.addHandler(handler)
    log.setLevel(logging.INFO)


def create_app(config: GatewayConfig, http_client: httpx.AsyncClient | None = None) -> FastAPI:
    """Build the gateway app. Artifacts load during startup; until then (and
    if loading fails) /healthz reports 503. `http_client` is injectable so
    tests can stub the backends."""
    _setup_logging()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        app.state.router = Router.load(config)  # aborts startup on artifact errors
        app.state.client = http_client or httpx.AsyncClient()
        log.info("artifacts loaded: %s", ", ".join(sorted(app.state.router.fingerprints)))
        try:
            yield
        finally:
            await app.state.client.aclose()
            app.state.router = None

    app = FastAPI(title="coderouter gateway", lifespan=lifespan)
    app.state.router = None
    app.state.config = config

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"error": "bad_request", "detail": str(exc.errors()[:3])},
        )

    def _router() -> Router | None:
        return app.state.router

    @app.get("/healthz", response_model=HealthResponse)
    async def healthz():
        if _router() is None:
            return JSONResponse(status_code=503, content={"status": "loading"})
        return HealthResponse(status="ok")

    @app.get("/v1/models", response_model=ModelsResponse)
    async def models():
        router = _router()
        if router is None:
            return JSONResponse(status_code=503, content={"error": "not_ready", "detail": "artifacts not loaded"})
        return ModelsResponse(
            models=[
                ModelInfo(model_id=m.model_id, price_per_mtok=m.price_per_mtok, params_b=m.params_b)
                for m in router.pool.models
            ],
            sample_count=router.pool.sample_count,
        )

    @app.post("/v1/route", response_model=RouteDecisionModel)
    async def route(body: RouteRequest):
        router = _router()
        if router is None:
            return JSONResponse(status_code=503, content={"error": "not_ready", "detail": "artifacts not loaded"})
        decision = router.route(body.prompt, body.problem_id)
        return RouteDecisionModel(**decision.to_dict())

    @app.post("/v1/generate")
    async def generate(body: GenerateRequest):
        router = _router()
        if router is None:
            return JSONResponse(status_code=503, content={"error": "not_ready", "detail": "artifacts not loaded"})
        decision = router.route(body.prompt, body.problem_id)
        backend = config.backends.get(decision.model_id)
        if backend is None:
            return JSONResponse(
                status_code=502,
                content={
                    "error": "no_backend_configured",
                    "detail": f"no backend for model {decision.model_id!r}",
                    "route": decision.to_dict(),
                },
            )
        payload = {
            "model": decision.model_id,
            "messages": [{"role": "user", "content": body.prompt}],
        }
        url = backend.base_url.rstrip("/") + "/v1/chat/completions"
        try:
            response = await app.state.client.post(url, json=payload, timeout=backend.timeout_s)
            response.raise_for_status()
            completion = response.json()
        except (httpx.HTTPError, ValueError) as exc:
            log.warning("backend %s unreachable: %s", url, exc)
            return JSONResponse(
                status_code=502,
                content={
                    "error": "backend_unreachable",
                    "detail": f"{type(exc).__name__}: {exc}",
                    "route": decision.to_dict(),
                },
            )
        return {"route": decision.to_dict(), "completion": completion}

    return app
