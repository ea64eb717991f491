"""
Middleware and error translation for the nsklimit service
"""
import time
import logging
from typing import Callable

from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .config import Settings
from .errors import ContaminationError, DomainError, NumericalError

logger = logging.getLogger(__name__)


async def _invalid_input(request: Request, exc: Exception) -> JSONResponse:
    return JSONResponse(status_code=422, content={"detail": str(exc), "error": type(exc).__name__})


async def _numerical_failure(request: Request, exc: Exception) -> JSONResponse:
    logger.error(f"{request.url.path} failed: {exc}")
    return JSONResponse(status_code=500, content={"detail": str(exc), "error": type(exc).__name__})


def setup_middleware(app: FastAPI, settings: Settings) -> None:
    """CORS from settings, request timing, and nsklimit errors mapped onto status codes"""

    app.add_middleware(
        CORSMiddleware,
        allow_origins=settings.cors_origins,
        allow_methods=["GET", "POST"],
        allow_headers=["*"],
    )

    # 422 for caller errors, 500 for solver failures
    app.add_exception_handler(DomainError, _invalid_input)
    app.add_exception_handler(ContaminationError, _invalid_input)
    app.add_exception_handler(NumericalError, _numerical_failure)

    slow = settings.slow_request_seconds

    @app.middleware("http")
    async def log_requests(request: Request, call_next: Callable) -> Response:
        start_time = time.time()
        logger.info(f"Request: {request.method} {request.url.path}")

        response = await call_next(request)

        process_time = time.time() - start_time
        if process_time >= slow:
            logger.warning(f"Slow request {request.method} {request.url.path}: {process_time:.2f}s")
        else:
            logger.info(f"Response: {response.status_code} - Processed in {process_time:.4f}s")
        response.headers["X-Process-Time"] = str(process_time)
        return response

    @app.middleware("http")
    async def error_handling(request: Request, call_next: Callable) -> Response:
        try:
            return await call_next(request)
        except Exception:
            logger.exception(f"Unhandled error in request {request.url.path}")
            return JSONResponse(status_code=500, content={"detail": "Internal server error"})
