"""
FastAPI application for nsklimit
"""
import logging
from contextlib import asynccontextmanager

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse

from . import __version__
from .api import api_router
from .config import Settings
from .middleware import setup_middleware

logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Application lifespan manager"""
    settings = app.state.settings
    logger.info(f"{settings.app_name} {settings.app_version} ready (max cells {settings.max_service_cells})")
    yield


def create_app() -> FastAPI:
    """Create and configure the FastAPI application"""
    app = FastAPI(
        title="nsklimit",
        description="Riemann, entropy and NSK simulation service",
        version=__version__,
        docs_url="/docs",
        redoc_url="/redoc",
        lifespan=lifespan,
    )

    app.state.settings = Settings()
    setup_middleware(app, app.state.settings)
    app.include_router(api_router, prefix="/api/v1", tags=["API"])

    @app.get("/")
    async def root():
        """Service root"""
        return {"message": "nsklimit", "version": __version__, "docs": "/docs", "api": "/api/v1"}

    @app.get("/health")
    async def health_check():
        """Health check endpoint"""
        return {"status": "healthy", "service": "nsklimit"}

    @app.exception_handler(404)
    async def not_found_handler(request: Request, exc: HTTPException):
        detail = getattr(exc, "detail", None) or "Resource not found"
        return JSONResponse(status_code=404, content={"detail": detail})

    return app


app = create_app()


def main():
    """Main entry point for running the service"""
    import uvicorn

    settings = Settings()
    uvicorn.run("nsklimit.main:app", host=settings.host, port=settings.port)


if __name__ == "__main__":
    main()
