"""FastAPI service wrapping the core translation pipeline."""

from .app import ServiceSettings, ServiceState, create_app

__all__ = ["ServiceSettings", "ServiceState", "create_app"]
