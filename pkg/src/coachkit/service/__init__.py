from coachkit.service.config import ServiceConfig
from coachkit.service.api import create_app

__all__ = ["ServiceConfig", "create_app"]
