from .config import ServiceConfig
from .core import ServiceError, TaskService

__all__ = ["ServiceConfig", "ServiceError", "TaskService"]
