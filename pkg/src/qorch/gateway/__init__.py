from .app import GatewayError, Platform
from .server import ApiServer

__all__ = ["ApiServer", "GatewayError", "Platform"]
