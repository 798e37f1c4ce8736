from .logging import LogFormat, configure_logging
from .settings import BoundMode, NegativityPolicy, Settings, get_settings

__all__ = ["BoundMode", "LogFormat", "NegativityPolicy", "Settings", "configure_logging", "get_settings"]
