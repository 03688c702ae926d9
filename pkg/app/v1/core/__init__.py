from .config import RunConfig, get_settings, load_config

__all__ = ["RunConfig", "get_settings", "load_config"]
