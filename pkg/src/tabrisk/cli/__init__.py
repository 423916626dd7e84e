from .config import RunConfig, load_config, parse_config
from .main import cli, main

__all__ = ["RunConfig", "load_config", "parse_config", "cli", "main"]
