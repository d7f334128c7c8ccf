"""Command line interface and configuration handling."""

from .config import ConfigError, RunConfig, emit_config, parse_config
from .main import main, run
