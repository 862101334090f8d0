from .config import ConfigError, RunConfig, format_config, load_config, parse_text
from .io import export_matrices, import_matrix, read_snapshot, snapshot_state, write_snapshot
from .runner import run_config, setup

__all__ = [
    "ConfigError", "RunConfig", "format_config", "load_config", "parse_text",
    "export_matrices", "import_matrix", "read_snapshot", "snapshot_state", "write_snapshot",
    "run_config", "setup",
]
