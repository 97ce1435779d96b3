from .config import RunConfig, load_preset, parse_config, parse_config_dict
from .grid import grid_search, lr_sweep
from .runner import run_experiment

__all__ = [
    "RunConfig",
    "grid_search",
    "load_preset",
    "lr_sweep",
    "parse_config",
    "parse_config_dict",
    "run_experiment",
]
