"""Offline spoken-language-understanding toolkit."""

__version__ = "0.1.0"

from .dataset import Dataset, load_dataset, validate_dataset  # noqa: E402
from .engine import EngineConfig, NluEngine, load_engine, parse, save_engine, train_engine  # noqa: E402
from .normalize import normalize, tokenize  # noqa: E402

__all__ = ["Dataset", "load_dataset", "validate_dataset", "EngineConfig", "NluEngine",
           "train_engine", "parse", "save_engine", "load_engine", "normalize", "tokenize"]
