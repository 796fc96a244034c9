"""Bundled example models."""

from importlib import resources
from pathlib import Path

NAMES = ("geometric", "linreg_flip", "linreg_score")


def path(name: str) -> Path:
    """Filesystem path of a bundled model, by stem (``geometric``) or file name."""
    stem = name[:-7] if name.endswith(".church") else name
    if stem not in NAMES:
        raise KeyError(f"no bundled model {name!r}; choose from {', '.join(NAMES)}")
    return Path(str(resources.files(__name__).joinpath(stem + ".church")))


def source(name: str) -> str:
    return path(name).read_text(encoding="utf-8")
