from typing import Any, Optional, Union

from rich.console import Console
from rich.style import Style
from rich.theme import Theme

DEBUG = 10
INFO = 20
WARN = 30
ERROR = 40

custom_theme = Theme(
    {
        "debug": "bold blue",
        "info": "bold green",
        "run": "bold cyan",
        "warn": "bold yellow",
        "error": "bold red",
    }
)
console = Console(theme=custom_theme, stderr=True)

_level = INFO


def set_level(level: int) -> None:
    global _level
    _level = level


def enabled(level: int) -> bool:
    return level >= _level


def _emit(
    level: int,
    tag: str,
    *objects: Any,
    sep: str = " ",
    end: str = "\n",
    style: Optional[Union[str, Style]] = None,
    highlight: Optional[bool] = None,
    _stack_offset: int = 1,
) -> None:
    if level < _level:
        return
    console.log(
        f"[{tag}]{tag.upper()}[/{tag}]",
        *objects,
        sep=sep,
        end=end,
        style=style,
        highlight=highlight,
        _stack_offset=_stack_offset + 2,
    )


def debug(*objects: Any, _stack_offset: int = 1, **kwargs: Any) -> None:
    _emit(DEBUG, "debug", *objects, _stack_offset=_stack_offset, **kwargs)


def info(*objects: Any, _stack_offset: int = 1, **kwargs: Any) -> None:
    _emit(INFO, "info", *objects, _stack_offset=_stack_offset, **kwargs)


def run(*objects: Any, _stack_offset: int = 1, **kwargs: Any) -> None:
    """Per-run progress line, shown at INFO."""
    _emit(INFO, "run", *objects, _stack_offset=_stack_offset, **kwargs)


def warn(*objects: Any, _stack_offset: int = 1, **kwargs: Any) -> None:
    _emit(WARN, "warn", *objects, _stack_offset=_stack_offset, **kwargs)


def error(*objects: Any, _stack_offset: int = 1, **kwargs: Any) -> None:
    _emit(ERROR, "error", *objects, _stack_offset=_stack_offset, **kwargs)
