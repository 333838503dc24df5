import functools
import json
import logging
import os
import time
from typing import Any, Callable, Tuple, TypeVar, cast

# Type variable for function decorators
F = TypeVar('F', bound=Callable[..., Any])

logger = logging.getLogger("clt_transport")


def timed(func: Callable[..., Any]) -> Callable[..., Tuple[Any, float]]:
    """
    Decorator returning (result, elapsed seconds) instead of the bare result.
    """
    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Tuple[Any, float]:
        start_time = time.perf_counter()
        result = func(*args, **kwargs)
        elapsed = time.perf_counter() - start_time
        logger.debug(f"Function {func.__name__} completed in {elapsed:.3f}s")
        return result, elapsed

    return wrapper


def time_function(func: F) -> F:
    """
    Decorator to measure and log function execution time
    """
    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        start_time = time.perf_counter()
        result = func(*args, **kwargs)
        elapsed = time.perf_counter() - start_time
        logger.debug(f"Function {func.__name__} completed in {elapsed:.3f}s")
        return result

    return cast(F, wrapper)


def dump_object(obj: Any, name: str, directory: str) -> str:
    """
    Dump a report object to a JSON file for debugging.

    Returns:
        str: Path of the written file
    """
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, f"{name}_{int(time.time())}.json")

    if hasattr(obj, "model_dump"):
        data = obj.model_dump()
    elif hasattr(obj, "__dict__"):
        data = obj.__dict__
    else:
        data = obj

    with open(path, 'w') as f:
        json.dump(data, f, default=str, indent=2)

    logger.debug(f"Dumped {name} object to {path}")
    return path
