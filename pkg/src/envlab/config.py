"""Centralised numerical tolerances."""

from __future__ import annotations

import contextlib
import dataclasses
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    normalization: float = 1e-9
    operator: float = 1e-10
    prune: float = 1e-12
    branch: float = 1e-9


_current = Tolerances()


def get_tolerances() -> Tolerances:
    return _current


def set_tolerances(**overrides) -> Tolerances:
    """Replace the active tolerances; returns the previous set."""
    global _current
    previous = _current
    _current = dataclasses.replace(_current, **overrides)
    return previous


@contextlib.contextmanager
def tolerances(**overrides):
    previous = set_tolerances(**overrides)
    try:
        yield _current
    finally:
        set_tolerances(**dataclasses.asdict(previous))
