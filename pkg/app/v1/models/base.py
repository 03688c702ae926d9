"""
Base classes for the domain models.

This module provides the foundational pydantic classes used throughout the package:
- DomainModel: immutable, strictly-keyed model for scalar/record data
- ArrayModel: DomainModel that may hold numpy arrays (frozen to read-only on validation)
- readonly_array: coercion helper used by ArrayModel field validators
"""

from __future__ import annotations

from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict


def readonly_array(value: Any, dtype: Any = np.float64) -> np.ndarray:
    """
    Copy ``value`` into a fresh numpy array and mark it read-only.

    Args:
        value: Anything ``np.array`` accepts.
        dtype: Target dtype.

    Returns:
        A non-writeable array that no caller can mutate in place.
    """
    array = np.array(value, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


class DomainModel(BaseModel):
    """Base class for all immutable domain records."""

    model_config = ConfigDict(frozen=True, extra="forbid")


class ArrayModel(DomainModel):
    """
    Domain record holding numpy arrays.

    Subclasses coerce their array fields through ``readonly_array`` in
    ``mode="before"`` validators, so an instance is safe to share across
    threads once constructed.
    """

    model_config = ConfigDict(frozen=True, extra="forbid", arbitrary_types_allowed=True)
