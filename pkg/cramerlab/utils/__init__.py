"""Utilities for cramerlab."""

from cramerlab.utils.logger import init_logger

__all__ = ["init_logger"]
