from .pool import run_parallel

__all__ = ("run_parallel",)
