from .progress_consumer import BatchProgressConsumer

__all__ = [
    "BatchProgressConsumer",
]
