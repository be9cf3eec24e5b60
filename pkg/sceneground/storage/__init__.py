"""Result persistence."""
from sceneground.storage.base import ResultStore
from sceneground.storage.local import LocalResultStore, read_json, read_results_file, write_json

__all__ = ["LocalResultStore", "ResultStore", "read_json", "read_results_file", "write_json"]
