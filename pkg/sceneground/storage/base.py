"""
Abstract base class for result storage backends.
Allows swapping the local output directory for other stores.
"""
from abc import ABC, abstractmethod
from typing import Any, Dict, List, Mapping

from sceneground.scene.models import Mask2D


class ResultStore(ABC):
    """
    Abstract storage interface for per-query grounding artifacts.

    Every write is keyed by query_id; writing twice replaces the earlier artifact.
    """

    @abstractmethod
    async def initialize(self) -> None:
        """
        Prepare the store (create directories, connect, etc.).
        Called once before the first write.
        """
        pass

    async def close(self) -> None:
        """Release resources. Default: nothing to release."""

    # =========================================================================
    # PER-QUERY ARTIFACTS
    # =========================================================================

    @abstractmethod
    async def save_transcript(self, query_id: str, transcript: Mapping[str, Any]) -> None:
        """Save the agent transcript (messages, feedbacks, outcome)."""
        pass

    @abstractmethod
    async def save_result(self, query_id: str, result: Mapping[str, Any]) -> None:
        """
        Save the grounding result.

        Args:
            query_id: Query the result belongs to
            result: {query_id, status, box, views_used, views_rejected, point_counts, ...}
        """
        pass

    @abstractmethod
    async def save_timing(self, query_id: str, timings: Mapping[str, float]) -> None:
        """Save per-stage wall time in seconds."""
        pass

    @abstractmethod
    async def save_mask(self, query_id: str, mask: Mask2D) -> None:
        """Save the anchor mask used for projection."""
        pass

    # =========================================================================
    # RUN-LEVEL ARTIFACTS
    # =========================================================================

    @abstractmethod
    async def save_manifest(self, manifest: Mapping[str, Any]) -> None:
        """Save the run manifest (config snapshot, versions, argv, seed)."""
        pass

    @abstractmethod
    async def write_results_index(self) -> int:
        """
        Collect every saved result into one JSON-lines file, ordered by query_id.

        Returns:
            Number of results written
        """
        pass

    @abstractmethod
    async def load_results(self) -> List[Dict[str, Any]]:
        """All saved results, ordered by query_id."""
        pass

    @abstractmethod
    async def health_check(self) -> bool:
        """
        Check the store is writable.

        Returns:
            True if healthy, False otherwise
        """
        pass
