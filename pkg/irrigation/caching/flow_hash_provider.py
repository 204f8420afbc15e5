import hashlib
import json
from typing import Any, Dict, Optional

from ..measure_core import PolygonalFlow
from ..measure_core.serialization import flow_to_dict


class FlowHashProvider:
    """Content hashes of flows and run settings to use as cache keys."""

    def __init__(self, digest_size: int = 32):
        """
        Initialize the hasher.

        Args:
            digest_size: Hex characters kept from the SHA-256 digest
        """
        self.digest_size = digest_size

    def _digest(self, payload: Any) -> str:
        text = json.dumps(payload, sort_keys=True, allow_nan=False)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:self.digest_size]

    def compute_hash(self, flow: PolygonalFlow, settings: Optional[Dict[str, Any]] = None) -> str:
        """
        Hash a flow together with the settings it is processed under.

        Args:
            flow: Flow to hash
            settings: JSON-serialisable settings mapping

        Returns:
            Hash string
        """
        return self._digest({"flow": flow_to_dict(flow), "settings": settings or {}})

    def settings_hash(self, settings: Dict[str, Any]) -> str:
        """Hash of a settings mapping alone (sweep cells without an input flow)."""
        return self._digest({"settings": settings})

    def are_equal(self, flow_a: PolygonalFlow, flow_b: PolygonalFlow) -> bool:
        return self.compute_hash(flow_a) == self.compute_hash(flow_b)
