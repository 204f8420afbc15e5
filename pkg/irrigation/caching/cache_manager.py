import logging
import os
import time
from typing import Any, Dict, Optional

from ..errors import FlowFormatError
from ..measure_core.serialization import atomic_write_text, dumps, loads

try:
    import redis
    REDIS_AVAILABLE = True
except ImportError:
    REDIS_AVAILABLE = False

logger = logging.getLogger(__name__)

KEY_PREFIX = "irrigation:"


class CacheManager:
    """
    Cache for solved sweep cells and other expensive results.

    Entries are JSON mappings. A reachable redis server takes precedence over
    the file cache; files older than ``ttl`` seconds count as missing.
    """

    def __init__(self, cache_dir: str = 'cache',
                 redis_url: Optional[str] = None,
                 ttl: int = 86400):
        """
        Args:
            cache_dir: Directory for local file cache
            redis_url: Redis connection URL (e.g. redis://localhost:6379/0)
            ttl: Time-to-live for cache entries in seconds
        """
        self.cache_dir = cache_dir
        self.ttl = ttl
        self.redis_url = redis_url
        self.redis_client = None
        os.makedirs(cache_dir, exist_ok=True)

        if not redis_url:
            return
        if not REDIS_AVAILABLE:
            logger.warning("redis is not installed, using the file cache only")
            return
        try:
            client = redis.from_url(redis_url)
            client.ping()
            self.redis_client = client
        except Exception as e:
            logger.warning("Failed to connect to Redis at %s: %s", redis_url, e)

    @classmethod
    def from_config(cls, config: Dict = None) -> Optional["CacheManager"]:
        """Cache described by the `cache` configuration section, or None when disabled."""
        config = config or {}
        if not config.get("enabled", False):
            return None
        return cls(cache_dir=config.get("cache_dir", "cache"),
                   redis_url=config.get("redis_url"),
                   ttl=int(config.get("ttl", 86400)))

    def _path(self, key: str) -> str:
        return os.path.join(self.cache_dir, f"{key}.json")

    def _drop_file(self, path: str) -> bool:
        try:
            os.remove(path)
            return True
        except FileNotFoundError:
            return True
        except OSError as e:
            logger.warning("Failed to remove cache file %s: %s", path, e)
            return False

    def _read_file(self, key: str) -> Optional[Dict[str, Any]]:
        path = self._path(key)
        try:
            age = time.time() - os.path.getmtime(path)
        except OSError:
            return None
        if age >= self.ttl:
            self._drop_file(path)
            return None
        try:
            with open(path, 'r') as f:
                return loads(f.read())
        except (OSError, FlowFormatError):
            logger.warning("Dropping unreadable cache file %s", path)
            self._drop_file(path)
            return None

    def get(self, key: str) -> Optional[Dict[str, Any]]:
        """Cached mapping for ``key``, or None when missing or expired."""
        if self.redis_client:
            try:
                raw = self.redis_client.get(KEY_PREFIX + key)
                if raw:
                    return loads(raw.decode() if isinstance(raw, bytes) else raw)
            except FlowFormatError:
                logger.warning("Ignoring malformed Redis entry %s", key)
            except Exception as e:
                logger.warning("Failed to read from Redis: %s", e)
        return self._read_file(key)

    def set(self, key: str, data: Dict[str, Any]) -> bool:
        """Store a JSON-serialisable mapping; returns whether a backend accepted it."""
        text = dumps(data)
        if self.redis_client:
            try:
                return bool(self.redis_client.setex(KEY_PREFIX + key, self.ttl, text))
            except Exception as e:
                logger.warning("Failed to store in Redis, falling back to files: %s", e)
        try:
            atomic_write_text(self._path(key), text)
            return True
        except OSError as e:
            logger.warning("Failed to write cache file: %s", e)
            return False

    def invalidate(self, key: str) -> bool:
        ok = True
        if self.redis_client:
            try:
                self.redis_client.delete(KEY_PREFIX + key)
            except Exception:
                ok = False
        return self._drop_file(self._path(key)) and ok

    def clear(self) -> bool:
        """Remove every entry under this cache's prefix and directory."""
        ok = True
        if self.redis_client:
            try:
                keys = self.redis_client.keys(KEY_PREFIX + "*")
                if keys:
                    self.redis_client.delete(*keys)
            except Exception:
                ok = False
        for name in os.listdir(self.cache_dir):
            if name.endswith(".json"):
                ok = self._drop_file(os.path.join(self.cache_dir, name)) and ok
        return ok
