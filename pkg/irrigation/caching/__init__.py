from .cache_manager import CacheManager
from .flow_hash_provider import FlowHashProvider

__all__ = ['CacheManager', 'FlowHashProvider']
