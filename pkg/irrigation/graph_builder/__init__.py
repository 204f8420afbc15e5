from .networkx_builder import NetworkXBuilder

__all__ = ['NetworkXBuilder']
