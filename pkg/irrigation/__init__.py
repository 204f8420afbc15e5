"""irrigation: branched-transport flows with weak boundary penalization.

Builds, optimizes and analyzes locally polygonal measure-valued flows and
checks their structural identities numerically.
"""

__version__ = '0.1.0'
