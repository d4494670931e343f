"""Explicable boundary trees.

Thin Python surface over the C++ core: build a compact boundary tree from
classifier embeddings, classify with traversal-path explanations, project
class boundaries, and flag samples from classes the model never saw.
"""

from ._ebtree import *  # noqa: F401,F403
from ._ebtree import __doc__ as _native_doc  # noqa: F401

__version__ = "0.1.0"
