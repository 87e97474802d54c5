"""Cross-linguistic semantic affinity toolkit.

Builds a shared multilingual word-vector space from per-language embeddings
and bilingual dictionaries, then measures how tightly each concept's
translations cluster, how far apart languages sit semantically, and how
those quantities relate to frequency, polysemy, word length, phylogeny,
geography and climate.
"""

__version__ = "0.1.0"

from semaff.errors import SemAffError

__all__ = ["SemAffError", "__version__"]
