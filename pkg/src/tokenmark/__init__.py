"""tokenmark: multi-bit, tamper-aware watermarking for generated code.

Embeds a user-attributable payload by constraining token selection to
hash-seeded vocabulary partitions during generation, skipping easily
tampered code elements, and recovers the payload from code text alone.
"""

from tokenmark.detector import DetectionResult, detect
from tokenmark.embedder import EmbedConfig, EmbedResult, EmbedSession, embed
from tokenmark.payload import WatermarkPayload, encode_user_id, recover
from tokenmark.providers import make_mock_provider
from tokenmark.skipper import PatternSets
from tokenmark.vocab import HashChain, PartitionMask, Vocabulary, load_vocabulary, partition

__version__ = "0.1.0"

__all__ = [
    "DetectionResult",
    "detect",
    "EmbedConfig",
    "EmbedResult",
    "EmbedSession",
    "embed",
    "WatermarkPayload",
    "encode_user_id",
    "recover",
    "make_mock_provider",
    "PatternSets",
    "HashChain",
    "PartitionMask",
    "Vocabulary",
    "load_vocabulary",
    "partition",
    "__version__",
]
