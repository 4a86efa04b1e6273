"""Cost-aware routing of coding problems to candidate code LLMs.

Offline: benchmark records are ranked with a cost-penalized score,
reasoning-trace lengths are clustered into difficulty tiers, a projection
head is fine-tuned with a triplet loss over those tiers, and a boosted-tree
classifier learns the optimal-model label. Online: a gateway loads the
trained artifacts and answers routing requests per prompt.
"""

from .corpus import (
    CandidatePool,
    Corpus,
    CotRecord,
    ModelProfile,
    Problem,
    ResponseRecord,
    load_corpus,
)
from .router import GatewayConfig, RouteDecision, Router

__all__ = [
    "CandidatePool",
    "Corpus",
    "CotRecord",
    "GatewayConfig",
    "ModelProfile",
    "Problem",
    "ResponseRecord",
    "RouteDecision",
    "Router",
    "load_corpus",
]

__version__ = "0.1.0"
