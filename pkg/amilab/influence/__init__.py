from .distance import discrete_distances, distance, mixture_distances
from .information import InfluenceDecomposition, decompose_mi, entropy_kl_identity
from .reward import InfluencePieces, InfluenceRecord, ami_influence_reward, variant_reward
from .toy import toy_example

__all__ = [
    "InfluenceDecomposition",
    "InfluencePieces",
    "InfluenceRecord",
    "ami_influence_reward",
    "decompose_mi",
    "discrete_distances",
    "distance",
    "entropy_kl_identity",
    "mixture_distances",
    "toy_example",
    "variant_reward",
]
