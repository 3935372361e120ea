"""Desk-scale massive MIMO downlink lab.

Joint user scheduling, antenna allocation, and hybrid precoding exposed as
a componentized per-TTI action space, wrapped in an MDP environment, with
a DDPG agent (action embedding) that learns to pick algorithm combinations
and a harness comparing it against static combinations and simplified
literature baselines.
"""

__version__ = "0.1.0"

from .actions import ActionTriple, ALL_TRIPLES, embed, parse_triple  # noqa: F401
from .config import LabConfig, load_config  # noqa: F401
from .env import MimoEnv  # noqa: F401
