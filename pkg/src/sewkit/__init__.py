"""Structure-preserving 3D garment modeling toolkit.

Sewing patterns are parsed into panel/stitch graphs, encoded per panel
group into PCA coefficient embeddings, decoded into per-panel UV-position
maps with masks, sewn/draped by minimizing inner-panel, inter-panel and
surface-normal losses, read out as triangulated meshes, and evaluated
with Chamfer / P2S / mean geodesic length error.
"""

from sewkit.geometry import (
    Panel,
    SeamedEdge,
    SewingPattern,
    Stitch,
    parse_pattern,
    serialize_pattern,
    validate,
)
from sewkit.groups import Embedding, GroupBasis, GroupDef, GroupRegistry

__version__ = "0.1.0"

__all__ = [
    "Panel",
    "SeamedEdge",
    "SewingPattern",
    "Stitch",
    "parse_pattern",
    "serialize_pattern",
    "validate",
    "Embedding",
    "GroupBasis",
    "GroupDef",
    "GroupRegistry",
    "__version__",
]
