"""Label-map augmentation toolkit: separation/recomposition of semantic label
maps, distribution rebalancing, palette rendering, dataset mixing, and a
desk-scale segmentation experiment driver."""

from segaug._segaug import *  # noqa: F401,F403
from segaug._segaug import __doc__  # noqa: F401

__version__ = "0.1.0"
