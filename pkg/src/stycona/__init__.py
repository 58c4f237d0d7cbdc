"""SVD style/content decomposition and StyCona augmentation.

The segmentation benchmark lives in :mod:`stycona.deskbench` and is not
imported here because it pulls in torch.
"""

from .augmentation import (
    AugmentConfig,
    AugmentRecord,
    augment_batch,
    augment_sample,
    content_mix,
    read_records,
    stream,
    style_blend,
    stycona,
    stycona_factors,
    write_records,
)
from .decomposition import StyleContent, as_image, content_maps, decompose, style_swap
from .errors import FormatError, ImageIOError, InvalidInput, NumericalFailure, StyconaError
from .linalg import SvdFactors, rank_one, reconstruct, svd
from .metrics import MetricReport, asd, dsc, histogram_distance, segmentation_report, style_shift

__version__ = "0.1.0"

__all__ = [
    "AugmentConfig", "AugmentRecord", "augment_batch", "augment_sample", "content_mix",
    "read_records", "stream", "style_blend", "stycona", "stycona_factors", "write_records",
    "StyleContent", "as_image", "content_maps", "decompose", "style_swap",
    "FormatError", "ImageIOError", "InvalidInput", "NumericalFailure", "StyconaError",
    "SvdFactors", "rank_one", "reconstruct", "svd",
    "MetricReport", "asd", "dsc", "histogram_distance", "segmentation_report", "style_shift",
]
