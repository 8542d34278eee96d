"""SAR despeckling through Gaussianizing transforms and weighted non-local sparse coding."""

from .errors import (
    ConfigError,
    DegenerateInputError,
    DomainError,
    RasterFormatError,
    SpecklekitError,
)
from .metrics import (
    MetricReport,
    RegionSpec,
    enl,
    epd_roa,
    epi,
    mean_intensity,
    parse_region_file,
    psnr,
    sqi,
    ssim,
)
from .pipeline import PipelineConfig, RunManifest, despeckle, load_config
from .raster import Raster, read_raster, write_raster
from .speckle import apply_speckle, sample_gamma_noise
from .transform import select_lambda, yeo_johnson, yeo_johnson_inverse

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DegenerateInputError",
    "DomainError",
    "MetricReport",
    "PipelineConfig",
    "Raster",
    "RasterFormatError",
    "RegionSpec",
    "RunManifest",
    "SpecklekitError",
    "apply_speckle",
    "despeckle",
    "enl",
    "epd_roa",
    "epi",
    "load_config",
    "mean_intensity",
    "parse_region_file",
    "psnr",
    "read_raster",
    "sample_gamma_noise",
    "select_lambda",
    "sqi",
    "ssim",
    "write_raster",
    "yeo_johnson",
    "yeo_johnson_inverse",
    "__version__",
]
