"""Latency model inpainting: spatio-temporal RTT distributions from uneven traces."""

from .confidence import ServiceRequirement, region_model, service_report
from .patching import GridSpec, PatchConfig, RegionMap, assign_regions, find_candidate, patch_region
from .statdist import StepCdf, WeightFunction, empirical_cdf, kde_pdf, kr_distance
from .traces import DEFAULT_GMM, GmmSpec, Sample, generate_synthetic_trace, parse_trace, summarize
from .vae import VaeHyper, VaeModel, elbo, grad_check, sample_vae, train_vae

__version__ = "0.1.0"

__all__ = [
    "ServiceRequirement", "region_model", "service_report",
    "GridSpec", "PatchConfig", "RegionMap", "assign_regions", "find_candidate", "patch_region",
    "StepCdf", "WeightFunction", "empirical_cdf", "kde_pdf", "kr_distance",
    "DEFAULT_GMM", "GmmSpec", "Sample", "generate_synthetic_trace", "parse_trace", "summarize",
    "VaeHyper", "VaeModel", "elbo", "grad_check", "sample_vae", "train_vae",
]
