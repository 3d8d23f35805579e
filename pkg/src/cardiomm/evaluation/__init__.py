"""Image metrics, biomarker analysis and agreement statistics."""

from .biomarkers import (FitResult, PhenotypeReport, WallThickness, cardiac_output,
                         derived_indices, fit_t1, fit_t2, fwhm_lge_mass, lvmwt_aha,
                         lvmwt_aha_volume, phenotypes, wall_thickness_rays)
from .metrics import (Summary, gaussian_window, image_metrics, normalized_pair, psnr, ssim,
                      ssim_map, summarize)
from .stats import (AgreementReport, PairedTests, agreement_stats, auc, auc_labels,
                    bland_altman, bootstrap_auc_diff, linreg, mae, paired_t, paired_tests, pcc)

__all__ = [
    "FitResult", "PhenotypeReport", "WallThickness", "cardiac_output", "derived_indices",
    "fit_t1", "fit_t2", "fwhm_lge_mass", "lvmwt_aha", "lvmwt_aha_volume", "phenotypes",
    "wall_thickness_rays", "Summary", "gaussian_window", "image_metrics", "normalized_pair",
    "psnr", "ssim", "ssim_map", "summarize", "AgreementReport", "PairedTests",
    "agreement_stats", "auc", "auc_labels", "bland_altman", "bootstrap_auc_diff", "linreg",
    "mae", "paired_t", "paired_tests", "pcc",
]
