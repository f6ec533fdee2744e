"""rblkit: radiographic bone-loss measurement from segmentation masks.

Converts bone/tooth/CEJ masks into per-site bone-loss percentages,
per-tooth stages, and whole-case periodontal diagnoses, with a full
evaluation suite and an analytic phantom generator for verification.
"""

from .casedx import CaseAssessment, CaseDiagnosis, DiagnosisPolicy, diagnose_case
from .domain import (
    CaseRecord,
    ImageRecord,
    InputError,
    PixelSpacing,
    RblStage,
    SiteMeasurement,
    ToothAssessment,
    px_vector_to_mm,
    validate_image_record,
)
from .ingest import load_case
from .maskproc import MaskprocParams
from .pipeline import AnalysisConfig, assess_case, assess_image
from .staging import StagingPolicy, boundary_flag, stage_site, stage_tooth

__version__ = "0.1.0"

__all__ = [
    "AnalysisConfig",
    "CaseAssessment",
    "CaseDiagnosis",
    "CaseRecord",
    "DiagnosisPolicy",
    "ImageRecord",
    "InputError",
    "MaskprocParams",
    "PixelSpacing",
    "RblStage",
    "SiteMeasurement",
    "StagingPolicy",
    "ToothAssessment",
    "assess_case",
    "assess_image",
    "boundary_flag",
    "diagnose_case",
    "load_case",
    "px_vector_to_mm",
    "stage_site",
    "stage_tooth",
    "validate_image_record",
    "__version__",
]
