__version__ = "0.1.0"

from .models import RobustnessQuery, RobustnessVerdict, VerdictStatus, VerifyMode
from .nn import Plnn, classify, train
from .orchestrator import VerificationRunner
from .pca import PcaModel, pca_fit
from .tads import Tads, plnn_to_tads, tads_compose
from .verify import verify

__all__ = [
    "__version__",
    "PcaModel",
    "Plnn",
    "RobustnessQuery",
    "RobustnessVerdict",
    "Tads",
    "VerdictStatus",
    "VerificationRunner",
    "VerifyMode",
    "classify",
    "pca_fit",
    "plnn_to_tads",
    "tads_compose",
    "train",
    "verify",
]
