"""scorebridge: a thin HTTP scoring service for image-forensics models.

Wraps any user-supplied ``score(image_bytes) -> float`` script behind the
fake-probability wire protocol (POST /score, POST /batch_score) so external
tooling can query it as a black box.
"""

from .config import ONE_MIB, AdapterConfig, apply_env_overrides, load_config
from .model import ModelEntry, load_model
from .service import build_app

__version__ = "0.1.0"

__all__ = [
    "ONE_MIB",
    "AdapterConfig",
    "ModelEntry",
    "apply_env_overrides",
    "build_app",
    "load_config",
    "load_model",
    "__version__",
]
