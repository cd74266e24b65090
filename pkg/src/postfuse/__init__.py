"""postfuse: query-limited black-box attacks on image-forensics detectors
via swarm-optimized post-processing fusion (blur, JPEG, noise, light spot)."""

from .harness import (
    BatchResult,
    EvalRecord,
    RunRecord,
    ablation_bounds,
    attack_batch,
    parse_mode,
    queries_to_success,
    run_random_attack,
)
from .imageops import (
    add_gaussian_noise,
    apply_fusion,
    apply_light_spot,
    decode_png,
    encode_png,
    gaussian_blur,
    jpeg_roundtrip,
    load_image,
    save_image,
    validate_image,
)
from .metrics import SsimConfig, luma, psnr, ssim
from .oracle import (
    DetectorScore,
    OracleProtocolError,
    OracleTransportError,
    QueryBudgetExhaustedError,
    QueryLedger,
    SyntheticDetector,
    SyntheticDetectorSpec,
    is_adversarial,
    oracle_from_id,
    score,
)
from .params import (
    ParamBounds,
    ParamSpec,
    PostProcParams,
    clamp_params,
    is_feasible,
    sample_params,
)
from .pso import (
    AttackOutcome,
    PsoConfig,
    SwarmState,
    inertia,
    init_swarm,
    run_attack,
    run_swarm,
    select_output,
    step,
)
from .remote import RemoteOracle, StubScoreServer, remote_score, remote_score_batch
from .reporting import load_records, records_equal, render_report, save_record, save_records
from .robustness import (
    DEFAULT_LEVELS,
    RobustnessReport,
    RobustnessSpec,
    apply_transform,
    compute_asr,
    evaluate_robustness,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
