"""dahaze — depth-agnostic synthetic haze dataset toolkit.

Synthesizes hazy images from clear-image/depth-map corpora with the
atmospheric scattering model, optionally pairing images with shuffled
depth maps so haze density carries no information about scene depth;
builds deterministic ×n dataset manifests; scores restorations with
PSNR, SSIM, and the cross-test-set discrepancy; and ships a small,
gradient-verified convolution kernel implementing the add, concat, and
convolutional-skip-connection fusion operators.
"""

__version__ = "0.1.0"

DEFAULT_SEED = 0xDA11A5E

from .asm import (  # noqa: E402,F401
    DEFAULT_A_SET,
    DEFAULT_BETA_SET,
    T_MIN,
    HazeParams,
    TransmissionMap,
    compose_haze,
    haze_density_map,
    invert_haze,
    sample_params,
    transmission,
)
from .errors import (  # noqa: E402,F401
    DahazeError,
    InvariantViolation,
    IOFailure,
    UsageError,
)
from .fusion import (  # noqa: E402,F401
    FusionTensor,
    KernelSet,
    conv2d,
    conv2d_backward,
    concat_from_csc,
    count_cost,
    csc_from_concat,
    evaluate_fusion_demo,
    fuse_add,
    fuse_concat,
    fuse_csc,
    gradient_check,
    l1_loss,
    load_tensor,
    save_tensor,
    train_fusion_demo,
)
from .imaging import (  # noqa: E402,F401
    DepthMap,
    Image,
    diff_image,
    load_depth,
    load_image,
    normalize_depth,
    resize_bilinear,
    save_depth,
    save_image,
)
from .manifest import (  # noqa: E402,F401
    DatasetManifest,
    PairRecord,
    build_manifest,
    read_manifest,
    scan_catalog,
    shuffle_pairing,
    verify_manifest,
    write_manifest,
)
from .metrics import (  # noqa: E402,F401
    SetResult,
    discrepancy,
    evaluate_set,
    psnr,
    ssim,
)
from .rng import Xoshiro256StarStar, splitmix64, sub_seed  # noqa: E402,F401
from .synth import SynthesisReport, synthesize_dataset  # noqa: E402,F401
