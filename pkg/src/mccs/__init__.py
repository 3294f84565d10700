"""Multi-coil compressed-sensing MRI reconstruction with joint coil-map and
image estimation, plus the simulation harness used to exercise it."""

from .grids import (
    ComplexGrid,
    CxtError,
    CxtHeaderError,
    CxtInvariantError,
    CxtPayloadError,
    MultiCoilKSpace,
    SamplingMask,
    load_tensor,
    save_tensor,
)
from .kernels import USING_COMPILED
from .model import (
    BandwidthOp,
    NoiseCovariance,
    SensitivityMaps,
    apply_bandwidth,
    apply_E_image,
    apply_E_maps,
    adjoint_bandwidth,
    adjoint_E_image,
    adjoint_E_maps,
    cholesky_whitener,
    estimate_noise_cov,
    scale_dc,
    sos_combine,
)
from .prox import (
    nuclear_norm,
    prox_conjugate,
    prox_l1_complex,
    prox_nuclear,
    prox_quadratic_data,
    prox_scaled_sq,
    project_unit_disk,
)
from .solvers import (
    FistaParams,
    LinOp,
    PdhgParams,
    ProxFn,
    SmoothFn,
    SolverError,
    estimate_opnorm,
    fista_ls_restart,
    pdhg_adaptive,
)
from .transforms import (
    WaveletPlan,
    crop_center,
    dft2_centered,
    dwt2_d4,
    idft2_centered,
    idwt2_d4,
    zero_pad_embed,
)

__version__ = "0.1.0"
