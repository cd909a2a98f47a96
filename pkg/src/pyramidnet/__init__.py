"""Orthogonal neural-network layers as pyramids of planar rotations."""

from .baselines import SVBConfig, stiefel_tangent, stiefel_update, svb_update
from .data import (
    Dataset,
    PCAModel,
    filter_classes,
    load_mnist_split,
    normalize_rows,
    parse_idx,
    pca_fit,
    pca_transform,
    synth_blobs,
)
from .linalg import eigh, matmul, qr, svd
from .network import (
    BackwardTrace,
    LayerSpec,
    Network,
    NetworkGradients,
    layer_backward,
    layer_backward_with_trace,
    loss_and_delta,
    network_backward,
    network_forward,
    predict,
    random_network,
    sgd_step,
)
from .pyramid import (
    ForwardTrace,
    GateSlot,
    PyramidLayer,
    PyramidSchedule,
    angles_from_matrix,
    apply_rotation_pair,
    build_schedule,
    canonical_angles,
    export_matrix,
    forward,
    matrix_from_angles,
    random_layer,
)
from .qsim import (
    ANALYTIC,
    LoaderAngles,
    NoiseModel,
    StateVector,
    TomographyConfig,
    apply_loader,
    apply_rbs,
    load_angles,
    mitigate_unary,
    multilayer_quantum_inference,
    sample_shots,
    tomography_ancilla,
    tomography_pairwise,
    unary_leakage,
    unary_submatrix,
)
from .training import (
    MetricsRow,
    MetricsTable,
    TrainConfig,
    dense_train_baseline,
    train,
)

__version__ = "0.1.0"
