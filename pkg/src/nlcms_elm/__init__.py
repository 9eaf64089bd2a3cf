"""Nonlinear cascaded-metasurface extreme learning machine (NL-CMS-ELM).

A wave-domain binary classifier: features are amplitude-modulated onto
``N_t`` transmit antennas, pass a random channel to a nonlinear front
metasurface (the hidden layer) and are combined by a cascade of tunable
linear metasurfaces into a single RF chain (the output layer).
"""

from .activation import (
    ActivationMode,
    BiasVector,
    activate,
    amam_exact,
    amam_quadrature,
    bias_reference_norm,
    sample_bias,
)
from .cascade import (
    RHO_MIN,
    CascadeState,
    PgdOptions,
    PgdTrace,
    PhaseRange,
    approximation_objective,
    cascade_transfer,
    init_state,
    objective_and_gradient,
    pgd_fit,
)
from .channels import (
    ChannelRealization,
    RiceanParams,
    complex_gaussian,
    noise_variance_from_snr,
    sample_cascade_channels,
    sample_rayleigh,
    sample_realization,
    sample_ricean,
    steering_vector,
)
from .data import (
    LabeledDataset,
    RawTable,
    ScalingParams,
    apply_scale,
    fit_scale,
    load_csv,
    load_dataset,
    load_mnist_binary,
    prepare,
    read_idx,
    split,
    write_idx,
)
from .elm import (
    ActivationMatrix,
    IdealWeights,
    SolverPath,
    TargetEncoding,
    accuracy,
    build_activation_matrix,
    decide,
    encode_am,
    forward_to_frontend,
    predict_ideal,
    ridge_solve,
)
from .errors import (
    DataParseError,
    FormatError,
    InvalidArgumentError,
    NlcmsError,
    NumericFailureError,
    SchemaError,
)
from .experiment import ExperimentConfig, ExperimentRecord, read_csv, run, write_csv
from .pipeline import EvalReport, TrainConfig, TrainedModel, Variant, evaluate, infer, predict, train

__version__ = "0.1.0"
