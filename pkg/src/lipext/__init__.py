"""Numerical extension operator for Lipschitz subgraph domains, with Morrey
norm estimation and an experiment harness."""

from .config import ConfigError, ExperimentConfig, load_config
from .extension import (
    BoundedElementaryOperator,
    ExtensionOperator,
    GeneralExtensionOperator,
    StencilError,
)
from .functions import (
    SupportHint,
    TestFunction,
    box_window,
    constant_function,
    gaussian_function,
    monomial_function,
    product,
    singular_function,
    trig_function,
)
from .geometry import (
    Atlas,
    Ball,
    Chart,
    ElementaryDomain,
    GeometryError,
    SubgraphDomain,
    mcshane_extend,
    named_domain,
    unit_square_atlas,
    validate_atlas,
)
from .kernel import KernelBuildError, Mollifier, build_mollifier
from .norms import (
    BallSampler,
    MorreyParams,
    NormEstimate,
    Region,
    ball_region,
    box_region,
    elementary_region,
    lp_norm,
    morrey_norm,
    power_weight,
    recompute_witness,
    rn_region,
    sobolev_morrey_table,
    subgraph_region,
)
from .partition import AtlasCutoffs, DyadicPartition

__version__ = "0.1.0"
