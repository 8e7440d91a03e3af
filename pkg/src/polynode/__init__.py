"""Polyconvex data-driven hyperelasticity from monotone scalar neural ODEs.

The package builds anisotropic, incompressible plane-stress material models
whose strain-energy derivatives are time-1 flows of trainable scalar ODEs.
Monotonicity of the flows makes every energy term convex by construction,
so trained models stay polyconvex no matter what data they see.
"""

from .errors import (
    ConfigError,
    DomainError,
    IntegrationError,
    ParseError,
    PolynodeError,
    TrainingDivergedError,
    UnsupportedStateError,
)
from .kinematics import (
    InvariantSet,
    ShiftedInvariants,
    StructuralTensors,
    green_lagrange,
    invariants,
    plane_stress_deformation,
    right_cauchy_green,
    shift_invariants,
)
from .node_core import (
    OdeSolution,
    ScalarNodeParams,
    integrate,
    integrate_with_input_sensitivity,
    integrate_with_param_gradient,
    random_node_params,
    rhs_eval,
)
from .material import (
    EnergyDerivatives,
    EnergyValue,
    NodeMaterialModel,
    PlaneStressSolution,
    biaxial_stress,
    energy_derivatives,
    energy_hessian,
    load_model,
    zero_weight_model,
    pk2_stress,
    random_model,
    save_model,
    solve_pressure,
    strain_energy,
)
from .tangent import DeltaCoefficients, delta_coefficients, material_tangent
from .oracles import (
    FungParams,
    GohParams,
    HgoParams,
    MrParams,
    fit_oracle,
    load_oracle,
    oracle_energy,
    oracle_stress,
    save_oracle,
)
from .dataproto import (
    ByPathFraction,
    ByProtocol,
    Dataset,
    LoadingProtocol,
    Split,
    default_protocols,
    generate_synthetic,
    load_csv,
    protocol_path,
    save_csv,
    split,
)
from .trainer import LossReport, TrainConfig, evaluate, loss, loss_gradient, train
from .surfaces import convexity_scan, energy_surface

__version__ = "0.1.0"
