"""Counterfactual losses and risks on finite decision and outcome spaces."""
from .additivity import (
    AdditiveDecomposition,
    NotAdditive,
    Regime,
    Variant,
    binary_weight_family,
    build_structure_matrix,
    classify,
    decompose,
)
from .distributions import (
    JointModel,
    ObservableView,
    Record,
    RecordBatch,
    View,
    kernel_basis,
    marginal_matrix,
    marginalize,
    random_model,
    simulate_records,
    uniform_model,
)
from .equivalence import counterfactual_family, standard_loss_exists, to_standard_loss
from .errors import CfriskError, GuardExceeded, NegativeCertificate, ValidationError
from .estimation import PluginRiskEstimator, empirical_view, estimate_identified_risk, population_view
from .losses import builtin_decomposition, builtin_example
from .oracle import FiberProblem, certify_identifiability, difference_bounds, risk_bounds
from .risk import (
    Policy,
    binary_decomposition,
    check_weight_ordering,
    identified_difference,
    identified_risk,
    optimize_policy,
    true_risk,
)
from .spaces import LossTensor, Spaces, StandardLoss

__version__ = "0.1.0"
