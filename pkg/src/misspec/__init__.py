"""misspec: a numerical laboratory for inverse ID/OOD performance correlations.

Linear structural-equation data with environment-specific spurious features,
closed-form risk oracles, certificates for the one-feature risk trade-off,
gradient-diversity linear-probe training, and scatter-pattern / selection-bias
analysis of the resulting (ID, OOD) performance clouds.
"""

from .errors import (
    AssumptionError,
    ConfigurationError,
    MisspecError,
    SchemaError,
    SingularMomentError,
    TrainingDivergenceError,
)
from .sem import (
    Dataset,
    Environment,
    TaskSpec,
    make_shift_family,
    sample_dataset,
)
from .oracle import (
    EigenSystem,
    FeatureMask,
    MomentSet,
    RegressionSolution,
    eigendecompose,
    empirical_moments,
    population_moments,
    risk,
    solve_regression,
)
from .theorem import (
    CertifyTolerances,
    Theorem1Certificate,
    Verdict,
    certify,
    check_assumption1,
    q_decomposition,
    spurious_sweep,
    sufficient_alpha_threshold,
)
from .trainer import (
    EpochRecord,
    LinearClassifier,
    TrainConfig,
    diversity_loss,
    evaluate,
    input_gradient,
    train_diverse,
    train_erm,
)
from .landscape import (
    ModelPoint,
    PatternLabel,
    PatternThresholds,
    SelectionReport,
    classify_pattern,
    filter_fixed_epoch,
    select_max_id,
    select_max_ood,
    selection_bias_report,
    shift_sweep_report,
)
from .config import ExperimentConfig, dump_experiment_config, load_experiment_config

__version__ = "0.1.0"
