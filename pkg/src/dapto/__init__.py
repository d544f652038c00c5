"""Decision-aware predict-then-optimize for contextual linear optimization."""

from .datagen import (
    Dataset,
    PolynomialDgp,
    TWO_EDGE_CROSSING,
    generate_grid_dataset,
    generate_two_edge_dataset,
    load_dataset_csv,
    sample_costs,
    two_edge_mean_costs,
)
from .experiment import (
    ExperimentConfig,
    ExperimentRecord,
    evaluate_predictor,
    normalized_regret,
    pick_best_nu,
    read_records_csv,
    run_experiment,
    select_nu,
    summarize_improvement,
)
from .predictors import (
    ForestConfig,
    ForestPredictor,
    LinearPredictor,
    fit_forest,
    fit_weighted_least_squares,
    mse,
    mse_gradient,
    predictor_from_dict,
    predictor_from_json,
    predictor_to_json,
)
from .problems import (
    DecisionProblem,
    EnumeratedPolytope,
    GridNetwork,
    TwoEdgeProblem,
    decision_regret,
    decision_regret_batch,
    enumerate_solutions,
)
from .reweighting import (
    DecisionAwareConfig,
    FitTrace,
    RegretWeights,
    compute_decision_difference,
    compute_regret_weights,
    fit_decision_aware,
    mix_weights,
    oracle_reweighted_loss,
    predict_then_optimize,
)
from .seeding import derive_seed, splitmix64
from .spoplus import (
    SpoPlusConfig,
    SpoTrainingLog,
    spo_plus_loss,
    spo_plus_subgradient,
    train_spo_plus,
)

__version__ = "0.1.0"
