"""Bounded-Lipschitz metrics, bootstrap schemes and nested Monte Carlo robustness checks."""

__version__ = "0.1.0"

from .bootstrap import BlockSchedule, BootstrapScheme, block_schedule, bootstrap_law_of_estimator, efron_resample, mbb_resample
from .errors import CapabilityError, CapacityError, DomainError, EstimatorError, NumericError, QRBootError
from .estimators import EstimatorOperator, evaluate, get_estimator, modulus_probe, register_estimator
from .measures import (
    Box,
    DiscreteMeasure,
    MetricSpace,
    SamplePath,
    dn_distance,
    empirical_measure,
    interval,
    mixture,
    product_measure,
    product_space,
    product_space_dn,
    real_line,
    unit_box,
)
from .prob_metrics import BLCertificate, ProhorovCertificate, bl_distance, measure_space, metric_relations, prohorov_distance
from .processes import (
    ContaminationSpec,
    MixingDiagnostics,
    ProcessSpec,
    contaminate,
    exact_alpha_markov,
    generate,
    varadarajan_diagnostic,
    weak_bi_mixing_average,
)
from .robustness import (
    ExperimentConfig,
    RobustnessReport,
    coupled_expectation,
    input_distance_proxy,
    law_of_laws,
    nested_bl_distance,
    run_experiment,
)
