"""Sequential rating simulator for conformity studies, with trend and concentration metrics."""
from .aggregation import (
    OpinionHistogram, WeightRule, climate, format_climate_for_prompt, histogram,
    running_climate,
)
from .metrics import (
    McoSeries, MetricReport, classify, excess_kurtosis, iqr, late_window,
    mann_kendall_s, mco_series, rating_distance, spearman_rho,
)
from .model import (
    LlmBackendConfig, MovieItem, Persona, RatingEvent, RatingScale, RatingSequence,
    ScenarioConfig, SyntheticPolicy, ValidationReport, validate_config,
)
from .simulation import RunRecord, derive_seed, generate_warmups, run_experiment, run_movie

__version__ = "0.1.0"
