"""Kernel-density Markov and hidden-Markov models for scalar time series."""

from .baselines import ArHmm, ArModel, ar_fit, ar_hmm_fit, ar_hmm_sample, ar_hmm_score, ar_loglik
from .datasets import (
    OccupancyGuess,
    SyntheticSpec,
    dequantize,
    generate_synthetic,
    instantaneous_phase,
    load_series,
    logistic_map_surrogate,
    phase_occupancies,
    threshold_occupancies,
    uniform_occupancies,
    write_series,
)
from .errors import (
    ConfigError,
    DataError,
    DegenerateSample,
    EmptyState,
    KdehmmError,
    NoCycleStructure,
    NumericalFailure,
    RankDeficient,
    SequenceTooShort,
)
from .hmm import (
    GemDiagnostics,
    GemWorkspace,
    HmmTrainingConfig,
    KdeHmm,
    Posteriors,
    hmm_emission_logpdf,
    hmm_forward_backward,
    hmm_gem_step,
    hmm_initialize,
    hmm_pseudo_log_likelihood,
    hmm_sample,
    hmm_score,
    hmm_state_assignments,
    hmm_train,
    hmm_update_transitions,
)
from .kernels import (
    KdeEstimate,
    Kernel,
    kde_logpdf,
    kde_pdf,
    kernel_eval,
    kernel_log,
    reference_rule_bandwidth,
)
from .markov import (
    KdeMm,
    MmTrainingConfig,
    initialize_mm,
    min_separation,
    mm_next_step_logpdf,
    mm_pseudo_log_likelihood,
    mm_sample,
    mm_sequence_logpdf,
    mm_train,
)
from .experiments import ExperimentConfig, Job, build_jobs, run_experiment, run_job
from .report import TrainingReport
from .serialize import load_model, model_from_dict, model_to_dict, save_model
from .series import TimeSeries, as_series

__version__ = "0.1.0"
