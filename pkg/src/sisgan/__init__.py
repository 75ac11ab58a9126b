"""Subject-invariant SSVEP signal generation and zero-calibration evaluation.

A numpy library implementing: a parametric oracle simulator of SSVEP-like
EEG with learnable subject signatures; from-scratch 1D conv networks with
hand-written backprop and Adam; unconditional, class-conditional and
subject-invariant GAN training; and the single-subject, leave-one-subject-
out and cross-task evaluation protocols with spectral and softmax-probe
validation.
"""

from .data import (
    SYNTHETIC_SUBJECT,
    Dataset,
    EegTrial,
    LeaveOneSubjectOut,
    PerSubjectStratified,
    Provenance,
    SsvepClassTable,
    SubjectId,
    concat_datasets,
    mix_datasets,
    normalize_dataset,
    normalize_trial,
    split_dataset,
)
from .losses import (
    GanLossWeights,
    adversarial_losses,
    cross_entropy,
    generator_total_loss,
    subject_invariance_loss,
)
from .nn import (
    AdamState,
    Backbone,
    BackboneSpec,
    Generator,
    GeneratorSpec,
    Head,
    OptimizerConfig,
    ParameterStore,
    adam_step,
    build_backbone,
    build_generator,
    forward_backbone,
    freeze,
    restore_parameters,
    sample_latent,
)
from .oracle import (
    SimulationConfig,
    SubjectProfile,
    make_profiles,
    online_analog_config,
    synthesize_dataset,
    synthesize_trial,
)
from .spectral import (
    SpectrumReport,
    Window,
    compute_spectrum,
    dominant_frequency,
    fft_oracle_labels,
    peak_to_median_ratio,
    trial_spectrum,
)
from .storage import (
    export_csv,
    import_csv,
    load_checkpoint,
    load_dataset,
    save_checkpoint,
    save_dataset,
)
from .training import (
    ClassifierConfig,
    ClassifierTrainResult,
    GanTrainConfig,
    GanTrainResult,
    TrainLog,
    generate_synthetic,
    train_acgan,
    train_classifier,
    train_dcgan,
    train_sisgan,
)
from .evaluation import (
    REAL_ONLY,
    BiometricReport,
    FftValidationReport,
    ProbeReport,
    ProtocolConfig,
    ProtocolReport,
    Regime,
    augmented,
    fft_validation_report,
    probe_subject_softmax,
    run_cross_task_protocol,
    run_leave_one_out_protocol,
    run_single_subject_protocol,
    subject_biometric_eval,
    synthetic_only,
)

__version__ = "0.1.0"
