"""Empirical ciphertext-indistinguishability testing.

Distinguishing games become binary classification: generate labeled
ciphertext corpora (single ciphers, cascades, RSA variants, hybrid KEM
constructions), train a dense neural distinguisher, and decide with an
exact two-sided binomial test whether it beats random guessing.
"""

from .ciphers import (
    CascadeSpec,
    SymmetricScheme,
    cascade_decrypt,
    cascade_encrypt,
    sym_decrypt,
    sym_encrypt,
)
from .datasets import (
    GameSpec,
    LabeledDataset,
    build_dataset,
    build_hybrid_kem_dataset,
    build_single_cipher_dataset,
    export_csv,
    load_dataset,
    save_dataset,
    split_dataset,
)
from .estimator import MlpDistinguisher, evaluate
from .experiments import (
    ExperimentConfig,
    RunReport,
    cascade_matrix_configs,
    config_from_dict,
    emit_plot,
    load_config,
    run_experiment,
    run_matrix,
)
from .kem import (
    CombinerSpec,
    DegenerateMockKem,
    ExternalCorpusKem,
    IdealMockKem,
    KemSample,
    LeakyMockKem,
    RsaKem,
    combine,
    load_kem_corpus,
    load_labeled_ciphertext_corpus,
    save_kem_corpus,
)
from .rsa import (
    RsaKeyPair,
    rsa_keygen,
    rsa_oaep_decrypt,
    rsa_oaep_encrypt,
    rsa_textbook_decrypt,
    rsa_textbook_encrypt,
)
from .stats import BinomialTestResult, binomial_two_sided, format_p_value, summarize
from .training import (
    DESK_SCHEDULE,
    EarlyStopping,
    ReduceLrOnPlateau,
    TrainingHistory,
    TrainingSchedule,
    train_network,
)

__version__ = "0.1.0"

__all__ = [
    "BinomialTestResult",
    "CascadeSpec",
    "CombinerSpec",
    "DESK_SCHEDULE",
    "DegenerateMockKem",
    "EarlyStopping",
    "ExperimentConfig",
    "ExternalCorpusKem",
    "GameSpec",
    "IdealMockKem",
    "KemSample",
    "LabeledDataset",
    "LeakyMockKem",
    "MlpDistinguisher",
    "ReduceLrOnPlateau",
    "RsaKem",
    "RsaKeyPair",
    "RunReport",
    "SymmetricScheme",
    "TrainingHistory",
    "TrainingSchedule",
    "binomial_two_sided",
    "build_dataset",
    "build_hybrid_kem_dataset",
    "build_single_cipher_dataset",
    "cascade_decrypt",
    "cascade_encrypt",
    "cascade_matrix_configs",
    "combine",
    "config_from_dict",
    "emit_plot",
    "evaluate",
    "export_csv",
    "format_p_value",
    "load_config",
    "load_dataset",
    "load_kem_corpus",
    "load_labeled_ciphertext_corpus",
    "rsa_keygen",
    "rsa_oaep_decrypt",
    "rsa_oaep_encrypt",
    "rsa_textbook_decrypt",
    "rsa_textbook_encrypt",
    "run_experiment",
    "run_matrix",
    "save_dataset",
    "save_kem_corpus",
    "split_dataset",
    "summarize",
    "sym_decrypt",
    "sym_encrypt",
    "train_network",
]
