"""Python bindings for the AAN speaker de-identification core."""

from ._core import (  # noqa: F401
    AanDims,
    AanError,
    AanModel,
    Corpus,
    CorpusSpec,
    __version__,
    anonymize_aan1,
    anonymize_aan2,
    baseline_anonymize,
    build_aan,
    compute_cllr,
    compute_eer,
    compute_min_cllr,
    default_desk_spec,
    default_run_config,
    forward,
    generate_corpus,
    gradient_check,
    loss,
    split_corpus,
    train,
)
