# Copyright 2026 The pairwise-vl Authors
# SPDX-License-Identifier: Apache-2.0
"""Choice-based image-caption matching evaluation."""

from ._pairwise_vl import (
    Error,
    UsageError,
    __version__,
    check_corpus,
    cli,
    config_label,
    config_names,
    extract_choice,
    load_dataset,
    pair_scores,
    percent,
    render,
    report_compare,
    report_table,
    report_tags,
    resume,
    run,
    score,
    template_catalog,
)

__all__ = [
    "Error",
    "UsageError",
    "__version__",
    "check_corpus",
    "cli",
    "config_label",
    "config_names",
    "extract_choice",
    "load_dataset",
    "pair_scores",
    "percent",
    "render",
    "report_compare",
    "report_table",
    "report_tags",
    "resume",
    "run",
    "score",
    "template_catalog",
]
