"""Genotype transformer pipeline: tokenizer, metrics, attribution tables and the run stages."""

import json as _json

from ._hemera import (
    CLS_ID,
    MASK_ID,
    NAN_ID,
    VOCABULARY,
    AttributionRecord,
    HemeraError,
    LocusMatch,
    auc,
    id_to_token,
    proximity_match,
    read_attribution_table,
    read_known_loci,
    subcommands,
    token_to_id,
    youden_threshold,
)
from ._hemera import resolve_config as _resolve_config
from ._hemera import run as _run

__all__ = [
    "CLS_ID",
    "MASK_ID",
    "NAN_ID",
    "VOCABULARY",
    "AttributionRecord",
    "HemeraError",
    "LocusMatch",
    "auc",
    "id_to_token",
    "proximity_match",
    "read_attribution_table",
    "read_known_loci",
    "resolve_config",
    "run",
    "subcommands",
    "token_to_id",
    "youden_threshold",
]


def resolve_config(config=None):
    """Return the full run config, with defaults filled in, as a dict."""
    return _json.loads(_resolve_config(_json.dumps(config or {})))


def run(subcommand, config=None):
    """Run one pipeline stage with a config dict (same schema as the CLI's JSON)."""
    _run(subcommand, _json.dumps(config or {}))
