"""Python bindings for the forge benchmark workbench."""

import json

from ._core import (
    ConfigError,
    DecodeError,
    ForgeError,
    InfrastructureError,
    ParseError,
    accuracy_markdown,
    admissible_levels,
    check_composition,
    decode_secret,
    dimension_keys,
    encode_secret,
    manifest_digest,
    spearman,
    spearman_matrix,
    stats_markdown,
)
from . import _core


def run_pipeline(config, root):
    """Run plan, generate, refine and validate; return the manifest as a dict."""
    return json.loads(_core.run_pipeline(str(config), str(root)))


def read_manifest(root, benchmark_id):
    return json.loads(_core.read_manifest(str(root), benchmark_id))


__all__ = [
    "ConfigError",
    "DecodeError",
    "ForgeError",
    "InfrastructureError",
    "ParseError",
    "accuracy_markdown",
    "admissible_levels",
    "check_composition",
    "decode_secret",
    "dimension_keys",
    "encode_secret",
    "manifest_digest",
    "read_manifest",
    "run_pipeline",
    "spearman",
    "spearman_matrix",
    "stats_markdown",
]
