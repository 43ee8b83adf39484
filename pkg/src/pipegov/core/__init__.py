"""Domain types shared by every other layer."""

from pipegov.core.actions import ActionKind, Actor, ProposedAction
from pipegov.core.pipeline import (
    PipelineKind,
    PipelineSpec,
    ResourceModel,
    StageSpec,
    ValidationIssue,
    stage_topology,
    validate_pipeline_spec,
)
from pipegov.core.schema import (
    AddColumn,
    ChangeNullability,
    ChangeType,
    Column,
    DriftClass,
    DriftKind,
    DropColumn,
    Dtype,
    RenameColumn,
    Schema,
    SchemaDelta,
    SchemaError,
    apply_delta,
    classify_delta,
    schema_delta,
)

__all__ = [
    "ActionKind",
    "Actor",
    "AddColumn",
    "ChangeNullability",
    "ChangeType",
    "Column",
    "DriftClass",
    "DriftKind",
    "DropColumn",
    "Dtype",
    "PipelineKind",
    "PipelineSpec",
    "ProposedAction",
    "RenameColumn",
    "ResourceModel",
    "Schema",
    "SchemaDelta",
    "SchemaError",
    "StageSpec",
    "ValidationIssue",
    "apply_delta",
    "classify_delta",
    "schema_delta",
    "stage_topology",
    "validate_pipeline_spec",
]
