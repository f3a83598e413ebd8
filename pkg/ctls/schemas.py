"""
marshmallow schemas of every JSON document the package reads or writes
"""

import numpy as np
from marshmallow import (
    Schema,
    ValidationError,
    fields,
    post_load,
    validates_schema,
)
from marshmallow.validate import Equal, Length, OneOf, Range

from ctls.consts import FORMAT_VERSION
from ctls.enums import DesignKind, NoiseKind, TrialStatus
from ctls.harness import (
    ESTIMATORS,
    ConvergenceTrace,
    SweepConfig,
    TrialRecord,
)


def _version_field():
    return fields.Int(
        load_default=FORMAT_VERSION,
        dump_default=FORMAT_VERSION,
        validate=Equal(FORMAT_VERSION),
    )


class MatrixJsonSchema(Schema):
    """
    {"rows": r, "cols": c, "data": [row-major entries]}
    """

    rows = fields.Int(required=True, validate=Range(min=1))
    cols = fields.Int(required=True, validate=Range(min=1))
    data = fields.List(fields.Float(allow_nan=False), required=True)

    @validates_schema
    def validate_size(self, data, **kwargs):
        expected = data["rows"] * data["cols"]
        if len(data["data"]) != expected:
            raise ValidationError(
                f"Declared {data['rows']}x{data['cols']} needs {expected} "
                f"entries, got {len(data['data'])}",
                "data",
            )

    @post_load
    def make_matrix(self, data, **kwargs):
        return np.array(data["data"], dtype=np.float64).reshape(
            data["rows"], data["cols"]
        )


def matrix_to_json(matrix: np.ndarray) -> dict:
    rows, cols = matrix.shape
    return MatrixJsonSchema().dump(
        {"rows": rows, "cols": cols, "data": matrix.ravel().tolist()}
    )


class SweepConfigSchema(Schema):
    n = fields.Int(required=True, validate=Range(min=1))
    ell = fields.Int(required=True, validate=Range(min=1))
    j = fields.Int(load_default=0, validate=Range(min=0))
    k = fields.Int(load_default=0, validate=Range(min=0))
    m_values = fields.List(
        fields.Int(validate=Range(min=1)), required=True, validate=Length(min=1)
    )
    trials = fields.Int(required=True, validate=Range(min=1))
    sigma = fields.Float(required=True, allow_nan=False, validate=Range(min=0.0))
    estimators = fields.List(
        fields.Str(validate=OneOf(list(ESTIMATORS))), required=True
    )
    base_seed = fields.Int(load_default=0)
    design = fields.Enum(DesignKind, by_value=True, load_default=DesignKind.IID)
    noise = fields.Enum(NoiseKind, by_value=True, load_default=NoiseKind.GAUSS)

    @post_load
    def make_config(self, data, **kwargs):
        return SweepConfig(**data)


class ModelMetadataSchema(Schema):
    format_version = _version_field()
    n = fields.Int(required=True)
    ell = fields.Int(required=True)
    j = fields.Int(required=True)
    k = fields.Int(required=True)
    m = fields.Int(required=True)
    sigma = fields.Float(required=True)
    seed = fields.Int(required=True)
    design = fields.Enum(DesignKind, by_value=True, required=True)
    noise = fields.Enum(NoiseKind, by_value=True, required=True)


class TrialRecordSchema(Schema):
    estimator = fields.Str(required=True)
    m = fields.Int(required=True)
    trial = fields.Int(required=True)
    seed = fields.Int(required=True)
    status = fields.Enum(TrialStatus, by_value=True, required=True)
    error = fields.Str(allow_none=True)
    err = fields.Float(allow_none=True)
    sigma2_hat = fields.Float(allow_none=True)
    mu_over_m = fields.Float(allow_none=True)
    lemma_f_residual = fields.Float(allow_none=True)
    lemma_pdp_residual = fields.Float(allow_none=True)
    e_gram_residual = fields.Float(allow_none=True)
    c21_cross_residual = fields.Float(allow_none=True)
    c21_gram_min_eig = fields.Float(allow_none=True)
    constraint_residual = fields.Float(allow_none=True)
    diagnostics = fields.Dict(keys=fields.Str(), load_default=dict)

    @post_load
    def make_record(self, data, **kwargs):
        return TrialRecord(**data)


class CellAggregateSchema(Schema):
    estimator = fields.Str()
    m = fields.Int()
    trials = fields.Int()
    failed = fields.Int()
    median_err = fields.Float(allow_none=True)
    q1_err = fields.Float(allow_none=True)
    q3_err = fields.Float(allow_none=True)
    median_sigma2_hat = fields.Float(allow_none=True)


class TraceSchema(Schema):
    """
    The full raw trace. Aggregates are written for convenience and recomputed
    from the records on load.
    """

    format_version = _version_field()
    config = fields.Nested(SweepConfigSchema, attribute="sweep", data_key="config")
    records = fields.Method("dump_records", deserialize="load_records")
    aggregates = fields.Method("dump_aggregates", deserialize="load_aggregates")

    def dump_records(self, trace: ConvergenceTrace):
        return TrialRecordSchema(many=True).dump(trace.all_records())

    def load_records(self, value):
        return TrialRecordSchema(many=True).load(value)

    def dump_aggregates(self, trace: ConvergenceTrace):
        return CellAggregateSchema(many=True).dump(trace.aggregate_rows())

    def load_aggregates(self, value):
        return value

    @post_load
    def make_trace(self, data, **kwargs):
        trace = ConvergenceTrace(data["sweep"])
        for record in data.get("records", []):
            trace.cells.setdefault((record.estimator, record.m), []).append(record)
        return trace


class OracleProbeSchema(Schema):
    x = fields.Nested(MatrixJsonSchema, required=True)
    objective = fields.Float(required=True)


class OracleCaseSchema(Schema):
    name = fields.Str(required=True)
    a = fields.Nested(MatrixJsonSchema, required=True)
    b = fields.Nested(MatrixJsonSchema, required=True)
    x_hat = fields.Nested(MatrixJsonSchema, required=True)
    smallest_eigs = fields.List(fields.Float(), required=True)
    probes = fields.List(fields.Nested(OracleProbeSchema), load_default=list)


class OracleFixturesSchema(Schema):
    """
    Frozen oracle outputs the estimator tests compare against
    """

    format_version = _version_field()
    cases = fields.List(fields.Nested(OracleCaseSchema), required=True)
