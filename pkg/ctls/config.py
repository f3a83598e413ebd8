from environs import Env
from marshmallow.validate import OneOf, Range

env = Env()
env.read_env()

# Upper bound on the worker threads a sweep may use
THREADS = env.int("CTLS_THREADS", default=1, validate=Range(min=1))

# Relative threshold (to the largest singular value) for every rank decision
RANK_TOL = env.float("CTLS_RANK_TOL", default=1e-10, validate=Range(min=0.0))

MU_CHOICE = env.str(
    "CTLS_MU_CHOICE", default="mean", validate=OneOf(["min", "mean", "max"])
)

LOG_LEVEL = env.log_level("CTLS_LOG_LEVEL", default="INFO")
