"""Constrained mixed covering array generation with base forbidden tuples and tabu search."""

from importlib.resources import files

from .constraints import BftSet, contains_bft, generate_bft, oracle_is_extendable
from .engine import CoveringArray, RunReport, SearchConfig, generate
from .errors import (CcaError, ModelError, ResourceLimit, RetryExhausted, RowBudgetExceeded,
                     UnsatisfiableModel)
from .model import ParameterSpec, SutModel, parse_casa, parse_native, serialize_native
from .verifier import VerificationReport, enumerate_valid_rows, verify

__version__ = "0.1.0"


def fixture_path(name: str):
    """Path of a bundled model file, e.g. ``fixture_path("drupal.json")``."""
    return files(__name__).joinpath("fixtures", name)


def load_fixture(name: str) -> SutModel:
    return parse_native(fixture_path(name).read_text())
