"""econoport: economic multiport networks as circuits.

Netlist-driven simulation (DC, transient, AC) of economies modeled as
element circuits inside multiport agents, plus the symbolic two-port
parameter algebra used to aggregate agents and cross-check the simulator.
"""

from .rational import (
    ComplexFrequency,
    Matrix2,
    PoleEvaluationError,
    Polynomial,
    RationalError,
    RationalFunction,
    SingularMatrixError,
    poly,
    rf,
)
from .twoport import (
    ConversionError,
    InterconnectKind,
    ParameterKind,
    ParameterModel,
    aggregate,
    consumer_model,
    convert,
    pid_policy,
    reciprocity_check,
    representative,
    reserve_bank_model,
    trader_model,
    y_to_t_direct,
)

__version__ = "0.1.0"

__all__ = [
    "ComplexFrequency", "Matrix2", "Polynomial", "RationalFunction",
    "RationalError", "PoleEvaluationError", "SingularMatrixError",
    "poly", "rf",
    "ParameterKind", "InterconnectKind", "ParameterModel",
    "convert", "y_to_t_direct", "aggregate", "representative",
    "reciprocity_check", "trader_model", "consumer_model",
    "reserve_bank_model", "pid_policy", "ConversionError",
    "__version__",
]
