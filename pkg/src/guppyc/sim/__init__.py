"""Reference executor: classical semantics plus a seeded statevector backend."""
from guppyc.sim.interp import (
    DEFAULT_MAX_STEPS,
    FunctionRef,
    Interpreter,
    Prepared,
    RunReport,
    SimRuntimeError,
    SumValue,
    final_statevector,
    run,
)
from guppyc.sim.state import GATES, QuantumState, QubitHandle, rz, step_quantum

__all__ = [
    "DEFAULT_MAX_STEPS",
    "GATES",
    "FunctionRef",
    "Interpreter",
    "Prepared",
    "QuantumState",
    "QubitHandle",
    "RunReport",
    "SimRuntimeError",
    "SumValue",
    "final_statevector",
    "run",
    "rz",
    "step_quantum",
]
