"""Surface-code logical-primitive benchmarking under structured Pauli noise."""

from .circuit import Circuit, CircuitError, Instruction, PauliProduct, Rec, emit_text, parse_text, validate
from .noise import (
    CoherenceSpec,
    FamilyConfig,
    NoiseAssignment,
    ParamSet,
    PauliChannel1,
    PauliChannel2,
    SpamSpec,
    apply_noise,
    circuit_context,
    make_builtin_family,
    pta_idle_channel,
    resolve_ticks,
)
from .primitives import (
    HadamardSpec,
    LatticeSurgerySpec,
    MemorySpec,
    PatchGeometry,
    PhaseGateSpec,
    gen_hadamard,
    gen_lattice_surgery,
    gen_memory,
    gen_phase_gate,
    spacetime_volume,
)
from .framesim import CompiledCircuit, DetectionTable, check_determinism, sample_batch

__version__ = "0.1.0"
