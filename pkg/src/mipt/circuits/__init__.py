"""Circuit IR, geometries, builders and the 2D to 1D mapping."""
from mipt.circuits.geometry import Geometry, builtin_geometries, lattice_geometry, load_geometry
from mipt.circuits.ir import (
    Circuit,
    LinearMap,
    Measure,
    MeasureReset,
    Postselect,
    Reset,
    Unitary,
    circuit_from_json,
    circuit_to_json,
)
from mipt.circuits.lightcone import SweepPlan, past_lightcone, plan_sweep
from mipt.circuits.shallow import build_shallow_2d, effective_measurement_rate
from mipt.circuits.mapping import MappedCircuit, map_2d_to_1d
from mipt.circuits.sim import SimResult, simulate, with_depolarizing
from mipt.circuits.dual import build_1d_dual_pair, build_teleport_harness, harness_output, monitored_output
