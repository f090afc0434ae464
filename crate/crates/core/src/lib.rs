//! Fermi surface topology and magnetic orbit analysis for 3-periodic
//! dispersion relations.

pub mod dispersion;
pub mod lattice;
pub mod orbits;
pub mod surface;
pub mod transport;
pub mod zones;

pub use dispersion::{make_anferms, make_thin_net, DispersionModel, EnergyLevel, Term};
pub use lattice::{
    classify_direction, classify_exact, integer_plane_from_directions, reciprocal_basis, FieldDirection, IntegerPlane,
    Irrationality, LatticeBasis, LatticeError, Vec3,
};
pub use orbits::{
    open_energy_interval, seed_orbits, trace, OrbitClass, OrbitContext, OrbitError, PlaneSlice, TraceOptions,
    Trajectory,
};
pub use surface::{extract_surface, PeriodicMesh, SurfaceComponent, SurfaceError};
pub use transport::{
    conductivity_asymptotics, resistance_asymptotics, sum_components, AsymptoticTensor, Resistance, TransportError,
};
pub use zones::{
    probe_direction, sweep, AngleDiagram, DirectionSample, Regime, StabilityZone, SweepOptions, ZoneError,
};
