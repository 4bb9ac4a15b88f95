pub mod hilbert;
pub mod dynamics;
pub mod measurement;
pub mod analytic;
pub mod dispersive;
pub mod scenarios;
