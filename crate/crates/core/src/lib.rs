pub mod bogoliubov;
pub mod bogosim;
pub mod dynamics;
pub mod experiment;
pub mod field;
pub mod io;
pub mod model;
pub mod modes;
pub mod observables;
pub mod quadrature;
pub mod sampler;
