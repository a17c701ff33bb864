//! Determinantal flops of complete intersections of multilinear hypersurfaces
//! in products of projective spaces: exact arithmetic, point probing, flop
//! evaluation, lattice actions and movable-cone tilings.

pub mod exactnum;
pub mod tensor;
pub mod varprobe;
pub mod flop;
pub mod cone;
pub mod picard;
pub mod chamber;
pub mod domain;
