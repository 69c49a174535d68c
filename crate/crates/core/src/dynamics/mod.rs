//! Full-branch interval maps and the quantities built directly on them.

mod map;
pub mod orbit;
pub mod periodic;
pub mod transfer;
pub mod ulam;

pub use map::{BranchKind, BranchSpec, FullBranchMap, SmoothBranch};
pub use orbit::{OrbitStream, SymbolicOrbit, SymbolicSampler, DEFAULT_DEPTH};
pub use periodic::{
    canonical_periodic_points, periodic_points, pressure, z_n, z_n_geometric_exact, PeriodicPoint,
    Potential, DEFAULT_PERIOD_CAP,
};
pub use transfer::{correlation_sequence, transfer, StepFunction};
pub use ulam::{ulam_matrix, UlamMatrix};

use crate::interval::IntervalUnion;
use crate::scalar::Scalar;

/// Variation norm of an indicator: two jumps per component once the set is
/// unwrapped onto the line.
pub fn bv_norm_indicator<T: Scalar>(s: &IntervalUnion<T>) -> f64 {
    2.0 * s.component_count() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::Topology;
    use crate::scalar::ratio;

    #[test]
    fn bv_norm_examples() {
        let one = IntervalUnion::from_pairs(Topology::Circle, [(ratio(1, 5), ratio(2, 5))]);
        assert_eq!(bv_norm_indicator(&one), 2.0);
        let annulus = IntervalUnion::from_pairs(
            Topology::Circle,
            [(ratio(1, 5), ratio(3, 10)), (ratio(7, 20), ratio(2, 5))],
        );
        assert_eq!(bv_norm_indicator(&annulus), 4.0);
        assert_eq!(
            bv_norm_indicator(&IntervalUnion::<f64>::empty(Topology::Circle)),
            0.0
        );
    }
}
