//! Fixtures shared by the benchmarks.

use adaptest_core::rng::stream;
use adaptest_core::{generate, CaseId, Dataset, ModelFamily, SimDesign};

/// Seeded simulated dataset with its null family.
pub fn fixture(case: CaseId, n: usize, a: f64) -> (Dataset, ModelFamily) {
    let design = SimDesign::new(case, n, a);
    let ds = generate(&design, &mut stream(42, n as u64)).expect("design is valid");
    let family = ModelFamily::from_name(&design.null_family, ds.p1(), ds.p2()).expect("family exists");
    (ds, family)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_is_deterministic() {
        let (a, _) = fixture(CaseId::Ex5c1, 30, 0.5);
        let (b, f) = fixture(CaseId::Ex5c1, 30, 0.5);
        assert_eq!(a, b);
        assert_eq!(f.name(), "linear+w");
    }
}
