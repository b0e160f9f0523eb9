//! Fixed problem instances shared by the benchmarks.

use tensorcx::{euler_family, MarginalSpectrum, TensorProblem};

/// Product of the first `d` Euler-family marginals.
pub fn euler_product(beta: f64, p: f64, d: usize) -> TensorProblem {
    let fam = euler_family(beta, p, d, 1e-16, 4096).expect("valid family");
    TensorProblem::product(fam).expect("nonempty")
}

/// Degree-`d` power of one marginal.
pub fn degree(spectrum: MarginalSpectrum, d: usize) -> TensorProblem {
    TensorProblem::degree(spectrum, d).expect("valid degree")
}
