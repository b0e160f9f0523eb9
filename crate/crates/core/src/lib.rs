//! Average-case approximation complexity of tensor-product random elements.

pub mod asympt;
pub mod dist;
pub mod error;
pub mod numeric;
pub mod spectra;
pub mod tensor;

pub use error::{Error, Result};
pub use spectra::{
    euler_family, euler_family_r, euler_spectrum, loglog_spectrum, normalize, regvar_spectrum, spectrum_stats, tail_mass, tail_mass_mid, truncated_moment,
    u_distribution, Atom, AtomicDistribution, MarginalSpectrum, SpectrumStats, TailModel,
};
pub use tensor::{
    binomial_degree_complexity, bracket_complexity, complexity_bounds, convolve_g, enumeration_oracle, exact_complexity,
    lambda_quantile, ComplexityInterval, Count, GriddedCdf, Marginals, Method, OracleCount, QuantileInterval, TensorProblem,
};
pub use dist::{
    dickman_build, dickman_cdf, dickman_quantile, levy_triplet_of, normal_cdf, normal_quantile, stable_cdf, stable_cf,
    stable_quantile, DickmanLaw, LevySpectral, LevyTriplet, StableLaw,
};
pub use asympt::{
    a_star_alpha1, boundedness_diagnostic, check_conditions_abc, classify_degree_regime, de_bruijn_numeric,
    euler_tractability_diagnostic, l_tilde, predict_log_complexity, slow_var_check, AsymptReport, LawContext, Prediction, Regime,
    RegimeTag, ReportRow, SvfHandle,
};
