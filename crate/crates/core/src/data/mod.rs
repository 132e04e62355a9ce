//! Ingestion of the three user groups, intensity normalization, training
//! impulses and profile estimation.

mod estimate;
mod io;
mod series;
mod synth;
mod trimp;

pub use estimate::{estimate_profile, simulate_performance, EstimateOptions, EstimationResult, LOWER, MIN_OBSERVATIONS, UPPER};
pub use io::{
    load_sessions, load_srpe, load_vo2max, read_sessions, read_srpe, read_vo2max, trimp_series, user_id_from_path,
    write_profiles, write_profiles_to, ProfileRow, ProfileSource, SrpeLog, PROFILES_HEADER, SESSIONS_HEADER,
    SRPE_HEADER, VO2MAX_HEADER,
};
pub use series::{denormalize, normalize, IntensitySeries, IntensityUnit, Normalization, PerformanceSeries};
pub use synth::{synth_g1, ProfileRanges, SyntheticUser, STEPS_MEAN, STEPS_SD, SYNTH_DAYS};
pub use trimp::{trimp, Session, Sex};
