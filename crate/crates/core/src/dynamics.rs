//! Fitness-fatigue health dynamics and the per-epoch goal-attainment reward.
//!
//! Every exercise epoch adds an impulse to two exponentially decaying stocks:
//! fitness grows with a concave response `e^lambda` and fatigue with a convex
//! response `e^mu`. A slowly moving base level tracks past effort. Performance
//! combines the three either additively (skill acquisition) or multiplicatively
//! against the base level (skill retention). The reward adds a flat bonus when
//! the suggested goal is met and a penalty proportional to the relative
//! shortfall when it is not.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The nine-parameter user type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UserProfile {
    /// Fitness decay rate per epoch.
    pub alpha: f64,
    /// Fatigue decay rate per epoch.
    pub beta: f64,
    /// Fitness response exponent, concave when below one.
    pub lambda: f64,
    /// Fatigue response exponent, convex when above one.
    pub mu: f64,
    /// Base-level decay rate per epoch.
    pub delta: f64,
    /// Marginal utility of fitness.
    pub k_f: f64,
    /// Marginal disutility of fatigue.
    pub k_g: f64,
    /// Bonus for achieving the goal.
    pub m: f64,
    /// Scale of the disutility of failing the goal.
    pub l: f64,
}

impl Default for UserProfile {
    fn default() -> Self {
        Self {
            alpha: 0.95,
            beta: 0.7,
            lambda: 0.8,
            mu: 1.5,
            delta: 0.9,
            k_f: 0.15,
            k_g: 0.1,
            m: 1.0,
            l: 1.0,
        }
    }
}

impl UserProfile {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("lambda", self.lambda),
            ("mu", self.mu),
            ("delta", self.delta),
            ("k_f", self.k_f),
            ("k_g", self.k_g),
            ("m", self.m),
            ("l", self.l),
        ];
        if let Some((name, v)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::domain(format!("profile field {name} is not finite ({v})")));
        }
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::domain(format!("profile violates {what}: {self:?}")))
            }
        };
        check(self.alpha > 0.0 && self.alpha < 1.0, "0 < alpha < 1")?;
        check(self.beta > 0.0 && self.beta < 1.0, "0 < beta < 1")?;
        check(self.delta > 0.0 && self.delta <= 1.0, "0 < delta <= 1")?;
        check(self.lambda > 0.0 && self.lambda <= 1.0, "0 < lambda <= 1")?;
        check(self.mu >= 1.0, "mu >= 1")?;
        check(self.k_f > 0.0 && self.k_g > 0.0, "k_f > 0 and k_g > 0")?;
        check(self.m >= 0.0 && self.l >= 0.0, "m >= 0 and l >= 0")
    }
}

/// Per-epoch health state `(e, b, f, g)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HealthState {
    /// Realized exercise intensity this epoch, normalized to `[0, 1]`.
    pub e: f64,
    /// Base level of past exercise.
    pub b: f64,
    /// Fitness stock.
    pub f: f64,
    /// Fatigue stock.
    pub g: f64,
}

impl HealthState {
    pub fn new(e: f64, b: f64, f: f64, g: f64) -> Result<Self> {
        let s = Self { e, b, f, g };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.e, self.b, self.f, self.g].iter().all(|v| v.is_finite()) {
            return Err(Error::domain(format!("non-finite health state {self:?}")));
        }
        if !(0.0..=1.0).contains(&self.e) {
            return Err(Error::domain(format!("intensity e = {} outside [0, 1]", self.e)));
        }
        if self.b < 0.0 || self.f < 0.0 || self.g < 0.0 {
            return Err(Error::domain(format!("negative stock in {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SkillStage {
    /// Additive performance model.
    Acquisition,
    /// Multiplicative performance model.
    Retention,
}

impl SkillStage {
    pub const ALL: [SkillStage; 2] = [SkillStage::Acquisition, SkillStage::Retention];

    pub fn as_str(&self) -> &'static str {
        match self {
            SkillStage::Acquisition => "acquisition",
            SkillStage::Retention => "retention",
        }
    }
}

impl fmt::Display for SkillStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SkillStage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "acquisition" => Ok(SkillStage::Acquisition),
            "retention" => Ok(SkillStage::Retention),
            other => Err(Error::domain(format!("unknown skill stage {other:?}"))),
        }
    }
}

/// Intensity groups used to report goal levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IntensityGroup {
    NoService,
    Weak,
    SlightlyWeak,
    SlightlyStrong,
    Strong,
}

/// A suggested goal on the one-decimal grid `{0.0, 0.1, ..., 1.0}`.
///
/// Stored as integer tenths so grid membership holds by construction. Level
/// 0.0 is reserved for the no-service baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GoalAction(u8);

impl GoalAction {
    /// Number of service levels an agent chooses among (0.1 through 1.0).
    pub const SERVICE_LEVELS: usize = 10;

    pub const NO_SERVICE: GoalAction = GoalAction(0);

    pub fn from_tenths(tenths: u8) -> Result<Self> {
        if tenths > 10 {
            return Err(Error::domain(format!("goal of {tenths} tenths exceeds 1.0")));
        }
        Ok(Self(tenths))
    }

    /// Parses a level, rejecting anything that is not an exact grid point.
    pub fn from_level(level: f64) -> Result<Self> {
        if !level.is_finite() || !(0.0..=1.0).contains(&level) {
            return Err(Error::domain(format!("goal level {level} outside [0, 1]")));
        }
        let scaled = level * 10.0;
        let tenths = scaled.round();
        if (scaled - tenths).abs() > 1e-9 {
            return Err(Error::domain(format!("goal level {level} is not on the 0.1 grid")));
        }
        Ok(Self(tenths as u8))
    }

    /// Maps a network output index `0..10` to levels `0.1..1.0`.
    pub fn from_index(index: usize) -> Result<Self> {
        if index >= Self::SERVICE_LEVELS {
            return Err(Error::domain(format!("action index {index} out of range")));
        }
        Ok(Self(index as u8 + 1))
    }

    /// Inverse of [`GoalAction::from_index`]; `None` for the no-service level.
    pub fn index(&self) -> Option<usize> {
        (self.0 > 0).then(|| self.0 as usize - 1)
    }

    pub fn tenths(&self) -> u8 {
        self.0
    }

    pub fn level(&self) -> f64 {
        f64::from(self.0) / 10.0
    }

    pub fn is_service(&self) -> bool {
        self.0 > 0
    }

    pub fn group(&self) -> IntensityGroup {
        match self.0 {
            0 => IntensityGroup::NoService,
            1..=2 => IntensityGroup::Weak,
            3..=5 => IntensityGroup::SlightlyWeak,
            6..=8 => IntensityGroup::SlightlyStrong,
            _ => IntensityGroup::Strong,
        }
    }

    /// All service levels in index order.
    pub fn service_levels() -> impl Iterator<Item = GoalAction> {
        (1..=10).map(GoalAction)
    }
}

impl fmt::Display for GoalAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.1}", self.level())
    }
}

/// Advances the health state by one epoch of realized intensity `e_t`.
pub fn update_state(prev: &HealthState, e_t: f64, profile: &UserProfile) -> Result<HealthState> {
    prev.validate()?;
    if !e_t.is_finite() || !(0.0..=1.0).contains(&e_t) {
        return Err(Error::domain(format!("intensity {e_t} outside [0, 1]")));
    }
    let next = HealthState {
        e: e_t,
        b: profile.delta * prev.b + (1.0 - profile.delta) * e_t,
        f: profile.alpha * prev.f + e_t.powf(profile.lambda),
        g: profile.beta * prev.g + e_t.powf(profile.mu),
    };
    if ![next.b, next.f, next.g].iter().all(|v| v.is_finite()) {
        return Err(Error::domain(format!("update produced non-finite state {next:?}")));
    }
    Ok(next)
}

/// Utility produced by the current stocks, excluding goal effects.
pub fn performance(state: &HealthState, profile: &UserProfile, stage: SkillStage) -> f64 {
    let net = profile.k_f * state.f - profile.k_g * state.g;
    match stage {
        SkillStage::Acquisition => state.b + net,
        SkillStage::Retention => state.b * (1.0 + net),
    }
}

/// Goal-attainment term: `+m` when met, `-l * relative shortfall` otherwise.
pub fn intervention_effect(e_t: f64, action: GoalAction, profile: &UserProfile) -> f64 {
    if !action.is_service() {
        return 0.0;
    }
    let goal = action.level();
    if e_t >= goal {
        profile.m
    } else {
        -profile.l * (goal - e_t) / goal
    }
}

/// Reward for epoch `t`; `state` must already include the epoch's update.
pub fn reward(state: &HealthState, action: GoalAction, profile: &UserProfile, stage: SkillStage) -> f64 {
    performance(state, profile, stage) + intervention_effect(state.e, action, profile)
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;

    fn example_profile() -> UserProfile {
        UserProfile {
            alpha: 0.9,
            beta: 0.5,
            lambda: 1.0,
            mu: 2.0,
            delta: 0.8,
            k_f: 0.3,
            k_g: 0.2,
            m: 2.0,
            l: 3.0,
        }
    }

    #[test]
    fn update_matches_hand_evaluation() {
        let prev = HealthState { e: 0.1, b: 0.5, f: 1.0, g: 0.4 };
        let next = update_state(&prev, 0.6, &example_profile()).unwrap();
        assert_abs_diff_eq!(next.e, 0.6);
        assert_abs_diff_eq!(next.b, 0.52, epsilon = 1e-12);
        assert_abs_diff_eq!(next.f, 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(next.g, 0.56, epsilon = 1e-12);
    }

    #[test]
    fn zero_input_is_pure_decay() {
        let p = UserProfile::default();
        let prev = HealthState { e: 0.4, b: 0.7, f: 2.0, g: 1.1 };
        let next = update_state(&prev, 0.0, &p).unwrap();
        assert_eq!(next.f, p.alpha * prev.f);
        assert_eq!(next.g, p.beta * prev.g);
        assert_eq!(next.b, p.delta * prev.b);
    }

    #[test]
    fn unit_input_from_rest() {
        let p = example_profile();
        let next = update_state(&HealthState::default(), 1.0, &p).unwrap();
        assert_eq!(next.f, 1.0);
        assert_eq!(next.g, 1.0);
        assert_abs_diff_eq!(next.b, 1.0 - p.delta, epsilon = 1e-15);
    }

    #[test]
    fn update_rejects_bad_inputs() {
        let p = example_profile();
        let s = HealthState::default();
        assert!(update_state(&s, 1.2, &p).is_err());
        assert!(update_state(&s, -0.1, &p).is_err());
        assert!(update_state(&s, f64::NAN, &p).is_err());
        let bad = HealthState { e: 0.0, b: f64::INFINITY, f: 0.0, g: 0.0 };
        assert!(update_state(&bad, 0.5, &p).is_err());
    }

    #[test]
    fn performance_both_stages() {
        let p = example_profile();
        let s = HealthState { e: 0.6, b: 0.52, f: 1.5, g: 0.56 };
        assert_abs_diff_eq!(performance(&s, &p, SkillStage::Acquisition), 0.858, epsilon = 1e-12);
        assert_abs_diff_eq!(performance(&s, &p, SkillStage::Retention), 0.69576, epsilon = 1e-12);
        let rest = HealthState { e: 0.0, b: 0.37, f: 0.0, g: 0.0 };
        for stage in SkillStage::ALL {
            assert_eq!(performance(&rest, &p, stage), 0.37);
        }
    }

    #[test]
    fn intervention_cases() {
        let p = example_profile();
        let half = GoalAction::from_level(0.5).unwrap();
        assert_eq!(intervention_effect(0.6, half, &p), 2.0);
        assert_abs_diff_eq!(intervention_effect(0.25, half, &p), -1.5, epsilon = 1e-12);
        for e in [0.0, 0.3, 1.0] {
            assert_eq!(intervention_effect(e, GoalAction::NO_SERVICE, &p), 0.0);
        }
    }

    #[test]
    fn reward_examples() {
        let p = example_profile();
        let s = HealthState { e: 0.6, b: 0.52, f: 1.5, g: 0.56 };
        let half = GoalAction::from_level(0.5).unwrap();
        assert_abs_diff_eq!(reward(&s, half, &p, SkillStage::Acquisition), 2.858, epsilon = 1e-12);
        assert_eq!(
            reward(&s, GoalAction::NO_SERVICE, &p, SkillStage::Retention),
            performance(&s, &p, SkillStage::Retention)
        );

        let decayed = update_state(&HealthState::default(), 0.0, &p).unwrap();
        let strong = GoalAction::from_level(0.9).unwrap();
        assert_abs_diff_eq!(reward(&decayed, strong, &p, SkillStage::Acquisition), -3.0, epsilon = 1e-12);
    }

    #[test]
    fn goal_grid() {
        assert_eq!(GoalAction::from_level(0.3).unwrap().tenths(), 3);
        assert!(GoalAction::from_level(0.35).is_err());
        assert!(GoalAction::from_level(1.1).is_err());
        assert_eq!(GoalAction::from_level(0.0).unwrap(), GoalAction::NO_SERVICE);
        assert_eq!(GoalAction::from_index(9).unwrap().level(), 1.0);
        assert!(GoalAction::from_index(10).is_err());
        let groups: Vec<_> = (0..=10).map(|t| GoalAction::from_tenths(t).unwrap().group()).collect();
        use IntensityGroup::*;
        assert_eq!(
            groups,
            [NoService, Weak, Weak, SlightlyWeak, SlightlyWeak, SlightlyWeak, SlightlyStrong,
             SlightlyStrong, SlightlyStrong, Strong, Strong]
        );
    }

    #[test]
    fn profile_validation() {
        assert!(UserProfile::default().validate().is_ok());
        let bad = UserProfile { alpha: 1.0, ..UserProfile::default() };
        assert!(bad.validate().is_err());
        let bad = UserProfile { mu: 0.9, ..UserProfile::default() };
        assert!(bad.validate().is_err());
        let bad = UserProfile { lambda: 1.2, ..UserProfile::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn geometric_decay_over_many_epochs() {
        let p = UserProfile::default();
        let mut s = HealthState { e: 0.0, b: 1.0, f: 3.0, g: 2.0 };
        for _ in 0..50 {
            s = update_state(&s, 0.0, &p).unwrap();
        }
        let want_f = p.alpha.powi(50) * 3.0;
        let want_g = p.beta.powi(50) * 2.0;
        assert!(((s.f - want_f) / want_f).abs() < 1e-12);
        assert!(((s.g - want_g) / want_g).abs() < 1e-12);
    }

    fn arb_profile() -> impl Strategy<Value = UserProfile> {
        (0.01..0.99f64, 0.01..0.99f64, 0.05..=1.0f64, 1.0..3.0f64, 0.05..=1.0f64, 0.01..2.0f64, 0.01..2.0f64)
            .prop_map(|(alpha, beta, lambda, mu, delta, k_f, k_g)| UserProfile {
                alpha,
                beta,
                lambda,
                mu,
                delta,
                k_f,
                k_g,
                m: 1.0,
                l: 1.0,
            })
    }

    fn arb_state() -> impl Strategy<Value = HealthState> {
        (0.0..=1.0f64, 0.0..2.0f64, 0.0..10.0f64, 0.0..5.0f64).prop_map(|(e, b, f, g)| HealthState { e, b, f, g })
    }

    proptest! {
        #[test]
        fn stocks_monotone_in_effort(p in arb_profile(), s in arb_state(), e1 in 0.0..=1.0f64, e2 in 0.0..=1.0f64) {
            let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            let a = update_state(&s, lo, &p).unwrap();
            let b = update_state(&s, hi, &p).unwrap();
            prop_assert!(a.f <= b.f);
            prop_assert!(a.g <= b.g);
        }

        #[test]
        fn concave_fitness_convex_fatigue(p in arb_profile(), e1 in 0.01..0.99f64, gap in 0.001..0.5f64) {
            let e2 = (e1 + gap).min(1.0);
            prop_assume!(e2 > e1);
            let slope = (e2.powf(p.lambda) - e1.powf(p.lambda)) / (e2 - e1);
            prop_assert!(slope <= p.lambda * e1.powf(p.lambda - 1.0) * (1.0 + 1e-12));
            // Fatigue difference quotients are nondecreasing along a grid.
            let q = |x: f64, y: f64| (y.powf(p.mu) - x.powf(p.mu)) / (y - x);
            let mid = 0.5 * (e1 + e2);
            prop_assert!(q(e1, mid) <= q(mid, e2) * (1.0 + 1e-12) + 1e-15);
        }

        #[test]
        fn shortfall_penalty_grows(t in 1u8..=10, e1 in 0.0..1.0f64, e2 in 0.0..1.0f64) {
            let p = UserProfile::default();
            let a = GoalAction::from_tenths(t).unwrap();
            let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            prop_assume!(hi < a.level());
            prop_assert!(intervention_effect(lo, a, &p).abs() >= intervention_effect(hi, a, &p).abs());
        }

        #[test]
        fn no_service_reward_is_performance(p in arb_profile(), s in arb_state(), stage in prop_oneof![Just(SkillStage::Acquisition), Just(SkillStage::Retention)]) {
            let r = reward(&s, GoalAction::NO_SERVICE, &p, stage);
            prop_assert_eq!(r.to_bits(), performance(&s, &p, stage).to_bits());
        }

        #[test]
        fn deterministic_bits(p in arb_profile(), s in arb_state(), e in 0.0..=1.0f64) {
            let a = update_state(&s, e, &p).unwrap();
            let b = update_state(&s, e, &p).unwrap();
            prop_assert_eq!(a.f.to_bits(), b.f.to_bits());
            prop_assert_eq!(a.g.to_bits(), b.g.to_bits());
            prop_assert_eq!(a.b.to_bits(), b.b.to_bits());
        }
    }
}
