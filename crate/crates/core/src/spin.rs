//! Nuclear-spin level structure of the nitrogen nucleus in each electronic
//! manifold.
//!
//! Levels follow the secular Hamiltonian
//!
//! ```text
//! E(m_I) = Q·m_I² + (−γ·B + a·m_M)·m_I        [MHz]
//! ```
//!
//! where `a·m_M` is zero in the bright `m_S = 0` manifold. Energies are gauge
//! fixed so that `E(0) = 0` for ¹⁴N and the two ¹⁵N levels average to zero,
//! which the formula already satisfies.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Standard tabulated ¹⁴N gyromagnetic ratio γ/2π in MHz/T.
pub const GAMMA_N14_MHZ_PER_T: f64 = 3.0766;
/// Standard tabulated ¹⁵N gyromagnetic ratio γ/2π in MHz/T.
pub const GAMMA_N15_MHZ_PER_T: f64 = -4.3156;
/// ¹⁴N quadrupole splitting between `m_I = 0` and `m_I = ±1`.
pub const QUADRUPOLE_N14_MHZ: f64 = -4.654;
/// Signed dark-state hyperfine product `a·m_M` for ¹⁴N (polarized branch).
pub const DARK_HYPERFINE_PRODUCT_N14_MHZ: f64 = -3.03;
/// Signed dark-state hyperfine product `a·m_M` for ¹⁵N (polarized branch).
pub const DARK_HYPERFINE_PRODUCT_N15_MHZ: f64 = -4.242;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SpinError {
    #[error("gyromagnetic ratio must be nonzero")]
    ZeroGyromagneticRatio,
    #[error("¹⁵N carries no quadrupole moment, got Q = {0} MHz")]
    QuadrupoleOnSpinHalf(f64),
    #[error("magnetic field must be finite and nonnegative, got {0} T")]
    NegativeField(f64),
    #[error("invalid relaxation times T1 = {t1} s, T2 = {t2} s (need 0 < T2 ≤ 2·T1)")]
    Relaxation { t1: f64, t2: f64 },
    #[error("bright manifold must have m = 0, got {0}")]
    BrightProjection(HalfInt),
    #[error("dark manifold must have |m_M| = 1/2, got {0}")]
    DarkProjection(HalfInt),
    #[error("spin system needs exactly one bright manifold and at least one dark manifold")]
    ManifoldCount,
    #[error("invalid half-integer `{0}`")]
    BadHalfInt(String),
}

/// A signed integer or half-integer, stored as twice its value.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct HalfInt(i32);

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt(0);
    pub const HALF: HalfInt = HalfInt(1);
    pub const MINUS_HALF: HalfInt = HalfInt(-1);
    pub const ONE: HalfInt = HalfInt(2);
    pub const MINUS_ONE: HalfInt = HalfInt(-2);

    pub const fn from_twice(twice: i32) -> Self {
        HalfInt(twice)
    }

    pub const fn twice(self) -> i32 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 2.0
    }

    pub fn is_half_odd(self) -> bool {
        self.0 % 2 != 0
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

impl fmt::Debug for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for HalfInt {
    type Err = SpinError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SpinError::BadHalfInt(s.to_string());
        let t = s.trim();
        let t = t.strip_prefix('+').unwrap_or(t);
        match t.split_once('/') {
            Some((num, "2")) => {
                let n: i32 = num.trim().parse().map_err(|_| bad())?;
                if n % 2 == 0 {
                    return Err(bad());
                }
                Ok(HalfInt(n))
            }
            Some(_) => Err(bad()),
            None => {
                let n: i32 = t.parse().map_err(|_| bad())?;
                n.checked_mul(2).map(HalfInt).ok_or_else(bad)
            }
        }
    }
}

impl TryFrom<String> for HalfInt {
    type Error = SpinError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<HalfInt> for String {
    fn from(h: HalfInt) -> String {
        h.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IsotopeKind {
    N14,
    N15,
}

impl IsotopeKind {
    pub fn spin(self) -> HalfInt {
        match self {
            IsotopeKind::N14 => HalfInt::ONE,
            IsotopeKind::N15 => HalfInt::HALF,
        }
    }
}

impl FromStr for IsotopeKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "n14" | "14n" => Ok(IsotopeKind::N14),
            "n15" | "15n" => Ok(IsotopeKind::N15),
            other => Err(format!("unknown isotope `{other}` (expected n14 or n15)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Isotope {
    kind: IsotopeKind,
    gamma_mhz_per_t: f64,
    quadrupole_mhz: f64,
}

impl Isotope {
    pub fn new(kind: IsotopeKind, gamma_mhz_per_t: f64, quadrupole_mhz: f64) -> Result<Self, SpinError> {
        if gamma_mhz_per_t == 0.0 || !gamma_mhz_per_t.is_finite() {
            return Err(SpinError::ZeroGyromagneticRatio);
        }
        if kind == IsotopeKind::N15 && quadrupole_mhz != 0.0 {
            return Err(SpinError::QuadrupoleOnSpinHalf(quadrupole_mhz));
        }
        Ok(Self { kind, gamma_mhz_per_t, quadrupole_mhz })
    }

    pub fn n14() -> Self {
        Self { kind: IsotopeKind::N14, gamma_mhz_per_t: GAMMA_N14_MHZ_PER_T, quadrupole_mhz: QUADRUPOLE_N14_MHZ }
    }

    pub fn n15() -> Self {
        Self { kind: IsotopeKind::N15, gamma_mhz_per_t: GAMMA_N15_MHZ_PER_T, quadrupole_mhz: 0.0 }
    }

    pub fn kind(&self) -> IsotopeKind {
        self.kind
    }

    pub fn spin(&self) -> HalfInt {
        self.kind.spin()
    }

    pub fn gamma_mhz_per_t(&self) -> f64 {
        self.gamma_mhz_per_t
    }

    pub fn quadrupole_mhz(&self) -> f64 {
        self.quadrupole_mhz
    }

    /// `m_I` values from `−I` to `+I`.
    pub fn projections(&self) -> Vec<HalfInt> {
        let twice_i = self.spin().twice();
        (-twice_i..=twice_i).step_by(2).map(HalfInt::from_twice).collect()
    }

    pub fn has_level(&self, m: HalfInt) -> bool {
        let twice_i = self.spin().twice();
        m.twice().abs() <= twice_i && (m.twice() - twice_i) % 2 == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ManifoldKind {
    BrightMs0,
    Dark,
}

/// Which dark-state `m_M` projection a line belongs to. `Plus` is the
/// branch populated by the polarizing mechanism at high field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DarkBranch {
    Plus,
    Minus,
}

impl DarkBranch {
    pub fn projection(self) -> HalfInt {
        match self {
            DarkBranch::Plus => HalfInt::HALF,
            DarkBranch::Minus => HalfInt::MINUS_HALF,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Relaxation {
    pub t1_s: f64,
    pub t2_s: f64,
}

impl Relaxation {
    pub fn new(t1_s: f64, t2_s: f64) -> Result<Self, SpinError> {
        if !(t1_s > 0.0 && t2_s > 0.0 && t2_s <= 2.0 * t1_s) {
            return Err(SpinError::Relaxation { t1: t1_s, t2: t2_s });
        }
        Ok(Self { t1_s, t2_s })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Manifold {
    kind: ManifoldKind,
    projection: HalfInt,
    hyperfine_a_mhz: f64,
    relaxation: Relaxation,
}

impl Manifold {
    pub fn bright(relaxation: Relaxation) -> Self {
        Self { kind: ManifoldKind::BrightMs0, projection: HalfInt::ZERO, hyperfine_a_mhz: 0.0, relaxation }
    }

    pub fn dark(projection: HalfInt, hyperfine_a_mhz: f64, relaxation: Relaxation) -> Result<Self, SpinError> {
        if projection.twice().abs() != 1 {
            return Err(SpinError::DarkProjection(projection));
        }
        Ok(Self { kind: ManifoldKind::Dark, projection, hyperfine_a_mhz, relaxation })
    }

    /// Dark manifold for `branch`, built from the signed product `a·m_M` of
    /// the polarized (`Plus`) branch.
    pub fn dark_branch(branch: DarkBranch, plus_product_mhz: f64, relaxation: Relaxation) -> Self {
        let a = plus_product_mhz / DarkBranch::Plus.projection().value();
        Self { kind: ManifoldKind::Dark, projection: branch.projection(), hyperfine_a_mhz: a, relaxation }
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn projection(&self) -> HalfInt {
        self.projection
    }

    pub fn hyperfine_a_mhz(&self) -> f64 {
        self.hyperfine_a_mhz
    }

    pub fn hyperfine_product_mhz(&self) -> f64 {
        self.hyperfine_a_mhz * self.projection.value()
    }

    pub fn relaxation(&self) -> Relaxation {
        self.relaxation
    }

    pub fn branch(&self) -> Option<DarkBranch> {
        match (self.kind, self.projection.twice()) {
            (ManifoldKind::Dark, 1) => Some(DarkBranch::Plus),
            (ManifoldKind::Dark, -1) => Some(DarkBranch::Minus),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinSystem {
    isotope: Isotope,
    field_t: f64,
    manifolds: Vec<Manifold>,
}

impl SpinSystem {
    pub fn new(isotope: Isotope, field_t: f64, manifolds: Vec<Manifold>) -> Result<Self, SpinError> {
        if !(field_t >= 0.0 && field_t.is_finite()) {
            return Err(SpinError::NegativeField(field_t));
        }
        let bright = manifolds.iter().filter(|m| m.kind == ManifoldKind::BrightMs0).count();
        let dark = manifolds.iter().filter(|m| m.kind == ManifoldKind::Dark).count();
        if bright != 1 || dark == 0 {
            return Err(SpinError::ManifoldCount);
        }
        for m in &manifolds {
            match m.kind {
                ManifoldKind::BrightMs0 if m.projection != HalfInt::ZERO => {
                    return Err(SpinError::BrightProjection(m.projection))
                }
                ManifoldKind::Dark if m.projection.twice().abs() != 1 => {
                    return Err(SpinError::DarkProjection(m.projection))
                }
                _ => {}
            }
            Relaxation::new(m.relaxation.t1_s, m.relaxation.t2_s)?;
        }
        Ok(Self { isotope, field_t, manifolds })
    }

    /// Bright manifold plus both dark branches with the given polarized-branch
    /// hyperfine product.
    pub fn with_dark_pair(
        isotope: Isotope,
        field_t: f64,
        dark_plus_product_mhz: f64,
        bright: Relaxation,
        dark: Relaxation,
    ) -> Result<Self, SpinError> {
        Self::new(
            isotope,
            field_t,
            vec![
                Manifold::bright(bright),
                Manifold::dark_branch(DarkBranch::Plus, dark_plus_product_mhz, dark),
                Manifold::dark_branch(DarkBranch::Minus, dark_plus_product_mhz, dark),
            ],
        )
    }

    pub fn isotope(&self) -> &Isotope {
        &self.isotope
    }

    pub fn field_t(&self) -> f64 {
        self.field_t
    }

    pub fn manifolds(&self) -> &[Manifold] {
        &self.manifolds
    }

    pub fn bright(&self) -> &Manifold {
        self.manifolds.iter().find(|m| m.kind == ManifoldKind::BrightMs0).expect("checked at construction")
    }

    /// Dark manifold for `branch`; falls back to any dark manifold when the
    /// system only carries one.
    pub fn dark(&self, branch: DarkBranch) -> &Manifold {
        self.manifolds
            .iter()
            .find(|m| m.branch() == Some(branch))
            .or_else(|| self.manifolds.iter().find(|m| m.kind == ManifoldKind::Dark))
            .expect("checked at construction")
    }

    /// Linear coefficient `−γB + a·m_M` of the level formula.
    fn linear_coefficient(&self, manifold: &Manifold) -> f64 {
        -self.isotope.gamma_mhz_per_t * self.field_t + manifold.hyperfine_product_mhz()
    }

    pub fn level_energy(&self, manifold: &Manifold, m: HalfInt) -> f64 {
        let mi = m.value();
        self.isotope.quadrupole_mhz * mi * mi + self.linear_coefficient(manifold) * mi
    }

    pub fn level_energies(&self, manifold: &Manifold) -> BTreeMap<HalfInt, f64> {
        self.isotope.projections().into_iter().map(|m| (m, self.level_energy(manifold, m))).collect()
    }

    /// Signed transition energy `E(to) − E(from)` for `to = from + 1`.
    pub fn signed_transition_mhz(&self, manifold: &Manifold, lower: HalfInt) -> f64 {
        let upper = HalfInt::from_twice(lower.twice() + 2);
        self.level_energy(manifold, upper) - self.level_energy(manifold, lower)
    }

    pub fn transitions(&self, manifold: &Manifold) -> Vec<Transition> {
        let levels = self.isotope.projections();
        let mut out: Vec<Transition> = levels
            .windows(2)
            .map(|w| Transition {
                manifold: *manifold,
                m_from: w[0],
                m_to: w[1],
                frequency_mhz: self.signed_transition_mhz(manifold, w[0]).abs(),
            })
            .collect();
        out.sort_by(|a, b| a.frequency_mhz.total_cmp(&b.frequency_mhz));
        out
    }

    /// Transition of `manifold` closest to `rf_mhz`.
    pub fn nearest_transition(&self, manifold: &Manifold, rf_mhz: f64) -> Transition {
        self.transitions(manifold)
            .into_iter()
            .min_by(|a, b| (a.frequency_mhz - rf_mhz).abs().total_cmp(&(b.frequency_mhz - rf_mhz).abs()))
            .expect("every isotope has at least one transition")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub manifold: Manifold,
    pub m_from: HalfInt,
    pub m_to: HalfInt,
    pub frequency_mhz: f64,
}

impl Transition {
    pub fn involves(&self, m: HalfInt) -> bool {
        self.m_from == m || self.m_to == m
    }

    /// The other level of the transition, if `m` belongs to it.
    pub fn partner(&self, m: HalfInt) -> Option<HalfInt> {
        if m == self.m_from {
            Some(self.m_to)
        } else if m == self.m_to {
            Some(self.m_from)
        } else {
            None
        }
    }
}

/// Dark `m_M` branches whose NMR lines are visible at `field_t`. At or above
/// the threshold only the polarized branch is populated.
pub fn dark_line_visibility(field_t: f64, polarization_threshold_t: f64) -> Vec<DarkBranch> {
    if field_t >= polarization_threshold_t {
        vec![DarkBranch::Plus]
    } else {
        vec![DarkBranch::Plus, DarkBranch::Minus]
    }
}
