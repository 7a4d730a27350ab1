//! Closed-form secrecy analysis.
//!
//! A slot yields a secret bit with probability `p_b = (1 - p_c)(1 - p_g)`.
//! Over `n` independent slots the number of secret bits is binomial, and the
//! probability of collecting at least `k` of them is its upper tail. The
//! tail is summed from saddle-point binomial terms (Loader's method) so it
//! stays accurate to ~1e-13 for `n` in the tens of thousands.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::ml_success_prob;
use crate::channel::delta_mean_pathloss;
use crate::scenario::{Position, CANONICAL_AB_DISTANCE};

/// Collision probability with two frequencies and fair coins.
pub const COLLISION_PROBABILITY: f64 = 0.5;

/// Distances closer than this count as equal in the no-fading guess model.
pub const DEFAULT_EQUALITY_TOLERANCE: f64 = 1e-3;

/// Default key-establishment success threshold.
pub const DEFAULT_TARGET: f64 = 0.99;

/// Transmission counts beyond this are reported as infeasible.
pub const MAX_TRANSMISSIONS: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
    #[error("invalid key request: {0}")]
    InvalidKeyRequest(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const ONE: Probability = Probability(1.0);

    pub fn new(value: f64) -> Result<Self, AnalysisError> {
        if (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(AnalysisError::InvalidProbability(value))
        }
    }

    /// Clamps rounding spill outside `[0, 1]`. NaN maps to zero.
    pub(crate) fn saturating(value: f64) -> Self {
        if value.is_nan() {
            Self(0.0)
        } else {
            Self(value.clamp(0.0, 1.0))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn complement(self) -> Self {
        Self(1.0 - self.0)
    }
}

impl TryFrom<f64> for Probability {
    type Error = AnalysisError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Probability::new(value)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRequest {
    pub k: u64,
    pub target: Probability,
}

impl KeyRequest {
    pub fn new(k: u64, target: f64) -> Result<Self, AnalysisError> {
        if k == 0 {
            return Err(AnalysisError::InvalidKeyRequest(
                "key size must be at least 1 bit".into(),
            ));
        }
        if !(target > 0.0 && target < 1.0) {
            return Err(AnalysisError::InvalidKeyRequest(format!(
                "target {target} must lie strictly between 0 and 1"
            )));
        }
        Ok(Self {
            k,
            target: Probability(target),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyRegion {
    pub center: Position,
    pub radius: f64,
}

pub fn secret_bit_prob(p_c: Probability, p_g: Probability) -> Probability {
    Probability::saturating((1.0 - p_c.0) * (1.0 - p_g.0))
}

/// No-fading guess probability: Eve cannot tell equidistant sources apart
/// and always can otherwise.
pub fn baseline_pg(d_ae: f64, d_be: f64, tolerance: f64) -> Probability {
    if (d_ae - d_be).abs() <= tolerance {
        Probability::ZERO
    } else {
        Probability::ONE
    }
}

// ln(n!) - (n + 1/2) ln n + n - ln sqrt(2 pi), exact for n <= 15.
#[allow(clippy::excessive_precision)]
const STIRLERR_SMALL: [f64; 16] = [
    0.0,
    0.081_061_466_795_327_258_219_670_26,
    0.041_340_695_955_409_294_093_822_08,
    0.027_677_925_684_998_339_148_789_29,
    0.020_790_672_103_765_093_111_522_77,
    0.016_644_691_189_821_192_163_194_87,
    0.013_876_128_823_070_747_998_745_73,
    0.011_896_709_945_891_770_095_055_72,
    0.010_411_265_261_972_096_497_478_57,
    0.009_255_462_182_712_732_917_728_637,
    0.008_330_563_433_362_871_256_469_319,
    0.007_573_675_487_951_840_794_972_024,
    0.006_942_840_107_209_529_865_664_153,
    0.006_408_994_188_004_207_068_439_631,
    0.005_951_370_112_758_847_735_624_416,
    0.005_554_733_551_962_801_371_038_69,
];

fn stirlerr(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15.0 {
        return STIRLERR_SMALL[n as usize];
    }
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x / np) + np - x`, computed without cancellation.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / f64::from(2 * j + 1);
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / np).ln() + np - x
    }
}

/// `ln P(X = x)` for `X ~ Binomial(n, p)`.
pub fn ln_binomial_pmf(x: u64, n: u64, p: f64) -> f64 {
    if x > n {
        return f64::NEG_INFINITY;
    }
    let q = 1.0 - p;
    let (x, n) = (x as f64, n as f64);
    if p == 0.0 {
        return if x == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if q == 0.0 {
        return if x == n { 0.0 } else { f64::NEG_INFINITY };
    }
    if x == 0.0 {
        if n == 0.0 {
            return 0.0;
        }
        return if p < 0.1 { -bd0(n, n * q) - n * p } else { n * q.ln() };
    }
    if x == n {
        return if q < 0.1 { -bd0(n, n * p) - n * q } else { n * p.ln() };
    }
    let lc = stirlerr(n) - stirlerr(x) - stirlerr(n - x) - bd0(x, n * p) - bd0(n - x, n * q);
    let lf = (2.0 * std::f64::consts::PI).ln() + x.ln() + (-x / n).ln_1p();
    lc - 0.5 * lf
}

/// Compensated (Neumaier) sum of `exp(ln_binomial_pmf(i))` over `range`.
fn pmf_sum(range: std::ops::RangeInclusive<u64>, n: u64, p: f64) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for i in range {
        let t = ln_binomial_pmf(i, n, p).exp();
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
    }
    sum + comp
}

/// Probability of at least `k` successes in `n` trials of probability `p_b`.
///
/// Only the window within 40 standard deviations of the mean is summed;
/// everything outside underflows anyway. The shorter side of the mean is
/// summed and complemented when that gives the better-conditioned result.
pub fn key_prob(k: u64, n: u64, p_b: Probability) -> Probability {
    if k == 0 {
        return Probability::ONE;
    }
    if k > n {
        return Probability::ZERO;
    }
    let p = p_b.0;
    let mean = n as f64 * p;
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    let reach = 40.0 * sd + 50.0;
    let lo = (mean - reach).floor().max(0.0) as u64;
    let hi = ((mean + reach).ceil() as u64).min(n);
    let value = if k as f64 > mean {
        if k > hi {
            0.0
        } else {
            pmf_sum(k..=hi, n, p)
        }
    } else if k - 1 < lo {
        1.0
    } else {
        1.0 - pmf_sum(lo..=k - 1, n, p)
    };
    Probability::saturating(value)
}

/// Smallest `n` with `key_prob(k, n, p_b) >= target`, by doubling and
/// bisection over the monotone tail.
pub fn min_transmissions(req: &KeyRequest, p_b: Probability) -> Result<u64, AnalysisError> {
    if p_b.0 <= 0.0 {
        return Err(AnalysisError::Infeasible(
            "secret-bit probability is zero; no number of transmissions suffices".into(),
        ));
    }
    let target = req.target.0;
    let meets = |n: u64| key_prob(req.k, n, p_b).0 >= target;
    let mut hi = req.k.max(1);
    if meets(hi) {
        return Ok(hi);
    }
    let mut lo = hi;
    while !meets(hi) {
        lo = hi;
        hi = hi.saturating_mul(2);
        if hi > MAX_TRANSMISSIONS {
            return Err(AnalysisError::Infeasible(format!(
                "more than {MAX_TRANSMISSIONS} transmissions required"
            )));
        }
    }
    // invariant: !meets(lo), meets(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if meets(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Secret-bit probability for an arbitrary geometry under shadowing
/// `sigma`, against the ML adversary. An exactly equidistant Eve abstains
/// on every bit, at any `sigma`.
pub fn shadowed_pb(d_ae: f64, d_be: f64, sigma: f64, gamma: f64) -> Probability {
    let p_g = ml_success_prob(delta_mean_pathloss(d_ae, d_be, gamma), sigma);
    secret_bit_prob(Probability(COLLISION_PROBABILITY), Probability::saturating(p_g))
}

/// [`shadowed_pb`] on the canonical line, where `d_AE = d_BE + 50`.
pub fn fading_pb(d_be: f64, sigma: f64, gamma: f64) -> Probability {
    shadowed_pb(d_be + CANONICAL_AB_DISTANCE, d_be, sigma, gamma)
}

/// Smallest Eve-Bob distance beyond which a `req.k`-bit key is established
/// within `n` transmissions with probability at least `req.target`, on the
/// canonical line. `min_distance` is the smallest modeled distance (the
/// reference distance); a region that already holds there is reported with
/// that radius.
pub fn privacy_radius(
    req: &KeyRequest,
    n: u64,
    sigma: f64,
    gamma: f64,
    min_distance: f64,
) -> Result<PrivacyRegion, AnalysisError> {
    if n < req.k {
        return Err(AnalysisError::Infeasible(format!(
            "{n} transmissions cannot carry a {}-bit key",
            req.k
        )));
    }
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(AnalysisError::Infeasible(
            "without shadowing Eve recovers every bit at any unequal distance".into(),
        ));
    }
    let target = req.target.0;
    let prob_at = |d: f64| key_prob(req.k, n, fading_pb(d, sigma, gamma)).0;
    // fading_pb rises towards 1/4 as Eve recedes; the far-field limit bounds
    // what any radius can achieve.
    let far = key_prob(
        req.k,
        n,
        secret_bit_prob(Probability(COLLISION_PROBABILITY), Probability(0.5)),
    )
    .0;
    if far <= target {
        return Err(AnalysisError::Infeasible(format!(
            "even a distant eavesdropper leaves success probability {far:.6} <= target {target}"
        )));
    }
    let center = Position::new(CANONICAL_AB_DISTANCE / 2.0, 0.0);
    let mut lo = min_distance;
    if prob_at(lo) >= target {
        return Ok(PrivacyRegion { center, radius: lo });
    }
    let mut hi = lo.max(1.0) * 2.0;
    while prob_at(hi) < target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e15 {
            return Err(AnalysisError::Infeasible("privacy radius diverges".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if prob_at(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(PrivacyRegion { center, radius: hi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;
    use proptest::prelude::*;

    fn p(v: f64) -> Probability {
        Probability::new(v).unwrap()
    }

    /// Exact tail for dyadic `p = num / 2^bits`, evaluated in big integers.
    fn exact_tail(k: u64, n: u64, num: u64, bits: u32) -> f64 {
        let den = 1u64 << bits;
        let mut c = BigUint::from(1u32);
        let mut acc = BigUint::from(0u32);
        for i in 0..=n {
            if i >= k {
                acc += &c * BigUint::from(num).pow(i as u32) * BigUint::from(den - num).pow((n - i) as u32);
            }
            c = c * BigUint::from(n - i) / BigUint::from(i + 1);
        }
        let scale = BigUint::from(1u32) << (bits as u64 * n);
        // 1e18 fixed-point division keeps ~18 significant digits
        let fixed = acc * BigUint::from(10u64.pow(18)) / scale;
        fixed.to_string().parse::<f64>().unwrap() / 1e18
    }

    #[test]
    fn probability_bounds() {
        assert!(Probability::new(-0.1).is_err());
        assert!(Probability::new(1.1).is_err());
        assert!(Probability::new(f64::NAN).is_err());
        assert_eq!(p(0.3).complement().value(), 0.7);
    }

    #[test]
    fn key_request_bounds() {
        assert!(KeyRequest::new(0, 0.99).is_err());
        assert!(KeyRequest::new(64, 1.0).is_err());
        assert!(KeyRequest::new(64, 0.0).is_err());
        assert!(KeyRequest::new(64, 0.99).is_ok());
    }

    #[test]
    fn secret_bit_examples() {
        assert_eq!(secret_bit_prob(p(0.5), p(0.0)).value(), 0.5);
        assert_eq!(secret_bit_prob(p(0.5), p(1.0)).value(), 0.0);
        assert_eq!(secret_bit_prob(p(0.5), p(0.5)).value(), 0.25);
    }

    #[test]
    fn baseline_examples() {
        assert_eq!(baseline_pg(60.0, 60.0, DEFAULT_EQUALITY_TOLERANCE), Probability::ZERO);
        assert_eq!(baseline_pg(70.0, 20.0, DEFAULT_EQUALITY_TOLERANCE), Probability::ONE);
        assert_eq!(baseline_pg(50.000_000_1, 50.0, 1e-3), Probability::ZERO);
    }

    #[test]
    fn key_prob_edges() {
        assert_eq!(key_prob(0, 17, p(0.3)), Probability::ONE);
        assert_eq!(key_prob(129, 128, p(0.5)), Probability::ZERO);
        assert_eq!(key_prob(5, 10, p(0.0)), Probability::ZERO);
        assert_eq!(key_prob(10, 10, p(1.0)), Probability::ONE);
    }

    #[test]
    fn key_prob_matches_exact_oracle() {
        // frozen from exact rational evaluation
        assert!((key_prob(128, 300, p(0.5)).value() - 0.995_369_396_661_794_7).abs() < 1e-12);
        assert!((key_prob(64, 156, p(0.5)).value() - 0.990_027_125_631_582_8).abs() < 1e-12);
        assert!((key_prob(10, 20, p(0.25)).value() - 0.013_864_416_943_761_17).abs() < 1e-12);
        assert!((key_prob(3, 30, p(0.375)).value() - 0.999_867_893_242_877_2).abs() < 1e-12);

        for &(k, n, num, bits) in &[
            (128u64, 300u64, 1u64, 1u32),
            (256, 567, 1, 1),
            (256, 566, 1, 1),
            (64, 400, 1, 2),
            (100, 400, 1, 2),
            (120, 400, 1, 2),
            (7, 1000, 1, 8),
            (600, 2000, 5, 4),
            (1, 1, 3, 2),
        ] {
            let got = key_prob(k, n, p(num as f64 / (1u64 << bits) as f64)).value();
            let want = exact_tail(k, n, num, bits);
            assert!((got - want).abs() < 1e-12, "k={k} n={n}: {got} vs {want}");
        }
    }

    #[test]
    fn key_prob_large_n_accuracy() {
        let n = 10_000;
        for k in [4_800u64, 4_950, 5_000, 5_050, 5_200] {
            let got = key_prob(k, n, p(0.5)).value();
            let want = exact_tail(k, n, 1, 1);
            assert!((got - want).abs() < 1e-12, "k={k}: {got} vs {want}");
        }
    }

    /// Counts outcome sequences by number of successes, then weights them.
    fn enumerated_tail(k: u64, n: u32, p: f64) -> f64 {
        let mut by_weight = vec![0u64; n as usize + 1];
        for seq in 0u64..(1u64 << n) {
            by_weight[seq.count_ones() as usize] += 1;
        }
        by_weight
            .iter()
            .enumerate()
            .filter(|(i, _)| *i as u64 >= k)
            .map(|(i, &c)| c as f64 * p.powi(i as i32) * (1.0 - p).powi((n as usize - i) as i32))
            .sum()
    }

    #[test]
    fn key_prob_matches_enumeration() {
        for n in 1..=20u32 {
            for k in 0..=n as u64 + 1 {
                for &pb in &[0.1, 0.25, 0.5, 0.8] {
                    let got = key_prob(k, n as u64, p(pb)).value();
                    let want = enumerated_tail(k, n, pb);
                    assert!((got - want).abs() < 1e-12, "k={k} n={n} p={pb}");
                    let comp = key_prob(n as u64 + 1 - k.min(n as u64 + 1), n as u64, p(1.0 - pb)).value();
                    if k <= n as u64 + 1 && k >= 1 {
                        assert!((got + comp - 1.0).abs() < 1e-12);
                    }
                }
            }
        }
        let got = key_prob(12, 30, p(0.25)).value();
        assert!((got - enumerated_tail(12, 30, 0.25)).abs() < 1e-12);
    }

    #[test]
    fn min_transmissions_thresholds() {
        let half = p(0.5);
        // exact minima; 155 -> 0.98790, 294 -> 0.98861, 566 -> 0.98965
        for (k, want) in [(64u64, 156u64), (128, 295), (256, 567)] {
            let req = KeyRequest::new(k, 0.99).unwrap();
            assert_eq!(min_transmissions(&req, half).unwrap(), want);
        }
        let req = KeyRequest::new(1, 0.99).unwrap();
        assert_eq!(min_transmissions(&req, Probability::ONE).unwrap(), 1);
        assert!(matches!(
            min_transmissions(&req, Probability::ZERO),
            Err(AnalysisError::Infeasible(_))
        ));
    }

    #[test]
    fn fading_pb_examples() {
        let v = fading_pb(20.0, 8.0, 3.5).value();
        assert!((v - 0.023_087_741_33).abs() < 1e-9, "{v}");
        assert_eq!(fading_pb(20.0, 0.0, 3.5).value(), 0.0);
        assert!((fading_pb(1e6, 8.0, 3.5).value() - 0.25).abs() < 1e-4);
        assert!((fading_pb(1e6, 8.0, 3.5).value() - 0.249_986_600_561_87).abs() < 1e-10);
    }

    #[test]
    fn privacy_radius_examples() {
        let req = KeyRequest::new(64, 0.99).unwrap();
        assert!(matches!(
            privacy_radius(&req, 63, 8.0, 3.5, 1.0),
            Err(AnalysisError::Infeasible(_))
        ));
        let r = privacy_radius(&req, 1_000_000, 8.0, 3.5, 1.0).unwrap();
        assert!((r.radius - 3.724_989_447_886).abs() < 1e-8, "{}", r.radius);
        assert_eq!(r.center, Position::new(25.0, 0.0));
        // frozen from high-precision bisection: R* = 267.6773758...
        let r = privacy_radius(&req, 400, 8.0, 3.5, 1.0).unwrap();
        assert!((r.radius - 267.677_375_808).abs() < 1e-4, "{}", r.radius);
        // already private at the minimum distance
        assert_eq!(privacy_radius(&req, 400, 8.0, 3.5, 300.0).unwrap().radius, 300.0);
        assert!(matches!(
            privacy_radius(&req, 400, 0.0, 3.5, 1.0),
            Err(AnalysisError::Infeasible(_))
        ));
        // key_prob(64, 200, 1/4) < 0.99 even in the far field
        assert!(matches!(
            privacy_radius(&req, 200, 8.0, 3.5, 1.0),
            Err(AnalysisError::Infeasible(_))
        ));
    }

    #[test]
    fn zero_sigma_recovers_no_fading_branches() {
        assert_eq!(shadowed_pb(60.0, 60.0, 0.0, 3.5).value(), 0.5);
        assert_eq!(shadowed_pb(70.0, 20.0, 0.0, 3.5).value(), 0.0);
        assert!((shadowed_pb(70.0, 20.0, 1e-3, 3.5).value()).abs() < 1e-15);
        assert_eq!(shadowed_pb(60.0, 60.0, 1e-3, 3.5).value(), 0.5);
    }

    proptest! {
        #[test]
        fn key_prob_monotone(k in 1u64..200, n in 1u64..600, a in 0.0..1.0f64, b in 0.0..1.0f64) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let v = key_prob(k, n, p(lo)).value();
            prop_assert!(v <= key_prob(k, n, p(hi)).value() + 1e-12);
            prop_assert!(v <= key_prob(k, n + 1, p(lo)).value() + 1e-12);
            prop_assert!(key_prob(k + 1, n, p(lo)).value() <= v + 1e-12);
        }

        #[test]
        fn key_prob_complement(k in 1u64..300, n in 1u64..300, pb in 0.0..1.0f64) {
            prop_assume!(k <= n + 1);
            let sum = key_prob(k, n, p(pb)).value() + key_prob(n + 1 - k, n, p(1.0 - pb)).value();
            prop_assert!((sum - 1.0).abs() < 1e-12, "{}", sum);
        }

        #[test]
        fn fading_pb_monotone(d1 in 1.0..1e4f64, d2 in 1.0..1e4f64, s1 in 0.5..20.0f64, s2 in 0.5..20.0f64) {
            let (dlo, dhi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            prop_assert!(fading_pb(dlo, s1, 3.5).value() <= fading_pb(dhi, s1, 3.5).value());
            let (slo, shi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
            prop_assert!(fading_pb(d1, slo, 3.5).value() <= fading_pb(d1, shi, 3.5).value());
            prop_assert!(fading_pb(d1, s1, 3.5).value() < 0.25);
        }

        #[test]
        fn min_transmissions_is_minimal(k in 1u64..300, pb in 0.05..1.0f64, target in 0.5..0.999f64) {
            let req = KeyRequest::new(k, target).unwrap();
            let n = min_transmissions(&req, p(pb)).unwrap();
            prop_assert!(key_prob(k, n, p(pb)).value() >= target);
            if n > 1 {
                prop_assert!(key_prob(k, n - 1, p(pb)).value() < target);
            }
        }
    }

    #[test]
    fn privacy_radius_monotone() {
        let r = |k, n, s| {
            privacy_radius(&KeyRequest::new(k, 0.99).unwrap(), n, s, 3.5, 1.0)
                .unwrap()
                .radius
        };
        assert!(r(64, 500, 8.0) <= r(64, 400, 8.0));
        assert!(r(64, 400, 14.0) <= r(64, 400, 8.0));
        assert!(r(64, 400, 8.0) <= r(80, 400, 8.0));
    }
}
