//! Risk and regret measures on finite probability spaces.
//!
//! Every catalogued measure comes with three evaluations: the closed form
//! ([`eval_risk`], [`eval_regret`]), the support function of its envelope
//! ([`envelope_sup`]) and, for risks, the trade-off formula
//! `R(ξ₀) = min_y { y + V(ξ₀ − y) }` ([`risk_from_regret`]).
//!
//! Losses are positive: larger values of `ξ₀` are worse. We write
//! `ξ₊ = max(ξ, 0)` and `ξ₋ = max(−ξ, 0)`, so `ξ = ξ₊ − ξ₋`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::ops::Add;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::probspace::{FiniteProbSpace, MIN_PROBABILITY, PROBABILITY_SUM_TOL};
use crate::{Error, Result};

/// A value in `(−∞, +∞]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extended {
    Finite(f64),
    PosInfinity,
}

impl Extended {
    pub fn is_finite(self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::PosInfinity => None,
        }
    }

    /// `self ≤ other + tol`, with `+∞ ≤ +∞`.
    pub fn le_within(self, other: Extended, tol: f64) -> bool {
        match (self, other) {
            (_, Extended::PosInfinity) => true,
            (Extended::PosInfinity, Extended::Finite(_)) => false,
            (Extended::Finite(a), Extended::Finite(b)) => a <= b + tol,
        }
    }

    fn scale(self, c: f64) -> Extended {
        match self {
            Extended::Finite(v) => Extended::Finite(c * v),
            Extended::PosInfinity if c > 0.0 => Extended::PosInfinity,
            Extended::PosInfinity => Extended::Finite(0.0),
        }
    }
}

impl Add<f64> for Extended {
    type Output = Extended;
    fn add(self, rhs: f64) -> Extended {
        match self {
            Extended::Finite(v) => Extended::Finite(v + rhs),
            Extended::PosInfinity => Extended::PosInfinity,
        }
    }
}

impl Add for Extended {
    type Output = Extended;
    fn add(self, rhs: Extended) -> Extended {
        match (self, rhs) {
            (Extended::Finite(a), Extended::Finite(b)) => Extended::Finite(a + b),
            _ => Extended::PosInfinity,
        }
    }
}

impl PartialOrd for Extended {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Extended::Finite(a), Extended::Finite(b)) => a.partial_cmp(b),
            (Extended::Finite(_), Extended::PosInfinity) => Some(Ordering::Less),
            (Extended::PosInfinity, Extended::Finite(_)) => Some(Ordering::Greater),
            (Extended::PosInfinity, Extended::PosInfinity) => Some(Ordering::Equal),
        }
    }
}

/// A random loss on a finite space: one value per atom.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomVariable {
    values: Vec<f64>,
    probs: Vec<f64>,
}

impl RandomVariable {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != probs.len() {
            return Err(Error::Dimension(format!(
                "{} values for {} atoms",
                values.len(),
                probs.len()
            )));
        }
        if probs.iter().any(|p| !(*p >= MIN_PROBABILITY)) {
            return Err(Error::InvalidSpace("atom probabilities must be positive".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROBABILITY_SUM_TOL {
            return Err(Error::InvalidSpace(format!("atom probabilities sum to {total}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMeasure("random variable has a non-finite atom".into()));
        }
        Ok(Self { values, probs })
    }

    pub fn on_space(space: &FiniteProbSpace, values: Vec<f64>) -> Result<Self> {
        Self::new(values, space.probabilities().to_vec())
    }

    /// Equiprobable atoms.
    pub fn uniform(values: Vec<f64>) -> Result<Self> {
        let n = values.len().max(1);
        let probs = vec![1.0 / n as f64; values.len()];
        Self::new(values, probs)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same atoms, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.probs.len());
        Self { values, probs: self.probs.clone() }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn expectation(&self) -> f64 {
        self.expect(|v| v)
    }

    /// `E[f(ξ)]`.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.values.iter().zip(&self.probs).map(|(&v, p)| p * f(v)).sum()
    }

    pub fn esssup(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn essinf(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `‖ξ‖₂ = (E ξ²)^{1/2}`.
    pub fn norm2(&self) -> f64 {
        libm::sqrt(self.expect(|v| v * v))
    }

    pub fn is_constant(&self) -> bool {
        self.values.iter().all(|&v| v == self.values[0])
    }
}

/// The catalogued measures and their parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Measure {
    Expectation,
    Cvar { alpha: f64 },
    Oce { gamma1: f64, gamma2: f64 },
    WorstCase,
    /// `E ξ + λ‖(ξ − E ξ)₊‖₂`.
    MeanDev { lambda: f64 },
    RateBased,
}

impl Measure {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Measure::Expectation => "expectation",
            Measure::Cvar { .. } => "cvar",
            Measure::Oce { .. } => "oce",
            Measure::WorstCase => "worst_case",
            Measure::MeanDev { .. } => "mean_dev_penalty",
            Measure::RateBased => "rate_based",
        }
    }
}

/// A measure whose parameters have been range-checked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureSpec {
    measure: Measure,
}

impl MeasureSpec {
    pub fn new(measure: Measure) -> Result<Self> {
        let ok = match measure {
            Measure::Cvar { alpha } => (0.0..1.0).contains(&alpha),
            Measure::Oce { gamma1, gamma2 } => {
                (0.0..1.0).contains(&gamma2) && gamma1 >= 1.0 && gamma1.is_finite()
            }
            Measure::MeanDev { lambda } => (0.0..=1.0).contains(&lambda),
            Measure::Expectation | Measure::WorstCase | Measure::RateBased => true,
        };
        if ok {
            Ok(Self { measure })
        } else {
            Err(Error::InvalidMeasure(format!("parameters out of range: {measure:?}")))
        }
    }

    pub fn expectation() -> Self {
        Self { measure: Measure::Expectation }
    }

    pub fn cvar(alpha: f64) -> Result<Self> {
        Self::new(Measure::Cvar { alpha })
    }

    pub fn oce(gamma1: f64, gamma2: f64) -> Result<Self> {
        Self::new(Measure::Oce { gamma1, gamma2 })
    }

    pub fn worst_case() -> Self {
        Self { measure: Measure::WorstCase }
    }

    pub fn mean_dev(lambda: f64) -> Result<Self> {
        Self::new(Measure::MeanDev { lambda })
    }

    pub fn rate_based() -> Self {
        Self { measure: Measure::RateBased }
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }

    /// Whether the pair satisfies the coherence axioms.
    pub fn is_coherent(&self) -> bool {
        !matches!(self.measure, Measure::RateBased)
    }
}

/// A candidate dual element `η₀`, one weight per atom.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    pub values: Vec<f64>,
}

impl Density {
    pub fn expectation(&self, probs: &[f64]) -> f64 {
        self.values.iter().zip(probs).map(|(v, p)| v * p).sum()
    }

    /// Membership in `P = {η ≥ 0, E η = 1}`.
    pub fn in_p(&self, probs: &[f64], tol: f64) -> bool {
        self.values.iter().all(|&v| v >= -tol) && (self.expectation(probs) - 1.0).abs() <= tol
    }

    /// `E[ξ₀ η₀]`.
    pub fn pair(&self, xi: &RandomVariable) -> f64 {
        self.values.iter().zip(xi.values()).zip(xi.probs()).map(|((e, x), p)| p * e * x).sum()
    }
}

/// Outcome of [`envelope_sup`]. `eta` is absent when the supremum is `+∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeValue {
    pub value: Extended,
    pub eta: Option<Density>,
}

/// Closed-form regret `V(ξ₀)`.
pub fn eval_regret(m: &MeasureSpec, xi: &RandomVariable) -> Extended {
    use Extended::Finite;
    match m.measure {
        Measure::Expectation => Finite(xi.expect(pos)),
        Measure::Cvar { alpha } => Finite(xi.expect(pos) / (1.0 - alpha)),
        Measure::Oce { gamma1, gamma2 } => Finite(gamma1 * xi.expect(pos) - gamma2 * xi.expect(neg)),
        Measure::WorstCase => {
            if xi.esssup() <= 0.0 {
                Finite(0.0)
            } else {
                Extended::PosInfinity
            }
        }
        Measure::MeanDev { lambda } => {
            let tail = libm::sqrt(xi.expect(|v| pos(v) * pos(v)));
            Finite(lambda * tail + pos(xi.expectation()))
        }
        Measure::RateBased => {
            if xi.esssup() >= 1.0 {
                Extended::PosInfinity
            } else {
                Finite(xi.expect(|v| -libm::log(1.0 - v)))
            }
        }
    }
}

/// Closed-form risk `R(ξ₀)`.
pub fn eval_risk(m: &MeasureSpec, xi: &RandomVariable) -> f64 {
    match m.measure {
        Measure::Expectation => xi.expectation(),
        Measure::Cvar { alpha } => cvar_sorted(xi, alpha),
        Measure::Oce { gamma1, gamma2 } => {
            let alpha = 1.0 - (1.0 - gamma2) / (gamma1 - gamma2);
            gamma2 * xi.expectation() + (1.0 - gamma2) * cvar_sorted(xi, alpha)
        }
        Measure::WorstCase => xi.esssup(),
        Measure::MeanDev { lambda } => {
            let e = xi.expectation();
            e + lambda * libm::sqrt(xi.expect(|v| pos(v - e) * pos(v - e)))
        }
        Measure::RateBased => rate_root(xi, 0.0).1,
    }
}

/// Mean of the worst `(1 − α)` share of the distribution, splitting the atom
/// that straddles the boundary.
pub fn cvar_sorted(xi: &RandomVariable, alpha: f64) -> f64 {
    let mut order: Vec<usize> = (0..xi.len()).collect();
    order.sort_by(|&a, &b| xi.values[b].total_cmp(&xi.values[a]));
    let tail = 1.0 - alpha;
    let mut left = tail;
    let mut acc = 0.0;
    for i in order {
        if left <= 0.0 {
            break;
        }
        let take = xi.probs[i].min(left);
        acc += take * xi.values[i];
        left -= take;
    }
    // Rounding can leave a sliver of mass unassigned; it belongs to the
    // smallest atom.
    if left > 0.0 {
        acc += left * xi.essinf();
    }
    acc / tail
}

/// `R(ξ₀) = min_y { y + V(ξ₀ − y) }` for a catalogued regret. Returns the
/// minimum and a minimizing `y`.
pub fn risk_from_regret(m: &MeasureSpec, xi: &RandomVariable, tol: f64) -> Result<(f64, f64)> {
    risk_from_regret_fn(|x| eval_regret(m, x), xi, tol)
}

/// [`risk_from_regret`] for an arbitrary regret functional.
///
/// Golden-section search on the convex map `φ(y) = y + V(ξ₀ − y)`, started on
/// `[min ξ₀ − 1, max ξ₀ + 1]`. The bracket is pushed outward while `φ` keeps
/// decreasing past an end; if that never stops, `φ` is unbounded below and
/// the regret does not induce a risk measure.
pub fn risk_from_regret_fn<V>(regret: V, xi: &RandomVariable, tol: f64) -> Result<(f64, f64)>
where
    V: Fn(&RandomVariable) -> Extended,
{
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    let phi = |y: f64| regret(&xi.map(|v| v - y)) + y;
    let mut lo = xi.essinf() - 1.0;
    let mut hi = xi.esssup() + 1.0;
    let scale = 1.0 + lo.abs().max(hi.abs());
    // Strict decrease beyond rounding noise.
    let drops = |outer: Extended, inner: Extended| match (outer, inner) {
        (Extended::Finite(a), Extended::Finite(b)) => a < b - 1e-12 * (1.0 + b.abs()),
        (Extended::Finite(_), Extended::PosInfinity) => true,
        _ => false,
    };

    let mut expansions = 0;
    let mut step = hi - lo;
    let mut f_hi = phi(hi);
    loop {
        let f_out = phi(hi + step);
        if !drops(f_out, f_hi) {
            break;
        }
        expansions += 1;
        if expansions > 50 {
            return Err(Error::UnboundedBelow);
        }
        lo = hi;
        hi += step;
        f_hi = f_out;
        step *= 2.0;
    }
    if expansions == 0 {
        let mut step = hi - lo;
        let mut f_lo = phi(lo);
        loop {
            let f_out = phi(lo - step);
            if !drops(f_out, f_lo) {
                break;
            }
            expansions += 1;
            if expansions > 50 {
                return Err(Error::UnboundedBelow);
            }
            hi = lo;
            lo -= step;
            f_lo = f_out;
            step *= 2.0;
        }
    }

    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let width_tol = (tol * 1e-3).max(1e-14 * scale);
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = phi(c);
    let mut fd = phi(d);
    let mut best = if fc < fd { (fc, c) } else { (fd, d) };
    let mut iters = 0;
    while hi - lo > width_tol && iters < 500 {
        iters += 1;
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = phi(c);
            if fc < best.0 {
                best = (fc, c);
            }
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = phi(d);
            if fd < best.0 {
                best = (fd, d);
            }
        }
    }
    for y in [lo, hi, 0.5 * (lo + hi)] {
        let f = phi(y);
        if f < best.0 {
            best = (f, y);
        }
    }
    match best.0 {
        Extended::Finite(v) => Ok((v, best.1)),
        Extended::PosInfinity => Err(Error::InvalidMeasure("regret is infinite on the whole search bracket".into())),
    }
}

/// Support function of the envelope at `ξ₀`: the risk envelope `Q` when
/// `constrain_to_p` is set, the regret envelope `Q̃` otherwise.
pub fn envelope_sup(m: &MeasureSpec, xi: &RandomVariable, constrain_to_p: bool) -> Result<EnvelopeValue> {
    let boxed = |lo: f64, hi: f64| {
        let eta = if constrain_to_p { box_unit_mass(xi, lo, hi) } else { box_free(xi, lo, hi) };
        let value = Extended::Finite(eta.pair(xi));
        EnvelopeValue { value, eta: Some(eta) }
    };
    Ok(match m.measure {
        Measure::Expectation if constrain_to_p => {
            let eta = Density { values: vec![1.0; xi.len()] };
            EnvelopeValue { value: Extended::Finite(xi.expectation()), eta: Some(eta) }
        }
        Measure::Expectation => boxed(0.0, 1.0),
        Measure::Cvar { alpha } => boxed(0.0, 1.0 / (1.0 - alpha)),
        Measure::Oce { gamma1, gamma2 } => boxed(gamma2, gamma1),
        Measure::WorstCase if constrain_to_p => {
            let top = (0..xi.len()).max_by(|&a, &b| xi.values[a].total_cmp(&xi.values[b])).unwrap_or(0);
            let mut eta = vec![0.0; xi.len()];
            eta[top] = 1.0 / xi.probs[top];
            EnvelopeValue { value: Extended::Finite(xi.values[top]), eta: Some(Density { values: eta }) }
        }
        Measure::WorstCase => {
            if xi.esssup() <= 0.0 {
                EnvelopeValue { value: Extended::Finite(0.0), eta: Some(Density { values: vec![0.0; xi.len()] }) }
            } else {
                EnvelopeValue { value: Extended::PosInfinity, eta: None }
            }
        }
        Measure::MeanDev { lambda } => {
            let eta = if constrain_to_p {
                mean_dev_risk_density(xi, lambda)
            } else {
                mean_dev_regret_density(xi, lambda)
            };
            EnvelopeValue { value: Extended::Finite(eta.pair(xi)), eta: Some(eta) }
        }
        Measure::RateBased => {
            return Err(Error::UnsupportedMeasure("the rate-based regret has no polyhedral or ball envelope".into()))
        }
    })
}

/// Maximizer of `E[ξη]` over `lo ≤ η ≤ hi`.
fn box_free(xi: &RandomVariable, lo: f64, hi: f64) -> Density {
    Density { values: xi.values.iter().map(|&v| if v > 0.0 { hi } else { lo }).collect() }
}

/// Maximizer of `E[ξη]` over `lo ≤ η ≤ hi, E η = 1`: start from `lo` and pour
/// the remaining mass onto the largest atoms first.
fn box_unit_mass(xi: &RandomVariable, lo: f64, hi: f64) -> Density {
    let mut eta = vec![lo; xi.len()];
    let mut order: Vec<usize> = (0..xi.len()).collect();
    order.sort_by(|&a, &b| xi.values[b].total_cmp(&xi.values[a]));
    let mut left = 1.0 - lo;
    for i in order {
        if left <= 0.0 {
            break;
        }
        let take = (xi.probs[i] * (hi - lo)).min(left);
        eta[i] += take / xi.probs[i];
        left -= take;
    }
    Density { values: eta }
}

/// `η₀ = 1_{E ξ₀ ≥ 0} + λ ξ₀₊ / ‖ξ₀₊‖₂` with `0/0 = 0`.
pub fn mean_dev_regret_density(xi: &RandomVariable, lambda: f64) -> Density {
    let base = if xi.expectation() >= 0.0 { 1.0 } else { 0.0 };
    let n = libm::sqrt(xi.expect(|v| pos(v) * pos(v)));
    let values = xi.values.iter().map(|&v| base + if n > 0.0 { lambda * pos(v) / n } else { 0.0 }).collect();
    Density { values }
}

/// Attaining density of the risk envelope: with `d = (ξ₀ − E ξ₀)₊`,
/// `η₀ = c + λ d/‖d‖₂` where `c = 1 − λ E d / ‖d‖₂` restores unit mass.
fn mean_dev_risk_density(xi: &RandomVariable, lambda: f64) -> Density {
    let e = xi.expectation();
    let dev = xi.map(|v| pos(v - e));
    let n = dev.norm2();
    if n == 0.0 {
        return Density { values: vec![1.0; xi.len()] };
    }
    let c = 1.0 - lambda * dev.expectation() / n;
    Density { values: dev.values.iter().map(|&d| c + lambda * d / n).collect() }
}

/// The rate-based risk `r(ξ₀) + E log(1/(1 − ξ₀ + r(ξ₀)))`, where `r(ξ₀)` is the
/// root of `E[1/(1 − ξ₀ + C)] = 1` above `esssup ξ₀ − 1`.
pub fn rate_based_risk(xi: &RandomVariable, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    Ok(rate_root(xi, tol).1)
}

/// The root `C` and the risk value. The map `C ↦ E[1/(1 − ξ₀ + C)]` blows up
/// at `esssup − 1` and is at most one at `esssup`, so bisection on that
/// interval always brackets the root.
pub fn rate_root(xi: &RandomVariable, tol: f64) -> (f64, f64) {
    let top = xi.esssup();
    let (mut lo, mut hi) = (top - 1.0, top);
    let g = |c: f64| xi.expect(|v| 1.0 / (1.0 - v + c));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= tol {
            break;
        }
        if g(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = hi;
    (c, c + xi.expect(|v| -libm::log(1.0 - v + c)))
}

#[inline]
fn pos(v: f64) -> f64 {
    v.max(0.0)
}

#[inline]
fn neg(v: f64) -> f64 {
    (-v).max(0.0)
}

/// The axioms sampled by [`check_axioms`]. Closedness is not testable on
/// finite samples and is left out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axiom {
    /// `R(C) = C`, or `V(0) = 0` for regrets.
    Constancy,
    Convexity,
    Monotonicity,
    PositiveHomogeneity,
    /// `R(ξ) > E ξ` on non-constant `ξ`, or `V(ξ) > E ξ` on nonzero `ξ`.
    Aversity,
}

impl Axiom {
    pub const ALL: [Axiom; 5] =
        [Axiom::Constancy, Axiom::Convexity, Axiom::Monotonicity, Axiom::PositiveHomogeneity, Axiom::Aversity];

    /// Conventional label: `A1`… for risks, `B1`… for regrets.
    pub fn label(self, regret: bool) -> &'static str {
        match (self, regret) {
            (Axiom::Constancy, false) => "A1",
            (Axiom::Convexity, false) => "A2",
            (Axiom::Monotonicity, false) => "A3",
            (Axiom::PositiveHomogeneity, false) => "A5",
            (Axiom::Aversity, false) => "A6",
            (Axiom::Constancy, true) => "B1",
            (Axiom::Convexity, true) => "B2",
            (Axiom::Monotonicity, true) => "B3",
            (Axiom::PositiveHomogeneity, true) => "B5",
            (Axiom::Aversity, true) => "B6",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomOutcome {
    pub axiom: Axiom,
    pub passed: bool,
    /// Description of the first failing sample.
    pub witness: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomReport {
    pub as_regret: bool,
    pub trials: usize,
    pub outcomes: Vec<AxiomOutcome>,
}

impl AxiomReport {
    pub fn outcome(&self, axiom: Axiom) -> &AxiomOutcome {
        self.outcomes.iter().find(|o| o.axiom == axiom).expect("every axiom is reported")
    }

    pub fn passed(&self, axiom: Axiom) -> bool {
        self.outcome(axiom).passed
    }
}

/// Margin for the strict inequality in the aversity axioms.
pub const AVERSITY_MARGIN: f64 = 1e-10;

/// Samples `trials` random variables (2 to 10 atoms, random weights) and
/// checks each axiom for the risk of `m`, or its regret when `as_regret`.
pub fn check_axioms(m: &MeasureSpec, as_regret: bool, trials: usize, seed: u64) -> AxiomReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = |x: &RandomVariable| {
        if as_regret {
            eval_regret(m, x)
        } else {
            Extended::Finite(eval_risk(m, x))
        }
    };
    let mut outcomes: Vec<AxiomOutcome> =
        Axiom::ALL.iter().map(|&axiom| AxiomOutcome { axiom, passed: true, witness: None }).collect();
    let mut fail = |axiom: Axiom, witness: String| {
        let o = outcomes.iter_mut().find(|o| o.axiom == axiom).expect("listed");
        if o.passed {
            o.passed = false;
            o.witness = Some(witness);
        }
    };

    for _ in 0..trials.max(1) {
        let xi = sample_variable(&mut rng);
        let other = xi.with_values(sample_values(&mut rng, xi.len()));
        let lam: f64 = rng.random_range(0.0..=1.0);
        let c: f64 = rng.random_range(-5.0..5.0);
        let t: f64 = rng.random_range(0.1..5.0);
        let size = 1.0 + xi.values.iter().chain(&other.values).fold(0.0f64, |a, v| a.max(v.abs()));
        let tol = 1e-10 * size;

        let constant_point = if as_regret { 0.0 } else { c };
        match f(&xi.with_values(vec![constant_point; xi.len()])) {
            Extended::Finite(v) if (v - constant_point).abs() <= tol => {}
            got => fail(Axiom::Constancy, format!("constant {constant_point} on {} atoms gave {got:?}", xi.len())),
        }

        let mix = xi.with_values(xi.values.iter().zip(&other.values).map(|(a, b)| (1.0 - lam) * a + lam * b).collect());
        let rhs = f(&xi).scale(1.0 - lam) + f(&other).scale(lam);
        if !f(&mix).le_within(rhs, tol) {
            fail(Axiom::Convexity, format!("xi={:?} xi'={:?} probs={:?} lambda={lam}", xi.values, other.values, xi.probs));
        }

        let bumped = xi.with_values(xi.values.iter().map(|v| v + rng.random_range(0.0..1.0)).collect());
        if !f(&xi).le_within(f(&bumped), tol) {
            fail(Axiom::Monotonicity, format!("xi={:?} dominated by {:?} probs={:?}", xi.values, bumped.values, xi.probs));
        }

        let (a, b) = (f(&xi.map(|v| t * v)), f(&xi).scale(t));
        let homogeneous = match (a, b) {
            (Extended::Finite(x), Extended::Finite(y)) => (x - y).abs() <= tol * t.max(1.0),
            (Extended::PosInfinity, Extended::PosInfinity) => true,
            _ => false,
        };
        if !homogeneous {
            fail(Axiom::PositiveHomogeneity, format!("xi={:?} probs={:?} t={t}: {a:?} vs {b:?}", xi.values, xi.probs));
        }

        let eligible = if as_regret { xi.values.iter().any(|&v| v != 0.0) } else { !xi.is_constant() };
        if eligible && !(f(&xi) > Extended::Finite(xi.expectation() + AVERSITY_MARGIN)) {
            fail(
                Axiom::Aversity,
                format!("xi={:?} probs={:?}: value {:?} vs mean {}", xi.values, xi.probs, f(&xi), xi.expectation()),
            );
        }
    }
    AxiomReport { as_regret, trials: trials.max(1), outcomes }
}

fn sample_values<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-5.0..5.0)).collect()
}

fn sample_variable<R: Rng>(rng: &mut R) -> RandomVariable {
    let n = rng.random_range(2..=10);
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    RandomVariable::new(sample_values(rng, n), w.iter().map(|x| x / total).collect()).expect("valid sample")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rv(values: &[f64], probs: &[f64]) -> RandomVariable {
        RandomVariable::new(values.to_vec(), probs.to_vec()).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn parameter_ranges_are_enforced() {
        assert!(MeasureSpec::cvar(1.0).is_err());
        assert!(MeasureSpec::cvar(-0.1).is_err());
        assert!(MeasureSpec::oce(0.9, 0.0).is_err());
        assert!(MeasureSpec::oce(2.0, 1.0).is_err());
        assert!(MeasureSpec::mean_dev(1.5).is_err());
        assert!(MeasureSpec::oce(1.0, 0.0).is_ok());
    }

    #[test]
    fn regret_examples() {
        let half = [0.5, 0.5];
        // With ξ₋ = max(−ξ, 0): 2·1 − 0.5·1.
        let oce = MeasureSpec::oce(2.0, 0.5).unwrap();
        assert_eq!(eval_regret(&oce, &rv(&[-2.0, 2.0], &half)), Extended::Finite(1.5));
        let cvar = MeasureSpec::cvar(0.5).unwrap();
        assert_eq!(eval_regret(&cvar, &rv(&[-1.0, 1.0], &half)), Extended::Finite(1.0));
        let zero = rv(&[0.0, 0.0], &half);
        for m in [oce, cvar, MeasureSpec::expectation(), MeasureSpec::worst_case(), MeasureSpec::mean_dev(0.5).unwrap()] {
            assert_eq!(eval_regret(&m, &zero), Extended::Finite(0.0));
        }
        assert_eq!(eval_regret(&MeasureSpec::worst_case(), &rv(&[-1.0, 0.1], &half)), Extended::PosInfinity);
        assert_eq!(eval_regret(&MeasureSpec::rate_based(), &rv(&[0.0, 1.0], &half)), Extended::PosInfinity);
    }

    #[test]
    fn risk_examples() {
        let md = MeasureSpec::mean_dev(0.5).unwrap();
        let v = eval_risk(&md, &rv(&[0.0, 2.0], &[0.5, 0.5]));
        assert!(close(v, 1.0 + 0.5 * libm::sqrt(0.5), 1e-15));
        assert_eq!(eval_risk(&MeasureSpec::worst_case(), &RandomVariable::uniform(vec![1.0, 5.0, 3.0]).unwrap()), 5.0);
        let c = RandomVariable::uniform(vec![2.5; 4]).unwrap();
        for m in [MeasureSpec::cvar(0.3).unwrap(), MeasureSpec::oce(3.0, 0.2).unwrap(), md, MeasureSpec::rate_based()] {
            assert!(close(eval_risk(&m, &c), 2.5, 1e-12), "{m:?}");
        }
    }

    #[test]
    fn cvar_sorted_examples() {
        let x = rv(&[0.0, 10.0], &[0.5, 0.5]);
        assert_eq!(cvar_sorted(&x, 0.5), 10.0);
        assert_eq!(cvar_sorted(&x, 0.0), 5.0);
        // Boundary atom split: top 0.4 of mass = 0.25·10 + 0.15·4.
        let y = rv(&[4.0, 10.0, -1.0], &[0.5, 0.25, 0.25]);
        assert!(close(cvar_sorted(&y, 0.6), (2.5 + 0.6) / 0.4, 1e-12));
        assert_eq!(cvar_sorted(&RandomVariable::uniform(vec![3.0; 3]).unwrap(), 0.9), 3.0);
    }

    #[test]
    fn trade_off_formula_examples() {
        let x = rv(&[0.0, 10.0], &[0.5, 0.5]);
        let (v, y) = risk_from_regret(&MeasureSpec::cvar(0.5).unwrap(), &x, 1e-10).unwrap();
        assert!(close(v, 10.0, 1e-9));
        assert!((-1e-6..=10.0 + 1e-6).contains(&y));

        let z = rv(&[-1.0, 0.5, 4.0], &[0.2, 0.5, 0.3]);
        let (_, y) = risk_from_regret(&MeasureSpec::mean_dev(0.5).unwrap(), &z, 1e-10).unwrap();
        assert!(close(y, z.expectation(), 1e-6));

        let twice_mean = |x: &RandomVariable| Extended::Finite(2.0 * x.expectation());
        assert_eq!(risk_from_regret_fn(twice_mean, &z, 1e-8), Err(Error::UnboundedBelow));

        let (w, _) = risk_from_regret(&MeasureSpec::worst_case(), &z, 1e-10).unwrap();
        assert!(close(w, 4.0, 1e-8));
    }

    #[test]
    fn envelope_examples() {
        let x = rv(&[0.0, 10.0], &[0.5, 0.5]);
        let e = envelope_sup(&MeasureSpec::cvar(0.5).unwrap(), &x, true).unwrap();
        assert_eq!(e.value, Extended::Finite(10.0));
        assert_eq!(e.eta.unwrap().values, vec![0.0, 2.0]);

        let y = rv(&[-2.0, 0.0, 3.0], &[0.3, 0.3, 0.4]);
        let oce = MeasureSpec::oce(2.0, 0.5).unwrap();
        let e = envelope_sup(&oce, &y, false).unwrap();
        assert_eq!(e.eta.as_ref().unwrap().values, vec![0.5, 0.5, 2.0]);
        assert!(close(e.value.finite().unwrap(), eval_regret(&oce, &y).finite().unwrap(), 1e-14));

        let e = envelope_sup(&MeasureSpec::expectation(), &y, true).unwrap();
        assert_eq!(e.eta.unwrap().values, vec![1.0; 3]);
        assert!(envelope_sup(&MeasureSpec::rate_based(), &y, true).is_err());
    }

    #[test]
    fn mean_dev_attaining_density_leaves_the_envelope_on_positive_variables() {
        // Every atom positive: the density's essential infimum exceeds one.
        let x = RandomVariable::uniform(vec![1.0, 3.0]).unwrap();
        let eta = mean_dev_regret_density(&x, 0.5);
        let einf = eta.values.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(einf > 1.0);
        // It still attains the regret value.
        let v = eval_regret(&MeasureSpec::mean_dev(0.5).unwrap(), &x).finite().unwrap();
        assert!(close(eta.pair(&x), v, 1e-12));
    }

    #[test]
    fn rate_based_examples() {
        let c = RandomVariable::uniform(vec![0.3; 3]).unwrap();
        assert!(close(rate_based_risk(&c, 1e-14).unwrap(), 0.3, 1e-12));
        let x = rv(&[0.0, 0.5], &[0.5, 0.5]);
        let direct = rate_based_risk(&x, 1e-14).unwrap();
        let (via, _) = risk_from_regret(&MeasureSpec::rate_based(), &x, 1e-12).unwrap();
        assert!(close(direct, via, 1e-9), "{direct} vs {via}");
        let g = |c: f64| x.expect(|v| 1.0 / (1.0 - v + c));
        assert!(g(0.0) > g(0.5) && g(0.5) > g(2.0));
    }

    #[test]
    fn axiom_examples() {
        let e = check_axioms(&MeasureSpec::expectation(), false, 100, 1);
        assert!(!e.passed(Axiom::Aversity));
        assert!(e.outcome(Axiom::Aversity).witness.is_some());
        let cvar = check_axioms(&MeasureSpec::cvar(0.5).unwrap(), false, 500, 2);
        assert!(cvar.outcomes.iter().all(|o| o.passed), "{cvar:?}");
        let md0 = check_axioms(&MeasureSpec::mean_dev(0.0).unwrap(), false, 100, 3);
        assert!(!md0.passed(Axiom::Aversity));
    }
}
