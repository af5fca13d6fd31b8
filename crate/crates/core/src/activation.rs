//! Scalar activation functions that are proximity operators.
//!
//! Every member of this module is increasing, 1-Lipschitz and vanishes at 0,
//! which is the same as being `prox_φ` for a convex potential `φ` minimal at
//! 0. Catalog entries carry a closed-form potential; combinator nodes built
//! with [`ScalarActivation::scale`], [`ScalarActivation::convex_combination`]
//! and friends stay in the class but carry no potential.
//!
//! Activations are addressable by string key, e.g. `"prelu:0.25"` or
//! `"complement(satlin)"`; see [`ScalarActivation::from_str`].

use std::f64::consts::{FRAC_2_PI, LN_2, PI};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Tolerance on the sum of convex-combination weights.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Kind tag of a [`ScalarActivation`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActivationKind {
    Identity,
    Satlin,
    Relu,
    Prelu,
    BentIdentity,
    Isru,
    Isrlu,
    Arctan2Pi,
    Tanh,
    SigmoidShifted,
    Elliot,
    Arcsinh,
    Logarithmic,
    SoftThreshold,
    Combinator,
}

/// Interval of the real line with optionally infinite, open or closed ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub const REAL_LINE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
        lo_closed: false,
        hi_closed: false,
    };

    pub const fn closed(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, lo_closed: true, hi_closed: true }
    }

    pub const fn open(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, lo_closed: false, hi_closed: false }
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn contains(&self, y: f64) -> bool {
        let above = if self.lo_closed { y >= self.lo } else { y > self.lo };
        let below = if self.hi_closed { y <= self.hi } else { y < self.hi };
        above && below
    }

    /// Membership in the closure.
    pub fn closure_contains(&self, y: f64) -> bool {
        y >= self.lo && y <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Identity,
    Satlin,
    Relu,
    Prelu(f64),
    BentIdentity,
    Isru,
    Isrlu,
    Arctan2Pi,
    Tanh,
    SigmoidShifted,
    Elliot,
    Arcsinh,
    Logarithmic,
    SoftThreshold,
    Scaled { outer: f64, inner: f64, base: Arc<ScalarActivation> },
    Convex(Arc<[(f64, ScalarActivation)]>),
    Compose(Arc<ScalarActivation>, Arc<ScalarActivation>),
    Complement(Arc<ScalarActivation>),
    HalfDifference(Arc<ScalarActivation>, Arc<ScalarActivation>),
    Reflected(Arc<ScalarActivation>, Arc<ScalarActivation>),
}

/// A scalar activation function in the proximal class.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarActivation(Node);

impl ScalarActivation {
    pub const IDENTITY: Self = ScalarActivation(Node::Identity);
    pub const SATLIN: Self = ScalarActivation(Node::Satlin);
    pub const RELU: Self = ScalarActivation(Node::Relu);
    pub const BENT_IDENTITY: Self = ScalarActivation(Node::BentIdentity);
    pub const ISRU: Self = ScalarActivation(Node::Isru);
    pub const ISRLU: Self = ScalarActivation(Node::Isrlu);
    pub const ARCTAN_2PI: Self = ScalarActivation(Node::Arctan2Pi);
    pub const TANH: Self = ScalarActivation(Node::Tanh);
    pub const SIGMOID_SHIFTED: Self = ScalarActivation(Node::SigmoidShifted);
    pub const ELLIOT: Self = ScalarActivation(Node::Elliot);
    pub const ARCSINH: Self = ScalarActivation(Node::Arcsinh);
    pub const LOGARITHMIC: Self = ScalarActivation(Node::Logarithmic);
    pub const SOFT_THRESHOLD: Self = ScalarActivation(Node::SoftThreshold);

    /// Parametric ReLU with negative-side slope in `(0, 1]`; slope 1 is the
    /// identity.
    pub fn prelu(slope: f64) -> Result<Self> {
        if !(slope > 0.0 && slope <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "prelu slope must lie in (0, 1), got {slope}"
            )));
        }
        if slope == 1.0 {
            return Ok(Self::IDENTITY);
        }
        Ok(ScalarActivation(Node::Prelu(slope)))
    }

    /// The fourteen catalog members with closed-form potentials (prelu with
    /// slope 1/4).
    pub fn catalog() -> Vec<ScalarActivation> {
        vec![
            Self::IDENTITY,
            Self::SATLIN,
            Self::RELU,
            ScalarActivation(Node::Prelu(0.25)),
            Self::BENT_IDENTITY,
            Self::ISRU,
            Self::ISRLU,
            Self::ARCTAN_2PI,
            Self::TANH,
            Self::SIGMOID_SHIFTED,
            Self::ELLIOT,
            Self::ARCSINH,
            Self::LOGARITHMIC,
            Self::SOFT_THRESHOLD,
        ]
    }

    /// `x ↦ outer · self(inner · x)`, requires `outer · inner ≤ 1`.
    pub fn scale(&self, outer: f64, inner: f64) -> Result<Self> {
        if !(outer > 0.0 && inner > 0.0 && outer.is_finite() && inner.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "scale factors must be positive, got ({outer}, {inner})"
            )));
        }
        if outer * inner > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "scale product {} exceeds 1",
                outer * inner
            )));
        }
        Ok(ScalarActivation(Node::Scaled {
            outer,
            inner,
            base: Arc::new(self.clone()),
        }))
    }

    /// Pointwise convex combination. Weights must lie in `(0, 1]` and sum to 1.
    pub fn convex_combination(terms: Vec<(f64, ScalarActivation)>) -> Result<Self> {
        check_weights(terms.iter().map(|(w, _)| *w))?;
        if terms.len() == 1 {
            return Ok(terms.into_iter().next().unwrap().1);
        }
        Ok(ScalarActivation(Node::Convex(terms.into())))
    }

    /// `x ↦ outer(inner(x))`.
    pub fn compose(outer: &Self, inner: &Self) -> Self {
        ScalarActivation(Node::Compose(Arc::new(outer.clone()), Arc::new(inner.clone())))
    }

    /// `x ↦ x − self(x)`.
    pub fn complement(&self) -> Self {
        ScalarActivation(Node::Complement(Arc::new(self.clone())))
    }

    /// `x ↦ (a(x) − b(x) + x)/2`.
    pub fn half_difference(a: &Self, b: &Self) -> Self {
        ScalarActivation(Node::HalfDifference(Arc::new(a.clone()), Arc::new(b.clone())))
    }

    /// `x ↦ a(2b(x) − x) + x − b(x)`.
    pub fn reflected_compose(a: &Self, b: &Self) -> Self {
        ScalarActivation(Node::Reflected(Arc::new(a.clone()), Arc::new(b.clone())))
    }

    pub fn kind(&self) -> ActivationKind {
        match &self.0 {
            Node::Identity => ActivationKind::Identity,
            Node::Satlin => ActivationKind::Satlin,
            Node::Relu => ActivationKind::Relu,
            Node::Prelu(_) => ActivationKind::Prelu,
            Node::BentIdentity => ActivationKind::BentIdentity,
            Node::Isru => ActivationKind::Isru,
            Node::Isrlu => ActivationKind::Isrlu,
            Node::Arctan2Pi => ActivationKind::Arctan2Pi,
            Node::Tanh => ActivationKind::Tanh,
            Node::SigmoidShifted => ActivationKind::SigmoidShifted,
            Node::Elliot => ActivationKind::Elliot,
            Node::Arcsinh => ActivationKind::Arcsinh,
            Node::Logarithmic => ActivationKind::Logarithmic,
            Node::SoftThreshold => ActivationKind::SoftThreshold,
            _ => ActivationKind::Combinator,
        }
    }

    /// Parameters of the node: the prelu slope, the scale pair, or the
    /// convex weights. Empty otherwise.
    pub fn params(&self) -> Vec<f64> {
        match &self.0 {
            Node::Prelu(a) => vec![*a],
            Node::Scaled { outer, inner, .. } => vec![*outer, *inner],
            Node::Convex(terms) => terms.iter().map(|(w, _)| *w).collect(),
            _ => Vec::new(),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.0 {
            Node::Identity => x,
            Node::Satlin => x.clamp(-1.0, 1.0),
            Node::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Node::Prelu(a) => {
                if x > 0.0 {
                    x
                } else {
                    a * x
                }
            }
            Node::BentIdentity => {
                // x + sqrt(x²+1) written without cancellation for x < 0
                let h = x.hypot(1.0);
                let s = if x >= 0.0 { x + h } else { 1.0 / (h - x) };
                (s - 1.0) / 2.0
            }
            Node::Isru => x / x.hypot(1.0),
            Node::Isrlu => {
                if x >= 0.0 {
                    x
                } else {
                    x / x.hypot(1.0)
                }
            }
            Node::Arctan2Pi => FRAC_2_PI * x.atan(),
            Node::Tanh => x.tanh(),
            // 1/(1+e^{-x}) - 1/2 = tanh(x/2)/2
            Node::SigmoidShifted => 0.5 * (0.5 * x).tanh(),
            Node::Elliot => x / (1.0 + x.abs()),
            Node::Arcsinh => x.asinh(),
            Node::Logarithmic => x.abs().ln_1p().copysign(x),
            Node::SoftThreshold => {
                if x > 1.0 {
                    x - 1.0
                } else if x < -1.0 {
                    x + 1.0
                } else {
                    0.0
                }
            }
            Node::Scaled { outer, inner, base } => outer * base.eval(inner * x),
            Node::Convex(terms) => terms.iter().map(|(w, a)| w * a.eval(x)).sum(),
            Node::Compose(outer, inner) => outer.eval(inner.eval(x)),
            Node::Complement(a) => x - a.eval(x),
            Node::HalfDifference(a, b) => (a.eval(x) - b.eval(x) + x) / 2.0,
            Node::Reflected(a, b) => {
                let bx = b.eval(x);
                a.eval(2.0 * bx - x) + x - bx
            }
        }
    }

    /// Closed-form potential `φ` with `self = prox_φ`, normalized so that
    /// `φ(0) = 0`. Returns `+∞` outside the potential domain and `None` for
    /// combinator nodes.
    pub fn potential(&self, y: f64) -> Option<f64> {
        let dom = self.potential_domain()?;
        if !dom.contains(y) {
            return Some(f64::INFINITY);
        }
        let a = y.abs();
        let v = match &self.0 {
            Node::Identity | Node::Satlin | Node::Relu => 0.0,
            Node::Prelu(s) => {
                if y > 0.0 {
                    0.0
                } else {
                    (1.0 / s - 1.0) * y * y / 2.0
                }
            }
            Node::BentIdentity => y / 2.0 - (y + 0.5).ln() / 4.0 - LN_2 / 4.0,
            Node::Isru => 1.0 - y * y / 2.0 - (1.0 - y * y).sqrt(),
            Node::Isrlu => {
                if y >= 0.0 {
                    0.0
                } else {
                    1.0 - y * y / 2.0 - (1.0 - y * y).sqrt()
                }
            }
            Node::Arctan2Pi => -FRAC_2_PI * (PI * y / 2.0).cos().ln() - y * y / 2.0,
            Node::Tanh => {
                if a == 1.0 {
                    LN_2 - 0.5
                } else {
                    (xlogx(1.0 + y) + xlogx(1.0 - y) - y * y) / 2.0
                }
            }
            Node::SigmoidShifted => {
                let shift = LN_2 + 0.125;
                if a == 0.5 {
                    -0.25 + shift
                } else {
                    xlogx(y + 0.5) + xlogx(0.5 - y) - (y * y + 0.25) / 2.0 + shift
                }
            }
            Node::Elliot => -a - (-a).ln_1p() - y * y / 2.0,
            Node::Arcsinh => y.cosh() - 1.0 - y * y / 2.0,
            Node::Logarithmic => a.exp_m1() - a - y * y / 2.0,
            Node::SoftThreshold => a,
            _ => return None,
        };
        Some(v)
    }

    /// Domain of the potential; `None` for combinator nodes.
    pub fn potential_domain(&self) -> Option<Interval> {
        let d = match &self.0 {
            Node::Identity | Node::Prelu(_) | Node::Arcsinh | Node::Logarithmic | Node::SoftThreshold => {
                Interval::REAL_LINE
            }
            Node::Satlin | Node::Isru | Node::Tanh => Interval::closed(-1.0, 1.0),
            Node::Relu => Interval {
                lo: 0.0,
                hi: f64::INFINITY,
                lo_closed: true,
                hi_closed: false,
            },
            Node::BentIdentity => Interval::open(-0.5, f64::INFINITY),
            Node::Isrlu => Interval {
                lo: -1.0,
                hi: f64::INFINITY,
                lo_closed: true,
                hi_closed: false,
            },
            Node::Arctan2Pi | Node::Elliot => Interval::open(-1.0, 1.0),
            Node::SigmoidShifted => Interval::closed(-0.5, 0.5),
            _ => return None,
        };
        Some(d)
    }

    /// Whether the potential domain, equivalently the range, is bounded.
    /// Conservative (false when unknown) for combinator nodes.
    pub fn potential_domain_bounded(&self) -> bool {
        match &self.0 {
            Node::Scaled { base, .. } => base.potential_domain_bounded(),
            Node::Convex(terms) => terms.iter().all(|(_, a)| a.potential_domain_bounded()),
            // range of outer∘inner lies in the range of outer, and is the
            // Lipschitz image of the range of inner
            Node::Compose(outer, inner) => {
                outer.potential_domain_bounded() || inner.potential_domain_bounded()
            }
            Node::Complement(_) | Node::HalfDifference(..) | Node::Reflected(..) => false,
            _ => self.potential_domain().is_some_and(|d| d.is_bounded()),
        }
    }

    /// Supremum of `|ρ(x)|`, when the range is known to be bounded.
    pub fn range_radius(&self) -> Option<f64> {
        match &self.0 {
            Node::Scaled { outer, base, .. } => base.range_radius().map(|r| outer * r),
            Node::Convex(terms) => terms
                .iter()
                .map(|(w, a)| a.range_radius().map(|r| w * r))
                .sum(),
            Node::Compose(outer, inner) => match (outer.range_radius(), inner.range_radius()) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (Some(a), None) => Some(a),
                (None, Some(b)) => Some(b),
                (None, None) => None,
            },
            Node::Complement(_) | Node::HalfDifference(..) | Node::Reflected(..) => None,
            _ => self
                .potential_domain()
                .filter(Interval::is_bounded)
                .map(|d| d.lo.abs().max(d.hi.abs())),
        }
    }

    /// Whether the conjugate potential is finite on the whole line.
    pub fn conjugate_full_domain(&self) -> bool {
        match &self.0 {
            Node::Arcsinh | Node::Logarithmic => true,
            _ => self.potential_domain_bounded(),
        }
    }

    /// Brute-force `argmin_y φ(y) + (x − y)²/2` by golden-section search.
    pub fn prox_oracle(&self, x: f64, tol: f64) -> Result<f64> {
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
        }
        let dom = self
            .potential_domain()
            .ok_or_else(|| Error::PotentialUnavailable(self.to_string()))?;
        let reach = x.abs() + 10.0;
        let mut lo = (x - reach).max(dom.lo);
        let mut hi = (x + reach).min(dom.hi);
        if !(lo <= hi) {
            return Err(Error::Bracketing(format!("empty search window for x = {x}")));
        }
        let objective = |y: f64| -> f64 {
            let phi = self.potential(y).unwrap_or(f64::INFINITY);
            phi + 0.5 * (x - y) * (x - y)
        };
        const INV_PHI: f64 = 0.618_033_988_749_894_9;
        let mut c = hi - INV_PHI * (hi - lo);
        let mut d = lo + INV_PHI * (hi - lo);
        let mut fc = objective(c);
        let mut fd = objective(d);
        if hi - lo > tol && !(fc.is_finite() || fd.is_finite()) {
            return Err(Error::Bracketing(format!(
                "objective is not finite inside [{lo}, {hi}]"
            )));
        }
        while hi - lo > tol {
            if fc <= fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - INV_PHI * (hi - lo);
                fc = objective(c);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + INV_PHI * (hi - lo);
                fd = objective(d);
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

fn xlogx(t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t * t.ln()
    }
}

pub(crate) fn check_weights(weights: impl Iterator<Item = f64>) -> Result<()> {
    let mut sum = 0.0;
    let mut count = 0;
    for w in weights {
        if !(w > 0.0 && w <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "convex weight {w} outside (0, 1]"
            )));
        }
        sum += w;
        count += 1;
    }
    if count == 0 {
        return Err(Error::InvalidParameter("empty convex combination".into()));
    }
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::InvalidParameter(format!("convex weights sum to {sum}, not 1")));
    }
    Ok(())
}

impl fmt::Display for ScalarActivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Node::Identity => f.write_str("identity"),
            Node::Satlin => f.write_str("satlin"),
            Node::Relu => f.write_str("relu"),
            Node::Prelu(a) => write!(f, "prelu:{a}"),
            Node::BentIdentity => f.write_str("bent_identity"),
            Node::Isru => f.write_str("isru"),
            Node::Isrlu => f.write_str("isrlu"),
            Node::Arctan2Pi => f.write_str("arctan2pi"),
            Node::Tanh => f.write_str("tanh"),
            Node::SigmoidShifted => f.write_str("sigmoid_shifted"),
            Node::Elliot => f.write_str("elliot"),
            Node::Arcsinh => f.write_str("arcsinh"),
            Node::Logarithmic => f.write_str("logarithmic"),
            Node::SoftThreshold => f.write_str("soft_threshold"),
            Node::Scaled { outer, inner, base } => write!(f, "scale({outer},{inner},{base})"),
            Node::Convex(terms) => {
                f.write_str("convex(")?;
                for (i, (w, a)) in terms.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{w}*{a}")?;
                }
                f.write_str(")")
            }
            Node::Compose(a, b) => write!(f, "compose({a},{b})"),
            Node::Complement(a) => write!(f, "complement({a})"),
            Node::HalfDifference(a, b) => write!(f, "half_difference({a},{b})"),
            Node::Reflected(a, b) => write!(f, "reflected({a},{b})"),
        }
    }
}

impl FromStr for ScalarActivation {
    type Err = Error;

    /// Grammar:
    ///
    /// ```text
    /// act   := name | "prelu:" num
    ///        | "scale(" num "," num "," act ")"
    ///        | "convex(" num "*" act ("," num "*" act)* ")"
    ///        | ("compose" | "half_difference" | "reflected") "(" act "," act ")"
    ///        | "complement(" act ")"
    /// ```
    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let mut p = Parser { src: &compact, pos: 0 };
        let act = p.activation()?;
        if p.pos != compact.len() {
            return Err(Error::UnknownActivation(s.to_string()));
        }
        Ok(act)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn rest(&self) -> &str {
        &self.src[self.pos..]
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.rest().starts_with(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            Err(Error::UnknownActivation(format!(
                "expected `{c}` at offset {} in `{}`",
                self.pos, self.src
            )))
        }
    }

    fn ident(&mut self) -> &str {
        let start = self.pos;
        let len = self
            .rest()
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(self.rest().len());
        self.pos += len;
        &self.src[start..self.pos]
    }

    fn number(&mut self) -> Result<f64> {
        let len = self
            .rest()
            .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
            .unwrap_or(self.rest().len());
        let tok = &self.rest()[..len];
        let v: f64 = tok
            .parse()
            .map_err(|_| Error::UnknownActivation(format!("invalid number `{tok}`")))?;
        self.pos += len;
        Ok(v)
    }

    fn activation(&mut self) -> Result<ScalarActivation> {
        let name = self.ident().to_ascii_lowercase();
        let atom = match name.as_str() {
            "identity" => Some(ScalarActivation::IDENTITY),
            "satlin" => Some(ScalarActivation::SATLIN),
            "relu" => Some(ScalarActivation::RELU),
            "bent_identity" => Some(ScalarActivation::BENT_IDENTITY),
            "isru" => Some(ScalarActivation::ISRU),
            "isrlu" => Some(ScalarActivation::ISRLU),
            "arctan2pi" => Some(ScalarActivation::ARCTAN_2PI),
            "tanh" => Some(ScalarActivation::TANH),
            "sigmoid_shifted" => Some(ScalarActivation::SIGMOID_SHIFTED),
            "elliot" => Some(ScalarActivation::ELLIOT),
            "arcsinh" => Some(ScalarActivation::ARCSINH),
            "logarithmic" => Some(ScalarActivation::LOGARITHMIC),
            "soft_threshold" => Some(ScalarActivation::SOFT_THRESHOLD),
            _ => None,
        };
        if let Some(a) = atom {
            return Ok(a);
        }
        match name.as_str() {
            "prelu" => {
                self.expect(':')?;
                ScalarActivation::prelu(self.number()?)
            }
            "scale" => {
                self.expect('(')?;
                let outer = self.number()?;
                self.expect(',')?;
                let inner = self.number()?;
                self.expect(',')?;
                let base = self.activation()?;
                self.expect(')')?;
                base.scale(outer, inner)
            }
            "convex" => {
                self.expect('(')?;
                let mut terms = Vec::new();
                loop {
                    let w = self.number()?;
                    self.expect('*')?;
                    terms.push((w, self.activation()?));
                    if self.rest().starts_with(',') {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                self.expect(')')?;
                ScalarActivation::convex_combination(terms)
            }
            "complement" => {
                self.expect('(')?;
                let a = self.activation()?;
                self.expect(')')?;
                Ok(a.complement())
            }
            "compose" | "half_difference" | "reflected" => {
                self.expect('(')?;
                let a = self.activation()?;
                self.expect(',')?;
                let b = self.activation()?;
                self.expect(')')?;
                Ok(match name.as_str() {
                    "compose" => ScalarActivation::compose(&a, &b),
                    "half_difference" => ScalarActivation::half_difference(&a, &b),
                    _ => ScalarActivation::reflected_compose(&a, &b),
                })
            }
            _ => Err(Error::UnknownActivation(self.src.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn act(s: &str) -> ScalarActivation {
        s.parse().unwrap()
    }

    #[test]
    fn closed_form_values() {
        assert_eq!(ScalarActivation::RELU.eval(-1.0), 0.0);
        assert_eq!(ScalarActivation::TANH.eval(0.0), 0.0);
        assert_abs_diff_eq!(ScalarActivation::ARCTAN_2PI.eval(1.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(ScalarActivation::ISRU.eval(1.0), 0.5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(
            ScalarActivation::SIGMOID_SHIFTED.eval(2.0),
            1.0 / (1.0 + (-2.0f64).exp()) - 0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            ScalarActivation::BENT_IDENTITY.eval(-1e8),
            (-1e8 + (1e16f64 + 1.0).sqrt() - 1.0) / 2.0,
            epsilon = 1e-7
        );
        assert_abs_diff_eq!(ScalarActivation::LOGARITHMIC.eval(-(1f64.exp() - 1.0)), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn potential_values() {
        assert_eq!(ScalarActivation::SATLIN.potential(2.0), Some(f64::INFINITY));
        assert_eq!(ScalarActivation::RELU.potential(0.5), Some(0.0));
        assert_abs_diff_eq!(
            ScalarActivation::LOGARITHMIC.potential(1.0).unwrap(),
            1f64.exp() - 2.0 - 0.5,
            epsilon = 1e-15
        );
        // endpoint values stay finite
        assert_abs_diff_eq!(ScalarActivation::TANH.potential(1.0).unwrap(), LN_2 - 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(
            ScalarActivation::SIGMOID_SHIFTED.potential(-0.5).unwrap(),
            -0.25 + LN_2 + 0.125,
            epsilon = 1e-15
        );
        assert_eq!(ScalarActivation::ARCTAN_2PI.potential(1.0), Some(f64::INFINITY));
        assert_eq!(ScalarActivation::RELU.complement().potential(0.0), None);
    }

    #[test]
    fn potentials_vanish_at_zero_and_are_nonnegative() {
        for a in ScalarActivation::catalog() {
            assert_abs_diff_eq!(a.potential(0.0).unwrap(), 0.0, epsilon = 1e-15);
            for k in -40..=40 {
                let y = k as f64 * 0.05;
                let v = a.potential(y).unwrap();
                assert!(v >= -1e-15, "{a} at {y}: {v}");
            }
        }
    }

    #[test]
    fn prox_oracle_examples() {
        let isru = ScalarActivation::ISRU.prox_oracle(3.0, 1e-8).unwrap();
        assert_abs_diff_eq!(isru, 3.0 / 10f64.sqrt(), epsilon = 1e-7);
        assert_abs_diff_eq!(ScalarActivation::IDENTITY.prox_oracle(7.0, 1e-8).unwrap(), 7.0, epsilon = 1e-7);
        assert_abs_diff_eq!(ScalarActivation::SATLIN.prox_oracle(5.0, 1e-8).unwrap(), 1.0, epsilon = 1e-7);
        assert!(ScalarActivation::RELU.complement().prox_oracle(1.0, 1e-8).is_err());
        assert!(ScalarActivation::RELU.prox_oracle(1.0, 0.0).is_err());
    }

    #[test]
    fn soft_threshold_is_prox_of_absolute_value() {
        // prox of |.| computed independently: shrink toward 0 by 1
        for k in -30..=30 {
            let x = k as f64 * 0.1;
            let expected = x.signum() * (x.abs() - 1.0).max(0.0);
            assert_abs_diff_eq!(ScalarActivation::SOFT_THRESHOLD.eval(x), expected, epsilon = 1e-15);
            assert_abs_diff_eq!(ScalarActivation::SATLIN.complement().eval(x), expected, epsilon = 1e-15);
        }
    }

    #[test]
    fn scale_examples() {
        let s = ScalarActivation::TANH.scale(0.5, 2.0).unwrap();
        assert_abs_diff_eq!(s.eval(1.0), 0.5 * 2f64.tanh(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.eval(1.0), 0.48201379003790845, epsilon = 1e-14);
        let id = ScalarActivation::IDENTITY.scale(1.0, 1.0).unwrap();
        assert_eq!(id.eval(3.25), 3.25);
        assert!(ScalarActivation::RELU.scale(2.0, 1.0).is_err());
        // the shifted sigmoid is tanh scaled by (1/2, 1/2)
        let half = ScalarActivation::TANH.scale(0.5, 0.5).unwrap();
        for k in -20..=20 {
            let x = k as f64 * 0.37;
            assert_abs_diff_eq!(half.eval(x), ScalarActivation::SIGMOID_SHIFTED.eval(x), epsilon = 1e-15);
        }
    }

    #[test]
    fn convex_combination_examples() {
        let c = ScalarActivation::convex_combination(vec![
            (0.5, ScalarActivation::RELU),
            (0.5, ScalarActivation::IDENTITY),
        ])
        .unwrap();
        assert_eq!(c.eval(-2.0), -1.0);
        let single = ScalarActivation::convex_combination(vec![(1.0, ScalarActivation::TANH)]).unwrap();
        assert_eq!(single, ScalarActivation::TANH);
        assert!(ScalarActivation::convex_combination(vec![
            (0.6, ScalarActivation::RELU),
            (0.6, ScalarActivation::TANH)
        ])
        .is_err());
        assert!(ScalarActivation::convex_combination(vec![]).is_err());
    }

    #[test]
    fn compose_complement_and_friends() {
        let rs = ScalarActivation::compose(&ScalarActivation::RELU, &ScalarActivation::SATLIN);
        assert_eq!(rs.eval(-3.0), 0.0);
        let sr = ScalarActivation::compose(&ScalarActivation::SATLIN, &ScalarActivation::RELU);
        assert_eq!(sr.eval(4.0), 1.0);
        let it = ScalarActivation::compose(&ScalarActivation::IDENTITY, &ScalarActivation::TANH);
        assert_eq!(it.eval(0.7), 0.7f64.tanh());

        assert_eq!(ScalarActivation::SATLIN.complement().eval(2.0), 1.0);
        assert_eq!(ScalarActivation::IDENTITY.complement().eval(-8.5), 0.0);
        assert_eq!(ScalarActivation::RELU.complement().eval(-2.0), -2.0);

        let hd = |a: &ScalarActivation, b: &ScalarActivation, x| ScalarActivation::half_difference(a, b).eval(x);
        assert_eq!(hd(&ScalarActivation::RELU, &ScalarActivation::RELU, 3.0), 1.5);
        assert_eq!(hd(&ScalarActivation::IDENTITY, &ScalarActivation::RELU, -2.0), -2.0);
        assert_eq!(hd(&ScalarActivation::TANH, &ScalarActivation::TANH, 0.0), 0.0);

        let rc = |a: &ScalarActivation, b: &ScalarActivation, x| ScalarActivation::reflected_compose(a, b).eval(x);
        assert_eq!(rc(&ScalarActivation::IDENTITY, &ScalarActivation::IDENTITY, 5.0), 5.0);
        assert_eq!(rc(&ScalarActivation::RELU, &ScalarActivation::IDENTITY, -1.0), 0.0);
        assert_eq!(rc(&ScalarActivation::SATLIN, &ScalarActivation::RELU, 2.0), 1.0);
    }

    #[test]
    fn prelu_parameter_checks() {
        assert_eq!(ScalarActivation::prelu(1.0).unwrap(), ScalarActivation::IDENTITY);
        assert!(ScalarActivation::prelu(0.0).is_err());
        assert!(ScalarActivation::prelu(1.5).is_err());
        assert_eq!(ScalarActivation::prelu(0.25).unwrap().eval(-4.0), -1.0);
    }

    #[test]
    fn domain_flags() {
        assert!(ScalarActivation::SATLIN.potential_domain_bounded());
        assert!(!ScalarActivation::RELU.potential_domain_bounded());
        assert!(ScalarActivation::ARCSINH.conjugate_full_domain());
        assert!(!ScalarActivation::ARCSINH.potential_domain_bounded());
        assert!(!ScalarActivation::SOFT_THRESHOLD.conjugate_full_domain());
        assert!(ScalarActivation::compose(&ScalarActivation::RELU, &ScalarActivation::TANH).potential_domain_bounded());
        assert!(!ScalarActivation::SATLIN.complement().potential_domain_bounded());
        assert_eq!(ScalarActivation::SIGMOID_SHIFTED.range_radius(), Some(0.5));
        assert_eq!(ScalarActivation::RELU.range_radius(), None);
    }

    #[test]
    fn parse_keys() {
        assert_eq!(act("prelu:0.25").params(), vec![0.25]);
        assert_eq!(act("RELU"), ScalarActivation::RELU);
        assert_eq!(act("complement(satlin)").eval(2.0), 1.0);
        assert_eq!(act("convex(0.5*relu, 0.5*identity)").eval(-2.0), -1.0);
        assert_eq!(act("compose(relu,satlin)").eval(-3.0), 0.0);
        assert!("swish".parse::<ScalarActivation>().is_err());
        assert!("scale(2,1,relu)".parse::<ScalarActivation>().is_err());
        assert!("complement(relu".parse::<ScalarActivation>().is_err());
        assert!("relu)".parse::<ScalarActivation>().is_err());
    }

    fn arb_activation() -> impl Strategy<Value = ScalarActivation> {
        let leaf = prop::sample::select(ScalarActivation::catalog());
        leaf.prop_recursive(3, 16, 3, |inner| {
            prop_oneof![
                (inner.clone(), 0.1f64..2.0, 0.1f64..1.0).prop_map(|(a, o, t)| a.scale(o, t / o).unwrap()),
                (inner.clone(), inner.clone(), 0.05f64..0.95)
                    .prop_map(|(a, b, w)| ScalarActivation::convex_combination(vec![(w, a), (1.0 - w, b)]).unwrap()),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| ScalarActivation::compose(&a, &b)),
                inner.clone().prop_map(|a| a.complement()),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| ScalarActivation::half_difference(&a, &b)),
                (inner.clone(), inner).prop_map(|(a, b)| ScalarActivation::reflected_compose(&a, &b)),
            ]
        })
    }

    proptest! {
        #[test]
        fn class_membership(a in arb_activation(), x in -10.0f64..10.0, y in -10.0f64..10.0) {
            prop_assert_eq!(a.eval(0.0), 0.0);
            let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
            let d = a.eval(hi) - a.eval(lo);
            prop_assert!(d >= -1e-12 && d <= hi - lo + 1e-12);
            let (rx, ry) = (a.eval(x), a.eval(y));
            let lhs = (rx - ry).powi(2);
            let rhs = (x - y).powi(2) - (x - y - rx + ry).powi(2);
            prop_assert!(lhs <= rhs + 1e-10);
        }

        #[test]
        fn display_parses_back(a in arb_activation(), x in -10.0f64..10.0) {
            let b: ScalarActivation = a.to_string().parse().unwrap();
            prop_assert_eq!(a.eval(x), b.eval(x));
        }
    }
}
