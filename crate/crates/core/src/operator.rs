//! Activation operators on `R^N`: proximity operators of potentials minimal at
//! the origin. Built from separable scalar activations, the softmax, and the
//! closure operations (sandwich `Lᵀ∘R∘L`, convex combination, complement,
//! half difference).

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::activation::{check_weights, Interval, ScalarActivation};
use crate::error::{Error, Result};
use crate::linalg::spectral_norm;

/// Slack allowed on `‖L‖ ≤ 1` for sandwich operators.
pub const SANDWICH_NORM_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Structure {
    Separable(Vec<ScalarActivation>),
    Softmax,
    Sandwich { l: DMatrix<f64>, inner: Box<ActivationOperator> },
    ConvexCombination(Vec<(f64, ActivationOperator)>),
    Complement(Box<ActivationOperator>),
    HalfDifference(Box<ActivationOperator>, Box<ActivationOperator>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActivationOperator {
    dim: usize,
    structure: Structure,
}

impl ActivationOperator {
    pub fn separable(components: Vec<ScalarActivation>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParameter("separable operator needs at least one coordinate".into()));
        }
        Ok(Self {
            dim: components.len(),
            structure: Structure::Separable(components),
        })
    }

    /// The same scalar activation on every coordinate.
    pub fn uniform(activation: ScalarActivation, dim: usize) -> Result<Self> {
        Self::separable(vec![activation; dim])
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::uniform(ScalarActivation::IDENTITY, dim)
    }

    pub fn softmax(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("softmax dimension must be positive".into()));
        }
        Ok(Self { dim, structure: Structure::Softmax })
    }

    /// `x ↦ Lᵀ inner(L x)`; `L` maps the result space into the inner space
    /// and must satisfy `‖L‖ ≤ 1`.
    pub fn sandwich(l: DMatrix<f64>, inner: ActivationOperator) -> Result<Self> {
        if l.nrows() != inner.dim {
            return Err(Error::DimensionMismatch {
                expected: inner.dim,
                found: l.nrows(),
            });
        }
        if l.ncols() == 0 {
            return Err(Error::InvalidParameter("sandwich matrix has no columns".into()));
        }
        let norm = spectral_norm(&l);
        if norm > 1.0 + SANDWICH_NORM_SLACK {
            return Err(Error::NormTooLarge { norm });
        }
        Ok(Self {
            dim: l.ncols(),
            structure: Structure::Sandwich { l, inner: Box::new(inner) },
        })
    }

    pub fn convex_combination(terms: Vec<(f64, ActivationOperator)>) -> Result<Self> {
        check_weights(terms.iter().map(|(w, _)| *w))?;
        let dim = terms[0].1.dim;
        if let Some((_, bad)) = terms.iter().find(|(_, r)| r.dim != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: bad.dim });
        }
        Ok(Self {
            dim,
            structure: Structure::ConvexCombination(terms),
        })
    }

    pub fn complement(inner: ActivationOperator) -> Self {
        Self {
            dim: inner.dim,
            structure: Structure::Complement(Box::new(inner)),
        }
    }

    pub fn half_difference(a: ActivationOperator, b: ActivationOperator) -> Result<Self> {
        if a.dim != b.dim {
            return Err(Error::DimensionMismatch { expected: a.dim, found: b.dim });
        }
        Ok(Self {
            dim: a.dim,
            structure: Structure::HalfDifference(Box::new(a), Box::new(b)),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    /// Bounded range, equivalently bounded potential domain. Conservative for
    /// complements and half differences.
    pub fn range_bounded(&self) -> bool {
        self.range_radius().is_some()
    }

    /// An upper bound on `sup ‖R x‖`, when the range is known to be bounded.
    pub fn range_radius(&self) -> Option<f64> {
        match &self.structure {
            Structure::Separable(acts) => acts
                .iter()
                .map(|a| a.range_radius().map(|r| r * r))
                .sum::<Option<f64>>()
                .map(f64::sqrt),
            // vertices e_k - u of the shifted simplex
            Structure::Softmax => Some((1.0 - 1.0 / self.dim as f64).sqrt()),
            Structure::Sandwich { l, inner } => inner.range_radius().map(|r| spectral_norm(l) * r),
            Structure::ConvexCombination(terms) => terms
                .iter()
                .map(|(w, r)| r.range_radius().map(|x| w * x))
                .sum(),
            Structure::Complement(_) | Structure::HalfDifference(..) => None,
        }
    }

    /// Whether the conjugate of the potential is finite everywhere. A bounded
    /// potential domain implies it.
    pub fn conjugate_full_domain(&self) -> bool {
        match &self.structure {
            Structure::Separable(acts) => acts.iter().all(ScalarActivation::conjugate_full_domain),
            _ => self.range_bounded(),
        }
    }

    /// Per-coordinate potential domains for separable operators.
    pub fn potential_domains(&self) -> Option<Vec<Interval>> {
        match &self.structure {
            Structure::Separable(acts) => acts.iter().map(ScalarActivation::potential_domain).collect(),
            _ => None,
        }
    }

    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        Ok(self.apply_unchecked(x))
    }

    pub(crate) fn apply_unchecked(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.structure {
            Structure::Separable(acts) => DVector::from_iterator(
                self.dim,
                acts.iter().zip(x.iter()).map(|(a, &v)| a.eval(v)),
            ),
            Structure::Softmax => softmax_centered(x),
            Structure::Sandwich { l, inner } => l.tr_mul(&inner.apply_unchecked(&(l * x))),
            Structure::ConvexCombination(terms) => {
                let mut out = DVector::zeros(self.dim);
                for (w, r) in terms {
                    out.axpy(*w, &r.apply_unchecked(x), 1.0);
                }
                out
            }
            Structure::Complement(r) => x - r.apply_unchecked(x),
            Structure::HalfDifference(a, b) => (a.apply_unchecked(x) - b.apply_unchecked(x) + x) * 0.5,
        }
    }

    /// Samples `samples` pairs in `[-5, 5]^dim` and measures the worst
    /// violation of `‖Rx−Ry‖² ≤ ‖x−y‖² − ‖x−y−Rx+Ry‖²`.
    pub fn check_firm_nonexpansive<R: Rng + ?Sized>(
        &self,
        samples: usize,
        tol: f64,
        rng: &mut R,
    ) -> Result<FirmReport> {
        if samples == 0 {
            return Err(Error::InvalidParameter("need at least one sample".into()));
        }
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..samples {
            let x = DVector::from_fn(self.dim, |_, _| rng.random_range(-5.0..=5.0));
            let y = DVector::from_fn(self.dim, |_, _| rng.random_range(-5.0..=5.0));
            worst = worst.max(self.firm_violation(&x, &y));
        }
        Ok(FirmReport {
            holds: worst <= tol,
            worst_violation: worst.max(0.0),
            samples,
        })
    }

    /// `‖Rx−Ry‖² − (‖x−y‖² − ‖x−y−Rx+Ry‖²)`; nonpositive for a firmly
    /// nonexpansive operator.
    pub fn firm_violation(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let rx = self.apply_unchecked(x);
        let ry = self.apply_unchecked(y);
        let dr = &rx - &ry;
        let d = x - y;
        let resid = &d - &dr;
        dr.norm_squared() - (d.norm_squared() - resid.norm_squared())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirmReport {
    pub holds: bool,
    pub worst_violation: f64,
    pub samples: usize,
}

/// `softmax(x) − u`, `u = (1,…,1)/N`, with max-shift.
fn softmax_centered(x: &DVector<f64>) -> DVector<f64> {
    let n = x.len() as f64;
    let max = x.max();
    let e = x.map(|v| (v - max).exp());
    let total = e.sum();
    e.map(|v| v / total - 1.0 / n)
}
