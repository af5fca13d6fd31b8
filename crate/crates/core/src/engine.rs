//! Relaxed fixed-point iteration `x_{n+1} = x_n + λ_n (T x_n − x_n)` for
//! autonomous networks and for networks whose layers drift toward limit
//! layers along summable perturbations.

use std::fmt;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::spectral_norm;
use crate::network::Network;

/// Relaxation parameters `λ_n` together with the interval they must stay in.
#[derive(Debug, Clone, PartialEq)]
pub enum RelaxationSchedule {
    /// `λ_n ≡ λ` with `0 < λ ≤ 2`.
    Constant(f64),
    /// A sequence in `(0, 1/α)` with divergent `Σ λ_n (1 − αλ_n)`.
    Averaged { alpha: f64, family: RelaxationFamily },
    /// A constant in `[ε, (1−ε)(ε + 1/α)]` with `0 < ε < 1/2`.
    Margin { alpha: f64, eps: f64, lambda: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum RelaxationFamily {
    Constant(f64),
    /// `λ_n = 1/α − d/(n+1)` clipped to `[ε, 1/α − ε]`.
    Harmonic { d: f64, eps: f64 },
}

impl RelaxationSchedule {
    /// Rejects parameters that would place any `λ_n` outside the declared
    /// interval.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match *self {
            RelaxationSchedule::Constant(l) => {
                if !(l > 0.0 && l <= 2.0) {
                    return bad(format!("constant relaxation must lie in (0, 2], got {l}"));
                }
            }
            RelaxationSchedule::Averaged { alpha, ref family } => {
                check_alpha(alpha)?;
                match *family {
                    RelaxationFamily::Constant(c) => {
                        if !(c > 0.0 && c < 1.0 / alpha) {
                            return bad(format!("relaxation {c} must lie in (0, {})", 1.0 / alpha));
                        }
                    }
                    RelaxationFamily::Harmonic { d, eps } => {
                        if !(d >= 0.0 && d.is_finite()) {
                            return bad(format!("harmonic offset must be nonnegative, got {d}"));
                        }
                        if !(eps > 0.0 && 2.0 * eps < 1.0 / alpha) {
                            return bad(format!("clipping margin must lie in (0, {}), got {eps}", 0.5 / alpha));
                        }
                    }
                }
            }
            RelaxationSchedule::Margin { alpha, eps, lambda } => {
                check_alpha(alpha)?;
                if !(eps > 0.0 && eps < 0.5) {
                    return bad(format!("margin must lie in (0, 1/2), got {eps}"));
                }
                if !self.contains(lambda) {
                    return bad(format!("relaxation {lambda} outside its interval"));
                }
            }
        }
        Ok(())
    }

    /// Whether `lambda` lies in the declared interval.
    pub fn contains(&self, lambda: f64) -> bool {
        match *self {
            RelaxationSchedule::Constant(_) => lambda > 0.0 && lambda <= 2.0,
            RelaxationSchedule::Averaged { alpha, .. } => lambda > 0.0 && lambda < 1.0 / alpha,
            RelaxationSchedule::Margin { alpha, eps, .. } => {
                lambda >= eps && lambda <= (1.0 - eps) * (eps + 1.0 / alpha)
            }
        }
    }

    fn raw(&self, n: usize) -> f64 {
        match *self {
            RelaxationSchedule::Constant(l) => l,
            RelaxationSchedule::Averaged { alpha, ref family } => match *family {
                RelaxationFamily::Constant(c) => c,
                RelaxationFamily::Harmonic { d, eps } => {
                    (1.0 / alpha - d / (n as f64 + 1.0)).clamp(eps, 1.0 / alpha - eps)
                }
            },
            RelaxationSchedule::Margin { lambda, .. } => lambda,
        }
    }

    /// `λ_n`, failing if it leaves the declared interval.
    pub fn lambda(&self, n: usize) -> Result<f64> {
        let l = self.raw(n);
        if self.contains(l) {
            Ok(l)
        } else {
            Err(Error::ScheduleFault { n, lambda: l })
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.5..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("alpha must lie in [1/2, 1], got {alpha}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stop {
    pub tol: f64,
    pub max_iter: usize,
    pub divergence_norm: f64,
}

impl Default for Stop {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 1_000_000, divergence_norm: 1e12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIterations,
    Diverged,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIterations => "max_iterations",
            Status::Diverged => "diverged",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub n: usize,
    pub lambda: f64,
    /// `‖x_{n+1} − x_n‖`; zero on the terminal row of a converged run.
    pub step_norm: f64,
    pub residual: f64,
    pub x_norm: f64,
    pub dist_ref: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub rows: Vec<TraceRow>,
    pub status: Status,
}

impl IterationTrace {
    pub const CSV_HEADER: &'static str = "n,lambda,step_norm,residual,x_norm,dist_ref";

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for r in &self.rows {
            write!(out, "{},{},{},{},{},", r.n, r.lambda, r.step_norm, r.residual, r.x_norm)?;
            if let Some(d) = r.dist_ref {
                write!(out, "{d}")?;
            }
            writeln!(out)?;
        }
        writeln!(out, "# status={}", self.status)
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is ascii")
    }

    /// Number of relaxation steps taken; a converged run ends on a row
    /// without a step.
    pub fn steps(&self) -> usize {
        match self.status {
            Status::Converged => self.rows.len().saturating_sub(1),
            _ => self.rows.len(),
        }
    }

    /// Whether the last recorded residual is below the first one.
    pub fn residual_decayed(&self) -> bool {
        match (self.rows.first(), self.rows.last()) {
            (Some(a), Some(b)) => b.residual < a.residual || b.residual == 0.0,
            _ => false,
        }
    }
}

/// Largest increase of `‖x_n − x_ref‖` between consecutive rows; zero when
/// fewer than two rows were recorded.
pub fn fejer_violation(trace: &IterationTrace) -> Result<f64> {
    let dists: Vec<f64> = trace
        .rows
        .iter()
        .map(|r| r.dist_ref.ok_or(Error::MissingReference))
        .collect::<Result<_>>()?;
    Ok(dists.windows(2).map(|w| w[1] - w[0]).reduce(f64::max).unwrap_or(0.0))
}

/// Summable perturbations of the layers:
/// `W_{i,n} = W_i + ω_n D_i`, `b_{i,n} = b_i + ν_n e_i` and
/// `R_{i,n} x = (1 − ρ_n) R_i x + η_n e_i`, each rate decaying as
/// `c/(n+1)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSchedule {
    pub c_omega: f64,
    pub c_rho: f64,
    pub c_eta: f64,
    pub c_nu: f64,
    directions: Vec<(DMatrix<f64>, DVector<f64>)>,
}

impl PerturbationSchedule {
    /// Directions are the normalized all-ones matrix and vector per layer.
    pub fn new(net: &Network, c_omega: f64, c_rho: f64, c_eta: f64, c_nu: f64) -> Result<Self> {
        let directions = net
            .layers()
            .iter()
            .map(|l| {
                let (r, c) = (l.dim_out(), l.dim_in());
                let d = DMatrix::from_element(r, c, 1.0 / ((r * c) as f64).sqrt());
                let e = DVector::from_element(r, 1.0 / (r as f64).sqrt());
                (d, e)
            })
            .collect();
        Self::checked(c_omega, c_rho, c_eta, c_nu, directions)
    }

    /// Directions drawn uniformly and normalized, reproducible from `seed`.
    pub fn with_random_directions(
        net: &Network,
        c_omega: f64,
        c_rho: f64,
        c_eta: f64,
        c_nu: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut directions = Vec::with_capacity(net.depth());
        for l in net.layers() {
            let (r, c) = (l.dim_out(), l.dim_in());
            let d = loop {
                let d = DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..=1.0));
                let n = spectral_norm(&d);
                if n > 1e-12 {
                    break d / n;
                }
            };
            let e = loop {
                let e = DVector::from_fn(r, |_, _| rng.random_range(-1.0..=1.0));
                let n = e.norm();
                if n > 1e-12 {
                    break e / n;
                }
            };
            directions.push((d, e));
        }
        Self::checked(c_omega, c_rho, c_eta, c_nu, directions)
    }

    fn checked(
        c_omega: f64,
        c_rho: f64,
        c_eta: f64,
        c_nu: f64,
        directions: Vec<(DMatrix<f64>, DVector<f64>)>,
    ) -> Result<Self> {
        for (name, c) in [("omega", c_omega), ("rho", c_rho), ("eta", c_eta), ("nu", c_nu)] {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::InvalidParameter(format!("decay constant {name} must be finite and nonnegative, got {c}")));
            }
        }
        Ok(Self { c_omega, c_rho, c_eta, c_nu, directions })
    }

    pub fn is_zero(&self) -> bool {
        self.c_omega == 0.0 && self.c_rho == 0.0 && self.c_eta == 0.0 && self.c_nu == 0.0
    }

    fn decay(c: f64, n: usize) -> f64 {
        let k = n as f64 + 1.0;
        c / (k * k)
    }

    pub fn omega(&self, n: usize) -> f64 {
        Self::decay(self.c_omega, n)
    }

    pub fn rho(&self, n: usize) -> f64 {
        Self::decay(self.c_rho, n)
    }

    pub fn eta(&self, n: usize) -> f64 {
        Self::decay(self.c_eta, n)
    }

    pub fn nu(&self, n: usize) -> f64 {
        Self::decay(self.c_nu, n)
    }

    /// `(D_i, e_i)` for layer `i` counted from 0.
    pub fn direction(&self, layer: usize) -> (&DMatrix<f64>, &DVector<f64>) {
        let (d, e) = &self.directions[layer];
        (d, e)
    }

    /// Weight and bias of layer `i` (from 0) at step `n`.
    pub fn layer_params(&self, net: &Network, i: usize, n: usize) -> (DMatrix<f64>, DVector<f64>) {
        let layer = &net.layers()[i];
        let (d, e) = self.direction(i);
        (layer.weight() + d * self.omega(n), layer.bias() + e * self.nu(n))
    }

    fn check_against(&self, net: &Network) -> Result<()> {
        if self.directions.len() != net.depth() {
            return Err(Error::DimensionMismatch { expected: net.depth(), found: self.directions.len() });
        }
        for (l, (d, _)) in net.layers().iter().zip(&self.directions) {
            if d.shape() != l.weight().shape() {
                return Err(Error::DimensionMismatch { expected: l.dim_out(), found: d.nrows() });
            }
        }
        Ok(())
    }

    /// `(T_{i,n} ∘ ⋯ ∘ T_{1,n}) x` for every `i`.
    pub fn layer_outputs(&self, net: &Network, n: usize, x: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
        self.check_against(net)?;
        if x.len() != net.dim() {
            return Err(Error::DimensionMismatch { expected: net.dim(), found: x.len() });
        }
        let mut outs: Vec<DVector<f64>> = Vec::with_capacity(net.depth());
        for i in 0..net.depth() {
            let next = self.apply_layer(net, i, n, outs.last().unwrap_or(x));
            outs.push(next);
        }
        Ok(outs)
    }

    fn apply_layer(&self, net: &Network, i: usize, n: usize, x: &DVector<f64>) -> DVector<f64> {
        let (w, b) = self.layer_params(net, i, n);
        let pre = w * x + b;
        let act = net.layers()[i].activation().apply_unchecked(&pre);
        let (_, e) = self.direction(i);
        act * (1.0 - self.rho(n)) + e * self.eta(n)
    }

    fn forward(&self, net: &Network, n: usize, x: &DVector<f64>) -> DVector<f64> {
        (0..net.depth()).fold(x.clone(), |cur, i| self.apply_layer(net, i, n, &cur))
    }
}

/// One family of per-layer bound sequences, indexed `[layer][n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundFamily {
    pub values: Vec<Vec<f64>>,
    /// Running sums `Σ_{k ≤ n}` of `values`.
    pub partial_sums: Vec<Vec<f64>>,
}

impl BoundFamily {
    fn from_values(values: Vec<Vec<f64>>) -> Self {
        let partial_sums = values
            .iter()
            .map(|row| {
                row.iter()
                    .scan(0.0, |acc, v| {
                        *acc += v;
                        Some(*acc)
                    })
                    .collect()
            })
            .collect();
        Self { values, partial_sums }
    }
}

/// Per-layer deviation bounds: `‖T_{i,n}x − T_i x‖ ≤ χ_{i,n}‖x‖ + ζ_{i,n}`
/// and `‖(T_{i,n}∘⋯∘T_{1,n})x − (T_i∘⋯∘T_1)x‖ ≤ τ_{i,n}‖x‖ + θ_{i,n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundSequences {
    pub chi: BoundFamily,
    pub zeta: BoundFamily,
    pub tau: BoundFamily,
    pub theta: BoundFamily,
}

pub fn bound_sequences(net: &Network, perturb: &PerturbationSchedule, horizon: usize) -> Result<BoundSequences> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    perturb.check_against(net)?;
    let depth = net.depth();
    let w_norm: Vec<f64> = net.layers().iter().map(|l| l.weight_norm()).collect();
    // prefix products ∏_{k≤i}‖W_k‖ and bias sums Σ_{j≤i}‖b_j‖∏_{j<k≤i}‖W_k‖
    let mut prod = Vec::with_capacity(depth);
    let mut bias = Vec::with_capacity(depth);
    let (mut p, mut s) = (1.0, 0.0);
    for l in net.layers() {
        p *= l.weight_norm();
        s = s * l.weight_norm() + l.bias_norm();
        prod.push(p);
        bias.push(s);
    }
    let mut chi = vec![Vec::with_capacity(horizon); depth];
    let mut zeta = vec![Vec::with_capacity(horizon); depth];
    let mut tau = vec![Vec::with_capacity(horizon); depth];
    let mut theta = vec![Vec::with_capacity(horizon); depth];
    for n in 0..horizon {
        let (rho, omega, eta, nu) = (perturb.rho(n), perturb.omega(n), perturb.eta(n), perturb.nu(n));
        for i in 0..depth {
            let (w, b) = if perturb.is_zero() {
                (net.layers()[i].weight_norm(), net.layers()[i].bias_norm())
            } else {
                let (w, b) = perturb.layer_params(net, i, n);
                (spectral_norm(&w), b.norm())
            };
            let c = rho * w + omega;
            let z = rho * b + eta + nu;
            let (t, th) = if i == 0 {
                (c, z)
            } else {
                let growth = w_norm[i] + c;
                (growth * tau[i - 1][n] + c * prod[i - 1], growth * theta[i - 1][n] + c * bias[i - 1] + z)
            };
            chi[i].push(c);
            zeta[i].push(z);
            tau[i].push(t);
            theta[i].push(th);
        }
    }
    Ok(BoundSequences {
        chi: BoundFamily::from_values(chi),
        zeta: BoundFamily::from_values(zeta),
        tau: BoundFamily::from_values(tau),
        theta: BoundFamily::from_values(theta),
    })
}

/// A configured run; `observe` sees every visited iterate `x_n`.
#[derive(Debug, Clone)]
pub struct Iteration<'a> {
    net: &'a Network,
    schedule: RelaxationSchedule,
    stop: Stop,
    perturbation: Option<&'a PerturbationSchedule>,
    reference: Option<DVector<f64>>,
}

impl<'a> Iteration<'a> {
    pub fn new(net: &'a Network, schedule: RelaxationSchedule, stop: Stop) -> Result<Self> {
        schedule.validate()?;
        if !(stop.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", stop.tol)));
        }
        if !(stop.divergence_norm > 0.0) {
            return Err(Error::InvalidParameter("divergence norm must be positive".into()));
        }
        Ok(Self { net, schedule, stop, perturbation: None, reference: None })
    }

    pub fn with_reference(mut self, x_ref: DVector<f64>) -> Result<Self> {
        if x_ref.len() != self.net.dim() {
            return Err(Error::DimensionMismatch { expected: self.net.dim(), found: x_ref.len() });
        }
        self.reference = Some(x_ref);
        Ok(self)
    }

    pub fn with_perturbation(mut self, perturbation: &'a PerturbationSchedule) -> Result<Self> {
        perturbation.check_against(self.net)?;
        self.perturbation = Some(perturbation);
        Ok(self)
    }

    pub fn run(&self, x0: &DVector<f64>) -> Result<(DVector<f64>, IterationTrace)> {
        self.run_observed(x0, |_, _| {})
    }

    pub fn run_observed<F>(&self, x0: &DVector<f64>, mut observe: F) -> Result<(DVector<f64>, IterationTrace)>
    where
        F: FnMut(usize, &DVector<f64>),
    {
        if x0.len() != self.net.dim() {
            return Err(Error::DimensionMismatch { expected: self.net.dim(), found: x0.len() });
        }
        let perturb = self.perturbation.filter(|p| !p.is_zero());
        let mut x = x0.clone();
        let mut rows = Vec::new();
        let mut n = 0usize;
        let status = loop {
            let x_norm = x.norm();
            if !x_norm.is_finite() || x_norm > self.stop.divergence_norm {
                break Status::Diverged;
            }
            observe(n, &x);
            let dist_ref = self.reference.as_ref().map(|r| (&x - r).norm());
            let tx = self.net.forward_unchecked(&x);
            let limit_residual = (&tx - &x).norm();
            let (target, residual) = match perturb {
                Some(p) => {
                    let sx = p.forward(self.net, n, &x);
                    let r = (&sx - &x).norm();
                    (sx, r)
                }
                None => (tx, limit_residual),
            };
            if limit_residual <= self.stop.tol {
                let lambda = self.schedule.lambda(n)?;
                rows.push(TraceRow { n, lambda, step_norm: 0.0, residual, x_norm, dist_ref });
                break Status::Converged;
            }
            if n >= self.stop.max_iter {
                break Status::MaxIterations;
            }
            let lambda = self.schedule.lambda(n)?;
            let step = (target - &x) * lambda;
            let step_norm = step.norm();
            rows.push(TraceRow { n, lambda, step_norm, residual, x_norm, dist_ref });
            x += step;
            n += 1;
        };
        Ok((x, IterationTrace { rows, status }))
    }
}

pub fn iterate(
    net: &Network,
    x0: &DVector<f64>,
    schedule: RelaxationSchedule,
    stop: Stop,
) -> Result<(DVector<f64>, IterationTrace)> {
    Iteration::new(net, schedule, stop)?.run(x0)
}

/// Perturbed run; bound sequences cover every recorded step.
pub fn iterate_perturbed(
    net: &Network,
    perturb: &PerturbationSchedule,
    x0: &DVector<f64>,
    schedule: RelaxationSchedule,
    stop: Stop,
) -> Result<(DVector<f64>, IterationTrace, BoundSequences)> {
    let (x, trace) = Iteration::new(net, schedule, stop)?.with_perturbation(perturb)?.run(x0)?;
    let bounds = bound_sequences(net, perturb, trace.rows.len().max(1))?;
    Ok((x, trace, bounds))
}
