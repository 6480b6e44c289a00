//! Non-Markovianity measures: the divisibility-based g(t) function (map and
//! generator routes), integrated and normalized degrees, the canonical
//! decay-rate measure and index, the BLP quantifier, the Helstrom-norm
//! measure and k-divisibility degrees.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channels::{extend_superop, ChannelError, InverseStrategy, Superoperator};
use crate::dynamics::{
    dephasing_r, liouvillian_superop, DynamicsError, GkslGenerator, PropagatorFamily, RateFunction,
};
use crate::linalg::{self, CMatrix};
use crate::scalar::Real;
use crate::states::{DensityMatrix, StateError};

/// Threshold on ḡ (and on integrated per-channel weights) below which the
/// dynamics counts as Markovian.
pub const INDICATOR_THRESHOLD: f64 = 1e-8;
/// Derivative step sweep for both g routes.
pub const EPS_SWEEP: [f64; 3] = [1e-4, 5e-5, 2.5e-5];
/// g values below this are treated as numerical zero.
pub const G_FLOOR: f64 = 1e-10;
/// Positive trace-norm increments below this are ignored when accumulating
/// revival measures.
pub const REVIVAL_FLOOR: f64 = 1e-10;
/// Relative tolerance for quadrature refinement.
pub const QUAD_RTOL: f64 = 1e-6;
/// Panel cap for quadrature refinement (indicator integrands stall the
/// Richardson-style error estimate, so refinement must be bounded).
pub const QUAD_MAX_PANELS: usize = 8192;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Linalg(#[from] crate::linalg::LinalgError),
    #[error("interval must satisfy a < b")]
    InvalidInterval,
    #[error("ancilla level k must satisfy 1 ≤ k ≤ d")]
    BadK,
    #[error("family must contain at least two times")]
    FamilyTooShort,
    #[error("measure requires a generator-backed source")]
    NeedsGenerator,
}

/// Which of the two equivalent definitions of g(t) to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GRoute {
    /// `(‖Choi(E(t+ε, t))‖₁ − 1)/ε` from intermediate maps.
    Map,
    /// `(‖(1 + εL_t ⊗ 1)(|Φ⟩⟨Φ|)‖₁ − 1)/ε` from the generator.
    Generator,
}

/// Where the dynamics comes from when sampling g(t) at arbitrary times.
#[derive(Debug, Clone, Copy)]
pub enum GSource<'a, F: Real> {
    Generator(&'a GkslGenerator<F>),
    /// Analytic qubit pure-dephasing model.
    Dephasing(&'a RateFunction<F>),
    /// Pre-computed family; g is only available on the stored grid.
    Family { family: &'a PropagatorFamily<F>, strategy: InverseStrategy },
}

/// One g(t) sample; `singular` marks instants where the intermediate map (or
/// the rate itself) blows up and the raw g diverges.
#[derive(Debug, Clone, Copy)]
pub struct GSample<F: Real> {
    pub g: F,
    pub singular: bool,
}

impl<F: Real> GSample<F> {
    /// ḡ = tanh g, with singular samples saturating at 1.
    pub fn gbar(&self) -> F {
        if self.singular {
            F::one()
        } else {
            self.g.tanh()
        }
    }
}

fn lagrange_extrapolate_to_zero<F: Real>(samples: &[(F, F)]) -> F {
    let mut out = F::zero();
    for (i, &(xi, yi)) in samples.iter().enumerate() {
        let mut w = F::one();
        for (j, &(xj, _)) in samples.iter().enumerate() {
            if i != j {
                w *= -xj / (xi - xj);
            }
        }
        out += yi * w;
    }
    out
}

fn is_singular_failure(e: &MeasureError) -> bool {
    matches!(
        e,
        MeasureError::Channel(ChannelError::SingularMap { .. })
            | MeasureError::Dynamics(DynamicsError::PoleExclusion(_))
            | MeasureError::Dynamics(DynamicsError::Channel(ChannelError::SingularMap { .. }))
    )
}

/// Short-time propagator `E(b, a)` for the map route.
fn segment_map<F: Real>(source: &GSource<F>, a: F, b: F) -> Result<Superoperator<F>, MeasureError> {
    match source {
        GSource::Dephasing(rate) => {
            if let RateFunction::Tangent { delta_pole } = rate {
                if a.cos().abs() < *delta_pole {
                    return Err(DynamicsError::PoleExclusion(a.to_f64()).into());
                }
            }
            let r = dephasing_r(rate, a, b);
            let mut m = CMatrix::<F>::zeros(4, 4);
            for (i, v) in [F::one(), r, r, F::one()].into_iter().enumerate() {
                m[(i, i)] = num_complex::Complex::new(v, F::zero());
            }
            Ok(Superoperator::new(m)?)
        }
        GSource::Generator(gen) => {
            // single RK4 step over [a, b]; the interval is O(ε) so the local
            // truncation error is negligible against the sweep itself
            let h = b - a;
            let half = h / F::of(2.0);
            let n = gen.dim * gen.dim;
            let e = linalg::identity::<F>(n);
            let l1 = liouvillian_superop(gen, a)?.matrix;
            let l2 = liouvillian_superop(gen, a + half)?.matrix;
            let l4 = liouvillian_superop(gen, b)?.matrix;
            let ch = num_complex::Complex::new(h, F::zero());
            let c2 = num_complex::Complex::new(F::of(2.0), F::zero());
            let k1 = &l1 * &e;
            let k2 = &l2 * (&e + (&k1).map(|z| z * ch / c2));
            let k3 = &l2 * (&e + (&k2).map(|z| z * ch / c2));
            let k4 = &l4 * (&e + (&k3).map(|z| z * ch));
            let out = e
                + (k1 + k2.map(|z| z * c2) + k3.map(|z| z * c2) + k4)
                    .map(|z| z * ch / num_complex::Complex::new(F::of(6.0), F::zero()));
            Ok(Superoperator::new(out)?)
        }
        GSource::Family { family, strategy } => {
            // only grid resolution is available: use the consecutive
            // intermediate map of the cell containing [a, b]
            let i = family
                .times
                .partition_point(|&t| t <= a)
                .saturating_sub(1)
                .min(family.len() - 2);
            Ok(family.intermediate(i, i + 1, *strategy)?)
        }
    }
}

/// g(t): instantaneous rate of complete-positivity loss of the intermediate
/// map, via the selected route. Singular instants yield `g = +∞` with the
/// singular flag set instead of an error.
pub fn g_function<F: Real>(
    source: &GSource<F>,
    t: F,
    route: GRoute,
) -> Result<GSample<F>, MeasureError> {
    let result = match route {
        GRoute::Map => g_map_route(source, t),
        GRoute::Generator => g_generator_route(source, t),
    };
    match result {
        Ok(g) => Ok(GSample { g, singular: false }),
        Err(e) if is_singular_failure(&e) => Ok(GSample { g: F::inf(), singular: true }),
        Err(e) => Err(e),
    }
}

fn g_map_route<F: Real>(source: &GSource<F>, t: F) -> Result<F, MeasureError> {
    if let GSource::Family { family, strategy } = source {
        if family.len() < 2 {
            return Err(MeasureError::FamilyTooShort);
        }
        let i = family
            .times
            .partition_point(|&x| x <= t)
            .saturating_sub(1)
            .min(family.len() - 2);
        let eps = family.times[i + 1] - family.times[i];
        let inter = family.intermediate(i, i + 1, *strategy)?;
        let g = (linalg::trace_norm(&inter.choi()?.matrix)? - F::one()) / eps;
        return Ok(if g < F::of(G_FLOOR) { F::zero() } else { g });
    }
    let mut samples = Vec::with_capacity(EPS_SWEEP.len());
    for &eps in EPS_SWEEP.iter() {
        let eps = F::of(eps);
        let seg = segment_map(source, t, t + eps)?;
        let val = (linalg::trace_norm(&seg.choi()?.matrix)? - F::one()) / eps;
        samples.push((eps, val));
    }
    let g = lagrange_extrapolate_to_zero(&samples);
    Ok(if g < F::of(G_FLOOR) { F::zero() } else { g })
}

fn g_generator_route<F: Real>(source: &GSource<F>, t: F) -> Result<F, MeasureError> {
    let owned;
    let gen = match source {
        GSource::Generator(gen) => *gen,
        GSource::Dephasing(rate) => {
            owned = GkslGenerator::pure_dephasing((*rate).clone());
            &owned
        }
        GSource::Family { .. } => return Err(MeasureError::NeedsGenerator),
    };
    let l = liouvillian_superop(gen, t)?;
    let n = gen.dim * gen.dim;
    let mut samples = Vec::with_capacity(EPS_SWEEP.len());
    for &eps in EPS_SWEEP.iter() {
        let eps = F::of(eps);
        let m = linalg::identity::<F>(n) + l.matrix.map(|z| z * num_complex::Complex::new(eps, F::zero()));
        let step = Superoperator::new(m)?;
        let val = (linalg::trace_norm(&step.choi()?.matrix)? - F::one()) / eps;
        samples.push((eps, val));
    }
    let g = lagrange_extrapolate_to_zero(&samples);
    Ok(if g < F::of(G_FLOOR) { F::zero() } else { g })
}

/// Composite Simpson on `n` panels (n even).
fn simpson<F: Real, E>(
    f: &mut impl FnMut(F) -> Result<F, E>,
    a: F,
    b: F,
    n: usize,
) -> Result<F, E> {
    let h = (b - a) / F::of(n as f64);
    let mut acc = f(a)? + f(b)?;
    for k in 1..n {
        let w = if k % 2 == 1 { F::of(4.0) } else { F::of(2.0) };
        acc += w * f(a + h * F::of(k as f64))?;
    }
    Ok(acc * h / F::of(3.0))
}

/// Simpson with panel doubling until the relative change drops below
/// `QUAD_RTOL` (bounded by `QUAD_MAX_PANELS`). An infinite sample aborts and
/// returns +∞.
fn integrate<F: Real, E>(
    f: &mut impl FnMut(F) -> Result<F, E>,
    a: F,
    b: F,
) -> Result<F, E> {
    let hit_inf = std::cell::Cell::new(false);
    let mut guarded = |t: F| -> Result<F, E> {
        let v = f(t)?;
        if !v.finite() {
            hit_inf.set(true);
            return Ok(F::zero());
        }
        Ok(v)
    };
    let mut n = 128usize;
    let mut prev = simpson(&mut guarded, a, b, n)?;
    loop {
        if hit_inf.get() {
            return Ok(F::inf());
        }
        n *= 2;
        let cur = simpson(&mut guarded, a, b, n)?;
        if hit_inf.get() {
            return Ok(F::inf());
        }
        let scale = F::one().max(cur.abs());
        if (cur - prev).abs() <= F::of(QUAD_RTOL) * scale || n >= QUAD_MAX_PANELS {
            return Ok(cur);
        }
        prev = cur;
    }
}

/// Per-time trace sample attached to a report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: f64,
    pub values: Vec<f64>,
}

/// Optimizer provenance for sampled measures.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerInfo {
    pub seed: u64,
    pub budget: usize,
    pub iterations: usize,
    pub best_witness: Option<String>,
}

/// Result of one measure evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureReport {
    pub kind: String,
    pub interval: [f64; 2],
    pub value: f64,
    pub normalized: Option<f64>,
    /// Column labels for `trace` entries.
    pub trace_labels: Vec<String>,
    pub trace: Vec<TraceSample>,
    pub optimizer: Option<OptimizerInfo>,
    pub lower_bound: bool,
    pub singular: bool,
}

const TRACE_POINTS: usize = 257;

fn g_trace<F: Real>(
    source: &GSource<F>,
    route: GRoute,
    a: F,
    b: F,
) -> Result<(Vec<TraceSample>, bool), MeasureError> {
    let mut out = Vec::with_capacity(TRACE_POINTS);
    let mut singular = false;
    for k in 0..TRACE_POINTS {
        let t = a + (b - a) * F::of(k as f64) / F::of((TRACE_POINTS - 1) as f64);
        let s = g_function(source, t, route)?;
        singular |= s.singular;
        out.push(TraceSample {
            t: t.to_f64(),
            values: vec![s.g.to_f64(), s.gbar().to_f64()],
        });
    }
    Ok((out, singular))
}

/// `N_RHP = ∫_I g(t) dt`; +∞ if any singular instant is hit.
pub fn rhp_measure<F: Real>(
    source: &GSource<F>,
    route: GRoute,
    a: F,
    b: F,
) -> Result<MeasureReport, MeasureError> {
    if b <= a {
        return Err(MeasureError::InvalidInterval);
    }
    let mut f = |t: F| g_function(source, t, route).map(|s| s.g);
    let value = integrate(&mut f, a, b)?;
    let (trace, singular) = g_trace(source, route, a, b)?;
    Ok(MeasureReport {
        kind: "rhp".into(),
        interval: [a.to_f64(), b.to_f64()],
        value: value.max(F::zero()).to_f64(),
        normalized: None,
        trace_labels: vec!["g".into(), "gbar".into()],
        trace,
        optimizer: None,
        lower_bound: false,
        singular,
    })
}

/// Normalized degree `𝒟 = ∫ tanh g / ∫ χ[ḡ > θ]`, in [0, 1], with 0/0 = 0.
pub fn rhp_degree<F: Real>(
    source: &GSource<F>,
    route: GRoute,
    a: F,
    b: F,
) -> Result<MeasureReport, MeasureError> {
    if b <= a {
        return Err(MeasureError::InvalidInterval);
    }
    let theta = F::of(INDICATOR_THRESHOLD);
    let mut num = |t: F| g_function(source, t, route).map(|s| s.gbar());
    let numerator = integrate(&mut num, a, b)?;
    let mut den = |t: F| {
        g_function(source, t, route)
            .map(|s| if s.gbar() > theta { F::one() } else { F::zero() })
    };
    let denominator = integrate(&mut den, a, b)?;
    let value = if denominator <= F::zero() || numerator <= F::zero() {
        F::zero()
    } else {
        (numerator / denominator).clamp(F::zero(), F::one())
    };
    let (trace, singular) = g_trace(source, route, a, b)?;
    Ok(MeasureReport {
        kind: "rhp_degree".into(),
        interval: [a.to_f64(), b.to_f64()],
        value: value.to_f64(),
        normalized: Some(value.to_f64()),
        trace_labels: vec!["g".into(), "gbar".into()],
        trace,
        optimizer: None,
        lower_bound: false,
        singular,
    })
}

/// Decay-rate measure output: total `N_γ`, per-channel weights `F_j` and the
/// non-Markovianity index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayRateReport {
    pub report: MeasureReport,
    pub per_channel: Vec<f64>,
    pub index: usize,
    /// `(2/d)·N_γ`, which must reproduce `N_RHP`.
    pub rhp_cross_check: f64,
}

/// `N_γ = ∫_I Σ_j max(−γ_j, 0) dt` from the canonical form, plus the count
/// of channels with non-vanishing integrated negative weight.
pub fn decay_rate_measure<F: Real>(
    gen: &GkslGenerator<F>,
    a: F,
    b: F,
) -> Result<DecayRateReport, MeasureError> {
    if b <= a {
        return Err(MeasureError::InvalidInterval);
    }
    let m = gen.dim * gen.dim - 1;
    let f_at = |t: F| -> Result<Vec<F>, MeasureError> {
        let cf = crate::dynamics::canonical_form(gen, t)?;
        Ok(cf.rates.iter().map(|&g| (-g).max(F::zero())).collect())
    };
    let mut per_channel = Vec::with_capacity(m);
    for j in 0..m {
        let mut fj = |t: F| f_at(t).map(|v| v[j]);
        per_channel.push(integrate(&mut fj, a, b)?);
    }
    let total: F = per_channel.iter().copied().sum();
    let theta = F::of(INDICATOR_THRESHOLD);
    let index = per_channel.iter().filter(|&&w| w > theta).count();
    let mut trace = Vec::with_capacity(TRACE_POINTS);
    for k in 0..TRACE_POINTS {
        let t = a + (b - a) * F::of(k as f64) / F::of((TRACE_POINTS - 1) as f64);
        let f = f_at(t)?;
        trace.push(TraceSample {
            t: t.to_f64(),
            values: f.iter().map(|x| x.to_f64()).collect(),
        });
    }
    Ok(DecayRateReport {
        report: MeasureReport {
            kind: "decay_rate".into(),
            interval: [a.to_f64(), b.to_f64()],
            value: total.to_f64(),
            normalized: None,
            trace_labels: (1..=m).map(|j| format!("f{j}")).collect(),
            trace,
            optimizer: None,
            lower_bound: false,
            singular: false,
        },
        per_channel: per_channel.iter().map(|x| x.to_f64()).collect(),
        index,
        rhp_cross_check: (F::of(2.0) / F::of(gen.dim as f64) * total).to_f64(),
    })
}

/// Number of canonical channels with nonzero integrated negative rate.
pub fn nm_index<F: Real>(gen: &GkslGenerator<F>, a: F, b: F) -> Result<usize, MeasureError> {
    Ok(decay_rate_measure(gen, a, b)?.index)
}

/// Budgets and determinism knobs for the sampled optimizers.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OptimizerOptions {
    pub seed: u64,
    /// Random-candidate count for Helstrom / k-divisibility sampling.
    pub budget: usize,
    /// Bloch-angle grid resolution per axis for the d = 2 BLP search.
    pub grid: usize,
    /// Nelder-Mead refinement iterations.
    pub nm_iterations: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self { seed: 0, budget: 2000, grid: 24, nm_iterations: 200 }
    }
}

/// σ(t) at a stored time: centered finite difference of the trace distance
/// between the evolved pair (one-sided at the grid ends).
pub fn blp_sigma<F: Real>(
    fam: &PropagatorFamily<F>,
    rho1: &DensityMatrix<F>,
    rho2: &DensityMatrix<F>,
    t: F,
) -> Result<F, MeasureError> {
    let series = distance_series(fam, rho1, rho2)?;
    let k = fam
        .times
        .iter()
        .enumerate()
        .min_by(|(_, x), (_, y)| {
            (**x - t).abs().partial_cmp(&(**y - t).abs()).expect("finite times")
        })
        .map(|(i, _)| i)
        .expect("non-empty family");
    let n = series.len();
    if n < 2 {
        return Err(MeasureError::FamilyTooShort);
    }
    let (lo, hi) = if k == 0 {
        (0, 1)
    } else if k == n - 1 {
        (n - 2, n - 1)
    } else {
        (k - 1, k + 1)
    };
    Ok((series[hi] - series[lo]) / (fam.times[hi] - fam.times[lo]))
}

fn distance_series<F: Real>(
    fam: &PropagatorFamily<F>,
    rho1: &DensityMatrix<F>,
    rho2: &DensityMatrix<F>,
) -> Result<Vec<F>, MeasureError> {
    let delta = &rho1.matrix - &rho2.matrix;
    fam.maps
        .iter()
        .map(|e| Ok(linalg::trace_norm(&e.apply(&delta)?)? / F::of(2.0)))
        .collect()
}

fn positive_increments<F: Real>(series: &[F]) -> F {
    let floor = F::of(REVIVAL_FLOOR);
    series
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&d| d > floor)
        .fold(F::zero(), |a, d| a + d)
}

fn bloch_pure_pair<F: Real>(theta: F, phi: F) -> (DensityMatrix<F>, DensityMatrix<F>) {
    let c = num_complex::Complex::new((theta / F::of(2.0)).cos(), F::zero());
    let s = num_complex::Complex::new(
        (theta / F::of(2.0)).sin() * phi.cos(),
        (theta / F::of(2.0)).sin() * phi.sin(),
    );
    let psi = nalgebra::dvector![c, s];
    // antipodal partner
    let psi_perp = nalgebra::dvector![-s.conj(), c];
    (DensityMatrix::pure(&psi), DensityMatrix::pure(&psi_perp))
}

/// Minimal Nelder-Mead on 2 parameters (reflection/expansion/contraction/
/// shrink with standard coefficients).
pub(crate) fn nelder_mead_2d<F: Real>(
    mut f: impl FnMut([F; 2]) -> F,
    start: [F; 2],
    step: F,
    iterations: usize,
) -> ([F; 2], F) {
    let mut simplex = vec![
        start,
        [start[0] + step, start[1]],
        [start[0], start[1] + step],
    ];
    let mut values: Vec<F> = simplex.iter().map(|&p| f(p)).collect();
    for _ in 0..iterations {
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("finite objective"));
        let (best, mid, worst) = (order[0], order[1], order[2]);
        let centroid = [
            (simplex[best][0] + simplex[mid][0]) / F::of(2.0),
            (simplex[best][1] + simplex[mid][1]) / F::of(2.0),
        ];
        let reflect = [
            centroid[0] + (centroid[0] - simplex[worst][0]),
            centroid[1] + (centroid[1] - simplex[worst][1]),
        ];
        let fr = f(reflect);
        if fr < values[best] {
            let expand = [
                centroid[0] + F::of(2.0) * (centroid[0] - simplex[worst][0]),
                centroid[1] + F::of(2.0) * (centroid[1] - simplex[worst][1]),
            ];
            let fe = f(expand);
            if fe < fr {
                simplex[worst] = expand;
                values[worst] = fe;
            } else {
                simplex[worst] = reflect;
                values[worst] = fr;
            }
        } else if fr < values[mid] {
            simplex[worst] = reflect;
            values[worst] = fr;
        } else {
            let contract = [
                centroid[0] + (simplex[worst][0] - centroid[0]) / F::of(2.0),
                centroid[1] + (simplex[worst][1] - centroid[1]) / F::of(2.0),
            ];
            let fc = f(contract);
            if fc < values[worst] {
                simplex[worst] = contract;
                values[worst] = fc;
            } else {
                for i in 0..3 {
                    if i != best {
                        simplex[i] = [
                            (simplex[i][0] + simplex[best][0]) / F::of(2.0),
                            (simplex[i][1] + simplex[best][1]) / F::of(2.0),
                        ];
                        values[i] = f(simplex[i]);
                    }
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..3 {
        if values[i] < values[best] {
            best = i;
        }
    }
    (simplex[best], values[best])
}

/// BLP quantifier: maximal total trace-distance revival over initial pairs.
/// For qubits the search runs over antipodal pure Bloch pairs (grid plus
/// Nelder-Mead refinement); for d > 2 it samples random pure pairs and the
/// result is a lower bound.
pub fn blp_measure<F: Real>(
    fam: &PropagatorFamily<F>,
    opts: &OptimizerOptions,
) -> Result<MeasureReport, MeasureError> {
    if fam.len() < 2 {
        return Err(MeasureError::FamilyTooShort);
    }
    let d = fam.dim;
    let (value, best_pair, best_label, iterations, lower_bound) = if d == 2 {
        let n = opts.grid;
        let evals: Vec<(usize, usize, F)> = (0..n * n)
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx / n, idx % n);
                let theta = F::of(std::f64::consts::PI) * (F::of(i as f64) + F::of(0.5))
                    / F::of(n as f64);
                let phi = F::of(2.0 * std::f64::consts::PI) * F::of(j as f64) / F::of(n as f64);
                let (r1, r2) = bloch_pure_pair(theta, phi);
                let v = distance_series(fam, &r1, &r2).map(|s| positive_increments(&s));
                v.map(|v| (i, j, v))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut best = (F::of(-1.0), F::zero(), F::zero());
        for (i, j, v) in evals {
            if v > best.0 {
                let theta =
                    F::of(std::f64::consts::PI) * (F::of(i as f64) + F::of(0.5)) / F::of(n as f64);
                let phi = F::of(2.0 * std::f64::consts::PI) * F::of(j as f64) / F::of(n as f64);
                best = (v, theta, phi);
            }
        }
        let objective = |p: [F; 2]| -> F {
            let (r1, r2) = bloch_pure_pair(p[0], p[1]);
            match distance_series(fam, &r1, &r2) {
                Ok(s) => -positive_increments(&s),
                Err(_) => F::zero(),
            }
        };
        let step = F::of(std::f64::consts::PI) / F::of(n as f64);
        let (p, neg_v) = nelder_mead_2d(objective, [best.1, best.2], step, opts.nm_iterations);
        let value = (-neg_v).max(best.0).max(F::zero());
        let (theta, phi) = if -neg_v >= best.0 { (p[0], p[1]) } else { (best.1, best.2) };
        let pair = bloch_pure_pair(theta, phi);
        let label = format!("bloch_pair theta={:.12e} phi={:.12e}", theta.to_f64(), phi.to_f64());
        (value, pair, label, opts.nm_iterations, false)
    } else {
        let mut rng = crate::testutil::rng(opts.seed);
        let mut best_v = F::of(-1.0);
        let mut best_pair = None;
        let mut best_idx = 0usize;
        for c in 0..opts.budget {
            let r1 = DensityMatrix::pure(&crate::sampling::random_pure::<F>(d, &mut rng));
            let r2 = DensityMatrix::pure(&crate::sampling::random_pure::<F>(d, &mut rng));
            let v = positive_increments(&distance_series(fam, &r1, &r2)?);
            if v > best_v {
                best_v = v;
                best_pair = Some((r1, r2));
                best_idx = c;
            }
        }
        let pair = best_pair.expect("budget > 0");
        (
            best_v.max(F::zero()),
            pair,
            format!("random_pure_pair index={best_idx}"),
            0,
            true,
        )
    };
    // trace: evolved distance and its finite-difference slope for the winner
    let series = distance_series(fam, &best_pair.0, &best_pair.1)?;
    let mut trace = Vec::with_capacity(series.len());
    for (k, (&t, &dval)) in fam.times.iter().zip(series.iter()).enumerate() {
        let sigma = if k == 0 {
            (series[1] - series[0]) / (fam.times[1] - fam.times[0])
        } else if k == series.len() - 1 {
            (series[k] - series[k - 1]) / (fam.times[k] - fam.times[k - 1])
        } else {
            (series[k + 1] - series[k - 1]) / (fam.times[k + 1] - fam.times[k - 1])
        };
        trace.push(TraceSample { t: t.to_f64(), values: vec![dval.to_f64(), sigma.to_f64()] });
    }
    Ok(MeasureReport {
        kind: "blp".into(),
        interval: [fam.times[0].to_f64(), fam.times[fam.len() - 1].to_f64()],
        value: value.to_f64(),
        normalized: None,
        trace_labels: vec!["trace_distance".into(), "sigma".into()],
        trace,
        optimizer: Some(OptimizerInfo {
            seed: opts.seed,
            budget: if d == 2 { opts.grid * opts.grid } else { opts.budget },
            iterations,
            best_witness: Some(best_label),
        }),
        lower_bound,
        singular: false,
    })
}

/// A sampled Helstrom candidate on system ⊗ ancilla.
struct HelstromCandidate<F: Real> {
    q: F,
    delta: CMatrix<F>,
    label: String,
}

fn helstrom_candidates<F: Real>(
    d: usize,
    ancilla: usize,
    budget: usize,
    seed: u64,
    rng_salt: u64,
) -> Vec<HelstromCandidate<F>> {
    let mut rng = crate::testutil::rng(seed ^ rng_salt);
    let n = d * ancilla;
    let mut out = Vec::with_capacity(budget + 1);
    if d == 2 {
        // the |±⟩ trace-distance witness, embedded on the first ancilla level
        let h = F::of(0.5);
        let plus = nalgebra::dvector![
            num_complex::Complex::new(h.sqrt(), F::zero()),
            num_complex::Complex::new(h.sqrt(), F::zero())
        ];
        let minus = nalgebra::dvector![
            num_complex::Complex::new(h.sqrt(), F::zero()),
            num_complex::Complex::new(-h.sqrt(), F::zero())
        ];
        let embed = |psi: &crate::linalg::CVector<F>| {
            let mut v = crate::linalg::CVector::<F>::zeros(n);
            for s in 0..2 {
                v[s * ancilla] = psi[s];
            }
            let p = &v * v.adjoint();
            p
        };
        out.push(HelstromCandidate {
            q: h,
            delta: (embed(&plus) - embed(&minus)).map(|z| z * num_complex::Complex::new(h, F::zero())),
            label: "plus_minus_witness".into(),
        });
    }
    for c in 0..budget {
        let p1 = crate::sampling::random_pure::<F>(n, &mut rng);
        let p2 = crate::sampling::random_pure::<F>(n, &mut rng);
        let q = F::of(rng.random::<f64>());
        let delta = (&p1 * p1.adjoint()).map(|z| z * num_complex::Complex::new(q, F::zero()))
            - (&p2 * p2.adjoint()).map(|z| z * num_complex::Complex::new(F::one() - q, F::zero()));
        out.push(HelstromCandidate { q, delta, label: format!("random index={c}") });
    }
    out
}

fn trace_norm_series<F: Real>(
    extended: &[Superoperator<F>],
    delta: &CMatrix<F>,
) -> Result<Vec<F>, MeasureError> {
    extended
        .iter()
        .map(|e| Ok(linalg::trace_norm(&e.apply(delta)?)?))
        .collect()
}

fn extend_family<F: Real>(
    fam: &PropagatorFamily<F>,
    ancilla: usize,
) -> Result<Vec<Superoperator<F>>, MeasureError> {
    fam.maps
        .iter()
        .map(|m| {
            if ancilla == 1 {
                Ok(m.clone())
            } else {
                Ok(extend_superop(m, ancilla)?)
            }
        })
        .collect()
}

/// Helstrom-norm measure: sampled lower bound on the total trace-norm
/// revival of biased state pairs extended by an ancilla (dimension d unless
/// overridden).
pub fn helstrom_measure<F: Real>(
    fam: &PropagatorFamily<F>,
    ancilla_dim: Option<usize>,
    opts: &OptimizerOptions,
) -> Result<MeasureReport, MeasureError> {
    if fam.len() < 2 {
        return Err(MeasureError::FamilyTooShort);
    }
    let ancilla = ancilla_dim.unwrap_or(fam.dim);
    let extended = extend_family(fam, ancilla)?;
    let candidates = helstrom_candidates::<F>(fam.dim, ancilla, opts.budget, opts.seed, 0x48);
    let scored: Vec<(F, Vec<F>)> = candidates
        .par_iter()
        .map(|c| {
            let series = trace_norm_series(&extended, &c.delta)?;
            Ok((positive_increments(&series), series))
        })
        .collect::<Result<Vec<_>, MeasureError>>()?;
    let mut best = 0usize;
    for i in 1..scored.len() {
        if scored[i].0 > scored[best].0 {
            best = i;
        }
    }
    let (value, series) = &scored[best];
    let trace = fam
        .times
        .iter()
        .zip(series.iter())
        .map(|(&t, &v)| TraceSample { t: t.to_f64(), values: vec![v.to_f64()] })
        .collect();
    Ok(MeasureReport {
        kind: "helstrom".into(),
        interval: [fam.times[0].to_f64(), fam.times[fam.len() - 1].to_f64()],
        value: value.max(F::zero()).to_f64(),
        normalized: None,
        trace_labels: vec!["helstrom_norm".into()],
        trace,
        optimizer: Some(OptimizerInfo {
            seed: opts.seed,
            budget: opts.budget,
            iterations: 0,
            best_witness: Some(format!(
                "{} q={:.12e}",
                candidates[best].label,
                candidates[best].q.to_f64()
            )),
        }),
        lower_bound: true,
        singular: false,
    })
}

/// k-divisibility departure degree `𝒟_ND(k) = sup N⁺/|N⁻| ∈ [0, 1]` over
/// sampled Helstrom matrices with ancilla dimension k. Candidate sets for
/// lower levels are embedded, so the degree is monotone in k on shared
/// seeds.
pub fn k_divisibility_degree<F: Real>(
    fam: &PropagatorFamily<F>,
    k: usize,
    opts: &OptimizerOptions,
) -> Result<MeasureReport, MeasureError> {
    if k < 1 || k > fam.dim {
        return Err(MeasureError::BadK);
    }
    if fam.len() < 2 {
        return Err(MeasureError::FamilyTooShort);
    }
    let extended = extend_family(fam, k)?;
    // levels 1..=k, each with its own seeded candidate set, embedded into
    // ancilla dimension k on the first `level` ancilla basis states
    let mut candidates: Vec<(String, CMatrix<F>)> = Vec::new();
    for level in 1..=k {
        for c in helstrom_candidates::<F>(fam.dim, level, opts.budget, opts.seed, level as u64) {
            let delta = embed_ancilla(&c.delta, fam.dim, level, k);
            candidates.push((format!("level={level} {}", c.label), delta));
        }
    }
    let floor = F::of(REVIVAL_FLOOR);
    let scored: Vec<(F, Vec<F>)> = candidates
        .par_iter()
        .map(|(_, delta)| {
            let series = trace_norm_series(&extended, delta)?;
            let mut pos = F::zero();
            let mut neg = F::zero();
            for w in series.windows(2) {
                let d = w[1] - w[0];
                if d > floor {
                    pos += d;
                } else if d < -floor {
                    neg += -d;
                }
            }
            let ratio = if pos <= F::zero() || neg <= F::zero() {
                F::zero()
            } else {
                (pos / neg).clamp(F::zero(), F::one())
            };
            Ok((ratio, series))
        })
        .collect::<Result<Vec<_>, MeasureError>>()?;
    let mut best = 0usize;
    for i in 1..scored.len() {
        if scored[i].0 > scored[best].0 {
            best = i;
        }
    }
    let (value, series) = &scored[best];
    let trace = fam
        .times
        .iter()
        .zip(series.iter())
        .map(|(&t, &v)| TraceSample { t: t.to_f64(), values: vec![v.to_f64()] })
        .collect();
    Ok(MeasureReport {
        kind: format!("k_divisibility_{k}"),
        interval: [fam.times[0].to_f64(), fam.times[fam.len() - 1].to_f64()],
        value: value.to_f64(),
        normalized: Some(value.to_f64()),
        trace_labels: vec!["helstrom_norm".into()],
        trace,
        optimizer: Some(OptimizerInfo {
            seed: opts.seed,
            budget: candidates.len(),
            iterations: 0,
            best_witness: Some(candidates[best].0.clone()),
        }),
        lower_bound: true,
        singular: false,
    })
}

/// Embeds an operator on `C^d ⊗ C^level` into `C^d ⊗ C^k` (k ≥ level) on the
/// first `level` ancilla basis states.
fn embed_ancilla<F: Real>(m: &CMatrix<F>, d: usize, level: usize, k: usize) -> CMatrix<F> {
    if level == k {
        return m.clone();
    }
    let mut out = CMatrix::<F>::zeros(d * k, d * k);
    for s in 0..d {
        for a in 0..level {
            for sp in 0..d {
                for ap in 0..level {
                    out[(s * k + a, sp * k + ap)] = m[(s * level + a, sp * level + ap)];
                }
            }
        }
    }
    out
}
