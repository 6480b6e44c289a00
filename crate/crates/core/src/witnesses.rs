//! Monotonicity-based witnesses: per-time series of quantities that are
//! monotone under divisible (Markovian) dynamics, with a violation report
//! listing every time step where the monotone direction is broken.
//!
//! Entropic series use natural logarithms throughout; convert with
//! [`crate::states::LogBase`] when base-2 output is wanted.

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channels::{extend_superop, ChannelError, Superoperator};
use crate::dynamics::{affine_representation, DynamicsError, PropagatorFamily};
use crate::linalg::{self, LinalgError, Subsystem};
use crate::measures::nelder_mead_2d;
use crate::scalar::Real;
use crate::states::{
    fidelity, relative_entropy, trace_distance, von_neumann_entropy, DensityMatrix, StateError,
};

/// Per-step monotonicity tolerance; smaller wiggles are integrator noise.
pub const MONOTONICITY_TOL: f64 = 1e-7;
/// δθ sweep for the finite-difference Fisher-information routes.
pub const THETA_SWEEP: [f64; 2] = [1e-3, 5e-4];
/// Maximum allowed disagreement between the SLD and Bures QFI routes.
pub const QFI_CROSS_TOL: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum WitnessError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("family must contain at least two times")]
    FamilyTooShort,
    #[error("witness requires a qubit family, got dim {0}")]
    NeedsQubit(usize),
    #[error("QFI routes disagree by {0:.3e} at t = {1}")]
    QfiRouteMismatch(f64, f64),
}

/// Expected behaviour of a witness under Markovian dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    NonIncreasing,
    NonDecreasing,
}

/// Provenance details of one witness run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct WitnessConfig {
    pub initial_states: String,
    pub seed: Option<u64>,
    pub budget: Option<usize>,
    /// Free-form caveats (lower-bound sampling, support restrictions, …).
    pub flags: Vec<String>,
}

/// A sampled monotone quantity with its violation report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WitnessSeries {
    pub kind: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub direction: Direction,
    /// `(t, magnitude)` for every step breaking the direction by more than
    /// the monotonicity tolerance.
    pub violations: Vec<(f64, f64)>,
    pub config: WitnessConfig,
}

impl WitnessSeries {
    fn build(
        kind: &str,
        times: Vec<f64>,
        values: Vec<f64>,
        direction: Direction,
        config: WitnessConfig,
    ) -> Self {
        let mut violations = Vec::new();
        for k in 1..values.len() {
            let (prev, cur) = (values[k - 1], values[k]);
            if !prev.is_finite() || !cur.is_finite() {
                continue;
            }
            let delta = match direction {
                Direction::NonIncreasing => cur - prev,
                Direction::NonDecreasing => prev - cur,
            };
            if delta > MONOTONICITY_TOL {
                violations.push((times[k], delta));
            }
        }
        Self { kind: kind.into(), times, values, direction, violations, config }
    }

    pub fn is_monotone(&self) -> bool {
        self.violations.is_empty()
    }
}

fn check_family<F: Real>(fam: &PropagatorFamily<F>) -> Result<(), WitnessError> {
    if fam.len() < 2 {
        return Err(WitnessError::FamilyTooShort);
    }
    Ok(())
}

fn times_f64<F: Real>(fam: &PropagatorFamily<F>) -> Vec<f64> {
    fam.times.iter().map(|t| t.to_f64()).collect()
}

/// `D₁[ρ₁(t), ρ₂(t)]`; contracts under every positive TP intermediate map.
pub fn trace_distance_witness<F: Real>(
    fam: &PropagatorFamily<F>,
    rho1: &DensityMatrix<F>,
    rho2: &DensityMatrix<F>,
) -> Result<WitnessSeries, WitnessError> {
    check_family(fam)?;
    let values = fam
        .maps
        .iter()
        .map(|e| {
            let a = e.apply_density(rho1)?;
            let b = e.apply_density(rho2)?;
            Ok(trace_distance(&a, &b)?.to_f64())
        })
        .collect::<Result<Vec<_>, WitnessError>>()?;
    Ok(WitnessSeries::build(
        "trace_distance",
        times_f64(fam),
        values,
        Direction::NonIncreasing,
        WitnessConfig { initial_states: "user pair".into(), ..Default::default() },
    ))
}

/// Uhlmann fidelity of the evolved pair; non-decreasing under CPTP maps.
pub fn fidelity_witness<F: Real>(
    fam: &PropagatorFamily<F>,
    rho1: &DensityMatrix<F>,
    rho2: &DensityMatrix<F>,
) -> Result<WitnessSeries, WitnessError> {
    check_family(fam)?;
    let values = fam
        .maps
        .iter()
        .map(|e| {
            let a = e.apply_density(rho1)?;
            let b = e.apply_density(rho2)?;
            Ok(fidelity(&a, &b)?.to_f64())
        })
        .collect::<Result<Vec<_>, WitnessError>>()?;
    Ok(WitnessSeries::build(
        "fidelity",
        times_f64(fam),
        values,
        Direction::NonDecreasing,
        WitnessConfig { initial_states: "user pair".into(), ..Default::default() },
    ))
}

/// Relative entropy `S[ρ₁(t)‖ρ₂(t)]` in nats; +∞ samples are legitimate when
/// the supports split (typically at t₀ for orthogonal pure inputs).
pub fn relative_entropy_witness<F: Real>(
    fam: &PropagatorFamily<F>,
    rho1: &DensityMatrix<F>,
    rho2: &DensityMatrix<F>,
) -> Result<WitnessSeries, WitnessError> {
    check_family(fam)?;
    let values = fam
        .maps
        .iter()
        .map(|e| {
            let a = e.apply_density(rho1)?;
            let b = e.apply_density(rho2)?;
            Ok(relative_entropy(&a, &b)?.to_f64())
        })
        .collect::<Result<Vec<_>, WitnessError>>()?;
    Ok(WitnessSeries::build(
        "relative_entropy",
        times_f64(fam),
        values,
        Direction::NonIncreasing,
        WitnessConfig { initial_states: "user pair".into(), ..Default::default() },
    ))
}

fn sld_qfi<F: Real>(rho: &DensityMatrix<F>, drho: &linalg::CMatrix<F>) -> Result<F, WitnessError> {
    let (p, v) = rho.spectrum()?;
    let d = rho.dim;
    let in_basis = v.adjoint() * drho * &v;
    let mut qfi = F::zero();
    let support = F::of(1e-12);
    for i in 0..d {
        for j in 0..d {
            let denom = p[i] + p[j];
            if denom > support {
                let a = in_basis[(i, j)];
                qfi += F::of(2.0) * (a.re * a.re + a.im * a.im) / denom;
            }
        }
    }
    Ok(qfi)
}

/// Quantum Fisher information of the evolved parametric family
/// `θ ↦ E_t(ρ_θ)` at `θ₀`, with the SLD route cross-checked against the
/// infinitesimal-Bures route at every time.
///
/// Returns the QFI series (non-increasing under Markovian dynamics) together
/// with its finite-difference flow `dQFI/dt` on the grid.
pub fn qfi_flow_witness<F: Real>(
    fam: &PropagatorFamily<F>,
    rho_of_theta: &dyn Fn(F) -> Result<DensityMatrix<F>, StateError>,
    theta0: F,
) -> Result<(WitnessSeries, Vec<f64>), WitnessError> {
    check_family(fam)?;
    let mut values = Vec::with_capacity(fam.len());
    let mut rank_flagged = false;
    let mut bures_skipped = false;
    for (k, e) in fam.maps.iter().enumerate() {
        // SLD route: Richardson over the centered-difference ∂θρ
        let mut sld_samples = Vec::with_capacity(THETA_SWEEP.len());
        let rho_t = e.apply_density(&rho_of_theta(theta0)?)?;
        let (p, _) = rho_t.spectrum()?;
        // fidelity differences of order δθ² lose too many digits once an
        // eigenvalue of ρ_t drops near zero
        let near_rank_change = p.iter().any(|&x| x < F::of(1e-4));
        if p.iter().any(|&x| x < F::of(1e-12)) {
            rank_flagged = true;
        }
        for &dt in THETA_SWEEP.iter() {
            let dt = F::of(dt);
            let plus = e.apply_density(&rho_of_theta(theta0 + dt)?)?;
            let minus = e.apply_density(&rho_of_theta(theta0 - dt)?)?;
            let drho = (&plus.matrix - &minus.matrix)
                .map(|z| z / Complex::new(F::of(2.0) * dt, F::zero()));
            sld_samples.push((dt * dt, sld_qfi(&rho_t, &drho)?));
        }
        let sld = richardson2(&sld_samples);

        // Bures route: 8(1 − √F(ρ_θ, ρ_{θ+δθ}))/δθ²
        let mut bures_samples = Vec::with_capacity(THETA_SWEEP.len());
        for &dt in THETA_SWEEP.iter() {
            let dt = F::of(dt);
            let shifted = e.apply_density(&rho_of_theta(theta0 + dt)?)?;
            let f = fidelity(&rho_t, &shifted)?;
            bures_samples.push((dt * dt, F::of(8.0) * (F::one() - f.sqrt()) / (dt * dt)));
        }
        let bures = richardson2(&bures_samples);
        if near_rank_change {
            // the finite-difference Bures route is unreliable where an
            // eigenvalue of ρ_t crosses zero; trust the SLD value there
            bures_skipped = true;
        } else if (sld - bures).abs() > F::of(QFI_CROSS_TOL) {
            return Err(WitnessError::QfiRouteMismatch(
                (sld - bures).abs().to_f64(),
                fam.times[k].to_f64(),
            ));
        }
        values.push(sld.max(F::zero()).to_f64());
    }
    let times = times_f64(fam);
    let mut flow = Vec::with_capacity(values.len());
    for k in 0..values.len() {
        let (lo, hi) = if k == 0 {
            (0, 1)
        } else if k == values.len() - 1 {
            (k - 1, k)
        } else {
            (k - 1, k + 1)
        };
        flow.push((values[hi] - values[lo]) / (times[hi] - times[lo]));
    }
    let mut config = WitnessConfig { initial_states: "parametric family".into(), ..Default::default() };
    if rank_flagged {
        config.flags.push("sld_restricted_to_support".into());
    }
    if bures_skipped {
        config.flags.push("bures_crosscheck_skipped_near_rank_change".into());
    }
    Ok((
        WitnessSeries::build("qfi", times, values, Direction::NonIncreasing, config),
        flow,
    ))
}

fn richardson2<F: Real>(samples: &[(F, F)]) -> F {
    // two-point Lagrange extrapolation in the squared step
    let (x0, y0) = samples[0];
    let (x1, y1) = samples[1];
    (y1 * x0 - y0 * x1) / (x0 - x1)
}

fn purification<F: Real>(rho: &DensityMatrix<F>) -> Result<linalg::CVector<F>, WitnessError> {
    let (p, v) = rho.spectrum()?;
    let d = rho.dim;
    let mut psi = linalg::CVector::<F>::zeros(d * d);
    for i in 0..d {
        if p[i] <= F::zero() {
            continue;
        }
        let w = Complex::new(p[i].sqrt(), F::zero());
        for s in 0..d {
            psi[s * d + i] += w * v[(s, i)];
        }
    }
    Ok(psi)
}

fn entropies_for_input<F: Real>(
    e: &Superoperator<F>,
    extended: &Superoperator<F>,
    rho: &DensityMatrix<F>,
) -> Result<(F, F, F), WitnessError> {
    let d = rho.dim;
    let psi = purification(rho)?;
    let joint0 = &psi * psi.adjoint();
    let joint = extended.apply(&joint0)?;
    let s_in = von_neumann_entropy(rho)?;
    let s_out = von_neumann_entropy(&e.apply_density(rho)?)?;
    let s_joint = von_neumann_entropy(&DensityMatrix::new_unchecked(joint.clone()))?;
    let _ = d;
    Ok((s_in, s_out, s_joint))
}

/// Entanglement-assisted capacity `C_ea` and coherent information `Q` per
/// time, in nats. Unital qubit channels use the maximally mixed input (the
/// exact optimum); other channels are sampled and flagged as lower bounds.
pub fn capacity_witness<F: Real>(
    fam: &PropagatorFamily<F>,
    seed: u64,
    budget: usize,
) -> Result<(WitnessSeries, WitnessSeries), WitnessError> {
    check_family(fam)?;
    let d = fam.dim;
    let eye = linalg::identity::<F>(d);
    let unital_qubit = d == 2
        && fam.maps.iter().all(|e| {
            e.apply(&eye)
                .map(|out| linalg::fnorm(&(out - &eye)) < F::of(1e-9))
                .unwrap_or(false)
        });
    let mut inputs: Vec<DensityMatrix<F>> = Vec::new();
    let mut flags = Vec::new();
    let mut lower_bound = false;
    if unital_qubit {
        inputs.push(DensityMatrix::maximally_mixed(d));
        flags.push("unital_qubit_maximally_mixed_ansatz".into());
    } else {
        let mut rng = crate::testutil::rng(seed);
        inputs.push(DensityMatrix::maximally_mixed(d));
        for _ in 0..budget {
            inputs.push(DensityMatrix::new_unchecked(
                crate::sampling::random_density_matrix::<F>(d, &mut rng),
            ));
        }
        flags.push("sampled_input_ansatz".into());
        lower_bound = true;
    }
    let mut cea = Vec::with_capacity(fam.len());
    let mut q = Vec::with_capacity(fam.len());
    for e in &fam.maps {
        let ext = extend_superop(e, d)?;
        let mut best_cea = -F::inf();
        let mut best_q = -F::inf();
        for rho in &inputs {
            let (s_in, s_out, s_joint) = entropies_for_input(e, &ext, rho)?;
            best_cea = best_cea.max(s_in + s_out - s_joint);
            best_q = best_q.max(s_out - s_joint);
        }
        cea.push(best_cea.to_f64());
        q.push(best_q.to_f64());
    }
    let config = WitnessConfig {
        initial_states: "optimized channel input".into(),
        seed: if lower_bound { Some(seed) } else { None },
        budget: if lower_bound { Some(budget) } else { None },
        flags: {
            let mut f = flags;
            if lower_bound {
                f.push("lower_bound".into());
            }
            f
        },
    };
    let times = times_f64(fam);
    Ok((
        WitnessSeries::build("capacity_cea", times.clone(), cea, Direction::NonIncreasing, config.clone()),
        WitnessSeries::build("capacity_q", times, q, Direction::NonIncreasing, config),
    ))
}

/// `|det M(t, t₀)|` from the Bloch-space affine representation; the volume
/// of the accessible state set, non-increasing under divisible dynamics.
pub fn bloch_volume_witness<F: Real>(
    fam: &PropagatorFamily<F>,
) -> Result<WitnessSeries, WitnessError> {
    check_family(fam)?;
    let mut values = Vec::with_capacity(fam.len());
    let mut trace_caveat = false;
    for e in &fam.maps {
        let (m, _) = affine_representation(e)?;
        if m.trace() <= F::zero() {
            trace_caveat = true;
        }
        values.push(m.determinant().abs().to_f64());
    }
    let mut config = WitnessConfig { initial_states: "full state set".into(), ..Default::default() };
    if trace_caveat {
        // the witness is blind to some non-Markovian dynamics in this regime
        config.flags.push("trace_of_m_nonpositive".into());
    }
    Ok(WitnessSeries::build(
        "bloch_volume",
        times_f64(fam),
        values,
        Direction::NonIncreasing,
        config,
    ))
}

/// Log-negativity `E_N = ln‖ρ^{T_A}‖₁` of the evolved maximally entangled
/// pair under `E ⊗ 1`, plus the integral of its positive increments.
pub fn entanglement_witness<F: Real>(
    fam: &PropagatorFamily<F>,
) -> Result<(WitnessSeries, f64), WitnessError> {
    check_family(fam)?;
    let d = fam.dim;
    let phi = crate::sampling::max_entangled::<F>(d);
    let proj = &phi * phi.adjoint();
    let mut values = Vec::with_capacity(fam.len());
    for e in &fam.maps {
        let joint = extend_superop(e, d)?.apply(&proj)?;
        let pt = linalg::partial_transpose(&joint, (d, d), Subsystem::A)?;
        values.push(linalg::trace_norm(&pt)?.max(F::one()).ln().to_f64());
    }
    let revival: f64 = values
        .windows(2)
        .map(|w| (w[1] - w[0]).max(0.0))
        .filter(|&x| x > MONOTONICITY_TOL)
        .sum();
    Ok((
        WitnessSeries::build(
            "entanglement",
            times_f64(fam),
            values,
            Direction::NonIncreasing,
            WitnessConfig { initial_states: "maximally entangled".into(), ..Default::default() },
        ),
        revival,
    ))
}

fn evolved_joint<F: Real>(
    e: &Superoperator<F>,
    d: usize,
) -> Result<DensityMatrix<F>, WitnessError> {
    let phi = crate::sampling::max_entangled::<F>(d);
    let proj = &phi * phi.adjoint();
    Ok(DensityMatrix::new_unchecked(extend_superop(e, d)?.apply(&proj)?))
}

/// Mutual information `I = S(ρ_S) + S(ρ_A) − S(ρ_SA)` on the evolved
/// maximally entangled state, in nats.
pub fn mutual_info_witness<F: Real>(
    fam: &PropagatorFamily<F>,
) -> Result<WitnessSeries, WitnessError> {
    check_family(fam)?;
    let d = fam.dim;
    let mut values = Vec::with_capacity(fam.len());
    for e in &fam.maps {
        let joint = evolved_joint(e, d)?;
        let rho_s = DensityMatrix::new_unchecked(linalg::partial_trace(&joint.matrix, (d, d), Subsystem::B)?);
        let rho_a = DensityMatrix::new_unchecked(linalg::partial_trace(&joint.matrix, (d, d), Subsystem::A)?);
        let i = von_neumann_entropy(&rho_s)? + von_neumann_entropy(&rho_a)?
            - von_neumann_entropy(&joint)?;
        values.push(i.max(F::zero()).to_f64());
    }
    Ok(WitnessSeries::build(
        "mutual_info",
        times_f64(fam),
        values,
        Direction::NonIncreasing,
        WitnessConfig { initial_states: "maximally entangled".into(), ..Default::default() },
    ))
}

fn is_x_state<F: Real>(m: &linalg::CMatrix<F>) -> bool {
    if m.nrows() != 4 {
        return false;
    }
    let tol = F::of(1e-12);
    let mut off = F::zero();
    for r in 0..4 {
        for c in 0..4 {
            if r != c && r + c != 3 {
                off = off.max(nalgebra::ComplexField::modulus(m[(r, c)]));
            }
        }
    }
    off <= tol
}

/// Conditional system entropy after a projective ancilla measurement along
/// the Bloch direction (θ, φ).
fn conditional_entropy<F: Real>(
    joint: &DensityMatrix<F>,
    d: usize,
    theta: F,
    phi: F,
) -> Result<F, WitnessError> {
    let half = F::of(0.5);
    let nx = theta.sin() * phi.cos();
    let ny = theta.sin() * phi.sin();
    let nz = theta.cos();
    let mut total = F::zero();
    for sign in [F::one(), -F::one()] {
        let mut proj = linalg::identity::<F>(2).map(|z| z * Complex::new(half, F::zero()));
        let paulis = [
            crate::operators::pauli_x::<F>(),
            crate::operators::pauli_y::<F>(),
            crate::operators::pauli_z::<F>(),
        ];
        for (p, w) in paulis.iter().zip([nx, ny, nz]) {
            proj += p.map(|z| z * Complex::new(sign * half * w, F::zero()));
        }
        let big = linalg::kron(&linalg::identity::<F>(d), &proj);
        let selected = &big * &joint.matrix * &big;
        let p = selected.trace().re;
        if p <= F::of(1e-14) {
            continue;
        }
        let cond = linalg::partial_trace(&selected, (d, 2), Subsystem::B)?
            .map(|z| z / Complex::new(p, F::zero()));
        total += p * von_neumann_entropy(&DensityMatrix::new_unchecked(cond))?;
    }
    Ok(total)
}

/// Quantum discord `D_A = S(ρ_A) − S(ρ_SA) + min_Π Σ p_k S(ρ_{S|k})` with
/// the minimization restricted to projective ancilla measurements (two Bloch
/// angles). X-states shortcut to the σ_z / σ_x candidates.
pub fn discord_witness<F: Real>(
    fam: &PropagatorFamily<F>,
) -> Result<WitnessSeries, WitnessError> {
    check_family(fam)?;
    let d = fam.dim;
    if d != 2 {
        return Err(WitnessError::NeedsQubit(d));
    }
    let mut values = Vec::with_capacity(fam.len());
    let mut x_fast_path = true;
    for e in &fam.maps {
        let joint = evolved_joint(e, d)?;
        let rho_a = DensityMatrix::new_unchecked(linalg::partial_trace(&joint.matrix, (d, 2), Subsystem::A)?);
        let base = von_neumann_entropy(&rho_a)? - von_neumann_entropy(&joint)?;
        let half_pi = F::of(std::f64::consts::FRAC_PI_2);
        let cond_min = if is_x_state(&joint.matrix) {
            // σ_z and σ_x measurements are the closed-form candidates
            let z = conditional_entropy(&joint, d, F::zero(), F::zero())?;
            let x = conditional_entropy(&joint, d, half_pi, F::zero())?;
            z.min(x)
        } else {
            x_fast_path = false;
            let n = 12usize;
            let mut best = (F::inf(), F::zero(), F::zero());
            for i in 0..n {
                for j in 0..n {
                    let theta = F::of(std::f64::consts::PI) * (F::of(i as f64) + F::of(0.5))
                        / F::of(n as f64);
                    let phi =
                        F::of(2.0 * std::f64::consts::PI) * F::of(j as f64) / F::of(n as f64);
                    let v = conditional_entropy(&joint, d, theta, phi)?;
                    if v < best.0 {
                        best = (v, theta, phi);
                    }
                }
            }
            let (_, refined) = nelder_mead_2d(
                |p| conditional_entropy(&joint, d, p[0], p[1]).unwrap_or(F::inf()),
                [best.1, best.2],
                F::of(std::f64::consts::PI) / F::of(n as f64),
                80,
            );
            refined.min(best.0)
        };
        values.push((base + cond_min).max(F::zero()).to_f64());
    }
    let mut config = WitnessConfig {
        initial_states: "maximally entangled".into(),
        flags: vec!["projective_measurements_only".into()],
        ..Default::default()
    };
    if x_fast_path {
        config.flags.push("x_state_fast_path".into());
    }
    Ok(WitnessSeries::build(
        "discord",
        times_f64(fam),
        values,
        Direction::NonIncreasing,
        config,
    ))
}
