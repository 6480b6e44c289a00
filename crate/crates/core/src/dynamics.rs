//! Time-dependent GKSL generators, Liouvillian superoperators, numerical
//! propagation, the canonical decay-rate form, built-in analytic models and
//! the collisional-model generator.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channels::{intermediate_map, ChannelError, InverseStrategy, Superoperator, SuperopRecord};
use crate::linalg::{self, CMatrix, LinalgError};
use crate::scalar::Real;
use crate::states::{su_basis, DensityMatrix, StateError};

/// Half-width of the exclusion zone around tangent-rate poles.
pub const POLE_EXCLUSION: f64 = 1e-3;
/// Substeps per grid interval for the Runge-Kutta propagator.
pub const RK_SUBSTEPS: usize = 8;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("rate evaluated at t = {0}, inside a pole exclusion zone")]
    PoleExclusion(f64),
    #[error("hamiltonian is not Hermitian (defect {0:.3e})")]
    NonHermitianHamiltonian(f64),
    #[error("collision unitary fails U†U = I (defect {0:.3e})")]
    NonUnitary(f64),
    #[error("table must have matching lengths and strictly increasing times")]
    BadTable,
    #[error("time grid must be ascending with at least one point")]
    BadGrid,
    #[error("unknown operator name {0:?}")]
    UnknownOperator(String),
    #[error("model spec: {0}")]
    BadModelSpec(String),
}

/// Scalar decay rate γ(t).
#[derive(Debug, Clone)]
pub enum RateFunction<F: Real> {
    Constant(F),
    /// γ(t) = sin t.
    Sine,
    /// γ(t) = tan t, with poles at π/2 + kπ.
    Tangent { delta_pole: F },
    /// γ(t) = a·e^{bt}.
    Exponential { a: F, b: F },
    /// Piecewise-linear interpolation of (tᵢ, γᵢ) samples.
    Table { times: Vec<F>, values: Vec<F> },
}

impl<F: Real> RateFunction<F> {
    pub fn tangent() -> Self {
        RateFunction::Tangent { delta_pole: F::of(POLE_EXCLUSION) }
    }

    pub fn table(times: Vec<F>, values: Vec<F>) -> Result<Self, DynamicsError> {
        if times.len() != values.len() || times.is_empty() {
            return Err(DynamicsError::BadTable);
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(DynamicsError::BadTable);
        }
        Ok(RateFunction::Table { times, values })
    }

    pub fn eval(&self, t: F) -> Result<F, DynamicsError> {
        match self {
            RateFunction::Constant(c) => Ok(*c),
            RateFunction::Sine => Ok(t.sin()),
            RateFunction::Tangent { delta_pole } => {
                let dist = (t.cos()).abs();
                // |cos t| ≈ distance to the nearest pole for small distances
                if dist < *delta_pole {
                    return Err(DynamicsError::PoleExclusion(t.to_f64()));
                }
                Ok(t.tan())
            }
            RateFunction::Exponential { a, b } => Ok(*a * (*b * t).exp()),
            RateFunction::Table { times, values } => {
                if t <= times[0] {
                    return Ok(values[0]);
                }
                if t >= times[times.len() - 1] {
                    return Ok(values[values.len() - 1]);
                }
                let i = times.partition_point(|&x| x <= t) - 1;
                let w = (t - times[i]) / (times[i + 1] - times[i]);
                Ok(values[i] * (F::one() - w) + values[i + 1] * w)
            }
        }
    }

    /// `∫_{t₀}^{t} γ(s) ds`, closed form where available (piecewise-linear
    /// quadrature for tables). For the tangent kind the closed form
    /// `ln|cos t₀| − ln|cos t|` is used, which diverges to +∞ at the poles.
    pub fn integral(&self, t0: F, t: F) -> F {
        match self {
            RateFunction::Constant(c) => *c * (t - t0),
            RateFunction::Sine => t0.cos() - t.cos(),
            RateFunction::Tangent { .. } => {
                let c = t.cos().abs();
                if c == F::zero() {
                    return F::inf();
                }
                t0.cos().abs().ln() - c.ln()
            }
            RateFunction::Exponential { a, b } => {
                if b.abs() < F::of(1e-300) {
                    *a * (t - t0)
                } else {
                    *a / *b * ((*b * t).exp() - (*b * t0).exp())
                }
            }
            RateFunction::Table { .. } => {
                // trapezoid on a fine uniform refinement of [t0, t]
                let n = 512usize;
                let h = (t - t0) / F::of(n as f64);
                let mut acc = F::zero();
                let mut prev = self.eval(t0).unwrap_or(F::zero());
                for k in 1..=n {
                    let cur = self.eval(t0 + h * F::of(k as f64)).unwrap_or(F::zero());
                    acc += (prev + cur) * h / F::of(2.0);
                    prev = cur;
                }
                acc
            }
        }
    }
}

/// Master-equation generator: constant Hamiltonian plus a list of dissipation
/// channels `(γ_k(t), V_k)`.
#[derive(Debug, Clone)]
pub struct GkslGenerator<F: Real> {
    pub dim: usize,
    pub hamiltonian: CMatrix<F>,
    pub dissipators: Vec<(RateFunction<F>, CMatrix<F>)>,
}

impl<F: Real> GkslGenerator<F> {
    pub fn new(
        hamiltonian: CMatrix<F>,
        dissipators: Vec<(RateFunction<F>, CMatrix<F>)>,
    ) -> Result<Self, DynamicsError> {
        let d = hamiltonian.nrows();
        if !hamiltonian.is_square() {
            return Err(LinalgError::NonSquare {
                rows: hamiltonian.nrows(),
                cols: hamiltonian.ncols(),
            }
            .into());
        }
        let defect = linalg::hermiticity_defect(&hamiltonian);
        if defect > F::of(crate::linalg::HERMITICITY_RTOL) * F::one().max(linalg::fnorm(&hamiltonian)) {
            return Err(DynamicsError::NonHermitianHamiltonian(defect.to_f64()));
        }
        for (_, v) in &dissipators {
            if v.nrows() != d || v.ncols() != d {
                return Err(ChannelError::DimensionMismatch(v.nrows(), d).into());
            }
        }
        Ok(Self { dim: d, hamiltonian, dissipators })
    }

    pub fn pure_dephasing(rate: RateFunction<F>) -> Self {
        Self {
            dim: 2,
            hamiltonian: CMatrix::zeros(2, 2),
            dissipators: vec![(rate, crate::operators::pauli_z())],
        }
    }
}

/// Matrix form of `L_t` on vec'd operators:
/// `−i(I⊗H − Hᵗ⊗I) + Σ_k γ_k(t)[conj(V)⊗V − ½I⊗(V†V) − ½(V†V)ᵗ⊗I]`.
pub fn liouvillian_superop<F: Real>(
    gen: &GkslGenerator<F>,
    t: F,
) -> Result<Superoperator<F>, DynamicsError> {
    let d = gen.dim;
    let eye = linalg::identity::<F>(d);
    let h = &gen.hamiltonian;
    let i = Complex::new(F::zero(), F::one());
    let mut l = (linalg::kron(&eye, h) - linalg::kron(&h.transpose(), &eye)).map(|z| -i * z);
    for (rate, v) in &gen.dissipators {
        let g = rate.eval(t)?;
        let vdv = v.adjoint() * v;
        let mut term = linalg::kron(&v.conjugate(), v);
        term -= (linalg::kron(&eye, &vdv) + linalg::kron(&vdv.transpose(), &eye))
            .map(|z| z * Complex::new(F::of(0.5), F::zero()));
        l += term.map(|z| z * Complex::new(g, F::zero()));
    }
    Ok(Superoperator::new(l)?)
}

/// Where a propagator family came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Integrated,
    Analytic,
    Collision,
    External,
}

/// Ascending time grid `t₀..T` with propagators `E(t_k, t₀)`.
#[derive(Debug, Clone)]
pub struct PropagatorFamily<F: Real> {
    pub dim: usize,
    pub times: Vec<F>,
    pub maps: Vec<Superoperator<F>>,
    pub provenance: Provenance,
}

impl<F: Real> PropagatorFamily<F> {
    pub fn new(
        times: Vec<F>,
        maps: Vec<Superoperator<F>>,
        provenance: Provenance,
    ) -> Result<Self, DynamicsError> {
        if times.is_empty() || times.len() != maps.len() {
            return Err(DynamicsError::BadGrid);
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(DynamicsError::BadGrid);
        }
        let dim = maps[0].dim;
        if maps.iter().any(|m| m.dim != dim) {
            return Err(ChannelError::DimensionMismatch(dim, 0).into());
        }
        Ok(Self { dim, times, maps, provenance })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Intermediate map `E(t_j, t_i)` for grid indices `i ≤ j`.
    pub fn intermediate(
        &self,
        i: usize,
        j: usize,
        strategy: InverseStrategy,
    ) -> Result<Superoperator<F>, ChannelError> {
        intermediate_map(&self.maps[j], &self.maps[i], strategy)
    }

    pub fn to_dump(&self) -> FamilyDump {
        FamilyDump {
            dim: self.dim,
            provenance: self.provenance,
            times: self.times.iter().map(|t| t.to_f64()).collect(),
            maps: self.maps.iter().map(|m| m.to_record()).collect(),
        }
    }

    pub fn from_dump(dump: &FamilyDump) -> Result<Self, DynamicsError> {
        let maps = dump
            .maps
            .iter()
            .map(Superoperator::from_record)
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(dump.times.iter().map(|&t| F::of(t)).collect(), maps, dump.provenance)
    }
}

/// Portable propagator-family dump: per-time serialized superoperators.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyDump {
    pub dim: usize,
    pub provenance: Provenance,
    pub times: Vec<f64>,
    pub maps: Vec<SuperopRecord>,
}

/// Integrates `dE/dt = L_t E`, `E(t₀) = I`, with classic fourth-order
/// Runge-Kutta at fixed step `grid spacing / 8`.
pub fn propagate<F: Real>(
    gen: &GkslGenerator<F>,
    grid: &[F],
) -> Result<PropagatorFamily<F>, DynamicsError> {
    if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(DynamicsError::BadGrid);
    }
    let n = gen.dim * gen.dim;
    let mut e = linalg::identity::<F>(n);
    let mut maps = vec![Superoperator::new(e.clone())?];
    for w in grid.windows(2) {
        let h = (w[1] - w[0]) / F::of(RK_SUBSTEPS as f64);
        let half = h / F::of(2.0);
        for s in 0..RK_SUBSTEPS {
            let t = w[0] + h * F::of(s as f64);
            let l1 = liouvillian_superop(gen, t)?.matrix;
            let l2 = liouvillian_superop(gen, t + half)?.matrix;
            let l4 = liouvillian_superop(gen, t + h)?.matrix;
            let ch = Complex::new(h, F::zero());
            let c2 = Complex::new(F::of(2.0), F::zero());
            let k1 = &l1 * &e;
            let k2 = &l2 * (&e + (&k1).map(|z| z * ch / c2));
            let k3 = &l2 * (&e + (&k2).map(|z| z * ch / c2));
            let k4 = &l4 * (&e + (&k3).map(|z| z * ch));
            e += (k1 + k2.map(|z| z * c2) + k3.map(|z| z * c2) + k4)
                .map(|z| z * ch / Complex::new(F::of(6.0), F::zero()));
        }
        maps.push(Superoperator::new(e.clone())?);
    }
    PropagatorFamily::new(grid.to_vec(), maps, Provenance::Integrated)
}

/// Off-diagonal decay factor `R(t) = exp(−2∫_{t₀}^t γ)` of the qubit pure
/// dephasing model, closed form per rate kind.
pub fn dephasing_r<F: Real>(rate: &RateFunction<F>, t0: F, t: F) -> F {
    match rate {
        RateFunction::Tangent { .. } => {
            // exp(−2∫tan) = (cos t / cos t₀)², analytic through the poles
            let c0 = t0.cos().abs();
            let c = t.cos().abs();
            (c / c0) * (c / c0)
        }
        _ => (F::of(-2.0) * rate.integral(t0, t)).exp(),
    }
}

/// Analytic pure-dephasing family `E(t, t₀) = diag[1, R, R, 1]`.
pub fn dephasing_family<F: Real>(
    rate: &RateFunction<F>,
    grid: &[F],
) -> Result<PropagatorFamily<F>, DynamicsError> {
    if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(DynamicsError::BadGrid);
    }
    let t0 = grid[0];
    let maps = grid
        .iter()
        .map(|&t| {
            let r = dephasing_r(rate, t0, t);
            let mut m = CMatrix::<F>::zeros(4, 4);
            for (i, v) in [F::one(), r, r, F::one()].into_iter().enumerate() {
                m[(i, i)] = Complex::new(v, F::zero());
            }
            Superoperator::new(m)
        })
        .collect::<Result<Vec<_>, _>>()?;
    PropagatorFamily::new(grid.to_vec(), maps, Provenance::Analytic)
}

/// Dissipator in diagonal form at one instant: rates γ_j and orthonormal
/// traceless operators L_j, plus the Hamiltonian shift absorbed from the
/// identity component of the expansion.
#[derive(Debug, Clone)]
pub struct CanonicalForm<F: Real> {
    pub rates: Vec<F>,
    pub operators: Vec<CMatrix<F>>,
    pub hamiltonian_shift: CMatrix<F>,
}

impl<F: Real> CanonicalForm<F> {
    /// Σ_j max(−γ_j, 0): total instantaneous CP-divisibility violation.
    pub fn negative_rate_sum(&self) -> F {
        self.rates.iter().fold(F::zero(), |a, &g| a + (-g).max(F::zero()))
    }
}

/// Expands the dissipator of `gen` at time `t` in the orthonormal su(d)
/// basis, diagonalizes the Hermitian coefficient matrix, and returns the
/// eigenvalues as canonical rates (descending, deterministic tie-break).
pub fn canonical_form<F: Real>(
    gen: &GkslGenerator<F>,
    t: F,
) -> Result<CanonicalForm<F>, DynamicsError> {
    let d = gen.dim;
    let basis = su_basis::<F>(d)?;
    let m = d * d - 1;
    // v_k: coefficients of V_k in {G₀, G₁..}, with Tr(Gₘ V).
    let mut c_full = CMatrix::<F>::zeros(m + 1, m + 1);
    for (rate, v) in &gen.dissipators {
        let g = Complex::new(rate.eval(t)?, F::zero());
        let mut coeff = Vec::with_capacity(m + 1);
        coeff.push((&basis.g0 * v).trace());
        for gm in &basis.generators {
            coeff.push((gm * v).trace());
        }
        for a in 0..=m {
            for b in 0..=m {
                c_full[(a, b)] += g * coeff[a] * coeff[b].conj();
            }
        }
    }
    // identity cross terms become a Hamiltonian correction
    // H_shift = −(1/√d) Σₙ Im(c_{n0}) Gₙ
    let sqrt_d = F::of(d as f64).sqrt();
    let mut shift = CMatrix::<F>::zeros(d, d);
    for n in 1..=m {
        let w = -c_full[(n, 0)].im / sqrt_d;
        shift += basis.generators[n - 1].map(|z| z * Complex::new(w, F::zero()));
    }
    // traceless block → canonical rates and rotated operators
    let block = c_full.view((1, 1), (m, m)).clone_owned();
    let (vals, vecs) = linalg::hermitian_eig(&block)?;
    let mut entries: Vec<(F, Vec<Complex<F>>)> = (0..m)
        .map(|j| {
            let mut col: Vec<Complex<F>> = vecs.column(j).iter().copied().collect();
            // deterministic phase: first significant coefficient real positive
            if let Some(z) = col.iter().find(|z| {
                nalgebra::ComplexField::modulus(**z) > F::of(1e-12)
            }) {
                let phase = *z / Complex::new(nalgebra::ComplexField::modulus(*z), F::zero());
                let rot = phase.conj();
                for x in col.iter_mut() {
                    *x *= rot;
                }
            }
            (vals[j], col)
        })
        .collect();
    entries.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| {
                for (x, y) in a.1.iter().zip(b.1.iter()) {
                    for (p, q) in [(x.re, y.re), (x.im, y.im)] {
                        match p.partial_cmp(&q) {
                            Some(std::cmp::Ordering::Equal) | None => continue,
                            Some(o) => return o,
                        }
                    }
                }
                std::cmp::Ordering::Equal
            })
    });
    let mut rates = Vec::with_capacity(m);
    let mut operators = Vec::with_capacity(m);
    for (l, col) in entries {
        rates.push(l);
        let mut op = CMatrix::<F>::zeros(d, d);
        for (gm, &u) in basis.generators.iter().zip(col.iter()) {
            op += gm.map(|z| z * u);
        }
        operators.push(op);
    }
    Ok(CanonicalForm { rates, operators, hamiltonian_shift: shift })
}

/// One-step environment collision `ρ ↦ Tr_E[U(ρ ⊗ ρ_E)U†]`.
#[derive(Debug, Clone)]
pub struct CollisionModel<F: Real> {
    pub system_dim: usize,
    pub env_dim: usize,
    pub unitary: CMatrix<F>,
    pub env_state: DensityMatrix<F>,
}

impl<F: Real> CollisionModel<F> {
    pub fn new(
        system_dim: usize,
        unitary: CMatrix<F>,
        env_state: DensityMatrix<F>,
    ) -> Result<Self, DynamicsError> {
        let env_dim = env_state.dim;
        let n = system_dim * env_dim;
        if unitary.nrows() != n || unitary.ncols() != n {
            return Err(ChannelError::DimensionMismatch(unitary.nrows(), n).into());
        }
        let defect = linalg::fnorm(&(unitary.adjoint() * &unitary - linalg::identity::<F>(n)));
        if defect > F::of(1e-9) * F::of(n as f64) {
            return Err(DynamicsError::NonUnitary(defect.to_f64()));
        }
        Ok(Self { system_dim, env_dim, unitary, env_state })
    }

    /// Kraus operators `K_ij = √p_j ⟨φ_i| U |φ_j⟩` from the spectral
    /// decomposition `ρ_E = Σ_j p_j |φ_j⟩⟨φ_j|`.
    pub fn kraus(&self) -> Result<Vec<CMatrix<F>>, DynamicsError> {
        let (p, phi) = self.env_state.spectrum()?;
        let d = self.system_dim;
        let de = self.env_dim;
        let mut ops = Vec::new();
        for j in 0..de {
            if p[j] <= F::of(1e-14) {
                continue;
            }
            let wj = Complex::new(p[j].sqrt(), F::zero());
            for i in 0..de {
                let mut k = CMatrix::<F>::zeros(d, d);
                for s in 0..d {
                    for sp in 0..d {
                        let mut acc = Complex::new(F::zero(), F::zero());
                        for e in 0..de {
                            for ep in 0..de {
                                acc += phi[(e, i)].conj()
                                    * self.unitary[(s * de + e, sp * de + ep)]
                                    * phi[(ep, j)];
                            }
                        }
                        k[(s, sp)] = wj * acc;
                    }
                }
                ops.push(k);
            }
        }
        Ok(ops)
    }

    pub fn collision_superop(&self) -> Result<Superoperator<F>, DynamicsError> {
        Ok(Superoperator::from_kraus(&self.kraus()?)?)
    }
}

/// Family of `n` concatenated collisions; `times` are collision counts.
pub fn collision_propagate<F: Real>(
    model: &CollisionModel<F>,
    n_collisions: usize,
) -> Result<PropagatorFamily<F>, DynamicsError> {
    let step = model.collision_superop()?;
    let mut maps = vec![Superoperator::identity(model.system_dim)];
    let mut times = vec![F::zero()];
    for k in 1..=n_collisions {
        let next = step.compose(maps.last().expect("non-empty"))?;
        maps.push(next);
        times.push(F::of(k as f64));
    }
    PropagatorFamily::new(times, maps, Provenance::Collision)
}

/// Bloch-space affine representation: `r ↦ Mr + c` with
/// `M_ij = Tr[G_i E(G_j)]`, `c_i = Tr[G_i E(I)]/d`.
pub fn affine_representation<F: Real>(
    e: &Superoperator<F>,
) -> Result<(DMatrix<F>, DVector<F>), DynamicsError> {
    let d = e.dim;
    let basis = su_basis::<F>(d)?;
    let m = d * d - 1;
    let mut mat = DMatrix::<F>::zeros(m, m);
    for j in 0..m {
        let mapped = e.apply(&basis.generators[j])?;
        for i in 0..m {
            mat[(i, j)] = (&basis.generators[i] * &mapped).trace().re;
        }
    }
    let eid = e.apply(&linalg::identity::<F>(d))?;
    let c = DVector::from_iterator(
        m,
        basis.generators.iter().map(|g| (g * &eid).trace().re / F::of(d as f64)),
    );
    Ok((mat, c))
}

/// JSON-shaped model file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub dim: usize,
    pub hamiltonian: OperatorSpec,
    pub dissipators: Vec<DissipatorSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DissipatorSpec {
    pub rate: RateSpec,
    pub operator: OperatorSpec,
}

/// Operator given either by name ("sigma_z", "zero", ...) or as a dense
/// matrix of `[re, im]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OperatorSpec {
    Named(String),
    Matrix(Vec<Vec<[f64; 2]>>),
}

impl OperatorSpec {
    pub fn build<F: Real>(&self, dim: usize) -> Result<CMatrix<F>, DynamicsError> {
        match self {
            OperatorSpec::Named(name) => {
                if name == "zero" {
                    return Ok(CMatrix::zeros(dim, dim));
                }
                let op = crate::operators::by_name::<F>(name)
                    .ok_or_else(|| DynamicsError::UnknownOperator(name.clone()))?;
                if op.nrows() != dim {
                    return Err(DynamicsError::BadModelSpec(format!(
                        "operator {name:?} is {}x{}, model dim is {dim}",
                        op.nrows(),
                        op.ncols()
                    )));
                }
                Ok(op)
            }
            OperatorSpec::Matrix(rows) => {
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return Err(DynamicsError::BadModelSpec(format!(
                        "matrix shape does not match dim {dim}"
                    )));
                }
                Ok(CMatrix::from_fn(dim, dim, |r, c| {
                    let [re, im] = rows[r][c];
                    Complex::new(F::of(re), F::of(im))
                }))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum RateSpec {
    Constant { c: f64 },
    Sine,
    Tangent,
    Exponential { a: f64, b: f64 },
    Table { times: Vec<f64>, values: Vec<f64> },
}

impl RateSpec {
    pub fn build<F: Real>(&self) -> Result<RateFunction<F>, DynamicsError> {
        Ok(match self {
            RateSpec::Constant { c } => RateFunction::Constant(F::of(*c)),
            RateSpec::Sine => RateFunction::Sine,
            RateSpec::Tangent => RateFunction::tangent(),
            RateSpec::Exponential { a, b } => {
                RateFunction::Exponential { a: F::of(*a), b: F::of(*b) }
            }
            RateSpec::Table { times, values } => RateFunction::table(
                times.iter().map(|&t| F::of(t)).collect(),
                values.iter().map(|&v| F::of(v)).collect(),
            )?,
        })
    }
}

impl ModelSpec {
    pub fn build<F: Real>(&self) -> Result<GkslGenerator<F>, DynamicsError> {
        let h = self.hamiltonian.build::<F>(self.dim)?;
        let dissipators = self
            .dissipators
            .iter()
            .map(|d| Ok((d.rate.build::<F>()?, d.operator.build::<F>(self.dim)?)))
            .collect::<Result<Vec<_>, DynamicsError>>()?;
        GkslGenerator::new(h, dissipators)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::fnorm;
    use crate::testutil::{self, rng};
    use approx::assert_relative_eq;

    fn grid(t0: f64, t1: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|k| t0 + (t1 - t0) * k as f64 / n as f64).collect()
    }

    #[test]
    fn rate_functions_evaluate() {
        let c = RateFunction::Constant(0.5);
        assert_relative_eq!(c.eval(3.0).unwrap(), 0.5);
        assert_relative_eq!(RateFunction::<f64>::Sine.eval(1.0).unwrap(), 1.0f64.sin());
        let t = RateFunction::<f64>::tangent();
        assert_relative_eq!(t.eval(0.3).unwrap(), 0.3f64.tan());
        assert!(matches!(
            t.eval(std::f64::consts::FRAC_PI_2),
            Err(DynamicsError::PoleExclusion(_))
        ));
        let tab = RateFunction::table(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 0.0]).unwrap();
        assert_relative_eq!(tab.eval(0.5).unwrap(), 1.0);
        assert_relative_eq!(tab.eval(5.0).unwrap(), 0.0);
        assert!(RateFunction::table(vec![1.0, 1.0], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn rate_integrals_closed_forms() {
        assert_relative_eq!(RateFunction::Constant(2.0).integral(0.0, 1.5), 3.0);
        assert_relative_eq!(
            RateFunction::<f64>::Sine.integral(0.0, 1.0),
            1.0 - 1.0f64.cos(),
            epsilon = 1e-14
        );
        assert_relative_eq!(
            RateFunction::<f64>::tangent().integral(0.0, 1.0),
            -(1.0f64.cos().ln()),
            epsilon = 1e-14
        );
        assert_relative_eq!(
            RateFunction::Exponential { a: 1.0, b: 2.0 }.integral(0.0, 1.0),
            (2.0f64.exp() - 1.0) / 2.0,
            epsilon = 1e-14
        );
        let tab = RateFunction::table(vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert_relative_eq!(tab.integral(0.0, 1.0), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn liouvillian_matches_direct_dissipator() {
        let gen = GkslGenerator::pure_dephasing(RateFunction::Constant(1.0));
        let l = liouvillian_superop(&gen, 0.0).unwrap();
        let mut r = rng(31);
        for _ in 0..5 {
            let rho = testutil::random_density::<f64>(2, &mut r);
            let direct = testutil::pauli_z::<f64>() * &rho * testutil::pauli_z::<f64>() - &rho;
            assert_relative_eq!(fnorm(&(l.apply(&rho).unwrap() - direct)), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn commutator_generator_preserves_trace() {
        let mut r = rng(32);
        let h = testutil::random_hermitian::<f64>(3, &mut r);
        let gen = GkslGenerator::new(h.clone(), vec![]).unwrap();
        let l = liouvillian_superop(&gen, 0.0).unwrap();
        let rho = testutil::random_density::<f64>(3, &mut r);
        let out = l.apply(&rho).unwrap();
        assert_relative_eq!(out.trace().re, 0.0, epsilon = 1e-12);
        let direct = {
            let i = testutil::c64(0.0, 1.0);
            (&h * &rho - &rho * &h).map(|z| -i * z)
        };
        assert_relative_eq!(fnorm(&(out - direct)), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn amplitude_damping_plus_dephasing_action() {
        // dρ/dt = γ₋(σ₋ρσ₊ − ½{σ₊σ₋, ρ}) + γ_z(σ_zρσ_z − ρ)
        let (gm, gz) = (0.7, 0.2);
        let gen = GkslGenerator::new(
            crate::CMatrix64::zeros(2, 2),
            vec![
                (RateFunction::Constant(gm), testutil::sigma_minus::<f64>()),
                (RateFunction::Constant(gz), testutil::pauli_z::<f64>()),
            ],
        )
        .unwrap();
        let l = liouvillian_superop(&gen, 0.0).unwrap();
        let mut r = rng(33);
        let rho = testutil::random_density::<f64>(2, &mut r);
        let sm = testutil::sigma_minus::<f64>();
        let sp = testutil::sigma_plus::<f64>();
        let sz = testutil::pauli_z::<f64>();
        let num = &sp * &sm;
        let direct = (&sm * &rho * &sp - (&num * &rho + &rho * &num).scale(0.5)).scale(gm)
            + (&sz * &rho * &sz - &rho).scale(gz);
        assert_relative_eq!(fnorm(&(l.apply(&rho).unwrap() - direct)), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn propagate_constant_dephasing_matches_analytic() {
        let gamma = 0.4;
        let gen = GkslGenerator::pure_dephasing(RateFunction::Constant(gamma));
        let g = grid(0.0, 2.0, 40);
        let fam = propagate(&gen, &g).unwrap();
        for (k, &t) in g.iter().enumerate() {
            let r = (-2.0 * gamma * t).exp();
            let mut expect = crate::CMatrix64::zeros(4, 4);
            for (i, v) in [1.0, r, r, 1.0].into_iter().enumerate() {
                expect[(i, i)] = testutil::c64(v, 0.0);
            }
            let err = (&fam.maps[k].matrix - expect)
                .iter()
                .map(|z| z.norm())
                .fold(0.0f64, f64::max);
            assert!(err <= 1e-7, "t={t}: entrywise error {err}");
            assert!(fam.maps[k].is_tp());
        }
    }

    #[test]
    fn propagate_zero_generator_is_identity() {
        let gen = GkslGenerator::new(crate::CMatrix64::zeros(3, 3), vec![]).unwrap();
        let fam = propagate(&gen, &grid(0.0, 1.0, 10)).unwrap();
        for m in &fam.maps {
            assert_relative_eq!(
                fnorm(&(m.matrix.clone() - crate::linalg::identity::<f64>(9))),
                0.0,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn propagate_sine_dephasing_matches_analytic() {
        let gen = GkslGenerator::pure_dephasing(RateFunction::Sine);
        let g = grid(0.0, 2.0 * std::f64::consts::PI, 64);
        let fam = propagate(&gen, &g).unwrap();
        for (k, &t) in g.iter().enumerate() {
            let r = (-2.0 * (1.0 - t.cos())).exp();
            assert!((fam.maps[k].matrix[(1, 1)].re - r).abs() <= 1e-6, "t={t}");
        }
    }

    #[test]
    fn semigroup_property_constant_generator() {
        let gen = GkslGenerator::new(
            testutil::pauli_x::<f64>().scale(0.3),
            vec![(RateFunction::Constant(0.5), testutil::sigma_minus::<f64>())],
        )
        .unwrap();
        let g = grid(0.0, 2.0, 20);
        let fam = propagate(&gen, &g).unwrap();
        // E(t_10 + t_6) = E(t_10) E(t_6) since the grid is uniform
        let prod = fam.maps[10].compose(&fam.maps[6]).unwrap();
        assert_relative_eq!(fnorm(&(prod.matrix - &fam.maps[16].matrix)), 0.0, epsilon = 1e-7);
    }

    #[test]
    fn intermediate_reconstruction() {
        let gen = GkslGenerator::pure_dephasing(RateFunction::Sine);
        let g = grid(0.0, 3.0, 30);
        let fam = propagate(&gen, &g).unwrap();
        let inter = fam.intermediate(10, 25, InverseStrategy::Exact).unwrap();
        let rebuilt = inter.compose(&fam.maps[10]).unwrap();
        assert_relative_eq!(fnorm(&(rebuilt.matrix - &fam.maps[25].matrix)), 0.0, epsilon = 1e-8);
    }

    #[test]
    fn dephasing_family_closed_forms() {
        let g = grid(0.0, 2.0 * std::f64::consts::PI, 16);
        let fam = dephasing_family(&RateFunction::Constant(0.7), &g).unwrap();
        assert_relative_eq!(fam.maps[4].matrix[(1, 1)].re, (-2.0 * 0.7 * g[4]).exp(), epsilon = 1e-12);

        let fam = dephasing_family(&RateFunction::Sine, &g).unwrap();
        assert_relative_eq!(fam.maps[16].matrix[(1, 1)].re, 1.0, epsilon = 1e-12);

        let fam = dephasing_family(&RateFunction::tangent(), &grid(0.0, 1.5, 10)).unwrap();
        for (k, &t) in fam.times.iter().enumerate() {
            assert_relative_eq!(fam.maps[k].matrix[(1, 1)].re, t.cos().powi(2), epsilon = 1e-12);
        }
        // analytic limit at the pole itself
        assert_relative_eq!(
            dephasing_r(&RateFunction::<f64>::tangent(), 0.0, std::f64::consts::FRAC_PI_2),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn canonical_form_amplitude_damping_dephasing() {
        let (gm, gz) = (0.7, 0.2);
        let gen = GkslGenerator::new(
            crate::CMatrix64::zeros(2, 2),
            vec![
                (RateFunction::Constant(gm), testutil::sigma_minus::<f64>()),
                (RateFunction::Constant(gz), testutil::pauli_z::<f64>()),
            ],
        )
        .unwrap();
        let cf = canonical_form(&gen, 0.0).unwrap();
        let mut rates = cf.rates.clone();
        rates.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert_relative_eq!(rates[0], gm, epsilon = 1e-12);
        assert_relative_eq!(rates[1], 2.0 * gz, epsilon = 1e-12);
        assert_relative_eq!(rates[2], 0.0, epsilon = 1e-12);
        // orthonormality of the canonical operators
        for (i, li) in cf.operators.iter().enumerate() {
            for (j, lj) in cf.operators.iter().enumerate() {
                let ip = (li.adjoint() * lj).trace();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(ip.re, expect, epsilon = 1e-10);
                assert_relative_eq!(ip.im, 0.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn canonical_form_pure_dephasing_single_rate() {
        let gen = GkslGenerator::pure_dephasing(RateFunction::Constant(0.3));
        let cf = canonical_form(&gen, 0.0).unwrap();
        assert_relative_eq!(cf.rates[0], 0.6, epsilon = 1e-12);
        assert_relative_eq!(cf.rates[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(cf.rates[2], 0.0, epsilon = 1e-12);
        assert_relative_eq!(
            fnorm(&(cf.operators[0].clone() - testutil::pauli_z::<f64>().unscale(std::f64::consts::SQRT_2))),
            0.0,
            epsilon = 1e-10
        );
    }

    #[test]
    fn canonical_form_reconstructs_generator() {
        let mut r = rng(35);
        for _ in 0..5 {
            let v1 = crate::sampling::random_cmatrix::<f64>(2, &mut r);
            let v2 = crate::sampling::random_cmatrix::<f64>(2, &mut r);
            let h = testutil::random_hermitian::<f64>(2, &mut r);
            let gen = GkslGenerator::new(
                h.clone(),
                vec![
                    (RateFunction::Constant(0.8), v1),
                    (RateFunction::Constant(-0.3), v2),
                ],
            )
            .unwrap();
            let cf = canonical_form(&gen, 0.0).unwrap();
            let rebuilt = GkslGenerator::new(
                h + &cf.hamiltonian_shift,
                cf.rates
                    .iter()
                    .zip(cf.operators.iter())
                    .map(|(&g, l)| (RateFunction::Constant(g), l.clone()))
                    .collect(),
            )
            .unwrap();
            let l0 = liouvillian_superop(&gen, 0.0).unwrap();
            let l1 = liouvillian_superop(&rebuilt, 0.0).unwrap();
            assert_relative_eq!(fnorm(&(l0.matrix - l1.matrix)), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn canonical_rates_basis_independent() {
        let mut r = rng(36);
        let v = crate::sampling::random_cmatrix::<f64>(2, &mut r);
        let gen = GkslGenerator::new(
            crate::CMatrix64::zeros(2, 2),
            vec![(RateFunction::Constant(1.0), v.clone())],
        )
        .unwrap();
        let base: Vec<f64> = canonical_form(&gen, 0.0).unwrap().rates;
        // mixing the dissipator set by a unitary leaves the dissipator, and
        // hence the rate multiset, unchanged
        for _ in 0..5 {
            let u = testutil::random_unitary::<f64>(2, &mut r);
            let mixed = GkslGenerator::new(
                crate::CMatrix64::zeros(2, 2),
                vec![
                    (RateFunction::Constant(1.0), (&v).map(|z| z * u[(0, 0)])),
                    (RateFunction::Constant(1.0), (&v).map(|z| z * u[(1, 0)])),
                ],
            )
            .unwrap();
            let got = canonical_form(&mixed, 0.0).unwrap().rates;
            for (a, b) in base.iter().zip(got.iter()) {
                assert_relative_eq!(a, b, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn collision_identity_unitary() {
        let env = DensityMatrix::pure(&nalgebra::dvector![testutil::c64(1.0, 0.0), testutil::c64(0.0, 0.0)]);
        let model = CollisionModel::new(2, crate::linalg::identity::<f64>(4), env).unwrap();
        let fam = collision_propagate(&model, 4).unwrap();
        for m in &fam.maps {
            assert_relative_eq!(
                fnorm(&(m.matrix.clone() - crate::linalg::identity::<f64>(4))),
                0.0,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn collision_partial_swap_cp_tp() {
        // U = cos θ I + i sin θ SWAP
        let theta: f64 = 0.4;
        let mut swap = crate::CMatrix64::zeros(4, 4);
        for a in 0..2 {
            for b in 0..2 {
                swap[(a * 2 + b, b * 2 + a)] = testutil::c64(1.0, 0.0);
            }
        }
        let u = crate::linalg::identity::<f64>(4).scale(theta.cos())
            + swap.map(|z| z * testutil::c64(0.0, theta.sin()));
        let env = DensityMatrix::pure(&nalgebra::dvector![testutil::c64(1.0, 0.0), testutil::c64(0.0, 0.0)]);
        let model = CollisionModel::new(2, u, env).unwrap();
        let fam = collision_propagate(&model, 5).unwrap();
        for (k, m) in fam.maps.iter().enumerate() {
            assert!(m.is_tp(), "map {k} not TP");
            assert!(m.is_cp().unwrap(), "map {k} not CP");
        }
        // consecutive intermediate maps of a collision family stay CP
        for k in 1..fam.len() {
            let inter = fam.intermediate(k - 1, k, InverseStrategy::Exact).unwrap();
            assert!(inter.is_cp().unwrap(), "intermediate {k} not CP");
        }
    }

    #[test]
    fn collision_kraus_complete_for_random_inputs() {
        let mut r = rng(38);
        for _ in 0..5 {
            let u = testutil::random_unitary::<f64>(6, &mut r);
            let env = DensityMatrix::new_unchecked(testutil::random_density::<f64>(3, &mut r));
            let model = CollisionModel::new(2, u, env).unwrap();
            let kraus = model.kraus().unwrap();
            let mut sum = crate::CMatrix64::zeros(2, 2);
            for k in &kraus {
                sum += k.adjoint() * k;
            }
            assert_relative_eq!(
                fnorm(&(sum - crate::linalg::identity::<f64>(2))),
                0.0,
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn affine_representation_examples() {
        let mut r = rng(39);
        // unitary conjugation: orthogonal M, zero c
        let u = testutil::random_unitary::<f64>(2, &mut r);
        let e = Superoperator::from_unitary(&u).unwrap();
        let (m, c) = affine_representation(&e).unwrap();
        assert_relative_eq!(
            (&m * m.transpose() - nalgebra::DMatrix::<f64>::identity(3, 3)).norm(),
            0.0,
            epsilon = 1e-10
        );
        assert_relative_eq!(c.norm(), 0.0, epsilon = 1e-10);

        // dephasing: M = diag[R, R, 1]
        let rr = 0.35;
        let mut dep = crate::CMatrix64::zeros(4, 4);
        for (i, v) in [1.0, rr, rr, 1.0].into_iter().enumerate() {
            dep[(i, i)] = testutil::c64(v, 0.0);
        }
        let (m, c) = affine_representation(&Superoperator::new(dep).unwrap()).unwrap();
        let expect = nalgebra::DMatrix::from_diagonal(&nalgebra::dvector![rr, rr, 1.0]);
        assert_relative_eq!((&m - expect).norm(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(c.norm(), 0.0, epsilon = 1e-12);

        // depolarizing: M = (1−p)I
        let p = 0.25;
        let vid = crate::linalg::vec_mat(&crate::linalg::identity::<f64>(2));
        let depo = crate::linalg::identity::<f64>(4).scale(1.0 - p)
            + (&vid * vid.adjoint()).scale(p / 2.0);
        let (m, c) = affine_representation(&Superoperator::new(depo).unwrap()).unwrap();
        assert_relative_eq!(
            (&m - nalgebra::DMatrix::<f64>::identity(3, 3).scale(1.0 - p)).norm(),
            0.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(c.norm(), 0.0, epsilon = 1e-12);

        // r ↦ Mr + c matches the channel action on random states
        let mut r2 = rng(40);
        let u = testutil::random_unitary::<f64>(2, &mut r2);
        let e = Superoperator::from_unitary(&u).unwrap();
        let (m, c) = affine_representation(&e).unwrap();
        let rho = DensityMatrix::new_unchecked(testutil::random_density::<f64>(2, &mut r2));
        let bl = crate::states::to_bloch(&rho).unwrap();
        let mapped = e.apply_density(&rho).unwrap();
        let bl_out = crate::states::to_bloch(&mapped).unwrap();
        assert_relative_eq!((&m * bl.coeffs + c - bl_out.coeffs).norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn family_dump_round_trip() {
        let gen = GkslGenerator::pure_dephasing(RateFunction::Sine);
        let fam = propagate(&gen, &grid(0.0, 1.0, 8)).unwrap();
        let json = serde_json::to_string(&fam.to_dump()).unwrap();
        let dump: FamilyDump = serde_json::from_str(&json).unwrap();
        let back = PropagatorFamily::<f64>::from_dump(&dump).unwrap();
        assert_eq!(back.provenance, Provenance::Integrated);
        for (a, b) in fam.maps.iter().zip(back.maps.iter()) {
            assert_relative_eq!(fnorm(&(a.matrix.clone() - &b.matrix)), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn model_spec_parses_and_builds() {
        let json = r#"{
            "dim": 2,
            "hamiltonian": "zero",
            "dissipators": [
                {"rate": {"kind": "sine"}, "operator": "sigma_z"},
                {"rate": {"kind": "constant", "params": {"c": 0.5}},
                 "operator": [[[0.0, 0.0], [1.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]]}
            ]
        }"#;
        let spec: ModelSpec = serde_json::from_str(json).unwrap();
        let gen = spec.build::<f64>().unwrap();
        assert_eq!(gen.dim, 2);
        assert_eq!(gen.dissipators.len(), 2);
        assert_relative_eq!(
            fnorm(&(gen.dissipators[1].1.clone() - testutil::sigma_minus::<f64>())),
            0.0,
            epsilon = 1e-15
        );
        assert!(liouvillian_superop(&gen, 0.3).is_ok());
    }
}
