//! The Dinkelbach quadratic subproblem on the complex circle manifold and
//! its solvers.
//!
//! For fixed `u`, `w` every beam response is affine in the RIS vector:
//! `wᴴΦ(θ)u = hᴴ(θ)v + β(θ)`. With Dinkelbach variable `z` the RIS step
//! minimizes
//!
//! ```text
//! f(v) = vᴴ H̃ v + 2 Re{vᴴ h̃},   H̃ = K + λ_v I,   K = Σ_i z σ_i² h_i h_iᴴ − h_0 h_0ᴴ
//! ```
//!
//! over `|v_m| = 1`. Gradients follow the `f(v + δ) ≈ f(v) + 2 Re{δᴴ ∇f}`
//! convention, so `∇f = H̃ v + h̃`.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::manifold::{
    embed_matrix, from_real, from_tangent_coords, inner_real, project_tangent, retract, to_real, CcmPoint,
    RealEmbedding, TangentVector,
};
use crate::scene::{steering_radar, steering_ris, ChannelMatrix, Scene};
use crate::{CMatrix, CVector, Error, RMatrix, RVector, Result, C64};

/// Slack on per-iteration monotonicity of the objective.
pub const MONOTONE_SLACK: f64 = 1e-9;

/// Allowed increase of `f` per step: [`MONOTONE_SLACK`] on unit scale,
/// relative beyond it, since round-off grows with `|f|`.
pub fn monotone_slack(f: f64) -> f64 {
    MONOTONE_SLACK * f.abs().max(1.0)
}

/// Maximum number of μ doublings before a step is declared failed.
pub const MAX_MU_DOUBLINGS: usize = 10;
pub const ARMIJO_C: f64 = 1e-4;
pub const ARMIJO_SHRINK: f64 = 0.5;
pub const ARMIJO_MAX_BACKTRACKS: usize = 50;

/// Per-angle affine coefficients of the beam response in `v`, target first.
#[derive(Debug, Clone)]
pub struct ChannelTerms {
    /// `h(θ_i)` for `i = 0..=I`.
    pub h: Vec<CVector>,
    /// `β(θ_i)` for `i = 0..=I`.
    pub beta: Vec<C64>,
    /// Interference powers `σ_i²`, `i = 1..=I` (length `I`).
    pub powers: Vec<f64>,
    /// `σ_n² wᴴw`.
    pub noise_term: f64,
}

impl ChannelTerms {
    pub fn dim(&self) -> usize {
        self.h[0].len()
    }

    pub fn interference_count(&self) -> usize {
        self.powers.len()
    }

    /// `hᴴ(θ_i) v + β(θ_i)` for every angle.
    pub fn responses(&self, v: &CVector) -> Vec<C64> {
        self.h.iter().zip(&self.beta).map(|(h, b)| h.dotc(v) + b).collect()
    }

    pub fn numerator(&self, v: &CVector) -> f64 {
        (self.h[0].dotc(v) + self.beta[0]).norm_sqr()
    }

    pub fn denominator(&self, v: &CVector) -> f64 {
        let r = self.responses(v);
        self.noise_term + self.powers.iter().zip(&r[1..]).map(|(p, x)| p * x.norm_sqr()).sum::<f64>()
    }
}

/// Caches `h(θ)` and `β(θ)` for the target and every interference.
///
/// `h(θ) = (aᴴ(θ) u*) · b*(θ + θ_tr) ⊙ (G* w)` and `β(θ) = wᴴ a(θ) aᵀ(θ) u`.
pub fn build_channel_terms(scene: &Scene, g: &ChannelMatrix, u: &CVector, w: &CVector) -> Result<ChannelTerms> {
    let geometry = &scene.geometry;
    let n = geometry.n_radar;
    for (what, x) in [("transmit weights", u), ("receive weights", w)] {
        if x.len() != n {
            return Err(Error::DimensionMismatch { what, expected: n, found: x.len() });
        }
    }
    if !(u.norm() > 0.0) {
        return Err(Error::InvalidScene("transmit weights are zero".into()));
    }
    if !(w.norm() > 0.0) {
        return Err(Error::ZeroReceive);
    }
    g.check(geometry)?;
    let m = geometry.m_ris;
    let gw = if m > 0 { g.g.map(|x| x.conj()) * w } else { CVector::zeros(0) };

    let angles = std::iter::once(scene.target_angle).chain(scene.interferences.iter().map(|i| i.angle));
    let mut h = Vec::new();
    let mut beta = Vec::new();
    for angle in angles {
        let a = steering_radar(geometry, angle);
        let au = a.transpose().dot(&u.transpose());
        beta.push(w.dotc(&a) * au);
        if m > 0 {
            let b = steering_ris(geometry, angle + scene.ris_offset_angle)?;
            h.push(b.zip_map(&gw, |b, x| au.conj() * b.conj() * x));
        } else {
            h.push(CVector::zeros(0));
        }
    }
    Ok(ChannelTerms {
        h,
        beta,
        powers: scene.interferences.iter().map(|i| i.power).collect(),
        noise_term: scene.noise_power * w.norm_squared(),
    })
}

/// Dinkelbach variable: the fractional objective evaluated at `v`.
pub fn dinkelbach_z(terms: &ChannelTerms, v: &CVector) -> f64 {
    terms.numerator(v) / terms.denominator(v)
}

/// One Dinkelbach quadratic subproblem.
#[derive(Debug, Clone)]
pub struct UqpProblem {
    /// `H̃ = K + λ_v I`.
    pub h_tilde_mat: CMatrix,
    /// `h̃(z) = Σ_i z σ_i² β_i h_i − β_0 h_0`.
    pub h_tilde_vec: CVector,
    pub lambda_p: f64,
    pub lambda_c: f64,
    /// Largest eigenvalue of `K + λ_p I`.
    pub lambda_2: f64,
    pub z: f64,
    k_mat: CMatrix,
    k_norm: f64,
    offset: f64,
}

impl UqpProblem {
    /// Problem with a given Hermitian `H̃`, `h̃` and no regularization
    /// (`λ_v = 0`). Used by oracles and tests.
    pub fn generic(h_tilde_mat: CMatrix, h_tilde_vec: CVector) -> Result<Self> {
        let m = h_tilde_mat.nrows();
        if h_tilde_mat.ncols() != m || h_tilde_vec.len() != m {
            return Err(Error::DimensionMismatch {
                what: "quadratic term",
                expected: m,
                found: h_tilde_vec.len(),
            });
        }
        let herm = (&h_tilde_mat - h_tilde_mat.adjoint()).norm();
        if herm > 1e-12 * (1.0 + h_tilde_mat.norm()) {
            return Err(Error::Config(format!("quadratic term is not Hermitian (residual {herm:e})")));
        }
        let ev = linalg::hermitian_eigenvalues(&h_tilde_mat)?;
        let k_norm = linalg::max_of(&ev).abs().max(linalg::min_of(&ev).abs());
        Ok(Self {
            k_mat: h_tilde_mat.clone(),
            h_tilde_mat,
            h_tilde_vec,
            lambda_p: 0.0,
            lambda_c: 0.0,
            lambda_2: linalg::max_of(&ev),
            z: 0.0,
            k_norm,
            offset: 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.h_tilde_vec.len()
    }

    pub fn lambda_v(&self) -> f64 {
        self.lambda_p + self.lambda_c
    }

    /// `K = H̃ − λ_v I`.
    pub fn k_matrix(&self) -> &CMatrix {
        &self.k_mat
    }

    /// Spectral norm of `K`.
    pub fn k_norm(&self) -> f64 {
        self.k_norm
    }

    /// `f(v) = vᴴ H̃ v + 2 Re{vᴴ h̃}` for any `v`.
    pub fn objective(&self, v: &CVector) -> f64 {
        self.reduced_objective(v) + self.lambda_v() * v.norm_squared()
    }

    /// `vᴴ K v + 2 Re{vᴴ h̃}`; equals `f(v) − λ_v M` on the manifold.
    pub fn reduced_objective(&self, v: &CVector) -> f64 {
        v.dotc(&(&self.k_mat * v)).re + 2.0 * v.dotc(&self.h_tilde_vec).re
    }

    /// `z · denominator(v) − numerator(v)`, the Dinkelbach objective, for
    /// unimodular `v`.
    pub fn dinkelbach_value(&self, v: &CVector) -> f64 {
        self.reduced_objective(v) + self.offset
    }

    /// Smallest eigenvalue of `H̃` via a dense eigensolve.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(linalg::min_of(&linalg::hermitian_eigenvalues(&self.h_tilde_mat)?))
    }
}

/// Assembles `H̃` and `h̃(z)` with the regularization at the bound:
/// `λ_p = ‖h_0‖²(1 + 10⁻³) + 10⁻¹²` and `λ_c = (M/8) λ_2 + ‖h̃‖`.
pub fn build_uqp(terms: &ChannelTerms, z: f64) -> Result<UqpProblem> {
    if !(z >= 0.0 && z.is_finite()) {
        return Err(Error::Config(format!("Dinkelbach variable must be finite and non-negative, got {z}")));
    }
    let m = terms.dim();
    if m == 0 {
        return Err(Error::InvalidGeometry("RIS subproblem needs at least one element".into()));
    }
    let mut coeffs = Vec::with_capacity(terms.h.len());
    coeffs.push(-1.0);
    coeffs.extend(terms.powers.iter().map(|p| z * p));

    let mut k_mat = CMatrix::zeros(m, m);
    let mut h_vec = CVector::zeros(m);
    for ((h, beta), &c) in terms.h.iter().zip(&terms.beta).zip(&coeffs) {
        k_mat.gerc(C64::from(c), h, h, C64::from(1.0));
        h_vec.axpy(beta * c, h, C64::from(1.0));
    }
    // Exact Hermitian symmetry despite rank-one accumulation round-off.
    let k_mat = (&k_mat + k_mat.adjoint()) * C64::from(0.5);

    let (k_max, k_min) = linalg::low_rank_hermitian_extremes(&terms.h, &coeffs, m)?;
    let lambda_p = terms.h[0].norm_squared() * (1.0 + 1e-3) + 1e-12;
    let lambda_2 = k_max + lambda_p;
    let lambda_c = (m as f64 / 8.0) * lambda_2 + h_vec.norm();
    let lambda_v = lambda_p + lambda_c;
    if !(k_min + lambda_v > 0.0) {
        return Err(Error::Eigen(format!(
            "regularized quadratic term is not positive definite (min eigenvalue {})",
            k_min + lambda_v
        )));
    }
    let mut h_tilde_mat = k_mat.clone();
    for i in 0..m {
        h_tilde_mat[(i, i)] += C64::from(lambda_v);
    }
    let offset = z * terms.noise_term
        + terms.beta.iter().zip(&coeffs).map(|(b, c)| c * b.norm_sqr()).sum::<f64>();
    Ok(UqpProblem {
        h_tilde_mat,
        h_tilde_vec: h_vec,
        lambda_p,
        lambda_c,
        lambda_2,
        z,
        k_mat,
        k_norm: k_max.abs().max(k_min.abs()),
        offset,
    })
}

/// `∇f(v) = H̃ v + h̃`.
pub fn euclidean_gradient(p: &UqpProblem, v: &CVector) -> CVector {
    &p.h_tilde_mat * v + &p.h_tilde_vec
}

/// `grad f(v) = P_v(∇f(v))`.
pub fn riemannian_gradient(p: &UqpProblem, point: &CcmPoint) -> TangentVector {
    project_tangent(point, &euclidean_gradient(p, point.as_vector()))
}

/// `Hess f(v)[ξ] = P_v(H̃ ξ − ξ ⊙ Re{∇f ⊙ v*})`, in complex arithmetic.
pub fn hessian_action(p: &UqpProblem, point: &CcmPoint, xi: &CVector) -> TangentVector {
    let v = point.as_vector();
    let grad = euclidean_gradient(p, v);
    let q = grad.zip_map(v, |g, v| (g * v.conj()).re);
    let y = &p.h_tilde_mat * xi - xi.zip_map(&q, |x, q| x * q);
    project_tangent(point, &y)
}

/// Real-embedded Newton equation at a point.
#[derive(Debug, Clone)]
pub struct NewtonSystem {
    /// `½(I − V̂)(Ĥ − Q̂)`.
    pub hess_r: RMatrix,
    /// Real form of the Riemannian gradient.
    pub g_hat: RVector,
    /// Largest eigenvalue of `Ĥ − ½(I − V̂)(Ĥ − Q̂)(I − V̂)`.
    pub lambda_1: f64,
    pub embedding: RealEmbedding,
}

impl NewtonSystem {
    /// `½(I − V̂)(Ĥ − Q̂)½(I − V̂)`: the symmetric restriction of `Hess_R` to
    /// the tangent space.
    pub fn tangent_hessian(&self) -> RMatrix {
        let p = self.embedding.projector();
        let s = &self.hess_r * &p;
        (&s + s.transpose()) * 0.5
    }
}

pub fn newton_system(p: &UqpProblem, point: &CcmPoint) -> Result<NewtonSystem> {
    let v = point.as_vector();
    let grad = euclidean_gradient(p, v);
    let q = RVector::from_iterator(v.len(), grad.iter().zip(v.iter()).map(|(g, v)| (g * v.conj()).re));
    let embedding = RealEmbedding::new(point, &p.h_tilde_mat, &q);
    let proj = embedding.projector();
    let b = &embedding.h_hat - &embedding.q_hat;
    let hess_r = &proj * &b;
    let g_hat = to_real(&project_tangent(point, &grad).xi);
    // Ĥ − ½ Ĥ_{H0} with Ĥ_{H0} = (I − V̂)(Ĥ − Q̂)(I − V̂) = 4 P B P.
    let pbp = &hess_r * &proj;
    let a = &embedding.h_hat - pbp * 2.0;
    let a = (&a + a.transpose()) * 0.5;
    let lambda_1 = linalg::max_of(&linalg::symmetric_eigenvalues(&a)?);
    Ok(NewtonSystem {
        hess_r,
        g_hat,
        lambda_1,
        embedding,
    })
}

/// Loading factor strictly above `λ_1`: `λ_1(1 + margin) + 10⁻¹⁰` for
/// positive `λ_1`, otherwise `|λ_1| margin + 10⁻¹⁰`.
pub fn loading_factor(lambda_1: f64, margin: f64) -> f64 {
    if lambda_1 > 0.0 {
        lambda_1 * (1.0 + margin) + 1e-10
    } else {
        lambda_1.abs() * margin + 1e-10
    }
}

/// Upper bound on `λ_1` that needs no eigensolve.
///
/// In the basis `{v_m e_m, j v_m e_m}` the matrix splits as
/// `λ_v I + Diag(0, 2Q_0) + L` where `Q_0 = Q − λ_v` and `L` is the real
/// form of the antilinear map `y ↦ V*KV y*`, whose spectral norm is `‖K‖₂`.
pub fn lambda_1_bound(p: &UqpProblem, point: &CcmPoint) -> f64 {
    let v = point.as_vector();
    let shifted = &p.k_mat * v + &p.h_tilde_vec;
    let q0_max = shifted
        .iter()
        .zip(v.iter())
        .map(|(g, v)| (g * v.conj()).re)
        .fold(f64::NEG_INFINITY, f64::max);
    p.lambda_v() + (2.0 * q0_max).max(0.0) + p.k_norm
}

/// Solves `(Hess_R + μ/2 I) ξ̂ = −ĝ` through its symmetric tangent form.
///
/// For tangent `ĝ` the solution is tangent, and on the tangent space
/// `Hess_R` coincides with `P(Ĥ − Q̂)P`, so the symmetric positive definite
/// system `(P(Ĥ − Q̂)P + μ/2 I) ξ̂ = −ĝ` has the same solution.
pub fn solve_embedded(system: &NewtonSystem, mu: f64) -> Option<RVector> {
    let n = system.g_hat.len();
    let mut s = system.tangent_hessian();
    for i in 0..n {
        s[(i, i)] += 0.5 * mu;
    }
    linalg::spd_solve(s, &(-&system.g_hat))
}

/// The same Newton equation in tangent coordinates `ξ_m = j v_m t_m`:
/// `(Re{V* K V} − Diag(Q_0) + μ/2 I) t = −Im{v* ⊙ ∇f}`.
fn solve_tangent(p: &UqpProblem, point: &CcmPoint, grad: &CVector, mu: f64) -> Option<TangentVector> {
    let v = point.as_vector();
    let m = v.len();
    let shifted = &p.k_mat * v + &p.h_tilde_vec;
    let mut a = RMatrix::zeros(m, m);
    for j in 0..m {
        for i in 0..m {
            a[(i, j)] = (v[i].conj() * p.k_mat[(i, j)] * v[j]).re;
        }
    }
    for i in 0..m {
        a[(i, i)] += 0.5 * mu - (shifted[i] * v[i].conj()).re;
    }
    let rhs = RVector::from_iterator(m, grad.iter().zip(v.iter()).map(|(g, v)| -(v.conj() * g).im));
    let t = linalg::spd_solve(a, &rhs)?;
    Some(from_tangent_coords(point, &t))
}

/// Improved Riemannian Newton direction with the exact `λ_1`, computed on the
/// dense real `2M` system. Returns the direction and the loading factor used.
pub fn improved_rnd(p: &UqpProblem, point: &CcmPoint, mu_margin: f64) -> Result<(TangentVector, f64)> {
    let system = newton_system(p, point)?;
    let mut mu = loading_factor(system.lambda_1, mu_margin);
    if system.g_hat.iter().all(|&x| x == 0.0) {
        return Ok((TangentVector::zeros(point.dim()), mu));
    }
    for _ in 0..=MAX_MU_DOUBLINGS {
        if let Some(x) = solve_embedded(&system, mu) {
            return Ok((TangentVector { xi: from_real(&x) }, mu));
        }
        mu *= 2.0;
    }
    Err(Error::LinearSolve(format!("Newton system singular up to mu = {mu:e}")))
}

/// How `λ_1` is obtained inside the solver loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lambda1Policy {
    /// Dense `2M × 2M` symmetric eigensolve.
    Exact,
    /// Certified upper bound, see [`lambda_1_bound`].
    Bound,
}

/// Choice of the diagonal loading factor `μ` per iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuPolicy {
    /// `μ` just above `λ_1`: the unretracted step and the retraction both
    /// provably decrease `f`.
    Anchored,
    /// Start from a quarter of the previous accepted `μ` and double until the
    /// retracted step decreases `f`; falls back to the anchored value.
    Adaptive,
}

/// How the Newton equation is solved inside the solver loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NewtonSolve {
    /// Dense real `2M` system.
    Embedded,
    /// Equivalent `M × M` system in tangent coordinates.
    Tangent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RnmConfig {
    /// Stop once `|f(v^(r+1)) − f(v^(r))| < tol_f`.
    pub tol_f: f64,
    pub max_iter: usize,
    pub mu_margin: f64,
    pub mu_policy: MuPolicy,
    pub lambda_1: Lambda1Policy,
    pub solve: NewtonSolve,
}

impl Default for RnmConfig {
    fn default() -> Self {
        Self {
            tol_f: 1e-8,
            max_iter: 500,
            mu_margin: 1e-3,
            mu_policy: MuPolicy::Adaptive,
            lambda_1: Lambda1Policy::Bound,
            solve: NewtonSolve::Tangent,
        }
    }
}

impl RnmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_f > 0.0) || !(self.mu_margin > 0.0) || self.max_iter == 0 {
            return Err(Error::Config(format!("invalid solver configuration {self:?}")));
        }
        Ok(())
    }

    /// Exact `λ_1` and the dense embedded solve.
    pub fn dense() -> Self {
        Self {
            lambda_1: Lambda1Policy::Exact,
            solve: NewtonSolve::Embedded,
            ..Self::default()
        }
    }
}

/// Per-iteration record of one subproblem solve. `f` and `grad_norm` hold
/// one entry per iterate including the start; the other vectors one entry
/// per step. Objective values are `f(v) − λ_v M`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InnerSolveTrace {
    pub f: Vec<f64>,
    pub mu: Vec<f64>,
    pub grad_norm: Vec<f64>,
    pub millis: Vec<f64>,
    /// RNM only: `f(v + ξ) − λ_v M` before retraction.
    pub f_unretracted: Vec<f64>,
    pub converged: bool,
    pub line_search_failed: bool,
    pub mu_doublings: usize,
}

#[derive(Serialize)]
struct TraceRow {
    iteration: usize,
    f: f64,
    mu: Option<f64>,
    grad_norm: f64,
    millis: Option<f64>,
}

impl InnerSolveTrace {
    pub fn iterations(&self) -> usize {
        self.f.len().saturating_sub(1)
    }

    pub fn final_f(&self) -> f64 {
        *self.f.last().expect("trace has an initial value")
    }

    pub fn total_millis(&self) -> f64 {
        self.millis.iter().sum()
    }

    /// Rows `(iteration, f, mu, grad_norm, millis)`; the initial row has
    /// empty `mu` and `millis`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        for (k, (&f, &gn)) in self.f.iter().zip(&self.grad_norm).enumerate() {
            wtr.serialize(TraceRow {
                iteration: k,
                f,
                mu: k.checked_sub(1).and_then(|i| self.mu.get(i).copied()),
                grad_norm: gn,
                millis: k.checked_sub(1).and_then(|i| self.millis.get(i).copied()),
            })?;
        }
        wtr.flush().map_err(|e| Error::io("<trace>", e))?;
        Ok(())
    }
}

fn start_trace(p: &UqpProblem, point: &CcmPoint) -> (InnerSolveTrace, TangentVector, f64) {
    let f0 = p.reduced_objective(point.as_vector());
    let grad = riemannian_gradient(p, point);
    let trace = InnerSolveTrace {
        f: vec![f0],
        grad_norm: vec![grad.norm()],
        ..Default::default()
    };
    (trace, grad, f0)
}

fn check_start(p: &UqpProblem, v0: &CcmPoint, cfg: &RnmConfig) -> Result<()> {
    cfg.validate()?;
    if v0.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            what: "initial RIS vector",
            expected: p.dim(),
            found: v0.dim(),
        });
    }
    Ok(())
}

/// Improved Riemannian Newton method (diagonally loaded Newton steps with
/// element-wise retraction).
pub fn rnm_solve(p: &UqpProblem, v0: &CcmPoint, cfg: &RnmConfig) -> Result<(CcmPoint, InnerSolveTrace)> {
    check_start(p, v0, cfg)?;
    let (mut trace, mut rgrad, mut f) = start_trace(p, v0);
    let mut point = v0.clone();
    let lambda_v = p.lambda_v();
    let mut previous_mu = p.k_norm().max(f64::MIN_POSITIVE);
    for iteration in 0..cfg.max_iter {
        if rgrad.norm() == 0.0 {
            trace.converged = true;
            break;
        }
        let started = Instant::now();
        let v = point.as_vector();
        let grad = euclidean_gradient(p, v);
        let (anchored, system) = match (cfg.lambda_1, cfg.solve) {
            (Lambda1Policy::Bound, NewtonSolve::Tangent) => (loading_factor(lambda_1_bound(p, &point), cfg.mu_margin), None),
            _ => {
                let system = newton_system(p, &point)?;
                let l1 = match cfg.lambda_1 {
                    Lambda1Policy::Exact => system.lambda_1,
                    Lambda1Policy::Bound => lambda_1_bound(p, &point),
                };
                (loading_factor(l1, cfg.mu_margin), Some(system))
            }
        };
        // Direction, retracted point and objectives for one loading factor.
        let attempt = |mu: f64| -> Option<(CcmPoint, f64, f64)> {
            let xi = match (cfg.solve, &system) {
                (NewtonSolve::Embedded, Some(s)) => solve_embedded(s, mu).map(|x| TangentVector { xi: from_real(&x) }),
                _ => solve_tangent(p, &point, &grad, mu),
            }?;
            let unretracted = p.reduced_objective(&(v + &xi.xi)) + lambda_v * xi.xi.norm_squared();
            let next = retract(&point, &xi).ok()?;
            let f_next = p.reduced_objective(next.as_vector());
            Some((next, f_next, unretracted))
        };

        let mut accepted = None;
        let mut mu = anchored;
        if cfg.mu_policy == MuPolicy::Adaptive {
            mu = (previous_mu / 4.0).min(anchored);
            while mu < anchored {
                if let Some((next, f_next, unretracted)) = attempt(mu) {
                    if f_next <= f {
                        accepted = Some((next, f_next, unretracted));
                        break;
                    }
                }
                mu *= 2.0;
                trace.mu_doublings += 1;
            }
            if accepted.is_none() {
                mu = anchored;
            }
        }
        let mut last_attempt = f64::NAN;
        if accepted.is_none() {
            for doubling in 0..=MAX_MU_DOUBLINGS {
                if let Some((next, f_next, unretracted)) = attempt(mu) {
                    last_attempt = f_next;
                    if f_next <= f + monotone_slack(f) {
                        accepted = Some((next, f_next, unretracted));
                        break;
                    }
                }
                if doubling < MAX_MU_DOUBLINGS {
                    mu *= 2.0;
                    trace.mu_doublings += 1;
                }
            }
        }
        let Some((next, f_next, unretracted)) = accepted else {
            return Err(Error::MonotonicityViolation {
                iteration,
                before: f,
                after: last_attempt,
            });
        };
        previous_mu = mu;
        rgrad = riemannian_gradient(p, &next);
        trace.mu.push(mu);
        trace.f.push(f_next);
        trace.f_unretracted.push(unretracted);
        trace.grad_norm.push(rgrad.norm());
        trace.millis.push(started.elapsed().as_secs_f64() * 1e3);
        let delta = (f_next - f).abs();
        point = next;
        f = f_next;
        if delta < cfg.tol_f {
            trace.converged = true;
            break;
        }
    }
    Ok((point, trace))
}

/// Armijo backtracking along `d` (a tangent descent direction) from `point`.
fn armijo(p: &UqpProblem, point: &CcmPoint, f: f64, d: &TangentVector, slope: f64) -> Result<Option<(CcmPoint, f64)>> {
    let mut step = 1.0;
    for _ in 0..=ARMIJO_MAX_BACKTRACKS {
        let trial = TangentVector { xi: &d.xi * C64::from(step) };
        let next = retract(point, &trial)?;
        let f_next = p.reduced_objective(next.as_vector());
        if f_next <= f + ARMIJO_C * step * slope {
            return Ok(Some((next, f_next)));
        }
        step *= ARMIJO_SHRINK;
    }
    Ok(None)
}

/// Riemannian gradient descent with Armijo backtracking.
pub fn rgd_solve(p: &UqpProblem, v0: &CcmPoint, cfg: &RnmConfig) -> Result<(CcmPoint, InnerSolveTrace)> {
    line_search_solve(p, v0, cfg, false)
}

/// Riemannian conjugate gradient (Polak–Ribière+, projection transport) with
/// Armijo backtracking.
pub fn rcg_solve(p: &UqpProblem, v0: &CcmPoint, cfg: &RnmConfig) -> Result<(CcmPoint, InnerSolveTrace)> {
    line_search_solve(p, v0, cfg, true)
}

fn line_search_solve(
    p: &UqpProblem,
    v0: &CcmPoint,
    cfg: &RnmConfig,
    conjugate: bool,
) -> Result<(CcmPoint, InnerSolveTrace)> {
    check_start(p, v0, cfg)?;
    let (mut trace, mut grad, mut f) = start_trace(p, v0);
    let mut point = v0.clone();
    let mut dir = TangentVector { xi: -&grad.xi };
    for _ in 0..cfg.max_iter {
        if grad.norm() == 0.0 {
            trace.converged = true;
            break;
        }
        let started = Instant::now();
        // Directional derivative of f along d is 2 Re{dᴴ grad}.
        let mut slope = 2.0 * inner_real(&dir.xi, &grad.xi);
        if slope >= 0.0 {
            dir = TangentVector { xi: -&grad.xi };
            slope = -2.0 * grad.xi.norm_squared();
        }
        let Some((next, f_next)) = armijo(p, &point, f, &dir, slope)? else {
            trace.line_search_failed = true;
            break;
        };
        let next_grad = riemannian_gradient(p, &next);
        if conjugate {
            let old_grad = project_tangent(&next, &grad.xi);
            let old_dir = project_tangent(&next, &dir.xi);
            let beta = (inner_real(&next_grad.xi, &(&next_grad.xi - &old_grad.xi)) / grad.xi.norm_squared()).max(0.0);
            dir = TangentVector {
                xi: -&next_grad.xi + old_dir.xi * C64::from(beta),
            };
        } else {
            dir = TangentVector { xi: -&next_grad.xi };
        }
        trace.mu.push(0.0);
        trace.f.push(f_next);
        trace.grad_norm.push(next_grad.norm());
        trace.millis.push(started.elapsed().as_secs_f64() * 1e3);
        let delta = (f_next - f).abs();
        point = next;
        grad = next_grad;
        f = f_next;
        if delta < cfg.tol_f {
            trace.converged = true;
            break;
        }
    }
    Ok((point, trace))
}

/// Which subproblem solver to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Rnm,
    Rcg,
    Rgd,
}

impl SolverKind {
    pub const ALL: [SolverKind; 3] = [SolverKind::Rnm, SolverKind::Rcg, SolverKind::Rgd];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Rnm => "rnm",
            SolverKind::Rcg => "rcg",
            SolverKind::Rgd => "rgd",
        }
    }

    pub fn solve(self, p: &UqpProblem, v0: &CcmPoint, cfg: &RnmConfig) -> Result<(CcmPoint, InnerSolveTrace)> {
        match self {
            SolverKind::Rnm => rnm_solve(p, v0, cfg),
            SolverKind::Rcg => rcg_solve(p, v0, cfg),
            SolverKind::Rgd => rgd_solve(p, v0, cfg),
        }
    }
}

/// Real form of the objective, `v̂ᵀ Ĥ v̂ + 2 v̂ᵀ ĥ`.
pub fn real_objective(p: &UqpProblem, v: &CVector) -> f64 {
    let vh = to_real(v);
    let hh = embed_matrix(&p.h_tilde_mat);
    vh.dot(&(&hh * &vh)) + 2.0 * vh.dot(&to_real(&p.h_tilde_vec))
}
