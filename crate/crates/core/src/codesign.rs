//! Alternating transmit / RIS / receive optimization of the output SINR.
//!
//! Each outer iteration updates `v` by a Dinkelbach loop over unimodular
//! quadratic subproblems, then `w` and `u` by their closed-form MVDR
//! solutions. The SINR objective `G(u, v, w)` never decreases across the
//! three sub-steps.

use std::io::Write;
use std::time::Instant;

use nalgebra::Cholesky;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::manifold::CcmPoint;
use crate::scene::{objective_g, receive_response, steering_radar, to_db_sinr, ChannelMatrix, Scene};
use crate::uqp::{build_channel_terms, build_uqp, dinkelbach_z, InnerSolveTrace, RnmConfig, SolverKind};
use crate::{CMatrix, CVector, Error, Result, C64};

/// Relative slack on the monotonicity of `G` across sub-steps.
pub const G_SLACK: f64 = 1e-9;
/// Absolute slack on the monotonicity of a Dinkelbach `z` sequence.
pub const Z_SLACK: f64 = 1e-10;

/// Transmit weights `u`, RIS coefficients `v` and receive weights `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerState {
    pub u: CVector,
    pub v: CVector,
    pub w: CVector,
}

impl BeamformerState {
    pub fn validate(&self, scene: &Scene) -> Result<()> {
        let n = scene.geometry.n_radar;
        let m = scene.geometry.m_ris;
        for (what, x, len) in [("transmit weights", &self.u, n), ("RIS coefficients", &self.v, m), ("receive weights", &self.w, n)] {
            if x.len() != len {
                return Err(Error::DimensionMismatch { what, expected: len, found: x.len() });
            }
        }
        if (self.u.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidScene(format!("transmit weights must have unit norm, got {}", self.u.norm())));
        }
        let dev = self.v.iter().map(|x| (x.norm() - 1.0).abs()).fold(0.0, f64::max);
        if dev > 1e-9 {
            return Err(Error::NotUnimodular { deviation: dev });
        }
        if !self.w.iter().all(|x| x.re.is_finite() && x.im.is_finite()) || !(self.w.norm() > 0.0) {
            return Err(Error::ZeroReceive);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitPolicy {
    /// `u = a*(θ_0)/√N`, `v = 1`, `w` from the receive update.
    Matched,
    /// Gaussian `u` (normalized), uniform phases for `v`.
    Random { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CodesignConfig {
    /// Dinkelbach stop on `|Δz|`.
    pub delta2: f64,
    /// Outer stop on the relative change of `G`.
    pub delta3: f64,
    pub p_max: usize,
    /// Cap on Dinkelbach steps per RIS update.
    pub dinkelbach_max: usize,
    pub rnm: RnmConfig,
    pub init_policy: InitPolicy,
    pub solver: SolverKind,
}

impl Default for CodesignConfig {
    fn default() -> Self {
        Self {
            delta2: 1e-8,
            delta3: 1e-6,
            p_max: 9,
            dinkelbach_max: 100,
            rnm: RnmConfig::default(),
            init_policy: InitPolicy::Matched,
            solver: SolverKind::Rnm,
        }
    }
}

impl CodesignConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta2 > 0.0 && self.delta3 > 0.0) || self.p_max == 0 || self.dinkelbach_max == 0 {
            return Err(Error::Config(format!("invalid codesign configuration {self:?}")));
        }
        self.rnm.validate()
    }
}

/// Outcome of one RIS update.
#[derive(Debug, Clone)]
pub struct RisUpdate {
    pub v: CVector,
    /// `z^(0) = E(v_in)`, then one entry per Dinkelbach step.
    pub z_trace: Vec<f64>,
    pub inner: Vec<InnerSolveTrace>,
    pub millis: f64,
}

impl RisUpdate {
    pub fn inner_iterations(&self) -> usize {
        self.inner.iter().map(|t| t.iterations()).sum()
    }
}

/// Dinkelbach loop over the RIS coefficients with `u`, `w` fixed.
pub fn optimize_ris(scene: &Scene, g: &ChannelMatrix, state: &BeamformerState, cfg: &CodesignConfig) -> Result<RisUpdate> {
    let started = Instant::now();
    let terms = build_channel_terms(scene, g, &state.u, &state.w)?;
    let mut point = CcmPoint::new(state.v.clone())?;
    let mut z = dinkelbach_z(&terms, point.as_vector());
    let mut z_trace = vec![z];
    let mut inner = Vec::new();
    for _ in 0..cfg.dinkelbach_max {
        let problem = build_uqp(&terms, z)?;
        let (next, trace) = cfg.solver.solve(&problem, &point, &cfg.rnm)?;
        inner.push(trace);
        let z_next = dinkelbach_z(&terms, next.as_vector());
        point = next;
        z_trace.push(z_next);
        let done = (z_next - z).abs() < cfg.delta2;
        z = z_next;
        if done {
            break;
        }
    }
    Ok(RisUpdate {
        v: point.into_vector(),
        z_trace,
        inner,
        millis: started.elapsed().as_secs_f64() * 1e3,
    })
}

/// `Σ_i σ_i² x_i x_iᴴ + c I` solved against `rhs` by Cholesky.
fn loaded_solve(columns: &[(f64, CVector)], load: f64, rhs: &CVector) -> Result<CVector> {
    let n = rhs.len();
    let mut r = CMatrix::from_diagonal_element(n, n, C64::from(load));
    for (p, x) in columns {
        r.gerc(C64::from(*p), x, x, C64::from(1.0));
    }
    Cholesky::new(r)
        .map(|c| c.solve(rhs))
        .ok_or_else(|| Error::LinearSolve("interference-plus-noise matrix is not positive definite".into()))
}

/// MVDR receive weights `w = (Ψ_u + σ_n² I)⁻¹ Φ(θ_0) u`.
pub fn update_receive(scene: &Scene, g: &ChannelMatrix, state: &BeamformerState) -> Result<CVector> {
    let phi_u = |angle: f64| -> Result<CVector> {
        let r = receive_response(scene, g, &state.v, angle)?;
        let a = steering_radar(&scene.geometry, angle);
        Ok(r * a.transpose().dot(&state.u.transpose()))
    };
    let signal = phi_u(scene.target_angle)?;
    let columns = scene
        .interferences
        .iter()
        .map(|i| Ok((i.power, phi_u(i.angle)?)))
        .collect::<Result<Vec<_>>>()?;
    loaded_solve(&columns, scene.noise_power, &signal)
}

/// Transmit weights maximizing the SINR on the unit sphere:
/// `u ∝ (Ψ_w + σ_n² ‖w‖² I)⁻¹ Φᴴ(θ_0) w`, `Ψ_w = Σ_i σ_i² Φᴴ(θ_i) w wᴴ Φ(θ_i)`.
pub fn update_transmit(scene: &Scene, g: &ChannelMatrix, state: &BeamformerState) -> Result<CVector> {
    if !(state.w.norm() > 0.0) {
        return Err(Error::ZeroReceive);
    }
    // Φ(θ) = r aᵀ, so Φᴴ(θ) w = a* (rᴴ w).
    let phi_h_w = |angle: f64| -> Result<CVector> {
        let r = receive_response(scene, g, &state.v, angle)?;
        let a = steering_radar(&scene.geometry, angle);
        Ok(a.map(|x| x.conj()) * r.dotc(&state.w))
    };
    let signal = phi_h_w(scene.target_angle)?;
    let columns = scene
        .interferences
        .iter()
        .map(|i| Ok((i.power, phi_h_w(i.angle)?)))
        .collect::<Result<Vec<_>>>()?;
    let u = loaded_solve(&columns, scene.noise_power * state.w.norm_squared(), &signal)?;
    let norm = u.norm();
    if !(norm > 0.0) {
        return Err(Error::LinearSolve("transmit update vanished".into()));
    }
    Ok(u / C64::from(norm))
}

/// Starting point for the alternating loop.
pub fn initial_state(scene: &Scene, g: &ChannelMatrix, policy: InitPolicy) -> Result<BeamformerState> {
    let n = scene.geometry.n_radar;
    let m = scene.geometry.m_ris;
    let (u, v) = match policy {
        InitPolicy::Matched => {
            let a = steering_radar(&scene.geometry, scene.target_angle);
            (a.map(|x| x.conj()) / C64::from((n as f64).sqrt()), CVector::from_element(m, C64::from(1.0)))
        }
        InitPolicy::Random { seed } => {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let u = CVector::from_fn(n, |_, _| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                C64::new(re, im)
            });
            let u = &u / C64::from(u.norm());
            (u, CcmPoint::random(m, &mut rng).into_vector())
        }
    };
    let mut state = BeamformerState {
        u,
        v,
        w: CVector::zeros(n),
    };
    state.w = update_receive(scene, g, &state)?;
    Ok(state)
}

/// Wall-clock of each sub-step of one outer iteration, milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepTiming {
    pub v_millis: f64,
    pub w_millis: f64,
    pub u_millis: f64,
}

/// Which sub-step a rejected update belonged to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubStep {
    V,
    W,
    U,
}

/// A sub-step whose result would have lowered `G` beyond slack and was
/// discarded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub iteration: usize,
    pub step: SubStep,
    pub before: f64,
    pub after: f64,
}

/// Full record of one codesign run.
#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Output SINR in dB: initial point, then after each outer iteration.
    pub sinr_db: Vec<f64>,
    /// `G(u, v, w)` at the initial point and after every accepted or
    /// rejected sub-step, in order.
    pub g_substeps: Vec<f64>,
    /// One entry per RIS update.
    pub ris_updates: Vec<RisUpdate>,
    pub timings: Vec<StepTiming>,
    pub final_state: BeamformerState,
    pub converged: bool,
    pub rejections: Vec<Rejection>,
}

#[derive(Serialize)]
struct ReportRow {
    iteration: usize,
    sinr_db: f64,
    g: f64,
    dinkelbach_steps: usize,
    inner_iterations: usize,
}

#[derive(Serialize)]
struct TimingRow {
    iteration: usize,
    v_millis: f64,
    w_millis: f64,
    u_millis: f64,
}

/// JSON summary of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub final_sinr_db: f64,
    pub outer_iterations: usize,
    pub converged: bool,
    pub rejected_steps: usize,
    pub inner_iterations: usize,
    /// `[re, im]` pairs.
    pub u: Vec<[f64; 2]>,
    pub v: Vec<[f64; 2]>,
    pub w: Vec<[f64; 2]>,
}

fn pairs(x: &CVector) -> Vec<[f64; 2]> {
    x.iter().map(|c| [c.re, c.im]).collect()
}

impl SolveReport {
    pub fn outer_iterations(&self) -> usize {
        self.sinr_db.len().saturating_sub(1)
    }

    pub fn final_sinr_db(&self) -> f64 {
        *self.sinr_db.last().expect("report has an initial SINR")
    }

    pub fn inner_iterations(&self) -> usize {
        self.ris_updates.iter().map(RisUpdate::inner_iterations).sum()
    }

    /// Deterministic per-outer-iteration table (no timings).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let g_outer = self.g_substeps.iter().step_by(3);
        for (k, (&s, &gv)) in self.sinr_db.iter().zip(g_outer).enumerate() {
            let update = k.checked_sub(1).and_then(|i| self.ris_updates.get(i));
            wtr.serialize(ReportRow {
                iteration: k,
                sinr_db: s,
                g: gv,
                dinkelbach_steps: update.map_or(0, |u| u.inner.len()),
                inner_iterations: update.map_or(0, RisUpdate::inner_iterations),
            })?;
        }
        wtr.flush().map_err(|e| Error::io("<report>", e))?;
        Ok(())
    }

    pub fn write_timing_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        for (k, t) in self.timings.iter().enumerate() {
            wtr.serialize(TimingRow {
                iteration: k + 1,
                v_millis: t.v_millis,
                w_millis: t.w_millis,
                u_millis: t.u_millis,
            })?;
        }
        wtr.flush().map_err(|e| Error::io("<timing>", e))?;
        Ok(())
    }

    pub fn summary(&self) -> ReportSummary {
        ReportSummary {
            final_sinr_db: self.final_sinr_db(),
            outer_iterations: self.outer_iterations(),
            converged: self.converged,
            rejected_steps: self.rejections.len(),
            inner_iterations: self.inner_iterations(),
            u: pairs(&self.final_state.u),
            v: pairs(&self.final_state.v),
            w: pairs(&self.final_state.w),
        }
    }
}

/// Accepts `candidate` unless it lowers `G` by more than the relative slack.
fn accept_if_monotone(
    scene: &Scene,
    g: &ChannelMatrix,
    state: &mut BeamformerState,
    candidate: BeamformerState,
    current: &mut f64,
    report: &mut SolveReport,
    iteration: usize,
    step: SubStep,
) -> Result<()> {
    let after = objective_g(scene, g, &candidate)?;
    if after >= *current * (1.0 - G_SLACK) {
        *state = candidate;
        *current = after;
    } else {
        report.rejections.push(Rejection {
            iteration,
            step,
            before: *current,
            after,
        });
    }
    report.g_substeps.push(*current);
    Ok(())
}

fn alternate(scene: &Scene, g: &ChannelMatrix, cfg: &CodesignConfig, start: BeamformerState, optimize_v: bool) -> Result<SolveReport> {
    cfg.validate()?;
    scene.validate()?;
    g.check(&scene.geometry)?;
    let optimize_v = optimize_v && scene.geometry.has_ris();
    let mut state = start;
    let mut current = objective_g(scene, g, &state)?;
    let mut report = SolveReport {
        sinr_db: vec![to_db_sinr(scene, current)],
        g_substeps: vec![current],
        ris_updates: Vec::new(),
        timings: Vec::new(),
        final_state: state.clone(),
        converged: false,
        rejections: Vec::new(),
    };
    for iteration in 1..=cfg.p_max {
        let wrap = |e: Error| Error::Outer {
            iteration,
            source: Box::new(e),
        };
        let previous = current;
        let mut timing = StepTiming::default();

        let started = Instant::now();
        if optimize_v {
            let update = optimize_ris(scene, g, &state, cfg).map_err(wrap)?;
            let candidate = BeamformerState {
                v: update.v.clone(),
                ..state.clone()
            };
            report.ris_updates.push(update);
            accept_if_monotone(scene, g, &mut state, candidate, &mut current, &mut report, iteration, SubStep::V)
                .map_err(wrap)?;
        } else {
            report.g_substeps.push(current);
        }
        timing.v_millis = started.elapsed().as_secs_f64() * 1e3;

        let started = Instant::now();
        let w = update_receive(scene, g, &state).map_err(wrap)?;
        let candidate = BeamformerState { w, ..state.clone() };
        accept_if_monotone(scene, g, &mut state, candidate, &mut current, &mut report, iteration, SubStep::W)
            .map_err(wrap)?;
        timing.w_millis = started.elapsed().as_secs_f64() * 1e3;

        let started = Instant::now();
        let u = update_transmit(scene, g, &state).map_err(wrap)?;
        let candidate = BeamformerState { u, ..state.clone() };
        accept_if_monotone(scene, g, &mut state, candidate, &mut current, &mut report, iteration, SubStep::U)
            .map_err(wrap)?;
        timing.u_millis = started.elapsed().as_secs_f64() * 1e3;

        report.timings.push(timing);
        report.sinr_db.push(to_db_sinr(scene, current));
        if (current - previous).abs() < cfg.delta3 * previous.abs() {
            report.converged = true;
            break;
        }
    }
    report.final_state = state;
    Ok(report)
}

/// Alternating optimization of `v`, `w`, `u` in that order.
pub fn codesign(scene: &Scene, g: &ChannelMatrix, cfg: &CodesignConfig) -> Result<SolveReport> {
    let start = initial_state(scene, g, cfg.init_policy)?;
    alternate(scene, g, cfg, start, true)
}

/// Baseline with RIS phases drawn once (uniform, seeded) and frozen; only
/// `w` and `u` are optimized.
pub fn codesign_random_ris(scene: &Scene, g: &ChannelMatrix, cfg: &CodesignConfig, seed: u64) -> Result<SolveReport> {
    let mut start = initial_state(scene, g, cfg.init_policy)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(1);
    start.v = CcmPoint::random(scene.geometry.m_ris, &mut rng).into_vector();
    start.w = update_receive(scene, g, &start)?;
    alternate(scene, g, cfg, start, false)
}
