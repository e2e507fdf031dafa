//! Experiment plumbing: scene files, Monte Carlo sweeps, solver comparisons,
//! the exhaustive phase-grid oracle and beampattern output.
//!
//! Every table written here is a pure function of its inputs and seeds.
//! Wall-clock measurements go to separate timing files so the main outputs
//! stay byte-stable.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::codesign::{codesign, codesign_random_ris, initial_state, BeamformerState, CodesignConfig, SolveReport};
use crate::manifold::CcmPoint;
use crate::scene::{beampattern, ArrayGeometry, ChannelMatrix, ChannelParams, Interference, Scene, INTERFERENCE_ANGLES_DEG};
use crate::uqp::{build_channel_terms, build_uqp, dinkelbach_z, SolverKind, UqpProblem};
use crate::{from_db, to_db, CVector, Error, Result, C64};

/// Largest number of grid points the oracle will enumerate.
pub const ORACLE_BUDGET: u128 = 1 << 20;
/// Iteration cap for the line-search baselines in solver comparisons.
pub const BASELINE_MAX_ITER: usize = 20_000;

fn default_n() -> usize {
    5
}
fn default_m() -> usize {
    128
}
fn half() -> f64 {
    0.5
}
fn default_target() -> f64 {
    30.0
}
fn default_snr() -> f64 {
    10.0
}
fn default_inr() -> f64 {
    30.0
}
fn default_count() -> usize {
    5
}
fn default_offset() -> f64 {
    20.0
}
fn one() -> f64 {
    1.0
}

/// Channel section of a scene file. Powers in dB, angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(default = "ChannelConfig::default_ref_loss_db")]
    pub ref_loss_db: f64,
    #[serde(default = "one")]
    pub ref_distance: f64,
    #[serde(default = "ChannelConfig::default_distance")]
    pub distance: f64,
    #[serde(default = "ChannelConfig::default_exponent")]
    pub path_exponent: f64,
    #[serde(default = "half")]
    pub rician_k: f64,
    /// Defaults to the RIS offset angle.
    #[serde(default)]
    pub los_departure_angle: Option<f64>,
    #[serde(default)]
    pub los_arrival_angle: f64,
}

impl ChannelConfig {
    fn default_ref_loss_db() -> f64 {
        -30.0
    }
    fn default_distance() -> f64 {
        3.0
    }
    fn default_exponent() -> f64 {
        2.2
    }
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            ref_loss_db: Self::default_ref_loss_db(),
            ref_distance: 1.0,
            distance: Self::default_distance(),
            path_exponent: Self::default_exponent(),
            rician_k: 0.5,
            los_departure_angle: None,
            los_arrival_angle: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterferenceConfig {
    pub angle: f64,
    pub inr_db: f64,
}

/// Scene file contents. Omitted keys take the experiment defaults; unknown
/// keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    #[serde(default = "default_n")]
    pub n_radar: usize,
    #[serde(default = "default_m")]
    pub m_ris: usize,
    /// Element spacing in wavelengths.
    #[serde(default = "half")]
    pub spacing_radar: f64,
    #[serde(default = "half")]
    pub spacing_ris: f64,
    #[serde(default = "default_target")]
    pub target_angle: f64,
    #[serde(default = "default_snr")]
    pub snr_db: f64,
    #[serde(default = "one")]
    pub noise_power: f64,
    /// Number of entries taken from the standard interference list.
    #[serde(default = "default_count")]
    pub interference_count: usize,
    /// INR shared by the standard interferences.
    #[serde(default = "default_inr")]
    pub inr_db: f64,
    /// Explicit interferences; replaces `interference_count` / `inr_db`.
    #[serde(default)]
    pub interferences: Option<Vec<InterferenceConfig>>,
    #[serde(default = "default_offset")]
    pub ris_offset_angle: f64,
    #[serde(default)]
    pub channel: ChannelConfig,
}

impl Default for SceneConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all scene keys have defaults")
    }
}

impl SceneConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn build(&self) -> Result<Scene> {
        let interferences = match &self.interferences {
            Some(list) => list
                .iter()
                .map(|i| Interference {
                    angle: i.angle,
                    power: self.noise_power * from_db(i.inr_db),
                })
                .collect(),
            None => {
                if self.interference_count > INTERFERENCE_ANGLES_DEG.len() {
                    return Err(Error::Config(format!(
                        "interference_count {} exceeds the {} standard directions",
                        self.interference_count,
                        INTERFERENCE_ANGLES_DEG.len()
                    )));
                }
                INTERFERENCE_ANGLES_DEG[..self.interference_count]
                    .iter()
                    .map(|&angle| Interference {
                        angle,
                        power: self.noise_power * from_db(self.inr_db),
                    })
                    .collect()
            }
        };
        let c = &self.channel;
        let scene = Scene {
            target_angle: self.target_angle,
            target_power: self.noise_power * from_db(self.snr_db),
            interferences,
            noise_power: self.noise_power,
            ris_offset_angle: self.ris_offset_angle,
            channel: ChannelParams {
                ref_loss: from_db(c.ref_loss_db),
                ref_distance: c.ref_distance,
                distance: c.distance,
                path_exponent: c.path_exponent,
                rician_k: c.rician_k,
                los_departure_angle: c.los_departure_angle.unwrap_or(self.ris_offset_angle),
                los_arrival_angle: c.los_arrival_angle,
                seed: 0,
            },
            geometry: ArrayGeometry::new(self.n_radar, self.m_ris, self.spacing_radar, self.spacing_ris)?,
        };
        scene.validate()?;
        Ok(scene)
    }

    /// Copy with one swept quantity replaced.
    pub fn with(&self, variable: SweepVariable, value: f64) -> Result<Self> {
        let mut out = self.clone();
        let as_count = |what: &str| -> Result<usize> {
            if value >= 0.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::Config(format!("{what} sweep value must be a non-negative integer, got {value}")))
            }
        };
        match variable {
            SweepVariable::Inr => {
                out.inr_db = value;
                if let Some(list) = &mut out.interferences {
                    for i in list {
                        i.inr_db = value;
                    }
                }
            }
            SweepVariable::InterferenceCount => {
                out.interference_count = as_count("interference_count")?;
                out.interferences = None;
            }
            SweepVariable::Distance => out.channel.distance = value,
            SweepVariable::M => out.m_ris = as_count("m")?,
            SweepVariable::N => out.n_radar = as_count("n")?,
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    Inr,
    InterferenceCount,
    Distance,
    M,
    N,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::Inr => "inr",
            SweepVariable::InterferenceCount => "interference_count",
            SweepVariable::Distance => "distance",
            SweepVariable::M => "m",
            SweepVariable::N => "n",
        }
    }
}

/// Optimized RIS, frozen random RIS, or no RIS at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Ris,
    Rris,
    Free,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Ris => "ris",
            Mode::Rris => "rris",
            Mode::Free => "free",
        }
    }
}

fn default_modes() -> Vec<Mode> {
    vec![Mode::Ris]
}

fn default_solver() -> SolverKind {
    SolverKind::Rnm
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub scene: SceneConfig,
    pub sweep: SweepVariable,
    pub values: Vec<f64>,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_solver")]
    pub solver: SolverKind,
    #[serde(default = "default_modes")]
    pub modes: Vec<Mode>,
    #[serde(default)]
    pub codesign: CodesignConfig,
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Config("sweep values must be non-empty".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.modes.is_empty() {
            return Err(Error::Config("at least one mode is required".into()));
        }
        self.codesign.validate()?;
        for &value in &self.values {
            self.scene.with(self.sweep, value)?.build()?;
        }
        Ok(())
    }
}

/// Seed of trial `index`: `base ⊕ index`.
pub fn trial_seed(base: u64, index: usize) -> u64 {
    base ^ index as u64
}

/// Result of one codesign run in a given mode.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub sinr_linear: f64,
    pub report: SolveReport,
    pub millis: f64,
}

/// One codesign run. The channel depends only on `seed` and the geometry,
/// so optimized and random RIS trials with the same seed share it.
pub fn run_trial(scene: &Scene, mode: Mode, seed: u64, cfg: &CodesignConfig) -> Result<TrialOutcome> {
    let started = Instant::now();
    let report = match mode {
        Mode::Free => {
            let mut free = scene.clone();
            free.geometry = ArrayGeometry::new(
                scene.geometry.n_radar,
                0,
                scene.geometry.spacing_radar,
                scene.geometry.spacing_ris,
            )?;
            codesign(&free, &ChannelMatrix::empty(free.geometry.n_radar), cfg)?
        }
        Mode::Ris => codesign(scene, &scene.draw_channel(seed)?, cfg)?,
        Mode::Rris => codesign_random_ris(scene, &scene.draw_channel(seed)?, cfg, seed)?,
    };
    Ok(TrialOutcome {
        sinr_linear: crate::from_db(report.final_sinr_db()),
        report,
        millis: started.elapsed().as_secs_f64() * 1e3,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub variable: SweepVariable,
    pub value: f64,
    pub mode: Mode,
    pub trials: usize,
    pub failures: usize,
    /// Mean of the per-trial linear SINR.
    pub mean_sinr_linear: f64,
    /// `10 log10` of `mean_sinr_linear`.
    pub mean_sinr_db: f64,
    /// Standard deviation of the per-trial SINR in dB.
    pub std_sinr_db: f64,
    pub mean_outer_iterations: f64,
    pub mean_inner_iterations: f64,
    /// Wall-clock per trial; excluded from the deterministic CSV.
    #[serde(skip)]
    pub mean_millis: f64,
    /// `(trial, message)` of each failed trial.
    #[serde(skip)]
    pub errors: Vec<(usize, String)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

#[derive(Serialize)]
struct TimingRow<'a> {
    variable: &'a str,
    value: f64,
    mode: &'a str,
    mean_millis: f64,
}

impl ResultTable {
    pub fn total_failures(&self) -> usize {
        self.rows.iter().map(|r| r.failures).sum()
    }

    pub fn row(&self, value: f64, mode: Mode) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.value == value && r.mode == mode)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        for row in &self.rows {
            wtr.serialize(row)?;
        }
        wtr.flush().map_err(|e| Error::io("<table>", e))?;
        Ok(())
    }

    pub fn write_timing_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        for row in &self.rows {
            wtr.serialize(TimingRow {
                variable: row.variable.name(),
                value: row.value,
                mode: row.mode.name(),
                mean_millis: row.mean_millis,
            })?;
        }
        wtr.flush().map_err(|e| Error::io("<timing>", e))?;
        Ok(())
    }
}

fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        f64::NAN
    } else {
        x.iter().sum::<f64>() / x.len() as f64
    }
}

fn std_dev(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

/// Monte Carlo sweep: for every sweep value and mode, `trials` codesign runs
/// on channels seeded `seed ⊕ trial`. Failed trials are counted, not fatal.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    let cfg = CodesignConfig {
        solver: spec.solver,
        ..spec.codesign
    };
    let mut table = ResultTable::default();
    for &value in &spec.values {
        let scene = spec.scene.with(spec.sweep, value)?.build()?;
        for &mode in &spec.modes {
            let mut sinr = Vec::new();
            let mut outer = Vec::new();
            let mut inner = Vec::new();
            let mut millis = Vec::new();
            let mut errors = Vec::new();
            for trial in 0..spec.trials {
                match run_trial(&scene, mode, trial_seed(spec.seed, trial), &cfg) {
                    Ok(t) => {
                        sinr.push(t.sinr_linear);
                        outer.push(t.report.outer_iterations() as f64);
                        inner.push(t.report.inner_iterations() as f64);
                        millis.push(t.millis);
                    }
                    Err(e) => errors.push((trial, e.to_string())),
                }
            }
            let mean_sinr_linear = mean(&sinr);
            let db: Vec<f64> = sinr.iter().map(|&s| to_db(s)).collect();
            table.rows.push(ResultRow {
                variable: spec.sweep,
                value,
                mode,
                trials: spec.trials,
                failures: errors.len(),
                mean_sinr_linear,
                mean_sinr_db: to_db(mean_sinr_linear),
                std_sinr_db: std_dev(&db),
                mean_outer_iterations: mean(&outer),
                mean_inner_iterations: mean(&inner),
                mean_millis: mean(&millis),
                errors,
            });
        }
    }
    Ok(table)
}

/// Per-solver record of a full codesign run.
#[derive(Debug, Clone)]
pub struct SolverComparison {
    pub solver: SolverKind,
    /// Total inner iterations of each RIS update.
    pub update_iterations: Vec<usize>,
    pub update_millis: Vec<f64>,
    /// Inner iterations of the very first quadratic subproblem.
    pub first_subproblem_iterations: usize,
    pub sinr_db: Vec<f64>,
}

impl SolverComparison {
    pub fn final_sinr_db(&self) -> f64 {
        *self.sinr_db.last().expect("report has an initial SINR")
    }

    pub fn first_update_iterations(&self) -> usize {
        self.update_iterations.first().copied().unwrap_or(0)
    }
}

/// Runs the codesign loop once per solver from the same initial point. The
/// line-search baselines get an iteration cap of [`BASELINE_MAX_ITER`].
pub fn run_convergence_comparison(
    scene: &Scene,
    g: &ChannelMatrix,
    solvers: &[SolverKind],
    cfg: &CodesignConfig,
) -> Result<Vec<SolverComparison>> {
    solvers
        .iter()
        .map(|&solver| {
            let mut c = CodesignConfig { solver, ..*cfg };
            if solver != SolverKind::Rnm {
                c.rnm.max_iter = c.rnm.max_iter.max(BASELINE_MAX_ITER);
            }
            let report = codesign(scene, g, &c)?;
            Ok(SolverComparison {
                solver,
                update_iterations: report.ris_updates.iter().map(|u| u.inner_iterations()).collect(),
                update_millis: report.ris_updates.iter().map(|u| u.millis).collect(),
                first_subproblem_iterations: report
                    .ris_updates
                    .first()
                    .and_then(|u| u.inner.first())
                    .map_or(0, |t| t.iterations()),
                sinr_db: report.sinr_db,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct ComparisonRow {
    solver: &'static str,
    update: usize,
    iterations: usize,
    sinr_db: f64,
}

#[derive(Serialize)]
struct ComparisonTimingRow {
    solver: &'static str,
    update: usize,
    millis: f64,
}

/// Iteration counts (deterministic) and timings (separate) per RIS update.
pub fn write_comparison_csv<W: std::io::Write, T: std::io::Write>(results: &[SolverComparison], out: W, timing: T) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let mut tw = csv::Writer::from_writer(timing);
    for r in results {
        for (k, &it) in r.update_iterations.iter().enumerate() {
            wtr.serialize(ComparisonRow {
                solver: r.solver.name(),
                update: k + 1,
                iterations: it,
                sinr_db: r.sinr_db[k + 1],
            })?;
            tw.serialize(ComparisonTimingRow {
                solver: r.solver.name(),
                update: k + 1,
                millis: r.update_millis[k],
            })?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<comparison>", e))?;
    tw.flush().map_err(|e| Error::io("<comparison timing>", e))?;
    Ok(())
}

/// Exhaustive minimum over the phase grid `{2πk/P}`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub best: CVector,
    /// `f − λ_v M` at `best`.
    pub best_f: f64,
    /// Largest increase of the objective from `best` to a grid neighbor
    /// (one element moved by one phase step).
    pub neighbor_gap: f64,
}

pub fn run_oracle(p: &UqpProblem, phases: usize) -> Result<OracleResult> {
    let m = p.dim();
    if phases == 0 || m == 0 {
        return Err(Error::Config("oracle needs at least one element and one phase".into()));
    }
    let requested = (phases as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    if requested > ORACLE_BUDGET {
        return Err(Error::BudgetExceeded {
            requested,
            budget: ORACLE_BUDGET,
        });
    }
    let table: Vec<C64> = (0..phases)
        .map(|k| C64::from_polar(1.0, std::f64::consts::TAU * k as f64 / phases as f64))
        .collect();
    let build = |idx: &[usize]| CVector::from_iterator(m, idx.iter().map(|&k| table[k]));
    let mut idx = vec![0usize; m];
    let mut best_idx = idx.clone();
    let mut best_f = f64::INFINITY;
    'outer: loop {
        let f = p.reduced_objective(&build(&idx));
        if f < best_f {
            best_f = f;
            best_idx.clone_from(&idx);
        }
        for d in 0..m {
            idx[d] += 1;
            if idx[d] < phases {
                continue 'outer;
            }
            idx[d] = 0;
        }
        break;
    }
    let mut neighbor_gap: f64 = 0.0;
    for d in 0..m {
        for step in [1, phases - 1] {
            let mut n = best_idx.clone();
            n[d] = (n[d] + step) % phases;
            neighbor_gap = neighbor_gap.max(p.reduced_objective(&build(&n)) - best_f);
        }
    }
    Ok(OracleResult {
        best: build(&best_idx),
        best_f,
        neighbor_gap,
    })
}

/// The first RIS subproblem of a scene from the matched starting point.
pub fn first_subproblem(scene: &Scene, g: &ChannelMatrix) -> Result<(UqpProblem, CcmPoint)> {
    let state = initial_state(scene, g, crate::codesign::InitPolicy::Matched)?;
    let terms = build_channel_terms(scene, g, &state.u, &state.w)?;
    let v0 = CcmPoint::new(state.v)?;
    let z = dinkelbach_z(&terms, v0.as_vector());
    Ok((build_uqp(&terms, z)?, v0))
}

/// `[-90°, 90°]` in 0.1° steps.
pub fn default_grid() -> Vec<f64> {
    (-900..=900).map(|k| k as f64 / 10.0).collect()
}

/// Beampattern normalized to a 0 dB peak.
pub fn normalized_beampattern(scene: &Scene, g: &ChannelMatrix, state: &BeamformerState, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    let raw = beampattern(scene, g, state, grid)?;
    let peak = raw.iter().map(|&(_, p)| p).fold(f64::NEG_INFINITY, f64::max);
    Ok(raw.into_iter().map(|(a, p)| (a, p - peak)).collect())
}

/// Writes `angle_deg,pattern_db` rows.
pub fn emit_beampattern(scene: &Scene, g: &ChannelMatrix, state: &BeamformerState, grid: &[f64], path: &Path) -> Result<()> {
    let rows = normalized_beampattern(scene, g, state, grid)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut wtr = csv::Writer::from_writer(BufWriter::new(file));
    wtr.write_record(["angle_deg", "pattern_db"])?;
    for (a, p) in rows {
        wtr.serialize((a, p))?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Creates `path`'s file and hands a buffered writer to `f`.
pub fn write_file<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(BufWriter<File>) -> Result<()>,
{
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    f(BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codesign::InitPolicy;
    use crate::CMatrix;

    #[test]
    fn default_scene_file_matches_standard_scene() {
        let built = SceneConfig::default().build().unwrap();
        let standard = Scene::standard(5, 128, 5).unwrap();
        assert_eq!(built.geometry, standard.geometry);
        assert_eq!(built.interferences.len(), 5);
        assert!((built.target_power - standard.target_power).abs() < 1e-12);
        for (a, b) in built.interferences.iter().zip(&standard.interferences) {
            assert_eq!(a.angle, b.angle);
            assert!((a.power - b.power).abs() < 1e-9);
        }
        assert_eq!(built.draw_channel(4).unwrap(), standard.draw_channel(4).unwrap());
    }

    #[test]
    fn scene_files_reject_unknown_keys_and_bad_counts() {
        assert!(serde_json::from_str::<SceneConfig>(r#"{"m_ris": 4, "typo": 1}"#).is_err());
        assert!(serde_json::from_str::<SceneConfig>(r#"{"channel": {"k": 1}}"#).is_err());
        let cfg: SceneConfig = serde_json::from_str(r#"{"interference_count": 99}"#).unwrap();
        assert!(matches!(cfg.build(), Err(Error::Config(_))));
        let cfg: SceneConfig = serde_json::from_str(r#"{"interferences": [{"angle": 10, "inr_db": 20}], "m_ris": 0}"#).unwrap();
        let scene = cfg.build().unwrap();
        assert_eq!(scene.interferences.len(), 1);
        assert!((scene.interferences[0].power - 100.0).abs() < 1e-9);
    }

    #[test]
    fn sweep_substitution() {
        let base = SceneConfig::default();
        assert_eq!(base.with(SweepVariable::M, 64.0).unwrap().m_ris, 64);
        assert_eq!(base.with(SweepVariable::Distance, 2.0).unwrap().channel.distance, 2.0);
        assert_eq!(base.with(SweepVariable::Inr, 10.0).unwrap().inr_db, 10.0);
        assert!(base.with(SweepVariable::N, 2.5).is_err());
        assert!(base.with(SweepVariable::InterferenceCount, -1.0).is_err());
    }

    #[test]
    fn trial_seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..100).map(|t| trial_seed(12345, t)).collect();
        assert_eq!(seeds.len(), 100);
        assert_eq!(trial_seed(7, 0), 7);
    }

    #[test]
    fn oracle_enumerates_the_grid() {
        // Separable problem with minimizers exactly on the 4-phase grid.
        let h = CVector::from_vec(vec![C64::new(-1.0, 0.0), C64::new(0.0, -2.0)]);
        let p = UqpProblem::generic(CMatrix::identity(2, 2), h).unwrap();
        let r = run_oracle(&p, 4).unwrap();
        assert!((r.best[0] - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((r.best[1] - C64::new(0.0, 1.0)).norm() < 1e-12);
        assert!((r.best_f - (2.0 - 6.0)).abs() < 1e-12);
        // Moving element 1 by a quarter turn raises 2Re{v* h} from −4 to 0.
        assert!((r.neighbor_gap - 4.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_budget_is_enforced() {
        let p = UqpProblem::generic(CMatrix::identity(6, 6), CVector::zeros(6)).unwrap();
        assert!(matches!(run_oracle(&p, 16), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn normalized_pattern_peaks_at_zero_db() {
        let scene = SceneConfig { m_ris: 8, ..SceneConfig::default() }.build().unwrap();
        let g = scene.draw_channel(1).unwrap();
        let state = initial_state(&scene, &g, InitPolicy::Matched).unwrap();
        let grid = default_grid();
        assert_eq!(grid.len(), 1801);
        let pattern = normalized_beampattern(&scene, &g, &state, &grid).unwrap();
        let peak = pattern.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(peak, 0.0);
    }

    #[test]
    fn small_experiment_is_deterministic() {
        let spec: ExperimentSpec = serde_json::from_str(
            r#"{"scene": {"m_ris": 8, "n_radar": 4, "interference_count": 3},
                "sweep": "m", "values": [0, 8], "trials": 2, "seed": 3,
                "modes": ["ris", "rris", "free"]}"#,
        )
        .unwrap();
        let a = run_experiment(&spec).unwrap();
        let b = run_experiment(&spec).unwrap();
        assert_eq!(a.rows.len(), 6);
        assert_eq!(a.total_failures(), 0);
        let mut ca = Vec::new();
        let mut cb = Vec::new();
        a.write_csv(&mut ca).unwrap();
        b.write_csv(&mut cb).unwrap();
        assert_eq!(ca, cb);
        let ris = a.row(8.0, Mode::Ris).unwrap();
        let free = a.row(8.0, Mode::Free).unwrap();
        assert!(ris.mean_sinr_db.is_finite() && free.mean_sinr_db.is_finite());
    }

    #[test]
    fn experiment_validation() {
        let mut spec: ExperimentSpec = serde_json::from_str(r#"{"sweep": "inr", "values": [10], "trials": 1}"#).unwrap();
        assert_eq!(spec.modes, vec![Mode::Ris]);
        assert!(spec.validate().is_ok());
        spec.trials = 0;
        assert!(spec.validate().is_err());
        spec.trials = 1;
        spec.values.clear();
        assert!(spec.validate().is_err());
        assert!(serde_json::from_str::<ExperimentSpec>(r#"{"sweep": "height", "values": [1], "trials": 1}"#).is_err());
    }
}
