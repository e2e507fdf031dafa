//! Array geometry, steering vectors, the radar-RIS channel and the composite
//! array response.
//!
//! Angles cross the public interface in degrees and are converted to radians
//! exactly once, inside the steering-vector routines.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::codesign::BeamformerState;
use crate::{from_db, to_db, CMatrix, CVector, Error, Result, C64};

/// Element counts and spacings of the radar ULA and the RIS ULA.
///
/// Spacings are in wavelengths; the phase increment between neighbouring
/// elements is `2π · spacing · sin θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub n_radar: usize,
    pub m_ris: usize,
    pub spacing_radar: f64,
    pub spacing_ris: f64,
}

impl ArrayGeometry {
    pub fn new(n_radar: usize, m_ris: usize, spacing_radar: f64, spacing_ris: f64) -> Result<Self> {
        let geometry = Self {
            n_radar,
            m_ris,
            spacing_radar,
            spacing_ris,
        };
        geometry.validate()?;
        Ok(geometry)
    }

    /// Half-wavelength spacing on both arrays.
    pub fn half_wavelength(n_radar: usize, m_ris: usize) -> Result<Self> {
        Self::new(n_radar, m_ris, 0.5, 0.5)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_radar == 0 {
            return Err(Error::InvalidGeometry("radar array needs at least one element".into()));
        }
        for (name, s) in [("radar", self.spacing_radar), ("RIS", self.spacing_ris)] {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::InvalidGeometry(format!("{name} spacing must be positive, got {s}")));
            }
        }
        Ok(())
    }

    /// `ν · d_R` in radians.
    pub fn wavenumber_spacing_radar(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.spacing_radar
    }

    /// `ν · d_I` in radians.
    pub fn wavenumber_spacing_ris(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.spacing_ris
    }

    pub fn has_ris(&self) -> bool {
        self.m_ris > 0
    }
}

fn ula_steering(len: usize, wavenumber_spacing: f64, angle_deg: f64) -> CVector {
    let phase = -wavenumber_spacing * angle_deg.to_radians().sin();
    CVector::from_iterator(len, (0..len).map(|k| C64::from_polar(1.0, phase * k as f64)))
}

/// Radar steering vector `a(θ)`, element `k` equal to `exp(-j ν d_R k sin θ)`.
pub fn steering_radar(geometry: &ArrayGeometry, angle_deg: f64) -> CVector {
    ula_steering(geometry.n_radar, geometry.wavenumber_spacing_radar(), angle_deg)
}

/// RIS steering vector `b(θ)`. Rejects RIS-free geometries.
pub fn steering_ris(geometry: &ArrayGeometry, angle_deg: f64) -> Result<CVector> {
    if geometry.m_ris == 0 {
        return Err(Error::InvalidGeometry("RIS steering vector requested with M = 0".into()));
    }
    Ok(ula_steering(geometry.m_ris, geometry.wavenumber_spacing_ris(), angle_deg))
}

/// Large-scale and small-scale parameters of the radar-RIS link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Path loss at the reference distance, linear.
    pub ref_loss: f64,
    /// Reference distance in meters.
    pub ref_distance: f64,
    /// Radar-RIS distance in meters.
    pub distance: f64,
    pub path_exponent: f64,
    pub rician_k: f64,
    /// Angle of the LoS component at the radar array, degrees.
    pub los_departure_angle: f64,
    /// Angle of the LoS component at the RIS, degrees.
    pub los_arrival_angle: f64,
    pub seed: u64,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("ref_loss", self.ref_loss),
            ("ref_distance", self.ref_distance),
            ("distance", self.distance),
        ];
        for (name, x) in positive {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::InvalidScene(format!("{name} must be positive, got {x}")));
            }
        }
        if !(self.rician_k >= 0.0) {
            return Err(Error::InvalidScene(format!("rician_k must be non-negative, got {}", self.rician_k)));
        }
        if !self.path_exponent.is_finite() {
            return Err(Error::InvalidScene("path_exponent must be finite".into()));
        }
        Ok(())
    }
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            ref_loss: from_db(-30.0),
            ref_distance: 1.0,
            distance: 3.0,
            path_exponent: 2.2,
            rician_k: 0.5,
            los_departure_angle: DEFAULT_RIS_OFFSET_DEG,
            los_arrival_angle: 0.0,
            seed: 0,
        }
    }
}

/// `C = C_0 (D / D_0)^(-η)`.
pub fn path_loss(channel: &ChannelParams) -> f64 {
    channel.ref_loss * (channel.distance / channel.ref_distance).powf(-channel.path_exponent)
}

/// The `M × N` radar-RIS channel `G`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    pub g: CMatrix,
}

impl ChannelMatrix {
    /// The degenerate `0 × N` channel of a RIS-free radar.
    pub fn empty(n_radar: usize) -> Self {
        Self {
            g: CMatrix::zeros(0, n_radar),
        }
    }

    pub fn zeros(geometry: &ArrayGeometry) -> Self {
        Self {
            g: CMatrix::zeros(geometry.m_ris, geometry.n_radar),
        }
    }

    pub fn check(&self, geometry: &ArrayGeometry) -> Result<()> {
        if self.g.nrows() != geometry.m_ris {
            return Err(Error::DimensionMismatch {
                what: "channel rows (M)",
                expected: geometry.m_ris,
                found: self.g.nrows(),
            });
        }
        if self.g.ncols() != geometry.n_radar {
            return Err(Error::DimensionMismatch {
                what: "channel columns (N)",
                expected: geometry.n_radar,
                found: self.g.ncols(),
            });
        }
        Ok(())
    }
}

/// Rician draw of `G`, scaled by the path loss.
///
/// The LoS part is the rank-one `b(arrival) aᵀ(departure)`; the NLoS part has
/// i.i.d. `CN(0, 1)` entries. Same seed, same matrix.
pub fn draw_channel(params: &ChannelParams, geometry: &ArrayGeometry, seed: u64) -> Result<ChannelMatrix> {
    params.validate()?;
    let b = steering_ris(geometry, params.los_arrival_angle)?;
    let a = steering_radar(geometry, params.los_departure_angle);
    let (m, n) = (geometry.m_ris, geometry.n_radar);

    let k = params.rician_k;
    let (w_los, w_nlos) = if k.is_infinite() {
        (1.0, 0.0)
    } else {
        ((k / (1.0 + k)).sqrt(), (1.0 / (1.0 + k)).sqrt())
    };
    let scale = path_loss(params).sqrt();

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let half = std::f64::consts::FRAC_1_SQRT_2;
    // Column-major fill order is part of the determinism contract.
    let g = DMatrix::from_fn(m, n, |i, j| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        let nlos = C64::new(re * half, im * half);
        (b[i] * a[j] * w_los + nlos * w_nlos) * scale
    });
    Ok(ChannelMatrix { g })
}

pub const DEFAULT_TARGET_DEG: f64 = 30.0;
pub const DEFAULT_RIS_OFFSET_DEG: f64 = 20.0;
pub const DEFAULT_SNR_DB: f64 = 10.0;
pub const DEFAULT_INR_DB: f64 = 30.0;

/// Interference directions used by the experiments, in the order they are
/// added: the three-source cluster, two isolated sources, then ten more.
pub const INTERFERENCE_ANGLES_DEG: [f64; 15] = [
    -25.5, -26.2, -26.9, -39.0, 70.0, 79.0, 64.0, -12.0, -41.0, -43.0, -47.0, -52.0, -59.0, -65.0, -74.0,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interference {
    pub angle: f64,
    /// Linear power `σ_i²`.
    pub power: f64,
}

/// A complete radar scene: target, interferences, noise, RIS placement and
/// channel statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub target_angle: f64,
    /// Linear target power `σ_0²`.
    pub target_power: f64,
    pub interferences: Vec<Interference>,
    pub noise_power: f64,
    /// Angle `θ_tr` between the radar broadside and the RIS broadside, degrees.
    pub ris_offset_angle: f64,
    pub channel: ChannelParams,
    pub geometry: ArrayGeometry,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.channel.validate()?;
        if !(self.noise_power.is_finite() && self.noise_power > 0.0) {
            return Err(Error::InvalidScene(format!("noise power must be positive, got {}", self.noise_power)));
        }
        if !(self.target_power.is_finite() && self.target_power > 0.0) {
            return Err(Error::InvalidScene(format!("target power must be positive, got {}", self.target_power)));
        }
        for (i, intf) in self.interferences.iter().enumerate() {
            if !(intf.power.is_finite() && intf.power > 0.0) {
                return Err(Error::InvalidScene(format!("interference {i} power must be positive")));
            }
            if intf.angle == self.target_angle {
                return Err(Error::InvalidScene(format!(
                    "interference {i} coincides with the target at {} deg",
                    intf.angle
                )));
            }
        }
        Ok(())
    }

    /// Scene with the experiment defaults: target at 30° with 10 dB SNR, the
    /// first `interference_count` entries of [`INTERFERENCE_ANGLES_DEG`] at
    /// 30 dB INR, unit noise, θ_tr = 20°, half-wavelength arrays.
    pub fn standard(n_radar: usize, m_ris: usize, interference_count: usize) -> Result<Self> {
        if interference_count > INTERFERENCE_ANGLES_DEG.len() {
            return Err(Error::InvalidScene(format!(
                "at most {} standard interferences, asked for {interference_count}",
                INTERFERENCE_ANGLES_DEG.len()
            )));
        }
        let scene = Self {
            target_angle: DEFAULT_TARGET_DEG,
            target_power: from_db(DEFAULT_SNR_DB),
            interferences: INTERFERENCE_ANGLES_DEG[..interference_count]
                .iter()
                .map(|&angle| Interference {
                    angle,
                    power: from_db(DEFAULT_INR_DB),
                })
                .collect(),
            noise_power: 1.0,
            ris_offset_angle: DEFAULT_RIS_OFFSET_DEG,
            channel: ChannelParams::default(),
            geometry: ArrayGeometry::half_wavelength(n_radar, m_ris)?,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn interference_count(&self) -> usize {
        self.interferences.len()
    }

    pub fn draw_channel(&self, seed: u64) -> Result<ChannelMatrix> {
        if self.geometry.has_ris() {
            draw_channel(&self.channel, &self.geometry, seed)
        } else {
            Ok(ChannelMatrix::empty(self.geometry.n_radar))
        }
    }

    /// Set every interference to the same INR (dB over the noise floor).
    pub fn set_inr_db(&mut self, inr_db: f64) {
        let power = self.noise_power * from_db(inr_db);
        for intf in &mut self.interferences {
            intf.power = power;
        }
    }
}

/// The N-vector `a(θ) + Gᵀ Diag(v) b(θ + θ_tr)`, i.e. `Φ(θ)` without its
/// trailing `aᵀ(θ)` factor.
pub fn receive_response(scene: &Scene, g: &ChannelMatrix, v: &CVector, angle_deg: f64) -> Result<CVector> {
    let geometry = &scene.geometry;
    let mut out = steering_radar(geometry, angle_deg);
    if geometry.m_ris == 0 {
        return Ok(out);
    }
    g.check(geometry)?;
    if v.len() != geometry.m_ris {
        return Err(Error::DimensionMismatch {
            what: "RIS coefficient vector",
            expected: geometry.m_ris,
            found: v.len(),
        });
    }
    let b = steering_ris(geometry, angle_deg + scene.ris_offset_angle)?;
    let vb = v.component_mul(&b);
    out += g.g.transpose() * vb;
    Ok(out)
}

/// `Φ(θ) = (a(θ) + Gᵀ Diag(v) b(θ + θ_tr)) aᵀ(θ)`.
pub fn compose_phi(scene: &Scene, g: &ChannelMatrix, v: &CVector, angle_deg: f64) -> Result<CMatrix> {
    let r = receive_response(scene, g, v, angle_deg)?;
    let a = steering_radar(&scene.geometry, angle_deg);
    Ok(&r * a.transpose())
}

/// `Φ(θ) u` without forming the matrix.
pub fn phi_times(scene: &Scene, g: &ChannelMatrix, v: &CVector, angle_deg: f64, u: &CVector) -> Result<CVector> {
    let r = receive_response(scene, g, v, angle_deg)?;
    let a = steering_radar(&scene.geometry, angle_deg);
    if u.len() != a.len() {
        return Err(Error::DimensionMismatch {
            what: "transmit weights",
            expected: a.len(),
            found: u.len(),
        });
    }
    Ok(r * a.transpose().dot(&u.transpose()))
}

/// `wᴴ Φ(θ) u`.
pub fn beam_response(
    scene: &Scene,
    g: &ChannelMatrix,
    state: &BeamformerState,
    angle_deg: f64,
) -> Result<C64> {
    let pu = phi_times(scene, g, &state.v, angle_deg, &state.u)?;
    if state.w.len() != pu.len() {
        return Err(Error::DimensionMismatch {
            what: "receive weights",
            expected: pu.len(),
            found: state.w.len(),
        });
    }
    Ok(state.w.dotc(&pu))
}

/// The codesign objective `G(u, v, w)`: SINR without the target power.
pub fn objective_g(scene: &Scene, g: &ChannelMatrix, state: &BeamformerState) -> Result<f64> {
    let w_norm2 = state.w.norm_squared();
    if !(w_norm2 > 0.0) {
        return Err(Error::ZeroReceive);
    }
    let signal = beam_response(scene, g, state, scene.target_angle)?.norm_sqr();
    let mut denom = scene.noise_power * w_norm2;
    for intf in &scene.interferences {
        denom += intf.power * beam_response(scene, g, state, intf.angle)?.norm_sqr();
    }
    Ok(signal / denom)
}

/// Output SINR (linear): `σ_0² |wᴴΦ(θ_0)u|² / (wᴴ Ψ_u w + σ_n² wᴴw)`.
pub fn output_sinr(scene: &Scene, g: &ChannelMatrix, state: &BeamformerState) -> Result<f64> {
    Ok(scene.target_power * objective_g(scene, g, state)?)
}

/// Output SINR in dB for a given value of `G`.
pub fn to_db_sinr(scene: &Scene, g_value: f64) -> f64 {
    to_db(scene.target_power * g_value)
}

pub fn output_sinr_db(scene: &Scene, g: &ChannelMatrix, state: &BeamformerState) -> Result<f64> {
    output_sinr(scene, g, state).map(to_db)
}

/// Joint transmit/receive pattern `|wᴴ Φ(θ) u|²` in dB over `grid`.
pub fn beampattern(
    scene: &Scene,
    g: &ChannelMatrix,
    state: &BeamformerState,
    grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    grid.iter()
        .map(|&angle| {
            let p = beam_response(scene, g, state, angle)?.norm_sqr();
            Ok((angle, to_db(p)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn geom(n: usize, m: usize) -> ArrayGeometry {
        ArrayGeometry::half_wavelength(n, m).unwrap()
    }

    #[test]
    fn steering_broadside_is_all_ones() {
        let a = steering_radar(&geom(4, 0), 0.0);
        for x in a.iter() {
            assert_relative_eq!(x.re, 1.0);
            assert_relative_eq!(x.im, 0.0);
        }
        let b = steering_ris(&geom(1, 3), 0.0).unwrap();
        assert!(b.iter().all(|x| (x - C64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn steering_thirty_degrees() {
        let a = steering_radar(&geom(2, 0), 30.0);
        assert!((a[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((a[1] - C64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn steering_odd_symmetry() {
        let g = geom(5, 0);
        let plus = steering_radar(&g, 17.0);
        let minus = steering_radar(&g, -17.0);
        assert!((plus.conjugate() - minus).norm() < 1e-14);
    }

    #[test]
    fn ris_steering_endfire_and_rejects_empty() {
        let b = steering_ris(&geom(1, 2), 90.0).unwrap();
        assert!((b[1] - C64::new(-1.0, 0.0)).norm() < 1e-15);
        assert!(steering_ris(&geom(1, 0), 10.0).is_err());
    }

    #[test]
    fn ris_steering_matches_scalar_loop() {
        let g = geom(1, 8);
        let b = steering_ris(&g, 50.0).unwrap();
        let s = 50f64.to_radians().sin();
        for m in 0..8 {
            let phase = -std::f64::consts::PI * m as f64 * s;
            let expected = C64::new(phase.cos(), phase.sin());
            assert!((b[m] - expected).norm() < 1e-14);
        }
    }

    #[test]
    fn path_loss_values() {
        let mut p = ChannelParams::default();
        p.ref_loss = 1e-3;
        p.distance = p.ref_distance;
        assert_relative_eq!(path_loss(&p), 1e-3, max_relative = 1e-15);
        p.distance = 7.0;
        p.path_exponent = 0.0;
        assert_relative_eq!(path_loss(&p), 1e-3, max_relative = 1e-15);
        p.distance = 3.0;
        p.path_exponent = 2.2;
        // 1e-3 * 3^-2.2 = 1e-3 * exp(-2.2 ln 3)
        assert_relative_eq!(path_loss(&p), 8.919_350_686_224_785e-5, max_relative = 1e-12);
    }

    #[test]
    fn channel_is_deterministic_and_los_limit() {
        let g = geom(5, 16);
        let mut p = ChannelParams::default();
        let a = draw_channel(&p, &g, 7).unwrap();
        let b = draw_channel(&p, &g, 7).unwrap();
        assert_eq!(a, b);
        let c = draw_channel(&p, &g, 8).unwrap();
        assert_ne!(a, c);

        p.rician_k = 1e9;
        let strong = draw_channel(&p, &g, 3).unwrap();
        let los = steering_ris(&g, p.los_arrival_angle).unwrap()
            * steering_radar(&g, p.los_departure_angle).transpose()
            * C64::from(path_loss(&p).sqrt());
        assert!((&strong.g - &los).norm() / los.norm() < 1e-4);
    }

    #[test]
    fn channel_second_moment_matches_path_loss() {
        let g = geom(2, 2);
        let p = ChannelParams::default();
        let c = path_loss(&p);
        let draws = 10_000;
        let mut acc = 0.0;
        for seed in 0..draws {
            let ch = draw_channel(&p, &g, seed).unwrap();
            acc += ch.g[(1, 0)].norm_sqr();
        }
        let mean = acc / draws as f64;
        assert!((mean - c).abs() / c < 0.05, "mean {mean} vs {c}");
    }

    fn random_scene(n: usize, m: usize, seed: u64) -> (Scene, ChannelMatrix, CVector) {
        let mut scene = Scene::standard(n, m, 2).unwrap();
        scene.channel.distance = 1.0;
        let g = scene.draw_channel(seed).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(seed + 100);
        let v = CVector::from_fn(m, |_, _| C64::from_polar(1.0, rng.random::<f64>() * 6.0));
        (scene, g, v)
    }

    #[test]
    fn phi_degenerate_forms() {
        let (scene, g, v) = random_scene(3, 4, 1);
        let a = steering_radar(&scene.geometry, 12.0);
        let zero = ChannelMatrix::zeros(&scene.geometry);
        let phi = compose_phi(&scene, &zero, &v, 12.0).unwrap();
        assert!((phi - &a * a.transpose()).norm() < 1e-14);

        let free = Scene::standard(3, 0, 2).unwrap();
        let phi = compose_phi(&free, &ChannelMatrix::empty(3), &CVector::zeros(0), 12.0).unwrap();
        assert!((phi - &a * a.transpose()).norm() < 1e-14);

        assert!(compose_phi(&scene, &g, &CVector::zeros(3), 12.0).is_err());
    }

    #[test]
    fn phi_matches_scalar_loop() {
        let (scene, g, v) = random_scene(3, 4, 2);
        let theta = -33.0;
        let phi = compose_phi(&scene, &g, &v, theta).unwrap();
        let s = f64::to_radians(theta).sin();
        let s_ris = f64::to_radians(theta + scene.ris_offset_angle).sin();
        let pi = std::f64::consts::PI;
        for r in 0..3 {
            for c in 0..3 {
                let a_r = C64::from_polar(1.0, -pi * r as f64 * s);
                let a_c = C64::from_polar(1.0, -pi * c as f64 * s);
                let mut nlos = C64::new(0.0, 0.0);
                for m in 0..4 {
                    nlos += g.g[(m, r)] * v[m] * C64::from_polar(1.0, -pi * m as f64 * s_ris);
                }
                let expected = (a_r + nlos) * a_c;
                assert!((phi[(r, c)] - expected).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn phi_nlos_part_is_linear_in_v() {
        let (scene, g, v1) = random_scene(3, 6, 3);
        let (_, _, v2) = random_scene(3, 6, 4);
        let zero = CVector::zeros(6);
        let base = compose_phi(&scene, &g, &zero, 5.0).unwrap();
        let part = |v: &CVector| compose_phi(&scene, &g, v, 5.0).unwrap() - &base;
        let c = C64::new(0.3, -1.7);
        let combined = part(&(&v1 + &v2 * c));
        let split = part(&v1) + part(&v2) * c;
        assert!((combined - split).norm() < 1e-12);
    }

    #[test]
    fn sinr_zero_when_receive_orthogonal_to_signal() {
        let mut scene = Scene::standard(3, 0, 0).unwrap();
        scene.validate().unwrap();
        let g = ChannelMatrix::empty(3);
        let u = steering_radar(&scene.geometry, 30.0).conjugate() / C64::from(3f64.sqrt());
        let s = phi_times(&scene, &g, &CVector::zeros(0), 30.0, &u).unwrap();
        // any vector orthogonal to s
        let mut w = CVector::from_element(3, C64::new(1.0, 0.5));
        let proj = s.dotc(&w) / s.norm_squared();
        w -= &s * proj;
        let state = BeamformerState { u, v: CVector::zeros(0), w };
        assert!(output_sinr(&scene, &g, &state).unwrap() < 1e-20);
        scene.noise_power = 2.0;
        assert!(output_sinr(&scene, &g, &state).unwrap() < 1e-20);
    }

    #[test]
    fn sinr_tiny_instance_by_hand() {
        // N = 2, I = 1, RIS-free so Φ(θ) = a aᵀ.
        let mut scene = Scene::standard(2, 0, 1).unwrap();
        scene.target_angle = 10.0;
        scene.interferences[0].angle = -40.0;
        scene.interferences[0].power = 50.0;
        scene.target_power = 3.0;
        scene.noise_power = 0.7;
        let g = ChannelMatrix::empty(2);
        let u = CVector::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]);
        let w = CVector::from_vec(vec![C64::new(1.0, -0.2), C64::new(0.4, 0.9)]);
        let state = BeamformerState { u: u.clone(), v: CVector::zeros(0), w: w.clone() };

        let pi = std::f64::consts::PI;
        let resp = |deg: f64| {
            let p = -pi * f64::to_radians(deg).sin();
            let a0 = C64::new(1.0, 0.0);
            let a1 = C64::from_polar(1.0, p);
            let atu = a0 * u[0] + a1 * u[1];
            let wha = w[0].conj() * a0 + w[1].conj() * a1;
            (wha * atu).norm_sqr()
        };
        let expected = 3.0 * resp(10.0) / (50.0 * resp(-40.0) + 0.7 * (w[0].norm_sqr() + w[1].norm_sqr()));
        let got = output_sinr(&scene, &g, &state).unwrap();
        assert!((got - expected).abs() / expected < 1e-13);
    }

    #[test]
    fn sinr_scale_and_homogeneity() {
        let (scene, g, v) = random_scene(4, 5, 9);
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let mut rc = || C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        let u = CVector::from_fn(4, |_, _| rc()).normalize();
        let w = CVector::from_fn(4, |_, _| rc());
        let state = BeamformerState { u, v, w };
        let base = output_sinr(&scene, &g, &state).unwrap();

        let mut scaled = state.clone();
        scaled.w *= C64::new(-2.5, 0.75);
        assert!((output_sinr(&scene, &g, &scaled).unwrap() - base).abs() / base < 1e-12);

        let mut hom = scene.clone();
        hom.noise_power *= 37.0;
        hom.target_power *= 37.0;
        for intf in &mut hom.interferences {
            intf.power *= 37.0;
        }
        assert!((output_sinr(&hom, &g, &state).unwrap() - base).abs() / base < 1e-10);
    }

    #[test]
    fn matched_ris_free_pattern_peaks_at_target() {
        let scene = Scene::standard(5, 0, 0).unwrap();
        let g = ChannelMatrix::empty(5);
        let a = steering_radar(&scene.geometry, 30.0) / C64::from(5f64.sqrt());
        let state = BeamformerState { u: a.conjugate(), v: CVector::zeros(0), w: a };
        let grid: Vec<f64> = (-900..=900).map(|k| k as f64 * 0.1).collect();
        let pattern = beampattern(&scene, &g, &state, &grid).unwrap();
        let (best, _) = pattern
            .iter()
            .cloned()
            .fold((0.0, f64::NEG_INFINITY), |acc, (a, p)| if p > acc.1 { (a, p) } else { acc });
        assert!((best - 30.0).abs() < 1e-9);
        assert_eq!(beampattern(&scene, &g, &state, &[3.0]).unwrap().len(), 1);
    }

    #[test]
    fn steering_is_unimodular() {
        let g = geom(9, 0);
        for k in -20..=20 {
            let a = steering_radar(&g, k as f64 * 4.3);
            assert!(a.iter().all(|x| (x.norm() - 1.0).abs() < 1e-15));
        }
    }

    #[test]
    fn scene_validation() {
        let mut s = Scene::standard(5, 8, 3).unwrap();
        s.interferences[1].angle = s.target_angle;
        assert!(s.validate().is_err());
        let mut s = Scene::standard(5, 8, 3).unwrap();
        s.noise_power = 0.0;
        assert!(s.validate().is_err());
        assert!(Scene::standard(0, 8, 3).is_err());
        assert!(Scene::standard(5, 8, 16).is_err());
    }
}
