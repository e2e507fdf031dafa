//! The complex circle manifold `{v ∈ ℂᴹ : |v_m| = 1}`.
//!
//! Besides projection and retraction this module owns the real `2M`
//! embedding `x ↦ [Re x; Im x]` used to write the Newton equation as a real
//! linear system, and the per-element tangent coordinates `ξ_m = j v_m t_m`.

use rand::Rng;

use crate::{CMatrix, CVector, Error, RMatrix, RVector, Result, C64};

/// Tolerance accepted as exactly unimodular.
pub const UNIMODULAR_TOL: f64 = 1e-12;
/// Drift beyond [`UNIMODULAR_TOL`] but within this is renormalized away.
pub const RENORMALIZE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CcmPoint {
    v: CVector,
}

fn max_modulus_deviation(v: &CVector) -> f64 {
    v.iter().map(|x| (x.norm() - 1.0).abs()).fold(0.0, f64::max)
}

impl CcmPoint {
    /// Accepts `v` when every `|v_m|` is within [`UNIMODULAR_TOL`] of one,
    /// renormalizes small drift, rejects anything larger.
    pub fn new(v: CVector) -> Result<Self> {
        let deviation = max_modulus_deviation(&v);
        if deviation <= UNIMODULAR_TOL {
            Ok(Self { v })
        } else if deviation <= RENORMALIZE_TOL {
            Ok(Self {
                v: v.map(|x| x / x.norm()),
            })
        } else {
            Err(Error::NotUnimodular { deviation })
        }
    }

    pub fn ones(m: usize) -> Self {
        Self {
            v: CVector::from_element(m, C64::new(1.0, 0.0)),
        }
    }

    pub fn from_phases(phases: &[f64]) -> Self {
        Self {
            v: CVector::from_iterator(phases.len(), phases.iter().map(|&p| C64::from_polar(1.0, p))),
        }
    }

    /// I.i.d. uniform phases on `[0, 2π)`.
    pub fn random<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Self {
        let tau = std::f64::consts::TAU;
        Self {
            v: CVector::from_iterator(m, (0..m).map(|_| C64::from_polar(1.0, rng.random::<f64>() * tau))),
        }
    }

    pub fn as_vector(&self) -> &CVector {
        &self.v
    }

    pub fn into_vector(self) -> CVector {
        self.v
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn modulus_deviation(&self) -> f64 {
        max_modulus_deviation(&self.v)
    }
}

/// A tangent vector `ξ` with `Re{ξ ⊙ v*} = 0` at its base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub xi: CVector,
}

impl TangentVector {
    pub fn zeros(m: usize) -> Self {
        Self { xi: CVector::zeros(m) }
    }

    pub fn norm(&self) -> f64 {
        self.xi.norm()
    }

    /// `max_m |Re{ξ_m v_m*}|`, zero for an exact tangent vector.
    pub fn tangency_residual(&self, point: &CcmPoint) -> f64 {
        self.xi
            .iter()
            .zip(point.v.iter())
            .map(|(x, v)| (x * v.conj()).re.abs())
            .fold(0.0, f64::max)
    }
}

/// Real inner product `Re{xᴴ y}`.
pub fn inner_real(x: &CVector, y: &CVector) -> f64 {
    x.dotc(y).re
}

/// `P_v(y) = y - Re{y ⊙ v*} ⊙ v`.
pub fn project_tangent(point: &CcmPoint, y: &CVector) -> TangentVector {
    assert_eq!(point.dim(), y.len(), "projection dimension mismatch");
    let xi = y.zip_map(&point.v, |y, v| y - v * (y * v.conj()).re);
    TangentVector { xi }
}

/// Element-wise normalization of `v + ξ`.
pub fn retract(point: &CcmPoint, xi: &TangentVector) -> Result<CcmPoint> {
    let mut out = &point.v + &xi.xi;
    for (index, x) in out.iter_mut().enumerate() {
        let modulus = x.norm();
        if modulus < 1e-15 {
            return Err(Error::ZeroElement { index, modulus });
        }
        *x /= modulus;
    }
    Ok(CcmPoint { v: out })
}

/// Coordinates `t_m = Im{v_m* ξ_m}` of a tangent vector in the orthonormal
/// basis `{j v_m e_m}`.
pub fn tangent_coords(point: &CcmPoint, xi: &CVector) -> RVector {
    RVector::from_iterator(point.dim(), xi.iter().zip(point.v.iter()).map(|(x, v)| (v.conj() * x).im))
}

/// Inverse of [`tangent_coords`]: `ξ_m = j v_m t_m`.
pub fn from_tangent_coords(point: &CcmPoint, t: &RVector) -> TangentVector {
    let xi = CVector::from_iterator(point.dim(), point.v.iter().zip(t.iter()).map(|(v, &t)| C64::new(0.0, t) * v));
    TangentVector { xi }
}

/// `[Re x; Im x]`.
pub fn to_real(x: &CVector) -> RVector {
    let m = x.len();
    RVector::from_fn(2 * m, |i, _| if i < m { x[i].re } else { x[i - m].im })
}

/// Inverse of [`to_real`].
pub fn from_real(x: &RVector) -> CVector {
    assert!(x.len() % 2 == 0, "real embedding must have even length");
    let m = x.len() / 2;
    CVector::from_fn(m, |i, _| C64::new(x[i], x[i + m]))
}

/// `[[A_R, -A_I], [A_I, A_R]]`, the real matrix acting on `[Re x; Im x]` as
/// `A` acts on `x`.
pub fn embed_matrix(a: &CMatrix) -> RMatrix {
    let (r, c) = a.shape();
    RMatrix::from_fn(2 * r, 2 * c, |i, j| {
        let x = a[(i % r, j % c)];
        match (i < r, j < c) {
            (true, true) | (false, false) => x.re,
            (true, false) => -x.im,
            (false, true) => x.im,
        }
    })
}

/// `Diag(q)` repeated on both real blocks.
pub fn embed_real_diagonal(q: &RVector) -> RMatrix {
    let m = q.len();
    RMatrix::from_fn(2 * m, 2 * m, |i, j| if i == j { q[i % m] } else { 0.0 })
}

/// `V̂`, the real form of `y ↦ Diag(v ⊙ v) y*`.
///
/// For unimodular `v` it is a symmetric involution and `½(I - V̂)` is the
/// real tangent-space projector.
pub fn reflection_matrix(point: &CcmPoint) -> RMatrix {
    let m = point.dim();
    let mut out = RMatrix::zeros(2 * m, 2 * m);
    for (k, v) in point.v.iter().enumerate() {
        let s = v * v;
        out[(k, k)] = s.re;
        out[(k, k + m)] = s.im;
        out[(k + m, k)] = s.im;
        out[(k + m, k + m)] = -s.re;
    }
    out
}

/// Real-form pieces of a quadratic on the manifold: `v̂`, `Ĥ`, `Q̂`, `V̂`.
#[derive(Debug, Clone)]
pub struct RealEmbedding {
    pub v_hat: RVector,
    pub h_hat: RMatrix,
    pub q_hat: RMatrix,
    pub v_refl: RMatrix,
}

impl RealEmbedding {
    pub fn new(point: &CcmPoint, h: &CMatrix, q: &RVector) -> Self {
        Self {
            v_hat: to_real(&point.v),
            h_hat: embed_matrix(h),
            q_hat: embed_real_diagonal(q),
            v_refl: reflection_matrix(point),
        }
    }

    /// `½(I - V̂)`.
    pub fn projector(&self) -> RMatrix {
        let n = self.v_refl.nrows();
        (RMatrix::identity(n, n) - &self.v_refl) * 0.5
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_cvec(m: usize, rng: &mut ChaCha8Rng) -> CVector {
        CVector::from_fn(m, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    #[test]
    fn construction_tolerances() {
        let mut v = CVector::from_element(3, C64::new(1.0, 0.0));
        assert!(CcmPoint::new(v.clone()).is_ok());
        v[1] = C64::new(1.0 + 5e-10, 0.0);
        let p = CcmPoint::new(v.clone()).unwrap();
        assert!(p.modulus_deviation() < 1e-15);
        v[1] = C64::new(1.0 + 1e-6, 0.0);
        assert!(matches!(CcmPoint::new(v), Err(Error::NotUnimodular { .. })));
    }

    #[test]
    fn projection_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = CcmPoint::random(6, &mut rng);
        let y = rand_cvec(6, &mut rng);
        let py = project_tangent(&p, &y);
        assert!(py.tangency_residual(&p) < 1e-15);
        let ppy = project_tangent(&p, &py.xi);
        assert!((&ppy.xi - &py.xi).norm() < 1e-13);
        let pv = project_tangent(&p, p.as_vector());
        assert!(pv.norm() < 1e-15);
    }

    #[test]
    fn retraction_basics() {
        let p = CcmPoint::ones(1);
        let q = retract(&p, &TangentVector::zeros(1)).unwrap();
        assert_eq!(q, p);
        let xi = TangentVector {
            xi: CVector::from_element(1, C64::new(0.0, 1.0)),
        };
        let r = retract(&p, &xi).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((r.as_vector()[0] - C64::new(s, s)).norm() < 1e-15);

        let bad = TangentVector {
            xi: CVector::from_element(1, C64::new(-1.0, 0.0)),
        };
        assert!(matches!(retract(&p, &bad), Err(Error::ZeroElement { index: 0, .. })));
    }

    #[test]
    fn retraction_is_second_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = CcmPoint::random(5, &mut rng);
        let xi = project_tangent(&p, &rand_cvec(5, &mut rng));
        let ts = [1e-2, 1e-3, 1e-4, 1e-5];
        let errs: Vec<f64> = ts
            .iter()
            .map(|&t| {
                let step = TangentVector { xi: &xi.xi * C64::from(t) };
                let r = retract(&p, &step).unwrap();
                (r.as_vector() - (p.as_vector() + &step.xi)).norm()
            })
            .collect();
        for k in 0..ts.len() - 1 {
            let slope = (errs[k].ln() - errs[k + 1].ln()) / (ts[k].ln() - ts[k + 1].ln());
            assert!((slope - 2.0).abs() < 0.05, "slope {slope}");
        }
    }

    #[test]
    fn embedding_examples() {
        let x = CVector::from_vec(vec![C64::new(1.5, 0.0), C64::new(-2.0, 0.0)]);
        let xr = to_real(&x);
        assert_eq!(xr.rows(2, 2).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0]);
        let id = embed_matrix(&CMatrix::identity(3, 3));
        assert_eq!(id, RMatrix::identity(6, 6));
    }

    #[test]
    fn embedded_product_matches_complex_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = CMatrix::from_fn(5, 5, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let h = &a + a.adjoint();
        let x = rand_cvec(5, &mut rng);
        let hh = embed_matrix(&h);
        assert!((&hh - hh.transpose()).norm() < 1e-15);
        let lhs = &hh * to_real(&x);
        let rhs = to_real(&(&h * &x));
        assert!((lhs - rhs).norm() < 1e-13);
    }

    #[test]
    fn reflection_is_involution_and_matches_projector() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = CcmPoint::random(7, &mut rng);
        let vr = reflection_matrix(&p);
        let id = RMatrix::identity(14, 14);
        assert!((&vr * &vr - &id).norm() < 1e-10);
        let y = rand_cvec(7, &mut rng);
        let proj = (&id - &vr) * to_real(&y) * 0.5;
        assert!((proj - to_real(&project_tangent(&p, &y).xi)).norm() < 1e-14);
        let xi = project_tangent(&p, &rand_cvec(7, &mut rng));
        let xh = to_real(&xi.xi);
        assert!(((&id - &vr) * &xh - &xh * 2.0).norm() < 1e-12);
    }

    #[test]
    fn tangent_coordinates_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = CcmPoint::random(6, &mut rng);
        let xi = project_tangent(&p, &rand_cvec(6, &mut rng));
        let t = tangent_coords(&p, &xi.xi);
        let back = from_tangent_coords(&p, &t);
        assert!((back.xi - &xi.xi).norm() < 1e-15);
        assert!((t.norm() - xi.norm()).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn real_round_trip_is_exact(re in prop::collection::vec(-1e3f64..1e3, 1..12), im_seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(im_seed);
            let x = CVector::from_iterator(re.len(), re.iter().map(|&r| C64::new(r, rng.random::<f64>() * 10.0 - 5.0)));
            prop_assert_eq!(from_real(&to_real(&x)), x);
        }

        #[test]
        fn projector_is_self_adjoint(seed in any::<u64>(), m in 1usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = CcmPoint::random(m, &mut rng);
            let x = rand_cvec(m, &mut rng);
            let y = rand_cvec(m, &mut rng);
            let lhs = inner_real(&project_tangent(&p, &x).xi, &y);
            let rhs = inner_real(&x, &project_tangent(&p, &y).xi);
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }

        #[test]
        fn retraction_output_is_unimodular(seed in any::<u64>(), m in 1usize..16, scale in 0.0f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = CcmPoint::random(m, &mut rng);
            let mut xi = project_tangent(&p, &rand_cvec(m, &mut rng));
            xi.xi *= C64::from(scale);
            let r = retract(&p, &xi).unwrap();
            prop_assert!(r.modulus_deviation() < 1e-14);
        }
    }
}
