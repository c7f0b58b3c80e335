//! The conjugated Laplacian `Δ_ρ = Δ + 2ρ·∇`, its symbol, characteristic
//! variety, frequency tube, sharp projection, truncated Green operator,
//! and a regularized full inverse.
//!
//! All frequency-domain operations act on fields expressed in the
//! plane-adapted frame (axis 1 = ω_R, axis 2 = ω_I, axis 3 = plane
//! normal). In that frame `ρ = g·s·(e₁ + i e₂)` with `g = ±1`, and the
//! symbol is evaluated in ρ-adapted coordinates `η = (-g·ξ₁, -g·ξ₂, ξ₃)`,
//! which for `g = -1` reproduces the classical formula
//! `σ(ξ) = -[(|ξ - s e₂|² - s²) + i·2sξ₁]` verbatim. A mode test pins
//! the convention: `Δ_ρ e^{iξ·x} = σ(ξ)·e^{iξ·x}` exactly.
//!
//! The protected frequency set of the sharp projection is the lattice
//! tube `{dist(ξ, Σ_ρ) < s^{-1/2-ε₀}}` together with the `ξ' = 0`
//! column. The column is a measure-zero set in the continuum (where the
//! multiplier is defined only up to null sets) and on the periodic box
//! it carries the plane-mean sector that the truncated inverse must not
//! touch; including it keeps the discrete operator faithful to the
//! asymptotic construction.

use num_complex::Complex64;

use crate::fields::{apply_multiplier, dft3_forward, freq_coord, GridField};
use crate::geometry::{Plane, Vec3};
use crate::{Error, Result};

/// Parameters of one exponentially growing solution family member:
/// `ρ = sign·s·(ω_R + i ω_I)`, `|ρ| = s`, `ρ·ρ = 0`.
#[derive(Debug, Clone)]
pub struct RhoParam {
    pub plane: Plane,
    /// Magnitude parameter `s = |ρ|`.
    pub s: f64,
    /// Growth direction: `+1` or `-1`.
    pub sign: i8,
    pub beta: f64,
    pub eps0: f64,
}

impl RhoParam {
    pub fn new(plane: Plane, s: f64, sign: i8, beta: f64, eps0: f64) -> Result<Self> {
        if !(s > 0.0) {
            return Err(Error::invalid("rho magnitude s must be positive"));
        }
        if sign != 1 && sign != -1 {
            return Err(Error::invalid("sign must be +1 or -1"));
        }
        if !(beta > 0.0 && beta < 0.25) {
            return Err(Error::invalid(format!("beta must lie in (0, 1/4), got {beta}")));
        }
        let cap = 2.0 * (0.25 - beta);
        if !(eps0 > 0.0 && eps0 < cap) {
            return Err(Error::invalid(format!(
                "eps0 must lie in (0, 2(1/4 - beta)) = (0, {cap}), got {eps0}"
            )));
        }
        Ok(RhoParam { plane, s, sign, beta, eps0 })
    }

    /// Slab half-width `δ = s^{-β}`.
    pub fn delta(&self) -> f64 {
        self.s.powf(-self.beta)
    }

    /// Decay exponent `ε = (1 - 4β)/2`.
    pub fn eps(&self) -> f64 {
        0.5 * (1.0 - 4.0 * self.beta)
    }

    /// Tube radius `s^{-1/2-ε₀}`.
    pub fn tube_radius(&self) -> f64 {
        self.s.powf(-0.5 - self.eps0)
    }

    /// The complex vector `ρ` in world coordinates.
    pub fn rho_vec(&self) -> [Complex64; 3] {
        let g = self.sign as f64 * self.s;
        let r = self.plane.omega_r;
        let i = self.plane.omega_i;
        [
            Complex64::new(g * r.x, g * i.x),
            Complex64::new(g * r.y, g * i.y),
            Complex64::new(g * r.z, g * i.z),
        ]
    }

    /// `ρ·x` for a point in frame coordinates: `g·s·(y₁ + i y₂)`.
    pub fn rho_dot_frame(&self, y: Vec3) -> Complex64 {
        let g = self.sign as f64 * self.s;
        Complex64::new(g * y.x, g * y.y)
    }

    /// Counterpart with the opposite exponential growth.
    pub fn opposite(&self) -> RhoParam {
        RhoParam { sign: -self.sign, ..self.clone() }
    }

    /// Nudges `s` by one part in 10⁶ until no lattice frequency sits
    /// essentially on the characteristic variety (`|σ| < 1e-9·s²`).
    pub fn adjusted_for_grid(mut self, n: usize, l: f64) -> Result<RhoParam> {
        for _ in 0..16 {
            if self.min_lattice_sigma_off_protected(n, l) >= 1e-9 * self.s * self.s {
                return Ok(self);
            }
            self.s *= 1.0 + 1e-6;
        }
        Err(Error::Guard(format!(
            "could not move s = {} off the characteristic variety",
            self.s
        )))
    }

    fn min_lattice_sigma_off_protected(&self, n: usize, l: f64) -> f64 {
        let mut best = f64::INFINITY;
        for kz in 0..n {
            let fz = freq_coord(kz, n, l);
            for ky in 0..n {
                let fy = freq_coord(ky, n, l);
                for kx in 0..n {
                    let fx = freq_coord(kx, n, l);
                    let xi = Vec3::new(fx, fy, fz);
                    if is_protected(xi, self) {
                        continue;
                    }
                    best = best.min(symbol_sigma(xi, self).norm());
                }
            }
        }
        best
    }
}

/// ρ-adapted coordinates `η = (-g ξ₁, -g ξ₂, ξ₃)` of a frame frequency.
#[inline]
fn adapted(xi: Vec3, rho: &RhoParam) -> Vec3 {
    let g = rho.sign as f64;
    Vec3::new(-g * xi.x, -g * xi.y, xi.z)
}

/// Full symbol of `Δ_ρ` at a frame frequency:
/// `σ(ξ) = -[(|η - s e₂|² - s²) + i·2sη₁]` in adapted coordinates.
pub fn symbol_sigma(xi: Vec3, rho: &RhoParam) -> Complex64 {
    let e = adapted(xi, rho);
    let s = rho.s;
    let re = e.x * e.x + (e.y - s) * (e.y - s) + e.z * e.z - s * s;
    Complex64::new(-re, -2.0 * s * e.x)
}

/// Euclidean distance from a frame frequency to the characteristic
/// circle `Σ_ρ = {η₁ = 0, |(η₂, η₃) - (s, 0)| = s}`.
pub fn dist_sigma(xi: Vec3, rho: &RhoParam) -> f64 {
    let e = adapted(xi, rho);
    let s = rho.s;
    let planar = (e.y - s).hypot(e.z) - s;
    e.x.hypot(planar)
}

/// Whether a frame frequency belongs to the protected set
/// (tube ∪ plane-mean column).
#[inline]
pub fn is_protected(xi: Vec3, rho: &RhoParam) -> bool {
    (xi.x == 0.0 && xi.y == 0.0) || dist_sigma(xi, rho) < rho.tube_radius()
}

/// Sharp projection onto the protected frequency set; idempotent,
/// self-adjoint, norm-nonexpansive.
pub fn apply_p(f: &GridField, rho: &RhoParam) -> GridField {
    let mut out = f.clone();
    apply_multiplier(&mut out, |xi| {
        if is_protected(xi, rho) {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    out
}

/// Truncated Green operator: multiplier `σ(ξ)^{-1}` off the protected
/// set, zero on it, so that `Δ_ρ ∘ G̃_ρ = I - P_ρ` exactly.
pub fn apply_gtilde(f: &GridField, rho: &RhoParam) -> GridField {
    let mut out = f.clone();
    apply_multiplier(&mut out, |xi| {
        if is_protected(xi, rho) {
            Complex64::new(0.0, 0.0)
        } else {
            symbol_sigma(xi, rho).inv()
        }
    });
    out
}

/// Spectral application of `Δ_ρ = Δ + 2ρ·∇` (multiplication by the
/// symbol).
pub fn apply_delta_rho(f: &GridField, rho: &RhoParam) -> GridField {
    let mut out = f.clone();
    apply_multiplier(&mut out, |xi| symbol_sigma(xi, rho));
    out
}

/// Regularized full inverse: multiplier `conj(σ)/(|σ|² + τ²)` at every
/// lattice frequency.
///
/// With `τ = 0` the division must be safe: if any frequency in the
/// spectral support of `f` has `|σ| < 1e-12`, an error reports the
/// offending frequency (the DC mode always has `σ = 0`).
pub fn apply_g_reg(f: &GridField, rho: &RhoParam, tau: f64) -> Result<GridField> {
    if tau < 0.0 {
        return Err(Error::invalid("tau must be nonnegative"));
    }
    if tau == 0.0 {
        let n = f.n;
        let mut spec = f.data.clone();
        dft3_forward(&mut spec, n);
        // spectral support at a tolerance above FFT roundoff leakage
        let scale = spec
            .iter()
            .map(|v| v.norm())
            .fold(0.0f64, f64::max)
            .max(f64::MIN_POSITIVE);
        let mut i = 0usize;
        for kz in 0..n {
            let fz = freq_coord(kz, n, f.l);
            for ky in 0..n {
                let fy = freq_coord(ky, n, f.l);
                for kx in 0..n {
                    let fx = freq_coord(kx, n, f.l);
                    if spec[i].norm() > 1e-9 * scale {
                        let xi = Vec3::new(fx, fy, fz);
                        let sg = symbol_sigma(xi, rho).norm();
                        if sg < 1e-12 {
                            return Err(Error::Guard(format!(
                                "tau = 0 with near-singular frequency xi = ({}, {}, {}), |sigma| = {sg:.3e}",
                                fx, fy, fz
                            )));
                        }
                    }
                    i += 1;
                }
            }
        }
    }
    let mut out = f.clone();
    apply_multiplier(&mut out, |xi| {
        let sg = symbol_sigma(xi, rho);
        let d = sg.norm_sqr() + tau * tau;
        if d == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            sg.conj() / d
        }
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{inner, norm_l2};
    use crate::geometry::Plane;
    use rand::{Rng, SeedableRng};

    const N: usize = 32;
    const L: f64 = 2.5;

    fn axis_plane() -> Plane {
        Plane::from_frame(
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::ZERO,
            Vec3::ZERO,
        )
        .unwrap()
    }

    /// rho with the paper-verbatim symbol orientation (sign = -1).
    fn rho_paper(s: f64) -> RhoParam {
        RhoParam::new(axis_plane(), s, -1, 0.15, 0.1).unwrap()
    }

    fn random_field(seed: u64) -> GridField {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut f = GridField::zeros(N, L);
        for v in f.data.iter_mut() {
            *v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        f
    }

    fn lattice_mode(k: [i64; 3]) -> (GridField, Vec3) {
        let xi = Vec3::new(
            std::f64::consts::PI / L * k[0] as f64,
            std::f64::consts::PI / L * k[1] as f64,
            std::f64::consts::PI / L * k[2] as f64,
        );
        (GridField::from_fn(N, L, |p| Complex64::new(0.0, xi.dot(p)).exp()), xi)
    }

    #[test]
    fn rho_param_validation() {
        assert!(RhoParam::new(axis_plane(), 6.0, 1, 0.15, 0.1).is_ok());
        assert!(RhoParam::new(axis_plane(), 6.0, 1, 0.3, 0.1).is_err());
        assert!(RhoParam::new(axis_plane(), 6.0, 1, 0.15, 0.25).is_err());
        assert!(RhoParam::new(axis_plane(), -1.0, 1, 0.15, 0.1).is_err());
        let r = rho_paper(8.0);
        assert!((r.delta() - 8.0f64.powf(-0.15)).abs() < 1e-15);
        assert!((r.eps() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn rho_is_on_null_cone() {
        let r = RhoParam::new(axis_plane(), 7.0, 1, 0.15, 0.1).unwrap();
        let v = r.rho_vec();
        let dot = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        assert!(dot.norm() < 1e-12 * r.s * r.s);
    }

    #[test]
    fn symbol_values_from_displayed_formula() {
        let r = rho_paper(10.0);
        // origin lies on the variety
        assert_eq!(symbol_sigma(Vec3::ZERO, &r), Complex64::new(0.0, 0.0));
        // ξ = (0, 10, 0): |ξ - 10 e₂| = 0 → σ = 100
        let v = symbol_sigma(Vec3::new(0.0, 10.0, 0.0), &r);
        assert!((v - Complex64::new(100.0, 0.0)).norm() < 1e-12);
        // ξ = (1, 0, 0): σ = -(1 + 20i)
        let v = symbol_sigma(Vec3::new(1.0, 0.0, 0.0), &r);
        assert!((v - Complex64::new(-1.0, -20.0)).norm() < 1e-12);
    }

    #[test]
    fn dist_values() {
        let r = rho_paper(10.0);
        assert_eq!(dist_sigma(Vec3::ZERO, &r), 0.0);
        assert!(dist_sigma(Vec3::new(0.0, 20.0, 0.0), &r) < 1e-12);
        // circle center is at distance s from the circle
        assert!((dist_sigma(Vec3::new(0.0, 10.0, 0.0), &r) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn convention_pin_fifty_modes() {
        // apply_delta_rho on a pure mode multiplies by symbol_sigma(ξ):
        // the single source of truth for the FFT sign convention.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for &sign in &[1i8, -1] {
            let r = RhoParam::new(axis_plane(), 9.0, sign, 0.15, 0.1).unwrap();
            for _ in 0..25 {
                let k = [
                    rng.gen_range(-(N as i64) / 2..N as i64 / 2),
                    rng.gen_range(-(N as i64) / 2..N as i64 / 2),
                    rng.gen_range(-(N as i64) / 2..N as i64 / 2),
                ];
                let (f, xi) = lattice_mode(k);
                let g = apply_delta_rho(&f, &r);
                let probe = f.idx(3, 5, 7);
                let got = g.data[probe] / f.data[probe];
                let want = symbol_sigma(xi, &r);
                assert!(
                    (got - want).norm() <= 1e-10 * want.norm().max(1.0),
                    "sign {sign} mode {k:?}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn conjugation_oracle() {
        // Δ_ρ f  vs  e^{-ρ·x}·Δ(e^{ρ·x} f) on a sub-box, for a smooth
        // compactly supported f whose product with the exponential stays
        // in floating-point range and resolved.
        let n = 64;
        let r = RhoParam::new(axis_plane(), 6.0, 1, 0.15, 0.1).unwrap();
        let f = GridField::from_fn(n, L, |p| {
            Complex64::new((1.0 + 0.3 * p.x - 0.2 * p.y * p.z) * (-8.0 * p.dot(p)).exp(), 0.0)
        });
        let lhs = apply_delta_rho(&f, &r);
        let mut ef = f.clone();
        for iz in 0..n {
            for iy in 0..n {
                for ix in 0..n {
                    let p = ef.coords(ix, iy, iz);
                    let e = r.rho_dot_frame(p).exp();
                    let i = ef.idx(ix, iy, iz);
                    ef.data[i] *= e;
                }
            }
        }
        let mut rhs = crate::fields::laplacian(&ef);
        for iz in 0..n {
            for iy in 0..n {
                for ix in 0..n {
                    let p = rhs.coords(ix, iy, iz);
                    let e = (-r.rho_dot_frame(p)).exp();
                    let i = rhs.idx(ix, iy, iz);
                    rhs.data[i] *= e;
                }
            }
        }
        let mut max_err = 0.0f64;
        let mut max_ref = 0.0f64;
        for iz in 0..n {
            for iy in 0..n {
                for ix in 0..n {
                    let p = lhs.coords(ix, iy, iz);
                    if p.x.abs() > 1.0 || p.y.abs() > 1.0 || p.z.abs() > 1.0 {
                        continue;
                    }
                    let i = lhs.idx(ix, iy, iz);
                    max_err = max_err.max((lhs.data[i] - rhs.data[i]).norm());
                    max_ref = max_ref.max(lhs.data[i].norm());
                }
            }
        }
        assert!(max_err <= 1e-6 * max_ref, "conjugation gap {} / {}", max_err, max_ref);
    }

    #[test]
    fn projection_pythagoras_idempotent_selfadjoint() {
        let r = rho_paper(8.0);
        for seed in 0..3 {
            let f = random_field(seed);
            let pf = apply_p(&f, &r);
            let qf = f.sub(&pf);
            let a = norm_l2(&pf, None).powi(2) + norm_l2(&qf, None).powi(2);
            let b = norm_l2(&f, None).powi(2);
            assert!((a - b).abs() <= 1e-10 * b);
            let ppf = apply_p(&pf, &r);
            let idemp = ppf.sub(&pf);
            assert!(norm_l2(&idemp, None) <= 1e-12 * norm_l2(&pf, None).max(1e-30));
            let g = random_field(seed + 100);
            let pg = apply_p(&g, &r);
            let lhs = inner(&pf, &g, None).unwrap();
            let rhs = inner(&f, &pg, None).unwrap();
            assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1.0));
        }
    }

    #[test]
    fn mode_inside_and_outside_tube() {
        let r = rho_paper(8.0);
        // (0,0,k): on the protected column → P keeps it, G̃ kills it
        let (f, xi) = lattice_mode([0, 0, 3]);
        assert!(is_protected(xi, &r));
        let pf = apply_p(&f, &r);
        assert!(norm_l2(&pf.sub(&f), None) <= 1e-12 * norm_l2(&f, None));
        let gf = apply_gtilde(&f, &r);
        assert!(norm_l2(&gf, None) <= 1e-14 * norm_l2(&f, None));
        // a generic far mode: P kills it, G̃ multiplies by 1/σ
        let (f, xi) = lattice_mode([4, -3, 2]);
        assert!(!is_protected(xi, &r));
        let pf = apply_p(&f, &r);
        assert!(norm_l2(&pf, None) <= 1e-14 * norm_l2(&f, None));
        let gf = apply_gtilde(&f, &r);
        let probe = f.idx(1, 2, 3);
        let got = gf.data[probe] / f.data[probe];
        let want = symbol_sigma(xi, &r).inv();
        assert!((got - want).norm() <= 1e-12 * want.norm());
    }

    #[test]
    fn gtilde_is_truncated_inverse() {
        // ‖Δ_ρ(G̃ f) - (f - P f)‖ ≤ 1e-9 ‖f‖ and P(G̃ f) = 0
        for &s in &[6.0, 24.0] {
            let r = rho_paper(s);
            let f = random_field(5);
            let gf = apply_gtilde(&f, &r);
            let lhs = apply_delta_rho(&gf, &r);
            let rhs = f.sub(&apply_p(&f, &r));
            let gap = norm_l2(&lhs.sub(&rhs), None);
            assert!(gap <= 1e-9 * norm_l2(&f, None), "s = {s}: gap {gap}");
            let pg = apply_p(&gf, &r);
            assert!(norm_l2(&pg, None) <= 1e-12 * norm_l2(&gf, None).max(1e-30));
        }
    }

    #[test]
    fn symbol_lower_bounds_at_s12() {
        // |σ| ≥ 0.1·s·dist for |ξ| ≤ 3s and |σ| ≥ 0.1·|ξ|² beyond.
        let r = rho_paper(12.0);
        let s = r.s;
        let mut checked = 0usize;
        for kz in 0..N {
            for ky in 0..N {
                for kx in 0..N {
                    let xi = Vec3::new(
                        freq_coord(kx, N, L),
                        freq_coord(ky, N, L),
                        freq_coord(kz, N, L),
                    );
                    let sg = symbol_sigma(xi, &r).norm();
                    if xi.norm() <= 3.0 * s {
                        assert!(
                            sg >= 0.1 * s * dist_sigma(xi, &r) - 1e-12,
                            "near bound fails at {xi:?}"
                        );
                    } else {
                        assert!(sg >= 0.1 * xi.dot(xi), "far bound fails at {xi:?}");
                    }
                    checked += 1;
                }
            }
        }
        assert_eq!(checked, N * N * N);
    }

    #[test]
    fn g_reg_zero_field_and_exact_inverse() {
        let r = rho_paper(10.0);
        let z = GridField::zeros(N, L);
        let out = apply_g_reg(&z, &r, 0.0).unwrap();
        assert_eq!(norm_l2(&out, None), 0.0);

        // single mode with |σ| well away from zero: τ = 0 is exact
        let (f, xi) = lattice_mode([3, 1, -2]);
        assert!(symbol_sigma(xi, &r).norm() > 5.0);
        let gf = apply_g_reg(&f, &r, 0.0).unwrap();
        let back = apply_delta_rho(&gf, &r);
        assert!(norm_l2(&back.sub(&f), None) <= 1e-12 * norm_l2(&f, None));
    }

    #[test]
    fn g_reg_tau_zero_rejects_singular_support() {
        let r = rho_paper(10.0);
        // constant field has all its mass at ξ = 0 where σ = 0
        let f = GridField::from_fn(N, L, |_| Complex64::new(1.0, 0.0));
        match apply_g_reg(&f, &r, 0.0) {
            Err(Error::Guard(msg)) => assert!(msg.contains("|sigma|")),
            other => panic!("expected guard error, got {other:?}"),
        }
    }

    #[test]
    fn g_reg_residual_bound() {
        // residual ≤ max over occupied modes of τ²/(|σ|²+τ²)
        let r = rho_paper(12.0);
        let tau = 1e-3 * r.s;
        let f = {
            // spectrally explicit field: a few modes with known σ
            let (a, _) = lattice_mode([2, 1, 0]);
            let (b, _) = lattice_mode([-3, 4, 5]);
            let (c, _) = lattice_mode([7, -2, 1]);
            a.add(&b.scaled(Complex64::new(0.5, 0.2))).add(&c.scaled(Complex64::new(0.0, -1.1)))
        };
        let gf = apply_g_reg(&f, &r, tau).unwrap();
        let back = apply_delta_rho(&gf, &r);
        let resid = norm_l2(&back.sub(&f), None) / norm_l2(&f, None);
        let mut bound = 0.0f64;
        for k in [[2i64, 1, 0], [-3, 4, 5], [7, -2, 1]] {
            let xi = Vec3::new(
                std::f64::consts::PI / L * k[0] as f64,
                std::f64::consts::PI / L * k[1] as f64,
                std::f64::consts::PI / L * k[2] as f64,
            );
            let s2 = symbol_sigma(xi, &r).norm_sqr();
            bound = bound.max(tau * tau / (s2 + tau * tau));
        }
        assert!(resid <= bound * (1.0 + 1e-6), "residual {resid} vs bound {bound}");
    }

    #[test]
    fn lattice_proximity_guard_moves_s() {
        let r = rho_paper(12.0);
        let adj = r.adjusted_for_grid(N, L).unwrap();
        assert!(adj.min_lattice_sigma_off_protected(N, L) >= 1e-9 * adj.s * adj.s);
    }
}
