//! Boundary mesh on the sphere `∂Ω`, Cauchy-data extraction, the
//! patch-equality predicate, and the three computable forms of the
//! bilinear quantity `I` relating two solutions.
//!
//! Mesh: latitude–longitude product quadrature with Gauss–Legendre nodes
//! in the polar angle, so the weights sum to the sphere area exactly.

use num_complex::Complex64;

use crate::faddeev::RhoParam;
use crate::fields::GridField;
use crate::geometry::{BallDomain, SurfacePatch, Vec3};
use crate::quadrature::gauss_legendre;
use crate::{Error, Result};

/// Quadrature mesh on `∂Ω`: nodes, area weights, outward unit normals.
#[derive(Debug, Clone)]
pub struct BoundaryMesh {
    pub nodes: Vec<Vec3>,
    pub weights: Vec<f64>,
    pub normals: Vec<Vec3>,
}

impl BoundaryMesh {
    /// Gauss–Legendre × uniform-longitude product mesh with
    /// `n_theta · n_phi` nodes.
    pub fn new(dom: &BallDomain, n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta < 2 || n_phi < 4 {
            return Err(Error::invalid("mesh needs n_theta >= 2 and n_phi >= 4"));
        }
        let (ct, wt) = gauss_legendre(n_theta);
        let r = dom.r_omega;
        let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
        let mut nodes = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        let mut normals = Vec::with_capacity(n_theta * n_phi);
        for (c, w) in ct.iter().zip(wt.iter()) {
            let st = (1.0 - c * c).sqrt();
            for j in 0..n_phi {
                let phi = dphi * j as f64;
                let n = Vec3::new(st * phi.cos(), st * phi.sin(), *c);
                nodes.push(dom.center.add(n.scale(r)));
                normals.push(n);
                weights.push(r * r * w * dphi);
            }
        }
        Ok(BoundaryMesh { nodes, weights, normals })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Total quadrature area (equals `4πR²` to roundoff).
    pub fn area(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Boundary trace and normal derivative of a field, sampled on a mesh.
#[derive(Debug, Clone)]
pub struct CauchyData {
    pub trace: Vec<Complex64>,
    pub normal_derivative: Vec<Complex64>,
}

impl CauchyData {
    pub fn assert_finite(&self) -> Result<()> {
        let ok = self
            .trace
            .iter()
            .chain(self.normal_derivative.iter())
            .all(|v| v.re.is_finite() && v.im.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Guard("Cauchy data contains non-finite values".into()))
        }
    }
}

// --- degree-7 tensor-product Lagrange interpolation -----------------------

/// Lagrange weights on the 8 equispaced stencil nodes `{0,…,7}` at
/// fractional position `t ∈ [3, 4]`.
fn lagrange8_weights(t: f64, out: &mut [f64; 8]) {
    // denominators d_j = Π_{k≠j} (j-k) = (-1)^{7-j} j! (7-j)!
    const DEN: [f64; 8] = [-5040.0, 720.0, -240.0, 144.0, -144.0, 240.0, -720.0, 5040.0];
    let mut prefix = [0.0f64; 9];
    let mut suffix = [0.0f64; 9];
    prefix[0] = 1.0;
    for j in 0..8 {
        prefix[j + 1] = prefix[j] * (t - j as f64);
    }
    suffix[8] = 1.0;
    for j in (0..8).rev() {
        suffix[j] = suffix[j + 1] * (t - j as f64);
    }
    for j in 0..8 {
        out[j] = prefix[j] * suffix[j + 1] / DEN[j];
    }
}

/// Interpolates `f` at an off-grid point with a degree-7 tensor stencil.
/// Errors when the stencil leaves the box.
fn interp_deg7(f: &GridField, p: Vec3) -> Result<Complex64> {
    let n = f.n as i64;
    let h = f.h();
    let mut base = [0i64; 3];
    let mut wx = [0.0f64; 8];
    let mut wy = [0.0f64; 8];
    let mut wz = [0.0f64; 8];
    for (axis, (coord, w)) in
        [(p.x, &mut wx), (p.y, &mut wy), (p.z, &mut wz)].into_iter().enumerate()
    {
        let t = (coord + f.l) / h;
        let i0 = t.floor() as i64 - 3;
        if i0 < 0 || i0 + 7 >= n {
            return Err(Error::Guard(format!(
                "interpolation stencil leaves the box near axis {axis} (point ({}, {}, {}))",
                p.x, p.y, p.z
            )));
        }
        lagrange8_weights(t - i0 as f64, w);
        base[axis] = i0;
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (kz, wz_k) in wz.iter().enumerate() {
        let iz = (base[2] + kz as i64) as usize;
        for (ky, wy_k) in wy.iter().enumerate() {
            let iy = (base[1] + ky as i64) as usize;
            let wzy = wz_k * wy_k;
            let row = f.n * (iy + f.n * iz) + base[0] as usize;
            let mut acc_x = Complex64::new(0.0, 0.0);
            for (kx, wx_k) in wx.iter().enumerate() {
                acc_x += f.data[row + kx] * *wx_k;
            }
            acc += acc_x * wzy;
        }
    }
    Ok(acc)
}

/// Extracts trace and normal derivative of a field on the mesh.
///
/// Trace by degree-7 tensor Lagrange interpolation; normal derivative by
/// 6th-order central differencing along the outward normal with step `h`.
pub fn extract_cauchy(v: &GridField, mesh: &BoundaryMesh, dom: &BallDomain) -> Result<CauchyData> {
    if dom.r_omega + 7.0 * v.h() >= v.l {
        return Err(Error::Guard(
            "boundary nodes too close to the box edge for the difference stencil".into(),
        ));
    }
    let h = v.h();
    // 6th-order central weights for offsets ±1, ±2, ±3 (over 60h)
    const W: [f64; 3] = [45.0, -9.0, 1.0];
    let mut trace = Vec::with_capacity(mesh.len());
    let mut nd = Vec::with_capacity(mesh.len());
    for (node, normal) in mesh.nodes.iter().zip(mesh.normals.iter()) {
        trace.push(interp_deg7(v, *node)?);
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, w) in W.iter().enumerate() {
            let d = (k + 1) as f64 * h;
            let plus = interp_deg7(v, node.add(normal.scale(d)))?;
            let minus = interp_deg7(v, node.sub(normal.scale(d)))?;
            acc += (plus - minus) * *w;
        }
        nd.push(acc / (60.0 * h));
    }
    Ok(CauchyData { trace, normal_derivative: nd })
}

/// Verdict of the patch-equality predicate plus the measured node-wise
/// maxima.
#[derive(Debug, Clone, Copy)]
pub struct CauchyComparison {
    pub equal: bool,
    pub max_trace_dev: f64,
    pub max_deriv_dev: f64,
    pub nodes_in_patch: usize,
}

/// Compares two Cauchy data sets on the nodes inside a surface patch.
pub fn cauchy_equal_on(
    cd1: &CauchyData,
    cd2: &CauchyData,
    patch: &SurfacePatch,
    mesh: &BoundaryMesh,
    dom: &BallDomain,
    tol_trace: f64,
    tol_deriv: f64,
) -> Result<CauchyComparison> {
    if cd1.trace.len() != mesh.len() || cd2.trace.len() != mesh.len() {
        return Err(Error::GridMismatch("Cauchy data does not match the mesh".into()));
    }
    let mut max_t = 0.0f64;
    let mut max_d = 0.0f64;
    let mut count = 0usize;
    for i in 0..mesh.len() {
        let dir = mesh.nodes[i].sub(dom.center);
        if !patch.contains_direction(dir) {
            continue;
        }
        count += 1;
        max_t = max_t.max((cd1.trace[i] - cd2.trace[i]).norm());
        max_d = max_d.max((cd1.normal_derivative[i] - cd2.normal_derivative[i]).norm());
    }
    if count == 0 {
        return Err(Error::invalid("surface patch contains no mesh nodes"));
    }
    Ok(CauchyComparison {
        equal: max_t <= tol_trace && max_d <= tol_deriv,
        max_trace_dev: max_t,
        max_deriv_dev: max_d,
        nodes_in_patch: count,
    })
}

/// Boundary bilinear form `I = Σ w·(∂v₁·v₂ − v₁·∂v₂)`.
pub fn i_boundary(cd1: &CauchyData, cd2: &CauchyData, mesh: &BoundaryMesh) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..mesh.len() {
        acc += (cd1.normal_derivative[i] * cd2.trace[i] - cd1.trace[i] * cd2.normal_derivative[i])
            * mesh.weights[i];
    }
    acc
}

/// Volume form `I = Σ_Ω (q₂ − q₁)·v₁·v₂·h³` (plain product, no
/// conjugation).
pub fn i_volume(
    q1: &GridField,
    q2: &GridField,
    v1: &GridField,
    v2: &GridField,
    dom: &BallDomain,
) -> Result<Complex64> {
    if !(q1.same_grid(q2) && q1.same_grid(v1) && q1.same_grid(v2)) {
        return Err(Error::GridMismatch("i_volume requires four matching grids".into()));
    }
    let n = q1.n;
    let h3 = q1.h().powi(3);
    let r2 = dom.r_omega * dom.r_omega;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut i = 0usize;
    for iz in 0..n {
        let dz = crate::fields::grid_coord(iz, n, q1.l) - dom.center.z;
        for iy in 0..n {
            let dy = crate::fields::grid_coord(iy, n, q1.l) - dom.center.y;
            let pl = dz * dz + dy * dy;
            for ix in 0..n {
                let dx = crate::fields::grid_coord(ix, n, q1.l) - dom.center.x;
                if pl + dx * dx <= r2 {
                    acc += (q2.data[i] - q1.data[i]) * v1.data[i] * v2.data[i];
                }
                i += 1;
            }
        }
    }
    Ok(acc * h3)
}

/// Conjugated-factor boundary form: quadrature of
/// `∂u₁·u₂ − u₁·∂u₂ + 2(ρ·n)·u₁·u₂`, the integrand left after the
/// exponentials of the two opposite-growth solutions cancel. `rho` is
/// the parameter of the first factor; mesh and fields share the
/// plane-adapted frame.
pub fn i_conjugated(
    cd1: &CauchyData,
    cd2: &CauchyData,
    rho: &RhoParam,
    mesh: &BoundaryMesh,
    dom: &BallDomain,
) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..mesh.len() {
        let n = mesh.nodes[i].sub(dom.center).normalized();
        let rho_n = rho.rho_dot_frame(n);
        acc += (cd1.normal_derivative[i] * cd2.trace[i]
            - cd1.trace[i] * cd2.normal_derivative[i]
            + 2.0 * rho_n * cd1.trace[i] * cd2.trace[i])
            * mesh.weights[i];
    }
    acc
}

/// Writes Cauchy data as CSV:
/// `x,y,z,nx,ny,nz,weight,re_trace,im_trace,re_dn,im_dn`.
pub fn export_cauchy_csv<W: std::io::Write>(
    w: &mut W,
    mesh: &BoundaryMesh,
    cd: &CauchyData,
) -> Result<()> {
    writeln!(w, "x,y,z,nx,ny,nz,weight,re_trace,im_trace,re_dn,im_dn")?;
    for i in 0..mesh.len() {
        let p = mesh.nodes[i];
        let n = mesh.normals[i];
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            p.x,
            p.y,
            p.z,
            n.x,
            n.y,
            n.z,
            mesh.weights[i],
            cd.trace[i].re,
            cd.trace[i].im,
            cd.normal_derivative[i].re,
            cd.normal_derivative[i].im
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::faddeev::RhoParam;
    use crate::fields::laplacian;
    use crate::geometry::Plane;

    const L: f64 = 2.5;

    fn dom(n: usize) -> BallDomain {
        BallDomain::unit(L, n).unwrap()
    }

    fn axis_plane() -> Plane {
        Plane::from_frame(
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::ZERO,
            Vec3::ZERO,
        )
        .unwrap()
    }

    #[test]
    fn mesh_area_exact_and_normals_unit() {
        let d = dom(64);
        let mesh = BoundaryMesh::new(&d, 24, 48).unwrap();
        let area = mesh.area();
        let exact = 4.0 * std::f64::consts::PI;
        assert!((area - exact).abs() < 1e-10, "area {area}");
        for n in &mesh.normals {
            assert!((n.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn extract_constant_field() {
        let d = dom(64);
        let mesh = BoundaryMesh::new(&d, 12, 24).unwrap();
        let v = GridField::from_fn(64, L, |_| Complex64::new(2.0, -1.0));
        let cd = extract_cauchy(&v, &mesh, &d).unwrap();
        for i in 0..mesh.len() {
            assert!((cd.trace[i] - Complex64::new(2.0, -1.0)).norm() < 1e-12);
            assert!(cd.normal_derivative[i].norm() < 1e-12);
        }
    }

    #[test]
    fn extract_linear_field() {
        let d = dom(64);
        let mesh = BoundaryMesh::new(&d, 12, 24).unwrap();
        let a = Vec3::new(0.3, -1.1, 0.7);
        let v = GridField::from_fn_real(64, L, |p| a.dot(p));
        let cd = extract_cauchy(&v, &mesh, &d).unwrap();
        for i in 0..mesh.len() {
            let expected = a.dot(mesh.normals[i]);
            assert!(
                (cd.normal_derivative[i] - Complex64::new(expected, 0.0)).norm() < 1e-8,
                "node {i}"
            );
        }
    }

    #[test]
    fn extract_exponential_cgo_accuracy() {
        // v = e^{ρ·x} at s = 6: normal derivative vs (ρ·n)e^{ρ·x},
        // relative to the sup of the analytic derivative.
        let n = 128;
        let d = dom(n);
        let mesh = BoundaryMesh::new(&d, 16, 32).unwrap();
        let rho = RhoParam::new(axis_plane(), 6.0, 1, 0.15, 0.1).unwrap();
        let v = GridField::from_fn(n, L, |p| rho.rho_dot_frame(p).exp());
        let cd = extract_cauchy(&v, &mesh, &d).unwrap();
        let mut max_err = 0.0f64;
        let mut max_ref = 0.0f64;
        for i in 0..mesh.len() {
            let exact = rho.rho_dot_frame(mesh.normals[i]) * rho.rho_dot_frame(mesh.nodes[i]).exp();
            max_err = max_err.max((cd.normal_derivative[i] - exact).norm());
            max_ref = max_ref.max(exact.norm());
        }
        assert!(max_err <= 1e-4 * max_ref, "rel error {}", max_err / max_ref);
    }

    #[test]
    fn extract_guards_box_edge() {
        // field box too small for the sphere + stencil reach
        let d = dom(64);
        let mesh = BoundaryMesh::new(&d, 8, 16).unwrap();
        let v = GridField::zeros(64, 1.05);
        assert!(extract_cauchy(&v, &mesh, &d).is_err());
    }

    #[test]
    fn cauchy_equal_on_self_and_perturbed() {
        let d = dom(64);
        let mesh = BoundaryMesh::new(&d, 12, 24).unwrap();
        let v = GridField::from_fn_real(64, L, |p| (-(p.dot(p))).exp());
        let cd = extract_cauchy(&v, &mesh, &d).unwrap();
        let patch = SurfacePatch::new(Vec3::new(0.0, 0.0, 1.0), 1.0).unwrap();
        let cmp = cauchy_equal_on(&cd, &cd, &patch, &mesh, &d, 1e-12, 1e-12).unwrap();
        assert!(cmp.equal);
        assert_eq!(cmp.max_trace_dev, 0.0);
        assert!(cmp.nodes_in_patch > 0);

        // bump one in-patch node by twice the tolerance
        let mut cd2 = cd.clone();
        let idx = (0..mesh.len())
            .find(|&i| patch.contains_direction(mesh.nodes[i].sub(d.center)))
            .unwrap();
        let tol = 1e-6;
        cd2.trace[idx] += Complex64::new(2.0 * tol, 0.0);
        let cmp = cauchy_equal_on(&cd, &cd2, &patch, &mesh, &d, tol, tol).unwrap();
        assert!(!cmp.equal);
        assert!(cmp.max_trace_dev >= 2.0 * tol - 1e-15);
    }

    #[test]
    fn cauchy_equal_on_fields_supported_away_from_patch() {
        // two different fields, both vanishing on the northern cap:
        // their Cauchy data agree (at zero) on the patch
        let d = dom(64);
        let mesh = BoundaryMesh::new(&d, 16, 32).unwrap();
        let southern = |p: Vec3, k: f64| {
            let cut = crate::cutoffs::smoothstep((0.2 - p.z) / 0.3);
            Complex64::new(cut * (k * p.x).sin(), cut * (k * p.y).cos())
        };
        let v1 = GridField::from_fn(64, L, |p| southern(p, 2.0));
        let v2 = GridField::from_fn(64, L, |p| southern(p, 3.0));
        let cd1 = extract_cauchy(&v1, &mesh, &d).unwrap();
        let cd2 = extract_cauchy(&v2, &mesh, &d).unwrap();
        let patch = SurfacePatch::new(Vec3::new(0.0, 0.0, 1.0), 0.8).unwrap();
        let cmp = cauchy_equal_on(&cd1, &cd2, &patch, &mesh, &d, 1e-10, 1e-9).unwrap();
        assert!(
            cmp.equal,
            "devs {} / {} on {} nodes",
            cmp.max_trace_dev, cmp.max_deriv_dev, cmp.nodes_in_patch
        );
        // empty patch errors
        let tiny = SurfacePatch::new(Vec3::new(0.0, 0.0, 1.0), 1e-4).unwrap();
        assert!(cauchy_equal_on(&cd1, &cd2, &tiny, &mesh, &d, 1.0, 1.0).is_err());
    }

    #[test]
    fn i_boundary_trivial_and_harmonic() {
        let d = dom(64);
        let mesh = BoundaryMesh::new(&d, 24, 48).unwrap();
        let ones = GridField::from_fn(64, L, |_| Complex64::new(1.0, 0.0));
        let cd1 = extract_cauchy(&ones, &mesh, &d).unwrap();
        assert!(i_boundary(&cd1, &cd1, &mesh).norm() < 1e-12);

        // v1 = x1, v2 = x2: integrand vanishes pointwise
        let x1 = GridField::from_fn_real(64, L, |p| p.x);
        let x2 = GridField::from_fn_real(64, L, |p| p.y);
        let c1 = extract_cauchy(&x1, &mesh, &d).unwrap();
        let c2 = extract_cauchy(&x2, &mesh, &d).unwrap();
        let v = i_boundary(&c1, &c2, &mesh);
        assert!(v.norm() <= 1e-6, "harmonic pair I = {v}");
        // antisymmetry
        let w = i_boundary(&c2, &c1, &mesh);
        assert!((v + w).norm() <= 1e-12_f64.max(1e-12 * v.norm()));
    }

    #[test]
    fn i_volume_zero_difference_and_gaussian_oracle() {
        let n = 64;
        let d = dom(n);
        let q = GridField::from_fn_real(n, L, |p| (-p.dot(p) / 0.16).exp());
        let ones = GridField::from_fn(n, L, |_| Complex64::new(1.0, 0.0));
        let zero = GridField::zeros(n, L);
        let same = i_volume(&q, &q, &ones, &ones, &d).unwrap();
        assert_eq!(same, Complex64::new(0.0, 0.0));

        // ∫_ball exp(-|x|²/w²) = π^{3/2} w³ erf(R/w) - 2π w² R e^{-R²/w²}
        let w: f64 = 0.4;
        let erf = |x: f64| {
            // Abramowitz–Stegun 7.1.26, |error| < 1.5e-7
            let t = 1.0 / (1.0 + 0.3275911 * x);
            1.0 - (((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t - 0.284496736) * t
                + 0.254829592)
                * t
                * (-x * x).exp()
        };
        let exact = std::f64::consts::PI.powf(1.5) * w.powi(3) * erf(1.0 / w)
            - 2.0 * std::f64::consts::PI * w * w * (-1.0 / (w * w)).exp();
        let got = i_volume(&zero, &q, &ones, &ones, &d).unwrap();
        assert!(
            (got.re - exact).abs() <= 0.01 * exact,
            "gaussian volume {} vs {exact}",
            got.re
        );
    }

    #[test]
    fn green_identity_mesh_refinement() {
        // |I_boundary − I_volume| strictly decreases when the mesh is
        // refined. The pair e^{a·x}, e^{b·x} gives the volume side in
        // closed form: ∫_Ω (Δv₁ v₂ − v₁ Δv₂) = (|a|²−|b|²)·∫_Ω e^{(a+b)·x}
        // with ∫_{|x|≤1} e^{c·x} dx = 4π(|c|cosh|c| − sinh|c|)/|c|³,
        // so the ladder measures pure mesh-quadrature error.
        let n = 64;
        let d = dom(n);
        let a = Vec3::new(2.0, 1.0, -1.0);
        let b = Vec3::new(-1.0, 2.0, 0.5);
        let v1 = GridField::from_fn_real(n, L, |p| (a.dot(p)).exp());
        let v2 = GridField::from_fn_real(n, L, |p| (b.dot(p)).exp());
        let c = a.add(b);
        let cn = c.norm();
        let ball_exp = 4.0 * std::f64::consts::PI * (cn * cn.cosh() - cn.sinh()) / cn.powi(3);
        let vol = Complex64::new((a.dot(a) - b.dot(b)) * ball_exp, 0.0);
        let mut gaps = Vec::new();
        for (nt, np) in [(4, 8), (6, 12), (8, 16)] {
            let mesh = BoundaryMesh::new(&d, nt, np).unwrap();
            let c1 = extract_cauchy(&v1, &mesh, &d).unwrap();
            let c2 = extract_cauchy(&v2, &mesh, &d).unwrap();
            gaps.push((i_boundary(&c1, &c2, &mesh) - vol).norm());
        }
        assert!(
            gaps[0] > gaps[1] && gaps[1] > gaps[2],
            "gaps not strictly decreasing: {gaps:?}"
        );
    }

    #[test]
    fn i_conjugated_zero_boundary_and_phi_symmetry() {
        let n = 64;
        let d = dom(n);
        let mesh = BoundaryMesh::new(&d, 16, 32).unwrap();
        let rho = RhoParam::new(axis_plane(), 8.0, 1, 0.15, 0.1).unwrap();

        // fields vanishing near the boundary: I_conjugated = 0
        let interior = GridField::from_fn(n, L, |p| {
            Complex64::new(crate::cutoffs::smoothstep((0.6 - p.norm()) / 0.2), 0.0)
        });
        let cd = extract_cauchy(&interior, &mesh, &d).unwrap();
        assert!(i_conjugated(&cd, &cd, &rho, &mesh, &d).norm() < 1e-12);

        // φ-symmetric traces: ∂u·u − u·∂u = 0 pointwise, and the
        // 2(ρ·n)u² term cancels exactly over the uniform-longitude mesh.
        let sym = GridField::from_fn_real(n, L, |p| (-(p.dot(p))).exp());
        let cs = extract_cauchy(&sym, &mesh, &d).unwrap();
        let full = i_conjugated(&cs, &cs, &rho, &mesh, &d);
        let scale: f64 = rho.s * mesh.area();
        assert!(full.norm() <= 1e-8 * scale, "phi-symmetric rho·n term {}", full.norm());
    }

    #[test]
    fn cauchy_csv_export_shape() {
        let d = dom(64);
        let mesh = BoundaryMesh::new(&d, 4, 8).unwrap();
        let v = GridField::from_fn_real(64, L, |p| p.x);
        let cd = extract_cauchy(&v, &mesh, &d).unwrap();
        let mut buf = Vec::new();
        export_cauchy_csv(&mut buf, &mesh, &cd).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + mesh.len());
        assert_eq!(lines[0], "x,y,z,nx,ny,nz,weight,re_trace,im_trace,re_dn,im_dn");
        assert_eq!(lines[1].split(',').count(), 11);
    }
}
