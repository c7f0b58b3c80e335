//! The two-plane transform (the Radon transform in three dimensions),
//! its Ω-relative and slab-limit variants, filtered backprojection, and
//! support localization from vanishing plane integrals.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::fields::{grid_coord, GridField};
use crate::geometry::{BallDomain, Plane, Vec3};
use crate::{Error, Result};

/// One plane-integral measurement.
#[derive(Debug, Clone)]
pub struct PlaneSample {
    pub plane: Plane,
    pub value: Complex64,
}

/// Trilinear sample of a field at an arbitrary point; zero outside the
/// interpolation range of the box.
fn trilinear(f: &GridField, p: Vec3) -> Complex64 {
    let n = f.n;
    let h = f.h();
    let tx = (p.x + f.l) / h;
    let ty = (p.y + f.l) / h;
    let tz = (p.z + f.l) / h;
    if tx < 0.0 || ty < 0.0 || tz < 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let (ix, iy, iz) = (tx.floor() as usize, ty.floor() as usize, tz.floor() as usize);
    if ix + 1 >= n || iy + 1 >= n || iz + 1 >= n {
        return Complex64::new(0.0, 0.0);
    }
    let (fx, fy, fz) = (tx - ix as f64, ty - iy as f64, tz - iz as f64);
    let mut acc = Complex64::new(0.0, 0.0);
    for (dz, wz) in [(0, 1.0 - fz), (1, fz)] {
        for (dy, wy) in [(0, 1.0 - fy), (1, fy)] {
            let w0 = wz * wy;
            let row = f.idx(ix, iy + dy, iz + dz);
            acc += (f.data[row] * (1.0 - fx) + f.data[row + 1] * fx) * w0;
        }
    }
    acc
}

/// Plane integral `∫_Π f dλ` by 2-D tensor quadrature with step `h`,
/// trilinear sampling, clipped to the box.
pub fn plane_integral(f: &GridField, plane: &Plane) -> Complex64 {
    let h = f.h();
    let reach = f.l * 3.0f64.sqrt();
    let m = (reach / h).ceil() as i64;
    let mut acc = Complex64::new(0.0, 0.0);
    for ia in -m..=m {
        let a = ia as f64 * h;
        for ib in -m..=m {
            let b = ib as f64 * h;
            let p = plane
                .base_point
                .add(plane.omega_r.scale(a))
                .add(plane.omega_i.scale(b));
            if p.x.abs() >= f.l || p.y.abs() >= f.l || p.z.abs() >= f.l {
                continue;
            }
            acc += trilinear(f, p);
        }
    }
    acc * h * h
}

/// Plane integral restricted to `Π ∩ Ω` (sharp cut at the disc edge).
/// For transversal intersections this equals `plane_integral(f·χ_Ω)`.
pub fn relative_plane_integral(f: &GridField, plane: &Plane, dom: &BallDomain) -> Complex64 {
    weighted_disc_integral(f, plane, dom, |_, _| Complex64::new(1.0, 0.0))
}

/// Bergman-type moment `∫_{Π∩Ω} f·zᵏ dλ` with `z = a + ib` the in-plane
/// complex coordinate relative to the plane's base point.
pub fn holomorphic_moment(
    f: &GridField,
    plane: &Plane,
    k: usize,
    dom: &BallDomain,
) -> Complex64 {
    weighted_disc_integral(f, plane, dom, |a, b| Complex64::new(a, b).powu(k as u32))
}

fn weighted_disc_integral(
    f: &GridField,
    plane: &Plane,
    dom: &BallDomain,
    weight: impl Fn(f64, f64) -> Complex64,
) -> Complex64 {
    let h = f.h();
    let d = plane.distance_to(dom.center);
    let r2 = dom.r_omega * dom.r_omega - d * d;
    if r2 <= 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let m = (r2.sqrt() / h).ceil() as i64;
    let mut acc = Complex64::new(0.0, 0.0);
    for ia in -m..=m {
        let a = ia as f64 * h;
        for ib in -m..=m {
            let b = ib as f64 * h;
            if a * a + b * b > r2 {
                continue;
            }
            let p = plane
                .base_point
                .add(plane.omega_r.scale(a))
                .add(plane.omega_i.scale(b));
            acc += trilinear(f, p) * weight(a, b);
        }
    }
    acc * h * h
}

/// Per-ε slab averages plus their Richardson-in-ε² extrapolation.
#[derive(Debug, Clone)]
pub struct SlabEstimate {
    pub values: Vec<(f64, Complex64)>,
    pub extrapolated: Complex64,
}

/// Slab averages `(1/2ε)∫_{Ω ∩ {dist(x,Π)<ε}} f dx`, cross-validating
/// the relative plane integral as `ε → 0`.
pub fn slab_estimate(
    f: &GridField,
    plane: &Plane,
    dom: &BallDomain,
    eps_list: &[f64],
) -> Result<SlabEstimate> {
    let h = f.h();
    for &e in eps_list {
        if e < 2.0 * h {
            return Err(Error::invalid(format!(
                "slab width {e} under-resolved: need eps >= 2h = {}",
                2.0 * h
            )));
        }
    }
    if eps_list.is_empty() {
        return Err(Error::invalid("eps_list must be nonempty"));
    }
    let n = f.n;
    let nu = plane.normal();
    let doff = plane.signed_offset(dom.center);
    let r2 = dom.r_omega * dom.r_omega;
    let mut values = Vec::with_capacity(eps_list.len());
    for &e in eps_list {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut i = 0usize;
        for iz in 0..n {
            let z = grid_coord(iz, n, f.l) - dom.center.z;
            for iy in 0..n {
                let y = grid_coord(iy, n, f.l) - dom.center.y;
                for ix in 0..n {
                    let x = grid_coord(ix, n, f.l) - dom.center.x;
                    let inside = x * x + y * y + z * z <= r2;
                    if inside {
                        let t = nu.x * x + nu.y * y + nu.z * z - doff;
                        if t.abs() < e {
                            acc += f.data[i];
                        }
                    }
                    i += 1;
                }
            }
        }
        values.push((e, acc * h.powi(3) / (2.0 * e)));
    }
    // least squares fit v(ε) = a + b ε²
    let m = values.len() as f64;
    let sx: f64 = values.iter().map(|(e, _)| e * e).sum();
    let sxx: f64 = values.iter().map(|(e, _)| e.powi(4)).sum();
    let sy: Complex64 = values.iter().map(|(_, v)| v).sum();
    let sxy: Complex64 = values.iter().map(|(e, v)| v * (e * e)).sum();
    let det = m * sxx - sx * sx;
    let extrapolated = if det.abs() < 1e-30 {
        sy / m
    } else {
        (sy * sxx - sxy * sx) / det
    };
    Ok(SlabEstimate { values, extrapolated })
}

// ---------------------------------------------------------------------------
// Filtered backprojection
// ---------------------------------------------------------------------------

/// Samples grouped by direction, with a common equispaced offset ladder.
struct DirectionGroup {
    normal: Vec3,
    offsets: Vec<f64>,
    values: Vec<Complex64>,
}

fn group_samples(samples: &[PlaneSample], center: Vec3) -> Result<Vec<DirectionGroup>> {
    let mut groups: Vec<DirectionGroup> = Vec::new();
    for s in samples {
        let nrm = s.plane.normal();
        let off = s.plane.signed_offset(center);
        match groups.iter_mut().find(|g| g.normal.sub(nrm).norm() < 1e-12) {
            Some(g) => {
                g.offsets.push(off);
                g.values.push(s.value);
            }
            None => groups.push(DirectionGroup {
                normal: nrm,
                offsets: vec![off],
                values: vec![s.value],
            }),
        }
    }
    let count = groups.first().map(|g| g.offsets.len()).unwrap_or(0);
    if count < 3 {
        return Err(Error::invalid("FBP needs at least 3 offsets per direction"));
    }
    let mut spacing = None;
    for g in groups.iter_mut() {
        if g.offsets.len() != count {
            return Err(Error::invalid(format!(
                "ragged sampling: direction with {} offsets, expected {count}",
                g.offsets.len()
            )));
        }
        let mut order: Vec<usize> = (0..count).collect();
        order.sort_by(|&a, &b| g.offsets[a].partial_cmp(&g.offsets[b]).unwrap());
        let offsets: Vec<f64> = order.iter().map(|&i| g.offsets[i]).collect();
        let values: Vec<Complex64> = order.iter().map(|&i| g.values[i]).collect();
        let dt = offsets[1] - offsets[0];
        for w in offsets.windows(2) {
            if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs().max(1e-9) {
                return Err(Error::invalid("ragged sampling: offsets not equispaced"));
            }
        }
        match spacing {
            None => spacing = Some(dt),
            Some(prev) => {
                if (prev - dt).abs() > 1e-9 * prev.abs() {
                    return Err(Error::invalid("ragged sampling: spacing differs across directions"));
                }
            }
        }
        g.offsets = offsets;
        g.values = values;
    }
    Ok(groups)
}

/// Spectral second derivative in the offset variable (ramp² filter),
/// with optional raised-cosine apodization.
fn second_derivative_filter(values: &[Complex64], dt: f64, apodize: bool) -> Vec<Complex64> {
    let m = values.len();
    // direct DFT: m is small (offset ladders), O(m²) is negligible
    let mut spec = vec![Complex64::new(0.0, 0.0); m];
    for (k, s) in spec.iter_mut().enumerate() {
        for (j, v) in values.iter().enumerate() {
            let ph = -2.0 * std::f64::consts::PI * (k * j) as f64 / m as f64;
            *s += v * Complex64::new(ph.cos(), ph.sin());
        }
    }
    let kmax = std::f64::consts::PI / dt;
    for (k, s) in spec.iter_mut().enumerate() {
        let ks = if k <= m / 2 { k as f64 } else { k as f64 - m as f64 };
        let freq = 2.0 * std::f64::consts::PI * ks / (m as f64 * dt);
        let mut mult = -freq * freq;
        if apodize {
            mult *= (std::f64::consts::FRAC_PI_2 * freq.abs() / kmax).cos().max(0.0);
        }
        *s *= mult;
    }
    let mut out = vec![Complex64::new(0.0, 0.0); m];
    for (j, o) in out.iter_mut().enumerate() {
        for (k, s) in spec.iter().enumerate() {
            let ph = 2.0 * std::f64::consts::PI * (k * j) as f64 / m as f64;
            *o += s * Complex64::new(ph.cos(), ph.sin());
        }
        *o /= m as f64;
    }
    out
}

/// Catmull–Rom interpolation of a uniformly sampled profile; zero
/// outside the sample range.
fn catmull_rom(values: &[Complex64], t0: f64, dt: f64, t: f64) -> Complex64 {
    let m = values.len();
    let u = (t - t0) / dt;
    if u < 0.0 || u > (m - 1) as f64 {
        return Complex64::new(0.0, 0.0);
    }
    let i = (u.floor() as usize).min(m - 2);
    let f = u - i as f64;
    let get = |j: i64| -> Complex64 {
        if j < 0 || j >= m as i64 {
            Complex64::new(0.0, 0.0)
        } else {
            values[j as usize]
        }
    };
    let (p0, p1, p2, p3) = (get(i as i64 - 1), get(i as i64), get(i as i64 + 1), get(i as i64 + 2));
    let f2 = f * f;
    let f3 = f2 * f;
    (p1 * 2.0 + (p2 - p0) * f + (p0 * 2.0 - p1 * 5.0 + p2 * 4.0 - p3) * f2
        + (p3 - p0 + (p1 - p2) * 3.0) * f3)
        * 0.5
}

/// Radon inversion by filtered backprojection: second-derivative filter
/// in the offset, backprojection over directions, normalized by
/// `-1/(8π²)·(4π/M)` for a hemisphere of `M` directions.
pub fn radon_invert_fbp(
    samples: &[PlaneSample],
    dom: &BallDomain,
    out_n: usize,
    out_l: f64,
    apodize: bool,
) -> Result<GridField> {
    let groups = group_samples(samples, dom.center)?;
    let m_dirs = groups.len();
    if m_dirs < 2 {
        return Err(Error::invalid("FBP needs at least 2 directions"));
    }
    let filtered: Vec<(Vec3, Vec<f64>, Vec<Complex64>)> = groups
        .iter()
        .map(|g| {
            let dt = g.offsets[1] - g.offsets[0];
            (g.normal, g.offsets.clone(), second_derivative_filter(&g.values, dt, apodize))
        })
        .collect();
    let scale = -(4.0 * std::f64::consts::PI / m_dirs as f64)
        / (8.0 * std::f64::consts::PI * std::f64::consts::PI);
    let mut out = GridField::zeros(out_n, out_l);
    let n = out_n;
    let l = out_l;
    let center = dom.center;
    // parallel over z-slabs; each output point is independent, so the
    // result is bit-identical for any worker count
    out.data
        .par_chunks_mut(n * n)
        .enumerate()
        .for_each(|(iz, slab)| {
            let z = grid_coord(iz, n, l) - center.z;
            for iy in 0..n {
                let y = grid_coord(iy, n, l) - center.y;
                for ix in 0..n {
                    let x = grid_coord(ix, n, l) - center.x;
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (nrm, offsets, qpp) in &filtered {
                        let t = nrm.x * x + nrm.y * y + nrm.z * z;
                        let dt = offsets[1] - offsets[0];
                        acc += catmull_rom(qpp, offsets[0], dt, t);
                    }
                    slab[ix + n * iy] = acc * scale;
                }
            }
        });
    Ok(out)
}

// ---------------------------------------------------------------------------
// Support localization
// ---------------------------------------------------------------------------

/// Localization result: a sampled margin field (negative = certified
/// empty, nonnegative = candidate support) plus summary geometry.
#[derive(Debug)]
pub struct SupportRegion {
    /// Margin to the nearest vanishing-plane slab, minus the slab
    /// half-thickness; sampled on the output grid.
    pub margin: GridField,
    /// Half-thickness `h/2` used for the slabs.
    pub slab_half: f64,
    pub vanishing_planes: usize,
    pub total_planes: usize,
    /// Largest distance from the domain center to a candidate point
    /// inside Ω (`None` when the whole ball is certified empty).
    pub max_candidate_radius: Option<f64>,
}

impl SupportRegion {
    /// Certified tube depth: `R - max candidate radius` (the depth to
    /// which the boundary shell is certified free of support).
    pub fn certified_tube_depth(&self, dom: &BallDomain) -> f64 {
        match self.max_candidate_radius {
            None => dom.r_omega,
            Some(r) => (dom.r_omega - r).max(0.0),
        }
    }

    pub fn is_candidate(&self, ix: usize, iy: usize, iz: usize) -> bool {
        self.margin.data[self.margin.idx(ix, iy, iz)].re >= 0.0
    }
}

/// Intersects the complements of the slabs (thickness `h`) of all planes
/// whose `|value| < vanish_tol`; the result is a guaranteed superset of
/// the true support at the sampling resolution.
pub fn support_localize(
    samples: &[PlaneSample],
    dom: &BallDomain,
    vanish_tol: f64,
    out_n: usize,
    out_l: f64,
) -> SupportRegion {
    let h = 2.0 * out_l / out_n as f64;
    let slab_half = 0.5 * h;
    let vanishing: Vec<(Vec3, f64)> = samples
        .iter()
        .filter(|s| s.value.norm() < vanish_tol)
        .map(|s| (s.plane.normal(), s.plane.signed_offset(dom.center)))
        .collect();
    let mut margin = GridField::zeros(out_n, out_l);
    let n = out_n;
    let center = dom.center;
    margin
        .data
        .par_chunks_mut(n * n)
        .enumerate()
        .for_each(|(iz, slab)| {
            let z = grid_coord(iz, n, out_l) - center.z;
            for iy in 0..n {
                let y = grid_coord(iy, n, out_l) - center.y;
                for ix in 0..n {
                    let x = grid_coord(ix, n, out_l) - center.x;
                    let mut best = f64::INFINITY;
                    for (nrm, off) in &vanishing {
                        let d = (nrm.x * x + nrm.y * y + nrm.z * z - off).abs();
                        if d < best {
                            best = d;
                        }
                    }
                    slab[ix + n * iy] = Complex64::new(best - slab_half, 0.0);
                }
            }
        });
    // candidate envelope inside Ω
    let mut max_r: Option<f64> = None;
    for iz in 0..n {
        let z = grid_coord(iz, n, out_l) - center.z;
        for iy in 0..n {
            let y = grid_coord(iy, n, out_l) - center.y;
            for ix in 0..n {
                let x = grid_coord(ix, n, out_l) - center.x;
                let r = (x * x + y * y + z * z).sqrt();
                if r <= dom.r_omega && margin.data[margin.idx(ix, iy, iz)].re >= 0.0 {
                    max_r = Some(max_r.map_or(r, |m: f64| m.max(r)));
                }
            }
        }
    }
    SupportRegion {
        margin,
        slab_half,
        vanishing_planes: vanishing.len(),
        total_planes: samples.len(),
        max_candidate_radius: max_r,
    }
}

// ---------------------------------------------------------------------------
// CSV I/O for plane-sample tables
// ---------------------------------------------------------------------------

/// Writes samples as `nx,ny,nz,offset,re,im` rows.
pub fn write_samples_csv<W: std::io::Write>(
    w: &mut W,
    samples: &[PlaneSample],
    center: Vec3,
) -> Result<()> {
    writeln!(w, "nx,ny,nz,offset,re,im")?;
    for s in samples {
        let n = s.plane.normal();
        writeln!(
            w,
            "{},{},{},{},{},{}",
            n.x,
            n.y,
            n.z,
            s.plane.signed_offset(center),
            s.value.re,
            s.value.im
        )?;
    }
    Ok(())
}

/// Reads a plane-sample table written by [`write_samples_csv`].
pub fn read_samples_csv<R: std::io::BufRead>(r: R, center: Vec3) -> Result<Vec<PlaneSample>> {
    let mut out = Vec::new();
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty plane-sample table".into()))??;
    if header.trim() != "nx,ny,nz,offset,re,im" {
        return Err(Error::Format(format!("unexpected header: {header}")));
    }
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 6 {
            return Err(Error::Format(format!("bad row: {line}")));
        }
        let num: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("bad number in row {line}: {e}")))?;
        let plane =
            Plane::from_normal_offset(Vec3::new(num[0], num[1], num[2]), num[3], center)?;
        out.push(PlaneSample { plane, value: Complex64::new(num[4], num[5]) });
    }
    Ok(out)
}
