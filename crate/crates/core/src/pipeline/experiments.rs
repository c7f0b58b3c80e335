//! The four experiments: estimate decay (E1), boundary identity (E2),
//! reconstruction from boundary data (E3), and support localization
//! (E4). All jobs are pure; parallel results are collected in job order
//! so output bytes are independent of the worker count.

use std::io::Write as _;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use super::config::{Config, WindowKind};
use super::{RunContext, RunReport};
use crate::boundary::{extract_cauchy, i_conjugated, i_volume, BoundaryMesh, CauchyData};
use crate::cgo::{assemble_solution, AssembleOptions, SolveOptions};
use crate::cutoffs::{make_chi0, make_chi1, PlanarWindow};
use crate::faddeev::RhoParam;
use crate::fields::{norm_l2, GridField};
use crate::geometry::{
    cap_depth, fibonacci_hemisphere, offset_ladder, sample_planes, BallDomain, Plane,
    SurfacePatch, Vec3,
};
use crate::quadrature::integrate;
use crate::transform::{
    radon_invert_fbp, relative_plane_integral, support_localize, write_samples_csv, PlaneSample,
};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Phantoms and frame plumbing
// ---------------------------------------------------------------------------

/// Named test potential: a Gaussian bump with a C^∞ radial support cut,
/// so supports are strictly interior to Ω.
#[derive(Debug, Clone, Copy)]
pub struct Phantom {
    pub center: Vec3,
    pub width: f64,
    pub amp: f64,
    /// Radial cut: identically 1 for `|x| ≤ cut.0`, 0 for `|x| ≥ cut.1`.
    pub cut: (f64, f64),
}

impl Phantom {
    pub fn eval(&self, p: Vec3) -> f64 {
        let d = p.sub(self.center);
        let cut = crate::cutoffs::smoothstep((self.cut.1 - p.norm()) / (self.cut.1 - self.cut.0));
        self.amp * (-d.dot(d) / (self.width * self.width)).exp() * cut
    }

    pub fn master(&self, n: usize, l: f64) -> GridField {
        GridField::from_fn_real(n, l, |p| self.eval(p))
    }
}

/// Resamples a world-grid field onto the plane-adapted frame grid by
/// trilinear interpolation: `q_f(y) = q(center + y₁ω_R + y₂ω_I + y₃ν)`.
fn resample_to_frame(master: &GridField, plane: &Plane, center: Vec3, n: usize, l: f64) -> GridField {
    let nu = plane.normal();
    GridField::from_fn(n, l, |y| {
        let p = center
            .add(plane.omega_r.scale(y.x))
            .add(plane.omega_i.scale(y.y))
            .add(nu.scale(y.z));
        trilinear_world(master, p)
    })
}

fn trilinear_world(f: &GridField, p: Vec3) -> Complex64 {
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
            let row = f.idx(ix, iy + dy, iz + dz);
            acc += (f.data[row] * (1.0 - fx) + f.data[row + 1] * fx) * (wz * wy);
        }
    }
    acc
}

/// The plane `{y₃ = d}` in frame coordinates.
fn frame_plane(d: f64) -> Plane {
    Plane::from_frame(
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
        Vec3::new(0.0, 0.0, d),
        Vec3::ZERO,
    )
    .expect("axis frame is orthonormal")
}

fn window_for(cfg: &Config) -> Result<PlanarWindow> {
    Ok(match cfg.window_kind {
        WindowKind::WholeBox => PlanarWindow::WholeBox { box_half_width: cfg.l },
        WindowKind::Compact => PlanarWindow::Compact(make_chi0(
            cfg.r_cut_factor * cfg.r_omega,
            cfg.width_factor * cfg.r_omega,
            cfg.r_omega,
            cfg.l,
        )?),
    })
}

/// Finite-box DC-sector factor
/// `a(d, δ) = [∫ χ₁²(t)·area(Π_{d+t} ∩ Ω) dt] / (2L)²`; the boundary
/// estimator divides the measured bilinear form by `1 - a`.
fn dc_factor(delta: f64, d: f64, r_omega: f64, l: f64) -> f64 {
    let chi1 = make_chi1(delta, 0.0, l).expect("delta fits the box");
    let area = |t: f64| {
        let rr = r_omega * r_omega - (d + t) * (d + t);
        if rr > 0.0 {
            std::f64::consts::PI * rr
        } else {
            0.0
        }
    };
    integrate(|t| chi1.eval(t).powi(2) * area(t), -delta, delta, 64, 8)
        / (2.0 * l * (2.0 * l))
}

/// Adjusts each sweep value off the lattice variety once per resolution.
fn adjusted_sweep(cfg: &Config, n: usize) -> Result<Vec<f64>> {
    let probe = frame_plane(0.0);
    cfg.feasible_sweep(n)
        .into_iter()
        .map(|s| {
            RhoParam::new(probe, s, 1, cfg.beta, cfg.eps0)?
                .adjusted_for_grid(n, cfg.l)
                .map(|r| r.s)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Pair engine (shared by E2/E3/E4)
// ---------------------------------------------------------------------------

struct PairEngine<'a> {
    cfg: &'a Config,
    n: usize,
    dom: BallDomain,
    window: PlanarWindow,
    mesh: BoundaryMesh,
    with_norms: bool,
    with_exponential: bool,
    with_patch_check: bool,
    max_iters: usize,
}

/// Everything measured for one opposite-growth pair on one plane.
#[derive(Debug, Clone)]
pub struct PairOutcome {
    pub s: f64,
    pub offset: f64,
    /// Raw conjugated boundary form.
    pub i_conj: Complex64,
    /// DC-corrected boundary estimator `I/(1-a)`.
    pub i_est: Complex64,
    pub i_volume: Complex64,
    /// Exponential-solution boundary form (bypassed when `s·R > 30`).
    pub i_boundary: Option<Complex64>,
    /// In-frame relative plane integral of `q₂ - q₁`.
    pub oracle: Complex64,
    pub dc_a: f64,
    /// Magnitude scale of the conjugated form's terms.
    pub scale: f64,
    /// Max |u_app trace| off the γ-patch over max on it.
    pub offpatch_ratio: Option<f64>,
    pub rows: [JobRow; 2],
}

/// One per-solution diagnostic row of the job CSV.
#[derive(Debug, Clone)]
pub struct JobRow {
    pub plane_id: String,
    pub side: &'static str,
    pub s: f64,
    pub beta: f64,
    pub eps0: f64,
    pub p_norm: f64,
    pub dpp_norm: f64,
    pub g_norm: f64,
    pub residual_box: f64,
    pub residual_omega: f64,
    pub u2_residual: f64,
    pub u2_iters: usize,
    pub uapp_box: f64,
}

impl<'a> PairEngine<'a> {
    fn new(cfg: &'a Config, n: usize, max_iters: usize) -> Result<Self> {
        let dom = BallDomain::new(Vec3::ZERO, cfg.r_omega, cfg.l, n)?;
        Ok(PairEngine {
            cfg,
            n,
            dom,
            window: window_for(cfg)?,
            mesh: BoundaryMesh::new(&dom, cfg.n_theta, cfg.n_phi)?,
            with_norms: true,
            with_exponential: true,
            with_patch_check: false,
            max_iters,
        })
    }

    /// Runs one pair: family 1 for `q1` at growth `+`, family 2 for `q2`
    /// at growth `-`. All fields in frame coordinates.
    fn run(
        &self,
        plane_id: &str,
        q1: Option<&GridField>,
        q2: &GridField,
        s: f64,
        offset: f64,
    ) -> Result<PairOutcome> {
        let cfg = self.cfg;
        let plane = frame_plane(offset);
        let rho1 = RhoParam::new(plane, s, 1, cfg.beta, cfg.eps0)?;
        let rho2 = rho1.opposite();
        let solve = SolveOptions {
            kernel: cfg.solver_kernel,
            tau: cfg.tau_factor * s,
            max_iters: self.max_iters,
            tol: cfg.solver_tol,
        };
        let opts = AssembleOptions {
            window: self.window.clone(),
            with_u2: cfg.with_u2,
            solve,
            with_norms: self.with_norms,
        };
        let sol1 = assemble_solution(q1, &rho1, offset, self.n, cfg.l, &self.dom, &opts)?;
        let sol2 = assemble_solution(Some(q2), &rho2, offset, self.n, cfg.l, &self.dom, &opts)?;
        let u1_tot = sol1.u_total();
        let u2_tot = sol2.u_total();
        let cd1 = extract_cauchy(&u1_tot, &self.mesh, &self.dom)?;
        let cd2 = extract_cauchy(&u2_tot, &self.mesh, &self.dom)?;
        cd1.assert_finite()?;
        cd2.assert_finite()?;
        let i_conj = i_conjugated(&cd1, &cd2, &rho1, &self.mesh, &self.dom);
        let a = dc_factor(rho1.delta(), offset, cfg.r_omega, cfg.l);
        let i_est = i_conj / (1.0 - a);
        // volume form needs the explicit q₁ field
        let zero;
        let q1f = match q1 {
            Some(q) => q,
            None => {
                zero = GridField::zeros(self.n, cfg.l);
                &zero
            }
        };
        let i_vol = i_volume(q1f, q2, &u1_tot, &u2_tot, &self.dom)?;
        let i_bnd = if self.with_exponential && s * cfg.r_omega <= 30.0 {
            let v1 = crate::cgo::exact_v(&u1_tot, &rho1)?;
            let v2 = crate::cgo::exact_v(&u2_tot, &rho2)?;
            let e1 = extract_cauchy(&v1, &self.mesh, &self.dom)?;
            let e2 = extract_cauchy(&v2, &self.mesh, &self.dom)?;
            Some(crate::boundary::i_boundary(&e1, &e2, &self.mesh))
        } else {
            None
        };
        let oracle = {
            let mut diff = q2.clone();
            if let Some(q1) = q1 {
                diff = diff.sub(q1);
            }
            relative_plane_integral(&diff, &plane, &self.dom)
        };
        let scale = i_conj_scale(&cd1, &cd2, &rho1, &self.mesh);
        let offpatch_ratio = if self.with_patch_check {
            Some(self.offpatch_ratio(&sol2.u_app(), offset)?)
        } else {
            None
        };
        let row = |side: &'static str, sol: &crate::cgo::ApproxSolution| JobRow {
            plane_id: plane_id.to_string(),
            side,
            s,
            beta: cfg.beta,
            eps0: cfg.eps0,
            p_norm: sol.report.norms.p_norm,
            dpp_norm: sol.report.norms.dpp_norm,
            g_norm: sol.report.norms.g_norm,
            residual_box: sol.report.residual_box,
            residual_omega: sol.report.residual_omega,
            u2_residual: sol.u2_residual,
            u2_iters: sol.u2_iterations,
            uapp_box: norm_l2(&sol.u_app(), None),
        };
        Ok(PairOutcome {
            s,
            offset,
            i_conj,
            i_est,
            i_volume: i_vol,
            i_boundary: i_bnd,
            oracle,
            dc_a: a,
            scale,
            offpatch_ratio,
            rows: [row("q1", &sol1), row("q2", &sol2)],
        })
    }

    /// Trace magnitude of `u_app` off the γ-patch relative to on it.
    fn offpatch_ratio(&self, u_app: &GridField, offset: f64) -> Result<f64> {
        let cfg = self.cfg;
        // patch around the normal-foot direction (±e₃ in the frame)
        let gamma_angle = (offset.abs() / cfg.r_omega).clamp(0.0, 1.0).acos();
        let radius = (gamma_angle + cfg.patch_margin).min(std::f64::consts::PI);
        let dir = if offset >= 0.0 { Vec3::new(0.0, 0.0, 1.0) } else { Vec3::new(0.0, 0.0, -1.0) };
        let patch = SurfacePatch::new(dir, radius)?;
        let cd = extract_cauchy(u_app, &self.mesh, &self.dom)?;
        let mut on = 0.0f64;
        let mut off = 0.0f64;
        for i in 0..self.mesh.len() {
            let d = self.mesh.nodes[i].sub(self.dom.center);
            let t = cd.trace[i].norm();
            if patch.contains_direction(d) {
                on = on.max(t);
            } else {
                off = off.max(t);
            }
        }
        Ok(if on > 0.0 { off / on } else { f64::INFINITY })
    }
}

/// Natural magnitude of the conjugated form:
/// `‖∂u₁‖‖u₂‖ + ‖u₁‖‖∂u₂‖ + 2s‖u₁‖‖u₂‖` in mesh-weighted L² norms.
fn i_conj_scale(cd1: &CauchyData, cd2: &CauchyData, rho: &RhoParam, mesh: &BoundaryMesh) -> f64 {
    let l2 = |v: &[Complex64]| -> f64 {
        v.iter()
            .zip(mesh.weights.iter())
            .map(|(a, w)| a.norm_sqr() * w)
            .sum::<f64>()
            .sqrt()
    };
    let t1 = l2(&cd1.trace);
    let t2 = l2(&cd2.trace);
    let d1 = l2(&cd1.normal_derivative);
    let d2 = l2(&cd2.normal_derivative);
    d1 * t2 + t1 * d2 + 2.0 * rho.s * t1 * t2
}

// ---------------------------------------------------------------------------
// CSV plumbing
// ---------------------------------------------------------------------------

const JOB_HEADER: &str = "plane_id,s,beta,eps0,p_norm,dpp_norm,g_norm,residual_box,residual_omega,u2_residual,u2_iters,side,uapp_box";

fn write_job_rows(path: &std::path::Path, rows: &[JobRow]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{JOB_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.plane_id,
            r.s,
            r.beta,
            r.eps0,
            r.p_norm,
            r.dpp_norm,
            r.g_norm,
            r.residual_box,
            r.residual_omega,
            r.u2_residual,
            r.u2_iters,
            r.side,
            r.uapp_box
        )?;
    }
    Ok(())
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    // residual-based standard error of the slope
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let fit = my + slope * (x - mx);
            (y - fit) * (y - fit)
        })
        .sum();
    let dof = (xs.len().max(3) - 2) as f64;
    (slope, (sse / dof / sxx).sqrt())
}

// ---------------------------------------------------------------------------
// E1: estimate decay
// ---------------------------------------------------------------------------

/// Detailed output of the estimate-decay experiment.
pub struct EstimatesOutput {
    pub report: RunReport,
    /// Per-phantom fitted slope of `ln ‖(Δ_ρ+q)u_app‖_box` vs `ln s`
    /// with its standard error.
    pub slopes: Vec<(String, f64, f64)>,
    /// `max_s ‖u_app‖ / C₀` over `s ≥ 8`.
    pub uniform_bound_ratio: f64,
    /// Largest fraction of `|u_app|²` mass outside the `2δ` slab.
    pub support_leak: f64,
    pub rows: Vec<JobRow>,
}

/// E1: builds `u₀, u₁` per (phantom, plane, s), records the estimate
/// norms and residuals, and fits the decay slopes.
pub fn run_estimates(cfg: &Config, ctx: &RunContext) -> Result<EstimatesOutput> {
    cfg.validate()?;
    let t0 = Instant::now();
    let mut report = RunReport::new("estimates", cfg, ctx);
    let n = cfg.n;
    let dom = BallDomain::new(Vec3::ZERO, cfg.r_omega, cfg.l, n)?;
    let window = window_for(cfg)?;
    let sweep = adjusted_sweep(cfg, n)?;
    if sweep.is_empty() {
        return Err(Error::Config("no feasible s at this resolution".into()));
    }
    if sweep.len() < cfg.s_list.len() {
        report
            .warnings
            .push(format!("sweep restricted to {sweep:?} by the resolution guards"));
    }
    let phantoms: Vec<(String, Option<Phantom>)> = vec![
        ("zero".into(), None),
        (
            "centered_gaussian".into(),
            Some(Phantom {
                center: Vec3::ZERO,
                width: cfg.est_gauss_width,
                amp: cfg.phantom_amp,
                cut: (cfg.cut_inner, cfg.cut_outer),
            }),
        ),
        (
            "offset_gaussian".into(),
            Some(Phantom {
                center: cfg.est_offset_center,
                width: cfg.est_gauss_width,
                amp: cfg.phantom_amp,
                cut: (cfg.cut_inner, cfg.cut_outer),
            }),
        ),
    ];
    let dir = fibonacci_hemisphere(1)[0];
    let planes: Vec<(usize, Plane)> = cfg
        .est_offsets
        .iter()
        .enumerate()
        .map(|(i, &t)| Ok((i, Plane::from_normal_offset(dir, t, dom.center)?)))
        .collect::<Result<_>>()?;

    struct Job {
        phantom_idx: usize,
        plane_idx: usize,
        s: f64,
    }
    let mut jobs = Vec::new();
    for (pi, _) in phantoms.iter().enumerate() {
        for (gi, _) in planes.iter().enumerate() {
            for &s in &sweep {
                jobs.push(Job { phantom_idx: pi, plane_idx: gi, s });
            }
        }
    }
    // frame-resampled masters per (phantom, plane)
    let masters: Vec<Vec<Option<GridField>>> = phantoms
        .iter()
        .map(|(_, ph)| {
            planes
                .iter()
                .map(|(_, plane)| {
                    ph.as_ref().map(|ph| {
                        let m = ph.master(n, cfg.l);
                        resample_to_frame(&m, plane, dom.center, n, cfg.l)
                    })
                })
                .collect()
        })
        .collect();

    let c0 = window.c0();
    let results: Vec<Result<(JobRow, f64)>> = ctx.install(|| {
        jobs.par_iter()
            .map(|job| {
                let (_, plane) = &planes[job.plane_idx];
                let offset = plane.signed_offset(dom.center);
                let rho = RhoParam::new(frame_plane(offset), job.s, 1, cfg.beta, cfg.eps0)?;
                let q = masters[job.phantom_idx][job.plane_idx].as_ref();
                let opts = AssembleOptions {
                    window: window.clone(),
                    with_u2: false,
                    solve: SolveOptions::default(),
                    with_norms: true,
                };
                let sol = assemble_solution(q, &rho, offset, n, cfg.l, &dom, &opts)?;
                let u_app = sol.u_app();
                // support leak outside the 2δ slab
                let mut outside = 0.0f64;
                let mut total = 0.0f64;
                for iz in 0..n {
                    let z = crate::fields::grid_coord(iz, n, cfg.l);
                    let slab = iz * n * n;
                    let mass: f64 =
                        u_app.data[slab..slab + n * n].iter().map(|v| v.norm_sqr()).sum();
                    total += mass;
                    if (z - offset).abs() > 2.0 * sol.delta {
                        outside += mass;
                    }
                }
                let leak = if total > 0.0 { outside / total } else { 0.0 };
                let row = JobRow {
                    plane_id: format!("p{}_{}", job.plane_idx, phantoms[job.phantom_idx].0),
                    side: "q2",
                    s: job.s,
                    beta: cfg.beta,
                    eps0: cfg.eps0,
                    p_norm: sol.report.norms.p_norm,
                    dpp_norm: sol.report.norms.dpp_norm,
                    g_norm: sol.report.norms.g_norm,
                    residual_box: sol.report.residual_box,
                    residual_omega: sol.report.residual_omega,
                    u2_residual: f64::NAN,
                    u2_iters: 0,
                    uapp_box: norm_l2(&u_app, None),
                };
                Ok((row, leak))
            })
            .collect()
    })?;

    let mut rows = Vec::new();
    let mut support_leak = 0.0f64;
    for r in results {
        match r {
            Ok((row, leak)) => {
                support_leak = support_leak.max(leak);
                rows.push(row);
            }
            Err(e) => {
                report.failed_jobs.push(e.to_string());
                report.ok = false;
            }
        }
    }

    // slopes per phantom (center plane rows)
    let mut slopes = Vec::new();
    for (pi, (name, _)) in phantoms.iter().enumerate() {
        let id = format!("p0_{name}");
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.plane_id == id)
            .map(|r| (r.s.ln(), r.residual_box.ln()))
            .collect();
        if pts.len() >= 2 {
            let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
            let (slope, se) = least_squares_slope(&xs, &ys);
            report.put(&format!("slope_{name}"), slope);
            report.put(&format!("slope_se_{name}"), se);
            slopes.push((name.clone(), slope, se));
        }
        let _ = pi;
    }
    let uniform_bound_ratio = rows
        .iter()
        .filter(|r| r.s >= 8.0)
        .map(|r| r.uapp_box / c0)
        .fold(0.0f64, f64::max);
    report.put("uniform_bound_ratio", uniform_bound_ratio);
    report.put("support_leak", support_leak);
    report.put("c0", c0);
    report.put("rows", rows.len());

    std::fs::create_dir_all(&ctx.out_dir)?;
    let table = ctx.table_path("estimates_jobs.csv");
    write_job_rows(&table, &rows)?;
    report.tables.push(table.display().to_string());
    report.wall_seconds = t0.elapsed().as_secs_f64();
    report.write_manifest(&ctx.out_dir)?;
    Ok(EstimatesOutput {
        report,
        slopes,
        uniform_bound_ratio,
        support_leak,
        rows,
    })
}

// ---------------------------------------------------------------------------
// E2: boundary identity
// ---------------------------------------------------------------------------

/// One row of the identity experiment.
#[derive(Debug, Clone)]
pub struct IdentityRow {
    pub kind: &'static str,
    pub offset: f64,
    pub outcome: PairOutcome,
}

pub struct IdentityOutput {
    pub report: RunReport,
    pub rows: Vec<IdentityRow>,
}

/// E2: for each plane and sweep value, builds the opposite-growth pair
/// for `(q₁ = 0, q₂)`, measures `I` from boundary data, compares with
/// the in-frame plane-integral oracle, and verifies the patch-support
/// premise at the largest `s`.
pub fn run_identity(cfg: &Config, ctx: &RunContext) -> Result<IdentityOutput> {
    cfg.validate()?;
    let t0 = Instant::now();
    let mut report = RunReport::new("identity", cfg, ctx);
    let n = cfg.n;
    let dom = BallDomain::new(Vec3::ZERO, cfg.r_omega, cfg.l, n)?;
    let sweep = adjusted_sweep(cfg, n)?;
    if sweep.is_empty() {
        return Err(Error::Config("no feasible s at this resolution".into()));
    }
    if sweep.len() < cfg.s_list.len() {
        report
            .warnings
            .push(format!("sweep restricted to {sweep:?} by the resolution guards"));
    }
    let mut engine = PairEngine::new(cfg, n, cfg.solver_max_iters)?;
    engine.with_patch_check = true;

    let dir = fibonacci_hemisphere(1)[0];
    let q2 = Phantom {
        center: Vec3::ZERO,
        width: cfg.phantom_width,
        amp: cfg.phantom_amp,
        cut: (cfg.cut_inner, cfg.cut_outer),
    };
    let q2_master = q2.master(n, cfg.l);
    let q_off = Phantom { width: cfg.id_offsupport_width, ..q2 };
    let q_off_master = q_off.master(n, cfg.l);

    enum Kind {
        Main,
        Same,
        OffSupport,
    }
    struct Job {
        kind: Kind,
        offset: f64,
        s: f64,
    }
    let mut jobs = Vec::new();
    for &t in &cfg.id_offsets {
        for &s in &sweep {
            jobs.push(Job { kind: Kind::Main, offset: t, s });
        }
    }
    if cfg.id_run_same_potential {
        for &s in &sweep {
            jobs.push(Job { kind: Kind::Same, offset: cfg.id_offsets[0], s });
        }
    }
    if let Some(&smax) = sweep.last() {
        jobs.push(Job { kind: Kind::OffSupport, offset: cfg.id_offsupport_offset, s: smax });
    }

    // frame fields per (kind-master, offset): all planes share the
    // direction, so one resample per master serves every offset
    let plane0 = Plane::from_normal_offset(dir, 0.0, dom.center)?;
    let q2_frame = resample_to_frame(&q2_master, &plane0, dom.center, n, cfg.l);
    let q_off_frame = resample_to_frame(&q_off_master, &plane0, dom.center, n, cfg.l);

    let results: Vec<Result<IdentityRow>> = ctx.install(|| {
        jobs.par_iter()
            .map(|job| {
                let (kind, q1, q2f): (&'static str, Option<&GridField>, &GridField) =
                    match job.kind {
                        Kind::Main => ("main", None, &q2_frame),
                        Kind::Same => ("same", Some(&q2_frame), &q2_frame),
                        Kind::OffSupport => ("offsupport", None, &q_off_frame),
                    };
                let id = format!("{kind}_t{:+.3}", job.offset);
                let outcome = engine.run(&id, q1, q2f, job.s, job.offset)?;
                Ok(IdentityRow { kind, offset: job.offset, outcome })
            })
            .collect()
    })?;

    let mut rows = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => {
                report.failed_jobs.push(e.to_string());
                report.ok = false;
            }
        }
    }

    // tables
    std::fs::create_dir_all(&ctx.out_dir)?;
    let job_rows: Vec<JobRow> = rows
        .iter()
        .flat_map(|r| r.outcome.rows.iter().cloned())
        .collect();
    let jobs_table = ctx.table_path("identity_jobs.csv");
    write_job_rows(&jobs_table, &job_rows)?;
    let results_table = ctx.table_path("identity_results.csv");
    {
        let mut w = std::io::BufWriter::new(std::fs::File::create(&results_table)?);
        writeln!(
            w,
            "kind,offset,s,re_i_conj,im_i_conj,re_i_est,im_i_est,re_i_volume,im_i_volume,re_i_boundary,im_i_boundary,re_oracle,im_oracle,dc_a,scale,offpatch_ratio"
        )?;
        for r in &rows {
            let o = &r.outcome;
            let (br, bi) = o
                .i_boundary
                .map(|v| (format!("{}", v.re), format!("{}", v.im)))
                .unwrap_or_else(|| ("NaN".into(), "NaN".into()));
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.kind,
                r.offset,
                o.s,
                o.i_conj.re,
                o.i_conj.im,
                o.i_est.re,
                o.i_est.im,
                o.i_volume.re,
                o.i_volume.im,
                br,
                bi,
                o.oracle.re,
                o.oracle.im,
                o.dc_a,
                o.scale,
                o.offpatch_ratio.unwrap_or(f64::NAN)
            )?;
        }
    }
    report.tables.push(jobs_table.display().to_string());
    report.tables.push(results_table.display().to_string());

    // summary scalars (all traceable to identity_results.csv rows)
    let center_errors: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.kind == "main" && r.offset == cfg.id_offsets[0])
        .map(|r| {
            let o = &r.outcome;
            (o.s, (o.i_est - o.oracle).norm() / o.oracle.norm())
        })
        .collect();
    for (s, e) in &center_errors {
        report.put(&format!("center_err_s{s}"), *e);
    }
    if let Some((_, last)) = center_errors.last() {
        report.put("center_err_final", *last);
        let monotone = center_errors.windows(2).all(|w| w[1].1 < w[0].1);
        report.put("center_err_monotone", monotone);
    }
    let green_gap_max = rows
        .iter()
        .filter(|r| r.kind != "same")
        .filter_map(|r| {
            r.outcome.i_boundary.map(|b| {
                (b - r.outcome.i_volume).norm() / r.outcome.i_volume.norm().max(1e-300)
            })
        })
        .fold(0.0f64, f64::max);
    report.put("green_gap_max", green_gap_max);
    report.wall_seconds = t0.elapsed().as_secs_f64();
    report.write_manifest(&ctx.out_dir)?;
    Ok(IdentityOutput { report, rows })
}

// ---------------------------------------------------------------------------
// E3: reconstruction
// ---------------------------------------------------------------------------

pub struct ReconstructOutput {
    pub report: RunReport,
    pub direct_rel_l2: f64,
    pub boundary_rel_l2: f64,
    pub direct_peak_offset: f64,
    pub boundary_peak_offset: f64,
    pub grid_h: f64,
}

fn rel_l2_and_peak(
    rec: &GridField,
    truth: &GridField,
    dom: &BallDomain,
    peak_center: Vec3,
) -> (f64, f64) {
    let n = rec.n;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut peak = f64::NEG_INFINITY;
    let mut peak_at = Vec3::ZERO;
    for iz in 0..n {
        for iy in 0..n {
            for ix in 0..n {
                let p = rec.coords(ix, iy, iz);
                let i = rec.idx(ix, iy, iz);
                if p.sub(dom.center).norm() <= dom.r_omega {
                    num += (rec.data[i] - truth.data[i]).norm_sqr();
                    den += truth.data[i].norm_sqr();
                }
                if rec.data[i].re > peak {
                    peak = rec.data[i].re;
                    peak_at = p;
                }
            }
        }
    }
    ((num / den).sqrt(), peak_at.sub(peak_center).norm())
}

/// E3: direct-transform FBP of the phantom, and the end-to-end route
/// that measures every plane integral from boundary data of CGO pairs
/// (at the largest sweep value) before inverting.
pub fn run_reconstruct(cfg: &Config, ctx: &RunContext) -> Result<ReconstructOutput> {
    cfg.validate()?;
    let t0 = Instant::now();
    let mut report = RunReport::new("reconstruct", cfg, ctx);
    std::fs::create_dir_all(&ctx.out_dir)?;
    let dom = BallDomain::new(Vec3::ZERO, cfg.r_omega, cfg.l, cfg.n)?;
    let phantom = Phantom {
        center: Vec3::ZERO,
        width: cfg.rec_phantom_width,
        amp: cfg.phantom_amp,
        cut: (cfg.cut_inner, cfg.cut_outer),
    };
    let truth = phantom.master(cfg.n, cfg.l);

    // direct route at the main resolution
    let direct_planes = sample_planes(cfg.rec_direct_dirs, cfg.rec_direct_offsets, &dom)?;
    let direct_samples: Vec<PlaneSample> = ctx.install(|| {
        direct_planes
            .par_iter()
            .map(|plane| PlaneSample {
                plane: *plane,
                value: relative_plane_integral(&truth, plane, &dom),
            })
            .collect()
    })?;
    {
        let mut w = std::io::BufWriter::new(std::fs::File::create(
            ctx.table_path("reconstruct_direct_samples.csv"),
        )?);
        write_samples_csv(&mut w, &direct_samples, dom.center)?;
        report
            .tables
            .push(ctx.table_path("reconstruct_direct_samples.csv").display().to_string());
    }
    let rec_direct = radon_invert_fbp(&direct_samples, &dom, cfg.n, cfg.l, true)?;
    let (direct_rel, direct_peak) = rel_l2_and_peak(&rec_direct, &truth, &dom, phantom.center);
    {
        let mut f = std::fs::File::create(ctx.table_path("reconstruct_direct_field.bin"))?;
        rec_direct.dump(&mut f)?;
    }

    // boundary route at the reduced resolution
    let nb = cfg.rec_boundary_n;
    let domb = BallDomain::new(Vec3::ZERO, cfg.r_omega, cfg.l, nb)?;
    let sweep = adjusted_sweep(cfg, nb)?;
    let s_max = *sweep
        .last()
        .ok_or_else(|| Error::Config("no feasible s at the boundary-route resolution".into()))?;
    report.put("boundary_s", s_max);
    let master_b = phantom.master(nb, cfg.l);
    let mut engine = PairEngine::new(cfg, nb, cfg.rec_boundary_max_iters)?;
    engine.with_norms = false;
    engine.with_exponential = false;
    let dirs = fibonacci_hemisphere(cfg.rec_boundary_dirs);
    let offsets = offset_ladder(cfg.rec_boundary_offsets, cfg.r_omega)?;
    let per_dir: Vec<Result<Vec<PlaneSample>>> = ctx.install(|| {
        dirs.par_iter()
            .enumerate()
            .map(|(di, dirv)| {
                let plane0 = Plane::from_normal_offset(*dirv, 0.0, domb.center)?;
                let q2f = resample_to_frame(&master_b, &plane0, domb.center, nb, cfg.l);
                let mut out = Vec::with_capacity(offsets.len());
                for &t in &offsets {
                    let id = format!("d{di}_t{t:+.4}");
                    let o = engine.run(&id, None, &q2f, s_max, t)?;
                    out.push(PlaneSample {
                        plane: Plane::from_normal_offset(*dirv, t, domb.center)?,
                        value: o.i_est,
                    });
                }
                Ok(out)
            })
            .collect()
    })?;
    let mut boundary_samples = Vec::new();
    for r in per_dir {
        match r {
            Ok(mut v) => boundary_samples.append(&mut v),
            Err(e) => {
                report.failed_jobs.push(e.to_string());
                report.ok = false;
            }
        }
    }
    {
        let mut w = std::io::BufWriter::new(std::fs::File::create(
            ctx.table_path("reconstruct_boundary_samples.csv"),
        )?);
        write_samples_csv(&mut w, &boundary_samples, dom.center)?;
        report
            .tables
            .push(ctx.table_path("reconstruct_boundary_samples.csv").display().to_string());
    }
    let (boundary_rel, boundary_peak) = if report.ok {
        let rec_boundary = radon_invert_fbp(&boundary_samples, &dom, cfg.n, cfg.l, true)?;
        let mut f = std::fs::File::create(ctx.table_path("reconstruct_boundary_field.bin"))?;
        rec_boundary.dump(&mut f)?;
        rel_l2_and_peak(&rec_boundary, &truth, &dom, phantom.center)
    } else {
        (f64::NAN, f64::NAN)
    };

    let h = 2.0 * cfg.l / cfg.n as f64;
    report.put("direct_rel_l2", direct_rel);
    report.put("boundary_rel_l2", boundary_rel);
    report.put("direct_peak_offset", direct_peak);
    report.put("boundary_peak_offset", boundary_peak);
    report.put("grid_h", h);
    report.wall_seconds = t0.elapsed().as_secs_f64();
    report.write_manifest(&ctx.out_dir)?;
    Ok(ReconstructOutput {
        report,
        direct_rel_l2: direct_rel,
        boundary_rel_l2: boundary_rel,
        direct_peak_offset: direct_peak,
        boundary_peak_offset: boundary_peak,
        grid_h: h,
    })
}

// ---------------------------------------------------------------------------
// E4: localization
// ---------------------------------------------------------------------------

pub struct LocalizeOutput {
    pub report: RunReport,
    /// Max over candidate points of `|x| - c_radius` (Thm 2 mode).
    pub thm2_protrusion: f64,
    /// Certified tube depth (Thm 3 mode) and its closed-form target.
    pub thm3_depth: f64,
    pub thm3_expected: f64,
    pub out_h: f64,
}

/// E4: restricts the plane family to planes avoiding a convex ball (or
/// to planes with small boundary circles), measures `I` per plane from
/// boundary data, and feeds the values into support localization.
pub fn run_localize(cfg: &Config, ctx: &RunContext) -> Result<LocalizeOutput> {
    cfg.validate()?;
    let t0 = Instant::now();
    let mut report = RunReport::new("localize", cfg, ctx);
    std::fs::create_dir_all(&ctx.out_dir)?;
    let nb = cfg.loc_n;
    let domb = BallDomain::new(Vec3::ZERO, cfg.r_omega, cfg.l, nb)?;
    let sweep = adjusted_sweep(cfg, nb)?;
    let s_max = *sweep
        .last()
        .ok_or_else(|| Error::Config("no feasible s at the localization resolution".into()))?;
    report.put("s", s_max);
    let phantom = Phantom {
        center: Vec3::ZERO,
        width: cfg.loc_phantom_width,
        amp: cfg.phantom_amp,
        cut: (cfg.loc_cut_inner, cfg.loc_cut_outer),
    };
    let master = phantom.master(nb, cfg.l);
    let mut engine = PairEngine::new(cfg, nb, cfg.rec_boundary_max_iters)?;
    engine.with_norms = false;
    engine.with_exponential = false;

    let dirs = fibonacci_hemisphere(cfg.loc_dirs);
    let offsets = offset_ladder(cfg.loc_offsets, cfg.r_omega)?;
    // reference scale: the center plane cuts straight through the phantom
    let scale_pair = {
        let plane0 = Plane::from_normal_offset(dirs[0], 0.0, domb.center)?;
        let q2f = resample_to_frame(&master, &plane0, domb.center, nb, cfg.l);
        engine.run("scale", None, &q2f, s_max, 0.0)?
    };
    let i_scale = scale_pair.i_est.norm();
    report.put("i_scale", i_scale);
    let vanish_tol = cfg.loc_vanish_tol_factor * i_scale;
    report.put("vanish_tol", vanish_tol);

    // all planes avoiding the convex ball C (Thm 2 family); the Thm 3
    // family (small boundary circles) is the subset further out
    let thm3_min = (cfg.r_omega * cfg.r_omega - cfg.loc_thm3_r * cfg.loc_thm3_r).sqrt();
    let per_dir: Vec<Result<Vec<PlaneSample>>> = ctx.install(|| {
        dirs.par_iter()
            .enumerate()
            .map(|(di, dirv)| {
                let plane0 = Plane::from_normal_offset(*dirv, 0.0, domb.center)?;
                let q2f = resample_to_frame(&master, &plane0, domb.center, nb, cfg.l);
                let mut out = Vec::new();
                for &t in &offsets {
                    if t.abs() <= cfg.loc_c_radius {
                        continue;
                    }
                    let id = format!("d{di}_t{t:+.4}");
                    let o = engine.run(&id, None, &q2f, s_max, t)?;
                    out.push(PlaneSample {
                        plane: Plane::from_normal_offset(*dirv, t, domb.center)?,
                        value: o.i_est,
                    });
                }
                Ok(out)
            })
            .collect()
    })?;
    let mut samples = Vec::new();
    for r in per_dir {
        match r {
            Ok(mut v) => samples.append(&mut v),
            Err(e) => {
                report.failed_jobs.push(e.to_string());
                report.ok = false;
            }
        }
    }
    {
        let mut w = std::io::BufWriter::new(std::fs::File::create(
            ctx.table_path("localize_samples.csv"),
        )?);
        write_samples_csv(&mut w, &samples, domb.center)?;
        report.tables.push(ctx.table_path("localize_samples.csv").display().to_string());
    }

    // Thm 2 mode: all avoiders
    let region2 = support_localize(&samples, &domb, vanish_tol, cfg.loc_out_n, cfg.l);
    let out_h = 2.0 * cfg.l / cfg.loc_out_n as f64;
    let thm2_protrusion = region2
        .max_candidate_radius
        .map(|r| r - cfg.loc_c_radius)
        .unwrap_or(f64::NEG_INFINITY);
    let nonvanishing = samples.iter().filter(|s| s.value.norm() >= vanish_tol).count();
    report.put("thm2_protrusion", thm2_protrusion);
    report.put("thm2_nonvanishing_avoiders", nonvanishing);
    report.put("thm2_vanishing", region2.vanishing_planes);
    report.put("thm2_total", region2.total_planes);

    // Thm 3 mode: planes whose boundary circle has radius ≤ thm3_r
    let thm3_samples: Vec<PlaneSample> = samples
        .iter()
        .filter(|s| s.plane.signed_offset(domb.center).abs() >= thm3_min)
        .cloned()
        .collect();
    let region3 = support_localize(&thm3_samples, &domb, vanish_tol, cfg.loc_out_n, cfg.l);
    let thm3_depth = region3.certified_tube_depth(&domb);
    let thm3_expected = cap_depth(cfg.loc_thm3_r, cfg.r_omega)?;
    report.put("thm3_depth", thm3_depth);
    report.put("thm3_expected", thm3_expected);
    report.put("out_h", out_h);
    report.wall_seconds = t0.elapsed().as_secs_f64();
    report.write_manifest(&ctx.out_dir)?;
    Ok(LocalizeOutput {
        report,
        thm2_protrusion,
        thm3_depth,
        thm3_expected,
        out_h,
    })
}
