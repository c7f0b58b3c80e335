//! Complex scalar fields on the periodic box `[-L, L)³` and their
//! discrete Fourier transforms.
//!
//! Convention (fixed crate-wide): analysis kernel `exp(-i ξ·x)`,
//! synthesis kernel `exp(+i ξ·x)`, unitary normalization so that the
//! discrete Parseval identity `Σ|f|² h³ = Σ|f̂|² (π/L)³` holds exactly.
//! Frequencies live on the lattice `ξ = (π/L)·k`, `k ∈ {-N/2,…,N/2-1}³`,
//! stored in standard DFT order.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use once_cell::sync::OnceCell;
use rustfft::{Fft, FftPlanner};

use crate::geometry::{BallDomain, Vec3};
use crate::{Error, Result};

/// Complex scalar field sampled on the `N³` lattice over `[-L, L)³`,
/// stored row-major with x fastest: `idx = ix + N*(iy + N*iz)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub n: usize,
    pub l: f64,
    pub data: Vec<Complex64>,
}

/// Discrete Fourier coefficients of a [`GridField`], same shape, DFT
/// index order along each axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub n: usize,
    pub l: f64,
    pub data: Vec<Complex64>,
}

/// Grid coordinate along one axis: `x_i = -l + i·h`.
#[inline]
pub fn grid_coord(i: usize, n: usize, l: f64) -> f64 {
    -l + (2.0 * l / n as f64) * i as f64
}

/// Signed frequency index for DFT storage position `i`.
#[inline]
pub fn signed_index(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Frequency along one axis at storage position `i`: `ξ = (π/l)·k`.
#[inline]
pub fn freq_coord(i: usize, n: usize, l: f64) -> f64 {
    std::f64::consts::PI / l * signed_index(i, n) as f64
}

impl GridField {
    pub fn zeros(n: usize, l: f64) -> Self {
        GridField { n, l, data: vec![Complex64::new(0.0, 0.0); n * n * n] }
    }

    pub fn from_fn(n: usize, l: f64, mut f: impl FnMut(Vec3) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(n * n * n);
        for iz in 0..n {
            let z = grid_coord(iz, n, l);
            for iy in 0..n {
                let y = grid_coord(iy, n, l);
                for ix in 0..n {
                    let x = grid_coord(ix, n, l);
                    data.push(f(Vec3::new(x, y, z)));
                }
            }
        }
        GridField { n, l, data }
    }

    pub fn from_fn_real(n: usize, l: f64, mut f: impl FnMut(Vec3) -> f64) -> Self {
        Self::from_fn(n, l, |p| Complex64::new(f(p), 0.0))
    }

    #[inline]
    pub fn idx(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + self.n * (iy + self.n * iz)
    }

    #[inline]
    pub fn h(&self) -> f64 {
        2.0 * self.l / self.n as f64
    }

    pub fn coords(&self, ix: usize, iy: usize, iz: usize) -> Vec3 {
        Vec3::new(
            grid_coord(ix, self.n, self.l),
            grid_coord(iy, self.n, self.l),
            grid_coord(iz, self.n, self.l),
        )
    }

    pub fn same_grid(&self, o: &GridField) -> bool {
        self.n == o.n && self.l == o.l
    }

    pub fn assert_finite(&self) -> Result<()> {
        if self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            Ok(())
        } else {
            Err(Error::Guard("field contains non-finite values".into()))
        }
    }

    /// Pointwise product with another field, in place.
    pub fn mul_assign_field(&mut self, o: &GridField) {
        debug_assert!(self.same_grid(o));
        for (a, b) in self.data.iter_mut().zip(o.data.iter()) {
            *a *= *b;
        }
    }

    pub fn scaled(&self, s: Complex64) -> GridField {
        GridField { n: self.n, l: self.l, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, o: &GridField) -> GridField {
        debug_assert!(self.same_grid(o));
        GridField {
            n: self.n,
            l: self.l,
            data: self.data.iter().zip(o.data.iter()).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, o: &GridField) -> GridField {
        debug_assert!(self.same_grid(o));
        GridField {
            n: self.n,
            l: self.l,
            data: self.data.iter().zip(o.data.iter()).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Spectrum {
    pub fn zeros(n: usize, l: f64) -> Self {
        Spectrum { n, l, data: vec![Complex64::new(0.0, 0.0); n * n * n] }
    }

    #[inline]
    pub fn idx(&self, kx: usize, ky: usize, kz: usize) -> usize {
        kx + self.n * (ky + self.n * kz)
    }

    /// Frequency vector at storage position `(kx, ky, kz)`.
    pub fn freq(&self, kx: usize, ky: usize, kz: usize) -> Vec3 {
        Vec3::new(
            freq_coord(kx, self.n, self.l),
            freq_coord(ky, self.n, self.l),
            freq_coord(kz, self.n, self.l),
        )
    }
}

// ---------------------------------------------------------------------------
// FFT plumbing
// ---------------------------------------------------------------------------

type PlanKey = (usize, bool); // (len, inverse)
static PLAN_CACHE: OnceCell<Mutex<HashMap<PlanKey, Arc<dyn Fft<f64>>>>> = OnceCell::new();

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let cache = PLAN_CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap();
    map.entry((len, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(len)
            } else {
                planner.plan_fft_forward(len)
            }
        })
        .clone()
}

/// Unnormalized 3-D DFT in place (analysis kernel `exp(-2πi jk/N)` per axis).
pub fn dft3_forward(data: &mut [Complex64], n: usize) {
    dft3(data, n, false)
}

/// Unnormalized 3-D inverse DFT in place (kernel `exp(+2πi jk/N)`, no 1/N³).
pub fn dft3_inverse(data: &mut [Complex64], n: usize) {
    dft3(data, n, true)
}

fn dft3(data: &mut [Complex64], n: usize, inverse: bool) {
    assert_eq!(data.len(), n * n * n);
    let fft = plan(n, inverse);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    // axis 0: contiguous lines
    fft.process_with_scratch(data, &mut scratch);
    // axis 1: stride n, gather per (iz, ix) line
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for iz in 0..n {
        let slab = iz * n * n;
        for ix in 0..n {
            for iy in 0..n {
                line[iy] = data[slab + ix + n * iy];
            }
            fft.process_with_scratch(&mut line, &mut scratch);
            for iy in 0..n {
                data[slab + ix + n * iy] = line[iy];
            }
        }
    }
    // axis 2: stride n², gather per (iy, ix) line
    for iy in 0..n {
        let row = iy * n;
        for ix in 0..n {
            for iz in 0..n {
                line[iz] = data[ix + row + n * n * iz];
            }
            fft.process_with_scratch(&mut line, &mut scratch);
            for iz in 0..n {
                data[ix + row + n * n * iz] = line[iz];
            }
        }
    }
}

/// Applies a frequency multiplier in place: `f ← IDFT(m(ξ)·DFT(f))/N³`.
///
/// The multiplier closure receives the frequency vector; grid-origin
/// phases cancel, so none are applied.
pub fn apply_multiplier(f: &mut GridField, mut m: impl FnMut(Vec3) -> Complex64) {
    let n = f.n;
    let l = f.l;
    dft3_forward(&mut f.data, n);
    let inv_n3 = 1.0 / (n * n * n) as f64;
    let mut i = 0usize;
    for kz in 0..n {
        let fz = freq_coord(kz, n, l);
        for ky in 0..n {
            let fy = freq_coord(ky, n, l);
            for kx in 0..n {
                let fx = freq_coord(kx, n, l);
                f.data[i] *= m(Vec3::new(fx, fy, fz)) * inv_n3;
                i += 1;
            }
        }
    }
    dft3_inverse(&mut f.data, n);
}

// ---------------------------------------------------------------------------
// Transform pair
// ---------------------------------------------------------------------------

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Forward transform with unitary normalization and grid-origin phases:
/// `f̂(ξ_k) = (2π)^{-3/2} h³ Σ_x f(x) e^{-i ξ_k · x}`.
pub fn to_spectrum(f: &GridField) -> Spectrum {
    let n = f.n;
    let mut data = f.data.clone();
    dft3_forward(&mut data, n);
    let scale = f.h().powi(3) / TWO_PI.powf(1.5);
    let mut i = 0usize;
    for kz in 0..n {
        for ky in 0..n {
            for kx in 0..n {
                // e^{+iπ(kx+ky+kz)} from the x = -L grid origin
                let sign = if (kx + ky + kz) % 2 == 0 { 1.0 } else { -1.0 };
                data[i] *= sign * scale;
                i += 1;
            }
        }
    }
    Spectrum { n, l: f.l, data }
}

/// Inverse of [`to_spectrum`]; exact round trip.
pub fn to_field(spec: &Spectrum) -> GridField {
    let n = spec.n;
    let mut data = spec.data.clone();
    let dxi = std::f64::consts::PI / spec.l;
    let scale = dxi.powi(3) / TWO_PI.powf(1.5);
    let mut i = 0usize;
    for kz in 0..n {
        for ky in 0..n {
            for kx in 0..n {
                let sign = if (kx + ky + kz) % 2 == 0 { 1.0 } else { -1.0 };
                data[i] *= sign * scale;
                i += 1;
            }
        }
    }
    dft3_inverse(&mut data, n);
    GridField { n, l: spec.l, data }
}

// ---------------------------------------------------------------------------
// Norms and inner products
// ---------------------------------------------------------------------------

/// Masked Riemann-sum L² norm `sqrt(Σ_{x∈mask} |f(x)|² h³)`; the whole
/// box when `mask` is `None`.
pub fn norm_l2(f: &GridField, mask: Option<&BallDomain>) -> f64 {
    let h3 = f.h().powi(3);
    match mask {
        None => (f.data.iter().map(|v| v.norm_sqr()).sum::<f64>() * h3).sqrt(),
        Some(dom) => {
            let mut acc = 0.0;
            let r2 = dom.r_omega * dom.r_omega;
            let n = f.n;
            let mut i = 0usize;
            for iz in 0..n {
                let dz = grid_coord(iz, n, f.l) - dom.center.z;
                for iy in 0..n {
                    let dy = grid_coord(iy, n, f.l) - dom.center.y;
                    let planar = dz * dz + dy * dy;
                    for ix in 0..n {
                        let dx = grid_coord(ix, n, f.l) - dom.center.x;
                        if planar + dx * dx <= r2 {
                            acc += f.data[i].norm_sqr();
                        }
                        i += 1;
                    }
                }
            }
            (acc * h3).sqrt()
        }
    }
}

/// Masked sesquilinear pairing `Σ f·conj(g)·h³`.
pub fn inner(f: &GridField, g: &GridField, mask: Option<&BallDomain>) -> Result<Complex64> {
    if !f.same_grid(g) {
        return Err(Error::GridMismatch(format!(
            "inner: ({}, {}) vs ({}, {})",
            f.n, f.l, g.n, g.l
        )));
    }
    let h3 = f.h().powi(3);
    let mut acc = Complex64::new(0.0, 0.0);
    match mask {
        None => {
            for (a, b) in f.data.iter().zip(g.data.iter()) {
                acc += a * b.conj();
            }
        }
        Some(dom) => {
            let r2 = dom.r_omega * dom.r_omega;
            let n = f.n;
            let mut i = 0usize;
            for iz in 0..n {
                let dz = grid_coord(iz, n, f.l) - dom.center.z;
                for iy in 0..n {
                    let dy = grid_coord(iy, n, f.l) - dom.center.y;
                    let planar = dz * dz + dy * dy;
                    for ix in 0..n {
                        let dx = grid_coord(ix, n, f.l) - dom.center.x;
                        if planar + dx * dx <= r2 {
                            acc += f.data[i] * g.data[i].conj();
                        }
                        i += 1;
                    }
                }
            }
        }
    }
    Ok(acc * h3)
}

/// Spectral partial derivative `∂^{mi}` for a multi-index with `|mi| ≤ 2`.
pub fn spectral_derivative(f: &GridField, multi_index: [usize; 3]) -> Result<GridField> {
    let order: usize = multi_index.iter().sum();
    if order > 2 {
        return Err(Error::invalid(format!(
            "spectral_derivative supports |multi_index| <= 2, got {multi_index:?}"
        )));
    }
    let mut out = f.clone();
    apply_multiplier(&mut out, |xi| {
        let mut m = Complex64::new(1.0, 0.0);
        for (p, c) in [(multi_index[0], xi.x), (multi_index[1], xi.y), (multi_index[2], xi.z)] {
            for _ in 0..p {
                m *= Complex64::new(0.0, c);
            }
        }
        m
    });
    Ok(out)
}

/// Laplacian via the `-|ξ|²` multiplier.
pub fn laplacian(f: &GridField) -> GridField {
    let mut out = f.clone();
    apply_multiplier(&mut out, |xi| Complex64::new(-xi.dot(xi), 0.0));
    out
}

/// `|D''|`: multiplication by `|ξ_z|` (the transverse frequency in the
/// plane-adapted frame).
pub fn apply_abs_dpp(f: &GridField) -> GridField {
    let mut out = f.clone();
    apply_multiplier(&mut out, |xi| Complex64::new(xi.z.abs(), 0.0));
    out
}

// ---------------------------------------------------------------------------
// Dump format
// ---------------------------------------------------------------------------

#[derive(serde::Serialize, serde::Deserialize)]
struct DumpHeader {
    n: usize,
    #[serde(rename = "N")]
    res: usize,
    #[serde(rename = "L")]
    l: f64,
    kind: String,
}

fn write_dump<W: Write>(w: &mut W, n: usize, l: f64, kind: &str, data: &[Complex64]) -> Result<()> {
    let header = DumpHeader { n: 3, res: n, l, kind: kind.to_string() };
    let mut line = serde_json::to_string(&header).map_err(|e| Error::Format(e.to_string()))?;
    line.push('\n');
    w.write_all(line.as_bytes())?;
    let mut buf = Vec::with_capacity(data.len() * 16);
    for v in data {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_dump<R: Read>(r: &mut R, expect_kind: &str) -> Result<(usize, f64, Vec<Complex64>)> {
    let mut header_bytes = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        r.read_exact(&mut byte)?;
        if byte[0] == b'\n' {
            break;
        }
        header_bytes.push(byte[0]);
        if header_bytes.len() > 4096 {
            return Err(Error::Format("dump header exceeds 4096 bytes".into()));
        }
    }
    let header: DumpHeader = serde_json::from_slice(&header_bytes)
        .map_err(|e| Error::Format(format!("bad dump header: {e}")))?;
    if header.kind != expect_kind {
        return Err(Error::Format(format!(
            "dump kind mismatch: expected {expect_kind}, got {}",
            header.kind
        )));
    }
    let count = header.res * header.res * header.res;
    let mut raw = vec![0u8; count * 16];
    r.read_exact(&mut raw)?;
    let mut data = Vec::with_capacity(count);
    for chunk in raw.chunks_exact(16) {
        let re = f64::from_le_bytes(chunk[0..8].try_into().unwrap());
        let im = f64::from_le_bytes(chunk[8..16].try_into().unwrap());
        data.push(Complex64::new(re, im));
    }
    Ok((header.res, header.l, data))
}

impl GridField {
    /// Writes the field dump: one UTF-8 JSON header line then
    /// little-endian interleaved `(re, im)` doubles, x fastest.
    pub fn dump<W: Write>(&self, w: &mut W) -> Result<()> {
        write_dump(w, self.n, self.l, "grid", &self.data)
    }

    pub fn load<R: Read>(r: &mut R) -> Result<GridField> {
        let (n, l, data) = read_dump(r, "grid")?;
        Ok(GridField { n, l, data })
    }
}

impl Spectrum {
    pub fn dump<W: Write>(&self, w: &mut W) -> Result<()> {
        write_dump(w, self.n, self.l, "spectrum", &self.data)
    }

    pub fn load<R: Read>(r: &mut R) -> Result<Spectrum> {
        let (n, l, data) = read_dump(r, "spectrum")?;
        Ok(Spectrum { n, l, data })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    const N: usize = 32;
    const L: f64 = 2.5;

    fn random_field(seed: u64) -> GridField {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut f = GridField::zeros(N, L);
        for v in f.data.iter_mut() {
            *v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        f
    }

    fn lattice_mode(n: usize, l: f64, k: [i64; 3]) -> GridField {
        let xi = Vec3::new(
            std::f64::consts::PI / l * k[0] as f64,
            std::f64::consts::PI / l * k[1] as f64,
            std::f64::consts::PI / l * k[2] as f64,
        );
        GridField::from_fn(n, l, |p| Complex64::new(0.0, xi.dot(p)).exp())
    }

    #[test]
    fn constant_field_is_dc_mode() {
        let f = GridField::from_fn(N, L, |_| Complex64::new(1.5, -0.5));
        let s = to_spectrum(&f);
        for kz in 0..N {
            for ky in 0..N {
                for kx in 0..N {
                    let v = s.data[s.idx(kx, ky, kz)];
                    if (kx, ky, kz) == (0, 0, 0) {
                        assert!(v.norm() > 1.0);
                    } else {
                        assert!(v.norm() < 1e-10, "leak at ({kx},{ky},{kz}): {v}");
                    }
                }
            }
        }
    }

    #[test]
    fn pure_mode_lands_at_its_frequency() {
        let k = [3i64, -5, 7];
        let f = lattice_mode(N, L, k);
        let s = to_spectrum(&f);
        let pos = |kk: i64| if kk >= 0 { kk as usize } else { (kk + N as i64) as usize };
        let at = s.idx(pos(k[0]), pos(k[1]), pos(k[2]));
        let peak = s.data[at];
        assert!(peak.re > 0.0 && peak.im.abs() < 1e-9 * peak.re, "peak not real positive: {peak}");
        let total: f64 = s.data.iter().map(|v| v.norm_sqr()).sum();
        assert!((peak.norm_sqr() / total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn round_trip_identity() {
        let f = random_field(1);
        let g = to_field(&to_spectrum(&f));
        let max_err = f
            .data
            .iter()
            .zip(g.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        let max_abs = f.data.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
        assert!(max_err <= 1e-12 * max_abs, "round trip error {max_err}");
    }

    #[test]
    fn parseval_identity() {
        for seed in 0..20 {
            let f = random_field(seed);
            let s = to_spectrum(&f);
            let h3 = f.h().powi(3);
            let dxi3 = (std::f64::consts::PI / L).powi(3);
            let a: f64 = f.data.iter().map(|v| v.norm_sqr()).sum::<f64>() * h3;
            let b: f64 = s.data.iter().map(|v| v.norm_sqr()).sum::<f64>() * dxi3;
            assert!((a - b).abs() <= 1e-10 * a, "parseval gap {}", (a - b).abs());
        }
    }

    #[test]
    fn norm_of_zero_and_ball_mask() {
        let f = GridField::zeros(64, L);
        assert_eq!(norm_l2(&f, None), 0.0);
        let ones = GridField::from_fn(64, L, |_| Complex64::new(1.0, 0.0));
        let dom = BallDomain::unit(L, 64).unwrap();
        let v = norm_l2(&ones, Some(&dom));
        let expected = (4.0 * std::f64::consts::PI / 3.0).sqrt();
        assert!(
            (v - expected).abs() <= 2.0 * ones.h(),
            "ball norm {v} vs sqrt(4π/3) = {expected}"
        );
    }

    #[test]
    fn gaussian_norm_closed_form() {
        let f = GridField::from_fn_real(64, L, |p| (-p.dot(p)).exp());
        let v = norm_l2(&f, None);
        let expected = (std::f64::consts::PI / 2.0).powf(0.75);
        assert!((v - expected).abs() <= 1e-3, "gaussian norm {v} vs {expected}");
    }

    #[test]
    fn inner_definition_and_symmetry() {
        let f = random_field(2);
        let g = random_field(3);
        let n2 = norm_l2(&f, None);
        let ff = inner(&f, &f, None).unwrap();
        assert!((ff.re - n2 * n2).abs() <= 1e-12 * n2 * n2);
        assert!(ff.im.abs() <= 1e-12 * n2 * n2);
        let fg = inner(&f, &g, None).unwrap();
        let gf = inner(&g, &f, None).unwrap();
        assert!((fg - gf.conj()).norm() <= 1e-12 * fg.norm());
    }

    #[test]
    fn inner_orthogonal_modes() {
        let f = lattice_mode(N, L, [1, 0, 0]);
        let g = lattice_mode(N, L, [0, 2, 0]);
        let v = inner(&f, &g, None).unwrap();
        assert!(v.norm() <= 1e-12 * norm_l2(&f, None) * norm_l2(&g, None));
    }

    #[test]
    fn inner_rejects_grid_mismatch() {
        let f = GridField::zeros(N, L);
        let g = GridField::zeros(N, 2.0);
        assert!(inner(&f, &g, None).is_err());
    }

    #[test]
    fn derivative_of_constant_and_mode() {
        let c = GridField::from_fn(N, L, |_| Complex64::new(2.0, 1.0));
        let d = spectral_derivative(&c, [1, 0, 0]).unwrap();
        assert!(norm_l2(&d, None) < 1e-12);

        let k = [2i64, 0, -3];
        let f = lattice_mode(N, L, k);
        let d1 = spectral_derivative(&f, [1, 0, 0]).unwrap();
        let xi1 = std::f64::consts::PI / L * k[0] as f64;
        let expected = f.scaled(Complex64::new(0.0, xi1));
        let err = d1
            .data
            .iter()
            .zip(expected.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-10);
    }

    #[test]
    fn derivative_rejects_high_order() {
        let f = GridField::zeros(N, L);
        assert!(spectral_derivative(&f, [2, 1, 0]).is_err());
    }

    #[test]
    fn laplacian_of_gaussian_matches_closed_form() {
        // exp(-2|x|²): images at distance 2L contribute ~e^{-50}
        let n = 64;
        let f = GridField::from_fn_real(n, L, |p| (-2.0 * p.dot(p)).exp());
        let lap = laplacian(&f);
        let mut max_err = 0.0f64;
        let mut max_ref = 0.0f64;
        for iz in 0..n {
            for iy in 0..n {
                for ix in 0..n {
                    let p = f.coords(ix, iy, iz);
                    if p.x.abs() > 1.0 || p.y.abs() > 1.0 || p.z.abs() > 1.0 {
                        continue;
                    }
                    let r2 = p.dot(p);
                    let exact = (16.0 * r2 - 12.0) * (-2.0 * r2).exp();
                    let got = lap.data[lap.idx(ix, iy, iz)];
                    max_err = max_err.max((got - Complex64::new(exact, 0.0)).norm());
                    max_ref = max_ref.max(exact.abs());
                }
            }
        }
        assert!(max_err <= 1e-6 * max_ref, "laplacian rel error {}", max_err / max_ref);
    }

    #[test]
    fn linearity_under_random_combinations() {
        let f = random_field(5);
        let g = random_field(6);
        let a = Complex64::new(0.7, -1.3);
        let b = Complex64::new(-0.2, 0.4);
        let combo = f.scaled(a).add(&g.scaled(b));
        let lhs = to_spectrum(&combo);
        let rhs_f = to_spectrum(&f);
        let rhs_g = to_spectrum(&g);
        let mut max_err = 0.0f64;
        for i in 0..lhs.data.len() {
            let rhs = rhs_f.data[i] * a + rhs_g.data[i] * b;
            max_err = max_err.max((lhs.data[i] - rhs).norm());
        }
        let scale = lhs.data.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
        assert!(max_err <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn dump_round_trip_bit_exact() {
        let f = random_field(9);
        let mut buf = Vec::new();
        f.dump(&mut buf).unwrap();
        let g = GridField::load(&mut buf.as_slice()).unwrap();
        assert_eq!(f, g);
        let s = to_spectrum(&f);
        let mut buf2 = Vec::new();
        s.dump(&mut buf2).unwrap();
        let s2 = Spectrum::load(&mut buf2.as_slice()).unwrap();
        assert_eq!(s, s2);
        // kind mismatch rejected
        assert!(GridField::load(&mut buf2.as_slice()).is_err());
    }
}
