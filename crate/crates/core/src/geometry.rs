//! Ball domains, affine two-planes, boundary patches, and the convex
//! geometry of plane/sphere intersections.
//!
//! Everything here is exact closed-form geometry; the ball domain keeps
//! the intersection curves `γ_Π = Π ∩ ∂Ω` circles and cap depths in
//! closed form so downstream modules can be checked against them.

use crate::{Error, Result};

/// 3-vector of `f64` with just the operations the crate needs.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        let n = self.norm();
        Vec3::new(self.x / n, self.y / n, self.z / n)
    }

    pub fn scale(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }

    pub fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }

    /// Angle to another vector in radians, clamped against roundoff.
    pub fn angle_to(self, o: Vec3) -> f64 {
        let c = (self.dot(o) / (self.norm() * o.norm())).clamp(-1.0, 1.0);
        c.acos()
    }
}

/// Ball domain `Ω` of radius `r_omega` inside the periodic box `[-l, l)³`.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct BallDomain {
    pub center: Vec3,
    pub r_omega: f64,
    /// Box half-width.
    pub l: f64,
    /// Grid resolution per axis.
    pub n: usize,
}

impl BallDomain {
    pub fn new(center: Vec3, r_omega: f64, l: f64, n: usize) -> Result<Self> {
        if !(r_omega > 0.0) {
            return Err(Error::invalid("r_omega must be positive"));
        }
        if !(r_omega < l) {
            return Err(Error::invalid(format!(
                "ball must fit strictly inside the box: r_omega = {r_omega}, l = {l}"
            )));
        }
        if l < 2.0 * r_omega {
            return Err(Error::invalid(format!(
                "padding guard violated: need l >= 2*r_omega, got l = {l}, r_omega = {r_omega}"
            )));
        }
        if n < 32 || n % 2 != 0 {
            return Err(Error::invalid(format!("n must be even and >= 32, got {n}")));
        }
        Ok(BallDomain { center, r_omega, l, n })
    }

    /// Unit ball in the default acceptance box.
    pub fn unit(l: f64, n: usize) -> Result<Self> {
        BallDomain::new(Vec3::ZERO, 1.0, l, n)
    }

    /// Lattice spacing `h = 2l/n`.
    pub fn h(&self) -> f64 {
        2.0 * self.l / self.n as f64
    }

    pub fn contains(&self, p: Vec3) -> bool {
        p.sub(self.center).norm() <= self.r_omega
    }
}

/// Affine two-plane with an orthonormal in-plane frame.
///
/// The stored plane is `base_point + span{omega_r, omega_i}`; the base
/// point is normalized to the point of the plane closest to a reference
/// center so that equal planes have equal representations.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct Plane {
    pub omega_r: Vec3,
    pub omega_i: Vec3,
    pub base_point: Vec3,
}

impl Plane {
    /// Builds a plane from a (not necessarily unit) normal, a signed
    /// offset along it from `center`, and a deterministic in-plane frame.
    pub fn from_normal_offset(normal: Vec3, offset: f64, center: Vec3) -> Result<Self> {
        let nu = normal.normalized();
        if !nu.norm().is_finite() {
            return Err(Error::invalid("plane normal must be nonzero"));
        }
        // Pick the seed axis least aligned with the normal.
        let seed = if nu.z.abs() < 0.9 {
            Vec3::new(0.0, 0.0, 1.0)
        } else {
            Vec3::new(1.0, 0.0, 0.0)
        };
        let omega_r = seed.cross(nu).normalized();
        let omega_i = nu.cross(omega_r).normalized();
        Ok(Plane {
            omega_r,
            omega_i,
            base_point: center.add(nu.scale(offset)),
        })
    }

    /// Constructs a plane from an explicit orthonormal frame, normalizing
    /// the base point to the foot of the perpendicular from `center`.
    pub fn from_frame(omega_r: Vec3, omega_i: Vec3, point: Vec3, center: Vec3) -> Result<Self> {
        let r = omega_r.normalized();
        let i = omega_i.normalized();
        if r.dot(i).abs() > 1e-10 {
            return Err(Error::invalid("omega_r and omega_i must be orthogonal"));
        }
        let nu = r.cross(i);
        let d = nu.dot(point.sub(center));
        Ok(Plane {
            omega_r: r,
            omega_i: i,
            base_point: center.add(nu.scale(d)),
        })
    }

    /// Unit normal `ω_R × ω_I`.
    pub fn normal(&self) -> Vec3 {
        self.omega_r.cross(self.omega_i)
    }

    /// Signed offset of the plane from `center` along the normal.
    pub fn signed_offset(&self, center: Vec3) -> f64 {
        self.normal().dot(self.base_point.sub(center))
    }

    /// Distance from a point to the plane.
    pub fn distance_to(&self, p: Vec3) -> f64 {
        self.normal().dot(p.sub(self.base_point)).abs()
    }

    /// Frame coordinates `(y1, y2, y3)` of a point: in-plane components
    /// relative to the domain center plus the normal component.
    pub fn frame_coords(&self, p: Vec3, center: Vec3) -> Vec3 {
        let d = p.sub(center);
        Vec3::new(d.dot(self.omega_r), d.dot(self.omega_i), d.dot(self.normal()))
    }

    /// Inverse of [`Plane::frame_coords`].
    pub fn from_frame_coords(&self, y: Vec3, center: Vec3) -> Vec3 {
        center
            .add(self.omega_r.scale(y.x))
            .add(self.omega_i.scale(y.y))
            .add(self.normal().scale(y.z))
    }
}

/// Geodesic cap on the sphere `∂Ω`, given by its center direction and
/// angular radius. Angular radius `π` covers the whole boundary.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct SurfacePatch {
    pub center_direction: Vec3,
    pub angular_radius: f64,
}

impl SurfacePatch {
    pub fn new(center_direction: Vec3, angular_radius: f64) -> Result<Self> {
        if !(angular_radius > 0.0 && angular_radius <= std::f64::consts::PI) {
            return Err(Error::invalid(format!(
                "angular radius must lie in (0, pi], got {angular_radius}"
            )));
        }
        Ok(SurfacePatch {
            center_direction: center_direction.normalized(),
            angular_radius,
        })
    }

    /// Whether a boundary point (given as a direction from the domain
    /// center) lies strictly inside the patch.
    pub fn contains_direction(&self, dir: Vec3) -> bool {
        self.center_direction.angle_to(dir) < self.angular_radius
    }
}

/// The circle `γ_Π = Π ∩ ∂Ω`, when nonempty.
#[derive(Debug, Clone, Copy)]
pub struct GammaCircle {
    pub center: Vec3,
    pub radius: f64,
    /// In-plane frame of the parent plane; the circle is
    /// `center + radius (cos t ω_R + sin t ω_I)`.
    pub omega_r: Vec3,
    pub omega_i: Vec3,
}

impl GammaCircle {
    pub fn point_at(&self, t: f64) -> Vec3 {
        self.center
            .add(self.omega_r.scale(self.radius * t.cos()))
            .add(self.omega_i.scale(self.radius * t.sin()))
    }
}

/// Intersection circle of a plane with the sphere boundary, or `None`
/// when the plane misses or is tangent to the ball.
pub fn gamma_curve(plane: &Plane, dom: &BallDomain) -> Option<GammaCircle> {
    let d = plane.distance_to(dom.center);
    if d >= dom.r_omega {
        return None;
    }
    let foot = {
        let nu = plane.normal();
        let signed = nu.dot(plane.base_point.sub(dom.center));
        dom.center.add(nu.scale(signed))
    };
    Some(GammaCircle {
        center: foot,
        radius: (dom.r_omega * dom.r_omega - d * d).sqrt(),
        omega_r: plane.omega_r,
        omega_i: plane.omega_i,
    })
}

/// Smallest geodesic cap centered on the plane's normal-foot direction
/// that covers `γ_Π` with the given angular margin.
pub fn patch_containing_gamma(plane: &Plane, dom: &BallDomain, margin: f64) -> Result<SurfacePatch> {
    if !(margin > 0.0) {
        return Err(Error::invalid(format!("margin must be positive, got {margin}")));
    }
    if gamma_curve(plane, dom).is_none() {
        return Err(Error::PlaneMissesDomain(format!(
            "gamma curve empty: plane distance {} >= r_omega {}",
            plane.distance_to(dom.center),
            dom.r_omega
        )));
    }
    let signed = plane.signed_offset(dom.center);
    // For a plane through the center the foot direction degenerates;
    // the normal itself is then the canonical cap center.
    let center_dir = if signed.abs() < 1e-14 * dom.r_omega.max(1.0) {
        plane.normal()
    } else {
        plane.normal().scale(signed.signum())
    };
    // gamma sits at polar angle arccos(|d|/R) from the foot direction.
    let gamma_angle = (signed.abs() / dom.r_omega).clamp(0.0, 1.0).acos();
    let radius = (gamma_angle + margin).min(std::f64::consts::PI);
    SurfacePatch::new(center_dir, radius)
}

/// Deterministic Fibonacci-lattice directions on the upper hemisphere.
pub fn fibonacci_hemisphere(count: usize) -> Vec<Vec3> {
    let golden_angle = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
    (0..count)
        .map(|k| {
            let z = (k as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden_angle * k as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// Signed offsets equispaced in `(-r, r)`, odd count so 0 is included.
pub fn offset_ladder(count: usize, r: f64) -> Result<Vec<f64>> {
    if count == 0 || count % 2 == 0 {
        return Err(Error::invalid(format!(
            "offset count must be odd and positive, got {count}"
        )));
    }
    let half = (count as i64 - 1) / 2;
    let step = 2.0 * r / (count as f64 + 1.0);
    Ok((-half..=half).map(|j| j as f64 * step).collect())
}

/// Samples `dirs × offsets` planes: Fibonacci-lattice hemisphere normals
/// and equispaced signed offsets. Deterministic for fixed inputs.
pub fn sample_planes(dirs: usize, offsets: usize, dom: &BallDomain) -> Result<Vec<Plane>> {
    if dirs == 0 {
        return Err(Error::invalid("dirs must be >= 1"));
    }
    let normals = fibonacci_hemisphere(dirs);
    let ladder = offset_ladder(offsets, dom.r_omega)?;
    let mut planes = Vec::with_capacity(dirs * offsets);
    for nrm in &normals {
        for &t in &ladder {
            planes.push(Plane::from_normal_offset(*nrm, t, dom.center)?);
        }
    }
    Ok(planes)
}

/// Depth `R - sqrt(R² - r²)` to which a plane whose boundary circle has
/// radius `r` cuts a ball of radius `R`. Satisfies `cap_depth >= r²/(2R)`.
pub fn cap_depth(r: f64, big_r: f64) -> Result<f64> {
    if !(0.0..=big_r).contains(&r) {
        return Err(Error::Domain(format!("need 0 <= r <= R, got r = {r}, R = {big_r}")));
    }
    Ok(big_r - (big_r * big_r - r * r).sqrt())
}
