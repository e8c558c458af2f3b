//! Six degree-of-freedom aquatic drone.
//!
//! State order: `[v1 v2 v3 w1 w2 w3 px py pz phi theta psi]`. Body velocities
//! are expressed in a forward-starboard-down frame, positions in a z-down
//! Earth frame, so `pz` is the depth of the hull reference point below the
//! waterline (the draft).

use serde::{Deserialize, Serialize};

use super::{rk4_step, DynamicsError, ThrustCommand};
use crate::angle::wrap;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoatState {
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub px: f64,
    pub py: f64,
    pub pz: f64,
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
}

impl BoatState {
    pub const DIM: usize = 12;

    pub fn as_array(&self) -> [f64; 12] {
        [
            self.v1, self.v2, self.v3, self.w1, self.w2, self.w3, self.px, self.py, self.pz,
            self.phi, self.theta, self.psi,
        ]
    }

    /// Builds a state from raw components without wrapping.
    pub fn from_array(a: [f64; 12]) -> Self {
        Self {
            v1: a[0],
            v2: a[1],
            v3: a[2],
            w1: a[3],
            w2: a[4],
            w3: a[5],
            px: a[6],
            py: a[7],
            pz: a[8],
            phi: a[9],
            theta: a[10],
            psi: a[11],
        }
    }

    /// Level boat at rest at the given draft.
    pub fn at_rest(px: f64, py: f64, pz: f64, psi: f64) -> Self {
        Self { px, py, pz, psi: wrap(psi), ..Self::default() }
    }

    pub fn wrapped(mut self) -> Self {
        self.phi = wrap(self.phi);
        self.theta = wrap(self.theta);
        self.psi = wrap(self.psi);
        self
    }

    /// Reflection through the vertical x-z plane (port/starboard swap).
    pub fn mirrored(&self) -> Self {
        Self {
            v2: -self.v2,
            w1: -self.w1,
            w3: -self.w3,
            py: -self.py,
            phi: -self.phi,
            psi: -self.psi,
            ..*self
        }
    }

    pub fn position(&self) -> [f64; 3] {
        [self.px, self.py, self.pz]
    }

    pub fn validate(&self, theta_max: f64) -> Result<(), DynamicsError> {
        if !self.as_array().iter().all(|v| v.is_finite()) {
            return Err(DynamicsError::InvalidState(format!("non-finite boat state {self:?}")));
        }
        if self.theta.abs() >= theta_max {
            return Err(DynamicsError::Singularity { theta: self.theta, limit: theta_max });
        }
        Ok(())
    }
}

/// Hydrodynamic and mass properties.
///
/// The drag and coupling coefficients are configuration inputs; the defaults
/// describe a small (15 kg, 0.6 m motor spacing) catamaran-style drone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoatParams {
    /// Mass, kg.
    pub m: f64,
    pub g_grav: f64,
    /// Water density, kg/m^3.
    pub rho: f64,
    pub a_x: f64,
    pub a_y: f64,
    pub a_z: f64,
    pub i_x: f64,
    pub i_y: f64,
    pub i_z: f64,
    pub c_fx: f64,
    pub c_fy: f64,
    pub c_fz: f64,
    pub c_mx: f64,
    pub c_my: f64,
    pub c_mz: f64,
    /// Buoyancy coefficient.
    pub c_b: f64,
    /// Roll righting-arm gain, `C_k(phi) = k_phi * phi`.
    pub k_phi: f64,
    /// Pitch righting-arm gain, `C_m(theta) = k_theta * theta`.
    pub k_theta: f64,
    pub c1: f64,
    pub c2: f64,
    pub c5: f64,
    pub c6: f64,
    pub c8: f64,
    /// Distance between the two motors, m.
    pub d_motor: f64,
    /// Waterline area of the box hull, m^2.
    pub a_wl: f64,
    /// Draft at which the hull is fully submerged, m.
    pub draft_max: f64,
    /// Euler pitch guard, rad.
    pub theta_max: f64,
}

impl Default for BoatParams {
    fn default() -> Self {
        Self {
            m: 15.0,
            g_grav: 9.81,
            rho: 1000.0,
            a_x: 0.05,
            a_y: 0.15,
            a_z: 0.6,
            i_x: 0.5,
            i_y: 1.0,
            i_z: 1.0,
            c_fx: 0.4,
            c_fy: 1.0,
            c_fz: 1.0,
            c_mx: 0.02,
            c_my: 0.02,
            c_mz: 0.01,
            c_b: 1.0,
            k_phi: 0.05,
            k_theta: 0.05,
            // c1 multiplies w2^2 in the roll equation, which is even under a
            // port/starboard reflection; a laterally symmetric hull has c1 = 0.
            c1: 0.0,
            c2: 0.05,
            c5: 0.02,
            c6: 0.02,
            c8: 0.05,
            d_motor: 0.6,
            a_wl: 0.3,
            draft_max: 0.25,
            theta_max: 1.48,
        }
    }
}

impl BoatParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let positive = [
            ("m", self.m),
            ("rho", self.rho),
            ("a_x", self.a_x),
            ("a_y", self.a_y),
            ("a_z", self.a_z),
            ("i_x", self.i_x),
            ("i_y", self.i_y),
            ("i_z", self.i_z),
            ("d_motor", self.d_motor),
            ("a_wl", self.a_wl),
            ("draft_max", self.draft_max),
            ("theta_max", self.theta_max),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(DynamicsError::InvalidParams(format!("{name} must be > 0, got {v}")));
            }
        }
        let non_negative = [
            ("c_fx", self.c_fx),
            ("c_fy", self.c_fy),
            ("c_fz", self.c_fz),
            ("c_mx", self.c_mx),
            ("c_my", self.c_my),
            ("c_mz", self.c_mz),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(DynamicsError::InvalidParams(format!("{name} must be >= 0, got {v}")));
            }
        }
        let finite = [
            ("g_grav", self.g_grav),
            ("c_b", self.c_b),
            ("k_phi", self.k_phi),
            ("k_theta", self.k_theta),
            ("c1", self.c1),
            ("c2", self.c2),
            ("c5", self.c5),
            ("c6", self.c6),
            ("c8", self.c8),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(DynamicsError::InvalidParams(format!("{name} must be finite")));
            }
        }
        if self.theta_max >= std::f64::consts::FRAC_PI_2 {
            return Err(DynamicsError::InvalidParams("theta_max must be below pi/2".into()));
        }
        Ok(())
    }

    /// Submerged volume of the box hull at draft `pz`.
    pub fn submerged_volume(&self, pz: f64) -> f64 {
        self.a_wl * pz.clamp(0.0, self.draft_max)
    }

    pub fn buoyancy(&self, pz: f64) -> f64 {
        self.rho * self.g_grav * self.submerged_volume(pz) * self.c_b
    }
}

/// Generalized forces `(X, Y, Z)` in N and moments `(K, M, N)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ForceMoment {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub k: f64,
    pub m: f64,
    pub n: f64,
}

/// Body-to-Earth rotation for ZYX Euler angles.
pub fn rotation_body_to_earth(phi: f64, theta: f64, psi: f64) -> [[f64; 3]; 3] {
    let (sf, cf) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = psi.sin_cos();
    [
        [cp * ct, cp * st * sf - sp * cf, cp * st * cf + sp * sf],
        [sp * ct, sp * st * sf + cp * cf, sp * st * cf - cp * sf],
        [-st, ct * sf, ct * cf],
    ]
}

/// Position and Euler-angle rates `(px', py', pz', phi', theta', psi')`.
///
/// Standard ZYX navigation equations written with the abbreviations
/// `a..f` (the off-diagonal rotation entries); the surge and yaw-rate terms
/// form the input columns, the remaining velocities the drift.
pub fn boat_kinematic_derivative(
    s: &BoatState,
    theta_max: f64,
) -> Result<[f64; 6], DynamicsError> {
    s.validate(theta_max)?;
    let (sf, cf) = s.phi.sin_cos();
    let (st, ct) = s.theta.sin_cos();
    let (sp, cp) = s.psi.sin_cos();
    let tt = st / ct;

    let a = cp * st * sf - sp * cf;
    let b = cp * st * cf + sp * sf;
    let c = sp * st * sf + cp * cf;
    let d = sp * st * cf - cp * sf;
    let e = ct * sf;
    let f = ct * cf;

    // drift f(x)
    let drift = [
        s.v2 * a + s.v3 * b,
        s.v2 * c + s.v3 * d,
        s.v2 * e + s.v3 * f,
        s.w1 + s.w2 * tt * sf,
        s.w2 * cf,
        s.w2 * sf / ct,
    ];
    // input columns g(x) applied to (v1, w3)
    let g_v = [cp * ct, sp * ct, -st, 0.0, 0.0, 0.0];
    let g_w = [0.0, 0.0, 0.0, tt * cf, -sf, cf / ct];

    let mut out = [0.0; 6];
    for i in 0..6 {
        out[i] = drift[i] + g_v[i] * s.v1 + g_w[i] * s.w3;
    }
    Ok(out)
}

fn signed_square(v: f64) -> f64 {
    v * v.abs()
}

/// Thrust, hydrodynamic drag, buoyancy and righting moments.
///
/// Drag terms use `v|v|` so they always oppose motion. Buoyancy acts
/// upward, i.e. along negative body z in the z-down frame.
pub fn boat_forces(s: &BoatState, u: &ThrustCommand, p: &BoatParams) -> ForceMoment {
    let half_rho = 0.5 * p.rho;
    let f_x = half_rho * signed_square(s.v1) * p.c_fx * p.a_x;
    let f_y = half_rho * signed_square(s.v2) * p.c_fy * p.a_y;
    let f_z = half_rho * signed_square(s.v3) * p.c_fz * p.a_z;
    let m_x = half_rho * signed_square(s.w1) * p.c_mx * p.i_x;
    let m_y = half_rho * signed_square(s.w2) * p.c_my * p.i_y;
    let m_z = half_rho * signed_square(s.w3) * p.c_mz * p.i_z;
    let f_b = p.buoyancy(s.pz);

    ForceMoment {
        x: (u.right + u.left) - f_x,
        y: -f_y,
        z: -f_b - f_z,
        k: -m_x - p.k_phi * s.phi * f_b,
        m: -m_y - p.k_theta * s.theta * f_b,
        n: 0.5 * (u.right - u.left) * p.d_motor - m_z,
    }
}

/// Body-frame accelerations `(v1', v2', v3', w1', w2', w3')`.
///
/// Translational rows are divided by the mass; the moment rows enter the
/// angular accelerations directly.
pub fn boat_dynamic_derivative(
    s: &BoatState,
    u: &ThrustCommand,
    p: &BoatParams,
) -> Result<[f64; 6], DynamicsError> {
    s.validate(p.theta_max)?;
    let g = p.g_grav;
    let (sf, cf) = s.phi.sin_cos();
    let (st, ct) = s.theta.sin_cos();
    let fm = boat_forces(s, u, p);

    Ok([
        -s.w2 * s.v3 + s.w3 * s.v2 - g * st + fm.x / p.m,
        -s.w3 * s.v1 + s.w1 * s.v3 + g * sf * ct + fm.y / p.m,
        -s.w1 * s.v2 + s.w2 * s.v1 + g * cf * ct + fm.z / p.m,
        (p.c1 * s.w2 + p.c2 * s.w1) * s.w2 + fm.k,
        p.c5 * s.w1 * s.w3 - p.c6 * (s.w1 * s.w1 - s.w3 * s.w3) + fm.m,
        (p.c8 * s.w1 - p.c2 * s.w3) * s.w2 + fm.n,
    ])
}

/// Full 12-component derivative, with an optional Earth-frame drift added
/// to the horizontal position rates.
pub fn boat_derivative(
    s: &BoatState,
    u: &ThrustCommand,
    p: &BoatParams,
    drift: [f64; 2],
) -> Result<[f64; 12], DynamicsError> {
    let dyn_part = boat_dynamic_derivative(s, u, p)?;
    let kin = boat_kinematic_derivative(s, p.theta_max)?;
    let mut out = [0.0; 12];
    out[..6].copy_from_slice(&dyn_part);
    out[6..].copy_from_slice(&kin);
    out[6] += drift[0];
    out[7] += drift[1];
    Ok(out)
}

pub fn step_boat(
    s: &BoatState,
    u: &ThrustCommand,
    p: &BoatParams,
    drift: [f64; 2],
    dt: f64,
) -> Result<BoatState, DynamicsError> {
    let next = rk4_step(
        |x: &[f64; 12]| boat_derivative(&BoatState::from_array(*x), u, p, drift),
        &s.as_array(),
        dt,
    )?;
    let next = BoatState::from_array(next).wrapped();
    next.validate(p.theta_max)?;
    Ok(next)
}

/// Draft at which buoyancy balances weight for a level hull, by bisection on
/// `F_b(z) = m g`. Returns `None` if even the fully submerged hull sinks.
pub fn buoyancy_equilibrium_draft(p: &BoatParams) -> Option<f64> {
    let weight = p.m * p.g_grav;
    if p.buoyancy(p.draft_max) < weight {
        return None;
    }
    let (mut lo, mut hi) = (0.0, p.draft_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if p.buoyancy(mid) < weight {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(rng: &mut ChaCha8Rng) -> BoatState {
        let mut a = [0.0; 12];
        for v in a.iter_mut().take(9) {
            *v = rng.random_range(-2.0..2.0);
        }
        a[9] = rng.random_range(-0.8..0.8);
        a[10] = rng.random_range(-0.8..0.8);
        a[11] = rng.random_range(-3.0..3.0);
        BoatState::from_array(a)
    }

    #[test]
    fn kinematics_at_rest_and_in_surge() {
        let p = BoatParams::default();
        let rest = BoatState::default();
        assert_eq!(boat_kinematic_derivative(&rest, p.theta_max).unwrap(), [0.0; 6]);
        let surge = BoatState { v1: 1.0, ..Default::default() };
        assert_eq!(
            boat_kinematic_derivative(&surge, p.theta_max).unwrap(),
            [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn singularity_guard() {
        let s = BoatState { theta: 1.5, ..Default::default() };
        assert!(matches!(
            boat_kinematic_derivative(&s, 1.48),
            Err(DynamicsError::Singularity { .. })
        ));
        assert!(boat_dynamic_derivative(&s, &ThrustCommand::default(), &BoatParams::default())
            .is_err());
    }

    // Oracle: position rates from an explicit R_z R_y R_x product, Euler
    // rates by central differences of a body-rate rotation propagated with
    // Rodrigues' formula and decoded back to ZYX angles.
    fn matmul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
        let mut c = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    c[i][j] += a[i][k] * b[k][j];
                }
            }
        }
        c
    }

    fn rot_x(a: f64) -> [[f64; 3]; 3] {
        [[1.0, 0.0, 0.0], [0.0, a.cos(), -a.sin()], [0.0, a.sin(), a.cos()]]
    }
    fn rot_y(a: f64) -> [[f64; 3]; 3] {
        [[a.cos(), 0.0, a.sin()], [0.0, 1.0, 0.0], [-a.sin(), 0.0, a.cos()]]
    }
    fn rot_z(a: f64) -> [[f64; 3]; 3] {
        [[a.cos(), -a.sin(), 0.0], [a.sin(), a.cos(), 0.0], [0.0, 0.0, 1.0]]
    }

    fn exp_so3(w: [f64; 3], t: f64) -> [[f64; 3]; 3] {
        let th = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt() * t;
        if th == 0.0 {
            return [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        }
        let n = w.map(|x| x * t / th);
        let k = [[0.0, -n[2], n[1]], [n[2], 0.0, -n[0]], [-n[1], n[0], 0.0]];
        let k2 = matmul(&k, &k);
        let mut r = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                r[i][j] = if i == j { 1.0 } else { 0.0 } + th.sin() * k[i][j] + (1.0 - th.cos()) * k2[i][j];
            }
        }
        r
    }

    fn euler_from(r: &[[f64; 3]; 3]) -> [f64; 3] {
        let theta = (-r[2][0]).asin();
        let phi = r[2][1].atan2(r[2][2]);
        let psi = r[1][0].atan2(r[0][0]);
        [phi, theta, psi]
    }

    #[test]
    fn kinematics_match_rotation_matrix_oracle() {
        let p = BoatParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let s = random_state(&mut rng);
            let got = boat_kinematic_derivative(&s, p.theta_max).unwrap();

            let r = matmul(&matmul(&rot_z(s.psi), &rot_y(s.theta)), &rot_x(s.phi));
            let v = [s.v1, s.v2, s.v3];
            for i in 0..3 {
                let want: f64 = (0..3).map(|j| r[i][j] * v[j]).sum();
                assert!((got[i] - want).abs() < 1e-9, "row {i}: {} vs {want}", got[i]);
            }

            let w = [s.w1, s.w2, s.w3];
            let h = 1e-5;
            let fwd = euler_from(&matmul(&r, &exp_so3(w, h)));
            let back = euler_from(&matmul(&r, &exp_so3(w, -h)));
            for i in 0..3 {
                let mut diff = fwd[i] - back[i];
                diff = crate::angle::wrap(diff);
                let want = diff / (2.0 * h);
                assert!(
                    (got[3 + i] - want).abs() < 1e-6 * (1.0 + want.abs()),
                    "euler row {i}: {} vs {want}",
                    got[3 + i]
                );
            }
        }
    }

    #[test]
    fn forces_with_zero_drag() {
        let p = BoatParams::default();
        let z_eq = buoyancy_equilibrium_draft(&p).unwrap();
        let s = BoatState::at_rest(0.0, 0.0, z_eq, 0.0);
        let t = 3.5;
        let fm = boat_forces(&s, &ThrustCommand::new(t, t), &p);
        assert_eq!(fm.x, 2.0 * t);
        assert_eq!(fm.y, 0.0);
        assert_eq!(fm.n, 0.0);
    }

    #[test]
    fn differential_thrust_yaw_moment() {
        let p = BoatParams::default();
        let t = 2.0;
        let fm = boat_forces(&BoatState::default(), &ThrustCommand::new(-t, t), &p);
        assert!((fm.n - t * p.d_motor).abs() < 1e-15);
    }

    #[test]
    fn surge_drag_hand_value() {
        let p = BoatParams { c_fx: 0.5, rho: 1000.0, a_x: 0.1, ..Default::default() };
        let s = BoatState { v1: 2.0, ..Default::default() };
        let fm = boat_forces(&s, &ThrustCommand::default(), &p);
        // 0.5 * 1000 * 4 * 0.5 * 0.1 = 100 N opposing motion
        assert!((fm.x + 100.0).abs() < 1e-12);
        let s = BoatState { v1: -2.0, ..Default::default() };
        assert!((boat_forces(&s, &ThrustCommand::default(), &p).x - 100.0).abs() < 1e-12);
    }

    #[test]
    fn equilibrium_draft_by_bisection() {
        let p = BoatParams::default();
        let z_eq = buoyancy_equilibrium_draft(&p).unwrap();
        // box hull: rho g A_wl z C_b = m g
        assert!((z_eq - p.m / (p.rho * p.a_wl * p.c_b)).abs() < 1e-12);
        let s = BoatState::at_rest(1.0, -2.0, z_eq, 0.3);
        let d = boat_derivative(&s, &ThrustCommand::default(), &p, [0.0, 0.0]).unwrap();
        for (i, v) in d.iter().enumerate() {
            assert!(v.abs() < 1e-9, "component {i} = {v}");
        }
    }

    #[test]
    fn sinking_hull_has_no_equilibrium() {
        let p = BoatParams { m: 1000.0, ..Default::default() };
        assert!(buoyancy_equilibrium_draft(&p).is_none());
    }

    #[test]
    fn level_thrust_acceleration() {
        let p = BoatParams::default();
        let z_eq = buoyancy_equilibrium_draft(&p).unwrap();
        let s = BoatState::at_rest(0.0, 0.0, z_eq, 0.0);
        let t = 4.0;
        let d = boat_dynamic_derivative(&s, &ThrustCommand::new(t, t), &p).unwrap();
        assert!((d[0] - 2.0 * t / p.m).abs() < 1e-12);
    }

    #[test]
    fn lateral_mirror_symmetry() {
        let p = BoatParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let s = random_state(&mut rng);
            let u = ThrustCommand::new(rng.random_range(-10.0..20.0), rng.random_range(-10.0..20.0));
            let d = boat_derivative(&s, &u, &p, [0.0, 0.0]).unwrap();
            let dm = boat_derivative(&s.mirrored(), &u.mirrored(), &p, [0.0, 0.0]).unwrap();
            // components negated by the reflection: v2, w1, w3, py, phi, psi
            let flips = [false, true, false, true, false, true, false, true, false, true, false, true];
            for i in 0..12 {
                let want = if flips[i] { -d[i] } else { d[i] };
                assert!((dm[i] - want).abs() <= 1e-12, "component {i}: {} vs {want}", dm[i]);
            }
        }
    }

    #[test]
    fn derivative_is_pure() {
        let p = BoatParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = random_state(&mut rng);
        let u = ThrustCommand::new(3.0, 7.0);
        let a = boat_derivative(&s, &u, &p, [0.1, 0.0]).unwrap();
        let b = boat_derivative(&s, &u, &p, [0.1, 0.0]).unwrap();
        assert_eq!(a.map(f64::to_bits), b.map(f64::to_bits));
    }

    #[test]
    fn params_validation() {
        assert!(BoatParams::default().validate().is_ok());
        assert!(BoatParams { m: 0.0, ..Default::default() }.validate().is_err());
        assert!(BoatParams { c_fy: -1.0, ..Default::default() }.validate().is_err());
        assert!(BoatParams { theta_max: 1.6, ..Default::default() }.validate().is_err());
    }
}
