//! Planar rocket equations of motion, written out component by component.

/// Vehicle constants the right-hand side depends on.
#[derive(Debug, Clone, Copy)]
pub struct Vehicle {
    pub g0: f64,
    pub isp: f64,
    pub l_r: f64,
    pub l_h: f64,
    pub l_cm: f64,
    /// Center-of-pressure arm of the phase being evaluated.
    pub l_cp: f64,
    pub rho_air: f64,
    pub s_area: f64,
    pub c_x: f64,
    pub c_z: f64,
}

/// `ẋ` for `x = (m, r_x, r_z, v_x, v_z, θ, ω)` and `u = (T, δ)`.
///
/// The body-to-inertial rotation maps body `(cos δ, −sin δ)` to inertial
/// `(cos(θ+δ), −sin(θ+δ))`, i.e. `R = [[cos θ, sin θ], [−sin θ, cos θ]]`.
pub fn rhs(p: &Vehicle, x: &[f64; 7], u: &[f64; 2]) -> [f64; 7] {
    let [m, _rx, _rz, vx, vz, th, om] = *x;
    let [t, d] = *u;
    let (c, s) = (th.cos(), th.sin());

    // Velocity in body axes: Rᵀ v.
    let vb_x = c * vx - s * vz;
    let vb_z = s * vx + c * vz;
    let speed = (vx * vx + vz * vz).sqrt();
    let k = -0.5 * p.rho_air * p.s_area * speed;
    let ab_x = k * p.c_x * vb_x;
    let ab_z = k * p.c_z * vb_z;
    let ai_x = c * ab_x + s * ab_z;
    let ai_z = -s * ab_x + c * ab_z;

    let fi_x = t * (th + d).cos();
    let fi_z = -t * (th + d).sin();
    let fb_z = -t * d.sin();
    let inertia = m * (p.l_r * p.l_r / 4.0 + p.l_h * p.l_h / 12.0);

    [
        -t / (p.isp * p.g0),
        vx,
        vz,
        (fi_x + ai_x) / m - p.g0,
        (fi_z + ai_z) / m,
        om,
        (fb_z * p.l_cm - ab_z * p.l_cp) / inertia,
    ]
}
