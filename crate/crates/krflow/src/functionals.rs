//! Energy functionals, holomorphic invariants, and curvature identities on
//! radial profiles.
//!
//! Every integral over CP^n reduces, for U(n)-invariant data, to a weighted
//! 1-D quadrature. A U(n)-invariant real (1,1)-form is described at each
//! node by an eigenvalue pair: its smooth radial density `rad` (the radial
//! eigenvalue divided by y(1-y)) and its transverse eigenvalue `trans`. The
//! wedge product of n such forms integrates as
//!
//! ```text
//! \int f a_1 ^ ... ^ a_n
//!   = C \int_0^1 f(y) (1/n) sum_m rad_m prod_{m' != m} trans_{m'} dy,
//! ```
//!
//! with `C = pi^n / ((n-1)! l)`; this is the permanent expansion of the
//! diagonal eigenvalue matrix, validated in tests against a brute-force
//! permutation sum.

use crate::error::FunctionalError;
use crate::geometry::{ClassData, CurvatureFields, RadialProfile};
use crate::grid::Grid;

/// Floor used in `lemma35_residual` to avoid 0/0 at Kahler-Einstein inputs.
const EPS_FLOOR: f64 = 1e-14;

/// One sampled time of a trajectory, as consumed by the path functionals.
#[derive(Debug, Clone)]
pub struct PathSample {
    pub t: f64,
    pub phi: Vec<f64>,
    pub phi_dot: Vec<f64>,
}

/// Energy-functional values at one time, for all k = 0..=n.
#[derive(Debug, Clone)]
pub struct FunctionalReport {
    pub t: f64,
    pub e0: Vec<f64>,
    pub j: Vec<f64>,
    pub e: Vec<f64>,
    pub c_k: Vec<f64>,
}

/// Holomorphic-invariant values for the radial Euler field.
#[derive(Debug, Clone)]
pub struct InvariantReport {
    pub im_k: Vec<f64>,
    /// Additive normalization of theta_X (its mean against w^n before the
    /// zero-average shift).
    pub theta_norm: f64,
    pub metric_id: String,
}

/// Deviation from the constant-bisectional-curvature model tensor.
#[derive(Debug, Clone)]
pub struct PinchingReport {
    pub epsilon: f64,
    pub deviation: f64,
}

/// Eigenvalue-pair description of a U(n)-invariant real (1,1)-form.
#[derive(Debug, Clone)]
pub struct FormEig {
    /// Radial eigenvalue divided by y(1-y) (smooth on the closed grid).
    pub rad: Vec<f64>,
    /// Transverse eigenvalue (vanishes at y = 0 for smooth forms).
    pub trans: Vec<f64>,
}

impl FormEig {
    /// The Kahler form of a profile.
    pub fn omega(p: &RadialProfile) -> Self {
        FormEig { rad: p.a_y().to_vec(), trans: p.a().to_vec() }
    }

    /// The Ricci form of a profile.
    pub fn ricci(p: &RadialProfile, c: &CurvatureFields) -> Self {
        let n_nodes = p.grid().n_nodes();
        let ric_r = c.ric_radial();
        let ric_t = c.ric_transverse_or_zero(n_nodes);
        let rad = (0..n_nodes).map(|i| p.a_y()[i] * ric_r[i]).collect();
        let trans = (0..n_nodes).map(|i| p.a()[i] * ric_t[i]).collect();
        FormEig { rad, trans }
    }
}

/// `\int_M f a_1 ^ ... ^ a_n` for n eigenvalue-pair forms.
pub fn wedge_integral(class: &ClassData, grid: &Grid, f: &[f64], forms: &[&FormEig]) -> f64 {
    let n = class.n;
    assert_eq!(forms.len(), n);
    let n_nodes = grid.n_nodes();
    let mut density = vec![0.0; n_nodes];
    for i in 0..n_nodes {
        let mut sum = 0.0;
        for m in 0..n {
            let mut term = forms[m].rad[i];
            for (mp, form) in forms.iter().enumerate() {
                if mp != m {
                    term *= form.trans[i];
                }
            }
            sum += term;
        }
        density[i] = f[i] * sum / n as f64;
    }
    class.vol_coeff() * grid.integral(&density)
}

/// The Ricci potential of a profile: `Ric(w) - w = i ddbar h`,
/// `\int (e^h - 1) w^n = 0`. Returns `(h, c)` where `c` is the additive
/// normalization applied to the raw cumulative integral.
pub fn h_potential(p: &RadialProfile) -> (Vec<f64>, f64) {
    let grid = p.grid();
    let y = grid.y();
    let nn = grid.n_nodes();
    let nf = p.class().n as f64;
    // s-derivative of the Ricci potential: D_s h = G' - a, where
    // G' = n - (n-1) b/a - psi'(tau) is the s-derivative of the log volume
    // density relative to the flat reference.
    let b_y = grid.deriv(p.b());
    let psi1: Vec<f64> = (0..nn).map(|i| b_y[i] / p.a_y()[i]).collect();
    let v: Vec<f64> = (0..nn)
        .map(|i| {
            let q = if i == 0 { 1.0 } else { p.b()[i] / p.a()[i] };
            nf - (nf - 1.0) * q - psi1[i] - p.a()[i]
        })
        .collect();
    // h_y = v / (y(1-y)); endpoint values by l'Hopital.
    let v_y = grid.deriv(&v);
    let h_y: Vec<f64> = (0..nn)
        .map(|i| {
            if i == 0 {
                v_y[0]
            } else if i == nn - 1 {
                -v_y[nn - 1]
            } else {
                v[i] / (y[i] * (1.0 - y[i]))
            }
        })
        .collect();
    let h0 = grid.cumulative_integral(&h_y);
    let exp_h0: Vec<f64> = h0.iter().map(|v| v.exp()).collect();
    let c = (p.class().volume / p.integrate(&exp_h0)).ln();
    (h0.iter().map(|v| v + c).collect(), c)
}

/// `log(w_phi^n / w_base^n)` on the grid (smooth through the endpoints).
pub fn log_volume_ratio(base: &RadialProfile, p_phi: &RadialProfile) -> Vec<f64> {
    let n = base.class().n;
    (0..base.grid().n_nodes())
        .map(|i| {
            (n as f64 - 1.0) * (p_phi.a1()[i] / base.a1()[i]).ln()
                + (p_phi.a_y()[i] / base.a_y()[i]).ln()
        })
        .collect()
}

/// Builds the profile of `u_base + phi` in the class of `base`.
pub fn profile_with_phi(base: &RadialProfile, phi: &[f64]) -> Result<RadialProfile, FunctionalError> {
    let u: Vec<f64> = base.u().iter().zip(phi).map(|(a, b)| a + b).collect();
    Ok(RadialProfile::from_u(base.class().clone(), base.grid().n_cells(), u)?)
}

fn check_k(k: usize, n: usize) -> Result<(), FunctionalError> {
    if k > n {
        Err(FunctionalError::IndexOutOfRange { k, n })
    } else {
        Ok(())
    }
}

/// E_k^0 of the metric `w_phi` relative to `base`, Definition 2.3-style:
/// the log-ratio integral against the mixed Ricci/base wedge powers, plus
/// the normalization constant c_k.
pub fn e0_k(base: &RadialProfile, phi: &[f64], k: usize) -> Result<f64, FunctionalError> {
    let p_phi = profile_with_phi(base, phi)?;
    e0_k_prepared(base, &p_phi, k)
}

/// E_k^0 with the phi-profile already built (used by the flow monitors).
pub fn e0_k_prepared(
    base: &RadialProfile,
    p_phi: &RadialProfile,
    k: usize,
) -> Result<f64, FunctionalError> {
    let class = base.class();
    let n = class.n;
    check_k(k, n)?;
    let grid = base.grid();
    let vol = class.volume;
    let (h, _) = h_potential(base);
    let c_base = base.curvature()?;
    let c_phi = p_phi.curvature()?;
    let w_base = FormEig::omega(base);
    let w_phi = FormEig::omega(p_phi);
    let ric_base = FormEig::ricci(base, &c_base);
    let ric_phi = FormEig::ricci(p_phi, &c_phi);

    let lr = log_volume_ratio(base, p_phi);
    let f: Vec<f64> = lr.iter().zip(&h).map(|(l, hh)| l - hh).collect();

    let mut main = 0.0;
    let mut c_k = 0.0;
    for i in 0..=k {
        let mut forms: Vec<&FormEig> = Vec::with_capacity(n);
        for _ in 0..i {
            forms.push(&ric_phi);
        }
        for _ in 0..k - i {
            forms.push(&w_base);
        }
        for _ in 0..n - k {
            forms.push(&w_phi);
        }
        main += wedge_integral(class, grid, &f, &forms);

        let mut forms_c: Vec<&FormEig> = Vec::with_capacity(n);
        for _ in 0..i {
            forms_c.push(&ric_base);
        }
        for _ in 0..n - i {
            forms_c.push(&w_base);
        }
        c_k += wedge_integral(class, grid, &h, &forms_c);
    }
    Ok((main + c_k) / vol)
}

/// The J_k time-quadrature integrand
/// `-((n-k)/V) \int phidot (w_phi^{k+1} - w^{k+1}) ^ w_phi^{n-k-1}`.
pub fn j_integrand(
    base: &RadialProfile,
    p_phi: &RadialProfile,
    phi_dot: &[f64],
    k: usize,
) -> Result<f64, FunctionalError> {
    let class = base.class();
    let n = class.n;
    check_k(k, n)?;
    if k == n {
        return Ok(0.0);
    }
    let grid = base.grid();
    let w_base = FormEig::omega(base);
    let w_phi = FormEig::omega(p_phi);
    let mut forms_a: Vec<&FormEig> = Vec::with_capacity(n);
    let mut forms_b: Vec<&FormEig> = Vec::with_capacity(n);
    for _ in 0..k + 1 {
        forms_a.push(&w_phi);
        forms_b.push(&w_base);
    }
    for _ in 0..n - k - 1 {
        forms_a.push(&w_phi);
        forms_b.push(&w_phi);
    }
    let ia = wedge_integral(class, grid, phi_dot, &forms_a);
    let ib = wedge_integral(class, grid, phi_dot, &forms_b);
    Ok(-((n - k) as f64) / class.volume * (ia - ib))
}

fn trapezoid(ts: &[f64], vs: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 1..ts.len() {
        s += 0.5 * (vs[i] + vs[i - 1]) * (ts[i] - ts[i - 1]);
    }
    s
}

/// J_k over a stored path starting at phi = 0, with a Richardson
/// self-estimate of the time-quadrature error.
pub fn j_k_path(base: &RadialProfile, path: &[PathSample], k: usize) -> Result<f64, FunctionalError> {
    let n = base.class().n;
    check_k(k, n)?;
    if k == n {
        return Ok(0.0);
    }
    let mut ts = Vec::with_capacity(path.len());
    let mut vs = Vec::with_capacity(path.len());
    for s in path {
        let p_phi = profile_with_phi(base, &s.phi)?;
        ts.push(s.t);
        vs.push(j_integrand(base, &p_phi, &s.phi_dot, k)?);
    }
    let full = trapezoid(&ts, &vs);
    if path.len() >= 5 {
        let mut tc = Vec::new();
        let mut vc = Vec::new();
        for i in (0..path.len()).step_by(2) {
            tc.push(ts[i]);
            vc.push(vs[i]);
        }
        if *tc.last().unwrap() != *ts.last().unwrap() {
            tc.push(*ts.last().unwrap());
            vc.push(*vs.last().unwrap());
        }
        let coarse = trapezoid(&tc, &vc);
        // Trapezoid error is O(dt^2): the halved-step comparison
        // overestimates the fine-grid error by a factor 3.
        let estimate = (full - coarse).abs() / 3.0;
        if estimate > 1e-6 {
            return Err(FunctionalError::PathTooCoarse { estimate });
        }
    }
    Ok(full)
}

/// E_k = E_k^0 - J_k for the endpoint of `path`.
pub fn e_k(base: &RadialProfile, path: &[PathSample], k: usize) -> Result<f64, FunctionalError> {
    let end = path.last().expect("nonempty path");
    Ok(e0_k(base, &end.phi, k)? - j_k_path(base, path, k)?)
}

/// Right side of the Theorem 2.6 derivative formula (Eq. 2.3):
/// `((k+1)/V) \int Lap_phi(phidot) Ric^k ^ w_phi^{n-k}
///  - ((n-k)/V) \int phidot (Ric^{k+1} - w_phi^{k+1}) ^ w_phi^{n-k-1}`.
pub fn dek_dt_rhs(
    base: &RadialProfile,
    p_phi: &RadialProfile,
    phi_dot: &[f64],
    k: usize,
) -> Result<f64, FunctionalError> {
    let class = base.class();
    let n = class.n;
    check_k(k, n)?;
    let grid = base.grid();
    let c_phi = p_phi.curvature()?;
    let w_phi = FormEig::omega(p_phi);
    let ric_phi = FormEig::ricci(p_phi, &c_phi);
    let lap = p_phi.laplacian(phi_dot);

    let mut forms: Vec<&FormEig> = Vec::with_capacity(n);
    for _ in 0..k {
        forms.push(&ric_phi);
    }
    for _ in 0..n - k {
        forms.push(&w_phi);
    }
    let term1 = (k as f64 + 1.0) / class.volume * wedge_integral(class, grid, &lap, &forms);

    let term2 = if k == n {
        0.0
    } else {
        let mut forms_r: Vec<&FormEig> = Vec::with_capacity(n);
        let mut forms_w: Vec<&FormEig> = Vec::with_capacity(n);
        for _ in 0..k + 1 {
            forms_r.push(&ric_phi);
            forms_w.push(&w_phi);
        }
        for _ in 0..n - k - 1 {
            forms_r.push(&w_phi);
            forms_w.push(&w_phi);
        }
        let ir = wedge_integral(class, grid, phi_dot, &forms_r);
        let iw = wedge_integral(class, grid, phi_dot, &forms_w);
        ((n - k) as f64) / class.volume * (ir - iw)
    };
    Ok(term1 - term2)
}

/// The holomorphic invariant Im_k for the radial Euler field on `p`,
/// with theta_X normalized to zero average against w_p^n.
pub fn futaki_like_invariant(p: &RadialProfile, k: usize) -> Result<f64, FunctionalError> {
    let class = p.class();
    let n = class.n;
    check_k(k, n)?;
    futaki_with_shift(p, k, 0.0)
}

/// Im_k with an explicit additive shift of theta_X (used to verify the
/// constant-shift invariance; the canonical call uses shift 0 on the
/// zero-average normalization).
pub fn futaki_with_shift(p: &RadialProfile, k: usize, shift: f64) -> Result<f64, FunctionalError> {
    let class = p.class();
    let n = class.n;
    check_k(k, n)?;
    let grid = p.grid();
    let mean_a = p.mean(p.a());
    let theta: Vec<f64> = p.a().iter().map(|&a| a - mean_a + shift).collect();
    let lap_theta = p.laplacian(&theta);
    let c = p.curvature()?;
    let w = FormEig::omega(p);
    let ric = FormEig::ricci(p, &c);

    let mut forms_w: Vec<&FormEig> = Vec::with_capacity(n);
    for _ in 0..n {
        forms_w.push(&w);
    }
    let term0 = (n - k) as f64 * wedge_integral(class, grid, &theta, &forms_w);

    let mut forms_k: Vec<&FormEig> = Vec::with_capacity(n);
    for _ in 0..k {
        forms_k.push(&ric);
    }
    for _ in 0..n - k {
        forms_k.push(&w);
    }
    let term1 = (k as f64 + 1.0) * wedge_integral(class, grid, &lap_theta, &forms_k);

    let term2 = if k == n {
        0.0
    } else {
        let mut forms_k1: Vec<&FormEig> = Vec::with_capacity(n);
        for _ in 0..k + 1 {
            forms_k1.push(&ric);
        }
        for _ in 0..n - k - 1 {
            forms_k1.push(&w);
        }
        (n - k) as f64 * wedge_integral(class, grid, &theta, &forms_k1)
    };
    Ok(term0 + term1 - term2)
}

/// Full invariant report for a profile.
pub fn invariant_report(p: &RadialProfile, metric_id: &str) -> Result<InvariantReport, FunctionalError> {
    let n = p.class().n;
    let mut im_k = Vec::with_capacity(n + 1);
    for k in 0..=n {
        im_k.push(futaki_like_invariant(p, k)?);
    }
    Ok(InvariantReport { im_k, theta_norm: p.mean(p.a()), metric_id: metric_id.to_string() })
}

/// sigma_0..sigma_n as grid functions: elementary symmetric functions of
/// the relative Ricci eigenvalues {ric_radial, ric_transverse x (n-1)}.
pub fn sigma_profile(c: &CurvatureFields, p: &RadialProfile) -> Vec<Vec<f64>> {
    let n = p.class().n;
    let nn = p.grid().n_nodes();
    let ric_r = c.ric_radial();
    let ric_t = c.ric_transverse_or_zero(nn);
    let binom = |m: usize, k: i64| -> f64 {
        if k < 0 || k as usize > m {
            return 0.0;
        }
        let k = k as usize;
        let mut v = 1.0;
        for j in 0..k {
            v = v * (m - j) as f64 / (j + 1) as f64;
        }
        v
    };
    (0..=n)
        .map(|k| {
            (0..nn)
                .map(|i| {
                    binom(n - 1, k as i64) * ric_t[i].powi(k as i32)
                        + binom(n - 1, k as i64 - 1) * ric_t[i].powi(k as i32 - 1) * ric_r[i]
                })
                .collect()
        })
        .collect()
}

/// Relative residual of the Lemma 3.5 identity
/// `\int |Ric - w|^2 w^n = \int (R - n)^2 w^n`.
pub fn lemma35_residual(p: &RadialProfile) -> f64 {
    let c = p.curvature().expect("curvature available");
    let nn = p.grid().n_nodes();
    let n = p.class().n as f64;
    let ric_r = c.ric_radial();
    let ric_t = c.ric_transverse_or_zero(nn);
    let lhs_f: Vec<f64> = (0..nn)
        .map(|i| (ric_r[i] - 1.0).powi(2) + (n - 1.0) * (ric_t[i] - 1.0).powi(2))
        .collect();
    let rhs_f: Vec<f64> = c.scalar.iter().map(|r| (r - n).powi(2)).collect();
    let lhs = p.integrate(&lhs_f);
    let rhs = p.integrate(&rhs_f);
    (lhs - rhs).abs() / rhs.max(EPS_FLOOR)
}

/// Max deviation |R_component - eps * T_component| over nodes and the four
/// distinct components, with T = (2, 1, 2, 1) in the unit-vector basis.
pub fn pinching_deviation(c: &CurvatureFields, epsilon: f64) -> PinchingReport {
    let mut dev = 0.0_f64;
    for v in &c.b_rr {
        dev = dev.max((v - 2.0 * epsilon).abs());
    }
    for v in &c.b_tt {
        dev = dev.max((v - 2.0 * epsilon).abs());
    }
    for v in &c.b_rt {
        dev = dev.max((v - epsilon).abs());
    }
    for v in &c.b_tu {
        dev = dev.max((v - epsilon).abs());
    }
    PinchingReport { epsilon, deviation: dev }
}
