//! Radial (U(n)-invariant) Kahler metrics on CP^n and its cyclic quotients.
//!
//! A metric in the anticanonical class is represented by a relative potential
//! `u` on the uniform grid in the background moment coordinate
//! `y = tau_0 / (n+1) in [0, 1]`, where `tau_0 = F_0'(s)`,
//! `F_0(s) = (n+1) log(1 + e^s)` is the Fubini-Study background and
//! `s = log|z|^2` the radial variable. The two metric eigenvalues are
//!
//! ```text
//! a(y) = (n+1) y + y (1-y) u_y(y)      (transverse, multiplicity n-1)
//! b(y) = y (1-y) a_y(y)                (radial)
//! ```
//!
//! In this parametrization the momentum-profile endpoint conditions
//! `psi(0) = psi(n+1) = 0`, `psi'(0) = 1`, `psi'(n+1) = -1` hold identically
//! for every smooth `u`; they are still re-verified numerically at
//! construction to catch corrupted input data. The quotient order `l` enters
//! only through the volume normalization (the profile is stored on the
//! smooth covering space); see the crate README for the discussion.

use crate::error::GeometryError;
use crate::grid::Grid;
use nalgebra::DMatrix;
use std::f64::consts::PI;

/// Relative tolerance for the endpoint momentum-slope consistency check.
const ENDPOINT_SLOPE_TOL: f64 = 1e-2;

/// Floor below which a metric eigenvalue counts as degenerate.
const EIGENVALUE_FLOOR: f64 = 1e-12;

/// Kahler class data: dimension, quotient order, and class constants.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassData {
    /// Complex dimension n >= 1.
    pub n: usize,
    /// Cyclic quotient order l >= 1 (1 = smooth CP^n).
    pub ell: u32,
    /// Moment-interval length, n+1 for the anticanonical class.
    pub class_scale: f64,
    /// Total volume of the class, pi^n (n+1)^n / (n! l).
    pub volume: f64,
}

impl ClassData {
    pub fn new(n: usize, ell: u32) -> Self {
        assert!(n >= 1 && ell >= 1);
        let nf = n as f64;
        let factorial: f64 = (1..=n).map(|k| k as f64).product();
        let volume = PI.powi(n as i32) * (nf + 1.0).powi(n as i32) / (factorial * ell as f64);
        ClassData { n, ell, class_scale: nf + 1.0, volume }
    }

    /// Coefficient C such that `\int_M f w^n = C \int_0^1 f(y) X(y) dy`
    /// for the radial densities used throughout the crate:
    /// `C = pi^n / ((n-1)! l)`.
    pub fn vol_coeff(&self) -> f64 {
        let factorial: f64 = (1..self.n).map(|k| k as f64).product();
        PI.powi(self.n as i32) / (factorial * self.ell as f64)
    }
}

/// A radial Kahler metric in the class, with cached eigenvalue data.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    class: ClassData,
    grid: Grid,
    /// Relative potential at the nodes.
    u: Vec<f64>,
    /// Transverse eigenvalue a(y) = y * a1(y); a1 = (n+1) + (1-y) u_y.
    a: Vec<f64>,
    /// The smooth quotient a1 = a / y (finite at y = 0).
    a1: Vec<f64>,
    /// da/dy (equals b / (y(1-y)); strictly positive).
    a_y: Vec<f64>,
    /// Radial eigenvalue b(y) = y (1-y) a_y(y); vanishes at the endpoints.
    b: Vec<f64>,
}

impl RadialProfile {
    /// Core constructor: builds the cached eigenvalue data from nodal `u`
    /// and enforces every profile invariant.
    pub fn from_u(class: ClassData, n_cells: usize, u: Vec<f64>) -> Result<Self, GeometryError> {
        if n_cells < 16 {
            return Err(GeometryError::GridTooSmall(n_cells));
        }
        let grid = Grid::new(n_cells);
        if u.len() != grid.n_nodes() {
            return Err(GeometryError::InvalidProfile(format!(
                "u has {} nodes, grid has {}",
                u.len(),
                grid.n_nodes()
            )));
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidProfile("non-finite potential value".into()));
        }
        let y = grid.y();
        let scale = class.class_scale;
        let u_y = grid.deriv(&u);
        let a1: Vec<f64> = (0..u.len()).map(|i| scale + (1.0 - y[i]) * u_y[i]).collect();
        let a: Vec<f64> = (0..u.len()).map(|i| y[i] * a1[i]).collect();
        let a_y = grid.deriv(&a);
        let b: Vec<f64> = (0..u.len()).map(|i| y[i] * (1.0 - y[i]) * a_y[i]).collect();

        // Positivity: a at interior nodes, and a_y everywhere (a_y is the
        // smooth extension of b / (y(1-y)) and controls b at the endpoints).
        for i in 0..u.len() {
            if i > 0 && i < u.len() - 1 && a[i] <= EIGENVALUE_FLOOR {
                return Err(GeometryError::PositivityViolation { which: "a", value: a[i], y: y[i] });
            }
            if a_y[i] <= EIGENVALUE_FLOOR {
                return Err(GeometryError::PositivityViolation { which: "b/(y(1-y))", value: a_y[i], y: y[i] });
            }
        }

        // Endpoint regularity: momentum slope psi'(tau) = b'(y)/a'(y) must be
        // +1 at y=0 and -1 at y=1. This holds identically for smooth data;
        // the check catches corrupted or non-smooth input.
        let b_y = grid.deriv(&b);
        let slope0 = b_y[0] / a_y[0];
        let slope1 = b_y[u.len() - 1] / a_y[u.len() - 1];
        if (slope0 - 1.0).abs() > ENDPOINT_SLOPE_TOL || (slope1 + 1.0).abs() > ENDPOINT_SLOPE_TOL {
            return Err(GeometryError::EndpointRegularity(format!(
                "momentum slopes ({slope0:.6}, {slope1:.6}) differ from (+1, -1)"
            )));
        }

        let p = RadialProfile { class, grid, u, a, a1, a_y, b };

        // Class membership: volume must match the class constant.
        let v = p.total_volume();
        if ((v - p.class.volume) / p.class.volume).abs() > 1e-6 {
            return Err(GeometryError::InvalidProfile(format!(
                "volume {v:.12e} deviates from class volume {:.12e}",
                p.class.volume
            )));
        }
        Ok(p)
    }

    /// The Fubini-Study reference metric (u = 0).
    pub fn fubini_study(class: ClassData, n_cells: usize) -> Result<Self, GeometryError> {
        if n_cells < 16 {
            return Err(GeometryError::GridTooSmall(n_cells));
        }
        let grid = Grid::new(n_cells);
        Self::from_u(class, n_cells, vec![0.0; grid.n_nodes()])
    }

    /// A perturbed class member: `u = amplitude * sum_k c_k sin(k pi y)`
    /// over the given `(mode, coefficient)` list.
    pub fn perturbed(
        class: ClassData,
        n_cells: usize,
        amplitude: f64,
        mode_spec: &[(usize, f64)],
    ) -> Result<Self, GeometryError> {
        if n_cells < 16 {
            return Err(GeometryError::GridTooSmall(n_cells));
        }
        let grid = Grid::new(n_cells);
        let u = grid
            .y()
            .iter()
            .map(|&y| {
                amplitude
                    * mode_spec
                        .iter()
                        .map(|&(k, c)| c * (k as f64 * PI * y).sin())
                        .sum::<f64>()
            })
            .collect();
        Self::from_u(class, n_cells, u)
    }

    pub fn class(&self) -> &ClassData {
        &self.class
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    /// Transverse eigenvalue a(y) (the moment coordinate of the profile).
    pub fn a(&self) -> &[f64] {
        &self.a
    }

    /// Radial eigenvalue b(y).
    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// da/dy.
    pub fn a_y(&self) -> &[f64] {
        &self.a_y
    }

    /// a(y)/y, finite and positive on the whole closed grid.
    pub fn a1(&self) -> &[f64] {
        &self.a1
    }

    /// `\int_M f w_p^n` by Gregory quadrature of the radial density
    /// `f a^{n-1} a_y`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        let n = self.class.n;
        let g: Vec<f64> = (0..f.len())
            .map(|i| f[i] * self.a[i].powi(n as i32 - 1) * self.a_y[i])
            .collect();
        self.class.vol_coeff() * self.grid.integral(&g)
    }

    /// Total volume `\int_M w_p^n`.
    pub fn total_volume(&self) -> f64 {
        self.integrate(&vec![1.0; self.grid.n_nodes()])
    }

    /// Mean of `f` against the profile's volume form.
    pub fn mean(&self, f: &[f64]) -> f64 {
        self.integrate(f) / self.class.volume
    }

    /// Complex Laplacian of a radial grid function with respect to this
    /// metric: `Delta f = f_ss / b + (n-1) f_s / a`, written in the
    /// endpoint-regular form
    /// `Delta f = (y(1-y) f_y)_y / a_y + (n-1)(1-y) f_y / a1`.
    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        let y = self.grid.y();
        let f_y = self.grid.deriv(f);
        let g: Vec<f64> = (0..f.len()).map(|i| y[i] * (1.0 - y[i]) * f_y[i]).collect();
        let g_y = self.grid.deriv(&g);
        (0..f.len())
            .map(|i| {
                g_y[i] / self.a_y[i]
                    + (self.class.n as f64 - 1.0) * (1.0 - y[i]) * f_y[i] / self.a1[i]
            })
            .collect()
    }

    /// `|grad f|^2` (complex convention `g^{s sbar} |f_s|^2`) for radial f:
    /// `(y(1-y))^2 f_y^2 / b = y(1-y) f_y^2 / a_y`.
    pub fn grad_sq(&self, f: &[f64]) -> Vec<f64> {
        let y = self.grid.y();
        let f_y = self.grid.deriv(f);
        (0..f.len())
            .map(|i| y[i] * (1.0 - y[i]) * f_y[i] * f_y[i] / self.a_y[i])
            .collect()
    }

    /// Pointwise curvature data; see [`CurvatureFields`].
    pub fn curvature(&self) -> Result<CurvatureFields, GeometryError> {
        CurvatureFields::compute(self)
    }

    /// Diameter. For n = 1 this is the exact pole-to-pole radial length
    /// `\int sqrt(a_y / (2 y (1-y))) dy`; for n >= 2 it is the documented
    /// upper-bound proxy: radial length from the center to the divisor at
    /// infinity plus the divisor diameter `pi sqrt((n+1)/2)`.
    pub fn diameter(&self) -> f64 {
        // Substitute y = sin^2(theta/2); the singular weight becomes flat and
        // the integrand extends to a smooth even-periodic function of theta,
        // so the trapezoid rule converges rapidly.
        let m = 2048usize;
        let dtheta = PI / m as f64;
        let g = |y: f64| (self.grid.interp(&self.a_y, y) / 2.0).sqrt();
        let mut radial = 0.5 * (g(0.0) + g(1.0));
        for j in 1..m {
            let theta = j as f64 * dtheta;
            let y = (theta / 2.0).sin().powi(2);
            radial += g(y);
        }
        radial *= dtheta;
        if self.class.n == 1 {
            radial
        } else {
            radial + PI * ((self.class.n as f64 + 1.0) / 2.0).sqrt()
        }
    }

    /// Smallest nonzero eigenvalue of the (complex-convention) metric
    /// Laplacian restricted to radial functions, via a P1 finite-element
    /// generalized eigenproblem for the Rayleigh quotient
    /// `\int y(1-y) a^{n-1} f_y^2 dy / \int a^{n-1} a_y f^2 dy`.
    pub fn lambda1_radial(&self) -> Result<f64, GeometryError> {
        let nn = self.grid.n_nodes();
        let h = self.grid.h();
        let np = self.class.n as i32 - 1;
        let mut stiff = DMatrix::<f64>::zeros(nn, nn);
        let mut mass = DMatrix::<f64>::zeros(nn, nn);
        // Two-point Gauss quadrature per cell; coefficient functions are
        // interpolated cubically from the nodal data.
        let gauss = [0.5 - 0.5 / 3.0_f64.sqrt(), 0.5 + 0.5 / 3.0_f64.sqrt()];
        for cell in 0..self.grid.n_cells() {
            let y0 = self.grid.y()[cell];
            for &x in &gauss {
                let y = y0 + x * h;
                let a = self.grid.interp(&self.a, y).max(0.0);
                let w_stiff = y * (1.0 - y) * a.powi(np);
                let w_mass = a.powi(np) * self.grid.interp(&self.a_y, y);
                let wq = 0.5 * h;
                // P1 shapes on the cell: phi0 = 1-x, phi1 = x; dphi = -1/h, 1/h.
                let shp = [1.0 - x, x];
                let dsh = [-1.0 / h, 1.0 / h];
                for ii in 0..2 {
                    for jj in 0..2 {
                        stiff[(cell + ii, cell + jj)] += wq * w_stiff * dsh[ii] * dsh[jj];
                        mass[(cell + ii, cell + jj)] += wq * w_mass * shp[ii] * shp[jj];
                    }
                }
            }
        }
        let chol = mass
            .clone()
            .cholesky()
            .ok_or_else(|| GeometryError::EigenSolveFailure("mass matrix not positive definite".into()))?;
        // Transform A v = lambda M v to the standard symmetric problem
        // (L^-1 A L^-T) w = lambda w.
        let l = chol.l();
        let linv_a = l.clone().solve_lower_triangular(&stiff).ok_or_else(|| {
            GeometryError::EigenSolveFailure("singular Cholesky factor".into())
        })?;
        let b = l
            .solve_lower_triangular(&linv_a.transpose())
            .ok_or_else(|| GeometryError::EigenSolveFailure("singular Cholesky factor".into()))?;
        let sym = 0.5 * (&b + b.transpose());
        let eig = sym.symmetric_eigen();
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::EigenSolveFailure("non-finite eigenvalue".into()));
        }
        vals.sort_by(|p, q| p.partial_cmp(q).unwrap());
        // The lowest eigenvalue is the constant mode (zero up to roundoff).
        Ok(vals[1])
    }

    /// Test-only uniform rescaling of the class (`class_scale *= factor`),
    /// scaling the cached eigenvalue data accordingly. Used by the diameter
    /// scaling check; not a class member of the original class.
    #[doc(hidden)]
    pub fn rescaled_for_test(mut self, factor: f64) -> Self {
        self.class.class_scale *= factor;
        self.class.volume *= factor.powi(self.class.n as i32);
        for v in self.a.iter_mut().chain(&mut self.a1).chain(&mut self.a_y).chain(&mut self.b) {
            *v *= factor;
        }
        self
    }

    /// Serialize to the self-describing text format:
    /// header `n ell N class_scale`, then one `y u a b` line per node.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{} {} {} {:.17e}\n",
            self.class.n,
            self.class.ell,
            self.grid.n_cells(),
            self.class.class_scale
        ));
        for i in 0..self.grid.n_nodes() {
            out.push_str(&format!(
                "{:.17e} {:.17e} {:.17e} {:.17e}\n",
                self.grid.y()[i],
                self.u[i],
                self.a[i],
                self.b[i]
            ));
        }
        out
    }

    /// Parse the text format; recomputes the cached data from `u` and
    /// cross-checks the stored `a`, `b` columns.
    pub fn from_text(text: &str) -> Result<Self, GeometryError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| GeometryError::InvalidProfile("empty profile text".into()))?;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 4 {
            return Err(GeometryError::InvalidProfile("header needs 4 fields".into()));
        }
        let parse_err = |what: &str| GeometryError::InvalidProfile(format!("bad header field {what}"));
        let n: usize = head[0].parse().map_err(|_| parse_err("n"))?;
        let ell: u32 = head[1].parse().map_err(|_| parse_err("ell"))?;
        let n_cells: usize = head[2].parse().map_err(|_| parse_err("N"))?;
        let class_scale: f64 = head[3].parse().map_err(|_| parse_err("class_scale"))?;
        let class = ClassData::new(n, ell);
        if (class.class_scale - class_scale).abs() > 1e-12 {
            return Err(GeometryError::InvalidProfile(format!(
                "class_scale {class_scale} inconsistent with n = {n}"
            )));
        }
        let mut u = Vec::with_capacity(n_cells + 1);
        let mut stored_ab = Vec::with_capacity(n_cells + 1);
        for line in lines {
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 4 {
                return Err(GeometryError::InvalidProfile("node line needs 4 fields".into()));
            }
            let vals: Result<Vec<f64>, _> = cols.iter().map(|c| c.parse::<f64>()).collect();
            let vals = vals.map_err(|_| GeometryError::InvalidProfile("bad node value".into()))?;
            u.push(vals[1]);
            stored_ab.push((vals[2], vals[3]));
        }
        let p = Self::from_u(class, n_cells, u)?;
        for (i, &(sa, sb)) in stored_ab.iter().enumerate() {
            if (sa - p.a[i]).abs() > 1e-8 * (1.0 + sa.abs())
                || (sb - p.b[i]).abs() > 1e-8 * (1.0 + sb.abs())
            {
                return Err(GeometryError::InvalidProfile(format!(
                    "stored eigenvalues at node {i} inconsistent with potential"
                )));
            }
        }
        Ok(p)
    }
}

/// Pointwise curvature data of a radial profile.
///
/// For n = 1 only `scalar` and `b_rr` are populated; the transverse fields
/// are empty by construction. All values are in the complex (Kahler)
/// convention anchored by `R = n` at Fubini-Study.
#[derive(Debug, Clone)]
pub struct CurvatureFields {
    n: usize,
    /// Scalar curvature R.
    pub scalar: Vec<f64>,
    /// Radial Ricci eigenvalue (empty for n = 1; use `ric_radial()`).
    pub ric_radial: Vec<f64>,
    /// Transverse Ricci eigenvalue (empty for n = 1).
    pub ric_transverse: Vec<f64>,
    /// Radial-radial bisectional component (radial holomorphic sectional).
    pub b_rr: Vec<f64>,
    /// Radial-transverse component (empty for n = 1).
    pub b_rt: Vec<f64>,
    /// Transverse holomorphic sectional component (empty for n = 1).
    pub b_tt: Vec<f64>,
    /// Transverse-transverse distinct-direction component (empty for n = 1).
    pub b_tu: Vec<f64>,
}

impl CurvatureFields {
    fn compute(p: &RadialProfile) -> Result<Self, GeometryError> {
        let n = p.class.n;
        let grid = &p.grid;
        let nn = grid.n_nodes();
        let b_y = grid.deriv(&p.b);
        // psi1 = psi'(tau), psi2 = psi''(tau) of the momentum profile.
        let psi1: Vec<f64> = (0..nn).map(|i| b_y[i] / p.a_y[i]).collect();
        let d_psi1 = grid.deriv(&psi1);
        let psi2: Vec<f64> = (0..nn).map(|i| d_psi1[i] / p.a_y[i]).collect();
        // q = b/a = psi/tau with its y=0 limit psi'(0) = 1.
        let q: Vec<f64> = (0..nn)
            .map(|i| if i == 0 { 1.0 } else { p.b[i] / p.a[i] })
            .collect();
        // w = (psi' - psi/tau)/tau, with limit psi''(0)/2 at y = 0.
        let w: Vec<f64> = (0..nn)
            .map(|i| if i == 0 { psi2[0] / 2.0 } else { (psi1[i] - q[i]) / p.a[i] })
            .collect();

        let b_rr: Vec<f64> = psi2.iter().map(|v| -v).collect();
        let (scalar, ric_radial, ric_transverse, b_rt, b_tt, b_tu);
        if n == 1 {
            scalar = b_rr.clone();
            ric_radial = Vec::new();
            ric_transverse = Vec::new();
            b_rt = Vec::new();
            b_tt = Vec::new();
            b_tu = Vec::new();
        } else {
            let nf = n as f64;
            b_rt = w.iter().map(|v| -v).collect::<Vec<f64>>();
            b_tu = (0..nn)
                .map(|i| if i == 0 { psi2[0] / 2.0 * (-1.0) } else { (1.0 - q[i]) / p.a[i] })
                .collect::<Vec<f64>>();
            b_tt = b_tu.iter().map(|v| 2.0 * v).collect::<Vec<f64>>();
            ric_radial = (0..nn).map(|i| -(nf - 1.0) * w[i] - psi2[i]).collect::<Vec<f64>>();
            ric_transverse = (0..nn)
                .map(|i| {
                    if i == 0 {
                        -(nf + 1.0) * psi2[0] / 2.0
                    } else {
                        (nf - (nf - 1.0) * q[i] - psi1[i]) / p.a[i]
                    }
                })
                .collect::<Vec<f64>>();
            scalar = (0..nn)
                .map(|i| ric_radial[i] + (nf - 1.0) * ric_transverse[i])
                .collect();
        }
        let all = [&scalar, &ric_radial, &ric_transverse, &b_rr, &b_rt, &b_tt, &b_tu];
        if all.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(GeometryError::DifferentiationFailure(grid.n_cells()));
        }
        Ok(CurvatureFields { n, scalar, ric_radial, ric_transverse, b_rr, b_rt, b_tt, b_tu })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Radial Ricci eigenvalue for any n (equals R when n = 1).
    pub fn ric_radial(&self) -> &[f64] {
        if self.n == 1 {
            &self.scalar
        } else {
            &self.ric_radial
        }
    }

    /// Transverse Ricci eigenvalue; for n = 1 (multiplicity zero) the
    /// weightless value 0 is returned at every node.
    pub fn ric_transverse_or_zero(&self, n_nodes: usize) -> Vec<f64> {
        if self.n == 1 {
            vec![0.0; n_nodes]
        } else {
            self.ric_transverse.clone()
        }
    }

    /// Minimum and maximum of the bisectional form on g-unit direction
    /// pairs, by a discretized sweep over the two mixing angles, the
    /// relative transverse alignment (aligned with either relative phase,
    /// or orthogonal), and the node index.
    pub fn bisectional_range(&self) -> (f64, f64) {
        let nn = self.scalar.len();
        if self.n == 1 {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &v in &self.b_rr {
                lo = lo.min(v);
                hi = hi.max(v);
            }
            return (lo, hi);
        }
        const N_ANGLE: usize = 48;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let trig: Vec<(f64, f64)> = (0..=N_ANGLE)
            .map(|i| {
                let t = i as f64 * (PI / 2.0) / N_ANGLE as f64;
                (t.cos(), t.sin())
            })
            .collect();
        for i in 0..nn {
            let (p, q2, r2, s2) = (self.b_rr[i], self.b_rt[i], self.b_tt[i], self.b_tu[i]);
            for &(ca, sa) in &trig {
                for &(cb, sb) in &trig {
                    let rad = ca * ca * cb * cb * p;
                    let mix = ca * ca * sb * sb + sa * sa * cb * cb;
                    let cross = 2.0 * ca * sa * cb * sb;
                    // Transverse parts aligned, relative phase 0 or pi.
                    for sgn in [1.0, -1.0] {
                        let f = rad + (mix + sgn * cross) * q2 + sa * sa * sb * sb * r2;
                        lo = lo.min(f);
                        hi = hi.max(f);
                    }
                    // Transverse parts orthogonal.
                    let f = rad + mix * q2 + sa * sa * sb * sb * s2;
                    lo = lo.min(f);
                    hi = hi.max(f);
                }
            }
        }
        (lo, hi)
    }
}

/// Convenience: curvature plus profile for downstream evaluation.
pub fn curvature_fields(p: &RadialProfile) -> Result<CurvatureFields, GeometryError> {
    p.curvature()
}
