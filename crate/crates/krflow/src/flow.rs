//! Normalized Kahler-Ricci flow and E_1-gradient flow on radial profiles.
//!
//! The integrator is an explicit adaptive Bogacki-Shampine 2(3) pair with a
//! parabolic stability cap on dt (order-2 cap for the Ricci flow, order-6
//! cap for the E_1 flow). The flow potential is advanced with the
//! volume-mean-projected right side: the raw Eq. 2.2 right side
//! `log(w_phi^n/w^n) + phi - h` has an unstable constant mode, and adding a
//! time-dependent constant to phi leaves the metric path and every energy
//! functional unchanged, so the projection fixes the additive gauge without
//! touching the geometry. The raw mean is reported as the `c_t` monitor.

use crate::error::FlowError;
use crate::functionals::{
    self, e0_k_prepared, j_integrand, FormEig,
};
use crate::geometry::{ClassData, CurvatureFields, RadialProfile};
use crate::grid::{linear_fit, max_abs};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Which evolution equation to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    Krf,
    E1Gradient,
}

/// A time-stamped state of the flow with cached geometry.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    pub phi: Vec<f64>,
    /// Projected right side at `t` (the actual d(phi)/dt of the path).
    pub phi_dot: Vec<f64>,
    /// Raw volume mean of the unprojected right side (the c(t) monitor).
    pub c_t: f64,
    pub profile: RadialProfile,
    pub curvature: CurvatureFields,
}

/// The centrally-positioned gauge of a state.
#[derive(Debug, Clone)]
pub struct GaugeState {
    pub lambda: f64,
    /// Kahler-Einstein-normalized pulled-back potential rho_lambda.
    pub rho: Vec<f64>,
    /// psi = phi - rho.
    pub psi: Vec<f64>,
    /// |central-position integral| at the fitted lambda.
    pub residual: f64,
}

/// One sampled time's full monitor set.
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub e0: Vec<f64>,
    pub j: Vec<f64>,
    pub e: Vec<f64>,
    pub l2_r: f64,
    pub cumulative_l2r: f64,
    pub c_t: f64,
    pub grad_phidot: f64,
    pub bisec_min: f64,
    pub bisec_max: f64,
    pub diameter: f64,
    pub lambda1: f64,
    pub liyau_margin: f64,
    pub c0_psi: f64,
    pub c2_min: f64,
    pub c2_max: f64,
    pub calabi_s: f64,
    pub pinch: f64,
    pub lemma35: f64,
    pub gauge_lambda: f64,
    pub gauge_residual: f64,
}

/// Why a run stopped.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    TFinal,
    Error(String),
}

/// Integration parameters (a validated subset of the run configuration).
#[derive(Debug, Clone)]
pub struct FlowParams {
    pub class: ClassData,
    pub n_cells: usize,
    pub kind: FlowKind,
    pub t_final: f64,
    pub sample_dt: f64,
    pub stop_tol: f64,
    pub c_cfl: f64,
    pub checkpoint_every: usize,
}

/// Output of a completed run.
#[derive(Debug)]
pub struct RunResult {
    pub records: Vec<DiagnosticsRecord>,
    pub checkpoints: Vec<(usize, String)>,
    pub termination: Termination,
    pub final_state: FlowState,
    /// Fitted decay rate of the grad_phidot series, when a fit is possible.
    pub alpha: Option<f64>,
    pub steps_taken: usize,
}

const MAX_REJECTIONS: usize = 20;

/// The flow driver: background data plus parameters.
pub struct Runner {
    base: RadialProfile,
    /// Ricci potential of the background (zero for the FS background; kept
    /// general so a non-FS base would work unchanged).
    h: Vec<f64>,
    params: FlowParams,
}

impl Runner {
    pub fn new(params: FlowParams) -> Result<Self, FlowError> {
        let base = RadialProfile::fubini_study(params.class.clone(), params.n_cells)
            .map_err(FlowError::from)?;
        let (h, _) = functionals::h_potential(&base);
        Ok(Runner { base, h, params })
    }

    pub fn base(&self) -> &RadialProfile {
        &self.base
    }

    /// Raw Eq. 2.2 right side `log(w_phi^n/w^n) + phi - h` for a state's
    /// profile (no projection, no differentiation of phi_dot).
    pub fn krf_rhs(&self, s: &FlowState, h: &[f64]) -> Vec<f64> {
        let lr = functionals::log_volume_ratio(&self.base, &s.profile);
        (0..lr.len()).map(|i| lr[i] + s.phi[i] - h[i]).collect()
    }

    /// E_1 gradient-flow right side: the descent direction
    /// `-(2 Lap_phi R - (n-1) sigma_2) - c_1`, with c_1 projecting out the
    /// w_phi-mean. (The directional derivative of E_1 along
    /// `+2 Lap_phi R - (n-1) sigma_2` is positive in this sign convention,
    /// so the descent flow integrates the negative of that expression.)
    pub fn e1_gradient_rhs(&self, s: &FlowState) -> Vec<f64> {
        let raw = self.e1_raw(&s.profile, &s.curvature);
        let mean = s.profile.mean(&raw);
        raw.iter().map(|v| v - mean).collect()
    }

    fn e1_raw(&self, p: &RadialProfile, c: &CurvatureFields) -> Vec<f64> {
        let n = self.params.class.n as f64;
        let lap_r = p.laplacian(&c.scalar);
        if self.params.class.n == 1 {
            lap_r.iter().map(|v| -2.0 * v).collect()
        } else {
            let sigma = functionals::sigma_profile(c, p);
            (0..lap_r.len())
                .map(|i| -(2.0 * lap_r[i] - (n - 1.0) * sigma[2][i]))
                .collect()
        }
    }

    /// Builds a full state (profile, curvature, cached projected rhs) from a
    /// potential vector.
    pub fn make_state(&self, t: f64, phi: Vec<f64>) -> Result<FlowState, FlowError> {
        let profile = RadialProfile::from_u(self.params.class.clone(), self.params.n_cells, phi.clone())
            .map_err(FlowError::from)?;
        let curvature = profile.curvature().map_err(FlowError::from)?;
        let mut s = FlowState { t, phi, phi_dot: Vec::new(), c_t: 0.0, profile, curvature };
        let (dot, c_t) = self.projected_rhs(&s)?;
        s.phi_dot = dot;
        s.c_t = c_t;
        Ok(s)
    }

    fn projected_rhs(&self, s: &FlowState) -> Result<(Vec<f64>, f64), FlowError> {
        match self.params.kind {
            FlowKind::Krf => {
                let raw = self.krf_rhs(s, &self.h);
                let mean = s.profile.mean(&raw);
                Ok((raw.iter().map(|v| v - mean).collect(), mean * self.params.class.volume))
            }
            FlowKind::E1Gradient => {
                let raw = self.e1_raw(&s.profile, &s.curvature);
                let mean = s.profile.mean(&raw);
                Ok((raw.iter().map(|v| v - mean).collect(), mean * self.params.class.volume))
            }
        }
    }

    fn rhs_of_phi(&self, phi: &[f64]) -> Result<Vec<f64>, FlowError> {
        let profile = RadialProfile::from_u(self.params.class.clone(), self.params.n_cells, phi.to_vec())
            .map_err(FlowError::from)?;
        let curvature = profile.curvature().map_err(FlowError::from)?;
        match self.params.kind {
            FlowKind::Krf => {
                let lr = functionals::log_volume_ratio(&self.base, &profile);
                let raw: Vec<f64> =
                    (0..lr.len()).map(|i| lr[i] + phi[i] - self.h[i]).collect();
                let mean = profile.mean(&raw);
                Ok(raw.iter().map(|v| v - mean).collect())
            }
            FlowKind::E1Gradient => {
                let raw = self.e1_raw(&profile, &curvature);
                let mean = profile.mean(&raw);
                Ok(raw.iter().map(|v| v - mean).collect())
            }
        }
    }

    /// Parabolic stability cap on dt for the current state.
    pub fn dt_cap(&self, s: &FlowState) -> f64 {
        let grid = s.profile.grid();
        let h = grid.h();
        let y = grid.y();
        match self.params.kind {
            FlowKind::Krf => {
                // Diffusion coefficient of phi_yy in the linearized flow:
                // y(1-y)/a_y.
                let mut d = 0.0_f64;
                for i in 0..grid.n_nodes() {
                    d = d.max(y[i] * (1.0 - y[i]) / s.profile.a_y()[i]);
                }
                self.params.c_cfl * h * h / (4.0 * d.max(1e-300))
            }
            FlowKind::E1Gradient => {
                // Sixth-order coefficient estimate 2 (n+1) (y(1-y))^3 / a_y^3.
                let np1 = self.params.class.n as f64 + 1.0;
                let mut d = 0.0_f64;
                for i in 0..grid.n_nodes() {
                    let w = y[i] * (1.0 - y[i]);
                    d = d.max(2.0 * np1 * w * w * w / s.profile.a_y()[i].powi(3));
                }
                self.params.c_cfl * h.powi(6) / (64.0 * d.max(1e-300))
            }
        }
    }

    /// One accepted step of at most `dt`, with halving on rejection (error
    /// control or invariant violation), up to the rejection limit. Returns
    /// the new state, the dt actually taken, and a suggested next dt.
    pub fn step(&self, s: &FlowState, dt: f64) -> Result<(FlowState, f64, f64), FlowError> {
        let tol = 1e-9 + 1e-9 * max_abs(&s.phi);
        let mut dt = dt.min(self.dt_cap(s));
        for _rejection in 0..MAX_REJECTIONS {
            match self.attempt_bs23(s, dt) {
                Ok((state, err)) if err <= tol => {
                    let grow = if err > 0.0 { 0.9 * (tol / err).powf(1.0 / 3.0) } else { 2.0 };
                    let dt_next = dt * grow.clamp(0.3, 2.0);
                    return Ok((state, dt, dt_next));
                }
                Ok(_) | Err(_) => {
                    dt *= 0.5;
                }
            }
        }
        Err(FlowError::StepRejectionLimit { rejections: MAX_REJECTIONS, t: s.t })
    }

    /// Bogacki-Shampine 2(3) attempt; returns the candidate state and the
    /// embedded local error estimate (infinity norm).
    fn attempt_bs23(&self, s: &FlowState, dt: f64) -> Result<(FlowState, f64), FlowError> {
        let nn = s.phi.len();
        let k1 = &s.phi_dot;
        let y2: Vec<f64> = (0..nn).map(|i| s.phi[i] + 0.5 * dt * k1[i]).collect();
        let k2 = self.rhs_of_phi(&y2)?;
        let y3: Vec<f64> = (0..nn).map(|i| s.phi[i] + 0.75 * dt * k2[i]).collect();
        let k3 = self.rhs_of_phi(&y3)?;
        let y_new: Vec<f64> = (0..nn)
            .map(|i| s.phi[i] + dt * (2.0 * k1[i] + 3.0 * k2[i] + 4.0 * k3[i]) / 9.0)
            .collect();
        let state = self.make_state(s.t + dt, y_new)?;
        let k4 = &state.phi_dot;
        let mut err = 0.0_f64;
        for i in 0..nn {
            let e = dt * (-5.0 * k1[i] / 72.0 + k2[i] / 12.0 + k3[i] / 9.0 - k4[i] / 8.0);
            err = err.max(e.abs());
        }
        Ok((state, err))
    }

    /// Fits the centrally-positioned gauge: finds lambda with
    /// `\int (phi - rho_lambda) theta_lambda w_rho^n = 0`.
    pub fn gauge_fit(&self, s: &FlowState) -> Result<GaugeState, FlowError> {
        let residual_fn = |lambda: f64| self.central_position_integral(&s.phi, lambda);
        let mut lo = -2.0;
        let mut hi = 2.0;
        let mut flo = residual_fn(lo);
        let mut fhi = residual_fn(hi);
        if flo * fhi > 0.0 {
            lo = -8.0;
            hi = 8.0;
            flo = residual_fn(lo);
            fhi = residual_fn(hi);
            if flo * fhi > 0.0 {
                return Err(FlowError::RootNotBracketed { lo, hi });
            }
        }
        // Bisection; the integrand is smooth and monotone in lambda.
        let mut mid = 0.5 * (lo + hi);
        for _ in 0..200 {
            mid = 0.5 * (lo + hi);
            let fm = residual_fn(mid);
            // Run essentially to the floating-point floor: near convergence
            // the residual tolerance is far below 1e-15 * |f'|.
            if fm == 0.0 || hi - lo < 1e-60 {
                break;
            }
            if flo * fm <= 0.0 {
                hi = mid;
                fhi = fm;
            } else {
                lo = mid;
                flo = fm;
            }
        }
        let _ = fhi;
        let lambda = mid;
        let rho = self.rho_lambda(lambda);
        let psi: Vec<f64> = s.phi.iter().zip(&rho).map(|(p, r)| p - r).collect();
        Ok(GaugeState { lambda, rho, psi, residual: residual_fn(lambda).abs() })
    }

    /// KE-normalized gauge potential `rho_lambda = (n+1) log(1-y+e^l y) - n l`.
    pub fn rho_lambda(&self, lambda: f64) -> Vec<f64> {
        let np1 = self.params.class.class_scale;
        let n = self.params.class.n as f64;
        self.base
            .grid()
            .y()
            .iter()
            .map(|&y| np1 * (1.0 - y + lambda.exp() * y).ln() - n * lambda)
            .collect()
    }

    /// `\int (phi - rho_l)(a_rho - n) w_rho^n` in closed-form densities.
    fn central_position_integral(&self, phi: &[f64], lambda: f64) -> f64 {
        let grid = self.base.grid();
        let class = &self.params.class;
        let np1 = class.class_scale;
        let n = class.n as f64;
        let el = lambda.exp();
        let rho = self.rho_lambda(lambda);
        let density: Vec<f64> = grid
            .y()
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                let dd = 1.0 - y + el * y;
                let a_rho = np1 * el * y / dd;
                let ay_rho = np1 * el / (dd * dd);
                (phi[i] - rho[i]) * (a_rho - n) * a_rho.powi(class.n as i32 - 1) * ay_rho
            })
            .collect();
        class.vol_coeff() * grid.integral(&density)
    }

    /// `n + Lap_rho(psi)` on the grid (the Theorem 6.1 C^2 quantity,
    /// the trace of w_phi against w_rho).
    pub fn c2_quantity(&self, g: &GaugeState) -> Vec<f64> {
        let grid = self.base.grid();
        let class = &self.params.class;
        let np1 = class.class_scale;
        let n = class.n as f64;
        let el = g.lambda.exp();
        let psi_y = grid.deriv(&g.psi);
        let w: Vec<f64> = grid
            .y()
            .iter()
            .enumerate()
            .map(|(i, &y)| y * (1.0 - y) * psi_y[i])
            .collect();
        let w_y = grid.deriv(&w);
        grid.y()
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                let dd = 1.0 - y + el * y;
                let a1_rho = np1 * el / dd;
                let ay_rho = np1 * el / (dd * dd);
                n + w_y[i] / ay_rho + (n - 1.0) * (1.0 - y) * psi_y[i] / a1_rho
            })
            .collect()
    }

    /// Max over nodes of the radial Calabi quantity
    /// `S = (psi_sss - psi_ss)^2 / b^3 + 2 (n-1)(psi_ss - psi_s)^2 / (a^2 b)`
    /// evaluated with the metric of `s` and the gauge-relative psi.
    pub fn calabi_s(&self, s: &FlowState, g: &GaugeState) -> f64 {
        let grid = self.base.grid();
        let y = grid.y();
        let nn = grid.n_nodes();
        let n = self.params.class.n as f64;
        let ds = |f: &[f64]| -> Vec<f64> {
            let fy = grid.deriv(f);
            (0..nn).map(|i| y[i] * (1.0 - y[i]) * fy[i]).collect()
        };
        let p1 = ds(&g.psi);
        let p2 = ds(&p1);
        let p3 = ds(&p2);
        let mut smax = 0.0_f64;
        for i in 1..nn - 1 {
            let a = s.profile.a()[i];
            let b = s.profile.b()[i];
            let v = (p3[i] - p2[i]).powi(2) / b.powi(3)
                + 2.0 * (n - 1.0) * (p2[i] - p1[i]).powi(2) / (a * a * b);
            smax = smax.max(v);
        }
        smax
    }

    /// Evaluates the full monitor set at a sample. `j_acc` holds the
    /// per-k trapezoid accumulation of the J_k time integrand up to this
    /// sample and `cumulative_l2r` the accumulated L2 curvature integral.
    #[allow(clippy::too_many_arguments)]
    pub fn monitors(
        &self,
        s: &FlowState,
        g: &GaugeState,
        j_acc: &[f64],
        cumulative_l2r: f64,
    ) -> Result<DiagnosticsRecord, FlowError> {
        let class = &self.params.class;
        let n = class.n;
        let vol = class.volume;
        let mut e0 = Vec::with_capacity(n + 1);
        for k in 0..=n {
            e0.push(e0_k_prepared(&self.base, &s.profile, k).map_err(FlowError::from)?);
        }
        let j = j_acc.to_vec();
        let e: Vec<f64> = (0..=n).map(|k| e0[k] - j[k]).collect();

        let r_mean = s.profile.mean(&s.curvature.scalar);
        let dev: Vec<f64> = s.curvature.scalar.iter().map(|r| (r - r_mean).powi(2)).collect();
        let l2_r = s.profile.integrate(&dev) / vol;

        let grad = s.profile.grad_sq(&s.phi_dot);
        let grad_phidot = s.profile.integrate(&grad);

        let (bisec_min, bisec_max) = s.curvature.bisectional_range();
        let diameter = s.profile.diameter();
        let lambda1 = s.profile.lambda1_radial().map_err(FlowError::from)?;
        let liyau_margin = lambda1 - PI * PI / (4.0 * diameter * diameter);

        let c2 = self.c2_quantity(g);
        let c2_min = c2.iter().cloned().fold(f64::INFINITY, f64::min);
        let c2_max = c2.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

        let pinch = functionals::pinching_deviation(&s.curvature, 1.0 / (n as f64 + 1.0));
        let lemma35 = functionals::lemma35_residual(&s.profile);

        Ok(DiagnosticsRecord {
            t: s.t,
            e0,
            j,
            e,
            l2_r,
            cumulative_l2r,
            c_t: s.c_t,
            grad_phidot,
            bisec_min,
            bisec_max,
            diameter,
            lambda1,
            liyau_margin,
            c0_psi: max_abs(&g.psi),
            c2_min,
            c2_max,
            calabi_s: self.calabi_s(s, g),
            pinch: pinch.deviation,
            lemma35,
            gauge_lambda: g.lambda,
            gauge_residual: g.residual,
        })
    }

    /// Integrates from `phi0` to t_final or convergence, sampling the
    /// diagnostics every `sample_dt`.
    ///
    /// Errors while constructing the initial state are returned directly;
    /// failures later in the run terminate it with `Termination::Error` and
    /// the records sampled so far, so partial output can still be flushed.
    pub fn run(&self, phi0: Vec<f64>) -> Result<RunResult, FlowError> {
        let n = self.params.class.n;
        let mut state = self.make_state(0.0, phi0)?;
        let mut records = Vec::new();
        let mut checkpoints = Vec::new();
        let mut j_acc = vec![0.0; n + 1];
        let mut cumulative_l2r = 0.0;
        let mut prev_j_integrands = self.j_integrands(&state)?;
        let mut prev_l2r: Option<f64> = None;
        let mut dt = self.dt_cap(&state) * 1e-3;
        let mut steps = 0usize;
        let mut sample_index = 0usize;

        let termination = 'run: loop {
            // Sample the diagnostics at the current time.
            let record = match self
                .gauge_fit(&state)
                .and_then(|gauge| self.monitors(&state, &gauge, &j_acc, cumulative_l2r))
            {
                Ok(r) => r,
                Err(e) => break 'run Termination::Error(e.to_string()),
            };
            let grad = record.grad_phidot;
            if self.params.checkpoint_every > 0 && sample_index % self.params.checkpoint_every == 0 {
                checkpoints.push((sample_index, state.profile.to_text()));
            }
            records.push(record);
            if grad < self.params.stop_tol {
                break 'run Termination::Converged;
            }
            if state.t >= self.params.t_final - 1e-14 {
                break 'run Termination::TFinal;
            }

            // Advance to the next sample time.
            let t_target = (state.t + self.params.sample_dt).min(self.params.t_final);
            while state.t < t_target - 1e-14 {
                let dt_clip = dt.min(t_target - state.t);
                let (new_state, _taken, dt_next) = match self.step(&state, dt_clip) {
                    Ok(v) => v,
                    Err(e) => break 'run Termination::Error(e.to_string()),
                };
                // Trapezoid accumulation of the J_k integrands and the L2
                // curvature integral along the actual step sequence.
                let new_j = match self.j_integrands(&new_state) {
                    Ok(v) => v,
                    Err(e) => break 'run Termination::Error(e.to_string()),
                };
                let dt_done = new_state.t - state.t;
                for k in 0..=n {
                    j_acc[k] += 0.5 * (prev_j_integrands[k] + new_j[k]) * dt_done;
                }
                let r_mean = new_state.profile.mean(&new_state.curvature.scalar);
                let devs: Vec<f64> = new_state
                    .curvature
                    .scalar
                    .iter()
                    .map(|r| (r - r_mean).powi(2))
                    .collect();
                let l2_now = new_state.profile.integrate(&devs) / self.params.class.volume;
                if let Some(l2_prev) = prev_l2r {
                    cumulative_l2r += 0.5 * (l2_prev + l2_now) * dt_done;
                } else {
                    // First step: approximate the initial trapezoid with the
                    // current value (the record at t=0 holds cumulative 0).
                    cumulative_l2r += l2_now * dt_done;
                }
                prev_l2r = Some(l2_now);
                prev_j_integrands = new_j;
                state = new_state;
                dt = dt_next;
                steps += 1;
            }
            sample_index += 1;
        };

        // Decay-rate fit on the final third of the grad_phidot series.
        let series: Vec<(f64, f64)> = records.iter().map(|r| (r.t, r.grad_phidot)).collect();
        let alpha = exp_fit(&series).ok();

        Ok(RunResult { records, checkpoints, termination, final_state: state, alpha, steps_taken: steps })
    }

    fn j_integrands(&self, s: &FlowState) -> Result<Vec<f64>, FlowError> {
        let n = self.params.class.n;
        let mut out = Vec::with_capacity(n + 1);
        for k in 0..=n {
            out.push(j_integrand(&self.base, &s.profile, &s.phi_dot, k).map_err(FlowError::from)?);
        }
        Ok(out)
    }
}

/// Least-squares exponential decay rate over the final third of a series:
/// slope of -log(value) against t. Requires >= 10 samples in the tail and
/// positive values.
pub fn exp_fit(series: &[(f64, f64)]) -> Result<f64, FlowError> {
    let start = series.len() * 2 / 3;
    let tail = &series[start..];
    if tail.len() < 10 {
        return Err(FlowError::InsufficientTail(tail.len()));
    }
    if tail.iter().any(|&(_, v)| v <= 0.0) {
        return Err(FlowError::InsufficientTail(0));
    }
    let ts: Vec<f64> = tail.iter().map(|&(t, _)| t).collect();
    let logs: Vec<f64> = tail.iter().map(|&(_, v)| v.ln()).collect();
    let (slope, _) = linear_fit(&ts, &logs);
    Ok(-slope)
}

/// Convenience constructor for test and acceptance runs.
pub fn standard_params(n: usize, ell: u32, n_cells: usize, kind: FlowKind) -> FlowParams {
    FlowParams {
        class: ClassData::new(n, ell),
        n_cells,
        kind,
        t_final: 10.0,
        sample_dt: 0.02,
        stop_tol: 1e-12,
        c_cfl: 0.2,
        checkpoint_every: 0,
    }
}

// A FormEig import is used only by tests below; silence the lint otherwise.
const _: fn(&RadialProfile) -> FormEig = FormEig::omega;
