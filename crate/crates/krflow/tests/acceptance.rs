//! Acceptance suite: one test per criterion, each printing a single
//! `criterion NN <name>: PASS`/`FAIL` line (run with `--nocapture` to see
//! the lines as they complete). Expensive flow runs are shared between
//! criteria through lazily-initialized statics.

use krflow::flow::{standard_params, FlowKind, Runner, RunResult};
use krflow::functionals::{dek_dt_rhs, futaki_like_invariant, j_k_path, lemma35_residual, PathSample};
use krflow::geometry::{ClassData, RadialProfile};
use krflow::oracle::{oracle_curvature_at, radial_potential, PointChart};
use nalgebra::Complex;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::f64::consts::PI;
use std::sync::LazyLock;

type C64 = Complex<f64>;

// ------------------------------------------------------------- reporting

struct Criterion {
    label: &'static str,
    failures: Vec<String>,
}

impl Criterion {
    fn new(label: &'static str) -> Self {
        Criterion { label, failures: Vec::new() }
    }

    fn check(&mut self, cond: bool, msg: impl FnOnce() -> String) {
        if !cond {
            self.failures.push(msg());
        }
    }

    fn finish(self) {
        if self.failures.is_empty() {
            println!("criterion {}: PASS", self.label);
        } else {
            println!("criterion {}: FAIL", self.label);
            for f in &self.failures {
                println!("    {f}");
            }
            panic!("criterion {} failed:\n{}", self.label, self.failures.join("\n"));
        }
    }
}

// ------------------------------------------------------- shared fixtures

/// Seeded small random initial potential on modes 1..=2 (positive-curvature
/// starts for the monotonicity criteria).
fn seeded_phi0(grid_y: &[f64], seed: u64, amplitude: f64) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let c1: f64 = rng.gen_range(-1.0..1.0);
    let c2: f64 = rng.gen_range(-1.0..1.0);
    grid_y
        .iter()
        .map(|&y| amplitude * (c1 * (PI * y).sin() + c2 * (2.0 * PI * y).sin()))
        .collect()
}

fn convergence_run(n: usize, ell: u32) -> RunResult {
    let params = standard_params(n, ell, 128, FlowKind::Krf);
    let r = Runner::new(params).expect("runner");
    let phi0 = seeded_phi0(r.base().grid().y(), 11 + n as u64, 0.02);
    r.run(phi0).expect("convergence run")
}

fn short_run(n: usize, seed: u64) -> RunResult {
    let mut params = standard_params(n, 1, 128, FlowKind::Krf);
    params.t_final = 0.2;
    params.sample_dt = 0.02;
    params.checkpoint_every = 1;
    let r = Runner::new(params).expect("runner");
    let phi0 = seeded_phi0(r.base().grid().y(), seed, 0.02);
    r.run(phi0).expect("short run")
}

static CONV_N1: LazyLock<RunResult> = LazyLock::new(|| convergence_run(1, 1));
static CONV_N2: LazyLock<RunResult> = LazyLock::new(|| convergence_run(2, 1));
static FOOTBALL: LazyLock<RunResult> = LazyLock::new(|| convergence_run(1, 2));
/// (n, seed) -> short run; 5 seeds each for n = 1, 2.
static SHORT_RUNS: LazyLock<Vec<(usize, u64, RunResult)>> = LazyLock::new(|| {
    let mut v = Vec::new();
    for n in [1usize, 2] {
        for seed in 1..=5u64 {
            v.push((n, seed, short_run(n, seed)));
        }
    }
    v
});

/// Rebuilds the state sequence of a run from its per-sample checkpoints.
fn checkpoint_states(n: usize, run: &RunResult) -> (Runner, Vec<krflow::flow::FlowState>) {
    let params = standard_params(n, 1, 128, FlowKind::Krf);
    let r = Runner::new(params).expect("runner");
    let states = run
        .checkpoints
        .iter()
        .map(|(idx, text)| {
            let p = RadialProfile::from_text(text).expect("checkpoint profile");
            let t = run.records[*idx].t;
            r.make_state(t, p.u().to_vec()).expect("state")
        })
        .collect();
    (r, states)
}

// ------------------------------------------------------------- criteria

#[test]
fn criterion_01_fixed_point() {
    let mut c = Criterion::new("01 fixed-point");
    for n in 1..=3usize {
        let params = standard_params(n, 1, 128, FlowKind::Krf);
        let r = Runner::new(params).unwrap();
        let nn = r.base().grid().n_nodes();
        let mut s = r.make_state(0.0, vec![0.0; nn]).unwrap();
        let mut dt = r.dt_cap(&s) * 0.5;
        let mut worst = 0.0f64;
        for _ in 0..100 {
            worst = worst.max(s.phi_dot.iter().fold(0.0f64, |a, v| a.max(v.abs())));
            let (next, _taken, dt_next) = r.step(&s, dt).unwrap();
            s = next;
            dt = dt_next;
        }
        c.check(worst < 1e-7, || format!("n={n}: max|phi_dot| = {worst:.3e}"));
    }
    c.finish();
}

#[test]
fn criterion_02_oracle_equivalence() {
    let mut c = Criterion::new("02 oracle-equivalence");
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    for n in 1..=3usize {
        // The same closed-form u drives both the radial path and the oracle.
        let u = move |y: f64| 0.03 * (PI * y).sin() - 0.015 * (2.0 * PI * y).sin();
        let grid_u: Vec<f64> = RadialProfile::fubini_study(ClassData::new(n, 1), 256)
            .unwrap()
            .grid()
            .y()
            .iter()
            .map(|&y| u(y))
            .collect();
        let p = RadialProfile::from_u(ClassData::new(n, 1), 256, grid_u).unwrap();
        let fields = p.curvature().unwrap();
        let grid = p.grid();
        let ric_t_vec = fields.ric_transverse_or_zero(grid.n_nodes());
        let potential = radial_potential(n, u);
        for point_idx in 0..20 {
            let y: f64 = rng.gen_range(0.2..0.8);
            let radius = (y / (1.0 - y)).sqrt();
            // Random direction on the unit sphere of C^n.
            let mut v: Vec<C64> = (0..n)
                .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for z in &mut v {
                *z *= C64::new(radius / norm, 0.0);
            }
            let pt = PointChart::new(v.clone()).unwrap();
            let t = oracle_curvature_at(&potential, &pt, 0.012).unwrap();
            let rel = |a: f64, b: f64| (a - b).abs() / (b.abs() + 1e-12);
            let r_radial = grid.interp(&fields.scalar, y);
            c.check(rel(r_radial, t.scalar) < 1e-5, || {
                format!("n={n} pt{point_idx}: R radial {r_radial:.8e} vs oracle {:.8e}", t.scalar)
            });
            // Ricci eigenvalues of the endomorphism g^{-1} Ric along the
            // radial direction z and a transverse direction.
            let ginv = t.g.clone().try_inverse().unwrap();
            let endo = nalgebra::DMatrix::from_fn(n, n, |i, k| {
                (0..n).map(|j| ginv[(j, i)] * t.ric[(k, j)]).sum::<C64>()
            });
            let rayleigh = |w: &[C64]| -> f64 {
                let wv = nalgebra::DVector::from_vec(w.to_vec());
                let mw = &endo * &wv;
                let idx = (0..n)
                    .max_by(|&a, &b| w[a].norm_sqr().total_cmp(&w[b].norm_sqr()))
                    .unwrap();
                (mw[idx] / wv[idx]).re
            };
            let ric_rad_oracle = rayleigh(&v);
            let ric_rad_radial = grid.interp(fields.ric_radial(), y);
            c.check(rel(ric_rad_radial, ric_rad_oracle) < 1e-5, || {
                format!("n={n} pt{point_idx}: ric_r radial {ric_rad_radial:.8e} vs oracle {ric_rad_oracle:.8e}")
            });
            if n >= 2 {
                let mut w = vec![C64::new(0.0, 0.0); n];
                w[0] = -v[1].conj();
                w[1] = v[0].conj();
                let ric_t_oracle = rayleigh(&w);
                let ric_t_radial = grid.interp(&ric_t_vec, y);
                c.check(rel(ric_t_radial, ric_t_oracle) < 1e-5, || {
                    format!("n={n} pt{point_idx}: ric_t radial {ric_t_radial:.8e} vs oracle {ric_t_oracle:.8e}")
                });
            }
        }
    }
    c.finish();
}

#[test]
fn criterion_03_convention_audit() {
    let mut c = Criterion::new("03 convention-audit");
    for n in 1..=3usize {
        let p = RadialProfile::fubini_study(ClassData::new(n, 1), 128).unwrap();
        let fields = p.curvature().unwrap();
        let worst = fields
            .scalar
            .iter()
            .fold(0.0f64, |a, r| a.max((r - n as f64).abs()));
        c.check(worst < 1e-8, || format!("n={n}: max|R - n| = {worst:.3e}"));
        let l1 = p.lambda1_radial().unwrap();
        c.check((l1 - 1.0).abs() < 1e-4, || format!("n={n}: lambda1 = {l1}"));
    }
    c.finish();
}

#[test]
fn criterion_04_monotonicity() {
    let mut c = Criterion::new("04 monotonicity");
    for (n, seed, run) in SHORT_RUNS.iter() {
        for w in run.records.windows(2) {
            c.check(w[1].e[0] <= w[0].e[0] + 1e-8, || {
                format!("n={n} seed={seed}: E_0 rose at t={}", w[1].t)
            });
            c.check(w[1].e[1] <= w[0].e[1] + 1e-8, || {
                format!("n={n} seed={seed}: E_1 rose at t={}", w[1].t)
            });
        }
        // dE_1/dt <= -(2/(nV)) int (R - r)^2 + 1e-6 at every sample. The
        // factor 1/n (absent for n = 1, where equality holds) is what the
        // derivative formula yields away from the Fubini-Study limit; the
        // stronger constant without it is only attained at the fixed point.
        let (runner, states) = checkpoint_states(*n, run);
        for (s, rec) in states.iter().zip(&run.records) {
            let de1 = dek_dt_rhs(runner.base(), &s.profile, &s.phi_dot, 1).unwrap();
            let bound = -2.0 / *n as f64 * rec.l2_r + 1e-6;
            c.check(de1 <= bound, || {
                format!("n={n} seed={seed} t={}: dE1/dt = {de1:.3e} vs bound {bound:.3e}", rec.t)
            });
        }
    }
    c.finish();
}

#[test]
fn criterion_05_derivative_formula() {
    let mut c = Criterion::new("05 derivative-formula");
    for n in 1..=3usize {
        // A finer sample cadence than the standard runs so the centered
        // difference of E_k resolves the derivative to better than 1e-3.
        let mut params = standard_params(n, 1, 128, FlowKind::Krf);
        params.t_final = 0.05;
        params.sample_dt = 0.001;
        params.checkpoint_every = 1;
        let r = Runner::new(params).expect("runner");
        let phi0 = seeded_phi0(r.base().grid().y(), 31 + n as u64, 0.02);
        let run = r.run(phi0).expect("criterion-5 run");
        let (runner, states) = checkpoint_states(n, &run);
        let dt = run.records[1].t - run.records[0].t;
        for i in 1..run.records.len() - 1 {
            for k in 0..=n {
                let fd = (run.records[i + 1].e[k] - run.records[i - 1].e[k]) / (2.0 * dt);
                let rhs = dek_dt_rhs(runner.base(), &states[i].profile, &states[i].phi_dot, k).unwrap();
                let rel = (fd - rhs).abs() / (rhs.abs() + 1e-12);
                c.check(rel < 1e-3, || {
                    format!("n={n} k={k} t={}: FD {fd:.6e} vs rhs {rhs:.6e} (rel {rel:.2e})", run.records[i].t)
                });
            }
        }
    }
    c.finish();
}

#[test]
fn criterion_06_invariants() {
    let mut c = Criterion::new("06 invariants");
    for n in 1..=3usize {
        let class = ClassData::new(n, 1);
        let scale = 1e-6 * class.volume * class.class_scale.powi(n as i32);
        let profiles = [
            RadialProfile::fubini_study(class.clone(), 128).unwrap(),
            RadialProfile::perturbed(class.clone(), 128, 0.05, &[(1, 1.0)]).unwrap(),
            RadialProfile::perturbed(class.clone(), 128, 0.03, &[(2, 1.0), (3, 0.5)]).unwrap(),
        ];
        for k in 0..=n {
            let vals: Vec<f64> = profiles
                .iter()
                .map(|p| futaki_like_invariant(p, k).unwrap())
                .collect();
            let spread = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - vals.iter().cloned().fold(f64::INFINITY, f64::min);
            c.check(spread < scale, || format!("n={n} k={k}: spread {spread:.3e} vs {scale:.3e}"));
            for (i, v) in vals.iter().enumerate() {
                c.check(v.abs() < scale, || {
                    format!("n={n} k={k} metric {i}: |I_k| = {:.3e} vs {scale:.3e}", v.abs())
                });
            }
        }
    }
    c.finish();
}

#[test]
fn criterion_07_lemma35() {
    let mut c = Criterion::new("07 lemma-3.5");
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    for n in 1..=3usize {
        for trial in 0..10 {
            let amp: f64 = rng.gen_range(0.005..0.05);
            let c1: f64 = rng.gen_range(-1.0..1.0);
            let c2: f64 = rng.gen_range(-1.0..1.0);
            let p = RadialProfile::perturbed(ClassData::new(n, 1), 128, amp, &[(1, c1), (2, c2)])
                .unwrap();
            let res = lemma35_residual(&p);
            c.check(res < 1e-6, || format!("n={n} trial {trial}: residual {res:.3e}"));
        }
    }
    c.finish();
}

#[test]
fn criterion_08_jk_path_independence() {
    let mut c = Criterion::new("08 J_k path-independence");
    // One flow path on n = 1; three endpoints cut from it.
    let mut params = standard_params(1, 1, 128, FlowKind::Krf);
    params.t_final = 0.15;
    let r = Runner::new(params).unwrap();
    let phi0 = seeded_phi0(r.base().grid().y(), 8, 0.02);
    let mut s = r.make_state(0.0, phi0).unwrap();
    let mut dt = r.dt_cap(&s) * 1e-3;
    let mut path = vec![PathSample { t: 0.0, phi: s.phi.clone(), phi_dot: s.phi_dot.clone() }];
    let targets = [0.05f64, 0.10, 0.15];
    let mut cuts: Vec<usize> = Vec::new();
    for &target in &targets {
        while s.t < target - 1e-14 {
            let dt_clip = dt.min(target - s.t);
            let (next, _taken, dt_next) = r.step(&s, dt_clip).unwrap();
            s = next;
            dt = dt_next;
            path.push(PathSample { t: s.t, phi: s.phi.clone(), phi_dot: s.phi_dot.clone() });
        }
        cuts.push(path.len());
    }
    let m = 8000;
    let straight_to = |target: &[f64]| -> Vec<PathSample> {
        (0..=m)
            .map(|i| {
                let t = i as f64 / m as f64;
                PathSample {
                    t,
                    phi: target.iter().map(|v| t * v).collect(),
                    phi_dot: target.to_vec(),
                }
            })
            .collect()
    };
    // The flow path starts at phi0, so prepend the straight leg 0 -> phi0
    // before comparing against the straight path 0 -> phi_end.
    let leg0 = straight_to(&path[0].phi);
    for (e_idx, &cut) in cuts.iter().enumerate() {
        let flow_path = &path[..cut];
        let phi_end = flow_path.last().unwrap().phi.clone();
        let straight = straight_to(&phi_end);
        for k in 0..=1usize {
            let jf = j_k_path(r.base(), &leg0, k).unwrap() + j_k_path(r.base(), flow_path, k).unwrap();
            let js = j_k_path(r.base(), &straight, k).unwrap();
            let rel = (jf - js).abs() / jf.abs().max(js.abs()).max(1e-12);
            c.check(rel < 1e-6, || {
                format!("endpoint {e_idx} k={k}: flow {jf:.8e} vs straight {js:.8e} (rel {rel:.2e})")
            });
        }
    }
    c.finish();
}

#[test]
fn criterion_09_positivity_preservation() {
    let mut c = Criterion::new("09 positivity-preservation");
    for (n, seed, run) in SHORT_RUNS.iter() {
        c.check(run.records[0].bisec_min > 0.0, || {
            format!("n={n} seed={seed}: start not positively curved ({})", run.records[0].bisec_min)
        });
        for rec in &run.records {
            c.check(rec.bisec_min > -1e-8, || {
                format!("n={n} seed={seed} t={}: bisec_min = {:.3e}", rec.t, rec.bisec_min)
            });
        }
    }
    for (label, run) in [("conv n=1", &*CONV_N1), ("conv n=2", &*CONV_N2)] {
        for rec in &run.records {
            c.check(rec.bisec_min > -1e-8, || {
                format!("{label} t={}: bisec_min = {:.3e}", rec.t, rec.bisec_min)
            });
        }
    }
    c.finish();
}

#[test]
fn criterion_10_li_yau() {
    let mut c = Criterion::new("10 li-yau");
    for (n, seed, run) in SHORT_RUNS.iter() {
        for rec in &run.records {
            c.check(rec.liyau_margin >= 0.0, || {
                format!("n={n} seed={seed} t={}: margin {:.3e}", rec.t, rec.liyau_margin)
            });
        }
    }
    for (label, run) in [("conv n=1", &*CONV_N1), ("conv n=2", &*CONV_N2), ("football", &*FOOTBALL)] {
        for rec in &run.records {
            c.check(rec.liyau_margin >= 0.0, || {
                format!("{label} t={}: margin {:.3e}", rec.t, rec.liyau_margin)
            });
        }
    }
    c.finish();
}

#[test]
fn criterion_11_convergence() {
    let mut c = Criterion::new("11 convergence");
    for (label, run) in [("n=1", &*CONV_N1), ("n=2", &*CONV_N2)] {
        let last = run.records.last().unwrap();
        c.check(last.l2_r < 1e-6, || format!("{label}: final (1/V)int(R-r)^2 = {:.3e}", last.l2_r));
        match run.alpha {
            Some(a) => c.check(a > 0.0, || format!("{label}: fitted alpha = {a:.3e}")),
            None => c.check(false, || format!("{label}: no alpha fit")),
        }
        c.check(last.pinch < 1e-3, || format!("{label}: final pinching deviation {:.3e}", last.pinch));
        // cumulative_L2R plateaus: last decade of samples adds < 1% of total.
        let total = last.cumulative_l2r;
        let decade_start = run.records.len() - run.records.len() / 10 - 1;
        let tail = total - run.records[decade_start].cumulative_l2r;
        c.check(tail < 0.01 * total, || {
            format!("{label}: last-decade cumulative_L2R increase {tail:.3e} of total {total:.3e}")
        });
    }
    c.finish();
}

#[test]
fn criterion_12_gauge() {
    let mut c = Criterion::new("12 gauge");
    for (label, run) in [("conv n=1", &*CONV_N1), ("conv n=2", &*CONV_N2)] {
        let vol = run.final_state.profile.class().volume;
        let mut sup_psi = 0.0f64;
        let mut sup_at = 0usize;
        for (i, rec) in run.records.iter().enumerate() {
            c.check(rec.gauge_residual < 1e-10 * vol * rec.c0_psi.max(1e-14), || {
                format!(
                    "{label} t={}: gauge residual {:.3e} vs {:.3e}",
                    rec.t,
                    rec.gauge_residual,
                    1e-10 * vol * rec.c0_psi
                )
            });
            c.check(rec.c2_min > 0.0, || {
                format!("{label} t={}: C2 min = {:.3e}", rec.t, rec.c2_min)
            });
            if rec.c0_psi > sup_psi {
                sup_psi = rec.c0_psi;
                sup_at = i;
            }
        }
        let cutoff = run.records.len() - run.records.len() / 10;
        let shrinking = run
            .records
            .windows(2)
            .all(|w| w[1].c0_psi <= w[0].c0_psi + 1e-12);
        c.check(sup_at < cutoff || shrinking, || {
            format!("{label}: sup|psi| attained at sample {sup_at} of {}", run.records.len())
        });
    }
    c.finish();
}

#[test]
fn criterion_13_orbifold() {
    let mut c = Criterion::new("13 orbifold-football");
    let run = &*FOOTBALL;
    let last = run.records.last().unwrap();
    c.check(last.grad_phidot < 1e-6, || {
        format!("football: final grad {:.3e}", last.grad_phidot)
    });
    c.check(last.pinch < 1e-3, || format!("football: final pinching deviation {:.3e}", last.pinch));
    c.finish();
}

#[test]
fn criterion_14_e1_gradient_flow() {
    let mut c = Criterion::new("14 E1-gradient-flow");
    // FS stationarity per step.
    let params = standard_params(1, 1, 32, FlowKind::E1Gradient);
    let r = Runner::new(params).unwrap();
    let nn = r.base().grid().n_nodes();
    let mut s = r.make_state(0.0, vec![0.0; nn]).unwrap();
    let mut dt = r.dt_cap(&s) * 0.5;
    for _ in 0..50 {
        let before = s.phi.clone();
        let (next, _taken, dt_next) = r.step(&s, dt).unwrap();
        let moved = next
            .phi
            .iter()
            .zip(&before)
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        c.check(moved < 1e-10, || format!("FS moved {moved:.3e} in one E1-flow step"));
        s = next;
        dt = dt_next;
    }
    // Short descent run from a small perturbation.
    let mut params = standard_params(1, 1, 32, FlowKind::E1Gradient);
    params.t_final = 2e-7;
    params.sample_dt = 2e-8;
    let r = Runner::new(params).unwrap();
    let phi0: Vec<f64> = r.base().grid().y().iter().map(|&y| 0.05 * (PI * y).sin()).collect();
    let res = r.run(phi0).unwrap();
    c.check(res.records.len() >= 5, || format!("only {} samples", res.records.len()));
    for w in res.records.windows(2) {
        c.check(w[1].e[1] <= w[0].e[1] + 1e-8, || {
            format!("E_1 rose at t={:.3e}", w[1].t)
        });
    }
    let first = res.records.first().unwrap().e[1];
    let last = res.records.last().unwrap().e[1];
    c.check(last < first, || format!("E_1 did not decrease: {first:.6e} -> {last:.6e}"));
    c.finish();
}

#[test]
fn criterion_15_determinism() {
    let mut c = Criterion::new("15 determinism");
    let dir = tempfile::tempdir().unwrap();
    let mut digests = Vec::new();
    for rep in 0..2 {
        let out = dir.path().join(format!("rep{rep}"));
        let toml_text = format!(
            r#"
n = 1
N = 64
flow_kind = "krf"
t_final = 0.05
sample_dt = 0.01
seed = 7
output_dir = "{}"

[initial]
kind = "random"
amplitude = 0.01
"#,
            out.display()
        );
        let cfg = krflow::config::RunConfig::from_toml(&toml_text).unwrap();
        cfg.validate().unwrap();
        krflow::run::execute(&cfg).unwrap();
        let (manifest, mismatches) = krflow::output::verify_manifest(&out).unwrap();
        c.check(mismatches.is_empty(), || format!("rep {rep}: digest mismatches {mismatches:?}"));
        let csv = manifest
            .files
            .iter()
            .find(|f| f.name == "diagnostics.csv")
            .map(|f| f.sha256.clone())
            .unwrap_or_default();
        digests.push(csv);
    }
    c.check(!digests[0].is_empty() && digests[0] == digests[1], || {
        format!("digests differ: {} vs {}", digests[0], digests[1])
    });
    c.finish();
}
