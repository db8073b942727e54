//! Independent full-coordinate tensor oracle.
//!
//! Evaluates the metric, curvature tensor, Ricci tensor, scalar curvature,
//! volume density, and the sigma_k expansion at arbitrary points of the
//! affine chart C^n of CP^n, by nested real finite differences of a global
//! Kahler potential combined into Wirtinger derivatives. Deliberately slow
//! and straightforward: this module is the ground truth against which the
//! fast radial path is validated, and it never runs inside flow steps.
//!
//! All stencils are fourth order; every public operation performs a
//! two-scale self-test (step h against 2h) and fails loudly when the
//! results disagree beyond the conditioning limit.

use crate::error::OracleError;
use nalgebra::{Complex, DMatrix};

type C64 = Complex<f64>;

/// A point in the affine chart, restricted to the conditioning band
/// `1e-3 <= |z| <= 1e3`.
#[derive(Debug, Clone)]
pub struct PointChart {
    z: Vec<C64>,
}

impl PointChart {
    pub fn new(z: Vec<C64>) -> Result<Self, OracleError> {
        let norm = z.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if !(1e-3..=1e3).contains(&norm) {
            return Err(OracleError::PointOutOfChart(format!("|z| = {norm:.3e}")));
        }
        Ok(PointChart { z })
    }

    pub fn z(&self) -> &[C64] {
        &self.z
    }

    fn coords(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(2 * self.z.len());
        for v in &self.z {
            x.push(v.re);
            x.push(v.im);
        }
        x
    }
}

/// Oracle output. `riem` is stored flat with index `((i n + j) n + k) n + l`
/// for the component `R_{i jbar k lbar}`; it is empty for metric-only
/// evaluation, as are `ric`, `ric_logdet`.
#[derive(Debug, Clone)]
pub struct OracleTensor {
    pub n: usize,
    /// Metric components g_{i jbar} as the matrix entry (i, j).
    pub g: DMatrix<C64>,
    /// Volume density det g.
    pub vol: f64,
    /// Curvature tensor components (empty unless full evaluation).
    pub riem: Vec<C64>,
    /// Ricci from the curvature contraction g^{k lbar} R_{i jbar k lbar}.
    pub ric: DMatrix<C64>,
    /// Ricci recomputed independently as -dd(log det g).
    pub ric_logdet: DMatrix<C64>,
    /// Scalar curvature.
    pub scalar: f64,
    /// Two-scale self-test residual (max component difference, h vs 2h).
    pub residual: f64,
}

/// Flat index of `R_{i jbar k lbar}`.
pub fn riem_index(n: usize, i: usize, j: usize, k: usize, l: usize) -> usize {
    ((i * n + j) * n + k) * n + l
}

/// The Fubini-Study potential `(n+1) log(1 + |z|^2)` for the anticanonical
/// class.
pub fn fs_potential(n: usize) -> impl Fn(&[C64]) -> f64 {
    move |z: &[C64]| (n as f64 + 1.0) * (1.0 + z.iter().map(|v| v.norm_sqr()).sum::<f64>()).ln()
}

/// A radial potential `F_0(s) + u(y(s))` with `s = log|z|^2`,
/// `y = e^s / (1 + e^s)` and caller-supplied smooth `u`.
pub fn radial_potential(n: usize, u: impl Fn(f64) -> f64) -> impl Fn(&[C64]) -> f64 {
    move |z: &[C64]| {
        let r2: f64 = z.iter().map(|v| v.norm_sqr()).sum();
        let y = r2 / (1.0 + r2);
        (n as f64 + 1.0) * (1.0 + r2).ln() + u(y)
    }
}

// ---------------------------------------------------------------- stencils

const D1: [(isize, f64); 4] = [(-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)];

fn shifted(x: &[f64], alpha: usize, k: isize, h: f64) -> Vec<f64> {
    let mut v = x.to_vec();
    v[alpha] += k as f64 * h;
    v
}

/// Fourth-order first partials of a matrix-valued function.
fn d1_matrix(
    f: &impl Fn(&[f64]) -> DMatrix<C64>,
    x: &[f64],
    alpha: usize,
    h: f64,
) -> DMatrix<C64> {
    let mut acc: Option<DMatrix<C64>> = None;
    for &(k, c) in &D1 {
        let m = f(&shifted(x, alpha, k, h)) * C64::new(c / h, 0.0);
        acc = Some(match acc {
            None => m,
            Some(a) => a + m,
        });
    }
    acc.unwrap()
}

/// Fourth-order second partial d_alpha d_beta of a matrix-valued function.
fn d2_matrix(
    f: &impl Fn(&[f64]) -> DMatrix<C64>,
    x: &[f64],
    alpha: usize,
    beta: usize,
    h: f64,
) -> DMatrix<C64> {
    if alpha == beta {
        let coef = [(-2isize, -1.0 / 12.0), (-1, 16.0 / 12.0), (0, -30.0 / 12.0), (1, 16.0 / 12.0), (2, -1.0 / 12.0)];
        let mut acc: Option<DMatrix<C64>> = None;
        for &(k, c) in &coef {
            let m = f(&shifted(x, alpha, k, h)) * C64::new(c / (h * h), 0.0);
            acc = Some(match acc {
                None => m,
                Some(a) => a + m,
            });
        }
        acc.unwrap()
    } else {
        let mut acc: Option<DMatrix<C64>> = None;
        for &(ka, ca) in &D1 {
            for &(kb, cb) in &D1 {
                let mut v = x.to_vec();
                v[alpha] += ka as f64 * h;
                v[beta] += kb as f64 * h;
                let m = f(&v) * C64::new(ca * cb / (h * h), 0.0);
                acc = Some(match acc {
                    None => m,
                    Some(a) => a + m,
                });
            }
        }
        acc.unwrap()
    }
}

/// Complex Hessian `H_{i jbar} = d_i d_jbar f` of a real scalar function,
/// via its real 2n x 2n Hessian.
fn complex_hessian(f: &impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> DMatrix<C64> {
    let dim = x.len();
    let n = dim / 2;
    let lift = |x: &[f64]| DMatrix::from_element(1, 1, C64::new(f(x), 0.0));
    let mut hr = vec![vec![0.0; dim]; dim];
    for alpha in 0..dim {
        for beta in alpha..dim {
            let v = d2_matrix(&lift, x, alpha, beta, h)[(0, 0)].re;
            hr[alpha][beta] = v;
            hr[beta][alpha] = v;
        }
    }
    DMatrix::from_fn(n, n, |i, j| {
        C64::new(
            0.25 * (hr[2 * i][2 * j] + hr[2 * i + 1][2 * j + 1]),
            0.25 * (hr[2 * i][2 * j + 1] - hr[2 * i + 1][2 * j]),
        )
    })
}

// ------------------------------------------------------------- operations

fn metric_once(potential: &impl Fn(&[C64]) -> f64, x: &[f64], h: f64) -> DMatrix<C64> {
    let n = x.len() / 2;
    let f = |x: &[f64]| {
        let z: Vec<C64> = (0..n).map(|i| C64::new(x[2 * i], x[2 * i + 1])).collect();
        potential(&z)
    };
    complex_hessian(&f, x, h)
}

fn max_matrix_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max)
}

/// Metric and volume density at a point, with the two-scale self-test.
pub fn oracle_metric_at(
    potential: &impl Fn(&[C64]) -> f64,
    pt: &PointChart,
    h: f64,
) -> Result<OracleTensor, OracleError> {
    let x = pt.coords();
    let n = pt.z.len();
    let g = metric_once(potential, &x, h);
    let g_coarse = metric_once(potential, &x, 2.0 * h);
    let residual = max_matrix_diff(&g, &g_coarse);
    let scale = g.iter().map(|v| v.norm()).fold(1.0, f64::max);
    let limit = 1e-4 * scale;
    if !residual.is_finite() || residual > limit {
        return Err(OracleError::ConditioningFailure { residual, limit });
    }
    let vol = g.clone().determinant().re;
    Ok(OracleTensor {
        n,
        g,
        vol,
        riem: Vec::new(),
        ric: DMatrix::zeros(0, 0),
        ric_logdet: DMatrix::zeros(0, 0),
        scalar: 0.0,
        residual,
    })
}

fn curvature_once(
    potential: &impl Fn(&[C64]) -> f64,
    x: &[f64],
    h: f64,
) -> (DMatrix<C64>, Vec<C64>, DMatrix<C64>, DMatrix<C64>) {
    let n = x.len() / 2;
    let dim = 2 * n;
    let gfun = |x: &[f64]| metric_once(potential, x, h);
    let g = gfun(x);
    let ginv = g.clone().try_inverse().expect("metric invertible in chart band");

    // First Wirtinger derivatives S_k = d_k g and mixed seconds
    // T_kl = d_k d_lbar g of the metric matrix.
    let dg: Vec<DMatrix<C64>> = (0..dim).map(|alpha| d1_matrix(&gfun, x, alpha, h)).collect();
    let mut d2g = vec![vec![DMatrix::<C64>::zeros(0, 0); dim]; dim];
    for alpha in 0..dim {
        for beta in alpha..dim {
            let m = d2_matrix(&gfun, x, alpha, beta, h);
            d2g[beta][alpha] = m.clone();
            d2g[alpha][beta] = m;
        }
    }
    let s_k: Vec<DMatrix<C64>> = (0..n)
        .map(|k| {
            DMatrix::from_fn(n, n, |i, j| {
                0.5 * (dg[2 * k][(i, j)] - C64::i() * dg[2 * k + 1][(i, j)])
            })
        })
        .collect();
    let t_kl: Vec<Vec<DMatrix<C64>>> = (0..n)
        .map(|k| {
            (0..n)
                .map(|l| {
                    DMatrix::from_fn(n, n, |i, j| {
                        0.25 * (d2g[2 * k][2 * l][(i, j)]
                            + d2g[2 * k + 1][2 * l + 1][(i, j)]
                            + C64::i() * (d2g[2 * k][2 * l + 1][(i, j)] - d2g[2 * k + 1][2 * l][(i, j)]))
                    })
                })
                .collect()
        })
        .collect();

    // R_{i jbar k lbar} = -d_k d_lbar g_{i jbar}
    //                     + g^{p qbar} (d_k g_{i qbar})(d_lbar g_{p jbar}).
    let mut riem = vec![C64::new(0.0, 0.0); n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut v = -t_kl[k][l][(i, j)];
                    for p in 0..n {
                        for q in 0..n {
                            // g^{p qbar} as matrix entry (q, p) of g^{-1}.
                            v += ginv[(q, p)] * s_k[k][(i, q)] * s_k[l][(j, p)].conj();
                        }
                    }
                    riem[riem_index(n, i, j, k, l)] = v;
                }
            }
        }
    }

    // Ricci by contraction.
    let ric = DMatrix::from_fn(n, n, |i, j| {
        let mut v = C64::new(0.0, 0.0);
        for k in 0..n {
            for l in 0..n {
                v += ginv[(l, k)] * riem[riem_index(n, i, j, k, l)];
            }
        }
        v
    });

    // Ricci independently as -dd(log det g).
    let logdet = |x: &[f64]| gfun(x).determinant().re.ln();
    let ric_logdet = -complex_hessian(&logdet, x, h);

    (g, riem, ric, ric_logdet)
}

/// Full curvature evaluation with the two-scale self-test.
pub fn oracle_curvature_at(
    potential: &impl Fn(&[C64]) -> f64,
    pt: &PointChart,
    h: f64,
) -> Result<OracleTensor, OracleError> {
    let x = pt.coords();
    let n = pt.z.len();
    let (g, riem, ric, ric_logdet) = curvature_once(potential, &x, h);
    let (_, riem_c, _, _) = curvature_once(potential, &x, 2.0 * h);
    let residual = riem
        .iter()
        .zip(&riem_c)
        .map(|(p, q)| (p - q).norm())
        .fold(0.0, f64::max);
    let scale = riem.iter().map(|v| v.norm()).fold(1.0, f64::max);
    let limit = 1e-3 * scale;
    if !residual.is_finite() || residual > limit {
        return Err(OracleError::ConditioningFailure { residual, limit });
    }
    let ginv = g.clone().try_inverse().expect("metric invertible");
    let scalar = (&ric * &ginv).trace().re;
    let vol = g.clone().determinant().re;
    Ok(OracleTensor { n, g, vol, riem, ric, ric_logdet, scalar, residual })
}

/// Coefficients sigma_0..sigma_n of `det(I + t g^{-1} Ric)`, computed from
/// power traces via Newton's identities.
pub fn oracle_sigma_at(
    potential: &impl Fn(&[C64]) -> f64,
    pt: &PointChart,
    h: f64,
) -> Result<Vec<f64>, OracleError> {
    let t = oracle_curvature_at(potential, pt, h)?;
    let ginv = t.g.clone().try_inverse().expect("metric invertible");
    // Endomorphism M^i_k = g^{i jbar} R_{k jbar}; trace powers give the
    // elementary symmetric functions of the relative Ricci eigenvalues.
    let n = t.n;
    let m = DMatrix::from_fn(n, n, |i, k| {
        let mut v = C64::new(0.0, 0.0);
        for j in 0..n {
            v += ginv[(j, i)] * t.ric[(k, j)];
        }
        v
    });
    let mut powers = Vec::with_capacity(n);
    let mut acc = m.clone();
    for _ in 0..n {
        powers.push(acc.trace());
        acc = &acc * &m;
    }
    let mut e = vec![C64::new(1.0, 0.0)];
    for k in 1..=n {
        let mut v = C64::new(0.0, 0.0);
        for j in 1..=k {
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            v += sign * e[k - j] * powers[j - 1];
        }
        e.push(v / C64::new(k as f64, 0.0));
    }
    Ok(e.iter().map(|v| v.re).collect())
}
