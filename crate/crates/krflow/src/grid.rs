//! Uniform grid on [0, 1] with fourth-order finite differences and
//! sixth-order end-corrected quadrature.
//!
//! All field data in the crate lives on the closed uniform grid
//! `y_i = i / N`, `i = 0..=N`. Differentiation uses five-point stencils
//! (one-sided at the two nodes nearest each endpoint), quadrature uses the
//! trapezoid rule with Gregory end corrections of order six, and cumulative
//! integration uses per-cell Adams-Moulton weights of order four.

/// Uniform closed grid on [0, 1] with `n_cells` cells (`n_cells + 1` nodes).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n_cells: usize,
    h: f64,
    y: Vec<f64>,
}

/// Gregory end-correction weights of order six (applied symmetrically).
/// The interior trapezoid weight is 1; these replace the first five weights.
const GREGORY6: [f64; 5] = [
    95.0 / 288.0,
    317.0 / 240.0,
    23.0 / 30.0,
    793.0 / 720.0,
    157.0 / 160.0,
];

impl Grid {
    /// Builds the uniform grid with `n_cells >= 16` cells.
    pub fn new(n_cells: usize) -> Self {
        assert!(n_cells >= 16, "grid needs at least 16 cells");
        let h = 1.0 / n_cells as f64;
        let y = (0..=n_cells).map(|i| i as f64 * h).collect();
        Grid { n_cells, h, y }
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Node coordinates, including both endpoints.
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Fourth-order first derivative of nodal data.
    ///
    /// Central five-point stencil in the interior, one-sided five-point
    /// stencils at the two nodes nearest each endpoint.
    pub fn deriv(&self, f: &[f64]) -> Vec<f64> {
        let n = self.n_nodes();
        assert_eq!(f.len(), n);
        let c = 1.0 / (12.0 * self.h);
        let mut d = vec![0.0; n];
        d[0] = c * (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]);
        d[1] = c * (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]);
        for i in 2..n - 2 {
            d[i] = c * (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]);
        }
        d[n - 2] = c * (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]);
        d[n - 1] = c * (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4] + 3.0 * f[n - 5]);
        d
    }

    /// Integral of nodal data over [0, 1]: trapezoid rule with order-six
    /// Gregory end corrections.
    pub fn integral(&self, f: &[f64]) -> f64 {
        let n = self.n_nodes();
        assert_eq!(f.len(), n);
        assert!(self.n_cells >= 10, "Gregory corrections need non-overlapping ends");
        let mut s = 0.0;
        for (k, w) in GREGORY6.iter().enumerate() {
            s += w * (f[k] + f[n - 1 - k]);
        }
        for fi in &f[5..n - 5] {
            s += fi;
        }
        s * self.h
    }

    /// Cumulative integral `F_i = \int_0^{y_i} f`, fourth order, `F_0 = 0`.
    ///
    /// Each cell uses the four nearest nodes with Adams-Moulton-type weights.
    pub fn cumulative_integral(&self, f: &[f64]) -> Vec<f64> {
        let n = self.n_nodes();
        assert_eq!(f.len(), n);
        let c = self.h / 24.0;
        let mut out = vec![0.0; n];
        // First cell: nodes 0..4.
        out[1] = c * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]);
        for i in 1..n - 2 {
            let cell = c * (-f[i - 1] + 13.0 * f[i] + 13.0 * f[i + 1] - f[i + 2]);
            out[i + 1] = out[i] + cell;
        }
        // Last cell: mirror of the first.
        let last = c * (9.0 * f[n - 1] + 19.0 * f[n - 2] - 5.0 * f[n - 3] + f[n - 4]);
        out[n - 1] = out[n - 2] + last;
        out
    }

    /// Cubic (four-point Lagrange) interpolation of nodal data at `y` in [0, 1].
    pub fn interp(&self, f: &[f64], y: f64) -> f64 {
        let n = self.n_nodes();
        assert_eq!(f.len(), n);
        let t = (y / self.h).clamp(0.0, (self.n_cells) as f64);
        // Choose a four-node window centered on the containing cell.
        let i = (t.floor() as usize).min(self.n_cells - 1);
        let lo = i.saturating_sub(1).min(n - 4);
        let x = t - lo as f64; // local coordinate in units of h, in [0, 3]
        let mut acc = 0.0;
        for j in 0..4 {
            let mut w = 1.0;
            for k in 0..4 {
                if k != j {
                    w *= (x - k as f64) / (j as f64 - k as f64);
                }
            }
            acc += w * f[lo + j];
        }
        acc
    }
}

/// Mean of `values` (panics on empty input).
pub fn mean(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    values.iter().sum::<f64>() / values.len() as f64
}

/// Maximum absolute value over a slice (0 for empty input).
pub fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Ordinary least squares fit of `ys = intercept + slope * xs`.
/// Returns `(slope, intercept)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2);
    let mx = mean(xs);
    let my = mean(ys);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
