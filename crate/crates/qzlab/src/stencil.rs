//! Finite-difference stencil generation.
//!
//! Interior rows use 4th-order centered stencils; the two rows nearest the
//! origin fold their ghost nodes by parity, and the two outermost rows use
//! one-sided 6-point stencils of the same order.

/// Fornberg weights for the m-th derivative at `x0` from nodes `xs`.
pub fn fornberg(m: usize, x0: f64, xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// Parity of a radial profile at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

const C_D1: [f64; 5] = [
    1.0 / 12.0,
    -8.0 / 12.0,
    0.0,
    8.0 / 12.0,
    -1.0 / 12.0,
];
const C_D2: [f64; 5] = [
    -1.0 / 12.0,
    16.0 / 12.0,
    -30.0 / 12.0,
    16.0 / 12.0,
    -1.0 / 12.0,
];

/// One stencil row: column indices with weights.
#[derive(Debug, Clone)]
pub struct StencilRow {
    pub cols: Vec<usize>,
    pub w: Vec<f64>,
}

/// Rows of the m-th derivative operator (m = 1 or 2) on a uniform grid.
pub fn derivative_rows(n: usize, h: f64, m: usize, parity: Parity) -> Vec<StencilRow> {
    assert!(m == 1 || m == 2);
    let base = if m == 1 { C_D1 } else { C_D2 };
    let scale = h.powi(-(m as i32));
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        if i >= n - 2 {
            // one-sided 6-point stencil
            let lo = n - 6;
            let xs: Vec<f64> = (lo..n).map(|j| j as f64 * h).collect();
            let w = fornberg(m, i as f64 * h, &xs);
            rows.push(StencilRow {
                cols: (lo..n).collect(),
                w,
            });
            continue;
        }
        let mut cols: Vec<usize> = Vec::with_capacity(5);
        let mut w: Vec<f64> = Vec::with_capacity(5);
        for (k, off) in (-2i64..=2).enumerate() {
            let c = base[k] * scale;
            if c == 0.0 {
                continue;
            }
            let j = i as i64 + off;
            let (jj, cc) = if j < 0 {
                ((-j) as usize, parity.sign() * c)
            } else {
                (j as usize, c)
            };
            if let Some(pos) = cols.iter().position(|&p| p == jj) {
                w[pos] += cc;
            } else {
                cols.push(jj);
                w.push(cc);
            }
        }
        rows.push(StencilRow { cols, w });
    }
    rows
}

/// 5-point one-sided first derivative at the last node (used for Robin rows).
pub fn edge_d1_row(n: usize, h: f64) -> StencilRow {
    let lo = n - 5;
    let xs: Vec<f64> = (lo..n).map(|j| j as f64 * h).collect();
    let w = fornberg(1, (n - 1) as f64 * h, &xs);
    StencilRow {
        cols: (lo..n).collect(),
        w,
    }
}
