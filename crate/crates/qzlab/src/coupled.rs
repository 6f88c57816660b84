//! Block-coupled banded systems with node-interleaved unknowns.
//!
//! Fields are interleaved as z[nf*i + f] so a coupled system of radial
//! operators stays banded. Used by the correction solves and the Newton
//! iterations for the nonlinear profile systems.

use crate::banded::{BandLu, BandMatrix};
use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::operators::KL;
use crate::stencil;

pub struct BlockSystem {
    pub nf: usize,
    pub n: usize,
    pub mat: BandMatrix<f64>,
}

impl BlockSystem {
    pub fn new(nf: usize, n: usize) -> Self {
        let band = nf * KL + nf;
        BlockSystem {
            nf,
            n,
            mat: BandMatrix::zeros(nf * n, band, band),
        }
    }

    #[inline]
    pub fn row(&self, field: usize, node: usize) -> usize {
        self.nf * node + field
    }

    pub fn add(&mut self, fr: usize, i: usize, fc: usize, j: usize, v: f64) {
        self.mat.add(self.nf * i + fr, self.nf * j + fc, v);
    }

    /// mat[block fr,fc] += diag(coef) * single
    pub fn add_block(
        &mut self,
        fr: usize,
        fc: usize,
        single: &BandMatrix<f64>,
        coef: Option<&[f64]>,
    ) {
        for i in 0..self.n {
            let c = coef.map_or(1.0, |cv| cv[i]);
            if c == 0.0 {
                continue;
            }
            let lo = i.saturating_sub(single.kl);
            let hi = (i + single.ku).min(self.n - 1);
            for j in lo..=hi {
                let v = single.get(i, j);
                if v != 0.0 {
                    self.add(fr, i, fc, j, c * v);
                }
            }
        }
    }

    pub fn add_diag(&mut self, fr: usize, fc: usize, values: &[f64]) {
        for i in 0..self.n {
            if values[i] != 0.0 {
                self.add(fr, i, fc, i, values[i]);
            }
        }
    }

    pub fn clear_row(&mut self, field: usize, node: usize) {
        self.mat.clear_row(self.nf * node + field);
    }

    /// Replace a field's outer row by p'(r_max) + alpha p = 0.
    pub fn robin_row(&mut self, field: usize, grid: &RadialGrid, alpha: f64) {
        let n = self.n;
        self.clear_row(field, n - 1);
        let row = stencil::edge_d1_row(n, grid.spacing());
        for (&j, &w) in row.cols.iter().zip(&row.w) {
            self.add(field, n - 1, field, j, w);
        }
        self.add(field, n - 1, field, n - 1, alpha);
    }

    pub fn dirichlet_row(&mut self, field: usize, node: usize) {
        self.clear_row(field, node);
        self.add(field, node, field, node, 1.0);
    }

    pub fn pack(&self, fields: &[&[f64]]) -> Vec<f64> {
        assert_eq!(fields.len(), self.nf);
        let mut z = vec![0.0; self.nf * self.n];
        for (f, vals) in fields.iter().enumerate() {
            for i in 0..self.n {
                z[self.nf * i + f] = vals[i];
            }
        }
        z
    }

    pub fn unpack(&self, z: &[f64]) -> Vec<Vec<f64>> {
        (0..self.nf)
            .map(|f| (0..self.n).map(|i| z[self.nf * i + f]).collect())
            .collect()
    }

    pub fn factor(&self) -> Result<BandLu<f64>> {
        let lu = BandLu::new(&self.mat);
        if lu.is_singular() {
            return Err(Error::SingularSystem {
                cond: lu.condition_estimate(),
            });
        }
        Ok(lu)
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let lu = self.factor()?;
        Ok(lu.solve_refined(&self.mat, rhs))
    }
}
