//! Entropy and mutual information over finite joint distributions, in bits.
//!
//! `0 · log 0` is taken as 0 everywhere.

use serde::{Deserialize, Serialize};

use crate::lhv::{self, LhvModel};
use crate::numeric::MI_NEGATIVE_CLAMP;
use crate::{Error, Result};

/// A joint probability table over two discrete variables, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    rows: usize,
    cols: usize,
    probabilities: Vec<f64>,
}

impl JointDistribution {
    pub fn new(rows: usize, cols: usize, probabilities: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || probabilities.len() != rows * cols {
            return Err(Error::distribution(
                "probabilities",
                format!(
                    "{} entries do not form a {rows}x{cols} table",
                    probabilities.len()
                ),
            ));
        }
        lhv::check_distribution("probabilities", &probabilities)?;
        Ok(Self {
            rows,
            cols,
            probabilities,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.probabilities[row * self.cols + col]
    }

    pub fn row_marginal(&self) -> Vec<f64> {
        self.probabilities
            .chunks(self.cols)
            .map(|r| r.iter().sum())
            .collect()
    }

    pub fn col_marginal(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.cols];
        for row in self.probabilities.chunks(self.cols) {
            for (acc, p) in m.iter_mut().zip(row) {
                *acc += p;
            }
        }
        m
    }

    pub fn transposed(&self) -> Self {
        let probabilities = (0..self.rows * self.cols)
            .map(|k| self.get(k % self.rows, k / self.rows))
            .collect();
        Self {
            rows: self.cols,
            cols: self.rows,
            probabilities,
        }
    }
}

/// Shannon entropy of a distribution, in bits.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.log2()).sum::<f64>()
}

/// `I(row; col) = Σ p(x,y) log₂ (p(x,y) / (p(x) p(y)))`.
///
/// Floating-point residue down to −1e-12 is clamped to zero; anything more
/// negative is reported as an internal error.
pub fn mutual_information(j: &JointDistribution) -> Result<f64> {
    let pr = j.row_marginal();
    let pc = j.col_marginal();
    let mut total = 0.0;
    for (r, row) in j.probabilities.chunks(j.cols).enumerate() {
        for (c, &p) in row.iter().enumerate() {
            if p > 0.0 {
                total += p * (p / (pr[r] * pc[c])).log2();
            }
        }
    }
    if total < -MI_NEGATIVE_CLAMP {
        return Err(Error::Internal(format!(
            "mutual information evaluated to {total}"
        )));
    }
    Ok(total.max(0.0))
}

/// `H(col | row)` in bits.
pub fn conditional_entropy(j: &JointDistribution) -> f64 {
    let h = entropy(&j.probabilities) - entropy(&j.row_marginal());
    h.max(0.0)
}

/// Correlation measure of dependence between hidden variable and joint setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CmdReport {
    /// `I(λ; (a,b))` in bits.
    pub raw_bits: f64,
    /// `raw_bits / H(a,b)`, or 0 when the setting entropy vanishes.
    pub normalized: f64,
    pub setting_entropy_bits: f64,
}

/// Joint distribution `p(λ, s) = p(s) p(λ | s)` with `λ` on rows and joint
/// settings on columns.
pub fn lambda_setting_distribution(model: &LhvModel) -> Result<JointDistribution> {
    let marginal = model.settings().marginal();
    let columns = model.lambda_given_settings();
    let lc = model.lambda_count();
    let sc = marginal.len();
    let probabilities = (0..lc * sc)
        .map(|k| marginal[k % sc] * columns[k % sc][k / sc])
        .collect();
    JointDistribution::new(lc, sc, probabilities)
}

pub fn cmd(model: &LhvModel) -> Result<CmdReport> {
    // Identical columns make p(λ, s) an exact product; skip the rounding residue.
    let raw_bits = if lhv::measurement_independent(model, 0.0) {
        0.0
    } else {
        mutual_information(&lambda_setting_distribution(model)?)?
    };
    let setting_entropy_bits = entropy(model.settings().marginal());
    let normalized = if setting_entropy_bits > 0.0 {
        (raw_bits / setting_entropy_bits).min(1.0)
    } else {
        0.0
    };
    Ok(CmdReport {
        raw_bits,
        normalized,
        setting_entropy_bits,
    })
}
