//! Order-fixed reductions.
//!
//! Every O(n²) sum in the crate is reduced row by row into a vector and the
//! row partials are combined with [`pairwise_sum`]. The combination tree only
//! depends on the length of the input, so results are bit-identical for any
//! number of worker threads.

/// Below this length the partial sums are accumulated sequentially.
const PAIRWISE_BLOCK: usize = 16;

/// Pairwise (cascade) summation with a fixed split point.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_BLOCK {
        return values.iter().fold(0.0, |acc, &v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// A positive number `exp(shift) * scaled`, kept apart so that p-th powers
/// of moderately large numbers never leave the f64 range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogSum {
    pub shift: f64,
    pub scaled: f64,
}

impl LogSum {
    pub const ZERO: LogSum = LogSum {
        shift: f64::NEG_INFINITY,
        scaled: 0.0,
    };

    /// Natural log of the represented value (`-inf` for zero).
    pub fn ln(&self) -> f64 {
        if self.scaled <= 0.0 {
            f64::NEG_INFINITY
        } else {
            self.shift + self.scaled.ln()
        }
    }

    pub fn is_zero(&self) -> bool {
        self.scaled <= 0.0
    }
}

/// Log-sum-exp of a slice of log-magnitudes, with the max taken first.
pub fn log_sum_exp(logs: &[f64]) -> LogSum {
    let shift = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if shift == f64::NEG_INFINITY {
        return LogSum::ZERO;
    }
    let terms: Vec<f64> = logs.iter().map(|&z| (z - shift).exp()).collect();
    LogSum {
        shift,
        scaled: pairwise_sum(&terms),
    }
}

/// Combine per-row partial log-sums in a fixed order.
pub fn combine_log_sums(parts: &[LogSum]) -> LogSum {
    let shift = parts
        .iter()
        .filter(|p| !p.is_zero())
        .map(|p| p.shift)
        .fold(f64::NEG_INFINITY, f64::max);
    if shift == f64::NEG_INFINITY {
        return LogSum::ZERO;
    }
    let terms: Vec<f64> = parts
        .iter()
        .map(|p| {
            if p.is_zero() {
                0.0
            } else {
                p.scaled * (p.shift - shift).exp()
            }
        })
        .collect();
    LogSum {
        shift,
        scaled: pairwise_sum(&terms),
    }
}

/// `ln(exp(a) + exp(b))` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}
