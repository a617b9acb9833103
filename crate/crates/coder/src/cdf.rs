use crate::{CoderError, Result};

/// Frequency precision of every table, in bits.
pub const PROB_BITS: u32 = 16;
/// Total frequency mass of every table.
pub const PROB_TOTAL: u32 = 1 << PROB_BITS;

/// Integer cumulative frequency table over a contiguous symbol alphabet.
///
/// `cum` has one entry per symbol plus a terminator: `cum[0] = 0`,
/// `cum[n] = PROB_TOTAL`, strictly increasing, so every symbol has
/// frequency >= 1 and is codable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CdfTable {
    cum: Vec<u32>,
}

impl CdfTable {
    /// Build from unnormalized non-negative weights. Every symbol is
    /// guaranteed a frequency of at least 1; the remaining mass is
    /// distributed proportionally with deterministic largest-remainder
    /// correction.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let n = weights.len();
        if n == 0 {
            return Err(CoderError::BadTable("empty alphabet".into()));
        }
        if n as u32 > PROB_TOTAL {
            return Err(CoderError::BadTable(format!(
                "alphabet of {n} symbols exceeds total frequency {PROB_TOTAL}"
            )));
        }
        let mut sum = 0.0f64;
        for (i, w) in weights.iter().enumerate() {
            if !w.is_finite() || *w < 0.0 {
                return Err(CoderError::BadTable(format!("weight[{i}] = {w}")));
            }
            sum += *w;
        }
        if sum <= 0.0 {
            return Err(CoderError::BadTable("all weights are zero".into()));
        }

        let spare = PROB_TOTAL - n as u32;
        let mut freqs: Vec<u32> = vec![1; n];
        let mut assigned = 0u32;
        // Proportional share of the spare mass, floor-assigned first.
        let mut remainders: Vec<(f64, usize)> = Vec::with_capacity(n);
        for (i, w) in weights.iter().enumerate() {
            let exact = w / sum * spare as f64;
            let fl = exact.floor();
            freqs[i] += fl as u32;
            assigned += fl as u32;
            remainders.push((exact - fl, i));
        }
        // Largest remainders get the leftover units; ties break on index so
        // the construction is deterministic.
        let mut leftover = spare - assigned;
        remainders.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let mut k = 0;
        while leftover > 0 {
            freqs[remainders[k % n].1] += 1;
            leftover -= 1;
            k += 1;
        }

        let mut cum = Vec::with_capacity(n + 1);
        let mut acc = 0u32;
        cum.push(0);
        for f in &freqs {
            acc += f;
            cum.push(acc);
        }
        debug_assert_eq!(acc, PROB_TOTAL);
        Ok(CdfTable { cum })
    }

    /// Uniform table over `n` symbols.
    pub fn uniform(n: usize) -> Result<Self> {
        Self::from_weights(&vec![1.0; n])
    }

    pub fn n_symbols(&self) -> usize {
        self.cum.len() - 1
    }

    /// (cumulative, frequency) span of a symbol.
    pub fn span(&self, symbol: u32) -> (u32, u32) {
        let s = symbol as usize;
        (self.cum[s], self.cum[s + 1] - self.cum[s])
    }

    pub fn freq(&self, symbol: u32) -> u32 {
        self.span(symbol).1
    }

    /// Largest symbol whose cumulative start is <= target.
    pub fn lookup(&self, target: u32) -> u32 {
        debug_assert!(target < PROB_TOTAL);
        // partition_point returns the first index with cum > target; the
        // symbol owning the span is one before.
        let idx = self.cum.partition_point(|&c| c <= target);
        (idx - 1) as u32
    }

    /// Ideal code length of a symbol under this table, in bits.
    pub fn bits(&self, symbol: u32) -> f64 {
        let (_, f) = self.span(symbol);
        (PROB_TOTAL as f64 / f as f64).log2()
    }

    /// Invariant check used by tests: strictly increasing, full mass.
    pub fn validate(&self) -> Result<()> {
        if self.cum.first() != Some(&0) || self.cum.last() != Some(&PROB_TOTAL) {
            return Err(CoderError::BadTable("cdf endpoints wrong".into()));
        }
        for w in self.cum.windows(2) {
            if w[1] <= w[0] {
                return Err(CoderError::BadTable("cdf not strictly increasing".into()));
            }
        }
        Ok(())
    }
}
