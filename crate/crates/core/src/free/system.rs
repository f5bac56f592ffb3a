use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Default cap on the number of enumerated words.
pub const DEFAULT_WORD_CAP: u128 = 1_000_000;

const ROW_TOL: f64 = 1e-14;
const STATIONARY_TOL: f64 = 1e-13;

/// Labels `I`, a row-stochastic matrix `p(ij)` and a strictly positive stationary
/// distribution `p(i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionSystem {
    labels: Vec<i64>,
    p: DMatrix<f64>,
    stationary: Vec<f64>,
    free_rank: Option<usize>,
}

/// The words `I(n)` of positive weight together with their weights `p_{n−1}(w)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WordSpace {
    pub n: usize,
    /// Words as index sequences, in lexicographic index order.
    pub words: Vec<Vec<usize>>,
    pub weights: Vec<f64>,
}

impl TransitionSystem {
    pub fn new(labels: Vec<i64>, p: DMatrix<f64>, stationary: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::InvalidTransitionSystem("empty index set".into()));
        }
        if p.shape() != (n, n) || stationary.len() != n {
            return Err(Error::InvalidTransitionSystem(format!(
                "{n} labels but matrix {:?} and {} stationary weights",
                p.shape(),
                stationary.len()
            )));
        }
        if p.iter().any(|&v| v.is_nan() || v < 0.0) {
            return Err(Error::InvalidTransitionSystem(
                "negative or NaN transition probability".into(),
            ));
        }
        for i in 0..n {
            let s: f64 = p.row(i).sum();
            if (s - 1.0).abs() > ROW_TOL {
                return Err(Error::InvalidTransitionSystem(format!("row {i} sums to {s}")));
            }
        }
        if stationary.iter().any(|&v| v.is_nan() || v <= 0.0) {
            return Err(Error::InvalidTransitionSystem(
                "stationary weights must be positive".into(),
            ));
        }
        for j in 0..n {
            let s: f64 = (0..n).map(|i| stationary[i] * p[(i, j)]).sum();
            if (s - stationary[j]).abs() > STATIONARY_TOL {
                return Err(Error::InvalidTransitionSystem(format!(
                    "distribution is not stationary at {j} (residual {:e})",
                    s - stationary[j]
                )));
            }
        }
        Ok(TransitionSystem {
            labels,
            p,
            stationary,
            free_rank: None,
        })
    }

    /// Uniform non-backtracking walk on the generators of `F_d`:
    /// `p(ij) = 0` if `i = −j`, else `1/(2d−1)`; `p(i) = 1/(2d)`.
    pub fn nevo_stein(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::DegenerateSystem(format!(
                "d = {d}: the non-backtracking walk needs at least two generators"
            )));
        }
        let labels: Vec<i64> = (-(d as i64)..0).chain(1..=d as i64).collect();
        let m = 2 * d;
        let q = 1.0 / (m as f64 - 1.0);
        let p = DMatrix::from_fn(m, m, |i, j| if j == m - 1 - i { 0.0 } else { q });
        let mut sys = Self::new(labels, p, vec![1.0 / m as f64; m])?;
        sys.free_rank = Some(d);
        Ok(sys)
    }

    /// `Some(d)` for the non-backtracking system on `F_d`.
    pub fn free_rank(&self) -> Option<usize> {
        self.free_rank
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn label(&self, idx: usize) -> i64 {
        self.labels[idx]
    }

    pub fn index_of(&self, label: i64) -> Result<usize> {
        self.labels
            .iter()
            .position(|&l| l == label)
            .ok_or_else(|| Error::IndexOutOfRange(format!("label {label} not in index set")))
    }

    /// `p(ij)` by index.
    pub fn p(&self, i: usize, j: usize) -> f64 {
        self.p[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    /// `p_{n−1}(w) = p(w_0) p(w_0 w_1) ⋯ p(w_{n−2} w_{n−1})`; the empty word has weight 1.
    pub fn word_weight(&self, w: &[usize]) -> f64 {
        match w.first() {
            None => 1.0,
            Some(&first) => w
                .windows(2)
                .fold(self.stationary[first], |acc, pair| acc * self.p[(pair[0], pair[1])]),
        }
    }

    /// `|I(n)|`, counted by dynamic programming without enumeration.
    pub fn count_words(&self, n: usize) -> u128 {
        if n == 0 {
            return 1;
        }
        let m = self.len();
        let mut ends: Vec<u128> = vec![1; m];
        for _ in 1..n {
            let mut next = vec![0u128; m];
            for (i, &c) in ends.iter().enumerate() {
                for (j, slot) in next.iter_mut().enumerate() {
                    if self.p[(i, j)] > 0.0 {
                        *slot = slot.saturating_add(c);
                    }
                }
            }
            ends = next;
        }
        ends.iter().fold(0u128, |a, &b| a.saturating_add(b))
    }

    /// Enumerates `I(n)` depth first, pruning zero-probability transitions.
    pub fn words(&self, n: usize) -> Result<WordSpace> {
        self.words_capped(n, DEFAULT_WORD_CAP)
    }

    pub fn words_capped(&self, n: usize, cap: u128) -> Result<WordSpace> {
        let count = self.count_words(n);
        if count > cap {
            return Err(Error::ResourceCap {
                what: format!("words of length {n}"),
                requested: count,
                cap,
            });
        }
        let mut words = Vec::with_capacity(count as usize);
        let mut weights = Vec::with_capacity(count as usize);
        if n == 0 {
            words.push(Vec::new());
            weights.push(1.0);
        } else {
            let mut stack = Vec::with_capacity(n);
            for i in 0..self.len() {
                stack.push(i);
                self.extend(&mut stack, n, self.stationary[i], &mut words, &mut weights);
                stack.pop();
            }
        }
        Ok(WordSpace { n, words, weights })
    }

    fn extend(
        &self,
        stack: &mut Vec<usize>,
        n: usize,
        weight: f64,
        words: &mut Vec<Vec<usize>>,
        weights: &mut Vec<f64>,
    ) {
        if stack.len() == n {
            words.push(stack.clone());
            weights.push(weight);
            return;
        }
        let last = *stack.last().unwrap();
        for j in 0..self.len() {
            let pj = self.p[(last, j)];
            if pj > 0.0 {
                stack.push(j);
                self.extend(stack, n, weight * pj, words, weights);
                stack.pop();
            }
        }
    }
}

/// All reduced words of length `n` in `F_d`, as label sequences in `{−d,…,−1,1,…,d}`.
pub fn enumerate_sphere(d: usize, n: usize, cap: u128) -> Result<Vec<Vec<i64>>> {
    let sys = TransitionSystem::nevo_stein(d)?;
    let ws = sys.words_capped(n, cap)?;
    Ok(ws
        .words
        .into_iter()
        .map(|w| w.into_iter().map(|i| sys.label(i)).collect())
        .collect())
}
