//! Group-testing oracle.
//!
//! Each of `ell` tests pools arms independently with probability `p`. A test is
//! scored by querying the reward at its pooled set (optionally quantized), and
//! every arm's grade is the sum of the scores of the tests containing it,
//! `phi = A^T rho`. The `K` best-graded arms are returned.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_theta, GtoDiagnostics, OracleResult};
use crate::bandit::{MeanVector, SuperArm};
use crate::error::{Error, Result};
use crate::quantizer::Quantizer;
use crate::reward::RewardModel;

/// Relative tolerance for calling two grades equal.
const GRADE_TOL: f64 = 1e-9;

/// `ell x m` binary pooling design, bit-packed by row.
#[derive(Clone, Debug, PartialEq)]
pub struct TestMatrix {
    arms: usize,
    words: usize,
    bits: Vec<u64>,
    row_sizes: Vec<usize>,
    p: f64,
    scores: Vec<f64>,
    /// Level index (quantized) or raw bit pattern, used to detect repeats.
    score_keys: Vec<u64>,
}

/// How grades are formed from test scores.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decoder {
    /// `phi = A^T rho`.
    #[default]
    Sum,
    /// `phi = A^T (rho - mean(rho))`. Removes the term proportional to how
    /// many tests an arm happens to join, which otherwise dominates when
    /// pooled rewards are far from zero.
    Centered,
}

/// How a test's reward is turned into its score.
#[derive(Clone, Copy, Debug)]
pub enum Scoring<'a> {
    Quantized(&'a Quantizer),
    Raw,
}

impl TestMatrix {
    /// Draws `ell` rows with i.i.d. `Bernoulli(p)` entries.
    pub fn draw<R: Rng + ?Sized>(ell: usize, arms: usize, p: f64, rng: &mut R) -> Result<Self> {
        if ell == 0 {
            return Err(Error::domain("a test matrix needs at least one row"));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("inclusion probability {p} outside [0, 1]")));
        }
        let words = arms.div_ceil(64);
        let tail = arms % 64;
        let last_mask = if tail == 0 { u64::MAX } else { (1u64 << tail) - 1 };
        let mut bits = vec![0u64; ell * words];
        if p == 0.5 {
            // one random bit per entry
            for row in bits.chunks_mut(words) {
                for w in row.iter_mut() {
                    *w = rng.random();
                }
                row[words - 1] &= last_mask;
            }
        } else if p > 0.0 {
            let threshold = if p >= 1.0 { u64::MAX } else { (p * 2f64.powi(64)) as u64 };
            for row in bits.chunks_mut(words) {
                for i in 0..arms {
                    let x: u64 = rng.random();
                    if p >= 1.0 || x < threshold {
                        row[i / 64] |= 1 << (i % 64);
                    }
                }
            }
        }
        let row_sizes = bits.chunks(words).map(|r| r.iter().map(|w| w.count_ones() as usize).sum()).collect();
        Ok(Self { arms, words, bits, row_sizes, p, scores: Vec::new(), score_keys: Vec::new() })
    }

    /// Builds a matrix from explicit member lists (for tests and replays).
    pub fn from_rows(rows: &[Vec<usize>], arms: usize) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::domain("a test matrix needs at least one row"));
        }
        let words = arms.div_ceil(64);
        let mut bits = vec![0u64; rows.len() * words];
        for (j, row) in rows.iter().enumerate() {
            for &i in row {
                if i >= arms {
                    return Err(Error::ArmOutOfRange { index: i, arms });
                }
                bits[j * words + i / 64] |= 1 << (i % 64);
            }
        }
        let row_sizes = bits.chunks(words).map(|r| r.iter().map(|w| w.count_ones() as usize).sum()).collect();
        Ok(Self { arms, words, bits, row_sizes, p: f64::NAN, scores: Vec::new(), score_keys: Vec::new() })
    }

    pub fn rows(&self) -> usize {
        self.row_sizes.len()
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn inclusion_probability(&self) -> f64 {
        self.p
    }

    pub fn row_sizes(&self) -> &[usize] {
        &self.row_sizes
    }

    pub fn contains(&self, row: usize, arm: usize) -> bool {
        self.bits[row * self.words + arm / 64] >> (arm % 64) & 1 == 1
    }

    /// Members of row `j`, ascending, written into `out`.
    pub fn members_into(&self, row: usize, out: &mut Vec<usize>) {
        out.clear();
        for (w, &word) in self.bits[row * self.words..(row + 1) * self.words].iter().enumerate() {
            let mut word = word;
            while word != 0 {
                out.push(w * 64 + word.trailing_zeros() as usize);
                word &= word - 1;
            }
        }
    }

    pub fn members(&self, row: usize) -> Vec<usize> {
        let mut v = Vec::with_capacity(self.row_sizes[row]);
        self.members_into(row, &mut v);
        v
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn is_scored(&self) -> bool {
        self.scores.len() == self.rows()
    }

    /// Queries the reward once per row and records the scores.
    pub fn score(&mut self, model: &RewardModel, theta: &MeanVector, scoring: Scoring<'_>) -> Result<()> {
        if theta.len() != self.arms {
            return Err(Error::domain(format!("theta has {} entries for {} arms", theta.len(), self.arms)));
        }
        let ell = self.rows();
        self.scores.clear();
        self.score_keys.clear();
        self.scores.reserve(ell);
        self.score_keys.reserve(ell);
        let mut members = Vec::with_capacity(self.arms);
        for j in 0..ell {
            self.members_into(j, &mut members);
            let reward = model.evaluate(&members, theta);
            let (score, key) = match scoring {
                Scoring::Quantized(q) => {
                    let idx = q.level_index(reward)?;
                    (q.levels()[idx], idx as u64)
                }
                Scoring::Raw => (reward, reward.to_bits()),
            };
            self.scores.push(score);
            self.score_keys.push(key);
        }
        Ok(())
    }

    /// Assigns precomputed scores; keys are the raw bit patterns.
    pub fn set_scores(&mut self, scores: Vec<f64>) -> Result<()> {
        if scores.len() != self.rows() {
            return Err(Error::domain(format!("{} scores for {} rows", scores.len(), self.rows())));
        }
        self.score_keys = scores.iter().map(|s| s.to_bits()).collect();
        self.scores = scores;
        Ok(())
    }

    /// `A^T scores`, computed row by row.
    pub fn grades(&self) -> Result<GradeVector> {
        self.decode(Decoder::Sum)
    }

    pub fn decode(&self, decoder: Decoder) -> Result<GradeVector> {
        if !self.is_scored() {
            return Err(Error::domain("test matrix has not been scored"));
        }
        let offset = match decoder {
            Decoder::Sum => 0.0,
            Decoder::Centered => self.scores.iter().sum::<f64>() / self.rows() as f64,
        };
        let mut grades = vec![0.0; self.arms];
        let mut members = Vec::new();
        for (j, &s) in self.scores.iter().enumerate() {
            let s = s - offset;
            self.members_into(j, &mut members);
            for &i in &members {
                grades[i] += s;
            }
        }
        Ok(GradeVector { grades })
    }

    /// Rows whose score is unique among scored rows of the same cardinality.
    pub fn non_repeated(&self) -> Result<Vec<bool>> {
        if !self.is_scored() {
            return Err(Error::domain("test matrix has not been scored"));
        }
        let mut counts: HashMap<(usize, u64), usize> = HashMap::new();
        for (size, key) in self.row_sizes.iter().zip(&self.score_keys) {
            *counts.entry((*size, *key)).or_default() += 1;
        }
        Ok(self.row_sizes.iter().zip(&self.score_keys).map(|(s, k)| counts[&(*s, *k)] == 1).collect())
    }
}

/// Per-arm grades `phi = A^T rho`.
#[derive(Clone, Debug, PartialEq)]
pub struct GradeVector {
    grades: Vec<f64>,
}

impl GradeVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.grades
    }

    /// The `k` best-graded arms; ties at the boundary are broken uniformly.
    pub fn top_k<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> SuperArm {
        let g = &self.grades;
        let mut idx: Vec<usize> = (0..g.len()).collect();
        if k >= idx.len() {
            return SuperArm::from_sorted(idx);
        }
        idx.select_nth_unstable_by(k - 1, |a, b| g[*b].total_cmp(&g[*a]));
        let cut = g[idx[k - 1]];
        let tol = GRADE_TOL * cut.abs().max(1.0);
        let mut chosen: Vec<usize> = (0..g.len()).filter(|&i| g[i] > cut + tol).collect();
        let tied: Vec<usize> = (0..g.len()).filter(|&i| (g[i] - cut).abs() <= tol).collect();
        let need = k - chosen.len();
        chosen.extend(crate::rng::choose_distinct(rng, &tied, need));
        chosen.sort_unstable();
        SuperArm::from_sorted(chosen)
    }
}

/// Fraction of rows in the non-repeated set.
pub fn estimate_q(matrix: &TestMatrix) -> Result<f64> {
    let flags = matrix.non_repeated()?;
    if flags.is_empty() {
        return Err(Error::domain("empty test matrix"));
    }
    Ok(flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64)
}

/// Runs the oracle on an already drawn matrix.
pub fn gto_on_matrix<R: Rng + ?Sized>(
    model: &RewardModel,
    scoring: Scoring<'_>,
    decoder: Decoder,
    theta: &MeanVector,
    matrix: &mut TestMatrix,
    tie_rng: &mut R,
) -> Result<OracleResult> {
    check_theta(model, theta)?;
    if let Scoring::Quantized(q) = scoring {
        let bound = model.reward_upper_bound();
        if q.upper() + crate::quantizer::RANGE_SLACK < bound {
            return Err(Error::config(format!("quantizer covers [0, {}] but the reward reaches {bound}", q.upper())));
        }
    }
    let before = model.evals();
    matrix.score(model, theta, scoring)?;
    let grades = matrix.decode(decoder)?;
    let q_hat = estimate_q(matrix)?;
    Ok(OracleResult {
        chosen: grades.top_k(model.k(), tie_rng),
        evals_used: model.evals() - before,
        diagnostics: Some(GtoDiagnostics { q_hat, ell: matrix.rows() }),
    })
}

/// Draws a fresh `ell`-row design and selects the top-`K` quantized grades.
pub fn gto_select<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    model: &RewardModel,
    quantizer: &Quantizer,
    theta: &MeanVector,
    p: f64,
    ell: usize,
    matrix_rng: &mut R1,
    tie_rng: &mut R2,
) -> Result<OracleResult> {
    let mut matrix = TestMatrix::draw(ell, theta.len(), p, matrix_rng)?;
    gto_on_matrix(model, Scoring::Quantized(quantizer), Decoder::Sum, theta, &mut matrix, tie_rng)
}

/// Same pipeline with raw, unquantized rewards as scores.
pub fn naive_gto_select<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    model: &RewardModel,
    theta: &MeanVector,
    p: f64,
    ell: usize,
    matrix_rng: &mut R1,
    tie_rng: &mut R2,
) -> Result<OracleResult> {
    let mut matrix = TestMatrix::draw(ell, theta.len(), p, matrix_rng)?;
    gto_on_matrix(model, Scoring::Raw, Decoder::Sum, theta, &mut matrix, tie_rng)
}
