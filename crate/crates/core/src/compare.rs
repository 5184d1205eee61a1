//! Equality tests between spectral data sets.
//!
//! Groups are matched greedily by relative eigenvalue gap and matched
//! matrices are compared by Frobenius distance. Channels are compared by
//! position, so two data sets whose channels carry different node labels are
//! comparable as long as the counts agree.

use crate::error::{Error, Result};
use crate::recover::{BoundarySpectralData, SpectralGroup};
use crate::recover::SpectralData;
use serde::Serialize;
use std::fmt;
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Equal,
    Different,
    Inconclusive,
}

impl Verdict {
    /// Process exit code: 0 equal, 1 different, 3 inconclusive.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Equal => 0,
            Verdict::Different => 1,
            Verdict::Inconclusive => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Equal => "equal",
            Verdict::Different => "different",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Largest relative eigenvalue gap `|a - b| / max(|a|, |b|)` for a match.
    pub lambda_rtol: f64,
    /// Largest Frobenius distance between matched matrices.
    pub matrix_atol: f64,
}

impl Tolerances {
    /// For data computed directly from eigendecompositions.
    pub const DIRECT: Self = Self {
        lambda_rtol: 1e-6,
        matrix_atol: 1e-6,
    };
    /// For data recovered from simulated measurements.
    pub const RECOVERED: Self = Self {
        lambda_rtol: 1e-3,
        matrix_atol: 1e-3,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DIRECT
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchedPair {
    pub index_a: usize,
    pub index_b: usize,
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub lambda_gap: f64,
    pub distance: f64,
    /// Either group carries a recovery flag.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Unmatched {
    pub side: Side,
    pub index: usize,
    pub lambda: f64,
    /// The eigenvalue lies inside the range covered by the other side, so its
    /// absence there is evidence rather than a budget artifact.
    pub inside_other_range: bool,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub verdict: Verdict,
    pub matched: Vec<MatchedPair>,
    pub unmatched: Vec<Unmatched>,
    pub tolerances: Tolerances,
    /// Relative gap between the smallest eigenvalues of the two sides.
    pub leading_gap: Option<f64>,
}

pub fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

pub fn compare_spectral_data(
    a: &SpectralData,
    b: &SpectralData,
    tol: Tolerances,
) -> Result<ComparisonReport> {
    if a.channels.len() != b.channels.len() {
        return Err(Error::ChannelMismatch(format!(
            "W channel counts differ: {} vs {}",
            a.channels.len(),
            b.channels.len()
        )));
    }
    compare_groups(&a.groups, &b.groups, tol)
}

pub fn compare_boundary_spectral_data(
    a: &BoundarySpectralData,
    b: &BoundarySpectralData,
    tol: Tolerances,
) -> Result<ComparisonReport> {
    if a.rows.len() != b.rows.len() || a.cols.len() != b.cols.len() {
        return Err(Error::ChannelMismatch(format!(
            "boundary patches differ: {}×{} vs {}×{}",
            a.rows.len(),
            a.cols.len(),
            b.rows.len(),
            b.cols.len()
        )));
    }
    compare_groups(&a.groups, &b.groups, tol)
}

fn compare_groups(
    a: &[SpectralGroup],
    b: &[SpectralGroup],
    tol: Tolerances,
) -> Result<ComparisonReport> {
    if !(tol.lambda_rtol >= 0.0 && tol.matrix_atol >= 0.0) {
        return Err(Error::InvalidInput("tolerances must be non-negative".into()));
    }
    for (ga, gb) in a.iter().zip(b) {
        if ga.matrix.shape() != gb.matrix.shape() {
            return Err(Error::ChannelMismatch(format!(
                "matrix shapes differ: {:?} vs {:?}",
                ga.matrix.shape(),
                gb.matrix.shape()
            )));
        }
    }

    let mut candidates = Vec::new();
    for (i, ga) in a.iter().enumerate() {
        for (j, gb) in b.iter().enumerate() {
            let gap = relative_gap(ga.lambda, gb.lambda);
            if gap <= tol.lambda_rtol {
                candidates.push((gap, i, j));
            }
        }
    }
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));

    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut matched = Vec::new();
    for (gap, i, j) in candidates {
        if used_a[i] || used_b[j] {
            continue;
        }
        used_a[i] = true;
        used_b[j] = true;
        matched.push(MatchedPair {
            index_a: i,
            index_b: j,
            lambda_a: a[i].lambda,
            lambda_b: b[j].lambda,
            lambda_gap: gap,
            distance: (&a[i].matrix - &b[j].matrix).norm(),
            flagged: a[i].flagged || b[j].flagged,
        });
    }
    matched.sort_by_key(|m| m.index_a);

    let mut unmatched = Vec::new();
    unmatched.extend(leftovers(Side::A, a, &used_a, b));
    unmatched.extend(leftovers(Side::B, b, &used_b, a));

    let mismatch = matched.iter().any(|m| !m.flagged && m.distance > tol.matrix_atol)
        || unmatched.iter().any(|u| u.inside_other_range && !u.flagged);
    let clean = unmatched.is_empty()
        && matched.iter().all(|m| !m.flagged && m.distance <= tol.matrix_atol);
    let verdict = if mismatch {
        Verdict::Different
    } else if clean {
        Verdict::Equal
    } else {
        Verdict::Inconclusive
    };

    let smallest = |g: &[SpectralGroup]| g.iter().map(|g| g.lambda).reduce(f64::min);
    let leading_gap = match (smallest(a), smallest(b)) {
        (Some(x), Some(y)) => Some(relative_gap(x, y)),
        _ => None,
    };

    Ok(ComparisonReport {
        verdict,
        matched,
        unmatched,
        tolerances: tol,
        leading_gap,
    })
}

fn leftovers(
    side: Side,
    own: &[SpectralGroup],
    used: &[bool],
    other: &[SpectralGroup],
) -> Vec<Unmatched> {
    let top = other.iter().map(|g| g.lambda).fold(f64::NEG_INFINITY, f64::max);
    own.iter()
        .enumerate()
        .filter(|(i, _)| !used[*i])
        .map(|(index, g)| Unmatched {
            side,
            index,
            lambda: g.lambda,
            inside_other_range: g.lambda < top,
            flagged: g.flagged,
        })
        .collect()
}

#[derive(Serialize)]
struct ReportRow {
    status: &'static str,
    index_a: Option<usize>,
    index_b: Option<usize>,
    lambda_a: Option<f64>,
    lambda_b: Option<f64>,
    lambda_gap: Option<f64>,
    distance: Option<f64>,
    flagged: bool,
}

impl ComparisonReport {
    pub fn is_equal(&self) -> bool {
        self.verdict == Verdict::Equal
    }

    pub fn max_distance(&self) -> f64 {
        self.matched.iter().map(|m| m.distance).fold(0.0, f64::max)
    }

    pub fn max_lambda_gap(&self) -> f64 {
        self.matched.iter().map(|m| m.lambda_gap).fold(0.0, f64::max)
    }

    /// One row per matched pair, then one per unmatched group.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for m in &self.matched {
            w.serialize(ReportRow {
                status: if m.distance <= self.tolerances.matrix_atol {
                    "matched"
                } else {
                    "distance"
                },
                index_a: Some(m.index_a),
                index_b: Some(m.index_b),
                lambda_a: Some(m.lambda_a),
                lambda_b: Some(m.lambda_b),
                lambda_gap: Some(m.lambda_gap),
                distance: Some(m.distance),
                flagged: m.flagged,
            })?;
        }
        for u in &self.unmatched {
            let (index_a, index_b, lambda_a, lambda_b) = match u.side {
                Side::A => (Some(u.index), None, Some(u.lambda), None),
                Side::B => (None, Some(u.index), None, Some(u.lambda)),
            };
            w.serialize(ReportRow {
                status: if u.inside_other_range {
                    "missing"
                } else {
                    "beyond_budget"
                },
                index_a,
                index_b,
                lambda_a,
                lambda_b,
                lambda_gap: None,
                distance: None,
                flagged: u.flagged,
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

impl fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let qualifier = if self.verdict == Verdict::Equal {
            " (up to mode budget)"
        } else {
            ""
        };
        writeln!(f, "verdict: {}{qualifier}", self.verdict)?;
        writeln!(
            f,
            "tolerances: lambda_rtol = {:e}, matrix_atol = {:e}",
            self.tolerances.lambda_rtol, self.tolerances.matrix_atol
        )?;
        if let Some(g) = self.leading_gap {
            writeln!(f, "leading eigenvalue gap: {g:.6e}")?;
        }
        for m in &self.matched {
            writeln!(
                f,
                "  matched A[{}] λ = {:.10} ~ B[{}] λ = {:.10}  gap {:.2e}  distance {:.2e}{}",
                m.index_a,
                m.lambda_a,
                m.index_b,
                m.lambda_b,
                m.lambda_gap,
                m.distance,
                if m.flagged { "  flagged" } else { "" }
            )?;
        }
        for u in &self.unmatched {
            writeln!(
                f,
                "  unmatched {:?}[{}] λ = {:.10}  {}{}",
                u.side,
                u.index,
                u.lambda,
                if u.inside_other_range {
                    "missing from the other side"
                } else {
                    "beyond the other side's budget"
                },
                if u.flagged { "  flagged" } else { "" }
            )?;
        }
        Ok(())
    }
}
