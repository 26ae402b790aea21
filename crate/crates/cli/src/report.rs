//! Machine-readable reports for the bound tabulation and improvement
//! commands, plus the CSV table writer.

use confmdp::bounds::BoundReport;
use confmdp::improvement::{ImprovementStep, TerminationReason};
use serde::Serialize;

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Tolerance below which a violated bound is treated as a toolkit bug.
pub const SLACK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Serialize)]
pub struct BoundRow {
    #[serde(flatten)]
    pub report: BoundReport,
    pub pass: bool,
}

impl BoundRow {
    pub fn new(report: BoundReport) -> Self {
        let pass = !report.applicable || report.slack.is_none_or(|s| s >= -SLACK_TOLERANCE);
        BoundRow { report, pass }
    }
}

/// The performance-difference identity row: both sides must agree, with
/// no applicability condition.
#[derive(Debug, Serialize)]
pub struct IdentityRow {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub pass: bool,
}

/// One supporting-lemma inequality: `lhs <= rhs` within tolerance.
#[derive(Debug, Serialize)]
pub struct LemmaRow {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
}

impl LemmaRow {
    pub fn new(name: &str, lhs: f64, rhs: f64) -> Self {
        let slack = rhs - lhs;
        LemmaRow {
            name: name.to_owned(),
            lhs,
            rhs,
            slack,
            pass: slack >= -SLACK_TOLERANCE,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct BoundsReport {
    pub toolkit_version: String,
    pub instance_digest: String,
    pub mode: String,
    pub seed: u64,
    pub elapsed_ms: f64,
    pub current_pair: ProfileRow,
    pub bounds: Vec<BoundRow>,
    pub identity: IdentityRow,
    pub lemmas: Vec<LemmaRow>,
    pub sup_comparison: SupComparisonRow,
}

/// Exact constants and semi-norms of the current pair, with the
/// closed-form bounds when the contraction condition holds. Profiles in
/// the near-singular band keep their bounds but carry the warning flag.
#[derive(Debug, Serialize)]
pub struct ProfileRow {
    pub l_r: f64,
    pub l_pi: f64,
    pub l_p: f64,
    pub contraction: f64,
    pub exact_v: f64,
    pub exact_q: f64,
    pub exact_u: f64,
    pub bound_v: Option<f64>,
    pub bound_q: Option<f64>,
    pub bound_u: Option<f64>,
    pub near_singular: bool,
}

impl From<&confmdp::lipschitz::LipschitzProfile> for ProfileRow {
    fn from(profile: &confmdp::lipschitz::LipschitzProfile) -> Self {
        ProfileRow {
            l_r: profile.l_r,
            l_pi: profile.l_pi,
            l_p: profile.l_p,
            contraction: profile.contraction,
            exact_v: profile.exact_v,
            exact_q: profile.exact_q,
            exact_u: profile.exact_u,
            bound_v: profile.bounds.map(|b| b.v),
            bound_q: profile.bounds.map(|b| b.q),
            bound_u: profile.bounds.map(|b| b.u),
            near_singular: profile.near_singular,
        }
    }
}

/// Average-versus-supremum policy shift, reported for tightness
/// inspection.
#[derive(Debug, Serialize)]
pub struct SupComparisonRow {
    pub average: f64,
    pub supremum: f64,
    pub ratio: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct ImproveReport {
    pub toolkit_version: String,
    pub instance_digest: String,
    pub elapsed_ms: f64,
    pub initial_j: f64,
    pub final_j: f64,
    pub optimality_gap: f64,
    pub terminated_reason: TerminationReason,
    pub steps: Vec<ImprovementStep>,
}

fn csv_field(value: Option<f64>) -> String {
    value.map_or(String::new(), |v| format!("{v}"))
}

impl BoundsReport {
    /// Flat table: bounds, the identity, and the lemma checks share one
    /// header. Comma delimiter, '.' decimal point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,kind,bound_value,exact_value,slack,applicable,pass\n");
        for row in &self.bounds {
            out.push_str(&format!(
                "{},bound,{},{},{},{},{}\n",
                row.report.name,
                csv_field(row.report.bound_value),
                row.report.exact_value,
                csv_field(row.report.slack),
                row.report.applicable,
                row.pass
            ));
        }
        out.push_str(&format!(
            "{},identity,{},{},{},true,{}\n",
            self.identity.name,
            self.identity.rhs,
            self.identity.lhs,
            -self.identity.residual,
            self.identity.pass
        ));
        for lemma in &self.lemmas {
            out.push_str(&format!(
                "{},lemma,{},{},{},true,{}\n",
                lemma.name, lemma.rhs, lemma.lhs, lemma.slack, lemma.pass
            ));
        }
        out
    }

    pub fn failing_row(&self) -> Option<String> {
        for row in &self.bounds {
            if !row.pass {
                return Some(row.report.name.clone());
            }
        }
        if !self.identity.pass {
            return Some(self.identity.name.clone());
        }
        self.lemmas.iter().find(|l| !l.pass).map(|l| l.name.clone())
    }
}
