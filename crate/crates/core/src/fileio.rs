//! Problem and design files.
//!
//! Problems are JSON documents with a design space, a model block, a list
//! of constraint specifications (named builders or raw rows), the design
//! size `N`, and the criterion tag. Designs are small CSVs: a header line
//! followed by one row per design point carrying at least a `count` column
//! and an `index` (1-based) or `dose` column to identify the point. See
//! `docs/formats.md` in the repository for the field-by-field reference.

use crate::constraint::{self, ConstraintSense, LinearSparsityConstraint};
use crate::design::ExactDesign;
use crate::error::Error;
use crate::linalg::SymMatrix;
use crate::models::{
    cr_cost_coefficients, cr_failure_coefficients, CrModel, CrParameters, InformationModel,
    RawMatrixModel,
};
use crate::problem::LasProblem;
use crate::space::{DesignPoint, DesignSpace};
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    space: SpaceSpec,
    model: ModelSpec,
    #[serde(default)]
    constraints: Vec<ConstraintSpec>,
    #[serde(rename = "N")]
    size: u32,
    #[serde(default)]
    criterion: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpaceSpec {
    points: Vec<PointSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum PointSpec {
    Scalar(f64),
    Full { label: String, coords: Vec<f64> },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum ModelSpec {
    ContinuationRatio {
        a1: f64,
        a2: f64,
        b1: f64,
        b2: f64,
    },
    RawMatrices {
        rank_bound: usize,
        matrices: Vec<Vec<Vec<f64>>>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ScalarOrVec<T> {
    Scalar(T),
    Vec(Vec<T>),
}

impl<T: Copy> ScalarOrVec<T> {
    fn expand(&self, n: usize) -> Vec<T> {
        match self {
            ScalarOrVec::Scalar(v) => vec![*v; n],
            ScalarOrVec::Vec(vs) => vs.clone(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum ConstraintSpec {
    /// Cap on the expected number of failed trials, coefficients localized
    /// at the model's nominal parameter. Continuation-ratio models only.
    ExpectedFailures { limit: f64 },
    /// Budget with the dose-response cost model (misdosing costs per
    /// patient, manufacturing overhead per distinct dose).
    CrCostBudget { limit: f64 },
    MaxSupportSize { size: u32 },
    MinSupportSize { size: u32 },
    SeparationWindows { window: usize },
    SupportReplicationBounds {
        lower: ScalarOrVec<u32>,
        upper: ScalarOrVec<u32>,
    },
    Budget {
        per_trial: Vec<f64>,
        overhead: Vec<f64>,
        limit: f64,
    },
    Exclusion { coeffs: Vec<f64>, bound: f64 },
    Inclusion { coeffs: Vec<f64>, bound: f64 },
    Raw {
        count_coeffs: Vec<f64>,
        support_coeffs: Vec<f64>,
        rhs: f64,
        sense: String,
    },
}

fn parse_error(path: &str, detail: impl std::fmt::Display) -> Error {
    Error::Parse {
        path: path.to_string(),
        detail: detail.to_string(),
    }
}

/// Reads a problem file from disk.
pub fn read_problem(path: &Path) -> Result<LasProblem, Error> {
    let text = std::fs::read_to_string(path)?;
    parse_problem_str(&text, &path.display().to_string())
}

/// Parses a problem from JSON text; `name` labels error messages.
pub fn parse_problem_str(text: &str, name: &str) -> Result<LasProblem, Error> {
    let file: ProblemFile =
        serde_json::from_str(text).map_err(|e| parse_error(name, e))?;

    let points = file
        .space
        .points
        .into_iter()
        .map(|p| match p {
            PointSpec::Scalar(x) => DesignPoint::scalar(x),
            PointSpec::Full { label, coords } => DesignPoint { label, coords },
        })
        .collect();
    let space = DesignSpace::new(points)?;
    let n = space.len();

    let model = match file.model {
        ModelSpec::ContinuationRatio { a1, a2, b1, b2 } => InformationModel::ContinuationRatio(
            CrModel::new(CrParameters::new(a1, a2, b1, b2)?),
        ),
        ModelSpec::RawMatrices {
            rank_bound,
            matrices,
        } => {
            let mats = matrices
                .iter()
                .map(|rows| SymMatrix::from_rows(rows))
                .collect::<Result<Vec<_>, _>>()?;
            InformationModel::RawMatrices(RawMatrixModel::new(mats, rank_bound)?)
        }
    };

    if let Some(tag) = &file.criterion {
        if tag != "D" {
            return Err(parse_error(
                name,
                format!("unsupported criterion `{tag}` (only \"D\" is available)"),
            ));
        }
    }

    let theta = model.continuation_ratio().map(|cr| cr.theta0);
    let require_cr = |what: &str| -> Result<CrParameters, Error> {
        theta.ok_or_else(|| {
            parse_error(
                name,
                format!("constraint `{what}` needs a continuation_ratio model"),
            )
        })
    };

    let mut rows = Vec::new();
    for spec in file.constraints {
        match spec {
            ConstraintSpec::ExpectedFailures { limit } => {
                let theta = require_cr("expected_failures")?;
                rows.push(constraint::exclusion(
                    cr_failure_coefficients(&space, &theta),
                    limit,
                )?);
            }
            ConstraintSpec::CrCostBudget { limit } => {
                let theta = require_cr("cr_cost_budget")?;
                let (per_trial, overhead) = cr_cost_coefficients(&space, &theta);
                rows.push(constraint::budget(per_trial, overhead, limit)?);
            }
            ConstraintSpec::MaxSupportSize { size } => {
                rows.push(constraint::max_support_size(n, size, file.size)?);
            }
            ConstraintSpec::MinSupportSize { size } => {
                rows.push(constraint::min_support_size(n, size, file.size)?);
            }
            ConstraintSpec::SeparationWindows { window } => {
                rows.extend(constraint::separation_windows(n, window)?);
            }
            ConstraintSpec::SupportReplicationBounds { lower, upper } => {
                rows.extend(constraint::support_replication_bounds(
                    &lower.expand(n),
                    &upper.expand(n),
                    file.size,
                )?);
            }
            ConstraintSpec::Budget {
                per_trial,
                overhead,
                limit,
            } => rows.push(constraint::budget(per_trial, overhead, limit)?),
            ConstraintSpec::Exclusion { coeffs, bound } => {
                rows.push(constraint::exclusion(coeffs, bound)?);
            }
            ConstraintSpec::Inclusion { coeffs, bound } => {
                rows.push(constraint::inclusion(coeffs, bound)?);
            }
            ConstraintSpec::Raw {
                count_coeffs,
                support_coeffs,
                rhs,
                sense,
            } => {
                let sense = match sense.as_str() {
                    "le" | "<=" => ConstraintSense::Le,
                    "eq" | "=" => ConstraintSense::Eq,
                    other => {
                        return Err(parse_error(
                            name,
                            format!("unknown sense `{other}` (use \"le\" or \"eq\")"),
                        ))
                    }
                };
                rows.push(LinearSparsityConstraint::new(
                    count_coeffs,
                    support_coeffs,
                    rhs,
                    sense,
                )?);
            }
        }
    }

    LasProblem::new(space, model, rows, file.size)
}

/// Reads a design CSV against a known space.
pub fn read_design(path: &Path, space: &DesignSpace) -> Result<ExactDesign, Error> {
    let text = std::fs::read_to_string(path)?;
    parse_design_str(&text, &path.display().to_string(), space)
}

/// Parses a design CSV. The header must name a `count` column plus `index`
/// and/or `dose`; unlisted points default to count 0.
pub fn parse_design_str(
    text: &str,
    name: &str,
    space: &DesignSpace,
) -> Result<ExactDesign, Error> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .enumerate()
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_error(name, "empty design file"))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let col = |what: &str| columns.iter().position(|c| *c == what);
    let count_col = col("count")
        .ok_or_else(|| parse_error(name, "header must contain a `count` column"))?;
    let index_col = col("index");
    let dose_col = col("dose");
    if index_col.is_none() && dose_col.is_none() {
        return Err(parse_error(
            name,
            "header must contain an `index` or `dose` column",
        ));
    }

    let mut counts = vec![0u32; space.len()];
    for (lineno, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(parse_error(
                name,
                format!(
                    "line {}: expected {} fields, got {}",
                    lineno + 1,
                    columns.len(),
                    fields.len()
                ),
            ));
        }
        let count: u32 = fields[count_col].parse().map_err(|_| {
            parse_error(
                name,
                format!("line {}: bad count `{}`", lineno + 1, fields[count_col]),
            )
        })?;
        let point = if let Some(ic) = index_col {
            let index: usize = fields[ic].parse().map_err(|_| {
                parse_error(
                    name,
                    format!("line {}: bad index `{}`", lineno + 1, fields[ic]),
                )
            })?;
            if index == 0 || index > space.len() {
                return Err(parse_error(
                    name,
                    format!(
                        "line {}: index {} out of range 1..={}",
                        lineno + 1,
                        index,
                        space.len()
                    ),
                ));
            }
            index - 1
        } else {
            let field = fields[dose_col.expect("checked above")];
            let dose: f64 = field.parse().map_err(|_| {
                parse_error(name, format!("line {}: bad dose `{field}`", lineno + 1))
            })?;
            space
                .index_of_coord(dose)
                .or_else(|| space.index_of_label(field))
                .ok_or_else(|| Error::UnknownPoint(field.to_string()))?
        };
        counts[point] += count;
    }
    Ok(ExactDesign::new(counts))
}

/// Renders a design as `index,dose,count` CSV at full precision, support
/// points only. Such files re-read losslessly against the same space.
pub fn render_design(design: &ExactDesign, space: &DesignSpace) -> String {
    let mut out = String::from("index,dose,count\n");
    for i in 0..space.len() {
        let count = design.count(i);
        if count > 0 {
            out.push_str(&format!("{},{},{}\n", i + 1, space.coord(i), count));
        }
    }
    out
}

pub fn write_design(design: &ExactDesign, space: &DesignSpace, path: &Path) -> Result<(), Error> {
    std::fs::write(path, render_design(design, space))?;
    Ok(())
}
