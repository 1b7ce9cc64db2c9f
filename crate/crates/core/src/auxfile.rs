//! Portable text encoding of auxiliary problems, for handing the compiled
//! linear formulation to external integer-programming tooling.
//!
//! The format is line-oriented and whitespace-insensitive; `#` starts a
//! comment. Indices are 1-based. Floats are written in shortest
//! round-tripping decimal form, so write → read is lossless. See
//! `docs/aux-format.md` in the repository for the grammar.

use crate::error::Error;
use crate::reduce::{AuxPointKind, AuxRow, AuxRowKind, AuxSense, AuxiliaryProblem};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

pub const FORMAT_VERSION: u32 = 1;

/// Serializes the auxiliary problem to a string in the portable format.
pub fn render_auxiliary(aux: &AuxiliaryProblem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# auxiliary design problem, portable text format");
    let _ = writeln!(out, "auxprob {FORMAT_VERSION}");
    let _ = writeln!(
        out,
        "header n {} r {} N {} m {}",
        aux.source_len(),
        aux.rank_bound(),
        aux.size(),
        aux.dim()
    );
    let _ = writeln!(out, "vars {}", aux.len());
    for (idx, kind) in aux.kinds().iter().enumerate() {
        match kind {
            AuxPointKind::Replica { point, copy } => {
                // Replicas are general integers bounded by the design size.
                let _ = writeln!(
                    out,
                    "v {} replica {} {} int 0 {}",
                    idx + 1,
                    point + 1,
                    copy + 1,
                    aux.size()
                );
            }
            AuxPointKind::Label { point } => {
                let _ = writeln!(out, "v {} label {} bin 0 1", idx + 1, point + 1);
            }
        }
    }
    let _ = writeln!(out, "rows {}", aux.rows().len());
    for (idx, row) in aux.rows().iter().enumerate() {
        let kind = match row.kind {
            AuxRowKind::ReplicaEquality { point, copy } => {
                format!("repeq {} {}", point + 1, copy + 1)
            }
            AuxRowKind::LabelCap { point } => format!("labelcap {}", point + 1),
            AuxRowKind::LinkLower { point } => format!("linklo {}", point + 1),
            AuxRowKind::LinkUpper { point } => format!("linkup {}", point + 1),
            AuxRowKind::Las { index } => format!("las {}", index + 1),
            AuxRowKind::Size => "size".to_string(),
        };
        let sense = match row.sense {
            AuxSense::Le => "le",
            AuxSense::Eq => "eq",
        };
        let _ = write!(
            out,
            "r {} {kind} {sense} {} {}",
            idx + 1,
            row.rhs,
            row.coeffs.len()
        );
        for &(var, coeff) in &row.coeffs {
            let _ = write!(out, " {} {}", var + 1, coeff);
        }
        out.push('\n');
    }
    let _ = writeln!(out, "size {}", aux.size());
    let _ = writeln!(out, "regressors");
    for (idx, reg) in aux.regressors().iter().enumerate() {
        let _ = write!(out, "g {}", idx + 1);
        for v in reg {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    out.push_str("end\n");
    out
}

/// Writes the auxiliary problem to a file.
pub fn write_auxiliary(aux: &AuxiliaryProblem, path: &Path) -> Result<(), Error> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(render_auxiliary(aux).as_bytes())?;
    Ok(())
}

/// Reads an auxiliary problem back from the portable format. The result has
/// no source back-reference; mapping through `kappa` still works since it
/// only needs the auxiliary structure.
pub fn read_auxiliary(path: &Path) -> Result<AuxiliaryProblem, Error> {
    let file = std::fs::File::open(path)?;
    parse_auxiliary(BufReader::new(file), &path.display().to_string())
}

pub fn parse_auxiliary_str(text: &str, name: &str) -> Result<AuxiliaryProblem, Error> {
    parse_auxiliary(BufReader::new(text.as_bytes()), name)
}

fn parse_auxiliary<R: Read>(reader: BufReader<R>, path: &str) -> Result<AuxiliaryProblem, Error> {
    let fail = |line: usize, detail: String| Error::Parse {
        path: path.to_string(),
        detail: format!("line {line}: {detail}"),
    };

    let mut lines = Vec::new();
    for (no, line) in reader.lines().enumerate() {
        let line = line?;
        let stripped = line.split('#').next().unwrap_or("").trim().to_string();
        if !stripped.is_empty() {
            lines.push((no + 1, stripped));
        }
    }
    let mut cursor = lines.into_iter().peekable();

    let mut next_tokens = |expect: &str| -> Result<(usize, Vec<String>), Error> {
        let (no, line) = cursor.next().ok_or_else(|| Error::Parse {
            path: path.to_string(),
            detail: format!("unexpected end of file, expected `{expect}`"),
        })?;
        let tokens: Vec<String> = line.split_whitespace().map(str::to_string).collect();
        Ok((no, tokens))
    };

    let (no, magic) = next_tokens("auxprob")?;
    if magic.len() != 2 || magic[0] != "auxprob" {
        return Err(fail(no, "expected `auxprob <version>`".into()));
    }
    let version: u32 = magic[1]
        .parse()
        .map_err(|_| fail(no, "bad version number".into()))?;
    if version != FORMAT_VERSION {
        return Err(fail(no, format!("unsupported format version {version}")));
    }

    let (no, header) = next_tokens("header")?;
    if header.len() != 9
        || header[0] != "header"
        || header[1] != "n"
        || header[3] != "r"
        || header[5] != "N"
        || header[7] != "m"
    {
        return Err(fail(no, "expected `header n <n> r <r> N <N> m <m>`".into()));
    }
    let n: usize = header[2].parse().map_err(|_| fail(no, "bad n".into()))?;
    let r: usize = header[4].parse().map_err(|_| fail(no, "bad r".into()))?;
    let size: u32 = header[6].parse().map_err(|_| fail(no, "bad N".into()))?;
    let m: usize = header[8].parse().map_err(|_| fail(no, "bad m".into()))?;
    let expected_vars = n * r + n;

    let (no, vars_line) = next_tokens("vars")?;
    if vars_line.len() != 2 || vars_line[0] != "vars" {
        return Err(fail(no, "expected `vars <count>`".into()));
    }
    let nvars: usize = vars_line[1]
        .parse()
        .map_err(|_| fail(no, "bad var count".into()))?;
    if nvars != expected_vars {
        return Err(fail(
            no,
            format!("var count {nvars} does not match n*r + n = {expected_vars}"),
        ));
    }

    let mut kinds = Vec::with_capacity(nvars);
    for k in 0..nvars {
        let (no, t) = next_tokens("v")?;
        if t.len() < 4 || t[0] != "v" {
            return Err(fail(no, "expected variable line `v ...`".into()));
        }
        let idx: usize = t[1].parse().map_err(|_| fail(no, "bad var index".into()))?;
        if idx != k + 1 {
            return Err(fail(no, format!("variable {idx} out of order")));
        }
        match t[2].as_str() {
            "replica" => {
                if t.len() != 8 || t[5] != "int" {
                    return Err(fail(
                        no,
                        "expected `v <i> replica <point> <copy> int <lb> <ub>`".into(),
                    ));
                }
                let point: usize = t[3].parse().map_err(|_| fail(no, "bad point".into()))?;
                let copy: usize = t[4].parse().map_err(|_| fail(no, "bad copy".into()))?;
                if point == 0 || point > n || copy == 0 || copy > r {
                    return Err(fail(no, "replica indices out of range".into()));
                }
                kinds.push(AuxPointKind::Replica {
                    point: point - 1,
                    copy: copy - 1,
                });
            }
            "label" => {
                if t.len() != 7 || t[4] != "bin" {
                    return Err(fail(no, "expected `v <i> label <point> bin 0 1`".into()));
                }
                let point: usize = t[3].parse().map_err(|_| fail(no, "bad point".into()))?;
                if point == 0 || point > n {
                    return Err(fail(no, "label index out of range".into()));
                }
                kinds.push(AuxPointKind::Label { point: point - 1 });
            }
            other => return Err(fail(no, format!("unknown variable kind `{other}`"))),
        }
    }

    let (no, rows_line) = next_tokens("rows")?;
    if rows_line.len() != 2 || rows_line[0] != "rows" {
        return Err(fail(no, "expected `rows <count>`".into()));
    }
    let nrows: usize = rows_line[1]
        .parse()
        .map_err(|_| fail(no, "bad row count".into()))?;

    let mut rows = Vec::with_capacity(nrows);
    for k in 0..nrows {
        let (no, t) = next_tokens("r")?;
        if t.len() < 5 || t[0] != "r" {
            return Err(fail(no, "expected row line `r ...`".into()));
        }
        let idx: usize = t[1].parse().map_err(|_| fail(no, "bad row index".into()))?;
        if idx != k + 1 {
            return Err(fail(no, format!("row {idx} out of order")));
        }
        let (kind, rest) = match t[2].as_str() {
            "repeq" => {
                let point: usize = t[3].parse().map_err(|_| fail(no, "bad point".into()))?;
                let copy: usize = t[4].parse().map_err(|_| fail(no, "bad copy".into()))?;
                (
                    AuxRowKind::ReplicaEquality {
                        point: point - 1,
                        copy: copy - 1,
                    },
                    &t[5..],
                )
            }
            "labelcap" | "linklo" | "linkup" | "las" => {
                let arg: usize = t[3].parse().map_err(|_| fail(no, "bad argument".into()))?;
                let kind = match t[2].as_str() {
                    "labelcap" => AuxRowKind::LabelCap { point: arg - 1 },
                    "linklo" => AuxRowKind::LinkLower { point: arg - 1 },
                    "linkup" => AuxRowKind::LinkUpper { point: arg - 1 },
                    _ => AuxRowKind::Las { index: arg - 1 },
                };
                (kind, &t[4..])
            }
            "size" => (AuxRowKind::Size, &t[3..]),
            other => return Err(fail(no, format!("unknown row kind `{other}`"))),
        };
        if rest.len() < 3 {
            return Err(fail(no, "truncated row line".into()));
        }
        let sense = match rest[0].as_str() {
            "le" => AuxSense::Le,
            "eq" => AuxSense::Eq,
            other => return Err(fail(no, format!("unknown sense `{other}`"))),
        };
        let rhs: f64 = rest[1].parse().map_err(|_| fail(no, "bad rhs".into()))?;
        let nnz: usize = rest[2].parse().map_err(|_| fail(no, "bad nnz".into()))?;
        if rest.len() != 3 + 2 * nnz {
            return Err(fail(
                no,
                format!("expected {nnz} (index, value) pairs, got {}", (rest.len() - 3) / 2),
            ));
        }
        let mut coeffs = Vec::with_capacity(nnz);
        for p in 0..nnz {
            let var: usize = rest[3 + 2 * p]
                .parse()
                .map_err(|_| fail(no, "bad column index".into()))?;
            let coeff: f64 = rest[4 + 2 * p]
                .parse()
                .map_err(|_| fail(no, "bad coefficient".into()))?;
            if var == 0 || var > nvars {
                return Err(fail(no, format!("column {var} out of range")));
            }
            coeffs.push((var - 1, coeff));
        }
        rows.push(AuxRow {
            coeffs,
            rhs,
            sense,
            kind,
        });
    }

    let (no, size_line) = next_tokens("size")?;
    if size_line.len() != 2 || size_line[0] != "size" {
        return Err(fail(no, "expected `size <N>`".into()));
    }
    let size_check: u32 = size_line[1]
        .parse()
        .map_err(|_| fail(no, "bad size".into()))?;
    if size_check != size {
        return Err(fail(no, "size line disagrees with header".into()));
    }

    let (no, reg_header) = next_tokens("regressors")?;
    if reg_header.len() != 1 || reg_header[0] != "regressors" {
        return Err(fail(no, "expected `regressors`".into()));
    }
    let mut regressors = Vec::with_capacity(nvars);
    for k in 0..nvars {
        let (no, t) = next_tokens("g")?;
        if t.len() != 2 + m || t[0] != "g" {
            return Err(fail(no, format!("expected `g <i>` with {m} components")));
        }
        let idx: usize = t[1].parse().map_err(|_| fail(no, "bad index".into()))?;
        if idx != k + 1 {
            return Err(fail(no, format!("regressor {idx} out of order")));
        }
        let mut reg = Vec::with_capacity(m);
        for v in &t[2..] {
            reg.push(v.parse().map_err(|_| fail(no, "bad component".into()))?);
        }
        regressors.push(reg);
    }

    let (no, end) = next_tokens("end")?;
    if end.len() != 1 || end[0] != "end" {
        return Err(fail(no, "expected `end`".into()));
    }

    // Kinds must follow the canonical ordering: replicas lexicographic in
    // (point, copy), then labels by point.
    for (i, kind) in kinds.iter().enumerate() {
        let expected = if i < n * r {
            AuxPointKind::Replica {
                point: i / r,
                copy: i % r,
            }
        } else {
            AuxPointKind::Label { point: i - n * r }
        };
        if *kind != expected {
            return Err(Error::Parse {
                path: path.to_string(),
                detail: format!("variable {} breaks the canonical point ordering", i + 1),
            });
        }
    }

    Ok(crate::reduce::assemble_auxiliary(
        n, r, m, size, kinds, regressors, rows,
    ))
}

/// Structural equality of two auxiliary problems (ignores the source
/// back-reference).
pub fn structurally_equal(a: &AuxiliaryProblem, b: &AuxiliaryProblem) -> bool {
    a.source_len() == b.source_len()
        && a.rank_bound() == b.rank_bound()
        && a.dim() == b.dim()
        && a.size() == b.size()
        && a.kinds() == b.kinds()
        && a.regressors() == b.regressors()
        && a.rows() == b.rows()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::FactorRoute;
    use crate::linalg::SymMatrix;
    use crate::models::{InformationModel, RawMatrixModel};
    use crate::problem::LasProblem;
    use crate::reduce::build_auxiliary;
    use crate::space::{DesignPoint, DesignSpace};

    fn toy_problem(n: usize, size: u32) -> LasProblem {
        let mats = (0..n)
            .map(|i| {
                let mut m = SymMatrix::zeros(2);
                m.add_scaled_outer(&[1.0, i as f64], 1.0);
                m
            })
            .collect();
        let model = InformationModel::RawMatrices(RawMatrixModel::new(mats, 1).unwrap());
        let points = (0..n).map(|i| DesignPoint::scalar(i as f64)).collect();
        LasProblem::new(DesignSpace::new(points).unwrap(), model, vec![], size).unwrap()
    }

    #[test]
    fn round_trip_is_structural_identity() {
        let problem = toy_problem(3, 4);
        let aux = build_auxiliary(&problem, FactorRoute::Eigen).unwrap();
        let text = render_auxiliary(&aux);
        let back = parse_auxiliary_str(&text, "test").unwrap();
        assert!(structurally_equal(&aux, &back));
        // And once more through the rendered form of the parse result.
        assert_eq!(text, render_auxiliary(&back));
    }

    #[test]
    fn toy_file_has_four_variables() {
        // n = 2, r = 1: two replicas and two labels.
        let problem = toy_problem(2, 3);
        let aux = build_auxiliary(&problem, FactorRoute::Eigen).unwrap();
        assert_eq!(aux.len(), 4);
        let text = render_auxiliary(&aux);
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 4);
        // Documented row order: label caps then linking pairs (no replica
        // equalities at r = 1, no mapped rows here).
        let rows: Vec<&str> = text
            .lines()
            .filter(|l| l.starts_with("r "))
            .collect();
        assert_eq!(rows.len(), 6);
        assert!(rows[0].contains("labelcap"));
        assert!(rows[2].contains("linklo"));
        assert!(rows[3].contains("linkup"));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "auxprob 1\nheader n 1 r 1 N 1 m 1\nvars 3\n";
        let err = parse_auxiliary_str(text, "broken").unwrap_err();
        match err {
            Error::Parse { path, detail } => {
                assert_eq!(path, "broken");
                assert!(detail.contains("line 3"), "{detail}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn comments_and_spacing_are_ignored() {
        let problem = toy_problem(2, 2);
        let aux = build_auxiliary(&problem, FactorRoute::Eigen).unwrap();
        let text = render_auxiliary(&aux);
        let noisy: String = text
            .lines()
            .map(|l| format!("  {l}   # trailing note\n\n"))
            .collect();
        let back = parse_auxiliary_str(&noisy, "noisy").unwrap();
        assert!(structurally_equal(&aux, &back));
    }
}
