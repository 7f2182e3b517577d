//! Plain-text model dump: a dimensions header per matrix section followed
//! by one whitespace-separated line per row.
//!
//! ```text
//! cmf-model 1
//! params <rank> <beta_y> <beta_u> <beta_s> <lambda> <max_iter> <rel_tol> <seed>
//! trace <n>
//! <n values>
//! matrix U <rows> <cols>
//! ...
//! profiles <n>
//! <user_id> <w_quality> <w_stall>
//! ```

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use super::{CmfModel, CmfParams, QoeProfile};
use crate::error::{Error, Result};

const MAGIC: &str = "cmf-model 1";

fn push_matrix(out: &mut String, name: &str, m: &DMatrix<f64>) {
    let _ = writeln!(out, "matrix {name} {} {}", m.nrows(), m.ncols());
    for r in 0..m.nrows() {
        let row: Vec<String> = m.row(r).iter().map(|x| x.to_string()).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
}

pub fn write_model(model: &CmfModel, profiles: &[QoeProfile], path: &Path) -> Result<()> {
    let p = &model.params;
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(
        out,
        "params {} {} {} {} {} {} {} {}",
        p.rank, p.beta_y, p.beta_u, p.beta_s, p.lambda, p.max_iter, p.rel_tol, p.seed
    );
    let _ = writeln!(out, "trace {}", model.trace.len());
    let trace: Vec<String> = model.trace.iter().map(|x| x.to_string()).collect();
    let _ = writeln!(out, "{}", trace.join(" "));
    push_matrix(&mut out, "U", &model.u);
    push_matrix(&mut out, "V", &model.v);
    push_matrix(&mut out, "A", &model.a);
    push_matrix(&mut out, "B", &model.b);
    let _ = writeln!(out, "profiles {}", profiles.len());
    for pr in profiles {
        let _ = writeln!(out, "{} {} {}", pr.user_id, pr.w_quality, pr.w_stall);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    ctx: String,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| Error::parse(self.ctx.clone(), "unexpected end of file"))
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::parse(format!("{} line {line}", self.ctx), msg)
    }

    fn header(&mut self, keyword: &str) -> Result<(usize, Vec<&'a str>)> {
        let (n, l) = self.next_line()?;
        let mut parts = l.split_whitespace();
        if parts.next() != Some(keyword) {
            return Err(self.err(n, format!("expected `{keyword}` section")));
        }
        Ok((n, parts.collect()))
    }

    fn numbers<T: std::str::FromStr>(&mut self, expect: usize) -> Result<Vec<T>> {
        let (n, l) = self.next_line()?;
        let vals = l
            .split_whitespace()
            .map(|t| t.parse::<T>().map_err(|_| self.err(n, format!("bad number `{t}`"))))
            .collect::<Result<Vec<T>>>()?;
        if vals.len() != expect {
            return Err(self.err(n, format!("expected {expect} values, found {}", vals.len())));
        }
        Ok(vals)
    }

    fn matrix(&mut self, name: &str) -> Result<DMatrix<f64>> {
        let (n, dims) = self.header("matrix")?;
        if dims.len() != 3 || dims[0] != name {
            return Err(self.err(n, format!("expected `matrix {name} <rows> <cols>`")));
        }
        let rows: usize = dims[1].parse().map_err(|_| self.err(n, "bad row count"))?;
        let cols: usize = dims[2].parse().map_err(|_| self.err(n, "bad column count"))?;
        let mut m = DMatrix::zeros(rows, cols);
        for r in 0..rows {
            let vals = if cols == 0 { Vec::new() } else { self.numbers::<f64>(cols)? };
            if cols == 0 {
                self.next_line()?;
            }
            for (c, v) in vals.into_iter().enumerate() {
                m[(r, c)] = v;
            }
        }
        Ok(m)
    }
}

pub fn read_model(path: &Path) -> Result<(CmfModel, Vec<QoeProfile>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text, &path.display().to_string())
}

pub(crate) fn parse_model(text: &str, ctx: &str) -> Result<(CmfModel, Vec<QoeProfile>)> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        ctx: ctx.to_string(),
    };
    let (n, magic) = lines.next_line()?;
    if magic.trim() != MAGIC {
        return Err(lines.err(n, format!("expected `{MAGIC}`")));
    }
    let (n, p) = lines.header("params")?;
    if p.len() != 8 {
        return Err(lines.err(n, "params needs 8 values"));
    }
    let bad = |_| lines.err(n, "bad parameter value");
    let params = CmfParams {
        rank: p[0].parse().map_err(bad)?,
        beta_y: p[1].parse().map_err(|_| lines.err(n, "bad beta_y"))?,
        beta_u: p[2].parse().map_err(|_| lines.err(n, "bad beta_u"))?,
        beta_s: p[3].parse().map_err(|_| lines.err(n, "bad beta_s"))?,
        lambda: p[4].parse().map_err(|_| lines.err(n, "bad lambda"))?,
        max_iter: p[5].parse().map_err(|_| lines.err(n, "bad max_iter"))?,
        rel_tol: p[6].parse().map_err(|_| lines.err(n, "bad rel_tol"))?,
        seed: p[7].parse().map_err(|_| lines.err(n, "bad seed"))?,
    };
    let (n, t) = lines.header("trace")?;
    let len: usize = t.first().and_then(|s| s.parse().ok()).ok_or_else(|| lines.err(n, "bad trace length"))?;
    let trace = if len == 0 {
        lines.next_line()?;
        Vec::new()
    } else {
        lines.numbers::<f64>(len)?
    };
    let u = lines.matrix("U")?;
    let v = lines.matrix("V")?;
    let a = lines.matrix("A")?;
    let b = lines.matrix("B")?;
    let (n, c) = lines.header("profiles")?;
    let count: usize = c.first().and_then(|s| s.parse().ok()).ok_or_else(|| lines.err(n, "bad profile count"))?;
    let mut profiles = Vec::with_capacity(count);
    for _ in 0..count {
        let (n, l) = lines.next_line()?;
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(lines.err(n, "profile lines are `<user_id> <w_quality> <w_stall>`"));
        }
        let user_id = parts[0].parse().map_err(|_| lines.err(n, "bad user id"))?;
        let w_quality = parts[1].parse().map_err(|_| lines.err(n, "bad w_quality"))?;
        let w_stall = parts[2].parse().map_err(|_| lines.err(n, "bad w_stall"))?;
        profiles.push(QoeProfile {
            user_id,
            w_quality,
            w_stall,
        });
    }
    Ok((
        CmfModel {
            u,
            v,
            a,
            b,
            params,
            trace,
        },
        profiles,
    ))
}

/// Only the profile section of a model dump.
pub fn read_profiles(path: &Path) -> Result<Vec<QoeProfile>> {
    read_model(path).map(|(_, p)| p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trip() {
        let model = CmfModel {
            u: DMatrix::from_row_slice(2, 2, &[0.1, -0.2, 1.0 / 3.0, 4e-17]),
            v: DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
            a: DMatrix::zeros(0, 2),
            b: DMatrix::from_row_slice(1, 2, &[0.5, 0.25]),
            params: CmfParams::default(),
            trace: vec![3.0, 2.5, 2.25],
        };
        let profiles = vec![QoeProfile::new(0, 0.8), QoeProfile::new(1, 0.1)];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        write_model(&model, &profiles, &path).unwrap();
        let (m2, p2) = read_model(&path).unwrap();
        assert_eq!(m2, model);
        assert_eq!(p2, profiles);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_model("hello\n", "x").is_err());
        assert!(parse_model("cmf-model 1\nparams 1 2\n", "x").is_err());
    }
}
