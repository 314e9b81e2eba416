//! Plain-text bundles for trained gains and reduced models.
//!
//! ```text
//! bundle,gain,1
//! text,mode,linear
//! matrix,P,2,2
//! 1.0000000000000000e0,0.0000000000000000e0
//! 0.0000000000000000e0,1.0000000000000000e0
//! ```
//!
//! Floats carry 17 significant digits so a save/load round trip is exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::dual_enkf::{GainApprox, GainMode};
use crate::error::{Error, Result};
use crate::reduced_model::{ReducedModel, TimeDomain};

const VERSION: u32 = 1;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Default)]
struct Bundle {
    kind: String,
    text: BTreeMap<String, String>,
    scalars: BTreeMap<String, f64>,
    matrices: BTreeMap<String, DMatrix<f64>>,
    order: Vec<(char, String)>,
}

impl Bundle {
    fn new(kind: &str) -> Self {
        Self {
            kind: kind.to_string(),
            ..Self::default()
        }
    }

    fn text(mut self, key: &str, value: &str) -> Self {
        self.order.push(('t', key.into()));
        self.text.insert(key.into(), value.into());
        self
    }

    fn scalar(mut self, key: &str, value: f64) -> Self {
        self.order.push(('s', key.into()));
        self.scalars.insert(key.into(), value);
        self
    }

    fn matrix(mut self, key: &str, value: &DMatrix<f64>) -> Self {
        self.order.push(('m', key.into()));
        self.matrices.insert(key.into(), value.clone());
        self
    }

    fn render(&self) -> String {
        let mut out = format!("bundle,{},{VERSION}\n", self.kind);
        for (tag, key) in &self.order {
            match tag {
                't' => writeln!(out, "text,{key},{}", self.text[key]).unwrap(),
                's' => writeln!(out, "scalar,{key},{}", fmt_f64(self.scalars[key])).unwrap(),
                _ => {
                    let m = &self.matrices[key];
                    writeln!(out, "matrix,{key},{},{}", m.nrows(), m.ncols()).unwrap();
                    for i in 0..m.nrows() {
                        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_f64(m[(i, j)])).collect();
                        writeln!(out, "{}", row.join(",")).unwrap();
                    }
                }
            }
        }
        out
    }

    fn parse(src: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut lines = src.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let (_, head) = lines.next().ok_or_else(|| err(1, "empty bundle".into()))?;
        let fields: Vec<&str> = head.split(',').collect();
        if fields.len() != 3 || fields[0] != "bundle" {
            return Err(err(1, format!("expected bundle header, got `{head}`")));
        }
        if fields[2] != VERSION.to_string() {
            return Err(err(1, format!("unsupported bundle version {}", fields[2])));
        }
        let mut b = Bundle::new(fields[1]);
        while let Some((no, line)) = lines.next() {
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            match (f[0], f.len()) {
                ("text", 3) => {
                    b.text.insert(f[1].into(), f[2].into());
                }
                ("scalar", 3) => {
                    let v = f[2].parse().map_err(|_| err(no, format!("bad number `{}`", f[2])))?;
                    b.scalars.insert(f[1].into(), v);
                }
                ("matrix", 4) => {
                    let rows: usize = f[2].parse().map_err(|_| err(no, format!("bad row count `{}`", f[2])))?;
                    let cols: usize = f[3]
                        .parse()
                        .map_err(|_| err(no, format!("bad column count `{}`", f[3])))?;
                    let mut m = DMatrix::zeros(rows, cols);
                    for i in 0..rows {
                        let (rno, row) = lines
                            .next()
                            .ok_or_else(|| err(no, format!("matrix {} truncated", f[1])))?;
                        let vals: Vec<&str> = if cols == 0 {
                            Vec::new()
                        } else {
                            row.split(',').collect()
                        };
                        if vals.len() != cols {
                            return Err(err(rno, format!("expected {cols} values, got {}", vals.len())));
                        }
                        for (j, v) in vals.iter().enumerate() {
                            m[(i, j)] = v.parse().map_err(|_| err(rno, format!("bad number `{v}`")))?;
                        }
                    }
                    b.matrices.insert(f[1].into(), m);
                }
                _ => return Err(err(no, format!("unrecognized record `{line}`"))),
            }
        }
        Ok(b)
    }

    fn expect_kind(&self, kind: &str, path: &Path) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                msg: format!("expected a {kind} bundle, found {}", self.kind),
            });
        }
        Ok(())
    }

    fn get_text(&self, key: &str, path: &Path) -> Result<&str> {
        self.text.get(key).map(String::as_str).ok_or_else(|| missing(key, path))
    }

    fn get_scalar(&self, key: &str, path: &Path) -> Result<f64> {
        self.scalars.get(key).copied().ok_or_else(|| missing(key, path))
    }

    fn take_matrix(&mut self, key: &str, path: &Path) -> Result<DMatrix<f64>> {
        self.matrices.remove(key).ok_or_else(|| missing(key, path))
    }
}

fn missing(key: &str, path: &Path) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        msg: format!("missing field `{key}`"),
    }
}

fn write(path: &Path, body: String) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn mode_name(mode: GainMode) -> &'static str {
    match mode {
        GainMode::Linear => "linear",
        GainMode::Nonlinear => "nonlinear",
    }
}

pub fn render_gain(gain: &GainApprox) -> String {
    Bundle::new("gain")
        .text("mode", mode_name(gain.mode))
        .matrix("S0", &gain.s0)
        .matrix("P", &gain.p)
        .render()
}

pub fn save_gain(path: &Path, gain: &GainApprox) -> Result<()> {
    write(path, render_gain(gain))
}

pub fn load_gain(path: &Path) -> Result<GainApprox> {
    let mut b = Bundle::parse(&read(path)?, path)?;
    b.expect_kind("gain", path)?;
    let mode = match b.get_text("mode", path)? {
        "linear" => GainMode::Linear,
        "nonlinear" => GainMode::Nonlinear,
        other => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                msg: format!("unknown gain mode `{other}`"),
            })
        }
    };
    let s0 = b.take_matrix("S0", path)?;
    let p = b.take_matrix("P", path)?;
    if !s0.is_square() || s0.shape() != p.shape() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: "S0 and P must be square and of equal size".into(),
        });
    }
    Ok(GainApprox { s0, p, mode })
}

pub fn render_reduced_model(model: &ReducedModel) -> String {
    let domain = match model.domain {
        TimeDomain::Discrete => "discrete",
        TimeDomain::Continuous => "continuous",
    };
    Bundle::new("reduced_model")
        .text("domain", domain)
        .scalar("dt", model.dt_fit)
        .matrix("A", &model.a)
        .matrix("B", &model.b)
        .matrix("Phi", &model.phi)
        .render()
}

pub fn save_reduced_model(path: &Path, model: &ReducedModel) -> Result<()> {
    write(path, render_reduced_model(model))
}

pub fn load_reduced_model(path: &Path) -> Result<ReducedModel> {
    let mut b = Bundle::parse(&read(path)?, path)?;
    b.expect_kind("reduced_model", path)?;
    let domain = match b.get_text("domain", path)? {
        "discrete" => TimeDomain::Discrete,
        "continuous" => TimeDomain::Continuous,
        other => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                msg: format!("unknown domain `{other}`"),
            })
        }
    };
    let dt_fit = b.get_scalar("dt", path)?;
    let a = b.take_matrix("A", path)?;
    let bm = b.take_matrix("B", path)?;
    let phi = b.take_matrix("Phi", path)?;
    if !a.is_square() || bm.nrows() != a.nrows() || phi.nrows() != a.nrows() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: "inconsistent reduced model shapes".into(),
        });
    }
    Ok(ReducedModel {
        a,
        b: bm,
        phi,
        dt_fit,
        domain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gain_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gain.txt");
        let p = DMatrix::from_row_slice(2, 2, &[2.0, 0.1 + 0.2, 0.1 + 0.2, std::f64::consts::PI]);
        let gain = GainApprox::from_value_matrix(p, GainMode::Nonlinear).unwrap();
        save_gain(&path, &gain).unwrap();
        assert_eq!(load_gain(&path).unwrap(), gain);
    }

    #[test]
    fn model_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        let model = ReducedModel {
            a: DMatrix::from_fn(3, 3, |i, j| (i as f64 - j as f64) / 7.0),
            b: DMatrix::from_fn(3, 2, |i, j| 1e-300 * (i + j) as f64),
            phi: DMatrix::from_fn(3, 5, |i, j| ((i * 5 + j) as f64).sin()),
            dt_fit: 1e-3,
            domain: TimeDomain::Continuous,
        };
        save_reduced_model(&path, &model).unwrap();
        assert_eq!(load_reduced_model(&path).unwrap(), model);
    }

    #[test]
    fn wrong_kind_and_truncation_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gain.txt");
        let gain = GainApprox::from_value_matrix(DMatrix::identity(2, 2), GainMode::Linear).unwrap();
        save_gain(&path, &gain).unwrap();
        assert!(matches!(load_reduced_model(&path), Err(Error::Parse { .. })));
        let text = render_gain(&gain);
        let cut: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
        std::fs::write(&path, cut).unwrap();
        assert!(matches!(load_gain(&path), Err(Error::Parse { .. })));
        assert!(matches!(load_gain(&dir.path().join("missing")), Err(Error::Io { .. })));
    }
}
