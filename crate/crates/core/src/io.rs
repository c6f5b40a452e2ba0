//! Plain-text file formats. Every float is written with `{:.16e}`, which
//! round-trips `f64` exactly.
//!
//! Weight snapshot:
//!
//! ```text
//! TSLAB-W v1, <d>
//! <d lines of W, space separated>
//! <d lines of V>
//! ```
//!
//! Dataset snapshot:
//!
//! ```text
//! TSLAB-DATA v1, <d>, <L>, <N>
//! <gamma0> <u> <r> <alpha>
//! <w*>
//! <z>
//! <zeta>
//! then per prompt: d lines of X1 (L values each), d lines of X2, one line of L labels (+1/-1)
//! ```

use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use thiserror::Error;

use crate::datagen::{embed_prompt, Dataset, Label, Prompt, TaskVectors};
use crate::metrics::TrajectoryRecord;
use crate::model::BlockWeights;
use crate::numerics::Matrix;
use crate::spectral_edit::{EditOrder, EditRow, EditTarget};

pub const WEIGHTS_MAGIC: &str = "TSLAB-W v1";
pub const DATA_MAGIC: &str = "TSLAB-DATA v1";
pub const EDIT_HEADER: &str = "rho,order,target,acc_full,acc_p,acc_q";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

fn parse_err<T>(line: usize, msg: impl Into<String>) -> Result<T, FormatError> {
    Err(FormatError::Parse { line, msg: msg.into() })
}

pub fn trajectory_header() -> String {
    TrajectoryRecord::COLUMNS.join(",")
}

/// Numbered non-empty lines.
struct Lines<R> {
    inner: io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn new(r: R) -> Self {
        Self { inner: r.lines(), line: 0 }
    }

    fn next_line(&mut self) -> Result<String, FormatError> {
        loop {
            self.line += 1;
            match self.inner.next() {
                None => return parse_err(self.line, "unexpected end of file"),
                Some(l) => {
                    let l = l?;
                    if !l.trim().is_empty() {
                        return Ok(l);
                    }
                }
            }
        }
    }

    fn floats(&mut self, n: usize) -> Result<Vec<f64>, FormatError> {
        let l = self.next_line()?;
        let vals: Result<Vec<f64>, _> = l.split_whitespace().map(str::parse::<f64>).collect();
        match vals {
            Ok(v) if v.len() == n => Ok(v),
            Ok(v) => parse_err(self.line, format!("expected {n} values, found {}", v.len())),
            Err(e) => parse_err(self.line, format!("bad number: {e}")),
        }
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix, FormatError> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend(self.floats(cols)?);
        }
        Ok(Matrix::from_vec(rows, cols, data))
    }

    fn header(&mut self, magic: &str, fields: usize) -> Result<Vec<usize>, FormatError> {
        let l = self.next_line()?;
        let mut parts = l.split(',').map(str::trim);
        if parts.next() != Some(magic) {
            return parse_err(self.line, format!("expected header starting with \"{magic}\""));
        }
        let nums: Result<Vec<usize>, _> = parts.map(str::parse::<usize>).collect();
        match nums {
            Ok(v) if v.len() == fields => Ok(v),
            _ => parse_err(self.line, format!("header needs {fields} integer fields")),
        }
    }

    fn expect_end(&mut self) -> Result<(), FormatError> {
        for l in self.inner.by_ref() {
            self.line += 1;
            if !l?.trim().is_empty() {
                return parse_err(self.line, "trailing content");
            }
        }
        Ok(())
    }
}

fn write_row<W: Write>(out: &mut W, xs: impl IntoIterator<Item = f64>) -> io::Result<()> {
    let cells: Vec<String> = xs.into_iter().map(|x| format!("{x:.16e}")).collect();
    writeln!(out, "{}", cells.join(" "))
}

fn write_matrix<W: Write>(out: &mut W, m: &Matrix) -> io::Result<()> {
    for i in 0..m.rows() {
        write_row(out, m.row(i).iter().copied())?;
    }
    Ok(())
}

pub fn write_weights<W: Write>(out: &mut W, bw: &BlockWeights) -> io::Result<()> {
    writeln!(out, "{WEIGHTS_MAGIC}, {}", bw.d())?;
    write_matrix(out, &bw.w)?;
    write_matrix(out, &bw.v)
}

pub fn read_weights<R: BufRead>(r: R) -> Result<BlockWeights, FormatError> {
    let mut lines = Lines::new(r);
    let d = lines.header(WEIGHTS_MAGIC, 1)?[0];
    if d == 0 {
        return parse_err(1, "d must be positive");
    }
    let w = lines.matrix(d, d)?;
    let v = lines.matrix(d, d)?;
    lines.expect_end()?;
    Ok(BlockWeights::new(w, v))
}

pub fn write_dataset<W: Write>(out: &mut W, ds: &Dataset) -> io::Result<()> {
    let t = &ds.task;
    writeln!(out, "{DATA_MAGIC}, {}, {}, {}", ds.d, ds.len, ds.n)?;
    write_row(out, [t.gamma0, t.u, t.r, t.alpha])?;
    for v in [&t.w_star, &t.z, &t.zeta] {
        write_row(out, v.iter().copied())?;
    }
    for ep in &ds.prompts {
        let p = ep.to_prompt();
        write_matrix(out, &p.x1)?;
        write_matrix(out, &p.x2)?;
        let labels: Vec<&str> = p.labels.iter().map(|l| if *l == Label::Pos { "+1" } else { "-1" }).collect();
        writeln!(out, "{}", labels.join(" "))?;
    }
    Ok(())
}

pub fn read_dataset<R: BufRead>(r: R) -> Result<Dataset, FormatError> {
    let mut lines = Lines::new(r);
    let dims = lines.header(DATA_MAGIC, 3)?;
    let (d, len, n) = (dims[0], dims[1], dims[2]);
    if d < 2 || len < 2 || n < 1 {
        return parse_err(1, "need d >= 2, L >= 2, N >= 1");
    }
    let s = lines.floats(4)?;
    let task = TaskVectors {
        w_star: lines.floats(d)?,
        z: lines.floats(d)?,
        zeta: lines.floats(d)?,
        gamma0: s[0],
        u: s[1],
        r: s[2],
        alpha: s[3],
    };
    if let Err(e) = task.validate() {
        return parse_err(lines.line, e.to_string());
    }
    let mut prompts = Vec::with_capacity(n);
    for _ in 0..n {
        let x1 = lines.matrix(d, len)?;
        let x2 = lines.matrix(d, len)?;
        let raw = lines.floats(len)?;
        let labels: Option<Vec<Label>> = raw.into_iter().map(Label::from_value).collect();
        let Some(labels) = labels else {
            return parse_err(lines.line, "labels must be +1 or -1");
        };
        prompts.push(embed_prompt(&Prompt { x1, x2, labels }));
    }
    lines.expect_end()?;
    Ok(Dataset::from_prompts(task, prompts))
}

fn expect_csv_header<R: BufRead>(lines: &mut io::Lines<R>, expected: &str) -> Result<(), FormatError> {
    match lines.next().transpose()? {
        Some(h) if h.trim() == expected => Ok(()),
        _ => parse_err(1, format!("expected header {expected:?}")),
    }
}

pub fn write_trajectory<W: Write>(out: &mut W, records: &[TrajectoryRecord]) -> io::Result<()> {
    writeln!(out, "{}", trajectory_header())?;
    for rec in records {
        let cells: Vec<String> = rec.values().iter().map(|x| format!("{x:.16e}")).collect();
        writeln!(out, "{},{}", rec.epoch, cells.join(","))?;
    }
    Ok(())
}

pub fn read_trajectory<R: BufRead>(r: R) -> Result<Vec<TrajectoryRecord>, FormatError> {
    let mut lines = r.lines();
    expect_csv_header(&mut lines, &trajectory_header())?;
    let mut out = Vec::new();
    for (i, l) in lines.enumerate() {
        let line = i + 2;
        let l = l?;
        if l.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = l.split(',').collect();
        if cells.len() != TrajectoryRecord::COLUMNS.len() {
            return parse_err(line, format!("expected {} columns, found {}", TrajectoryRecord::COLUMNS.len(), cells.len()));
        }
        let Ok(epoch) = cells[0].parse::<usize>() else {
            return parse_err(line, format!("bad epoch {:?}", cells[0]));
        };
        let mut vals = [0.0; 16];
        for (v, c) in vals.iter_mut().zip(&cells[1..]) {
            match c.parse::<f64>() {
                Ok(x) => *v = x,
                Err(_) => return parse_err(line, format!("bad number {c:?}")),
            }
        }
        out.push(TrajectoryRecord::from_values(epoch, vals));
    }
    Ok(out)
}

pub fn write_edit_rows<W: Write>(out: &mut W, rows: &[EditRow]) -> io::Result<()> {
    writeln!(out, "{EDIT_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{:.16e},{},{},{:.16e},{:.16e},{:.16e}",
            r.rho,
            r.order.name(),
            r.target.name(),
            r.acc.full,
            r.acc.p,
            r.acc.q
        )?;
    }
    Ok(())
}

pub fn read_edit_rows<R: BufRead>(r: R) -> Result<Vec<EditRow>, FormatError> {
    let mut lines = r.lines();
    expect_csv_header(&mut lines, EDIT_HEADER)?;
    let mut out = Vec::new();
    for (i, l) in lines.enumerate() {
        let line = i + 2;
        let l = l?;
        if l.trim().is_empty() {
            continue;
        }
        let c: Vec<&str> = l.split(',').collect();
        if c.len() != 6 {
            return parse_err(line, "expected 6 columns");
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| FormatError::Parse { line, msg: format!("bad number {s:?}") });
        let (Some(order), Some(target)) = (EditOrder::parse(c[1]), EditTarget::parse(c[2])) else {
            return parse_err(line, "unknown order or target");
        };
        out.push(EditRow {
            rho: num(c[0])?,
            order,
            target,
            acc: crate::metrics::Accuracy {
                full: num(c[3])?,
                p: num(c[4])?,
                q: num(c[5])?,
            },
        });
    }
    Ok(out)
}

/// Writes through a buffer into `path`, creating or truncating it.
pub fn save<P: AsRef<Path>>(path: P, write: impl FnOnce(&mut io::BufWriter<fs::File>) -> io::Result<()>) -> io::Result<()> {
    let mut out = io::BufWriter::new(fs::File::create(path)?);
    write(&mut out)?;
    out.flush()
}

pub fn open<P: AsRef<Path>>(path: P) -> io::Result<BufReader<fs::File>> {
    Ok(BufReader::new(fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_dataset, sample_task_vectors};
    use crate::metrics::Accuracy;
    use crate::numerics::{gaussian_matrix, streams, Rng};

    #[test]
    fn weights_round_trip() {
        let mut rng = Rng::new(1, 0);
        let bw = BlockWeights::new(gaussian_matrix(&mut rng, 3, 3, 1e7), gaussian_matrix(&mut rng, 3, 3, 1e-9));
        let mut buf = Vec::new();
        write_weights(&mut buf, &bw).unwrap();
        assert!(buf.starts_with(b"TSLAB-W v1, 3\n"));
        assert_eq!(read_weights(&buf[..]).unwrap(), bw);
    }

    #[test]
    fn weights_errors_carry_line() {
        let text = "TSLAB-W v1, 2\n1 2\n3\n";
        match read_weights(text.as_bytes()) {
            Err(FormatError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(read_weights("TSLAB-X v1, 2\n".as_bytes()).is_err());
        let trailing = "TSLAB-W v1, 1\n1\n2\n3\n";
        assert!(read_weights(trailing.as_bytes()).is_err());
    }

    #[test]
    fn dataset_round_trip() {
        let master = Rng::new(4, 0);
        let tv = sample_task_vectors(&mut master.substream(streams::TASK), 3, 2.0, 1e-7).unwrap();
        let ds = generate_dataset(&master, &tv, 3, 4);
        let mut buf = Vec::new();
        write_dataset(&mut buf, &ds).unwrap();
        assert!(buf.starts_with(b"TSLAB-DATA v1, 3, 4, 3\n"));
        assert_eq!(read_dataset(&buf[..]).unwrap(), ds);
    }

    #[test]
    fn trajectory_round_trip() {
        let recs: Vec<TrajectoryRecord> = (0..3)
            .map(|e| TrajectoryRecord::from_values(e, std::array::from_fn(|i| (i as f64 + 0.1) / 3.0 * (e as f64 + 1.0))))
            .collect();
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("epoch,eta,l_hat,l_reg,k_loss,k1_loss,k2_loss,fro_w_bar,fro_v_bar,fro_w_tilde,fro_v_tilde,trace_w,trace_v,acc_full,acc_p,acc_q,dist_w_star\n"));
        assert_eq!(text.lines().count(), 4);
        assert_eq!(read_trajectory(&buf[..]).unwrap(), recs);
    }

    #[test]
    fn edit_rows_round_trip() {
        let rows = vec![EditRow {
            rho: 0.3,
            order: EditOrder::SmallestFirst,
            target: EditTarget::VOnly,
            acc: Accuracy { full: 0.5, p: 1.0, q: 0.25 },
        }];
        let mut buf = Vec::new();
        write_edit_rows(&mut buf, &rows).unwrap();
        assert_eq!(read_edit_rows(&buf[..]).unwrap(), rows);
    }
}
