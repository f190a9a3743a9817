//! Plain-text artifact formats. Every emitter has a parser that reproduces its input
//! exactly; floats are written in shortest round-trip form.
//!
//! * Report: `# comment` lines, `key = value` scalars, then `[name]` headers each
//!   followed by the CSV rows of a matrix.
//! * Weights: `layers 2 5 2` header, then one `[layer i]` block per weight matrix.
//! * CSV files always start with a header row.

use nalgebra::{DMatrix, DVector};

use crate::certificate::{QcMultipliers, StabilityCertificate};
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::policy::{Mlp, TrainRecord};
use crate::sector::SectorBound;
use crate::sim::{BoxStats, PolicyEvaluation, Trajectory};
use crate::synthesis::IterationRecord;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("not a number: {s:?}")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim().parse::<usize>().map_err(|_| Error::Parse(format!("not a nonnegative integer: {s:?}")))
}

fn csv_row(values: impl IntoIterator<Item = String>) -> String {
    values.into_iter().collect::<Vec<_>>().join(",")
}

fn matrix_rows(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for r in 0..m.nrows() {
        out.push_str(&csv_row(m.row(r).iter().map(|&v| fmt_f64(v))));
        out.push('\n');
    }
    out
}

fn rows_to_matrix(rows: &[Vec<f64>], cols_hint: usize) -> Result<DMatrix<f64>> {
    let cols = rows.first().map_or(cols_hint, |r| r.len());
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Parse("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// Named scalars and matrices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub title: String,
    pub scalars: Vec<(String, f64)>,
    pub matrices: Vec<(String, DMatrix<f64>)>,
}

impl Report {
    pub fn scalar(&self, key: &str) -> Result<f64> {
        self.scalars
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::Parse(format!("missing scalar {key:?}")))
    }

    pub fn matrix(&self, key: &str) -> Result<&DMatrix<f64>> {
        self.matrices
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v)
            .ok_or_else(|| Error::Parse(format!("missing matrix [{key}]")))
    }

    /// Empty matrices are written as `[name 0x3]`.
    pub fn to_text(&self) -> String {
        let mut out = format!("# {}\n", self.title);
        for (k, v) in &self.scalars {
            out.push_str(&format!("{k} = {}\n", fmt_f64(*v)));
        }
        for (k, m) in &self.matrices {
            if m.nrows() == 0 || m.ncols() == 0 {
                out.push_str(&format!("[{k} {}x{}]\n", m.nrows(), m.ncols()));
            } else {
                out.push_str(&format!("[{k}]\n"));
                out.push_str(&matrix_rows(m));
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut report = Report::default();
        let mut current: Option<(String, Vec<Vec<f64>>, usize)> = None;
        let flush = |report: &mut Report, cur: Option<(String, Vec<Vec<f64>>, usize)>| -> Result<()> {
            if let Some((name, rows, cols)) = cur {
                report.matrices.push((name, rows_to_matrix(&rows, cols)?));
            }
            Ok(())
        };
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(title) = line.strip_prefix('#') {
                if report.title.is_empty() && report.scalars.is_empty() && report.matrices.is_empty() && current.is_none() {
                    report.title = title.trim().to_string();
                }
                continue;
            }
            if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                flush(&mut report, current.take())?;
                let mut parts = header.split_whitespace();
                let name = parts.next().ok_or_else(|| Error::Parse(format!("line {}: empty header", lineno + 1)))?;
                let cols = match parts.next() {
                    Some(shape) => {
                        let (r, c) = shape
                            .split_once('x')
                            .ok_or_else(|| Error::Parse(format!("line {}: bad shape {shape:?}", lineno + 1)))?;
                        if parse_usize(r)? != 0 && parse_usize(c)? != 0 {
                            return Err(Error::Parse(format!("line {}: shape only allowed for empty matrices", lineno + 1)));
                        }
                        if parse_usize(r)? == 0 {
                            parse_usize(c)?
                        } else {
                            // r×0: record rows of width zero
                            let rows = vec![Vec::new(); parse_usize(r)?];
                            report.matrices.push((name.to_string(), rows_to_matrix(&rows, 0)?));
                            continue;
                        }
                    }
                    None => 0,
                };
                current = Some((name.to_string(), Vec::new(), cols));
                continue;
            }
            if let Some((_, rows, _)) = current.as_mut() {
                rows.push(line.split(',').map(parse_f64).collect::<Result<_>>()?);
            } else if let Some((k, v)) = line.split_once('=') {
                report.scalars.push((k.trim().to_string(), parse_f64(v)?));
            } else {
                return Err(Error::Parse(format!("line {}: expected `key = value`", lineno + 1)));
            }
        }
        flush(&mut report, current)?;
        Ok(report)
    }
}

pub fn certificate_report(cert: &StabilityCertificate) -> Report {
    Report {
        title: "stability certificate".into(),
        scalars: vec![
            ("lipschitz".into(), cert.lipschitz),
            ("level".into(), cert.level),
            ("scale".into(), cert.scale),
        ],
        matrices: vec![
            ("gain".into(), cert.gain.clone()),
            ("p".into(), cert.p.clone()),
            ("lambda".into(), cert.multipliers.lambda.clone()),
            ("gamma".into(), cert.multipliers.gamma.clone()),
        ],
    }
}

pub fn certificate_from_report(report: &Report) -> Result<StabilityCertificate> {
    Ok(StabilityCertificate {
        gain: report.matrix("gain")?.clone(),
        lipschitz: report.scalar("lipschitz")?,
        p: report.matrix("p")?.clone(),
        multipliers: QcMultipliers {
            lambda: report.matrix("lambda")?.clone(),
            gamma: report.matrix("gamma")?.clone(),
        },
        level: report.scalar("level")?,
        scale: report.scalar("scale")?,
    })
}

pub fn certificate_to_text(cert: &StabilityCertificate) -> String {
    certificate_report(cert).to_text()
}

pub fn parse_certificate(text: &str) -> Result<StabilityCertificate> {
    certificate_from_report(&Report::parse(text)?)
}

fn parse_csv<'a>(text: &'a str, header: &[&str]) -> Result<Vec<Vec<&'a str>>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let head = lines.next().ok_or_else(|| Error::Parse("missing CSV header".into()))?;
    let got: Vec<&str> = head.split(',').map(str::trim).collect();
    if !header.is_empty() && got != header {
        return Err(Error::Parse(format!("unexpected CSV header {head:?}")));
    }
    let width = got.len();
    lines
        .map(|l| {
            let fields: Vec<&str> = l.split(',').map(str::trim).collect();
            if fields.len() != width {
                Err(Error::Parse(format!("expected {width} fields in {l:?}")))
            } else {
                Ok(fields)
            }
        })
        .collect()
}

const SECTOR_HEADER: [&str; 4] = ["row", "col", "lo", "hi"];

/// One line per entry of the `n × (n+m)` bound matrices.
pub fn sector_csv(sector: &SectorBound) -> String {
    let mut out = SECTOR_HEADER.join(",") + "\n";
    for i in 0..sector.state_dim() {
        for j in 0..sector.state_dim() + sector.input_dim() {
            let e = sector.entry(i, j);
            out.push_str(&format!("{i},{j},{},{}\n", fmt_f64(e.lo()), fmt_f64(e.hi())));
        }
    }
    out
}

pub fn parse_sector_csv(text: &str) -> Result<SectorBound> {
    let rows = parse_csv(text, &SECTOR_HEADER)?;
    let mut entries = Vec::with_capacity(rows.len());
    for r in &rows {
        entries.push((parse_usize(r[0])?, parse_usize(r[1])?, parse_f64(r[2])?, parse_f64(r[3])?));
    }
    let n = entries.iter().map(|e| e.0 + 1).max().unwrap_or(0);
    let cols = entries.iter().map(|e| e.1 + 1).max().unwrap_or(0);
    if entries.len() != n * cols {
        return Err(Error::Parse("sector CSV does not cover a full matrix".into()));
    }
    let mut lower = DMatrix::from_element(n, cols, f64::NAN);
    let mut upper = lower.clone();
    for (i, j, lo, hi) in entries {
        Interval::new(lo, hi).map_err(|e| Error::Parse(e.to_string()))?;
        lower[(i, j)] = lo;
        upper[(i, j)] = hi;
    }
    if lower.iter().any(|v| v.is_nan()) {
        return Err(Error::Parse("duplicate sector entry".into()));
    }
    SectorBound::from_bounds(lower, upper)
}

fn iteration_header(n: usize) -> Vec<String> {
    let mut h: Vec<String> = ["k", "delta", "lipschitz", "feasible"].iter().map(|s| s.to_string()).collect();
    h.extend((1..=n).map(|i| format!("eig_re_{i}")));
    h.push("level".into());
    h
}

/// `k, delta, lipschitz, feasible, eig_re_1..eig_re_n, level`.
pub fn iteration_log_csv(log: &[IterationRecord], n: usize) -> String {
    let mut out = iteration_header(n).join(",") + "\n";
    for r in log {
        let mut fields = vec![r.k.to_string(), fmt_f64(r.delta), fmt_f64(r.lipschitz), u8::from(r.feasible).to_string()];
        fields.extend(r.eig_real.iter().map(|&v| fmt_f64(v)));
        fields.push(fmt_f64(r.level));
        out.push_str(&csv_row(fields));
        out.push('\n');
    }
    out
}

pub fn parse_iteration_log_csv(text: &str) -> Result<Vec<IterationRecord>> {
    let head = text.lines().next().unwrap_or_default();
    let n = head.split(',').filter(|f| f.trim().starts_with("eig_re_")).count();
    let header = iteration_header(n);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    parse_csv(text, &header)?
        .into_iter()
        .map(|r| {
            let feasible = match r[3] {
                "1" => true,
                "0" => false,
                other => return Err(Error::Parse(format!("feasible flag {other:?}"))),
            };
            Ok(IterationRecord {
                k: parse_usize(r[0])?,
                delta: parse_f64(r[1])?,
                lipschitz: parse_f64(r[2])?,
                feasible,
                eig_real: r[4..4 + n].iter().map(|s| parse_f64(s)).collect::<Result<_>>()?,
                level: parse_f64(r[4 + n])?,
            })
        })
        .collect()
}

pub fn weights_to_text(net: &Mlp) -> String {
    let sizes: Vec<String> = net.sizes().iter().map(usize::to_string).collect();
    let mut out = format!("layers {}\n", sizes.join(" "));
    for (i, w) in net.layers().iter().enumerate() {
        out.push_str(&format!("[layer {}]\n", i + 1));
        out.push_str(&matrix_rows(w));
    }
    out
}

pub fn parse_weights(text: &str) -> Result<Mlp> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let head = lines.next().ok_or_else(|| Error::Parse("empty weights file".into()))?;
    let sizes: Vec<usize> = head
        .strip_prefix("layers")
        .ok_or_else(|| Error::Parse("weights file must start with `layers`".into()))?
        .split_whitespace()
        .map(parse_usize)
        .collect::<Result<_>>()?;
    if sizes.len() < 2 {
        return Err(Error::Parse("need at least input and output sizes".into()));
    }
    let mut layers = Vec::with_capacity(sizes.len() - 1);
    for (i, s) in sizes.windows(2).enumerate() {
        let header = lines.next().ok_or_else(|| Error::Parse(format!("missing layer {}", i + 1)))?;
        if header != format!("[layer {}]", i + 1) {
            return Err(Error::Parse(format!("expected [layer {}], found {header:?}", i + 1)));
        }
        let mut rows = Vec::with_capacity(s[1]);
        for _ in 0..s[1] {
            let line = lines.next().ok_or_else(|| Error::Parse(format!("layer {} is truncated", i + 1)))?;
            let row: Vec<f64> = line.split(',').map(parse_f64).collect::<Result<_>>()?;
            if row.len() != s[0] {
                return Err(Error::Parse(format!("layer {} rows must have {} entries", i + 1, s[0])));
            }
            rows.push(row);
        }
        layers.push(rows_to_matrix(&rows, s[0])?);
    }
    if let Some(extra) = lines.next() {
        return Err(Error::Parse(format!("trailing content {extra:?}")));
    }
    Mlp::new(layers)
}

const TRAIN_HEADER: [&str; 4] = ["trajectory", "return", "lipschitz_bound", "nu"];

pub fn train_log_csv(log: &[TrainRecord]) -> String {
    let mut out = TRAIN_HEADER.join(",") + "\n";
    for r in log {
        out.push_str(&format!("{},{},{},{}\n", r.trajectory, fmt_f64(r.ret), fmt_f64(r.lipschitz), fmt_f64(r.nu)));
    }
    out
}

pub fn parse_train_log_csv(text: &str) -> Result<Vec<TrainRecord>> {
    parse_csv(text, &TRAIN_HEADER)?
        .into_iter()
        .map(|r| {
            Ok(TrainRecord {
                trajectory: parse_usize(r[0])?,
                ret: parse_f64(r[1])?,
                lipschitz: parse_f64(r[2])?,
                nu: parse_f64(r[3])?,
            })
        })
        .collect()
}

const STATS_HEADER: [&str; 6] = ["policy", "min", "q1", "median", "q3", "max"];

/// Policies without runs are written with empty statistics fields.
pub fn stats_csv(evals: &[PolicyEvaluation]) -> String {
    let mut out = STATS_HEADER.join(",") + "\n";
    for e in evals {
        let fields = match &e.stats {
            Some(s) => [s.min, s.q1, s.median, s.q3, s.max].map(fmt_f64).join(","),
            None => ",,,,".into(),
        };
        out.push_str(&format!("{},{fields}\n", e.name));
    }
    out
}

pub fn parse_stats_csv(text: &str) -> Result<Vec<(String, Option<BoxStats>)>> {
    parse_csv(text, &STATS_HEADER)?
        .into_iter()
        .map(|r| {
            if r[1..].iter().all(|f| f.is_empty()) {
                return Ok((r[0].to_string(), None));
            }
            let v: Vec<f64> = r[1..].iter().map(|s| parse_f64(s)).collect::<Result<_>>()?;
            Ok((r[0].to_string(), Some(BoxStats { min: v[0], q1: v[1], median: v[2], q3: v[3], max: v[4] })))
        })
        .collect()
}

const UTILITY_HEADER: [&str; 4] = ["run", "policy", "utility", "diverged"];

/// Per-run utilities: `run, policy, utility, diverged`.
pub fn utilities_csv(evals: &[PolicyEvaluation]) -> String {
    let mut out = UTILITY_HEADER.join(",") + "\n";
    for e in evals {
        for (i, (u, d)) in e.utilities.iter().zip(&e.diverged).enumerate() {
            out.push_str(&format!("{i},{},{},{}\n", e.name, fmt_f64(*u), u8::from(*d)));
        }
    }
    out
}

pub fn parse_utilities_csv(text: &str) -> Result<Vec<(usize, String, f64, bool)>> {
    parse_csv(text, &UTILITY_HEADER)?
        .into_iter()
        .map(|r| Ok((parse_usize(r[0])?, r[1].to_string(), parse_f64(r[2])?, r[3] == "1")))
        .collect()
}

fn trajectory_header(n: usize, m: usize, d: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=n).map(|i| format!("x{i}")));
    h.extend((1..=m).map(|i| format!("u{i}")));
    h.extend((1..=d).map(|i| format!("theta{i}")));
    h.push("r".into());
    h
}

/// `t, x1..xn, u1..um, theta1..thetad, r` with `t = kτ`. A trajectory that did not
/// diverge ends with its final state and empty control, parameter and reward fields.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let n = traj.states[0].len();
    let m = traj.controls.first().map_or(0, |u| u.len());
    let d = traj.params.first().map_or(0, |p| p.len());
    let mut out = trajectory_header(n, m, d).join(",") + "\n";
    for (k, x) in traj.states.iter().enumerate() {
        let mut fields = vec![fmt_f64(k as f64 * traj.tau)];
        fields.extend(x.iter().map(|&v| fmt_f64(v)));
        if k < traj.controls.len() {
            fields.extend(traj.controls[k].iter().map(|&v| fmt_f64(v)));
            fields.extend(traj.params[k].iter().map(|&v| fmt_f64(v)));
            fields.push(fmt_f64(traj.rewards[k]));
        } else {
            fields.extend(std::iter::repeat_n(String::new(), m + d + 1));
        }
        out.push_str(&csv_row(fields));
        out.push('\n');
    }
    out
}

/// Inverse of [`trajectory_csv`]. Dimensions come from the header; `tau` must match the
/// time column.
pub fn parse_trajectory_csv(text: &str, tau: f64) -> Result<Trajectory> {
    let head: Vec<&str> = text.lines().next().unwrap_or_default().split(',').map(str::trim).collect();
    let count = |p: &str| head.iter().filter(|h| h.strip_prefix(p).is_some_and(|s| s.parse::<usize>().is_ok())).count();
    let (n, m, d) = (count("x"), count("u"), count("theta"));
    let header = trajectory_header(n, m, d);
    let rows = parse_csv(text, &header.iter().map(String::as_str).collect::<Vec<_>>())?;
    if rows.is_empty() {
        return Err(Error::Parse("trajectory has no rows".into()));
    }
    let nums = |fields: &[&str]| fields.iter().map(|s| parse_f64(s)).collect::<Result<Vec<f64>>>();
    let mut traj = Trajectory { tau, states: vec![], controls: vec![], params: vec![], rewards: vec![], diverged: true };
    for (k, r) in rows.iter().enumerate() {
        if parse_f64(r[0])? != k as f64 * tau {
            return Err(Error::Parse(format!("row {k}: time {} does not match tau {tau}", r[0])));
        }
        traj.states.push(DVector::from_vec(nums(&r[1..1 + n])?));
        if r[1 + n..].iter().all(|f| f.is_empty()) {
            if k + 1 != rows.len() {
                return Err(Error::Parse(format!("row {k}: only the final row may omit controls")));
            }
            traj.diverged = false;
        } else {
            traj.controls.push(DVector::from_vec(nums(&r[1 + n..1 + n + m])?));
            traj.params.push(nums(&r[1 + n + m..1 + n + m + d])?);
            traj.rewards.push(parse_f64(r[1 + n + m + d])?);
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VanDerPol;
    use crate::sim::{rk4_rollout, LinearFeedback, ParamSampler, RolloutSpec};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cert() -> StabilityCertificate {
        StabilityCertificate {
            gain: DMatrix::from_row_slice(2, 2, &[-2.9714, -0.1204, 1.5924, -2.1744]),
            lipschitz: 1.1,
            p: DMatrix::from_row_slice(2, 2, &[3.6841, -0.5629, -0.5629, 1.7448]),
            multipliers: QcMultipliers {
                lambda: DMatrix::from_fn(2, 4, |i, j| (i * 4 + j) as f64 * 0.1 + 1e-17),
                gamma: DMatrix::from_element(2, 2, 1.0 / 3.0),
            },
            level: 0.3272,
            scale: 1.0,
        }
    }

    #[test]
    fn certificate_round_trip() {
        let text = certificate_to_text(&cert());
        assert!(text.starts_with("# stability certificate\n"));
        assert_eq!(parse_certificate(&text).unwrap(), cert());
        assert!(parse_certificate("lipschitz = 1\n").is_err());
        assert!(parse_certificate("[gain]\n1,2\n3\n").is_err());
    }

    #[test]
    fn empty_matrices_round_trip() {
        let r = Report {
            title: "t".into(),
            scalars: vec![],
            matrices: vec![("a".into(), DMatrix::zeros(0, 3)), ("b".into(), DMatrix::zeros(2, 0))],
        };
        assert_eq!(Report::parse(&r.to_text()).unwrap(), r);
    }

    #[test]
    fn sector_round_trip() {
        let lower = DMatrix::from_row_slice(2, 4, &[0.0, -0.05, 1.0, 0.0, -0.1, -1.2, 0.0, 1.0]);
        let upper = DMatrix::from_row_slice(2, 4, &[0.0, 0.05, 1.0, 0.0, 0.4, -0.8, 0.0, 1.0]);
        let s = SectorBound::from_bounds(lower, upper).unwrap();
        let text = sector_csv(&s);
        assert!(text.starts_with("row,col,lo,hi\n"));
        assert_eq!(parse_sector_csv(&text).unwrap(), s);
    }

    #[test]
    fn iteration_log_round_trip() {
        let log = vec![
            IterationRecord { k: 1, delta: 0.05, lipschitz: 0.055, feasible: true, eig_real: vec![-1.2, -1.3], level: 0.01 },
            IterationRecord { k: 2, delta: 0.1, lipschitz: 0.11, feasible: false, eig_real: vec![-1.2, -1.3], level: f64::NAN },
        ];
        let text = iteration_log_csv(&log, 2);
        assert!(text.starts_with("k,delta,lipschitz,feasible,eig_re_1,eig_re_2,level\n"));
        let back = parse_iteration_log_csv(&text).unwrap();
        assert_eq!(back[0], log[0]);
        assert!(back[1].level.is_nan() && !back[1].feasible);
    }

    #[test]
    fn weights_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = Mlp::random(&[2, 5, 2], &mut rng).unwrap();
        let text = weights_to_text(&net);
        assert!(text.starts_with("layers 2 5 2\n[layer 1]\n"));
        assert_eq!(parse_weights(&text).unwrap(), net);
        assert!(parse_weights("layers 2 1\n[layer 1]\n1,2,3\n").is_err());
        assert!(parse_weights("layers 2 1\n[layer 1]\n1,2\n9\n").is_err());
    }

    #[test]
    fn logs_and_stats_round_trip() {
        let log = vec![TrainRecord { trajectory: 0, ret: -0.13, lipschitz: 1.0999999999999999, nu: 1.0 }];
        assert_eq!(parse_train_log_csv(&train_log_csv(&log)).unwrap(), log);
        let evals = vec![
            PolicyEvaluation {
                name: "lqr".into(),
                utilities: vec![-0.1, -0.3],
                diverged: vec![false, true],
                stats: crate::sim::box_stats(&[-0.1, -0.3]),
            },
            PolicyEvaluation { name: "none".into(), utilities: vec![], diverged: vec![], stats: None },
        ];
        let text = stats_csv(&evals);
        assert!(text.starts_with("policy,min,q1,median,q3,max\n"));
        let back = parse_stats_csv(&text).unwrap();
        assert_eq!(back, vec![("lqr".to_string(), evals[0].stats), ("none".to_string(), None)]);
        let u = parse_utilities_csv(&utilities_csv(&evals)).unwrap();
        assert_eq!(u, vec![(0, "lqr".into(), -0.1, false), (1, "lqr".into(), -0.3, true)]);
    }

    #[test]
    fn trajectory_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let k = LinearFeedback(DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]));
        let spec = RolloutSpec { steps: 7, tau: 0.1, substeps: 3 };
        let t = rk4_rollout(&VanDerPol, &k, &DVector::from_vec(vec![0.1, -0.2]), &ParamSampler::UniformIid(VanDerPol::param_box()), &mut rng, spec, &VanDerPol::reward).unwrap();
        let text = trajectory_csv(&t);
        assert!(text.starts_with("t,x1,x2,u1,u2,theta1,theta2,r\n"));
        assert_eq!(parse_trajectory_csv(&text, 0.1).unwrap(), t);
        assert!(parse_trajectory_csv(&text, 0.2).is_err());
        let mut d = t.clone();
        d.states.pop();
        d.diverged = true;
        assert_eq!(parse_trajectory_csv(&trajectory_csv(&d), 0.1).unwrap(), d);
    }

    proptest! {
        #[test]
        fn floats_round_trip(v in prop::num::f64::ANY) {
            let back = parse_f64(&fmt_f64(v)).unwrap();
            prop_assert!(back.to_bits() == v.to_bits() || (v.is_nan() && back.is_nan()));
        }
    }
}
