//! Machine-readable output. CSV columns are fixed; JSON objects have their
//! keys sorted.

use std::fmt::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hybrid::{HybridSystem, HybridTrajectory};
use crate::linalg::sym_eigenvalues;
use crate::propagation::CovarianceState;

/// Pretty JSON with every object's keys in lexicographic order and a
/// trailing newline.
pub fn to_sorted_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json's map is ordered by key unless `preserve_order` is enabled.
    let v = serde_json::to_value(value).map_err(|e| Error::InvalidParameter(format!("serialization failed: {e}")))?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn header(out: &mut String, fixed: &[&str], groups: &[(&str, usize)]) {
    let mut cols: Vec<String> = fixed.iter().map(|s| s.to_string()).collect();
    for (prefix, n) in groups {
        cols.extend((0..*n).map(|i| format!("{prefix}{i}")));
    }
    out.push_str(&cols.join(","));
    out.push('\n');
}

/// Columns `t,mode,x0..x{n-1}`, one row per sample. Event times appear
/// twice, once with the pre-event and once with the post-event state.
/// Modes of lower dimension leave trailing columns empty.
pub fn trajectory_csv(traj: &HybridTrajectory) -> String {
    let n = traj
        .segments
        .iter()
        .flat_map(|s| s.states.iter().map(|x| x.len()))
        .max()
        .unwrap_or(0);
    let mut out = String::new();
    header(&mut out, &["t", "mode"], &[("x", n)]);
    for seg in &traj.segments {
        for (t, x) in seg.times.iter().zip(&seg.states) {
            write!(out, "{t},{}", seg.mode.0).unwrap();
            for i in 0..n {
                match x.get(i) {
                    Some(v) => write!(out, ",{v}").unwrap(),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
    }
    out
}

/// Columns `t_event,transition,name,from,to,guard_residual,transversality`.
pub fn events_csv(sys: &HybridSystem, traj: &HybridTrajectory) -> String {
    let mut out = String::from("t_event,transition,name,from,to,guard_residual,transversality\n");
    for e in &traj.events {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            e.t_event,
            e.transition,
            sys.transitions[e.transition].name.replace(',', ";"),
            e.from.0,
            e.to.0,
            e.guard_residual,
            e.transversality
        )
        .unwrap();
    }
    out
}

/// Columns `t,mode,var0..var{n-1},eig0..eig{n-1}`: the diagonal of each
/// covariance and its eigenvalues in ascending order.
pub fn covariance_csv(states: &[CovarianceState]) -> String {
    let n = states.iter().map(|s| s.sigma.nrows()).max().unwrap_or(0);
    let mut out = String::new();
    header(&mut out, &["t", "mode"], &[("var", n), ("eig", n)]);
    for s in states {
        write!(out, "{},{}", s.t, s.mode.0).unwrap();
        let m = s.sigma.nrows();
        let eig = sym_eigenvalues(&s.sigma);
        for col in [(0..m).map(|i| s.sigma[(i, i)]).collect::<Vec<_>>(), eig] {
            for i in 0..n {
                match col.get(i) {
                    Some(v) => write!(out, ",{v}").unwrap(),
                    None => out.push(','),
                }
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hybrid::{simulate, ModeId, SimOptions};
    use crate::linalg::{Matrix, Vector};
    use crate::models::bouncing_ball;

    #[test]
    fn json_keys_are_sorted() {
        #[derive(Serialize)]
        struct S {
            zeta: u8,
            alpha: u8,
        }
        let s = to_sorted_json(&S { zeta: 1, alpha: 2 }).unwrap();
        assert!(s.find("alpha").unwrap() < s.find("zeta").unwrap());
    }

    #[test]
    fn csv_layout() {
        let sys = bouncing_ball(0.5, 9.81).unwrap();
        let traj = simulate(&sys, ModeId(0), &Vector::from_vec(vec![1.0, 0.0]), (0.0, 0.5), &SimOptions::default()).unwrap();
        let csv = trajectory_csv(&traj);
        assert!(csv.starts_with("t,mode,x0,x1\n0,0,1,0\n"));
        let ev = events_csv(&sys, &traj);
        assert_eq!(ev.lines().count(), 2);
        assert!(ev.lines().nth(1).unwrap().contains(",impact,0,1,"));

        let cov = covariance_csv(&[CovarianceState {
            t: 0.0,
            mode: ModeId(0),
            sigma: Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]),
        }]);
        assert_eq!(cov, "t,mode,var0,var1,eig0,eig1\n0,0,2,1,1,2\n");
    }
}
