use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::types::{HybridSystem, ModeId};
use crate::linalg::Vector;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostic {
    ZeroDimension {
        mode: usize,
    },
    FieldDimension {
        mode: usize,
        expected: usize,
        found: usize,
    },
    UnknownMode {
        transition: usize,
        endpoint: &'static str,
        mode: usize,
    },
    ResetDimension {
        transition: usize,
        expected: usize,
        found: usize,
    },
    DuplicateEdge {
        first: usize,
        second: usize,
        from: usize,
        to: usize,
    },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::ZeroDimension { mode } => write!(f, "mode {mode} has dimension 0"),
            Diagnostic::FieldDimension {
                mode,
                expected,
                found,
            } => write!(
                f,
                "vector field of mode {mode} returns length {found}, expected {expected}"
            ),
            Diagnostic::UnknownMode {
                transition,
                endpoint,
                mode,
            } => write!(
                f,
                "transition {transition} references unknown {endpoint} mode {mode}"
            ),
            Diagnostic::ResetDimension {
                transition,
                expected,
                found,
            } => write!(
                f,
                "reset of transition {transition} returns length {found}, expected {expected}"
            ),
            Diagnostic::DuplicateEdge {
                first,
                second,
                from,
                to,
            } => write!(
                f,
                "transitions {first} and {second} both connect mode {from} to mode {to}"
            ),
        }
    }
}

/// Structural checks on a hybrid system. Field and reset lengths are probed
/// at the zero state of the source mode.
pub fn validate_system(sys: &HybridSystem) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for (k, mode) in sys.modes.iter().enumerate() {
        let dim = mode.field.dim;
        if dim == 0 {
            out.push(Diagnostic::ZeroDimension { mode: k });
            continue;
        }
        let found = mode.field.eval(0.0, &Vector::zeros(dim)).len();
        if found != dim {
            out.push(Diagnostic::FieldDimension {
                mode: k,
                expected: dim,
                found,
            });
        }
    }

    let known = |m: ModeId| m.0 < sys.modes.len();
    let mut edges: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (i, tr) in sys.transitions.iter().enumerate() {
        let mut ok = true;
        for (endpoint, m) in [("source", tr.from), ("target", tr.to)] {
            if !known(m) {
                out.push(Diagnostic::UnknownMode {
                    transition: i,
                    endpoint,
                    mode: m.0,
                });
                ok = false;
            }
        }
        if !ok {
            continue;
        }
        if let Some(&first) = edges.get(&(tr.from.0, tr.to.0)) {
            out.push(Diagnostic::DuplicateEdge {
                first,
                second: i,
                from: tr.from.0,
                to: tr.to.0,
            });
        } else {
            edges.insert((tr.from.0, tr.to.0), i);
        }
        let (din, dout) = (sys.dim(tr.from), sys.dim(tr.to));
        if din == 0 || dout == 0 {
            continue;
        }
        let found = tr.reset.apply(0.0, &Vector::zeros(din)).len();
        if found != dout {
            out.push(Diagnostic::ResetDimension {
                transition: i,
                expected: dout,
                found,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hybrid::{GuardSpec, ResetSpec, VectorFieldSpec};

    fn flow(dim: usize) -> VectorFieldSpec {
        VectorFieldSpec::new(dim, move |_, _| Vector::zeros(dim))
    }

    #[test]
    fn clean_system_has_no_diagnostics() {
        let mut sys = HybridSystem::new();
        let a = sys.add_mode("a", flow(2));
        let b = sys.add_mode("b", flow(3));
        sys.add_transition(
            "ab",
            a,
            b,
            GuardSpec::new(|_, x| x[0]),
            ResetSpec::new(|_, x| Vector::from_vec(vec![x[0], x[1], 0.0])),
        );
        assert!(validate_system(&sys).is_empty());
    }

    #[test]
    fn reports_each_defect() {
        let mut sys = HybridSystem::new();
        let a = sys.add_mode("a", flow(2));
        sys.add_mode("zero", flow(0));
        sys.add_mode("bad", VectorFieldSpec::new(2, |_, _| Vector::zeros(3)));
        sys.add_transition("ghost", a, ModeId(9), GuardSpec::new(|_, x| x[0]), ResetSpec::identity(2));
        sys.add_transition(
            "aa",
            a,
            a,
            GuardSpec::new(|_, x| x[0]),
            ResetSpec::new(|_, _| Vector::zeros(3)),
        );
        sys.add_transition("aa2", a, a, GuardSpec::new(|_, x| x[1]), ResetSpec::identity(2));
        let d = validate_system(&sys);
        assert!(d.contains(&Diagnostic::ZeroDimension { mode: 1 }));
        assert!(d.contains(&Diagnostic::FieldDimension {
            mode: 2,
            expected: 2,
            found: 3
        }));
        assert!(d.contains(&Diagnostic::UnknownMode {
            transition: 0,
            endpoint: "target",
            mode: 9
        }));
        assert!(d.contains(&Diagnostic::ResetDimension {
            transition: 1,
            expected: 2,
            found: 3
        }));
        assert!(d.contains(&Diagnostic::DuplicateEdge {
            first: 1,
            second: 2,
            from: 0,
            to: 0
        }));
    }
}
