use saltlib::export::{covariance_csv, events_csv, to_sorted_json, trajectory_csv};
use saltlib::hybrid::{simulate, EventRecord};
use saltlib::oracles::{numeric_saltation, run_suite, OracleReport, SuiteOptions};
use saltlib::propagation::{
    hybrid_lqr, monodromy, periodic_orbit, propagate_covariance_with, JumpRule, LqrProblem,
    PeriodSpec,
};
use saltlib::rigid_body::{analyze_structure, closed_form_saltation, expected_properties, ContactMode};
use saltlib::saltation::saltation as saltation_of;
use saltlib::{Error, HybridTrajectory, Matrix, SimOptions};
use serde_json::{json, Value};

use crate::args::{
    CovarianceArgs, Format, LqrArgs, MonodromyArgs, Rule, SaltationArgs, SimArgs, SimulateArgs,
    VerifyArgs,
};
use crate::model::{load, LoadedModel};
use crate::{write_output, CliError, CliResult};

/// Tolerance for the structural checks of a rigid-body saltation matrix.
const STRUCTURE_TOL: f64 = 1e-8;
/// Oracle tolerance on the column-wise relative error.
const ORACLE_TOL: f64 = 1e-4;

fn sim_options(a: &SimArgs) -> CliResult<SimOptions> {
    if !(a.step > 0.0) || !a.step.is_finite() {
        return Err(CliError::Usage(format!("--step must be positive, got {}", a.step)));
    }
    Ok(SimOptions {
        step: a.step,
        max_events: a.max_events,
        ..SimOptions::default()
    })
}

fn run_sim(m: &LoadedModel, t0: f64, t1: f64, opts: &SimOptions) -> CliResult<HybridTrajectory> {
    if !(t1 > t0) {
        return Err(CliError::Usage(format!("final time {t1} must exceed start time {t0}")));
    }
    Ok(simulate(&m.sys, m.mode0, &m.x0, (t0, t1), opts)?)
}

fn json_text(v: &impl serde::Serialize) -> CliResult<String> {
    Ok(to_sorted_json(v)?)
}

pub fn simulate_cmd(a: SimulateArgs) -> CliResult<()> {
    let opts = sim_options(&a.sim)?;
    let m = load(&a.model)?;
    let traj = run_sim(&m, a.t0, a.t, &opts)?;
    match a.format {
        Format::Csv => {
            if let Some(path) = &a.events {
                write_output(Some(path), &events_csv(&m.sys, &traj))?;
            }
            write_output(a.output.out.as_deref(), &trajectory_csv(&traj))
        }
        Format::Json => {
            if a.events.is_some() {
                return Err(CliError::Usage("--events applies to csv output only".into()));
            }
            let segments: Vec<Value> = traj
                .segments
                .iter()
                .map(|s| {
                    json!({
                        "mode": s.mode,
                        "times": s.times,
                        "states": s.states.iter().map(|x| x.as_slice().to_vec()).collect::<Vec<_>>(),
                    })
                })
                .collect();
            let events: Vec<Value> = traj
                .events
                .iter()
                .map(|e| event_json(&m, e))
                .collect();
            let doc = json!({ "segments": segments, "events": events });
            write_output(a.output.out.as_deref(), &json_text(&doc)?)
        }
    }
}

fn event_json(m: &LoadedModel, e: &EventRecord) -> Value {
    json!({
        "t_event": e.t_event,
        "transition": e.transition,
        "name": m.sys.transitions[e.transition].name,
        "from": e.from,
        "to": e.to,
        "x_minus": e.x_minus.as_slice(),
        "x_plus": e.x_plus.as_slice(),
        "guard_residual": e.guard_residual,
        "transversality": e.transversality,
    })
}

fn pick_event<'a>(m: &LoadedModel, traj: &'a HybridTrajectory, which: &str) -> CliResult<&'a EventRecord> {
    let found = match which.parse::<usize>() {
        Ok(k) => traj.events.get(k),
        Err(_) => traj
            .events
            .iter()
            .find(|e| m.sys.transitions[e.transition].name == which),
    };
    found.ok_or_else(|| {
        CliError::Usage(format!(
            "event {which:?} not found among {} events of the execution",
            traj.events.len()
        ))
    })
}

pub fn saltation(a: SaltationArgs) -> CliResult<()> {
    let opts = sim_options(&a.sim)?;
    let m = load(&a.model)?;
    let traj = run_sim(&m, 0.0, a.t, &opts)?;
    let ev = pick_event(&m, &traj, &a.event)?;
    let res = saltation_of(&m.sys, ev, &opts)?;

    let mut doc = json!({
        "event": event_json(&m, ev),
        "saltation": res,
    });
    if let Some(rb) = &m.rigid {
        doc["structure"] = serde_json::to_value(analyze_structure(&res, STRUCTURE_TOL)).unwrap_or(Value::Null);
        let expected = match (ContactMode::from_id(ev.from), ContactMode::from_id(ev.to)) {
            (Some(f), Some(t)) => expected_properties(f, t, rb.mu_s, rb.mu_k),
            _ => None,
        };
        doc["expected"] = serde_json::to_value(expected).unwrap_or(Value::Null);
    }
    if a.closed_form {
        let rb = m
            .rigid
            .as_ref()
            .ok_or_else(|| CliError::Usage("--closed-form needs a rigid-body model".into()))?;
        let cf = closed_form_saltation(rb, ev, &opts)?;
        doc["closed_form"] = json!({
            "xi": rows(&cf),
            "max_abs_diff": (&cf - &res.xi).amax(),
        });
    }
    let mut failed = false;
    if a.oracle {
        let num = numeric_saltation(&m.sys, ev.from, &ev.x_minus, ev.t_event, a.h, &opts)?;
        let report = OracleReport::compare("numeric-saltation", res.xi.clone(), num, ORACLE_TOL);
        failed = !report.pass;
        doc["oracle"] = serde_json::to_value(report).unwrap_or(Value::Null);
    }
    write_output(a.output.out.as_deref(), &json_text(&doc)?)?;
    if failed {
        return Err(CliError::OracleFailed);
    }
    Ok(())
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn monodromy_cmd(a: MonodromyArgs) -> CliResult<()> {
    let opts = sim_options(&a.sim)?;
    let m = load(&a.model)?;
    let period = if a.period == "auto-from-x0" {
        PeriodSpec::AutoFromX0 { t_max: a.t_max }
    } else {
        let t = a
            .period
            .parse::<f64>()
            .map_err(|_| CliError::Usage(format!("--period must be auto-from-x0 or a number, got {:?}", a.period)))?;
        PeriodSpec::Fixed(t)
    };
    let traj = periodic_orbit(&m.sys, m.mode0, &m.x0, 0.0, period, &opts)?;
    let report = monodromy(&m.sys, &traj, a.tol_periodic, &opts)?;
    write_output(a.output.out.as_deref(), &json_text(&report)?)
}

pub fn covariance(a: CovarianceArgs) -> CliResult<()> {
    let opts = sim_options(&a.sim)?;
    let m = load(&a.model)?;
    if !(a.sigma0 >= 0.0) {
        return Err(Error::InvalidParameter(format!("--sigma0 must be nonnegative, got {}", a.sigma0)).into());
    }
    let traj = run_sim(&m, 0.0, a.t, &opts)?;
    let n = m.x0.len();
    let sigma0 = Matrix::identity(n, n) * a.sigma0;
    let rule = match a.rule {
        Rule::Saltation => JumpRule::Saltation,
        Rule::ResetJacobian => JumpRule::ResetJacobian,
    };
    let states = propagate_covariance_with(&m.sys, &traj, &sigma0, rule, &opts)?;
    let text = match a.format {
        Format::Csv => covariance_csv(&states),
        Format::Json => json_text(&json!({ "rule": rule, "states": states }))?,
    };
    write_output(a.output.out.as_deref(), &text)
}

/// Matrix literal with rows separated by `;` and entries by `,`.
fn parse_matrix(s: &str) -> CliResult<Matrix> {
    let bad = || CliError::Usage(format!("cannot parse matrix {s:?}; expected rows like \"0;1\" or \"1,0;0,1\""));
    let rows: Vec<Vec<f64>> = s
        .split(';')
        .map(|r| r.split(',').map(|v| v.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(bad());
    }
    Ok(Matrix::from_row_iterator(rows.len(), ncols, rows.into_iter().flatten()))
}

fn default_input_matrix(n: usize) -> Matrix {
    if n % 2 == 0 {
        let h = n / 2;
        let mut b = Matrix::zeros(n, h);
        b.view_mut((h, 0), (h, h)).fill_with_identity();
        b
    } else {
        Matrix::identity(n, n)
    }
}

pub fn lqr(a: LqrArgs) -> CliResult<()> {
    let opts = sim_options(&a.sim)?;
    let m = load(&a.model)?;
    let n = m.x0.len();
    if m.sys.modes.iter().any(|md| md.field.dim != n) {
        return Err(CliError::Usage("lqr needs every mode to share the state dimension".into()));
    }
    let b = match &a.b {
        Some(s) => parse_matrix(s)?,
        None => default_input_matrix(n),
    };
    if b.nrows() != n {
        return Err(Error::dims("input matrix rows", n, b.nrows()).into());
    }
    let k = b.ncols();
    let problem = LqrProblem::constant(
        b,
        Matrix::identity(n, n) * a.q,
        Matrix::identity(k, k) * a.v,
        Matrix::identity(n, n) * a.p_terminal,
        a.dt,
    );
    let traj = run_sim(&m, 0.0, a.t, &opts)?;
    let sol = hybrid_lqr(&m.sys, &traj, &problem, &opts)?;
    let gains: Vec<Value> = sol
        .gains
        .iter()
        .zip(&sol.nominal.times)
        .zip(&sol.nominal.modes)
        .map(|((g, t), md)| json!({ "t": t, "mode": md, "k": rows(g) }))
        .collect();
    let events: Vec<Value> = sol
        .nominal
        .step_events
        .iter()
        .enumerate()
        .filter_map(|(i, e)| e.as_ref().map(|e| json!({ "step": i, "t_event": e.t_event, "transition": e.transition })))
        .collect();
    let doc = json!({ "gains": gains, "values": sol.values, "events": events, "dt": a.dt });
    write_output(a.output.out.as_deref(), &json_text(&doc)?)
}

pub fn verify(a: VerifyArgs) -> CliResult<()> {
    if a.samples == 0 {
        return Err(CliError::Usage("--samples must be positive".into()));
    }
    let opts = SuiteOptions {
        seed: a.seed,
        mc_samples: a.samples,
        ..SuiteOptions::default()
    };
    let report = run_suite(&opts)?;
    write_output(a.output.out.as_deref(), &json_text(&report)?)?;
    eprintln!("verify: {} passed, {} failed", report.passed, report.failed);
    if !report.pass {
        return Err(CliError::OracleFailed);
    }
    Ok(())
}
