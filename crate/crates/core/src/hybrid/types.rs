use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::linalg::{
    fd_gradient, fd_jacobian, fd_scalar_derivative, fd_vector_derivative, Matrix, Vector,
};

pub type FieldFn = Arc<dyn Fn(f64, &Vector) -> Vector + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(f64, &Vector) -> Matrix + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(f64, &Vector) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModeId(pub usize);

impl fmt::Display for ModeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Continuous dynamics of one mode. The Jacobian falls back to central
/// differences when no analytic form is supplied.
#[derive(Clone)]
pub struct VectorFieldSpec {
    pub dim: usize,
    f: FieldFn,
    jac_x: Option<MatrixFn>,
}

impl VectorFieldSpec {
    pub fn new(dim: usize, f: impl Fn(f64, &Vector) -> Vector + Send + Sync + 'static) -> Self {
        VectorFieldSpec {
            dim,
            f: Arc::new(f),
            jac_x: None,
        }
    }

    pub fn with_jacobian(
        mut self,
        jac: impl Fn(f64, &Vector) -> Matrix + Send + Sync + 'static,
    ) -> Self {
        self.jac_x = Some(Arc::new(jac));
        self
    }

    pub fn eval(&self, t: f64, x: &Vector) -> Vector {
        (self.f)(t, x)
    }

    pub fn jacobian(&self, t: f64, x: &Vector) -> Matrix {
        match &self.jac_x {
            Some(j) => j(t, x),
            None => fd_jacobian(|y| (self.f)(t, y), x),
        }
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jac_x.is_some()
    }

    pub(crate) fn raw(&self) -> (FieldFn, Option<MatrixFn>) {
        (self.f.clone(), self.jac_x.clone())
    }
}

/// Scalar guard `g(t, x)`; the event fires when `g` crosses from positive to
/// non-positive.
#[derive(Clone)]
pub struct GuardSpec {
    g: ScalarFn,
    jac_x: Option<FieldFn>,
    jac_t: Option<ScalarFn>,
}

impl GuardSpec {
    pub fn new(g: impl Fn(f64, &Vector) -> f64 + Send + Sync + 'static) -> Self {
        GuardSpec {
            g: Arc::new(g),
            jac_x: None,
            jac_t: None,
        }
    }

    /// Analytic gradient `D_x g` as a vector.
    pub fn with_gradient(
        mut self,
        grad: impl Fn(f64, &Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        self.jac_x = Some(Arc::new(grad));
        self
    }

    pub fn with_time_derivative(
        mut self,
        dt: impl Fn(f64, &Vector) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.jac_t = Some(Arc::new(dt));
        self
    }

    /// Guard that does not depend on time: `D_t g = 0` exactly.
    pub fn time_invariant(self) -> Self {
        self.with_time_derivative(|_, _| 0.0)
    }

    pub fn eval(&self, t: f64, x: &Vector) -> f64 {
        (self.g)(t, x)
    }

    pub fn gradient(&self, t: f64, x: &Vector) -> Vector {
        match &self.jac_x {
            Some(j) => j(t, x),
            None => fd_gradient(|y| (self.g)(t, y), x),
        }
    }

    pub fn time_derivative(&self, t: f64, x: &Vector) -> f64 {
        match &self.jac_t {
            Some(j) => j(t, x),
            None => fd_scalar_derivative(|s| (self.g)(s, x), t),
        }
    }
}

/// Reset map `R(t, x)` applied at an event.
#[derive(Clone)]
pub struct ResetSpec {
    r: FieldFn,
    jac_x: Option<MatrixFn>,
    jac_t: Option<FieldFn>,
}

impl ResetSpec {
    pub fn new(r: impl Fn(f64, &Vector) -> Vector + Send + Sync + 'static) -> Self {
        ResetSpec {
            r: Arc::new(r),
            jac_x: None,
            jac_t: None,
        }
    }

    /// Identity reset with exact derivatives.
    pub fn identity(dim: usize) -> Self {
        ResetSpec::new(|_, x| x.clone())
            .with_jacobian(move |_, _| Matrix::identity(dim, dim))
            .with_time_derivative(move |_, _| Vector::zeros(dim))
    }

    /// Linear reset `x -> M x + b` with exact derivatives.
    pub fn affine(m: Matrix, b: Vector) -> Self {
        let (m1, m2) = (m.clone(), m);
        let rows = m1.nrows();
        ResetSpec::new(move |_, x| &m1 * x + &b)
            .with_jacobian(move |_, _| m2.clone())
            .with_time_derivative(move |_, _| Vector::zeros(rows))
    }

    pub fn with_jacobian(
        mut self,
        jac: impl Fn(f64, &Vector) -> Matrix + Send + Sync + 'static,
    ) -> Self {
        self.jac_x = Some(Arc::new(jac));
        self
    }

    pub fn with_time_derivative(
        mut self,
        dt: impl Fn(f64, &Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        self.jac_t = Some(Arc::new(dt));
        self
    }

    pub fn time_invariant(self, out_dim: usize) -> Self {
        self.with_time_derivative(move |_, _| Vector::zeros(out_dim))
    }

    pub fn apply(&self, t: f64, x: &Vector) -> Vector {
        (self.r)(t, x)
    }

    pub fn jacobian(&self, t: f64, x: &Vector) -> Matrix {
        match &self.jac_x {
            Some(j) => j(t, x),
            None => fd_jacobian(|y| (self.r)(t, y), x),
        }
    }

    pub fn time_derivative(&self, t: f64, x: &Vector) -> Vector {
        match &self.jac_t {
            Some(j) => j(t, x),
            None => fd_vector_derivative(|s| (self.r)(s, x), t),
        }
    }
}

#[derive(Clone)]
pub struct TransitionSpec {
    pub from: ModeId,
    pub to: ModeId,
    pub guard: GuardSpec,
    pub reset: ResetSpec,
    pub name: String,
}

#[derive(Clone)]
pub struct Mode {
    pub name: String,
    pub field: VectorFieldSpec,
}

/// A hybrid dynamical system: modes with smooth flows and guarded transitions.
#[derive(Clone, Default)]
pub struct HybridSystem {
    pub modes: Vec<Mode>,
    pub transitions: Vec<TransitionSpec>,
}

impl HybridSystem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_mode(&mut self, name: impl Into<String>, field: VectorFieldSpec) -> ModeId {
        self.modes.push(Mode {
            name: name.into(),
            field,
        });
        ModeId(self.modes.len() - 1)
    }

    pub fn add_transition(
        &mut self,
        name: impl Into<String>,
        from: ModeId,
        to: ModeId,
        guard: GuardSpec,
        reset: ResetSpec,
    ) -> usize {
        self.transitions.push(TransitionSpec {
            from,
            to,
            guard,
            reset,
            name: name.into(),
        });
        self.transitions.len() - 1
    }

    pub fn dim(&self, mode: ModeId) -> usize {
        self.modes[mode.0].field.dim
    }

    pub fn mode(&self, mode: ModeId) -> &Mode {
        &self.modes[mode.0]
    }

    pub fn mode_by_name(&self, name: &str) -> Option<ModeId> {
        self.modes.iter().position(|m| m.name == name).map(ModeId)
    }

    pub fn transition_by_name(&self, name: &str) -> Option<usize> {
        self.transitions.iter().position(|t| t.name == name)
    }

    pub fn outgoing(&self, mode: ModeId) -> Vec<usize> {
        self.transitions
            .iter()
            .enumerate()
            .filter(|(_, t)| t.from == mode)
            .map(|(i, _)| i)
            .collect()
    }

    /// Copy of the system where each mode's flow gains the constant term
    /// `b(t_hold, mode) u`.
    pub fn with_input(
        &self,
        b: &(dyn Fn(f64, ModeId) -> Matrix + Send + Sync),
        u: &Vector,
        t_hold: f64,
    ) -> HybridSystem {
        let mut out = self.clone();
        for (k, mode) in out.modes.iter_mut().enumerate() {
            let id = ModeId(k);
            // B is sampled once at the start of the hold interval.
            let bu = b(t_hold, id) * u;
            let (f, jac) = mode.field.raw();
            let dim = mode.field.dim;
            let mut spec = VectorFieldSpec::new(dim, move |t, x| f(t, x) + &bu);
            if let Some(j) = jac {
                spec = spec.with_jacobian(move |t, x| j(t, x));
            }
            mode.field = spec;
        }
        out
    }
}
