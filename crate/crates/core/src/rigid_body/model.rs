use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hybrid::ModeId;
use crate::linalg::{fd_gradient, fd_jacobian, spd_inverse, spd_solve, Matrix, Vector};

pub type MassFn = Arc<dyn Fn(&Vector) -> Matrix + Send + Sync>;
pub type StateMatrixFn = Arc<dyn Fn(&Vector, &Vector) -> Matrix + Send + Sync>;
pub type StateVectorFn = Arc<dyn Fn(&Vector, &Vector) -> Vector + Send + Sync>;
pub type InputFn = Arc<dyn Fn(f64, &Vector, &Vector) -> Vector + Send + Sync>;
pub type GapFn = Arc<dyn Fn(f64, &Vector) -> f64 + Send + Sync>;
pub type ConstraintJacobianFn = Arc<dyn Fn(&Vector) -> Matrix + Send + Sync>;
/// Optional analytic `D_q(B(q) qdot)` for the impact velocity map `B` of the
/// given target mode. Returning `None` falls back to finite differences.
pub type ProjectionJacobianFn =
    Arc<dyn Fn(ContactMode, &Vector, &Vector) -> Option<Matrix> + Send + Sync>;

/// Tangential speed below which the sliding direction is taken from the
/// model's configured slide direction.
pub const EPS_SLIDE: f64 = 1e-10;

/// Contact modes of a single-contact rigid body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ContactMode {
    /// Unconstrained, approaching contact.
    U,
    /// Unconstrained, separating from contact.
    V,
    /// Sliding along the surface.
    S,
    /// Sticking: normal and tangential constraints active.
    C,
}

impl ContactMode {
    pub const ALL: [ContactMode; 4] = [ContactMode::U, ContactMode::V, ContactMode::S, ContactMode::C];

    pub fn id(self) -> ModeId {
        ModeId(self as usize)
    }

    pub fn from_id(id: ModeId) -> Option<ContactMode> {
        Self::ALL.get(id.0).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ContactMode::U => "U",
            ContactMode::V => "V",
            ContactMode::S => "S",
            ContactMode::C => "C",
        }
    }
}

/// Manipulator-form rigid body `M qdd + C qd + N = Upsilon` with one
/// unilateral contact.
#[derive(Clone)]
pub struct RigidBodyModel {
    pub dof: usize,
    pub mass: MassFn,
    pub coriolis: StateMatrixFn,
    pub nonlinear: StateVectorFn,
    pub input: InputFn,
    pub gap: GapFn,
    /// `J_n = D_q g_n`, shape `1 x dof`.
    pub normal_jacobian: ConstraintJacobianFn,
    /// `J_t`, shape `k x dof`. Friction edges need `k = 1`.
    pub tangent_jacobian: ConstraintJacobianFn,
    pub restitution: f64,
    pub mu_s: f64,
    pub mu_k: f64,
    /// Target of plastic impact when friction is finite.
    pub plastic_target: ContactMode,
    /// Sign of the tangential velocity while in mode S. When unset the sign
    /// is taken from the current velocity.
    pub slide_direction: Option<f64>,
    pub projection_jacobian: Option<ProjectionJacobianFn>,
}

impl RigidBodyModel {
    pub fn new(
        dof: usize,
        mass: impl Fn(&Vector) -> Matrix + Send + Sync + 'static,
        gap: impl Fn(f64, &Vector) -> f64 + Send + Sync + 'static,
        normal_jacobian: impl Fn(&Vector) -> Matrix + Send + Sync + 'static,
    ) -> Self {
        RigidBodyModel {
            dof,
            mass: Arc::new(mass),
            coriolis: Arc::new(move |_, _| Matrix::zeros(dof, dof)),
            nonlinear: Arc::new(move |_, _| Vector::zeros(dof)),
            input: Arc::new(move |_, _, _| Vector::zeros(dof)),
            gap: Arc::new(gap),
            normal_jacobian: Arc::new(normal_jacobian),
            tangent_jacobian: Arc::new(move |_| Matrix::zeros(0, dof)),
            restitution: 0.0,
            mu_s: 0.0,
            mu_k: 0.0,
            plastic_target: ContactMode::S,
            slide_direction: None,
            projection_jacobian: None,
        }
    }

    pub fn with_coriolis(
        mut self,
        c: impl Fn(&Vector, &Vector) -> Matrix + Send + Sync + 'static,
    ) -> Self {
        self.coriolis = Arc::new(c);
        self
    }

    pub fn with_nonlinear(
        mut self,
        n: impl Fn(&Vector, &Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        self.nonlinear = Arc::new(n);
        self
    }

    pub fn with_input(
        mut self,
        u: impl Fn(f64, &Vector, &Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        self.input = Arc::new(u);
        self
    }

    pub fn with_input_fn(mut self, u: InputFn) -> Self {
        self.input = u;
        self
    }

    pub fn with_tangent_jacobian(
        mut self,
        jt: impl Fn(&Vector) -> Matrix + Send + Sync + 'static,
    ) -> Self {
        self.tangent_jacobian = Arc::new(jt);
        self
    }

    pub fn with_restitution(mut self, e: f64) -> Self {
        self.restitution = e;
        self
    }

    pub fn with_friction(mut self, mu_s: f64, mu_k: f64) -> Self {
        self.mu_s = mu_s;
        self.mu_k = mu_k;
        self
    }

    pub fn with_plastic_target(mut self, target: ContactMode) -> Self {
        self.plastic_target = target;
        self
    }

    pub fn with_slide_direction(mut self, s: f64) -> Self {
        self.slide_direction = Some(s);
        self
    }

    pub fn with_projection_jacobian(
        mut self,
        f: impl Fn(ContactMode, &Vector, &Vector) -> Option<Matrix> + Send + Sync + 'static,
    ) -> Self {
        self.projection_jacobian = Some(Arc::new(f));
        self
    }

    /// Finite static friction: both stick-slip and slip-stick can occur.
    pub fn has_finite_friction(&self) -> bool {
        self.mu_s > 0.0 && self.mu_s.is_finite()
    }

    /// Mode entered by impact.
    pub fn impact_target(&self) -> ContactMode {
        if self.restitution > 0.0 {
            ContactMode::V
        } else if self.mu_s.is_infinite() {
            ContactMode::C
        } else if self.mu_s == 0.0 && self.mu_k == 0.0 {
            ContactMode::S
        } else {
            self.plastic_target
        }
    }

    /// Constraint Jacobian active in `mode`.
    pub fn constraint_jacobian(&self, mode: ContactMode, q: &Vector) -> Matrix {
        match mode {
            ContactMode::U | ContactMode::V => Matrix::zeros(0, self.dof),
            ContactMode::S => (self.normal_jacobian)(q),
            ContactMode::C => {
                let jn = (self.normal_jacobian)(q);
                let jt = (self.tangent_jacobian)(q);
                let mut j = Matrix::zeros(jn.nrows() + jt.nrows(), self.dof);
                j.rows_mut(0, jn.nrows()).copy_from(&jn);
                j.rows_mut(jn.nrows(), jt.nrows()).copy_from(&jt);
                j
            }
        }
    }

    /// Parameter checks that do not evaluate the model functions.
    pub fn check_parameters(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.dof == 0 {
            out.push("model has zero degrees of freedom".to_string());
            return out;
        }
        if !(0.0..=1.0).contains(&self.restitution) {
            out.push(format!("restitution {} outside [0, 1]", self.restitution));
        }
        if !(self.mu_s >= 0.0) || !(self.mu_k >= 0.0) || !self.mu_k.is_finite() {
            out.push(format!(
                "friction coefficients must be non-negative (mu_s = {}, mu_k = {})",
                self.mu_s, self.mu_k
            ));
        }
        if let Some(s) = self.slide_direction {
            if s != 1.0 && s != -1.0 {
                out.push(format!("slide direction must be +1 or -1, got {s}"));
            }
        }
        if matches!(self.plastic_target, ContactMode::U | ContactMode::V) {
            out.push("plastic impact target must be S or C".to_string());
        }
        out
    }

    /// Parameter checks plus mass-matrix and `J_n = D_q g_n` checks at the
    /// sampled configurations.
    pub fn check(&self, samples: &[Vector]) -> Vec<String> {
        let mut out = self.check_parameters();
        if self.dof == 0 {
            return out;
        }
        for q in samples {
            if q.len() != self.dof {
                out.push(format!("sample has length {}, expected {}", q.len(), self.dof));
                continue;
            }
            let m = (self.mass)(q);
            if m.shape() != (self.dof, self.dof) {
                out.push(format!("mass matrix has shape {:?}", m.shape()));
                continue;
            }
            if (&m - m.transpose()).amax() > 1e-10 * m.amax().max(1.0) || spd_inverse(&m).is_none()
            {
                out.push(format!("mass matrix not symmetric positive definite at q = {:?}", q.as_slice()));
            }
            let jn = (self.normal_jacobian)(q);
            if jn.shape() != (1, self.dof) {
                out.push(format!("normal Jacobian has shape {:?}", jn.shape()));
                continue;
            }
            let fd = fd_gradient(|y| (self.gap)(0.0, y), q);
            let err = (jn.row(0).transpose() - &fd).norm();
            if err > 1e-5 * fd.norm().max(1.0) {
                out.push(format!(
                    "normal Jacobian disagrees with D_q g_n by {err:e} at q = {:?}",
                    q.as_slice()
                ));
            }
        }
        out
    }
}

/// Blocks of `[[M, J^T], [J, 0]]^-1 = [[M_dag, J_dag^T], [J_dag, Lambda_dag]]`.
#[derive(Debug, Clone)]
pub struct DaggerBlocks {
    pub m_inv: Matrix,
    pub m_dag: Matrix,
    pub j_dag: Matrix,
    pub lambda: Matrix,
    pub lambda_dag: Matrix,
}

pub fn dagger_blocks(m: &Matrix, j: &Matrix) -> Result<DaggerBlocks> {
    let n = m.nrows();
    if j.ncols() != n {
        return Err(Error::dims("constraint Jacobian columns", n, j.ncols()));
    }
    let m_inv = spd_inverse(m)
        .ok_or_else(|| Error::InvalidParameter("mass matrix is not positive definite".into()))?;
    if j.nrows() == 0 {
        return Ok(DaggerBlocks {
            m_dag: m_inv.clone(),
            m_inv,
            j_dag: Matrix::zeros(0, n),
            lambda: Matrix::zeros(0, 0),
            lambda_dag: Matrix::zeros(0, 0),
        });
    }
    let w = j * &m_inv * j.transpose();
    let lambda = spd_inverse(&w).ok_or(Error::SingularConstraint)?;
    let j_dag = &lambda * j * &m_inv;
    let m_dag = &m_inv - &m_inv * j.transpose() * &j_dag;
    Ok(DaggerBlocks {
        m_inv,
        m_dag,
        j_dag,
        lambda_dag: -&lambda,
        lambda,
    })
}

/// `Jdot(q, v) v` by a central difference of `J` along `v`.
pub(crate) fn jdot_times(j: &dyn Fn(&Vector) -> Matrix, q: &Vector, v: &Vector) -> Vector {
    let speed = v.norm();
    if speed == 0.0 {
        return Vector::zeros(j(q).nrows());
    }
    let h = 1e-6 / speed.max(1.0);
    let jp = j(&(q + v * h));
    let jm = j(&(q - v * h));
    (jp - jm) / (2.0 * h) * v
}

/// Constraint quantities for one mode at one state.
#[derive(Debug, Clone)]
pub struct ModeSolution {
    pub qdd: Vector,
    /// Multipliers in the `[[M, J^T], [J, 0]]` convention; the physical
    /// contact force is their negative.
    pub multipliers: Vector,
    /// Repulsive normal force.
    pub normal: f64,
    /// Tangential contact force along `J_t^T`. In S this is Coulomb friction.
    pub tangential: Vector,
    /// Generalized friction force added to `N` in S.
    pub friction: Vector,
}

fn split(model: &RigidBodyModel, x: &Vector) -> Result<(Vector, Vector)> {
    let m = model.dof;
    if x.len() != 2 * m {
        return Err(Error::dims("rigid-body state", 2 * m, x.len()));
    }
    Ok((x.rows(0, m).into_owned(), x.rows(m, m).into_owned()))
}

pub(crate) struct Terms {
    pub q: Vector,
    pub qd: Vector,
    pub m: Matrix,
    /// `Upsilon - N - C qd`.
    pub rhs: Vector,
}

pub(crate) fn terms(model: &RigidBodyModel, t: f64, x: &Vector) -> Result<Terms> {
    let (q, qd) = split(model, x)?;
    let m = (model.mass)(&q);
    let rhs = (model.input)(t, &q, &qd) - (model.nonlinear)(&q, &qd) - (model.coriolis)(&q, &qd) * &qd;
    Ok(Terms { q, qd, m, rhs })
}

fn constrained(d: &DaggerBlocks, rhs: &Vector, jdqd: &Vector) -> (Vector, Vector) {
    let qdd = &d.m_dag * rhs - d.j_dag.transpose() * jdqd;
    let f = &d.j_dag * rhs - &d.lambda_dag * jdqd;
    (qdd, f)
}

/// Accelerations and contact forces of `mode` at `(t, x)`.
pub fn solve_mode(model: &RigidBodyModel, mode: ContactMode, t: f64, x: &Vector) -> Result<ModeSolution> {
    let tm = terms(model, t, x)?;
    let dof = model.dof;
    if matches!(mode, ContactMode::U | ContactMode::V) {
        let qdd = spd_solve(&tm.m, &tm.rhs)
            .ok_or_else(|| Error::InvalidParameter("mass matrix is not positive definite".into()))?;
        return Ok(ModeSolution {
            qdd,
            multipliers: Vector::zeros(0),
            normal: 0.0,
            tangential: Vector::zeros(0),
            friction: Vector::zeros(dof),
        });
    }
    let j = model.constraint_jacobian(mode, &tm.q);
    let d = dagger_blocks(&tm.m, &j)?;
    let jm = |q: &Vector| model.constraint_jacobian(mode, q);
    let jdqd = jdot_times(&jm, &tm.q, &tm.qd);
    let (qdd, f) = constrained(&d, &tm.rhs, &jdqd);
    match mode {
        ContactMode::U | ContactMode::V => unreachable!("free modes return early"),
        ContactMode::C => Ok(ModeSolution {
            normal: -f[0],
            tangential: -f.rows(1, f.len() - 1),
            qdd,
            multipliers: f,
            friction: Vector::zeros(dof),
        }),
        ContactMode::S if model.mu_k == 0.0 => Ok(ModeSolution {
            normal: -f[0],
            tangential: Vector::zeros(1),
            qdd,
            multipliers: f,
            friction: Vector::zeros(dof),
        }),
        ContactMode::S => {
            let jt = (model.tangent_jacobian)(&tm.q);
            if jt.nrows() != 1 {
                return Err(Error::InvalidParameter(format!(
                    "Coulomb sliding needs one tangent direction, got {}",
                    jt.nrows()
                )));
            }
            let vt = (&jt * &tm.qd)[0];
            // A configured direction defines the mode, so the friction sign
            // cannot flip while the slip guard is approached.
            let phi = match model.slide_direction {
                Some(s) => s,
                None if vt.abs() >= EPS_SLIDE => vt.signum(),
                None => return Err(Error::SlidingSingularity { speed: vt.abs() }),
            };
            // f_n = fn0 + c mu phi |f_n| with fn0 the frictionless normal force.
            let fn0 = -f[0];
            let c = (&d.j_dag * jt.transpose())[(0, 0)];
            let k = c * model.mu_k * phi;
            let den = if fn0 >= 0.0 { 1.0 - k } else { 1.0 + k };
            if !(den > 0.0) {
                return Err(Error::FrictionParadox);
            }
            let fnormal = fn0 / den;
            let friction_mag = model.mu_k * phi * fnormal.abs();
            let nf = jt.row(0).transpose() * friction_mag;
            let rhs = &tm.rhs - &nf;
            let (qdd, f) = constrained(&d, &rhs, &jdqd);
            Ok(ModeSolution {
                qdd,
                normal: -f[0],
                tangential: Vector::from_element(1, -friction_mag),
                multipliers: f,
                friction: nf,
            })
        }
    }
}

/// State derivative `[qdot; qddot]` in `mode`.
pub fn mode_dynamics(model: &RigidBodyModel, mode: ContactMode, t: f64, x: &Vector) -> Result<Vector> {
    let sol = solve_mode(model, mode, t, x)?;
    let m = model.dof;
    let mut out = Vector::zeros(2 * m);
    out.rows_mut(0, m).copy_from(&x.rows(m, m));
    out.rows_mut(m, m).copy_from(&sol.qdd);
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstraintForces {
    pub normal: f64,
    pub tangential: Vec<f64>,
}

pub fn constraint_forces(
    model: &RigidBodyModel,
    mode: ContactMode,
    t: f64,
    x: &Vector,
) -> Result<ConstraintForces> {
    let sol = solve_mode(model, mode, t, x)?;
    Ok(ConstraintForces {
        normal: sol.normal,
        tangential: sol.tangential.iter().copied().collect(),
    })
}

/// Velocity map `B` with `qdot^+ = B qdot^-` for impact into `target`.
pub fn impact_velocity_map(model: &RigidBodyModel, target: ContactMode, q: &Vector) -> Result<Matrix> {
    let m = (model.mass)(q);
    let dof = model.dof;
    match target {
        ContactMode::U => Ok(Matrix::identity(dof, dof)),
        ContactMode::V => {
            let jn = (model.normal_jacobian)(q);
            let d = dagger_blocks(&m, &jn)?;
            Ok(&d.m_dag * &m - d.j_dag.transpose() * &jn * model.restitution)
        }
        ContactMode::S | ContactMode::C => {
            let j = model.constraint_jacobian(target, q);
            let d = dagger_blocks(&m, &j)?;
            Ok(&d.m_dag * m)
        }
    }
}

pub fn impact_reset(model: &RigidBodyModel, target: ContactMode, x: &Vector) -> Result<Vector> {
    let (q, qd) = split(model, x)?;
    let b = impact_velocity_map(model, target, &q)?;
    let mut out = x.clone();
    out.rows_mut(model.dof, model.dof).copy_from(&(b * qd));
    Ok(out)
}

/// `D_q(B(q) qdot)` at fixed `qdot`.
pub fn projection_jacobian(
    model: &RigidBodyModel,
    target: ContactMode,
    q: &Vector,
    qd: &Vector,
) -> Result<Matrix> {
    if let Some(f) = &model.projection_jacobian {
        if let Some(m) = f(target, q, qd) {
            return Ok(m);
        }
    }
    impact_velocity_map(model, target, q)?;
    Ok(fd_jacobian(
        |y| match impact_velocity_map(model, target, y) {
            Ok(b) => b * qd,
            Err(_) => Vector::from_element(qd.len(), f64::NAN),
        },
        q,
    ))
}

/// `D_x R = [[I, 0], [D_q(B qdot), B]]` for impact into `target`.
pub fn impact_reset_jacobian(model: &RigidBodyModel, target: ContactMode, x: &Vector) -> Result<Matrix> {
    let (q, qd) = split(model, x)?;
    let dof = model.dof;
    let b = impact_velocity_map(model, target, &q)?;
    let dq = projection_jacobian(model, target, &q, &qd)?;
    let mut out = Matrix::identity(2 * dof, 2 * dof);
    out.view_mut((dof, 0), (dof, dof)).copy_from(&dq);
    out.view_mut((dof, dof), (dof, dof)).copy_from(&b);
    Ok(out)
}

/// Repulsive impulse magnitude delivered by impact into `target`.
pub fn impact_impulse(model: &RigidBodyModel, target: ContactMode, x: &Vector) -> Result<Vector> {
    let (q, qd) = split(model, x)?;
    let m = (model.mass)(&q);
    let (j, e) = match target {
        ContactMode::U => return Ok(Vector::zeros(0)),
        ContactMode::V => ((model.normal_jacobian)(&q), model.restitution),
        _ => (model.constraint_jacobian(target, &q), 0.0),
    };
    let d = dagger_blocks(&m, &j)?;
    let p = &d.j_dag * &m * &qd + &d.lambda * (&j * &qd) * e;
    Ok(-p)
}
