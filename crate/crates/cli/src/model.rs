use saltlib::models::{
    affine_bounce_benchmark, ball_drop, bouncing_ball, constant_flow_example, coulomb_ball,
    thrust_pulse, two_link_arm, AffineModel, BallDropParams, BallFriction, CoulombBallParams,
    TwoLinkParams,
};
use saltlib::rigid_body::RigidBodyModel;
use saltlib::{Error, HybridSystem, ModeId, Result, Vector};

use crate::args::{BuiltinModel, Friction, ModelArgs};
use crate::CliError;

pub struct LoadedModel {
    pub sys: HybridSystem,
    pub rigid: Option<RigidBodyModel>,
    pub mode0: ModeId,
    pub x0: Vector,
}

fn check_unused(args: &ModelArgs, allowed: &[&str]) -> Result<()> {
    let given = [
        ("e", args.e.is_some()),
        ("theta", args.theta.is_some()),
        ("pulse", args.pulse),
        ("friction", args.friction != Friction::Slide),
        ("mu-s", args.mu_s.is_some()),
        ("mu-k", args.mu_k.is_some()),
    ];
    for (name, set) in given {
        if set && !allowed.contains(&name) {
            return Err(Error::InvalidParameter(format!("--{name} does not apply to this model")));
        }
    }
    Ok(())
}

fn builtin(args: &ModelArgs, which: BuiltinModel) -> Result<(HybridSystem, Option<RigidBodyModel>, Vec<f64>)> {
    let g = args.gravity;
    Ok(match which {
        BuiltinModel::BouncingBall => {
            check_unused(args, &["e"])?;
            (bouncing_ball(args.e.unwrap_or(1.0), g)?, None, vec![1.0, 0.0])
        }
        BuiltinModel::BallDrop => {
            check_unused(args, &["e", "theta", "pulse", "friction"])?;
            let mut p = BallDropParams {
                theta: args.theta.unwrap_or(0.3),
                a_g: g,
                e: args.e.unwrap_or(0.0),
                friction: match args.friction {
                    Friction::Slide => BallFriction::FrictionlessSlide,
                    Friction::Stick => BallFriction::InfiniteStick,
                },
                ..Default::default()
            };
            if args.pulse {
                let pulse = thrust_pulse(p.mass, g);
                p = p.with_input(pulse);
            }
            let x0 = if args.pulse { vec![0.0, 0.3, 0.0, 0.0] } else { vec![0.0, 1.0, 0.0, 0.0] };
            let (m, s) = ball_drop(&p)?;
            (s, Some(m), x0)
        }
        BuiltinModel::ConstantFlow => {
            check_unused(args, &[])?;
            (constant_flow_example(), None, vec![0.0, 1.0])
        }
        BuiltinModel::TwoLinkArm => {
            check_unused(args, &["e"])?;
            let p = TwoLinkParams {
                a_g: g,
                e: args.e.unwrap_or(0.0),
                ..Default::default()
            };
            let (m, s) = two_link_arm(&p)?;
            (s, Some(m), vec![0.3, -0.9, 0.0, 0.0])
        }
        BuiltinModel::CoulombBall => {
            check_unused(args, &["theta", "mu-s", "mu-k"])?;
            let d = CoulombBallParams::default();
            let p = CoulombBallParams {
                theta: args.theta.unwrap_or(d.theta),
                a_g: g,
                mu_s: args.mu_s.unwrap_or(d.mu_s),
                mu_k: args.mu_k.unwrap_or(d.mu_k),
                ..d
            };
            let (m, s) = coulomb_ball(&p)?;
            (s, Some(m), vec![0.0, 0.5, 0.0, 0.0])
        }
        BuiltinModel::AffineBounce => {
            check_unused(args, &[])?;
            (affine_bounce_benchmark().to_system(), None, vec![1.0, 0.0])
        }
    })
}

pub fn load(args: &ModelArgs) -> std::result::Result<LoadedModel, CliError> {
    let (sys, rigid, default_x0) = match (&args.model, &args.affine) {
        (Some(which), None) => builtin(args, *which)?,
        (None, Some(path)) => {
            check_unused(args, &[])?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let model = AffineModel::from_json(&text)?;
            let n = model.modes[0].c.len();
            (model.to_system(), None, vec![0.0; n])
        }
        _ => return Err(CliError::Usage("exactly one of --model and --affine is required".into())),
    };
    let mode0 = match &args.mode {
        None => ModeId(0),
        Some(s) => match s.parse::<usize>() {
            Ok(i) if i < sys.modes.len() => ModeId(i),
            Ok(i) => return Err(CliError::Usage(format!("mode {i} does not exist"))),
            Err(_) => sys
                .mode_by_name(s)
                .ok_or_else(|| CliError::Usage(format!("no mode named {s:?}")))?,
        },
    };
    let x0 = Vector::from_vec(args.x0.clone().unwrap_or(default_x0));
    if x0.len() != sys.dim(mode0) {
        return Err(Error::dims("--x0", sys.dim(mode0), x0.len()).into());
    }
    Ok(LoadedModel { sys, rigid, mode0, x0 })
}
