use super::{coupled_schedule, ProblemSpec, SigmaCondition, Tolerances};
use crate::error::{Error, Result};
use crate::expr::parse;
use crate::grid::BVFunction;
use crate::nonlocal::{GSpec, HSpec, NonlocalSpec};
use crate::plaplace::{MinorantScaling, PLaplaceSpec};

const PI: &str = "3.141592653589793";

const NAMES: [&str; 5] = ["paper-example", "manufactured-p2", "manufactured-p3", "decoupled", "zero"];

pub fn registry_names() -> &'static [&'static str] {
    &NAMES
}

/// `A(t) = t/2`, total variation 1/2.
fn half_ramp() -> BVFunction {
    BVFunction::linear(0.0, 0.5)
}

struct Parts<'a> {
    p: f64,
    f: &'a str,
    delta: &'a str,
    q: f64,
    g: &'a str,
    growth: [f64; 5],
    h: [&'a str; 2],
    beta: [f64; 2],
    sigma: [f64; 3],
}

fn build(name: &str, parts: Parts) -> Result<ProblemSpec> {
    let [a, b, c, r, theta] = parts.growth;
    let [sigma, alpha, beta] = parts.sigma;
    Ok(ProblemSpec {
        name: Some(name.to_string()),
        plaplace: PLaplaceSpec::parse(parts.p, "1", "1", "1", parts.f, parts.delta)?,
        nonlocal: NonlocalSpec::new(
            GSpec::new(parts.q, parse(parts.g)?, a, b, c, r, theta)?,
            HSpec::new(parse(parts.h[0])?, parse(parts.h[1])?, [0.0; 2], parts.beta, half_ramp(), half_ramp())?,
        ),
        sigma: SigmaCondition { sigma, alpha, beta },
        n_cells: 256,
        tolerances: Tolerances::default(),
        epsilon_schedule: coupled_schedule(),
        scaling: MinorantScaling::default(),
    })
}

/// Canonical problems. `decoupled` and `manufactured-p2` pair the
/// sin(πt) first equation with `−v″ = 6t`, `v(0) = v(1) = 0`.
pub fn registry(name: &str) -> Result<ProblemSpec> {
    let sine_load = format!("{PI}^2*sin({PI}*t) - u + sin({PI}*t)");
    match name {
        "paper-example" => build(
            name,
            Parts {
                p: 3.0,
                f: "abs(v)^2 - v^2*u^5 - v^4*u + t^2",
                delta: "v^2 + 1",
                q: 4.0,
                g: "v*cos(v) + u*sqrt(abs(u)) + cos(u) + v*sin(t)",
                growth: [1.0, 2.0, 1.0, 1.5, 1.0],
                h: ["sin(v)", "cos(v)"],
                beta: [1.0, 1.0],
                sigma: [2.0, 1.0, 1.0],
            },
        ),
        "manufactured-p2" | "decoupled" => build(
            name,
            Parts {
                p: 2.0,
                f: &sine_load,
                // |f(t, 0, v)| = (π² + 1) sin(πt)
                delta: "10.87",
                q: 2.0,
                g: "6*t",
                growth: [0.0, 0.0, 6.0, 0.0, 0.0],
                h: ["0", "0"],
                beta: [0.0, 0.0],
                sigma: [0.0, 0.0, 10.87],
            },
        ),
        "manufactured-p3" => build(
            name,
            Parts {
                p: 3.0,
                f: "4*abs(1 - 2*t)",
                delta: "4",
                q: 2.0,
                g: "6*t",
                growth: [0.0, 0.0, 6.0, 0.0, 0.0],
                h: ["0", "0"],
                beta: [0.0, 0.0],
                sigma: [0.0, 0.0, 4.0],
            },
        ),
        "zero" => build(
            name,
            Parts {
                p: 3.0,
                f: "0",
                delta: "0",
                q: 4.0,
                g: "0",
                growth: [0.0; 5],
                h: ["0", "0"],
                beta: [0.0, 0.0],
                sigma: [0.0, 0.0, 0.0],
            },
        ),
        _ => Err(Error::Config(format!(
            "unknown problem `{name}`; known problems: {}",
            NAMES.join(", ")
        ))),
    }
}
