//! Solves the admissibility equation for a few forcing terms and compares
//! `||x||_inf` with the bound `2 D (1 + 1/lambda) ||y||_L`.

use polydich::admissibility::{green_solve, DichotomyConstants, GreenOptions, GridFunction, VerifyMode};
use polydich::evolution::{scenario, ScenarioSpec};
use polydich::grid::TimeGrid;
use polydich::linalg::Vector;
use polydich::norms::constant_norm;

fn main() -> polydich::Result<()> {
    let s = scenario(&ScenarioSpec::new("oblique_dichotomy"))?;
    let proj = s.projection.clone().unwrap();
    let norms = constant_norm(2);
    let grid = TimeGrid::new(1000.0, 64)?;
    let constants = DichotomyConstants { d: s.reference["D"], lambda: 1.0 };
    let options = GreenOptions { constants: Some(constants), ..Default::default() };
    type Forcing = Box<dyn Fn(f64) -> Vector>;
    let forcings: [(&str, Forcing); 3] = [
        ("constant", Box::new(|_| Vector::from_vec(vec![1.0, 1.0]))),
        ("tail", Box::new(|t| Vector::from_vec(vec![1.0 / t, -1.0 / t]))),
        ("oscillating", Box::new(|t| Vector::from_vec(vec![t.ln().sin(), t.ln().cos()]))),
    ];
    for (name, f) in &forcings {
        let y = GridFunction::from_fn(&grid, f)?;
        let (x, rep) = green_solve(&s.family, &proj, &y, &norms, &options)?;
        println!(
            "{name:<12} ||y||_L {:.4} ||x||_inf {:.4} bound {:.4} residual {:.1e} x(1000) = {:.4?}",
            rep.y_norm_l,
            rep.x_norm_sup,
            rep.bound.unwrap(),
            rep.residual,
            x.eval(1000.0).as_slice()
        );
    }
    let y = GridFunction::from_fn(&grid, |_| Vector::from_vec(vec![1.0, 1.0]))?;
    let reference = GreenOptions { mode: VerifyMode::Reference, ..options };
    let (_, rep) = green_solve(&s.family, &proj, &y, &norms, &reference)?;
    println!("Gauss-Legendre check of the trapezoid solution: residual {:.2e}", rep.residual);
    Ok(())
}
