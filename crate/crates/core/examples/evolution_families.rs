//! Builds every scenario, checks the cocycle law and compares the generator
//! route against the closed form.

use polydich::evolution::scenario::scenario_defaults;
use polydich::evolution::{check_cocycle, scenario, scenario_names, ScenarioSpec};
use polydich::grid::log_spaced;

fn main() -> polydich::Result<()> {
    let grid = log_spaced(1.0, 1000.0, 16);
    for (name, description) in scenario_names() {
        let s = scenario(&ScenarioSpec::new(name))?;
        let rep = check_cocycle(&s.family, &grid, 1e-9)?;
        println!("{name:<24} d={} cocycle residual {:.1e}  {description}", s.family.dim(), rep.max_residual);
    }

    let closed = scenario(&ScenarioSpec::new("diag_dichotomy"))?;
    let generated = scenario(&ScenarioSpec::new("diag_dichotomy").with("generator", 1.0))?;
    let gap = (closed.family.evaluate(1000.0, 1.0)? - generated.family.evaluate(1000.0, 1.0)?).amax();
    println!("diag_dichotomy closed form vs generator at (1000, 1): {gap:.2e}");
    println!("diag_dichotomy defaults: {:?}", scenario_defaults("diag_dichotomy").unwrap());

    let c = scenario(&ScenarioSpec::new("counterexample"))?;
    for l in 1..=6 {
        let n = 2f64.powi(l);
        println!("counterexample ||T({}, {n})|| = {}", n + 1.0, c.family.evaluate(n + 1.0, n)?[(0, 0)]);
    }
    Ok(())
}
