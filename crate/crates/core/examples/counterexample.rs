//! The discrete family with factors `A_n = n` at powers of two: every Green
//! solve is bounded by twice the forcing, yet no polynomial growth bound
//! holds, so no dichotomy can be certified.

use polydich::admissibility::{admissibility_probe, default_battery, GreenOptions};
use polydich::dichotomy::{certify, CertifyConfig};
use polydich::evolution::{scenario, ScenarioSpec};
use polydich::grid::TimeGrid;
use polydich::norms::constant_norm;

fn main() -> polydich::Result<()> {
    let s = scenario(&ScenarioSpec::new("counterexample"))?;
    let proj = s.projection.clone().unwrap();
    let norms = constant_norm(1);
    let grid = TimeGrid::new(1000.0, 64)?;
    let battery = default_battery(&s.family, &grid, true)?;
    let sum = admissibility_probe(&s.family, &proj, &norms, &battery, None, &GreenOptions::default(), 0)?;
    for m in &sum.members {
        println!("{:<12} ||x||/||y||_L = {:.4}", m.name, m.report.ratio);
    }
    println!("worst ratio {:.4} (bound 2), admissible: {}", sum.worst_ratio, sum.admissible);

    let (cert, _) = certify(&s.family, Some(&proj), &norms, &CertifyConfig::new(1000.0, 0))?;
    let growth = cert.bounded_growth.as_ref().unwrap();
    println!("bounded growth: M {:.3} a {:.3} drift {:.3} -> {}", growth.m, growth.a, growth.drift, growth.pass);
    println!("certificate: {}", if cert.verdict.pass { "pass" } else { "fail" });
    for r in &cert.verdict.reasons {
        println!("  {r}");
    }
    Ok(())
}
