//! Lyapunov norms of a nonuniform contraction: the norm absorbs the
//! nonuniformity (constant one) at the price of growth `t^eps`.

use polydich::dichotomy::fit_dichotomy;
use polydich::evolution::{scenario, ScenarioSpec};
use polydich::grid::{SampleConfig, SamplePairs};
use polydich::linalg::Vector;
use polydich::norms::{check_norm_equivalence, constant_norm, lyapunov_norm, LyapunovConfig};

fn main() -> polydich::Result<()> {
    let t_max = 1000.0;
    let s = scenario(&ScenarioSpec::new("nonuniform_contraction").with("lambda", 2.0).with("epsilon", 0.5))?;
    let proj = s.projection.clone().unwrap();
    let lyap = lyapunov_norm(&s.family, &proj, &LyapunovConfig::new(2.0, t_max))?;

    let x = Vector::from_vec(vec![1.0]);
    for t in [1.0, 3.0, 10.0, 100.0, 1000.0] {
        println!("||1||_{t:<6} = {:.4}", lyap.norm(t, &x)?);
    }
    let eq = check_norm_equivalence(&lyap, 16, t_max, 0)?;
    println!("fitted equivalence: ||x|| <= ||x||_t <= {:.3} t^{:.3} ||x||", eq.fitted_c, eq.fitted_epsilon);

    let samples = SamplePairs::new(&SampleConfig::with_t_max(t_max), 1, &[]);
    for (label, norms) in [("constant", constant_norm(1)), ("lyapunov", lyap)] {
        let cert = fit_dichotomy(&s.family, &norms, &proj, &samples)?;
        println!(
            "{label:<9} lambda {:.4} D {:.4} drift {:.3} -> {}",
            cert.lambda().unwrap(),
            cert.d,
            cert.epsilon_stable.unwrap(),
            if cert.verdict.pass { "pass" } else { "fail" }
        );
    }
    Ok(())
}
