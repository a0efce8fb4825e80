//! Certifies a dichotomy from orbit growth alone, then checks the projection
//! against the known splitting.

use polydich::dichotomy::{certify, CertifyConfig};
use polydich::evolution::{scenario, ScenarioSpec};
use polydich::norms::constant_norm;

fn main() -> polydich::Result<()> {
    for name in ["diag_dichotomy", "rotated_dichotomy", "oblique_dichotomy"] {
        let s = scenario(&ScenarioSpec::new(name).with("lambda", 0.75))?;
        let (cert, proj) = certify(&s.family, None, &constant_norm(s.family.dim()), &CertifyConfig::new(1000.0, 0))?;
        let reference = s.projection.unwrap().at(1.0)?;
        let computed = proj.at(1.0)?;
        let pb = cert.projection.as_ref().unwrap();
        println!(
            "{name:<18} lambda_s {:.4} lambda_u {:.4} D {:.4} ||P|| {:.3} <= {:.3} range error {:.1e} -> {}",
            cert.lambda_stable.unwrap(),
            cert.lambda_unstable.unwrap(),
            cert.d,
            pb.sup_norm,
            pb.bound,
            (&computed * &reference - &reference).amax(),
            if cert.verdict.pass { "pass" } else { "fail" }
        );
    }
    Ok(())
}
