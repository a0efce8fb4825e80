//! Built-in scenario library.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_6};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{from_generator, EvolutionFamily, IntegratorSettings, MatFn};
use crate::dichotomy::{ProjectionFamily, ProjectionKind};
use crate::error::{Error, Result};
use crate::linalg::{plane_rotation, Mat, Vector};

/// `{name, params}` document selecting a built-in family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

impl ScenarioSpec {
    pub fn new(name: impl Into<String>) -> Self {
        ScenarioSpec { name: name.into(), params: BTreeMap::new(), description: None }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Parses `key=value` assignments.
    pub fn with_assignments<'a, I: IntoIterator<Item = &'a str>>(mut self, items: I) -> Result<Self> {
        for item in items {
            let (k, v) =
                item.split_once('=').ok_or_else(|| Error::invalid(format!("expected key=value, got `{item}`")))?;
            let v: f64 =
                v.trim().parse().map_err(|_| Error::invalid(format!("parameter `{k}` is not a number: `{v}`")))?;
            self.params.insert(k.trim().to_string(), v);
        }
        Ok(self)
    }
}

/// A resolved scenario: the family, its reference projection when known, and
/// the constants it was built from.
#[derive(Debug, Clone)]
pub struct Scenario {
    /// spec with every default filled in
    pub spec: ScenarioSpec,
    pub family: EvolutionFamily,
    pub projection: Option<ProjectionFamily>,
    pub reference: BTreeMap<String, f64>,
}

struct Entry {
    name: &'static str,
    description: &'static str,
    defaults: &'static [(&'static str, f64)],
}

const LIBRARY: &[Entry] = &[
    Entry {
        name: "scalar_contraction",
        description: "T(t,tau) = (tau/t)^lambda",
        defaults: &[("lambda", 1.0), ("generator", 0.0)],
    },
    Entry {
        name: "scalar_expansion",
        description: "T(t,tau) = (t/tau)^lambda",
        defaults: &[("lambda", 1.0), ("generator", 0.0)],
    },
    Entry {
        name: "diag_dichotomy",
        description: "block diagonal of ds contracting and du expanding scalar power laws, P = diag(Id, 0)",
        defaults: &[("lambda", 1.0), ("ds", 1.0), ("du", 1.0), ("generator", 0.0)],
    },
    Entry {
        name: "nonuniform_contraction",
        description: "T(t,tau) = (tau/t)^lambda g(tau)/g(t), g(t) = t^(epsilon sin^2((pi/2) ln t))",
        defaults: &[("lambda", 2.0), ("epsilon", 0.5)],
    },
    Entry {
        name: "counterexample",
        description: "T(t,tau) = A_{floor t - 1} ... A_{floor tau}, A_n = n for n = 2^l (l >= 1), else 0",
        defaults: &[],
    },
    Entry {
        name: "rotated_dichotomy",
        description: "generator R diag(-lambda/t, lambda/t) R^T, R a rotation by theta",
        defaults: &[("lambda", 1.0), ("theta", 0.5)],
    },
    Entry {
        name: "oblique_dichotomy",
        description: "V diag((tau/t)^lambda, (t/tau)^lambda) V^-1 with V = [e1, (cos theta, sin theta)]",
        defaults: &[("lambda", 1.0), ("theta", FRAC_PI_6)],
    },
    Entry { name: "neutral", description: "T(t,tau) = Id, no decay and no growth", defaults: &[("dimension", 1.0)] },
];

/// `(name, description)` of every built-in scenario.
pub fn scenario_names() -> Vec<(&'static str, &'static str)> {
    LIBRARY.iter().map(|e| (e.name, e.description)).collect()
}

/// Default parameters of a built-in scenario.
pub fn scenario_defaults(name: &str) -> Option<BTreeMap<String, f64>> {
    LIBRARY.iter().find(|e| e.name == name).map(|e| e.defaults.iter().map(|&(k, v)| (k.to_string(), v)).collect())
}

/// Oscillating exponent weight of the nonuniform scenario.
pub fn nonuniform_weight(t: f64) -> f64 {
    (FRAC_PI_2 * t.ln()).sin().powi(2)
}

/// Factor `A_n` of the discrete counterexample.
pub fn counterexample_factor(n: u64) -> f64 {
    if n >= 2 && n.is_power_of_two() {
        n as f64
    } else {
        0.0
    }
}

fn power_diag(ds: usize, du: usize, lambda: f64) -> impl Fn(f64, f64) -> Mat + Send + Sync + Clone {
    move |t: f64, tau: f64| {
        let c = (tau / t).powf(lambda);
        let e = (t / tau).powf(lambda);
        let diag: Vec<f64> = std::iter::repeat_n(c, ds).chain(std::iter::repeat_n(e, du)).collect();
        Mat::from_diagonal(&Vector::from_vec(diag))
    }
}

fn power_generator(ds: usize, du: usize, lambda: f64) -> MatFn {
    Arc::new(move |t: f64| {
        let diag: Vec<f64> = std::iter::repeat_n(-lambda / t, ds).chain(std::iter::repeat_n(lambda / t, du)).collect();
        Mat::from_diagonal(&Vector::from_vec(diag))
    })
}

fn block_projection(ds: usize, du: usize) -> Mat {
    let diag: Vec<f64> = std::iter::repeat_n(1.0, ds).chain(std::iter::repeat_n(0.0, du)).collect();
    Mat::from_diagonal(&Vector::from_vec(diag))
}

fn count(params: &BTreeMap<String, f64>, key: &str) -> Result<usize> {
    let v = params[key];
    if v < 0.0 || v.fract() != 0.0 || v > 64.0 {
        return Err(Error::invalid(format!("`{key}` must be a small non-negative integer, got {v}")));
    }
    Ok(v as usize)
}

fn positive(params: &BTreeMap<String, f64>, key: &str) -> Result<f64> {
    let v = params[key];
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::invalid(format!("`{key}` must be positive, got {v}")));
    }
    Ok(v)
}

/// Builds a scenario from its spec. Unknown names and unknown parameter keys
/// are rejected.
pub fn scenario(spec: &ScenarioSpec) -> Result<Scenario> {
    let entry =
        LIBRARY.iter().find(|e| e.name == spec.name).ok_or_else(|| Error::UnknownScenario(spec.name.clone()))?;
    let mut params = scenario_defaults(entry.name).expect("entry exists");
    for (k, v) in &spec.params {
        if !params.contains_key(k) {
            return Err(Error::invalid(format!(
                "scenario `{}` has no parameter `{k}` (known: {})",
                entry.name,
                params.keys().cloned().collect::<Vec<_>>().join(", ")
            )));
        }
        params.insert(k.clone(), *v);
    }
    let use_generator = params.get("generator").is_some_and(|&g| g != 0.0);
    let settings = IntegratorSettings::default();
    let mut reference = BTreeMap::new();

    let (family, projection) = match entry.name {
        "scalar_contraction" | "scalar_expansion" | "diag_dichotomy" => {
            let lambda = positive(&params, "lambda")?;
            let (ds, du) = match entry.name {
                "scalar_contraction" => (1, 0),
                "scalar_expansion" => (0, 1),
                _ => (count(&params, "ds")?, count(&params, "du")?),
            };
            if ds + du == 0 {
                return Err(Error::invalid("diag_dichotomy needs ds + du >= 1"));
            }
            let family = if use_generator {
                from_generator(power_generator(ds, du, lambda), ds + du, settings)
            } else {
                EvolutionFamily::closed_form(ds + du, entry.name, power_diag(ds, du, lambda))
            };
            reference.insert("lambda".into(), lambda);
            reference.insert("D".into(), 1.0);
            reference.insert("bounded_growth_a".into(), if du > 0 { lambda } else { 0.0 });
            let proj = ProjectionFamily::constant(block_projection(ds, du), ProjectionKind::Exact);
            (family, Some(proj))
        }
        "nonuniform_contraction" => {
            let lambda = positive(&params, "lambda")?;
            let eps = params["epsilon"];
            if !(eps >= 0.0) {
                return Err(Error::invalid("`epsilon` must be non-negative"));
            }
            let family = EvolutionFamily::closed_form(1, entry.name, move |t: f64, tau: f64| {
                let log_ratio = eps * (nonuniform_weight(tau) * tau.ln() - nonuniform_weight(t) * t.ln());
                Mat::from_element(1, 1, (tau / t).powf(lambda) * log_ratio.exp())
            });
            reference.insert("lambda".into(), lambda);
            reference.insert("epsilon".into(), eps);
            reference.insert("D".into(), 1.0);
            (family, Some(ProjectionFamily::identity(1)))
        }
        "counterexample" => {
            let family =
                EvolutionFamily::discrete_product(1, entry.name, |n| Mat::from_element(1, 1, counterexample_factor(n)));
            reference.insert("admissibility_constant".into(), 2.0);
            (family, Some(ProjectionFamily::identity(1)))
        }
        "rotated_dichotomy" => {
            let lambda = positive(&params, "lambda")?;
            let r = plane_rotation(2, params["theta"]);
            let rt = r.transpose();
            let a = {
                let (r, rt) = (r.clone(), rt.clone());
                Arc::new(move |t: f64| &r * Mat::from_diagonal(&Vector::from_vec(vec![-lambda / t, lambda / t])) * &rt)
            };
            let family = from_generator(a, 2, settings).with_label(entry.name);
            let p = &r * block_projection(1, 1) * &rt;
            reference.insert("lambda".into(), lambda);
            reference.insert("D".into(), 1.0);
            (family, Some(ProjectionFamily::constant(p, ProjectionKind::Exact)))
        }
        "oblique_dichotomy" => {
            let lambda = positive(&params, "lambda")?;
            let theta = params["theta"];
            if theta.sin().abs() < 1e-6 {
                return Err(Error::invalid("oblique_dichotomy needs sin(theta) != 0"));
            }
            let v = Mat::from_row_slice(2, 2, &[1.0, theta.cos(), 0.0, theta.sin()]);
            let v_inv = v.clone().try_inverse().expect("sin(theta) != 0");
            let diag = power_diag(1, 1, lambda);
            let (vf, vif) = (v.clone(), v_inv.clone());
            let family = EvolutionFamily::closed_form(2, entry.name, move |t, tau| &vf * diag(t, tau) * &vif);
            let p = &v * block_projection(1, 1) * &v_inv;
            reference.insert("lambda".into(), lambda);
            reference.insert("D".into(), crate::linalg::condition_number(&v));
            (family, Some(ProjectionFamily::constant(p, ProjectionKind::Exact)))
        }
        "neutral" => {
            let d = count(&params, "dimension")?.max(1);
            (EvolutionFamily::identity(d).with_label(entry.name), Some(ProjectionFamily::identity(d)))
        }
        _ => unreachable!("library entry without constructor"),
    };
    let resolved =
        ScenarioSpec { name: entry.name.to_string(), params, description: Some(entry.description.to_string()) };
    Ok(Scenario { spec: resolved, family, projection, reference })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn every_name_builds() {
        for (name, _) in scenario_names() {
            let s = scenario(&ScenarioSpec::new(name)).unwrap();
            let id = s.family.evaluate(3.0, 3.0).unwrap();
            assert_eq!(id, Mat::identity(s.family.dim(), s.family.dim()));
        }
    }

    #[test]
    fn unknown_scenario_and_parameter() {
        assert!(matches!(scenario(&ScenarioSpec::new("nope")), Err(Error::UnknownScenario(_))));
        let bad = ScenarioSpec::new("scalar_contraction").with("lamda", 1.0);
        assert!(matches!(scenario(&bad), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn documented_values() {
        let a = scenario(&ScenarioSpec::new("scalar_contraction")).unwrap();
        assert_relative_eq!(a.family.evaluate(4.0, 1.0).unwrap()[(0, 0)], 0.25);
        let c = scenario(&ScenarioSpec::new("diag_dichotomy")).unwrap();
        let m = c.family.evaluate(2.0, 1.0).unwrap();
        assert_relative_eq!(m[(0, 0)], 0.5);
        assert_relative_eq!(m[(1, 1)], 2.0);
        let e = scenario(&ScenarioSpec::new("counterexample")).unwrap();
        assert_eq!(e.family.evaluate(9.0, 8.0).unwrap()[(0, 0)], 8.0);
        assert_eq!(e.family.evaluate(3.0, 1.0).unwrap()[(0, 0)], 0.0);
    }

    #[test]
    fn spec_json_and_assignments() {
        let s = ScenarioSpec::from_json(r#"{"name":"diag_dichotomy","params":{"lambda":2}}"#).unwrap();
        assert_eq!(s.params["lambda"], 2.0);
        let t = ScenarioSpec::new("diag_dichotomy").with_assignments(["ds=2", "du = 1"]).unwrap();
        let built = scenario(&t).unwrap();
        assert_eq!(built.family.dim(), 3);
        assert!(ScenarioSpec::new("x").with_assignments(["ds"]).is_err());
    }

    #[test]
    fn generator_variant_matches_closed_form() {
        let spec = ScenarioSpec::new("diag_dichotomy").with("generator", 1.0);
        let g = scenario(&spec).unwrap();
        let m = g.family.evaluate(1000.0, 1.0).unwrap();
        assert_relative_eq!(m[(0, 0)], 1e-3, max_relative = 1e-8);
        assert_relative_eq!(m[(1, 1)], 1e3, max_relative = 1e-8);
    }
}
