use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::benchmark::{parse_benchmark, BenchmarkInstance};
use crate::dsl::{ParamSpec, ParamValue};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ParamBank {
    Discrete {
        name: String,
        values: Vec<f64>,
        unit: String,
    },
    Continuous {
        name: String,
        min: f64,
        max: f64,
        step: f64,
        unit: String,
    },
}

fn decimals(step: f64) -> i32 {
    (0..8)
        .find(|&d| {
            let s = step * 10f64.powi(d);
            (s - s.round()).abs() < 1e-9
        })
        .unwrap_or(8)
}

impl ParamBank {
    pub fn name(&self) -> &str {
        match self {
            ParamBank::Discrete { name, .. } | ParamBank::Continuous { name, .. } => name,
        }
    }

    pub fn unit(&self) -> &str {
        match self {
            ParamBank::Discrete { unit, .. } | ParamBank::Continuous { unit, .. } => unit,
        }
    }

    pub fn spec(&self) -> ParamSpec {
        match self {
            ParamBank::Discrete { values, unit, .. } => {
                ParamSpec::discrete(values.iter().map(|&v| ParamValue::number(v)), unit.as_str())
            }
            ParamBank::Continuous { min, max, unit, .. } => {
                ParamSpec::continuous(*min, *max, unit.as_str())
            }
        }
    }

    /// Discrete banks draw a listed value; continuous banks draw a grid
    /// point `min + k * step`, rounded to the step's decimals.
    pub fn sample(&self, rng: &mut impl Rng) -> ParamValue {
        match self {
            ParamBank::Discrete { values, .. } => {
                ParamValue::number(values[rng.gen_range(0..values.len())])
            }
            ParamBank::Continuous { min, max, step, .. } => {
                let n = ((max - min) / step + 1e-9).floor() as u64;
                let k = rng.gen_range(0..=n);
                let scale = 10f64.powi(decimals(*step));
                ParamValue::number(((min + k as f64 * step) * scale).round() / scale)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperationEntry {
    pub identifier: String,
    pub device: String,
    pub verb: String,
    pub participle: String,
    pub aliases: Vec<String>,
    pub params: Vec<ParamBank>,
}

/// Static name banks used to dress benchmark instances as scenarios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vocab {
    pub operations: Vec<OperationEntry>,
    pub products: Vec<String>,
    pub materials: Vec<String>,
    pub templates: Vec<String>,
}

impl Vocab {
    pub fn bundled() -> &'static Vocab {
        static V: OnceLock<Vocab> = OnceLock::new();
        V.get_or_init(|| Vocab {
            operations: serde_json::from_str(include_str!("../../data/vocab/operations.json"))
                .expect("bundled operations"),
            products: serde_json::from_str(include_str!("../../data/vocab/products.json"))
                .expect("bundled products"),
            materials: serde_json::from_str(include_str!("../../data/vocab/materials.json"))
                .expect("bundled materials"),
            templates: serde_json::from_str(include_str!("../../data/vocab/templates.json"))
                .expect("bundled templates"),
        })
    }

    pub fn device_names(&self) -> Vec<&str> {
        self.operations.iter().map(|o| o.device.as_str()).collect()
    }

    pub fn by_device(&self, device: &str) -> Option<&OperationEntry> {
        self.operations.iter().find(|o| o.device == device)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub file: String,
    pub n_jobs: usize,
    pub n_machines: usize,
    pub optimum: u64,
}

#[derive(Deserialize)]
struct Manifest {
    instances: Vec<ManifestEntry>,
}

const BENCHMARK_FILES: &[(&str, &str)] = &[
    ("ft06.jsp", include_str!("../../data/benchmarks/ft06.jsp")),
    ("la01.jsp", include_str!("../../data/benchmarks/la01.jsp")),
    ("la02.jsp", include_str!("../../data/benchmarks/la02.jsp")),
    ("la03.jsp", include_str!("../../data/benchmarks/la03.jsp")),
    ("la04.jsp", include_str!("../../data/benchmarks/la04.jsp")),
    ("la05.jsp", include_str!("../../data/benchmarks/la05.jsp")),
    ("la06.jsp", include_str!("../../data/benchmarks/la06.jsp")),
    ("la11.jsp", include_str!("../../data/benchmarks/la11.jsp")),
    ("abz5.jsp", include_str!("../../data/benchmarks/abz5.jsp")),
    ("orb01.jsp", include_str!("../../data/benchmarks/orb01.jsp")),
];

pub fn benchmark_manifest() -> Vec<ManifestEntry> {
    let m: Manifest = serde_json::from_str(include_str!("../../data/benchmarks/manifest.json"))
        .expect("bundled manifest");
    m.instances
}

/// The bundled instances in manifest order, with their published optima.
pub fn bundled_benchmarks() -> Vec<(BenchmarkInstance, u64)> {
    benchmark_manifest()
        .into_iter()
        .map(|e| {
            let text = BENCHMARK_FILES
                .iter()
                .find(|(f, _)| *f == e.file)
                .map(|(_, t)| *t)
                .expect("manifest file is bundled");
            (
                parse_benchmark(&e.name, text).expect("bundled benchmark parses"),
                e.optimum,
            )
        })
        .collect()
}
