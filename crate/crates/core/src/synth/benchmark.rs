use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::constraints::SolverInput;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkInstance {
    pub name: String,
    pub n_jobs: usize,
    pub n_machines: usize,
    /// Per job, `(machine_id, duration)` in visiting order.
    pub matrix: Vec<Vec<(usize, u32)>>,
}

impl BenchmarkInstance {
    pub fn to_solver_input(&self) -> SolverInput {
        SolverInput::from_matrix(self.n_machines, &self.matrix)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchmarkError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn format_err(line: usize, message: impl Into<String>) -> BenchmarkError {
    BenchmarkError::Format {
        line,
        message: message.into(),
    }
}

pub fn load_benchmark(path: &Path) -> Result<BenchmarkInstance, BenchmarkError> {
    let text = std::fs::read_to_string(path).map_err(|source| BenchmarkError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("instance");
    parse_benchmark(name, &text)
}

/// Standard text format: `n_jobs n_machines`, then for each job its
/// `machine duration` pairs. Tokens may be split across lines arbitrarily;
/// blank lines and `#` comments are skipped.
pub fn parse_benchmark(name: &str, text: &str) -> Result<BenchmarkInstance, BenchmarkError> {
    let mut tokens: Vec<(usize, &str)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        tokens.extend(line.split_whitespace().map(|t| (i + 1, t)));
    }
    let last_line = text.lines().count().max(1);
    let mut it = tokens.into_iter();
    let mut next_int = |what: &str| -> Result<(usize, u64), BenchmarkError> {
        let (line, tok) = it.next().ok_or_else(|| {
            format_err(
                last_line,
                format!("unexpected end of file, expected {what}"),
            )
        })?;
        tok.parse::<u64>()
            .map(|v| (line, v))
            .map_err(|_| format_err(line, format!("expected {what}, found {tok:?}")))
    };
    let (_, n_jobs) = next_int("job count")?;
    let (line, n_machines) = next_int("machine count")?;
    if n_jobs == 0 || n_machines == 0 {
        return Err(format_err(line, "job and machine counts must be positive"));
    }
    let (n_jobs, n_machines) = (n_jobs as usize, n_machines as usize);
    let mut matrix = Vec::with_capacity(n_jobs);
    for j in 0..n_jobs {
        let mut ops = Vec::with_capacity(n_machines);
        for _ in 0..n_machines {
            let (line, m) = next_int(&format!("machine id for job {j}"))?;
            if m as usize >= n_machines {
                return Err(format_err(
                    line,
                    format!("machine id {m} out of range 0..{n_machines}"),
                ));
            }
            let (line, d) = next_int(&format!("duration for job {j}"))?;
            if d == 0 || d > u32::MAX as u64 {
                return Err(format_err(line, format!("invalid duration {d}")));
            }
            ops.push((m as usize, d as u32));
        }
        matrix.push(ops);
    }
    if let Some((line, tok)) = it.next() {
        return Err(format_err(line, format!("trailing token {tok:?}")));
    }
    Ok(BenchmarkInstance {
        name: name.to_string(),
        n_jobs,
        n_machines,
        matrix,
    })
}
