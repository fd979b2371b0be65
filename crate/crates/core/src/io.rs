//! On-disk formats: instance JSON, trace CSV and run summary JSON.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::forward::{forward, ParamState, ProblemInstance};
use crate::linalg::{Mat, Vector};
use crate::solver::IterationTrace;

/// Largest loss accepted at a stored plant.
pub const PLANT_LOSS_TOL: f64 = 1e-20;

/// `W` may be written as its diagonal or as a full (diagonal) matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightSpec {
    Diagonal(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

/// Serialized instance, matrices as row-major nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct InstanceFile {
    pub n: usize,
    pub d: usize,
    pub R: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub A1: Vec<Vec<f64>>,
    pub A2: Vec<Vec<f64>>,
    pub A3: Vec<Vec<f64>>,
    pub B: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub W: Option<WeightSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub Xstar: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub Ystar: Option<Vec<Vec<f64>>>,
}

/// A decoded instance with its optional plant.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedInstance {
    pub instance: ProblemInstance,
    pub seed: Option<u64>,
    pub plant: Option<ParamState>,
}

pub fn mat_to_rows(m: &Mat) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn rows_to_mat(context: &'static str, rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<Mat> {
    if rows.len() != nrows {
        return Err(dim_err(context, format!("{nrows} rows"), format!("{} rows", rows.len())));
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
        return Err(dim_err(context, format!("{ncols} columns"), format!("{} columns", bad.len())));
    }
    Ok(Mat::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl LoadedInstance {
    pub fn to_file(&self) -> InstanceFile {
        let inst = &self.instance;
        InstanceFile {
            n: inst.n(),
            d: inst.d(),
            R: inst.r,
            seed: self.seed,
            A1: mat_to_rows(&inst.a1),
            A2: mat_to_rows(&inst.a2),
            A3: mat_to_rows(&inst.a3),
            B: mat_to_rows(&inst.b),
            W: Some(WeightSpec::Diagonal(inst.w.iter().copied().collect())),
            l: Some(inst.l),
            Xstar: self.plant.as_ref().map(|p| mat_to_rows(&p.x)),
            Ystar: self.plant.as_ref().map(|p| mat_to_rows(&p.y)),
        }
    }

    /// Decode and validate; a stored plant must have loss `≤ 1e−20`.
    pub fn from_file(f: &InstanceFile) -> Result<Self> {
        let (n, d) = (f.n, f.d);
        let w = match &f.W {
            None => Vector::from_element(n, 1.0),
            Some(WeightSpec::Diagonal(v)) => {
                if v.len() != n {
                    return Err(dim_err("W", n, v.len()));
                }
                Vector::from_column_slice(v)
            }
            Some(WeightSpec::Matrix(rows)) => {
                let m = rows_to_mat("W", rows, n, n)?;
                let off = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).any(|(i, j)| i != j && m[(i, j)] != 0.0);
                if off {
                    return Err(Error::InvalidInstance("W must be diagonal".into()));
                }
                m.diagonal()
            }
        };
        let instance = ProblemInstance::new(
            rows_to_mat("A1", &f.A1, n, d)?,
            rows_to_mat("A2", &f.A2, n, d)?,
            rows_to_mat("A3", &f.A3, n, d)?,
            rows_to_mat("B", &f.B, n, d)?,
            w,
            f.R,
            f.l.unwrap_or(1.0),
        )?;
        let plant = match (&f.Xstar, &f.Ystar) {
            (Some(x), Some(y)) => Some(ParamState::new(
                rows_to_mat("Xstar", x, d, d)?,
                rows_to_mat("Ystar", y, d, d)?,
            )),
            (None, None) => None,
            _ => return Err(Error::InvalidInstance("Xstar and Ystar must be given together".into())),
        };
        if let Some(p) = &plant {
            let loss = forward(&instance, p)?.loss;
            if loss > PLANT_LOSS_TOL {
                return Err(Error::InvalidInstance(format!("stored plant has loss {loss:e}")));
            }
        }
        Ok(Self {
            instance,
            seed: f.seed,
            plant,
        })
    }
}

pub fn save_instance(path: &Path, inst: &LoadedInstance) -> Result<()> {
    let text = serde_json::to_string_pretty(&inst.to_file())?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn load_instance(path: &Path) -> Result<LoadedInstance> {
    let text = fs::read_to_string(path)?;
    let file: InstanceFile = serde_json::from_str(&text)?;
    LoadedInstance::from_file(&file)
}

pub const TRACE_COLUMNS: [&str; 10] = [
    "t",
    "loss",
    "grad_norm_x",
    "grad_norm_y",
    "step_norm",
    "r_t",
    "t_forward_ms",
    "t_grad_ms",
    "t_hess_ms",
    "t_solve_ms",
];

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// Write the trace as CSV. Timing cells stay empty unless `timings` is set,
/// so reruns of the same configuration produce identical bytes.
pub fn write_trace_csv<W: Write>(out: W, trace: &IterationTrace, timings: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_COLUMNS)?;
    for r in &trace.records {
        let t = |v: f64| if timings { format!("{v:.3}") } else { String::new() };
        w.write_record([
            r.t.to_string(),
            cell(Some(r.loss)),
            cell(Some(r.grad_norm_x)),
            cell(Some(r.grad_norm_y)),
            cell(r.step_norm),
            cell(r.r_t),
            t(r.timings.forward_ms),
            t(r.timings.grad_ms),
            t(r.timings.hess_ms),
            t(r.timings.solve_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One parsed trace row; empty cells become `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub values: Vec<Option<f64>>,
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let mut rd = csv::Reader::from_path(path)?;
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != TRACE_COLUMNS {
        return Err(Error::InvalidConfig(format!("unexpected trace header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let parse = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| Error::InvalidConfig(format!("bad trace cell {s:?}")))
            }
        };
        let t = rec[0]
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad iteration index {:?}", &rec[0])))?;
        let values = rec.iter().skip(1).map(parse).collect::<Result<Vec<_>>>()?;
        rows.push(TraceRow { t, values });
    }
    Ok(rows)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::{plant, random_instance};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn instance_round_trip_is_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let inst = random_instance(&mut rng, 2, 1, 1.0);
        let loaded = LoadedInstance {
            instance: inst,
            seed: Some(0),
            plant: None,
        };
        let text = serde_json::to_string(&loaded.to_file()).unwrap();
        let back = LoadedInstance::from_file(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, loaded);
    }

    #[test]
    fn plant_round_trip_and_default_weight() {
        let pl = plant(3, 5, 2, 1.0, 0.8).unwrap();
        let loaded = LoadedInstance {
            instance: pl.instance.clone(),
            seed: Some(3),
            plant: Some(pl.optimum()),
        };
        let mut file = loaded.to_file();
        let back = LoadedInstance::from_file(&file).unwrap();
        assert_eq!(back.plant, Some(pl.optimum()));

        file.W = None;
        let back = LoadedInstance::from_file(&file).unwrap();
        assert_eq!(back.instance.w, Vector::from_element(5, 1.0));

        file.B[0][0] += 0.5;
        assert!(LoadedInstance::from_file(&file).is_err());
    }

    #[test]
    fn shape_errors_are_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let loaded = LoadedInstance {
            instance: random_instance(&mut rng, 3, 2, 1.0),
            seed: None,
            plant: None,
        };
        let mut file = loaded.to_file();
        file.n = 4;
        assert!(matches!(LoadedInstance::from_file(&file), Err(Error::Dimension { .. })));
    }

    #[test]
    fn trace_header_is_stable() {
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &IterationTrace::default(), false).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t,loss,grad_norm_x,grad_norm_y,step_norm,r_t,t_forward_ms,t_grad_ms,t_hess_ms,t_solve_ms\n"
        );
    }
}
