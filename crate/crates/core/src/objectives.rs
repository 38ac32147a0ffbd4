//! Objective functions: GP draws on grids, analytic benchmarks, and tabular
//! objectives loaded from CSV. Every objective is maximized.

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{Dataset, GpModel};
use crate::kernel::{kernel_matrix, KernelSpec};
use crate::points::{check_dim, Points};
use crate::sampling::{build_feature_map, joint_normal_draw, sample_path_rff};

/// Where candidate inputs live.
#[derive(Debug, Clone, PartialEq)]
pub enum SearchSpace {
    Grid(Points),
    UnitCube { dim: usize },
}

impl SearchSpace {
    pub fn dim(&self) -> usize {
        match self {
            SearchSpace::Grid(g) => g.dim(),
            SearchSpace::UnitCube { dim } => *dim,
        }
    }

    pub fn grid(&self) -> Option<&Points> {
        match self {
            SearchSpace::Grid(g) => Some(g),
            SearchSpace::UnitCube { .. } => None,
        }
    }
}

/// `{v_1, …, v_k}^dim` in lexicographic order (last coordinate fastest).
pub fn regular_grid(levels: &[f64], dim: usize) -> Points {
    let k = levels.len();
    let total = k.pow(dim as u32);
    let mut p = Points::with_capacity(dim, total);
    let mut idx = vec![0usize; dim];
    for _ in 0..total {
        let row: Vec<f64> = idx.iter().map(|&i| levels[i]).collect();
        p.push(&row).expect("row has grid dimension");
        for j in (0..dim).rev() {
            idx[j] += 1;
            if idx[j] < k {
                break;
            }
            idx[j] = 0;
        }
    }
    p
}

/// `{1/k, 2/k, …, 1}`.
pub fn unit_levels(k: usize) -> Vec<f64> {
    (1..=k).map(|i| i as f64 / k as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Benchmark {
    Ackley4,
    Hartmann6,
    Shekel4,
    StyblinskiTang3,
}

const HARTMANN_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
const HARTMANN_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];
const HARTMANN_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];
const SHEKEL_BETA: [f64; 10] = [0.1, 0.2, 0.2, 0.4, 0.4, 0.6, 0.3, 0.7, 0.5, 0.5];
const SHEKEL_C: [[f64; 4]; 10] = [
    [4.0, 4.0, 4.0, 4.0],
    [1.0, 1.0, 1.0, 1.0],
    [8.0, 8.0, 8.0, 8.0],
    [6.0, 6.0, 6.0, 6.0],
    [3.0, 7.0, 3.0, 7.0],
    [2.0, 9.0, 2.0, 9.0],
    [5.0, 3.0, 5.0, 3.0],
    [8.0, 1.0, 8.0, 1.0],
    [6.0, 2.0, 6.0, 2.0],
    [7.0, 3.6, 7.0, 3.6],
];

impl Benchmark {
    pub fn dim(self) -> usize {
        match self {
            Benchmark::Ackley4 | Benchmark::Shekel4 => 4,
            Benchmark::Hartmann6 => 6,
            Benchmark::StyblinskiTang3 => 3,
        }
    }

    /// The standard evaluation box, identical in every coordinate.
    pub fn bounds(self) -> (f64, f64) {
        match self {
            Benchmark::Ackley4 => (-32.768, 32.768),
            Benchmark::Hartmann6 => (0.0, 1.0),
            Benchmark::Shekel4 => (0.0, 10.0),
            Benchmark::StyblinskiTang3 => (-5.0, 5.0),
        }
    }

    /// Maximum of the negated function, located numerically at the known
    /// minimizers.
    pub fn optimum(self) -> f64 {
        match self {
            Benchmark::Ackley4 => 0.0,
            Benchmark::Hartmann6 => 3.322_368_011_415_515,
            Benchmark::Shekel4 => 10.536_443_153_483_53,
            Benchmark::StyblinskiTang3 => 3.0 * 39.166_165_703_771_41,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Ackley4 => "ackley4",
            Benchmark::Hartmann6 => "hartmann6",
            Benchmark::Shekel4 => "shekel4",
            Benchmark::StyblinskiTang3 => "styblinski_tang3",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "ackley4" | "ackley" => Ok(Benchmark::Ackley4),
            "hartmann6" | "hartmann6d" | "hartmann" => Ok(Benchmark::Hartmann6),
            "shekel4" | "shekel" => Ok(Benchmark::Shekel4),
            "styblinski_tang3" | "styblinskitang3" | "styblinski_tang" => Ok(Benchmark::StyblinskiTang3),
            other => Err(Error::Config(format!("unknown benchmark {other:?}"))),
        }
    }

    /// Minimization form at a point of the standard box.
    pub fn standard_value(self, z: &[f64]) -> f64 {
        match self {
            Benchmark::Ackley4 => {
                let d = z.len() as f64;
                let sq = z.iter().map(|v| v * v).sum::<f64>() / d;
                let cs = z.iter().map(|v| (std::f64::consts::TAU * v).cos()).sum::<f64>() / d;
                -20.0 * (-0.2 * sq.sqrt()).exp() - cs.exp() + 20.0 + std::f64::consts::E
            }
            Benchmark::Hartmann6 => -HARTMANN_ALPHA
                .iter()
                .zip(HARTMANN_A.iter().zip(&HARTMANN_P))
                .map(|(alpha, (a, p))| {
                    let inner: f64 = (0..6).map(|j| a[j] * (z[j] - p[j]).powi(2)).sum();
                    alpha * (-inner).exp()
                })
                .sum::<f64>(),
            Benchmark::Shekel4 => -SHEKEL_C
                .iter()
                .zip(&SHEKEL_BETA)
                .map(|(c, b)| 1.0 / (z.iter().zip(c).map(|(x, ci)| (x - ci).powi(2)).sum::<f64>() + b))
                .sum::<f64>(),
            Benchmark::StyblinskiTang3 => 0.5 * z.iter().map(|v| v.powi(4) - 16.0 * v * v + 5.0 * v).sum::<f64>(),
        }
    }

    /// Negated value at a point of the unit cube, mapped affinely to the box.
    pub fn eval(self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        let (lo, hi) = self.bounds();
        let z: Vec<f64> = x.iter().map(|v| lo + (hi - lo) * v).collect();
        Ok(-self.standard_value(&z))
    }
}

pub fn benchmark_eval(name: Benchmark, x: &[f64]) -> Result<f64> {
    name.eval(x)
}

#[derive(Debug, Clone)]
pub enum ObjectiveKind {
    SyntheticGrid {
        grid: Points,
        values: Vec<f64>,
        argmax_id: usize,
    },
    Analytic(Benchmark),
    Tabular {
        grid: Points,
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct Objective {
    pub kind: ObjectiveKind,
    pub known_optimum: Option<f64>,
    lookup: HashMap<Vec<u64>, usize>,
}

fn key(x: &[f64]) -> Vec<u64> {
    // -0.0 and 0.0 must land on the same key
    x.iter().map(|v| (v + 0.0).to_bits()).collect()
}

fn grid_lookup(grid: &Points) -> std::result::Result<HashMap<Vec<u64>, usize>, usize> {
    let mut map = HashMap::with_capacity(grid.len());
    for (i, row) in grid.rows().enumerate() {
        if map.insert(key(row), i).is_some() {
            return Err(i);
        }
    }
    Ok(map)
}

fn max_of(values: &[f64]) -> (usize, f64) {
    crate::sampling::argmax_slice(values).expect("nonempty values")
}

impl Objective {
    pub fn analytic(b: Benchmark) -> Self {
        Objective {
            kind: ObjectiveKind::Analytic(b),
            known_optimum: Some(b.optimum()),
            lookup: HashMap::new(),
        }
    }

    pub fn synthetic(grid: Points, values: Vec<f64>) -> Result<Self> {
        Self::check_grid(&grid, &values)?;
        let lookup = grid_lookup(&grid).map_err(|i| Error::InvalidArgument(format!("grid row {i} is duplicated")))?;
        let (argmax_id, best) = max_of(&values);
        Ok(Objective {
            kind: ObjectiveKind::SyntheticGrid {
                grid,
                values,
                argmax_id,
            },
            known_optimum: Some(best),
            lookup,
        })
    }

    pub fn tabular(grid: Points, values: Vec<f64>) -> Result<Self> {
        Self::check_grid(&grid, &values)?;
        let lookup = grid_lookup(&grid).map_err(|i| Error::InvalidArgument(format!("grid row {i} is duplicated")))?;
        let (_, best) = max_of(&values);
        Ok(Objective {
            kind: ObjectiveKind::Tabular { grid, values },
            known_optimum: Some(best),
            lookup,
        })
    }

    fn check_grid(grid: &Points, values: &[f64]) -> Result<()> {
        if grid.is_empty() {
            return Err(Error::InvalidArgument("grid objective needs at least one point".into()));
        }
        if grid.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "{} grid points but {} values",
                grid.len(),
                values.len()
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            ObjectiveKind::SyntheticGrid { grid, .. } | ObjectiveKind::Tabular { grid, .. } => grid.dim(),
            ObjectiveKind::Analytic(b) => b.dim(),
        }
    }

    pub fn grid(&self) -> Option<(&Points, &[f64])> {
        match &self.kind {
            ObjectiveKind::SyntheticGrid { grid, values, .. } | ObjectiveKind::Tabular { grid, values } => {
                Some((grid, values))
            }
            ObjectiveKind::Analytic(_) => None,
        }
    }

    pub fn search_space(&self) -> SearchSpace {
        match self.grid() {
            Some((g, _)) => SearchSpace::Grid(g.clone()),
            None => SearchSpace::UnitCube { dim: self.dim() },
        }
    }

    /// Noise-free objective value.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        match &self.kind {
            ObjectiveKind::Analytic(b) => b.eval(x),
            ObjectiveKind::SyntheticGrid { values, .. } | ObjectiveKind::Tabular { values, .. } => {
                check_dim(self.dim(), x.len())?;
                self.lookup
                    .get(&key(x))
                    .map(|&i| values[i])
                    .ok_or_else(|| Error::InvalidArgument(format!("{x:?} is not a grid point")))
            }
        }
    }

    /// `f(x) + ε` with `ε ~ N(0, noise_variance)`. One normal is drawn even
    /// when the variance is zero so that noise streams stay aligned.
    pub fn observe<R: Rng + ?Sized>(&self, x: &[f64], noise_variance: f64, rng: &mut R) -> Result<f64> {
        if !(noise_variance >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise variance {noise_variance} is negative"
            )));
        }
        let f = self.value(x)?;
        let z: f64 = rng.sample(StandardNormal);
        Ok(if noise_variance > 0.0 {
            f + noise_variance.sqrt() * z
        } else {
            f
        })
    }
}

pub fn observe<R: Rng + ?Sized>(obj: &Objective, x: &[f64], noise_variance: f64, rng: &mut R) -> Result<f64> {
    obj.observe(x, noise_variance, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SyntheticMethod {
    /// Exact joint draw up to `EXACT_SYNTHETIC_LIMIT` points, random features
    /// beyond.
    Auto,
    Exact,
    Rff {
        features: usize,
    },
}

pub const EXACT_SYNTHETIC_LIMIT: usize = 2000;
pub const SYNTHETIC_RFF_FEATURES: usize = 4096;

/// Draws `f ~ GP(0, k)` on a grid.
pub fn synthetic_gp<R: Rng + ?Sized>(spec: &KernelSpec, grid: &Points, rng: &mut R) -> Result<Objective> {
    synthetic_gp_with(spec, grid, SyntheticMethod::Auto, rng)
}

pub fn synthetic_gp_with<R: Rng + ?Sized>(
    spec: &KernelSpec,
    grid: &Points,
    method: SyntheticMethod,
    rng: &mut R,
) -> Result<Objective> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument(
            "synthetic objective needs a nonempty grid".into(),
        ));
    }
    let method = match method {
        SyntheticMethod::Auto if grid.len() <= EXACT_SYNTHETIC_LIMIT => SyntheticMethod::Exact,
        SyntheticMethod::Auto => SyntheticMethod::Rff {
            features: SYNTHETIC_RFF_FEATURES,
        },
        m => m,
    };
    let values = match method {
        SyntheticMethod::Exact => {
            let k = kernel_matrix(spec, grid)?;
            joint_normal_draw(&nalgebra::DVector::zeros(grid.len()), &k, rng)?
        }
        SyntheticMethod::Rff { features } => {
            let fmap = build_feature_map(spec, features, rng)?;
            let prior = GpModel::fit(spec, 0.0, Dataset::empty(grid.dim()))?;
            sample_path_rff(&prior, &fmap, rng)?.evaluate(grid)?
        }
        SyntheticMethod::Auto => unreachable!(),
    };
    Objective::synthetic(grid.clone(), values)
}

/// Loads a CSV with a header row, `d` input columns, and one output column.
pub fn load_tabular(path: &Path) -> Result<Objective> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Parse {
                path: path.into(),
                row: 0,
                message: format!("{other:?}"),
            },
        })?;
    let parse_err = |row: usize, message: String| Error::Parse {
        path: path.into(),
        row,
        message,
    };
    let width = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.len();
    if width < 2 {
        return Err(parse_err(
            1,
            format!("need at least one input and one output column, found {width}"),
        ));
    }
    let dim = width - 1;
    let mut grid = Points::empty(dim);
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let row = e.position().map_or(0, |p| p.line() as usize);
            parse_err(row, e.to_string())
        })?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        let nums = record
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(row, format!("column {}: {cell:?} is not a finite number", c + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        grid.push(&nums[..dim])?;
        values.push(nums[dim]);
    }
    if values.is_empty() {
        return Err(parse_err(1, "no data rows".into()));
    }
    if let Err(i) = grid_lookup(&grid) {
        return Err(parse_err(i + 2, "duplicated input row".into()));
    }
    Objective::tabular(grid, values)
}

/// Writes a grid objective in the format read by [`load_tabular`].
pub fn write_tabular(obj: &Objective, path: &Path) -> Result<()> {
    let (grid, values) = obj
        .grid()
        .ok_or_else(|| Error::InvalidArgument("only grid objectives can be written as tables".into()))?;
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut header: Vec<String> = (1..=grid.dim()).map(|i| format!("x{i}")).collect();
    header.push("y".into());
    let io = |e: csv::Error| Error::InvalidArgument(e.to_string());
    w.write_record(&header).map_err(io)?;
    for (x, y) in grid.rows().zip(values) {
        let mut rec: Vec<String> = x.iter().map(|v| format!("{v:?}")).collect();
        rec.push(format!("{y:?}"));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
