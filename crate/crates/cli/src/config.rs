//! JSON run configuration.

use std::path::PathBuf;
use std::sync::Arc;

use ccspectra::cheeger::CertificateMode;
use ccspectra::discretization::{build_grid, BoundarySegment, BoundarySpec, Condition, Grid2D};
use ccspectra::geometry::{builtin_euclidean, builtin_grushin_cylinder, CCStructure, Chart2D, Interval, VectorField};
use serde::{Deserialize, Serialize};

use crate::expr::Expr;
use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub structure: StructureConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart: Option<ChartConfig>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub boundary: BoundaryConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub cheeger: CheegerConfig,
    #[serde(default)]
    pub table: TableConfig,
    #[serde(default)]
    pub carnot: CarnotConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    0x5eed
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum StructureConfig {
    Grushin,
    Euclidean,
    /// `fields[i] = [a_i1, a_i2]`, so `X_i = a_i1 ∂x + a_i2 ∂y`.
    Custom { fields: Vec<[String; 2]>, density: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartConfig {
    pub x: [f64; 2],
    pub y: [f64; 2],
    #[serde(default)]
    pub periodic_x: bool,
    #[serde(default)]
    pub periodic_y: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { nx: 64, ny: 128 }
    }
}

/// Boundary nodes not covered by a Dirichlet segment get `default`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    #[serde(default = "neumann")]
    pub default: Condition,
    #[serde(default)]
    pub segments: Vec<BoundarySegment>,
}

fn neumann() -> Condition {
    Condition::Neumann
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        Self { default: Condition::Neumann, segments: Vec::new() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_dense_threshold")]
    pub dense_threshold: usize,
}

fn default_k() -> usize {
    6
}

fn default_tol() -> f64 {
    ccspectra::eigensolver::DEFAULT_TOL
}

fn default_dense_threshold() -> usize {
    ccspectra::eigensolver::DEFAULT_DENSE_THRESHOLD
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { k: default_k(), tol: default_tol(), dense_threshold: default_dense_threshold() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheegerConfig {
    #[serde(default = "default_levels")]
    pub levels: usize,
    /// Coefficient expressions `φ_i` of a certificate field.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<CertificateMode>,
    /// A value to test the inequality against as if it were the constant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypothetical_h: Option<f64>,
}

fn default_levels() -> usize {
    64
}

impl Default for CheegerConfig {
    fn default() -> Self {
        Self { levels: default_levels(), field: None, mode: None, hypothetical_h: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableConfig {
    #[serde(default = "two")]
    pub max_n: u32,
    #[serde(default = "two")]
    pub max_m: u32,
    #[serde(default = "neumann")]
    pub bc: Condition,
}

fn two() -> u32 {
    2
}

impl Default for TableConfig {
    fn default() -> Self {
        Self { max_n: 2, max_m: 2, bc: Condition::Neumann }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarnotConfig {
    #[serde(default = "one")]
    pub n: usize,
}

fn one() -> usize {
    1
}

impl Default for CarnotConfig {
    fn default() -> Self {
        Self { n: 1 }
    }
}

/// Validated structure, grid and boundary conditions.
pub struct Setup {
    pub structure: CCStructure,
    pub grid: Grid2D,
    pub boundary: BoundarySpec,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn compile(src: &str) -> Result<Arc<Expr>, CliError> {
    Ok(Arc::new(Expr::parse(src)?))
}

/// Compile coefficient expressions into closures.
pub fn compile_all(srcs: &[String]) -> Result<Vec<Arc<Expr>>, CliError> {
    srcs.iter().map(|s| compile(s)).collect()
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| config_err(format!("config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn chart(&self) -> Result<Option<Chart2D>, CliError> {
        let Some(c) = &self.chart else { return Ok(None) };
        let x = Interval::new(c.x[0], c.x[1]).map_err(|e| config_err(e.to_string()))?;
        let y = Interval::new(c.y[0], c.y[1]).map_err(|e| config_err(e.to_string()))?;
        Ok(Some(Chart2D::new(x, y, c.periodic_x, c.periodic_y)))
    }

    pub fn build_structure(&self) -> Result<CCStructure, CliError> {
        let chart = self.chart()?;
        match &self.structure {
            StructureConfig::Grushin => {
                if chart.is_some() {
                    return Err(config_err("the grushin structure has a fixed chart; drop `chart`"));
                }
                Ok(builtin_grushin_cylinder())
            }
            StructureConfig::Euclidean => {
                let c = chart.unwrap_or(Chart2D::rectangle((0.0, 1.0), (0.0, 1.0)).expect("unit square"));
                if c.periodic_x || c.periodic_y {
                    return Err(config_err("the euclidean structure does not support periodic axes"));
                }
                builtin_euclidean((c.x_range.lo, c.x_range.hi), (c.y_range.lo, c.y_range.hi))
                    .map_err(|e| config_err(e.to_string()))
            }
            StructureConfig::Custom { fields, density } => {
                let chart = chart.ok_or_else(|| config_err("a custom structure needs `chart`"))?;
                if fields.is_empty() {
                    return Err(config_err("a custom structure needs at least one field"));
                }
                let mut vf = Vec::with_capacity(fields.len());
                for [a1, a2] in fields {
                    let (e1, e2) = (compile(a1)?, compile(a2)?);
                    vf.push(VectorField::new(move |x, y| e1.eval(x, y), move |x, y| e2.eval(x, y)));
                }
                let rho = compile(density)?;
                CCStructure::new("custom", chart, vf, move |x, y| rho.eval(x, y)).map_err(|e| config_err(e.to_string()))
            }
        }
    }

    pub fn setup(&self) -> Result<Setup, CliError> {
        let structure = self.build_structure()?;
        let grid = build_grid(structure.chart, self.grid.nx, self.grid.ny).map_err(|e| config_err(e.to_string()))?;
        let mut boundary = match self.boundary.default {
            Condition::Neumann => BoundarySpec::all_neumann(),
            Condition::Dirichlet => BoundarySpec::all_dirichlet(&structure.chart),
        };
        boundary.segments.extend(self.boundary.segments.iter().copied());
        boundary.validate(&structure.chart).map_err(|e| config_err(e.to_string()))?;
        if self.solver.k == 0 {
            return Err(config_err("solver.k must be at least 1"));
        }
        if !(self.solver.tol > 0.0) {
            return Err(config_err("solver.tol must be positive"));
        }
        Ok(Setup { structure, grid, boundary })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_json(r#"{"structure": {"type": "grushin"}}"#).unwrap();
        assert_eq!(c.grid, GridConfig { nx: 64, ny: 128 });
        assert_eq!(c.solver.k, 6);
        assert_eq!(c.boundary.default, Condition::Neumann);
        assert_eq!(c.table.max_n, 2);
        assert!(c.setup().is_ok());
    }

    #[test]
    fn round_trip() {
        let text = r#"{
            "structure": {"type": "custom", "fields": [["1", "0"], ["0", "x"]], "density": "1"},
            "chart": {"x": [0, 1], "y": [0, 6.283185307179586], "periodic_y": true},
            "grid": {"nx": 17, "ny": 32},
            "boundary": {"default": "dirichlet",
                         "segments": [{"edge": "x_max", "from": 0.0, "to": 1.0, "condition": "neumann"}]},
            "cheeger": {"levels": 10, "field": ["x", "0"], "mode": "dirichlet"},
            "seed": 7
        }"#;
        let c = RunConfig::from_json(text).unwrap();
        let again = RunConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(c, again);
        assert!(c.setup().is_ok());
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            r#"{"structure": {"type": "grushin"}, "chart": {"x": [0, 1], "y": [0, 1]}}"#,
            r#"{"structure": {"type": "custom", "fields": [["1", "0"]], "density": "1"}}"#,
            r#"{"structure": {"type": "grushin"}, "grid": {"nx": 2, "ny": 8}}"#,
            r#"{"structure": {"type": "grushin"}, "solver": {"k": 0}}"#,
            r#"{"structure": {"type": "euclidean"}, "boundary": {"segments": [{"edge": "x_min", "from": 0, "to": 2, "condition": "dirichlet"}]}}"#,
        ];
        for text in bad {
            let c = RunConfig::from_json(text).unwrap();
            assert!(matches!(c.setup(), Err(CliError::Config(_))), "{text}");
        }
        assert!(RunConfig::from_json(r#"{"structure": {"type": "grushin"}, "colour": 1}"#).is_err());
        let c = RunConfig::from_json(
            r#"{"structure": {"type": "custom", "fields": [["1", "0"]], "density": "1 +"},
                "chart": {"x": [0, 1], "y": [0, 1]}}"#,
        )
        .unwrap();
        assert!(matches!(c.setup(), Err(CliError::Expr(_))));
    }
}
