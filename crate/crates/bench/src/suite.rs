//! Benchmark suites: each case runs the model-based baseline, then every
//! listed algorithm, and contributes one table row per run.
//!
//! ```json
//! {
//!   "parallel": false,
//!   "cases": [
//!     {"case": "eigen_3g.json", "runs": [
//!       {"algorithm": "sp", "operator": "fno.snopm", "label": "FNO-SP"}
//!     ]}
//!   ]
//! }
//! ```

use std::path::{Path, PathBuf};
use std::thread;

use serde::{Deserialize, Serialize};

use crate::case::{execute, load_operator, normalized_l2, Algorithm, CaseSpec, OperatorSource, RunOutcome};
use crate::error::Result;
use crate::output::TableRow;
use crate::paths::{read_json, Paths};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteRun {
    pub algorithm: Algorithm,
    /// Overrides the case file's operator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<OperatorSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteEntry {
    pub case: PathBuf,
    #[serde(default)]
    pub runs: Vec<SuiteRun>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSpec {
    /// Run cases concurrently, one thread per case.
    #[serde(default)]
    pub parallel: bool,
    #[serde(default)]
    pub cases: Vec<SuiteEntry>,
}

impl SuiteSpec {
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

fn row_from(case: &str, label: &str, out: &RunOutcome, baseline: &RunOutcome) -> TableRow {
    TableRow {
        case: case.into(),
        algorithm: label.into(),
        status: if out.converged { "ok".into() } else { "not_converged".into() },
        inner_iterations: Some(out.inner_iterations),
        outer_iterations: Some(out.outer_iterations),
        stage1_iterations: out.stage1.as_ref().map(|s| s.iterations),
        wall_time_s: Some(out.wall_time_s),
        normalized_time: (baseline.wall_time_s > 0.0).then(|| out.wall_time_s / baseline.wall_time_s),
        l2_vs_baseline: Some(normalized_l2(&out.flux, &baseline.flux)),
        k: out.k,
    }
}

/// Rows of one suite entry. Never fails: problems become `failed` rows.
pub fn run_entry(entry: &SuiteEntry, paths: &Paths) -> Vec<TableRow> {
    let case_path = paths.input(&entry.case);
    let fallback_name = entry.case.display().to_string();
    let spec = match CaseSpec::load(&case_path) {
        Ok(s) => s,
        Err(e) => return vec![TableRow::failed(&fallback_name, "model_based", &e.to_string())],
    };
    let case_paths = Paths {
        config_dir: case_path.parent().map(Path::to_path_buf).unwrap_or_default(),
        output_dir: paths.output_dir.clone(),
    };
    let problem = match spec.resolve() {
        Ok(p) => p,
        Err(e) => return vec![TableRow::failed(&spec.id, "model_based", &e.to_string())],
    };
    let baseline = match execute(Algorithm::ModelBased, &problem, &spec.recast, None) {
        Ok(b) => b,
        Err(e) => return vec![TableRow::failed(&spec.id, "model_based", &e.to_string())],
    };
    let mut rows = vec![row_from(&spec.id, "model_based", &baseline, &baseline)];
    for run in &entry.runs {
        let label = run.label.clone().unwrap_or_else(|| run.algorithm.to_string());
        let result = (|| -> Result<RunOutcome> {
            let op = match run.operator.as_ref().or(spec.operator.as_ref()) {
                Some(src) if run.algorithm.needs_operator() => Some(load_operator(src, &problem, &case_paths)?),
                _ => None,
            };
            execute(run.algorithm, &problem, &spec.recast, op.as_deref())
        })();
        rows.push(match result {
            Ok(out) => row_from(&spec.id, &label, &out, &baseline),
            Err(e) => TableRow::failed(&spec.id, &label, &e.to_string()),
        });
    }
    rows
}

/// Runs every entry; rows keep the suite's order in parallel mode too.
pub fn run_suite(suite: &SuiteSpec, paths: &Paths) -> Vec<TableRow> {
    if !suite.parallel {
        return suite.cases.iter().flat_map(|e| run_entry(e, paths)).collect();
    }
    thread::scope(|s| {
        let handles: Vec<_> = suite
            .cases
            .iter()
            .map(|e| s.spawn(move || run_entry(e, paths)))
            .collect();
        handles
            .into_iter()
            .zip(&suite.cases)
            .flat_map(|(h, e)| {
                h.join()
                    .unwrap_or_else(|_| vec![TableRow::failed(&e.case.display().to_string(), "-", "panicked")])
            })
            .collect()
    })
}
