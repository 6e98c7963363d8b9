//! Gaussian-random-field sources and source/flux training datasets.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{AngularQuadrature, Boundary, GroupMaterial, SolverConfig, SourceField};
use crate::error::{invalid, Error, Result};
use crate::io::{sha256_hex, Decoder, Encoder};
use crate::operator::ReferenceParams;
use crate::transport::source_iteration;
use crate::Grid1D;

/// Generator used for every GRF draw; recorded in dataset provenance.
pub const RNG_NAME: &str = "ChaCha20 (rand_chacha 0.9, seed_from_u64)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// `σ² exp(−r² / (2ℓ²))`
    #[default]
    SquaredExponential,
    /// `σ² exp(−r / ℓ)`
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrfSpec {
    pub mean: f64,
    pub variance: f64,
    pub length_scale_cm: f64,
    /// Diagonal regularisation, relative to `variance`.
    pub jitter: f64,
    pub seed: u64,
    pub kernel: Kernel,
}

impl Default for GrfSpec {
    fn default() -> Self {
        Self {
            mean: 0.07,
            variance: 3e-4,
            length_scale_cm: 1.2,
            jitter: 1e-10,
            seed: 0,
            kernel: Kernel::SquaredExponential,
        }
    }
}

impl GrfSpec {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.variance > 0.0) || !(self.length_scale_cm > 0.0) {
            return Err(invalid("GRF variance and length scale must be positive"));
        }
        if !(self.jitter > 0.0) || !self.mean.is_finite() {
            return Err(invalid("GRF jitter must be positive and mean finite"));
        }
        Ok(())
    }

    fn covariance(&self, r: f64) -> f64 {
        match self.kernel {
            Kernel::SquaredExponential => {
                self.variance * (-(r * r) / (2.0 * self.length_scale_cm * self.length_scale_cm)).exp()
            }
            Kernel::Exponential => self.variance * (-r.abs() / self.length_scale_cm).exp(),
        }
    }
}

const MAX_JITTER: f64 = 1e-6;

/// Multivariate-normal sampler on cell centers with a cached Cholesky factor.
#[derive(Debug, Clone)]
pub struct GrfSampler {
    mean: f64,
    n: usize,
    /// Row-major lower triangle of `C + jitter·σ²·I`.
    factor: Vec<f64>,
    jitter_used: f64,
}

impl GrfSampler {
    pub fn new(spec: &GrfSpec, grid: &Grid1D) -> Result<Self> {
        spec.validate()?;
        let n = grid.n_cells();
        if n < 2 {
            return Err(invalid("GRF sampling needs at least two cells"));
        }
        let x = grid.centers();
        let mut cov = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                cov[i * n + j] = spec.covariance(x[i] - x[j]);
            }
        }
        let mut jitter = spec.jitter;
        loop {
            let mut a = cov.clone();
            for i in 0..n {
                a[i * n + i] += jitter * spec.variance;
            }
            if cholesky_in_place(&mut a, n) {
                return Ok(Self {
                    mean: spec.mean,
                    n,
                    factor: a,
                    jitter_used: jitter,
                });
            }
            jitter *= 10.0;
            if jitter > MAX_JITTER * (1.0 + 1e-9) {
                return Err(Error::Numerical(
                    "GRF covariance factorization failed at maximum jitter".into(),
                ));
            }
        }
    }

    /// Relative jitter that made the factorization succeed.
    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    pub fn sample(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let z: Vec<f64> = (0..self.n).map(|_| StandardNormal.sample(&mut rng)).collect();
        (0..self.n)
            .map(|i| {
                let row = &self.factor[i * self.n..i * self.n + i + 1];
                self.mean + row.iter().zip(&z).map(|(l, z)| l * z).sum::<f64>()
            })
            .collect()
    }
}

fn cholesky_in_place(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
        for k in j + 1..n {
            a[j * n + k] = 0.0;
        }
    }
    true
}

/// One GRF draw on the cell centers, seeded by `spec.seed`.
pub fn sample_grf(spec: &GrfSpec, grid: &Grid1D) -> Result<Vec<f64>> {
    Ok(GrfSampler::new(spec, grid)?.sample(spec.seed))
}

/// Scales a raw field to unit integral. Negative values are kept.
pub fn normalize_source(raw: &[f64], grid: &Grid1D) -> Result<SourceField> {
    grid.check_len("raw field", raw.len())?;
    let total = crate::integrate_cellwise(raw, grid)?;
    if !(total > 0.0) {
        return Err(invalid(format!("source integral must be positive, got {total}")));
    }
    SourceField::single_group(raw.to_vec())?.normalized(grid)
}

/// Where a dataset came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetProvenance {
    pub length_cm: f64,
    pub n_cells: usize,
    pub quadrature_order: usize,
    pub tolerance: f64,
    pub grf: GrfSpec,
    pub rng: String,
}

/// Per-dataset statistics that are not needed to train.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub raw_mean: f64,
    pub negative_points: usize,
    pub total_points: usize,
    pub solve_iterations: Vec<usize>,
    pub flux_mean: f64,
    pub flux_max: f64,
}

/// `n_samples` normalized GRF sources and their scalar fluxes at `reference`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingDataset {
    pub sources: Vec<Vec<f64>>,
    pub fluxes: Vec<Vec<f64>>,
    pub reference: ReferenceParams,
    pub provenance: DatasetProvenance,
    pub stats: DatasetStats,
}

/// Training targets must be tighter than this.
pub const MAX_DATASET_TOLERANCE: f64 = 1e-8;

/// Samples, normalizes and solves `n_samples` sources. Sample `k` is drawn
/// with seed `spec.seed + k` (wrapping).
pub fn generate_dataset(
    n_samples: usize,
    spec: &GrfSpec,
    grid: &Grid1D,
    quad: &AngularQuadrature,
    reference: ReferenceParams,
    tolerance: f64,
) -> Result<TrainingDataset> {
    if n_samples == 0 {
        return Err(invalid("dataset needs at least one sample"));
    }
    if !(tolerance > 0.0 && tolerance <= MAX_DATASET_TOLERANCE) {
        return Err(invalid(format!(
            "dataset tolerance must lie in (0, {MAX_DATASET_TOLERANCE}], got {tolerance}"
        )));
    }
    let sampler = GrfSampler::new(spec, grid)?;
    let n = grid.n_cells();
    let sigma_t = vec![reference.sigma_t; n];
    let sigma_s0 = vec![reference.sigma_s0; n];
    let zeros = vec![0.0; n];
    let material = GroupMaterial {
        sigma_t: &sigma_t,
        sigma_s0: &sigma_s0,
        sigma_s1: &zeros,
    };
    let config = SolverConfig {
        tolerance,
        max_inner_iterations: 100_000,
        ..SolverConfig::default().with_boundaries(Boundary::Vacuum)
    };

    let mut stats = DatasetStats::default();
    let mut sources = Vec::with_capacity(n_samples);
    let mut fluxes = Vec::with_capacity(n_samples);
    let mut raw_sum = 0.0;
    for index in 0..n_samples {
        let raw = sampler.sample(spec.seed.wrapping_add(index as u64));
        stats.negative_points += raw.iter().filter(|&&v| v < 0.0).count();
        raw_sum += raw.iter().sum::<f64>();
        let source = normalize_source(&raw, grid).map_err(|e| Error::InvalidSample {
            index,
            reason: e.to_string(),
        })?;
        let q = source.group(0).to_vec();
        let sol = source_iteration(grid, quad, material, &q, &config, None)?;
        if !sol.converged {
            return Err(Error::SampleNotConverged { index });
        }
        stats.solve_iterations.push(sol.iterations);
        sources.push(q);
        fluxes.push(sol.flux.phi);
    }
    stats.total_points = n_samples * n;
    stats.raw_mean = raw_sum / stats.total_points as f64;
    stats.flux_mean = fluxes.iter().flatten().sum::<f64>() / stats.total_points as f64;
    stats.flux_max = fluxes.iter().flatten().copied().fold(f64::MIN, f64::max);

    Ok(TrainingDataset {
        sources,
        fluxes,
        reference,
        provenance: DatasetProvenance {
            length_cm: grid.length(),
            n_cells: n,
            quadrature_order: quad.order(),
            tolerance,
            grf: spec.clone(),
            rng: RNG_NAME.to_string(),
        },
        stats,
    })
}

const DATASET_MAGIC: &[u8; 8] = b"SNOPDATA";
const DATASET_VERSION: u32 = 1;

impl TrainingDataset {
    pub fn n_samples(&self) -> usize {
        self.sources.len()
    }

    pub fn n_cells(&self) -> usize {
        self.provenance.n_cells
    }

    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::new(self.provenance.length_cm, self.provenance.n_cells)
    }

    /// Binary layout, all little-endian: magic, version, sample and cell
    /// counts, grid length, quadrature order, solver tolerance, reference
    /// parameters, GRF spec, then row-major sources followed by fluxes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let p = &self.provenance;
        let mut e = Encoder::default();
        e.bytes(DATASET_MAGIC);
        e.u32(DATASET_VERSION);
        e.u64(self.n_samples() as u64);
        e.u64(p.n_cells as u64);
        e.f64(p.length_cm);
        e.u32(p.quadrature_order as u32);
        e.f64(p.tolerance);
        e.f64(self.reference.sigma_t);
        e.f64(self.reference.sigma_s0);
        e.f64(p.grf.mean);
        e.f64(p.grf.variance);
        e.f64(p.grf.length_scale_cm);
        e.f64(p.grf.jitter);
        e.u64(p.grf.seed);
        e.u8(match p.grf.kernel {
            Kernel::SquaredExponential => 0,
            Kernel::Exponential => 1,
        });
        for row in &self.sources {
            e.f64s(row);
        }
        for row in &self.fluxes {
            e.f64s(row);
        }
        e.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut d = Decoder::new(bytes);
        if d.take(8)? != DATASET_MAGIC {
            return Err(Error::Format("not a dataset file".into()));
        }
        let version = d.u32()?;
        if version != DATASET_VERSION {
            return Err(Error::Version {
                found: version,
                expected: DATASET_VERSION,
            });
        }
        let n_samples = d.usize()?;
        let n_cells = d.usize()?;
        let length_cm = d.f64()?;
        let quadrature_order = d.u32()? as usize;
        let tolerance = d.f64()?;
        let reference = ReferenceParams {
            sigma_t: d.f64()?,
            sigma_s0: d.f64()?,
        };
        let grf = GrfSpec {
            mean: d.f64()?,
            variance: d.f64()?,
            length_scale_cm: d.f64()?,
            jitter: d.f64()?,
            seed: d.u64()?,
            kernel: match d.u8()? {
                0 => Kernel::SquaredExponential,
                1 => Kernel::Exponential,
                k => return Err(Error::Format(format!("unknown kernel tag {k}"))),
            },
        };
        let read_rows = |d: &mut Decoder| -> Result<Vec<Vec<f64>>> {
            (0..n_samples).map(|_| d.f64s(n_cells)).collect()
        };
        let sources = read_rows(&mut d)?;
        let fluxes = read_rows(&mut d)?;
        d.expect_end()?;
        Ok(Self {
            sources,
            fluxes,
            reference,
            provenance: DatasetProvenance {
                length_cm,
                n_cells,
                quadrature_order,
                tolerance,
                grf,
                rng: RNG_NAME.to_string(),
            },
            stats: DatasetStats::default(),
        })
    }

    /// Writes the binary file and a JSON manifest next to it (`<path>.json`).
    /// Returns the manifest path.
    pub fn save(&self, path: &Path) -> Result<PathBuf> {
        let bytes = self.to_bytes();
        fs::write(path, &bytes)?;
        let manifest = DatasetManifest {
            format_version: DATASET_VERSION,
            n_samples: self.n_samples(),
            reference: self.reference,
            provenance: self.provenance.clone(),
            stats: self.stats.clone(),
            sha256: sha256_hex(&bytes),
        };
        let manifest_path = manifest_path(path);
        fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(manifest_path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Human-readable companion of a dataset file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub n_samples: usize,
    pub reference: ReferenceParams,
    pub provenance: DatasetProvenance,
    pub stats: DatasetStats,
    pub sha256: String,
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}
