//! Direct optimization of free point positions with Adam.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::adam::Adam;
use crate::camera::PointCloud;
use crate::loss::{evaluate_points, LossConfig, View};
use crate::{io, Error, Result, Vec3};

/// Initial point placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Init {
    UniformCube { half_extent: f64 },
    Gaussian { stddev: f64 },
    /// PLY or XYZ file; must hold exactly J points.
    FromFile { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub init: Init,
    pub log_every: usize,
    pub loss: LossConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            steps: 5000,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            init: Init::UniformCube { half_extent: 0.5 },
            log_every: 50,
            loss: LossConfig::default(),
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if self.log_every == 0 {
            return Err(Error::invalid("log_every must be >= 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be > 0"));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(Error::invalid("Adam betas must lie in [0, 1)"));
        }
        match &self.init {
            Init::UniformCube { half_extent } if !(*half_extent > 0.0) => {
                Err(Error::invalid("cube half extent must be > 0"))
            }
            Init::Gaussian { stddev } if !(*stddev > 0.0) => {
                Err(Error::invalid("init stddev must be > 0"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub total: f64,
    pub unary: f64,
    pub pairwise: f64,
    pub fg_fraction: f64,
    /// Wall time since the start of the run, in milliseconds.
    pub ms: f64,
}

/// Loss records at step 0, every `log_every` steps and the final step.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    pub records: Vec<TraceRecord>,
}

impl FitTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,total,unary,pairwise,fg_fraction,ms\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{:.3}\n",
                r.step, r.total, r.unary, r.pairwise, r.fg_fraction, r.ms
            ));
        }
        out
    }
}

/// Optimizer state sufficient to continue a run exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: FitConfig,
    pub step: u64,
    pub positions: Vec<f64>,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

const CKPT_MAGIC: &[u8; 8] = b"DRWRCKPT";
const CKPT_VERSION: u32 = 1;

impl Checkpoint {
    pub fn point_count(&self) -> usize {
        self.positions.len() / 3
    }

    pub fn cloud(&self) -> Result<PointCloud> {
        PointCloud::from_flat(&self.positions)
    }

    /// `DRWRCKPT`, u32 version, u64 J, u64 step, 3J f64 positions, 3J f64
    /// first moments, 3J f64 second moments, u32 length + config JSON. All
    /// little-endian.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let json = serde_json::to_vec(&self.config)?;
        let j = self.point_count();
        let mut out = Vec::with_capacity(32 + 72 * j + json.len());
        out.extend_from_slice(CKPT_MAGIC);
        out.extend_from_slice(&CKPT_VERSION.to_le_bytes());
        out.extend_from_slice(&(j as u64).to_le_bytes());
        out.extend_from_slice(&self.step.to_le_bytes());
        for block in [&self.positions, &self.m, &self.v] {
            for x in block.iter() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let corrupt = |msg: &str| Error::CorruptCheckpoint(msg.to_string());
        let mut r = ByteReader { bytes, pos: 0 };
        if r.take(8).ok_or_else(|| corrupt("truncated header"))? != CKPT_MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = r.u32().ok_or_else(|| corrupt("truncated header"))?;
        if version != CKPT_VERSION {
            return Err(corrupt(&format!("unsupported version {version}")));
        }
        let j = r.u64().ok_or_else(|| corrupt("truncated header"))? as usize;
        let step = r.u64().ok_or_else(|| corrupt("truncated header"))?;
        let n = j.checked_mul(3).ok_or_else(|| corrupt("point count overflow"))?;
        let mut blocks = Vec::with_capacity(3);
        for _ in 0..3 {
            let mut block = Vec::with_capacity(n.min(1 << 24));
            for _ in 0..n {
                block.push(r.f64().ok_or_else(|| corrupt("truncated payload"))?);
            }
            blocks.push(block);
        }
        let len = r.u32().ok_or_else(|| corrupt("truncated config"))? as usize;
        let json = r.take(len).ok_or_else(|| corrupt("truncated config"))?;
        if r.pos != bytes.len() {
            return Err(corrupt("trailing bytes"));
        }
        let config: FitConfig =
            serde_json::from_slice(json).map_err(|e| corrupt(&format!("config: {e}")))?;
        let v = blocks.pop().unwrap();
        let m = blocks.pop().unwrap();
        let positions = blocks.pop().unwrap();
        if j == 0 {
            return Err(corrupt("empty cloud"));
        }
        Ok(Self {
            config,
            step,
            positions,
            m,
            v,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let out = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(out)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }

    fn f64(&mut self) -> Option<f64> {
        self.take(8).map(|b| f64::from_le_bytes(b.try_into().unwrap()))
    }
}

/// Result of a fit or resume.
#[derive(Debug, Clone)]
pub struct Fit {
    pub cloud: PointCloud,
    pub trace: FitTrace,
    pub checkpoint: Checkpoint,
}

/// Draws the initial cloud for `cfg.init`.
pub fn initial_cloud(count: usize, cfg: &FitConfig) -> Result<PointCloud> {
    if count == 0 {
        return Err(Error::EmptyCloud);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    match &cfg.init {
        Init::UniformCube { half_extent } => {
            let h = *half_extent;
            PointCloud::new(
                (0..count)
                    .map(|_| {
                        Vec3::new(
                            rng.random_range(-h..h),
                            rng.random_range(-h..h),
                            rng.random_range(-h..h),
                        )
                    })
                    .collect(),
            )
        }
        Init::Gaussian { stddev } => {
            let normal =
                Normal::new(0.0, *stddev).map_err(|e| Error::invalid(format!("init: {e}")))?;
            PointCloud::new(
                (0..count)
                    .map(|_| {
                        Vec3::new(
                            normal.sample(&mut rng),
                            normal.sample(&mut rng),
                            normal.sample(&mut rng),
                        )
                    })
                    .collect(),
            )
        }
        Init::FromFile { path } => {
            let cloud = io::read_cloud(path)?;
            if cloud.len() != count {
                return Err(Error::invalid(format!(
                    "init file has {} points, expected {count}",
                    cloud.len()
                )));
            }
            Ok(cloud)
        }
    }
}

/// Fits `count` points to the views from a fresh initialization.
pub fn fit(views: &[View], count: usize, cfg: &FitConfig) -> Result<Fit> {
    cfg.validate()?;
    if views.is_empty() {
        return Err(Error::EmptyViews);
    }
    let init = initial_cloud(count, cfg)?;
    fit_from(views, init, cfg)
}

/// Fits starting from the given cloud instead of `cfg.init`.
pub fn fit_from(views: &[View], init: PointCloud, cfg: &FitConfig) -> Result<Fit> {
    cfg.validate()?;
    let mut params = init.to_flat();
    let mut adam = Adam::new(
        params.len(),
        cfg.learning_rate,
        cfg.adam_beta1,
        cfg.adam_beta2,
        cfg.adam_eps,
    );
    let trace = run(views, cfg, &mut params, &mut adam, 0, cfg.steps, true)?;
    finish(cfg, params, adam, trace)
}

/// Continues a checkpointed run for `additional_steps` more updates. The
/// result matches an uninterrupted run of the same total length bit for bit.
pub fn resume(views: &[View], checkpoint: &Checkpoint, additional_steps: usize) -> Result<Fit> {
    let cfg = &checkpoint.config;
    cfg.validate()?;
    let n = checkpoint.positions.len();
    if n == 0 || n % 3 != 0 || checkpoint.m.len() != n || checkpoint.v.len() != n {
        return Err(Error::CorruptCheckpoint("inconsistent state sizes".into()));
    }
    let mut params = checkpoint.positions.clone();
    let mut adam = Adam {
        lr: cfg.learning_rate,
        beta1: cfg.adam_beta1,
        beta2: cfg.adam_beta2,
        eps: cfg.adam_eps,
        step: checkpoint.step,
        m: checkpoint.m.clone(),
        v: checkpoint.v.clone(),
    };
    let start = checkpoint.step as usize;
    let trace = run(
        views,
        cfg,
        &mut params,
        &mut adam,
        start,
        start + additional_steps,
        false,
    )?;
    let mut out_cfg = cfg.clone();
    out_cfg.steps = start + additional_steps;
    finish(&out_cfg, params, adam, trace)
}

fn finish(cfg: &FitConfig, params: Vec<f64>, adam: Adam, trace: FitTrace) -> Result<Fit> {
    let cloud = PointCloud::from_flat(&params)?;
    Ok(Fit {
        cloud,
        trace,
        checkpoint: Checkpoint {
            config: cfg.clone(),
            step: adam.step,
            positions: params,
            m: adam.m,
            v: adam.v,
        },
    })
}

fn to_points(params: &[f64]) -> Vec<Vec3> {
    params
        .chunks_exact(3)
        .map(|c| Vec3::new(c[0], c[1], c[2]))
        .collect()
}

/// Evaluates and updates from step `start` to `end`. The loss at step `s` is
/// measured after `s` updates.
fn run(
    views: &[View],
    cfg: &FitConfig,
    params: &mut [f64],
    adam: &mut Adam,
    start: usize,
    end: usize,
    record_start: bool,
) -> Result<FitTrace> {
    let clock = Instant::now();
    let mut trace = FitTrace::default();
    let mut flat_grad = vec![0.0; params.len()];
    for step in start..=end {
        let points = to_points(params);
        let report = evaluate_points(&points, views, &cfg.loss)?;
        let record = TraceRecord {
            step,
            total: report.total,
            unary: report.unary_sum,
            pairwise: report.pairwise_sum,
            fg_fraction: report.in_foreground_fraction,
            ms: clock.elapsed().as_secs_f64() * 1e3,
        };
        let finite = report.total.is_finite()
            && report
                .per_point_grad
                .iter()
                .all(|g| g.iter().all(|v| v.is_finite()));
        if !finite {
            trace.records.push(record);
            return Err(Error::NonFiniteLoss {
                step,
                trace: Box::new(trace),
            });
        }
        if (step % cfg.log_every == 0 || step == end) && (record_start || step != start) {
            trace.records.push(record);
        }
        if step == end {
            break;
        }
        for (dst, g) in flat_grad.chunks_exact_mut(3).zip(&report.per_point_grad) {
            dst.copy_from_slice(g.as_slice());
        }
        adam.update(params, &flat_grad);
    }
    Ok(trace)
}
