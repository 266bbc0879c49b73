use std::path::Path;

use anyhow::{bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use serde_json::{json, Map, Value};

use iem_core::iem::{self, BuiltinFPrime, DistanceEstimate, IntegrationConfig};
use iem_core::local_metric::{self, LocalMetric};
use iem_core::prior::{PriorConfig, PriorSpec};
use iem_core::{channel, cluster, validate};

use crate::manifest::{sha256_hex, Emitter, RunManifest};
use crate::{Command, ConfigFlags};

#[derive(clap::ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum FChoice {
    Identity,
    Square,
}

impl From<&ConfigFlags> for IntegrationConfig {
    fn from(f: &ConfigFlags) -> Self {
        IntegrationConfig {
            gamma_min: f.gamma_min,
            gamma_max: f.gamma_max,
            n_steps: f.steps,
            n_paths: f.paths,
            seed: f.seed,
        }
    }
}

fn check_config(cfg: &IntegrationConfig) -> Result<()> {
    cfg.validate().map_err(|e| {
        anyhow::anyhow!("{e} (see --gamma-min/--gamma-max/--steps/--paths)")
    })
}

fn load_prior(path: &Path) -> Result<(PriorSpec, String)> {
    let bytes =
        std::fs::read(path).with_context(|| format!("reading prior file {}", path.display()))?;
    let config: PriorConfig = serde_json::from_slice(&bytes)
        .with_context(|| format!("parsing prior file {}", path.display()))?;
    let spec = config
        .to_spec()
        .with_context(|| format!("validating prior file {}", path.display()))?;
    Ok((spec, sha256_hex(&bytes)))
}

fn parse_point(s: &str, what: &str) -> Result<DVector<f64>> {
    let vals = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<f64>, _>>()
        .with_context(|| format!("parsing {what} `{s}` as comma-separated floats"))?;
    if vals.is_empty() {
        bail!("{what} is empty");
    }
    Ok(DVector::from_vec(vals))
}

fn parse_bounds(s: &str) -> Result<(f64, f64, f64, f64)> {
    let v = parse_point(s, "--bounds")?;
    if v.len() != 4 {
        bail!("--bounds wants four values x0,x1,y0,y1, got {}", v.len());
    }
    if v[1] <= v[0] || v[3] <= v[2] {
        bail!("--bounds must satisfy x0 < x1 and y0 < y1");
    }
    Ok((v[0], v[1], v[2], v[3]))
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn estimate_json(e: &DistanceEstimate) -> Map<String, Value> {
    let mut map = Map::new();
    map.insert("value".into(), json!(e.value));
    map.insert("squared_value".into(), json!(e.squared_value));
    map.insert("stderr".into(), json!(e.stderr));
    map.insert("integrand_trace".into(), json!(e.integrand_trace));
    map
}

fn local_metric_json(m: &LocalMetric) -> Value {
    json!({
        "g": matrix_rows(&m.g),
        "x": m.x.as_slice(),
        "gamma_max": m.gamma_max,
        "eigenvalues": m.eigenvalues.as_slice(),
        "eigenvectors": matrix_rows(&m.eigenvectors),
    })
}

pub fn run(cmd: Command) -> Result<i32> {
    let emitter = Emitter::new();
    match cmd {
        Command::Dist {
            prior,
            x1,
            x2,
            config,
            f,
            prior_b,
            uncoupled,
            out,
        } => {
            let cfg = IntegrationConfig::from(&config);
            check_config(&cfg)?;
            let (spec, digest) = load_prior(&prior)?;
            let p1 = parse_point(&x1, "x1")?;
            let p2 = parse_point(&x2, "x2")?;
            let estimate = match (&prior_b, uncoupled, f) {
                (Some(_), _, FChoice::Square) => {
                    bail!("--prior-b cannot be combined with --f square")
                }
                (Some(pb), false, FChoice::Identity) => {
                    let (spec_b, _) = load_prior(pb)?;
                    iem::mismatched_iem(&spec, &spec_b, &p1, &p2, &cfg)?
                }
                (Some(_), true, _) => bail!("--prior-b cannot be combined with --uncoupled"),
                (None, true, FChoice::Identity) => {
                    iem::iem_squared_uncoupled(&spec, &p1, &p2, &cfg)?
                }
                (None, true, FChoice::Square) => {
                    bail!("--uncoupled cannot be combined with --f square")
                }
                (None, false, FChoice::Identity) => iem::iem_squared(&spec, &p1, &p2, &cfg)?,
                (None, false, FChoice::Square) => {
                    iem::iem_f(&spec, &p1, &p2, &BuiltinFPrime::Square, &cfg)?
                }
            };
            let manifest = RunManifest::new(Some(digest), Some(cfg), cfg.seed);
            emitter.emit_json_object(estimate_json(&estimate), &manifest, out.as_deref())?;
            Ok(0)
        }

        Command::Grid {
            prior,
            reference,
            bounds,
            resolution,
            config,
            out,
        } => {
            let cfg = IntegrationConfig::from(&config);
            check_config(&cfg)?;
            let (spec, digest) = load_prior(&prior)?;
            if spec.dim() != 2 {
                bail!("grid wants a 2-D prior, this one has dimension {}", spec.dim());
            }
            if resolution < 2 {
                bail!("--resolution must be >= 2");
            }
            let reference = parse_point(&reference, "--ref")?;
            if reference.len() != 2 {
                bail!("--ref must be 2-D");
            }
            let (x0, x1b, y0, y1b) = parse_bounds(&bounds)?;
            let xs = linspace(x0, x1b, resolution);
            let ys = linspace(y0, y1b, resolution);
            let mut points = Vec::with_capacity(resolution * resolution);
            for &y in &ys {
                for &x in &xs {
                    points.push(DVector::from_vec(vec![x, y]));
                }
            }
            let distances = iem::reference_distances(&spec, &reference, &points, &cfg)?;
            let mut csv = String::from("x,y,distance\n");
            for (p, d) in points.iter().zip(&distances) {
                csv.push_str(&format!("{},{},{}\n", p[0], p[1], d));
            }
            let manifest = RunManifest::new(Some(digest), Some(cfg), cfg.seed);
            emitter.emit_csv(&csv, &manifest, &out)?;
            Ok(0)
        }

        Command::Ellipses {
            prior,
            bounds,
            resolution,
            config,
            out,
        } => {
            let cfg = IntegrationConfig::from(&config);
            check_config(&cfg)?;
            let (spec, digest) = load_prior(&prior)?;
            if spec.dim() != 2 {
                bail!("ellipses wants a 2-D prior, this one has dimension {}", spec.dim());
            }
            if resolution < 2 {
                bail!("--resolution must be >= 2");
            }
            let (x0, x1b, y0, y1b) = parse_bounds(&bounds)?;
            let xs = linspace(x0, x1b, resolution);
            let ys = linspace(y0, y1b, resolution);
            let mut anchors = Vec::with_capacity(resolution * resolution);
            for &y in &ys {
                for &x in &xs {
                    anchors.push(DVector::from_vec(vec![x, y]));
                }
            }
            let field = local_metric::ellipse_field(&spec, &anchors, &cfg)?;
            let mut csv =
                String::from("x,y,axis1_x,axis1_y,axis2_x,axis2_y,radius1,radius2\n");
            for (_, e) in &field {
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    e.center[0],
                    e.center[1],
                    e.axes[(0, 0)],
                    e.axes[(1, 0)],
                    e.axes[(0, 1)],
                    e.axes[(1, 1)],
                    e.radii[0],
                    e.radii[1],
                ));
            }
            let manifest = RunManifest::new(Some(digest), Some(cfg), cfg.seed);
            emitter.emit_csv(&csv, &manifest, &out)?;
            Ok(0)
        }

        Command::Local {
            prior,
            x,
            config,
            out,
        } => {
            let cfg = IntegrationConfig::from(&config);
            check_config(&cfg)?;
            let (spec, digest) = load_prior(&prior)?;
            let anchor = parse_point(&x, "x")?;
            let hess = local_metric::metric_hessian_form(&spec, &anchor, &cfg)?;
            let cov = local_metric::metric_cov_form(&spec, &anchor, &cfg)?;
            let mut payload = Map::new();
            payload.insert("hessian_form".into(), local_metric_json(&hess));
            payload.insert("cov_form".into(), local_metric_json(&cov));
            let manifest = RunManifest::new(Some(digest), Some(cfg), cfg.seed);
            emitter.emit_json_object(payload, &manifest, out.as_deref())?;
            Ok(0)
        }

        Command::Cluster {
            prior,
            matrix,
            truth,
            k,
            n,
            max_iter,
            config,
            export_matrix,
            out,
        } => {
            let cfg = IntegrationConfig::from(&config);
            check_config(&cfg)?;
            match (prior, matrix) {
                (Some(prior_path), None) => cluster_from_prior(
                    &emitter,
                    &prior_path,
                    k,
                    n,
                    max_iter,
                    cfg,
                    export_matrix.as_deref(),
                    out.as_deref(),
                ),
                (None, Some(matrix_path)) => cluster_from_matrix(
                    &emitter,
                    &matrix_path,
                    truth.as_deref(),
                    k,
                    max_iter,
                    cfg,
                    out.as_deref(),
                ),
                _ => bail!("cluster wants exactly one of --prior or --matrix"),
            }
        }

        Command::Validate { suite, seed, out } => {
            let reports = validate::run_suite(&suite, seed)
                .map_err(|e| anyhow::anyhow!("validation suite `{suite}`: {e}"))?;
            let payload = serde_json::to_value(&reports)?;
            let manifest = RunManifest::new(None, None, seed);
            emitter.emit_json_value(&payload, &manifest, out.as_deref())?;
            let failed = reports.iter().filter(|r| !r.pass).count();
            if failed > 0 {
                eprintln!("{failed} of {} checks failed", reports.len());
                Ok(1)
            } else {
                Ok(0)
            }
        }
    }
}

fn cluster_result_json(
    r: &cluster::ClusteringResult,
    accuracy: Option<f64>,
) -> Value {
    let mut m = Map::new();
    m.insert("medoid_indices".into(), json!(r.medoid_indices));
    m.insert("assignments".into(), json!(r.assignments));
    m.insert("total_cost".into(), json!(r.total_cost));
    if let Some(a) = accuracy {
        m.insert("accuracy".into(), json!(a));
    }
    Value::Object(m)
}

#[allow(clippy::too_many_arguments)]
fn cluster_from_prior(
    emitter: &Emitter,
    prior_path: &Path,
    k: usize,
    n: usize,
    max_iter: usize,
    cfg: IntegrationConfig,
    export_matrix: Option<&Path>,
    out: Option<&Path>,
) -> Result<i32> {
    let (spec, digest) = load_prior(prior_path)?;
    let sample_seed = channel::derive_stream_seed(cfg.seed, 0x73616d70);
    let kmed_seed = channel::derive_stream_seed(cfg.seed, 0x6b6d6564);
    let (points, labels) = spec.sample_with_components(n, sample_seed)?;

    let metric_matrix = iem::distance_matrix(&spec, &points, &cfg)?;
    let euclid_matrix = iem::euclidean_matrix(&points);

    let metric_result = cluster::kmedoids(&metric_matrix, k, kmed_seed, max_iter)?;
    let euclid_result = cluster::kmedoids(&euclid_matrix, k, kmed_seed, max_iter)?;

    let manifest = RunManifest::new(Some(digest), Some(cfg), cfg.seed);
    if let Some(path) = export_matrix {
        emitter.emit_csv(&iem::matrix_to_csv(&metric_matrix), &manifest, path)?;
    }

    let accuracies = if spec.is_mixture() {
        let k_eff = k
            .max(labels.iter().copied().max().unwrap_or(0) + 1)
            .max(1);
        let acc_m = cluster::accuracy(&metric_result.assignments, &labels, k_eff)?;
        let acc_e = cluster::accuracy(&euclid_result.assignments, &labels, k_eff)?;
        Some((acc_m, acc_e))
    } else {
        None
    };

    let mut payload = Map::new();
    payload.insert("n".into(), json!(n));
    payload.insert("k".into(), json!(k));
    payload.insert(
        "iem".into(),
        cluster_result_json(&metric_result, accuracies.map(|a| a.0)),
    );
    payload.insert(
        "euclidean".into(),
        cluster_result_json(&euclid_result, accuracies.map(|a| a.1)),
    );
    if spec.is_mixture() {
        payload.insert("truth_labels".into(), json!(labels));
    }
    emitter.emit_json_object(payload, &manifest, out)?;
    Ok(0)
}

fn cluster_from_matrix(
    emitter: &Emitter,
    matrix_path: &Path,
    truth: Option<&Path>,
    k: usize,
    max_iter: usize,
    cfg: IntegrationConfig,
    out: Option<&Path>,
) -> Result<i32> {
    let bytes = std::fs::read(matrix_path)
        .with_context(|| format!("reading matrix file {}", matrix_path.display()))?;
    let text = String::from_utf8(bytes.clone()).context("matrix CSV is not UTF-8")?;
    let matrix = iem::matrix_from_csv(&text)?;
    let kmed_seed = channel::derive_stream_seed(cfg.seed, 0x6b6d6564);
    let result = cluster::kmedoids(&matrix, k, kmed_seed, max_iter)?;

    let accuracy = match truth {
        Some(path) => {
            let t = std::fs::read_to_string(path)
                .with_context(|| format!("reading truth labels {}", path.display()))?;
            let labels = t
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| l.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .context("parsing truth labels (one integer per line)")?;
            let k_eff = k.max(labels.iter().copied().max().unwrap_or(0) + 1);
            Some(cluster::accuracy(&result.assignments, &labels, k_eff)?)
        }
        None => None,
    };

    let mut payload = Map::new();
    payload.insert("k".into(), json!(k));
    payload.insert("result".into(), cluster_result_json(&result, accuracy));
    let manifest = RunManifest::new(Some(sha256_hex(&bytes)), Some(cfg), cfg.seed);
    emitter.emit_json_object(payload, &manifest, out)?;
    Ok(0)
}
