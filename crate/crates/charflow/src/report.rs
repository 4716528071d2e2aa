//! Report construction and emission.
//!
//! `run_job` dispatches a validated `JobConfig` to the matching engine
//! and returns a `Report`; `emit_report` writes `report.json` plus the
//! mode-specific CSV tables. Reports are byte-identical for identical
//! inputs: key order is fixed by the struct layout, floats use the
//! shortest round-trip encoding, and wall-clock timings are deliberately
//! kept out of `report.json` (the CLI writes them to a separate sidecar
//! file).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::chain::{self, Verdict};
use crate::config::{JobConfig, Mode};
use crate::error::{Error, Result};
use crate::field::PolyVectorField;
use crate::glaeser::{self, Metric, PointCloud};
use crate::parser::parse_field_system;
use crate::poly::Poly;
use crate::smooth::{parse_smooth_expr, parse_smooth_field, SmoothExpr, SmoothVectorField};
use crate::torus::{self, TorusGrid};

#[derive(Debug, Clone, Serialize)]
pub struct VerdictJson {
    pub tag: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainRowJson {
    pub k: usize,
    pub generator_count: usize,
    pub status: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumRow {
    pub resolution: usize,
    pub index: usize,
    pub eigenvalue: f64,
    pub localization: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GlaeserStepJson {
    pub k: usize,
    pub size: usize,
    pub characteristic_count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct AmanoJson {
    pub holds: Option<bool>,
    pub comparison: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub config: JobConfig,
    pub verdict: VerdictJson,
    pub chain: Vec<ChainRowJson>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub spectrum: Vec<SpectrumRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub scaling: Vec<torus::ScalingRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub concentration: Vec<torus::ConcentrationRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub glaeser: Vec<GlaeserStepJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amano: Option<AmanoJson>,
    /// wall-clock timings live in a sidecar so report.json is
    /// deterministic; this key is kept for schema stability
    pub timings: BTreeMap<String, f64>,
    /// per-step classified-cloud CSV bodies (written by emit_report)
    #[serde(skip)]
    pub glaeser_csvs: Vec<String>,
}

impl Report {
    fn empty(config: &JobConfig, reason: &str) -> Report {
        Report {
            config: config.clone(),
            verdict: VerdictJson {
                tag: "unknown".into(),
                certificate: None,
                reason: Some(reason.to_string()),
            },
            chain: Vec::new(),
            warnings: Vec::new(),
            spectrum: Vec::new(),
            scaling: Vec::new(),
            concentration: Vec::new(),
            glaeser: Vec::new(),
            amano: None,
            timings: BTreeMap::new(),
            glaeser_csvs: Vec::new(),
        }
    }
}

fn field_system_source(cfg: &JobConfig) -> String {
    let mut src = format!("vars {};\n", cfg.variables.join(", "));
    for f in &cfg.fields {
        src.push_str(&format!("field {f};\n"));
    }
    src
}

/// Parse a single polynomial expression in the configured variables.
pub fn parse_poly_expr(expr: &str, variables: &[String]) -> Result<Poly> {
    let zeros: Vec<&str> = std::iter::repeat("0").take(variables.len() - 1).collect();
    let mut src = format!("vars {};\nfield {expr}", variables.join(", "));
    if !zeros.is_empty() {
        src.push_str(", ");
        src.push_str(&zeros.join(", "));
    }
    src.push(';');
    let sys = parse_field_system(&src)?;
    Ok(sys.fields[0].coeffs()[0].clone())
}

fn smooth_fields(cfg: &JobConfig) -> Result<Vec<SmoothVectorField>> {
    cfg.fields
        .iter()
        .map(|f| parse_smooth_field(f, &cfg.variables))
        .collect()
}

fn density_expr(cfg: &JobConfig) -> Result<Option<SmoothExpr>> {
    cfg.density
        .as_deref()
        .map(|d| parse_smooth_expr(d, &cfg.variables))
        .transpose()
}

/// Union of the (grid-resolved) zero sets of the given expressions.
fn zero_set_mask(grid: &TorusGrid, exprs: &[String], vars: &[String]) -> Result<Vec<bool>> {
    let parsed: Vec<SmoothExpr> = exprs
        .iter()
        .map(|e| parse_smooth_expr(e, vars))
        .collect::<Result<_>>()?;
    let mut mask = vec![false; grid.total];
    for p in 0..grid.total {
        let x = grid.coords(p);
        for e in &parsed {
            if e.eval(&x)?.abs() < 1e-9 {
                mask[p] = true;
                break;
            }
        }
    }
    Ok(mask)
}

fn verdict_json(v: &Verdict) -> VerdictJson {
    match v {
        Verdict::Precompact { certified_step } => VerdictJson {
            tag: v.tag().into(),
            certificate: Some(format!(
                "chain step {certified_step}: ideal certified empty (contains 1)"
            )),
            reason: None,
        },
        Verdict::NotPrecompact { witness } => VerdictJson {
            tag: v.tag().into(),
            certificate: Some(format!(
                "characteristic submanifold witness at {:?}, jacobian rank {}",
                witness.point, witness.jacobian_rank
            )),
            reason: None,
        },
        Verdict::Unknown { reason } => VerdictJson {
            tag: v.tag().into(),
            certificate: None,
            reason: Some(reason.clone()),
        },
    }
}

fn run_analyze(cfg: &JobConfig) -> Result<Report> {
    let sys = parse_field_system(&field_system_source(cfg))?;
    if sys.dim() != cfg.dimension {
        return Err(Error::Config(format!(
            "dimension: declared {} but parsed {} variables",
            cfg.dimension,
            sys.dim()
        )));
    }
    let bx = cfg.search_box.to_search_box();
    let (chain_report, _witness, verdict) = chain::analyze(&sys, cfg.step_s, &bx, cfg.budget)?;
    let mut report = Report::empty(cfg, "");
    report.verdict = verdict_json(&verdict);
    report.chain = chain_report
        .steps
        .iter()
        .map(|st| ChainRowJson {
            k: st.k,
            generator_count: st.generator_count,
            status: st.status.tag().to_string(),
        })
        .collect();
    for st in &chain_report.steps {
        if st.status.tag() == "unknown" {
            report
                .warnings
                .push(format!("chain step {}: real emptiness undecided", st.k));
        }
    }
    Ok(report)
}

fn run_spectrum(cfg: &JobConfig) -> Result<Report> {
    let fields = smooth_fields(cfg)?;
    let density = density_expr(cfg)?;
    let mut report = Report::empty(
        cfg,
        "spectral probe reports trends only; it does not decide precompactness",
    );
    report.warnings.push(
        "heuristic: eigenvalue behavior under refinement is an indicator, not a proof".into(),
    );
    for n_points in cfg.resolutions() {
        let grid = TorusGrid::new(cfg.dimension, n_points)?;
        let op = torus::assemble_operator(&fields, &grid, density.as_ref())?;
        let entry = torus::smallest_eigs(&op, cfg.grid.m_eigs, cfg.seed)?;
        let loc = if cfg.marked_exprs.is_empty() {
            vec![0.0; entry.eigenvalues.len()]
        } else {
            let marked = zero_set_mask(&grid, &cfg.marked_exprs, &cfg.variables)?;
            let delta = cfg.delta_loc.unwrap_or(4.0 * grid.h);
            torus::localization_fractions(&grid, &op, &entry, &marked, delta)
        };
        for (i, (&ev, &l)) in entry.eigenvalues.iter().zip(&loc).enumerate() {
            report.spectrum.push(SpectrumRow {
                resolution: n_points,
                index: i,
                eigenvalue: ev,
                localization: l,
            });
        }
    }
    Ok(report)
}

fn run_weierstrass(cfg: &JobConfig) -> Result<Report> {
    let fields = smooth_fields(cfg)?;
    let density = density_expr(cfg)?;
    let grid = TorusGrid::new(cfg.dimension, cfg.grid.n_points)?;
    let rows =
        torus::weierstrass_scaling_test(&fields, &cfg.slice_axes, &grid, &cfg.t_values, density.as_ref())?;
    let mut report = Report::empty(cfg, "scaling experiment reports energy trends only");
    report.scaling = rows;
    Ok(report)
}

fn run_concentration(cfg: &JobConfig) -> Result<Report> {
    let fields = smooth_fields(cfg)?;
    let density = density_expr(cfg)?;
    let grid = TorusGrid::new(cfg.dimension, cfg.grid.n_points)?;
    let a_mask = zero_set_mask(&grid, &cfg.a_exprs, &cfg.variables)?;
    let v_mask = match &cfg.v_expr {
        None => vec![true; grid.total],
        Some(expr) => {
            let e = parse_smooth_expr(expr, &cfg.variables)?;
            let mut m = vec![false; grid.total];
            for p in 0..grid.total {
                m[p] = e.eval(&grid.coords(p))? > 0.0 || a_mask[p];
            }
            m
        }
    };
    let rows = torus::concentration_test(
        &fields,
        &grid,
        &a_mask,
        &v_mask,
        &cfg.eps_values,
        cfg.probes,
        cfg.seed,
        density.as_ref(),
    )?;
    let mut report = Report::empty(cfg, "concentration experiment estimates C(eps) only");
    report.concentration = rows;
    Ok(report)
}

fn run_glaeser(cfg: &JobConfig) -> Result<Report> {
    let (points, scale, metric) = if let Some(path) = &cfg.cloud_csv {
        let text = std::fs::read_to_string(path)?;
        let points = glaeser::read_cloud_csv(&text)?;
        let scale = estimate_pitch(&points);
        (points, scale, Metric::Euclidean)
    } else {
        let grid = TorusGrid::new(cfg.dimension, cfg.grid.n_points)?;
        let mask = zero_set_mask(&grid, &cfg.cloud_exprs, &cfg.variables)?;
        let points: Vec<Vec<f64>> = (0..grid.total)
            .filter(|&p| mask[p])
            .map(|p| grid.coords(p))
            .collect();
        (points, grid.h, Metric::Torus)
    };
    let cloud = if points.is_empty() {
        PointCloud {
            points,
            scale,
            metric,
            dim: cfg.dimension,
        }
    } else {
        PointCloud::new(points, scale, metric)?
    };

    let mut report = Report::empty(cfg, "point-cloud chain is a numeric estimate");
    report.warnings.push(
        "heuristic: over-iterating the closure/linearization step can inflate fibers near singular points"
            .into(),
    );
    if cfg.fields.is_empty() {
        // tangent estimation only
        let tf = glaeser::zariski_tangent_estimate(&cloud)?;
        let step = glaeser::CharChainStep {
            points: cloud.points.clone(),
            characteristic: vec![false; cloud.len()],
            tangent_dims: tf.fibers.iter().map(|f| f.dim()).collect(),
        };
        report.glaeser.push(GlaeserStepJson {
            k: 0,
            size: step.points.len(),
            characteristic_count: 0,
        });
        report
            .glaeser_csvs
            .push(glaeser::write_classified_csv(&step, cfg.dimension));
        return Ok(report);
    }
    let fields = smooth_fields(cfg)?;
    let max_k = cfg.max_k.unwrap_or(cfg.dimension + 1);
    let steps = glaeser::numeric_char_chain(&fields, &cloud, max_k)?;
    for (k, step) in steps.iter().enumerate() {
        report.glaeser.push(GlaeserStepJson {
            k,
            size: step.points.len(),
            characteristic_count: step.characteristic.iter().filter(|&&c| c).count(),
        });
        report
            .glaeser_csvs
            .push(glaeser::write_classified_csv(step, cfg.dimension));
    }
    Ok(report)
}

fn estimate_pitch(points: &[Vec<f64>]) -> f64 {
    if points.len() < 2 {
        return 1.0;
    }
    let mut nearest: Vec<f64> = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let mut best = f64::INFINITY;
        for (j, q) in points.iter().enumerate() {
            if i == j {
                continue;
            }
            let d: f64 = p
                .iter()
                .zip(q)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            best = best.min(d);
        }
        nearest.push(best);
    }
    nearest.sort_by(|a, b| a.partial_cmp(b).unwrap());
    nearest[nearest.len() / 2]
}

fn run_amano(cfg: &JobConfig) -> Result<Report> {
    let sys = parse_field_system(&field_system_source(cfg))?;
    let phi = parse_poly_expr(cfg.phi.as_deref().unwrap(), &cfg.variables)?;
    let ys: Vec<PolyVectorField> = cfg.ys.iter().map(|&i| sys.fields[i].clone()).collect();
    let bx = cfg.search_box.to_search_box();
    let amano = chain::amano_check(&sys, &phi, &ys, cfg.step_s, &bx, cfg.budget)?;
    let mut report = Report::empty(
        cfg,
        match amano.holds {
            Some(true) => "amano condition holds (annihilator ideal certified empty)",
            Some(false) => "amano condition fails (witnessed annihilator point)",
            None => "amano condition undecided",
        },
    );
    report.amano = Some(AmanoJson {
        holds: amano.holds,
        comparison: amano.comparison,
    });
    Ok(report)
}

/// Dispatch a validated config to the matching engine. Deterministic
/// given the config (all randomness flows from `config.seed`).
pub fn run_job(cfg: &JobConfig) -> Result<Report> {
    cfg.validate()?;
    match cfg.mode {
        Mode::Analyze => run_analyze(cfg),
        Mode::Spectrum => run_spectrum(cfg),
        Mode::Weierstrass => run_weierstrass(cfg),
        Mode::Concentration => run_concentration(cfg),
        Mode::Glaeser => run_glaeser(cfg),
        Mode::Amano => run_amano(cfg),
    }
}

fn csv_f64(x: f64) -> String {
    // shortest round-trip representation; stable across runs
    format!("{x}")
}

/// Write `report.json` and the mode-specific CSV tables into `dir`.
/// Returns the paths written. Output is byte-identical for identical
/// report values.
pub fn emit_report(report: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let json_path = dir.join("report.json");
    let mut body = serde_json::to_string_pretty(report)?;
    body.push('\n');
    std::fs::write(&json_path, body)?;
    written.push(json_path);

    if !report.spectrum.is_empty() {
        let mut csv = String::from("resolution,index,eigenvalue,localization\n");
        for r in &report.spectrum {
            csv.push_str(&format!(
                "{},{},{},{}\n",
                r.resolution,
                r.index,
                csv_f64(r.eigenvalue),
                csv_f64(r.localization)
            ));
        }
        let p = dir.join("spectrum.csv");
        std::fs::write(&p, csv)?;
        written.push(p);
    }
    if !report.scaling.is_empty() {
        let mut csv = String::from("t,l2_norm_sq,energy\n");
        for r in &report.scaling {
            csv.push_str(&format!(
                "{},{},{}\n",
                csv_f64(r.t),
                csv_f64(r.l2_norm_sq),
                csv_f64(r.energy)
            ));
        }
        let p = dir.join("scaling.csv");
        std::fs::write(&p, csv)?;
        written.push(p);
    }
    if !report.concentration.is_empty() {
        let mut csv = String::from("eps,c_eps\n");
        for r in &report.concentration {
            csv.push_str(&format!("{},{}\n", csv_f64(r.eps), csv_f64(r.c_eps)));
        }
        let p = dir.join("concentration.csv");
        std::fs::write(&p, csv)?;
        written.push(p);
    }
    for (k, body) in report.glaeser_csvs.iter().enumerate() {
        let p = dir.join(format!("chain_step_{k}.csv"));
        std::fs::write(&p, body)?;
        written.push(p);
    }
    Ok(written)
}
