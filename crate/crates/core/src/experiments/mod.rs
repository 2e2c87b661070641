//! Scenario runner: parameter sweeps behind each figure, written as CSV.

mod config;
mod output;

use std::collections::HashMap;
use std::env;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{extract_kraus, fixed_points, fixed_space_dim, iterate, IterationRecord, KrausFamily, MediatorState};
use crate::density::DensityMatrix;
use crate::error::{Result, SimError};
use crate::noise::{monte_carlo_iterate, noisy_iterate, NoiseParams};
use crate::scattering::{solve, Model, ScatterParams};
use crate::spin::{fidelity_with_singlet, SpinQuantum};

pub use config::{
    linear_grid, load_density_matrix, log_grid, InitialState, NoiseGrid, NoiseMethod, Scenario,
    ScenarioConfig,
};
pub use output::{num, records_csv, CSV_HEADER};

/// Bundled configs for the `figure` subcommand.
pub const FIGURE_CONFIGS: [(&str, &str); 4] = [
    ("2", include_str!("../../configs/fig2.json")),
    ("3b", include_str!("../../configs/fig3b.json")),
    ("4", include_str!("../../configs/fig4.json")),
    ("5", include_str!("../../configs/fig5.json")),
];

pub fn figure_config(id: &str) -> Option<&'static str> {
    FIGURE_CONFIGS.iter().find(|(k, _)| *k == id).map(|(_, v)| *v)
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub scenario: Scenario,
    pub model: Model,
    pub g: f64,
    pub q: u32,
    pub r_pol: f64,
    pub n: usize,
    pub fidelity: f64,
    pub probability: f64,
    pub mu: Option<f64>,
    pub tb_over_td: Option<f64>,
    pub stderr_fidelity: Option<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct ScenarioReport {
    pub records: Vec<RunRecord>,
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

/// Worker count from `SPINSIM_THREADS`, if set.
pub fn thread_cap() -> Result<Option<usize>> {
    match env::var("SPINSIM_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(SimError::Config(format!(
                "SPINSIM_THREADS must be a positive integer, got '{v}'"
            ))),
        },
    }
}

fn pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap()? {
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| SimError::InvalidParameter(format!("cannot start worker pool: {e}")))
}

#[derive(Clone, Copy, Debug)]
struct Point {
    model: Model,
    g: f64,
    r_pol: f64,
    noise: Option<(f64, f64)>,
}

struct Runner<'a> {
    cfg: &'a ScenarioConfig,
    rho12: DensityMatrix,
    kraus: HashMap<(Model, u64), KrausFamily>,
}

impl<'a> Runner<'a> {
    fn new(cfg: &'a ScenarioConfig, points: &[Point]) -> Result<Self> {
        let rho12 = cfg.initial_state.build(cfg.s)?;
        let mut keys: Vec<(Model, u64)> = points.iter().map(|p| (p.model, p.g.to_bits())).collect();
        keys.sort_by_key(|(m, g)| (m.name(), *g));
        keys.dedup();
        let kraus = keys
            .into_par_iter()
            .map(|(model, bits)| {
                let params = ScatterParams::resonant(model, f64::from_bits(bits), cfg.q, cfg.s)?;
                Ok(((model, bits), extract_kraus(&solve(&params)?, cfg.s)?))
            })
            .collect::<Result<HashMap<_, _>>>()?;
        Ok(Self { cfg, rho12, kraus })
    }

    fn point(&self, p: &Point) -> Result<Vec<RunRecord>> {
        let cfg = self.cfg;
        let k = &self.kraus[&(p.model, p.g.to_bits())];
        let rho_e = MediatorState::polarized(p.r_pol)?;
        let row = |rec: &IterationRecord, stderr: Option<f64>| RunRecord {
            scenario: cfg.scenario,
            model: p.model,
            g: p.g,
            q: cfg.q,
            r_pol: p.r_pol,
            n: rec.step,
            fidelity: rec.fidelity.clamp(0.0, 1.0),
            probability: rec.probability.clamp(0.0, 1.0),
            mu: p.noise.map(|(_, mu)| mu),
            tb_over_td: p.noise.map(|(tb, _)| tb),
            stderr_fidelity: stderr,
        };
        let Some((tb, mu)) = p.noise else {
            let recs = iterate(&self.rho12, &rho_e, k, cfg.n_max)?;
            return Ok(recs.iter().map(|r| row(r, None)).collect());
        };
        let grid = cfg.noise.as_ref().expect("noise point without noise grid");
        let params = NoiseParams::new(tb, mu, grid.trajectories, cfg.seed)?;
        match grid.method {
            NoiseMethod::Exact => {
                let recs = noisy_iterate(&self.rho12, &rho_e, k, cfg.n_max, &params)?;
                Ok(recs.iter().map(|r| row(r, None)).collect())
            }
            NoiseMethod::MonteCarlo => {
                let run = monte_carlo_iterate(&self.rho12, &rho_e, k, cfg.n_max, &params)?;
                Ok(run
                    .records
                    .iter()
                    .zip(&run.stderr_fidelity)
                    .map(|(r, se)| row(r, Some(*se)))
                    .collect())
            }
        }
    }
}

fn grid_points(cfg: &ScenarioConfig, model: Model, g_scale: f64) -> Vec<Point> {
    let mut points = Vec::new();
    for &g in &cfg.g_grid {
        for &r_pol in &cfg.r_pol_grid {
            match &cfg.noise {
                None => points.push(Point {
                    model,
                    g: g * g_scale,
                    r_pol,
                    noise: None,
                }),
                Some(noise) => {
                    for &mu in &noise.mu {
                        for &tb in &noise.tb_over_td {
                            points.push(Point {
                                model,
                                g: g * g_scale,
                                r_pol,
                                noise: Some((tb, mu)),
                            });
                        }
                    }
                }
            }
        }
    }
    points
}

fn run_points(cfg: &ScenarioConfig, points: &[Point]) -> Result<Vec<RunRecord>> {
    let runner = Runner::new(cfg, points)?;
    let rows: Vec<Vec<RunRecord>> = points
        .par_iter()
        .map(|p| runner.point(p))
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Runs the scenario in memory without writing anything.
pub fn compute(cfg: &ScenarioConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    pool()?.install(|| match cfg.scenario {
        Scenario::Fig3b => {
            let mut records = run_points(cfg, &grid_points(cfg, Model::Exchange, 1.0))?;
            records.extend(run_points(cfg, &grid_points(cfg, Model::Raman, cfg.raman_scale))?);
            records.retain(|r| matches!(r.n, 1 | 3 | 5));
            Ok(records)
        }
        Scenario::FixedPoint => Ok(Vec::new()),
        _ => run_points(cfg, &grid_points(cfg, cfg.model, 1.0)),
    })
}

/// Percentage differences `100 |X_ex - X_R| / X_ex` for fig3b, keyed by the
/// exchange coupling. Returns `(g, r_pol, n, dF, dP)`.
pub fn model_differences(
    cfg: &ScenarioConfig,
    records: &[RunRecord],
) -> Vec<(f64, f64, usize, f64, f64)> {
    let (ex, ra): (Vec<_>, Vec<_>) = records.iter().partition(|r| r.model == Model::Exchange);
    ex.iter()
        .zip(&ra)
        .map(|(a, b)| {
            debug_assert_eq!(a.n, b.n);
            debug_assert!((a.g * cfg.raman_scale - b.g).abs() <= 1e-12 * b.g.max(1.0));
            let pct = |x: f64, y: f64| 100.0 * (x - y).abs() / x;
            (
                a.g,
                a.r_pol,
                a.n,
                pct(a.fidelity, b.fidelity),
                pct(a.probability, b.probability),
            )
        })
        .collect()
}

#[derive(Serialize)]
struct FixedPointState {
    fidelity: f64,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct FixedPointEntry {
    model: &'static str,
    g: f64,
    q: u32,
    r_pol: f64,
    s: f64,
    fixed_space_dim: usize,
    fixed_points: Vec<FixedPointState>,
}

/// Fixed states of the transmitted map at one parameter point.
pub fn fixed_point_states(
    model: Model,
    g: f64,
    q: u32,
    r_pol: f64,
    s: SpinQuantum,
) -> Result<(usize, Vec<DensityMatrix>)> {
    let k = extract_kraus(&solve(&ScatterParams::resonant(model, g, q, s)?)?, s)?;
    let rho_e = MediatorState::polarized(r_pol)?;
    Ok((fixed_space_dim(&k, &rho_e), fixed_points(&k, &rho_e)))
}

fn fixed_point_report(cfg: &ScenarioConfig) -> Result<(String, Vec<String>)> {
    let mut entries = Vec::new();
    let mut summary = Vec::new();
    for &g in &cfg.g_grid {
        for &r_pol in &cfg.r_pol_grid {
            let (dim, states) = fixed_point_states(cfg.model, g, cfg.q, r_pol, cfg.s)?;
            let states = states
                .iter()
                .map(|rho| {
                    let m = rho.matrix();
                    let rows = |f: fn(&num_complex::Complex64) -> f64| {
                        (0..m.nrows())
                            .map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect())
                            .collect()
                    };
                    Ok(FixedPointState {
                        fidelity: fidelity_with_singlet(rho)?,
                        re: rows(|z| z.re),
                        im: rows(|z| z.im),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            summary.push(format!(
                "{} g={g} r_pol={r_pol}: fixed space dim {dim}, {} fixed state(s), singlet fidelities [{}]",
                cfg.model.name(),
                states.len(),
                states
                    .iter()
                    .map(|s| format!("{:.6}", s.fidelity))
                    .collect::<Vec<_>>()
                    .join(", ")
            ));
            entries.push(FixedPointEntry {
                model: cfg.model.name(),
                g,
                q: cfg.q,
                r_pol,
                s: cfg.s.value(),
                fixed_space_dim: dim,
                fixed_points: states,
            });
        }
    }
    let mut json = serde_json::to_string_pretty(&entries)
        .map_err(|e| SimError::InvalidParameter(format!("cannot serialize report: {e}")))?;
    json.push('\n');
    Ok((json, summary))
}

/// Runs the scenario and writes its files.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    cfg.validate()?;
    let mut report = ScenarioReport::default();
    let main = &cfg.output_path;
    if cfg.scenario == Scenario::FixedPoint {
        let (json, summary) = fixed_point_report(cfg)?;
        output::write_file(main, &json)?;
        report.files.push(main.clone());
        report.summary = summary;
        return Ok(report);
    }

    let records = compute(cfg)?;
    output::write_file(main, &records_csv(&records))?;
    report.files.push(main.clone());

    match cfg.scenario {
        Scenario::Fig2 => {
            for (suffix, pick) in [
                ("_fidelity", (|r: &RunRecord| r.fidelity) as fn(&RunRecord) -> f64),
                ("_probability", |r: &RunRecord| r.probability),
            ] {
                let path = output::sibling(main, suffix, "csv");
                output::write_file(&path, &output::grid_csv(&records, cfg.n_max, pick))?;
                report.files.push(path);
            }
        }
        Scenario::Fig3b => {
            let diffs = model_differences(cfg, &records);
            let mut text = String::from("g,r_pol,n,dF_percent,dP_percent\n");
            for (g, r, n, df, dp) in &diffs {
                text.push_str(&format!("{},{},{n},{},{}\n", num(*g), num(*r), num(*df), num(*dp)));
            }
            let path = output::sibling(main, "_diff", "csv");
            output::write_file(&path, &text)?;
            report.files.push(path);
            let worst = diffs.iter().map(|d| d.3.max(d.4)).fold(0.0, f64::max);
            report
                .summary
                .push(format!("max model difference {worst:.3}% (raman_scale {})", cfg.raman_scale));
        }
        _ => {}
    }
    if cfg.plot_script {
        let path = output::sibling(main, "", "gp");
        output::write_file(&path, &output::plot_script(cfg.scenario, main))?;
        report.files.push(path);
    }

    if let Some(best) = records
        .iter()
        .filter(|r| r.n == cfg.n_max || (cfg.scenario == Scenario::Fig3b && r.n == 5))
        .max_by(|a, b| a.fidelity.total_cmp(&b.fidelity))
    {
        report.summary.insert(
            0,
            format!(
                "{} rows; best final-step F = {:.6} (P = {:.6}) at {} g = {}",
                records.len(),
                best.fidelity,
                best.probability,
                best.model.name(),
                best.g
            ),
        );
    }
    report.records = records;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn cfg(text: &str) -> ScenarioConfig {
        ScenarioConfig::from_json(text, Path::new("/nonexistent")).unwrap()
    }

    #[test]
    fn bundled_configs_parse() {
        for (id, text) in FIGURE_CONFIGS {
            let c = ScenarioConfig::from_json(text, Path::new(".")).unwrap();
            assert_eq!(c.scenario.id(), format!("fig{id}"));
        }
    }

    #[test]
    fn fig2_anchor_row() {
        let c = cfg(r#"{"scenario": "fig2", "g_grid": [1.6], "n_max": 5}"#);
        let recs = compute(&c).unwrap();
        assert_eq!(recs.len(), 5);
        let last = &recs[4];
        assert_eq!((last.n, last.g), (5, 1.6));
        assert!(last.fidelity > 0.95 && last.probability > 0.5);
        assert!(last.mu.is_none() && last.stderr_fidelity.is_none());
    }

    #[test]
    fn rows_follow_grid_order() {
        let c = cfg(r#"{"scenario": "fig4", "g_grid": [1.5], "r_pol_grid": [0.0, 0.5, 1.0], "n_max": 3}"#);
        let recs = compute(&c).unwrap();
        let keys: Vec<_> = recs.iter().map(|r| (r.r_pol, r.n)).collect();
        assert_eq!(keys[..4], [(0.0, 1), (0.0, 2), (0.0, 3), (0.5, 1)]);
    }

    #[test]
    fn fig3b_pairs_models() {
        let c = cfg(r#"{"scenario": "fig3b", "g_grid": [0.5, 3.0]}"#);
        let recs = compute(&c).unwrap();
        assert_eq!(recs.len(), 12);
        let diffs = model_differences(&c, &recs);
        assert_eq!(diffs.len(), 6);
        assert!(diffs.iter().all(|d| d.3 < 7.0 && d.4 < 7.0));
    }

    #[test]
    fn exact_noise_mu_one_matches_noiseless() {
        let c = cfg(
            r#"{"scenario": "fig5", "n_max": 4, "noise": {"tb_over_td": [0.0, 0.7], "mu": [1.0], "method": "exact"}}"#,
        );
        let recs = compute(&c).unwrap();
        for n in 0..4 {
            assert!((recs[n].fidelity - recs[4 + n].fidelity).abs() < 1e-10);
        }
    }

    #[test]
    fn fixedpoint_report_lists_singlet() {
        let dir = tempfile::tempdir().unwrap();
        let c = ScenarioConfig::from_json(
            r#"{"scenario": "fixedpoint", "model": "raman", "g_grid": [1.5], "r_pol_grid": [1.0]}"#,
            dir.path(),
        )
        .unwrap();
        let report = run_scenario(&c).unwrap();
        let text = std::fs::read_to_string(&report.files[0]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let states = v[0]["fixed_points"].as_array().unwrap();
        assert_eq!(states.len(), 2);
        assert!(states.iter().any(|s| (s["fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-9));
    }
}
