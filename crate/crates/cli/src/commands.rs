use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use pdcshape_core::analysis::{alpha_family, detect_lobes, find_tau_max, sweep_beta, SweepResult};
use pdcshape_core::model::linspace;
use pdcshape_core::oracle::{
    compare_methods, lobe_covering_grid, ORACLE_DEPTHS, ORACLE_MOD_FREQUENCIES_FS,
};
use pdcshape_core::{sample_curve, truncation_for, CorrelationCurve, CosinePhaseFilter};

use crate::config::{Command, RunConfig};
use crate::output::{format_sci, write_csv, CsvTable};
use crate::CliError;

/// Pass threshold for `validate`, on normalized rates.
pub const VALIDATION_TOLERANCE: f64 = 1e-8;
/// Delay spacing of the validation grids, in fs.
pub const VALIDATION_SPACING_FS: f64 = 10.0;
/// Extra envelope widths beyond the outermost lobe on validation grids.
pub const VALIDATION_MARGIN_T: f64 = 6.0;

const FIG3_BETAS: [f64; 2] = [50.0, 53.0];
const FIG3_ALPHAS: [f64; 3] = [0.0, 2.0, 10.0];
const FIG4_BETAS: [f64; 3] = [50.0, 300.0, 1000.0];

/// A finished table and where it goes (`None` means stdout).
#[derive(Debug)]
pub struct Output {
    pub path: Option<PathBuf>,
    pub table: CsvTable,
}

fn metadata(config: &RunConfig) -> BTreeMap<String, String> {
    let mut m: BTreeMap<String, String> = config
        .entries()
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    m.insert("command".into(), config.command.name().into());
    m
}

/// `dir/stem_suffix.ext` next to `out`, or `default_stem_suffix.csv`.
fn suffixed(out: Option<&Path>, default_stem: &str, suffix: &str) -> PathBuf {
    match out {
        Some(p) => {
            let stem = p
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or(default_stem);
            let ext = p.extension().and_then(|s| s.to_str()).unwrap_or("csv");
            p.with_file_name(format!("{stem}_{suffix}.{ext}"))
        }
        None => PathBuf::from(format!("{default_stem}_{suffix}.csv")),
    }
}

fn label(v: f64) -> String {
    format!("{v}")
}

fn tau_grid(config: &RunConfig) -> Vec<f64> {
    linspace(config.tau_min, config.tau_max, config.points)
}

fn curves_table(
    meta: BTreeMap<String, String>,
    header: &[String],
    curves: &[CorrelationCurve],
) -> CsvTable {
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut table = CsvTable::new(meta, &refs);
    let grid = curves[0].tau_grid();
    for (i, tau) in grid.iter().enumerate() {
        let mut row = vec![*tau];
        row.extend(curves.iter().map(|c| c.rates()[i]));
        table.push_numbers(&row);
    }
    table
}

fn sweep_table(meta: BTreeMap<String, String>, sweep: &SweepResult) -> CsvTable {
    let mut table = CsvTable::new(meta, &["beta_fs", "tau_max_fs", "rate_at_max"]);
    for i in 0..sweep.len() {
        table.push_numbers(&[
            sweep.beta_values()[i],
            sweep.tau_max_values()[i],
            sweep.rates()[i],
        ]);
    }
    table
}

/// Computes every table a command produces without writing anything.
/// `validate` also reports whether the oracle comparison passed.
pub fn build_outputs(config: &RunConfig) -> Result<(Vec<Output>, bool), CliError> {
    let out = config.out.clone();
    let meta = metadata(config);
    let mut passed = true;
    let outputs = match config.command {
        Command::Params => {
            let p = &config.params;
            let w0 = p.pump_angular_frequency();
            let order = truncation_for(&config.filter()?, config.eval.tail_tolerance)?.max_order();
            let mut table = CsvTable::new(meta, &["quantity", "value"]);
            for (name, value) in [
                ("characteristic_time_fs", p.characteristic_time()),
                ("pump_angular_frequency_rad_per_fs", w0),
                ("half_pump_angular_frequency_rad_per_fs", 0.5 * w0),
                ("beta_period_fs", 4.0 * std::f64::consts::PI / w0),
                ("series_max_order", order as f64),
            ] {
                table.push_cells(vec![name.to_string(), format_sci(value)]);
            }
            vec![Output { path: out, table }]
        }
        Command::Curve => {
            let curve = sample_curve(
                &config.params,
                &config.filter()?,
                &tau_grid(config),
                config.method,
                &config.eval,
            )?;
            let table = curves_table(meta, &["tau_fs".into(), "rate".into()], &[curve]);
            vec![Output { path: out, table }]
        }
        Command::TauMax => {
            let r = find_tau_max(&config.params, &config.filter()?, &config.search)?;
            let sweep = SweepResult::new(vec![config.beta], vec![r.tau_max], vec![r.rate_at_max])?;
            vec![Output {
                path: out,
                table: sweep_table(meta, &sweep),
            }]
        }
        Command::SweepBeta | Command::Fig2 => {
            let sweep = sweep_beta(
                &config.params,
                config.alpha,
                config.beta_start,
                config.beta_end,
                config.beta_step,
                &config.search,
            )?;
            vec![Output {
                path: out,
                table: sweep_table(meta, &sweep),
            }]
        }
        Command::Lobes => {
            let curve = sample_curve(
                &config.params,
                &config.filter()?,
                &tau_grid(config),
                config.method,
                &config.eval,
            )?;
            let peak = curve.max_sample().1;
            let report = detect_lobes(&curve, Some(config.lobe_fraction * peak))?;
            let mut table = CsvTable::new(meta, &["center_fs", "height", "prominence"]);
            for l in &report.lobes {
                table.push_numbers(&[l.center, l.height, l.prominence]);
            }
            vec![Output { path: out, table }]
        }
        Command::Fig3 => {
            let grid = tau_grid(config);
            let mut header = vec!["tau_fs".to_string()];
            header.extend(
                FIG3_ALPHAS
                    .iter()
                    .map(|a| format!("rate_alpha{}", label(*a))),
            );
            let mut outputs = Vec::new();
            for beta in FIG3_BETAS {
                let curves = alpha_family(
                    &config.params,
                    beta,
                    &FIG3_ALPHAS,
                    &grid,
                    config.method,
                    &config.eval,
                )?;
                let mut m = meta.clone();
                m.insert("beta".into(), crate::config::fmt_exact(beta));
                outputs.push(Output {
                    path: Some(suffixed(
                        out.as_deref(),
                        "fig3",
                        &format!("beta{}", label(beta)),
                    )),
                    table: curves_table(m, &header, &curves),
                });
            }
            outputs
        }
        Command::Fig4 => {
            let grid = tau_grid(config);
            let mut header = vec!["tau_fs".to_string()];
            header.extend(FIG4_BETAS.iter().map(|b| format!("rate_beta{}", label(*b))));
            let curves = FIG4_BETAS
                .iter()
                .map(|&beta| {
                    let f = CosinePhaseFilter::new(config.alpha, beta)?;
                    sample_curve(&config.params, &f, &grid, config.method, &config.eval)
                })
                .collect::<Result<Vec<_>, _>>()?;
            vec![Output {
                path: out,
                table: curves_table(meta, &header, &curves),
            }]
        }
        Command::Validate => {
            let mut table = CsvTable::new(meta, &["alpha", "beta_fs", "max_abs_diff", "at_tau_fs"]);
            for alpha in ORACLE_DEPTHS {
                for beta in ORACLE_MOD_FREQUENCIES_FS {
                    let f = CosinePhaseFilter::new(alpha, beta)?;
                    let grid = lobe_covering_grid(
                        &config.params,
                        &f,
                        config.eval.tail_tolerance,
                        VALIDATION_SPACING_FS,
                        VALIDATION_MARGIN_T,
                    )?;
                    let r = compare_methods(&config.params, &f, &grid, &config.eval)?;
                    passed &= r.max_abs_diff <= VALIDATION_TOLERANCE;
                    table.push_numbers(&[alpha, beta, r.max_abs_diff, r.at_tau_fs]);
                }
            }
            vec![Output { path: out, table }]
        }
    };
    Ok((outputs, passed))
}

/// Computes, writes, and maps the outcome to the process exit contract.
pub fn run_command(config: &RunConfig) -> Result<(), CliError> {
    let (outputs, passed) = build_outputs(config)?;
    for o in &outputs {
        write_csv(&o.table, o.path.as_deref()).map_err(|e| {
            CliError::Io(format!(
                "{}: {e}",
                o.path.as_deref().unwrap_or(Path::new("<stdout>")).display()
            ))
        })?;
    }
    if !passed {
        return Err(CliError::Validation(format!(
            "series and quadrature rates differ by more than {VALIDATION_TOLERANCE:e}"
        )));
    }
    Ok(())
}
