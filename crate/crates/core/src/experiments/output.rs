//! CSV output. Numbers are written in Rust's shortest round-trip form, so
//! files are byte-identical whenever the computation is.
//!
//! `sweep` tables ([`STATS_HEADER`]) have one row per sweep point: the point
//! (`n`, `e_def`, `p`, `p_max`), the replicate count, mean and standard
//! deviation of per-consumer utility, station cost, outer iterations and price
//! spread for the game, the same for the FIT baseline (`fit_cost` at the
//! scenario tariff, `fit_equal_cost` at the equal-budget tariff `P/N`), and
//! the counts of exact fixed points and FIT shortfalls.
//!
//! Figure panels:
//!
//! | file | columns |
//! |------|---------|
//! | `fig1a_utility.csv` | `iteration, ec_id, available_energy, utility` |
//! | `fig1b_energy.csv` | `iteration, ec_id, available_energy, e_n` |
//! | `fig1c_price.csv` | `iteration, ec_id, p_n, cost` |
//! | `fig2a_utility_vs_deficiency.csv` | `n, e_def, replicates, utility_mean, utility_std` |
//! | `fig2b_cost_vs_consumers.csv` | `n, replicates, cost_mean, cost_std, cost_sem` |
//! | `fig3_cost_vs_price_cap.csv` | `n, p, p_max, replicates, cost_mean, cost_std` |
//! | `fig4a_utility_vs_consumers.csv` | `n, replicates, utility_mean, utility_std, fit_utility_mean, fit_utility_std, ratio` |
//! | `fig4b_cost_vs_budget.csv` | `n, p, replicates, cost_mean, cost_std, fit_cost_mean, fit_cost_std, gap` |
//!
//! In the convergence panels the last iteration is the consumers' re-solve at
//! the final prices. `fig4b` compares against the FIT at the equal-budget
//! tariff.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{AggregateStats, PointStats};
use crate::engine::EmesResult;
use crate::error::Result;
use crate::model::EcParams;

pub const STATS_HEADER: [&str; 25] = [
    "n",
    "e_def",
    "p",
    "p_max",
    "replicates",
    "utility_mean",
    "utility_std",
    "cost_mean",
    "cost_std",
    "iterations_mean",
    "iterations_std",
    "price_spread_mean",
    "price_spread_std",
    "fit_utility_mean",
    "fit_utility_std",
    "fit_cost_mean",
    "fit_cost_std",
    "fit_equal_cost_mean",
    "fit_equal_cost_std",
    "fixed_points",
    "fit_shortfalls",
    "utility_sem",
    "cost_sem",
    "fit_utility_sem",
    "fit_equal_cost_sem",
];

fn text(values: &[f64]) -> Vec<String> {
    values.iter().map(f64::to_string).collect()
}

pub fn write_stats<W: Write>(stats: &AggregateStats, writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(STATS_HEADER)?;
    for s in &stats.points {
        let mut row = vec![s.point.n.to_string()];
        row.extend(text(&[s.point.e_def, s.point.p, s.point.p_max]));
        row.push(s.replicates.to_string());
        row.extend(text(&[
            s.utility.mean,
            s.utility.std,
            s.cost.mean,
            s.cost.std,
            s.outer_iterations.mean,
            s.outer_iterations.std,
            s.price_spread.mean,
            s.price_spread.std,
            s.fit_utility.mean,
            s.fit_utility.std,
            s.fit_cost.mean,
            s.fit_cost.std,
            s.fit_cost_equal_budget.mean,
            s.fit_cost_equal_budget.std,
        ]));
        row.push(s.fixed_points.to_string());
        row.push(s.fit_shortfalls.to_string());
        row.extend(text(&[
            s.utility.standard_error(s.replicates),
            s.cost.standard_error(s.replicates),
            s.fit_utility.standard_error(s.replicates),
            s.fit_cost_equal_budget.standard_error(s.replicates),
        ]));
        out.write_record(row)?;
    }
    out.flush()?;
    Ok(())
}

/// Which value a convergence panel plots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergencePanel {
    Utility,
    Energy,
    Price,
}

pub fn write_convergence<W: Write>(
    result: &EmesResult,
    params: &[EcParams],
    panel: ConvergencePanel,
    writer: W,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(match panel {
        ConvergencePanel::Utility => ["iteration", "ec_id", "available_energy", "utility"],
        ConvergencePanel::Energy => ["iteration", "ec_id", "available_energy", "e_n"],
        ConvergencePanel::Price => ["iteration", "ec_id", "p_n", "cost"],
    })?;
    let final_round = (
        result.rounds.len(),
        &result.energies[..],
        &result.prices[..],
        result.utilities.as_slice(),
        result.total_cost,
    );
    let rounds = result
        .rounds
        .iter()
        .map(|r| (r.iteration, &r.energies[..], &r.prices[..], &r.utilities[..], r.cost))
        .chain(std::iter::once(final_round));
    for (iteration, energies, prices, utilities, cost) in rounds {
        for (n, ec) in params.iter().enumerate() {
            let (a, b) = match panel {
                ConvergencePanel::Utility => (ec.available_energy, utilities[n]),
                ConvergencePanel::Energy => (ec.available_energy, energies[n]),
                ConvergencePanel::Price => (prices[n], cost),
            };
            out.write_record([iteration.to_string(), ec.id.to_string(), a.to_string(), b.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

fn write_rows<W: Write>(writer: W, header: &[&str], points: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(header)?;
    for row in points {
        out.write_record(row)?;
    }
    out.flush()?;
    Ok(())
}

fn lead(s: &PointStats, extra: &[f64]) -> Vec<String> {
    let mut row = vec![s.point.n.to_string()];
    row.extend(text(extra));
    row.push(s.replicates.to_string());
    row
}

/// Utility against deficiency for populations of 5, 10 and 15.
pub fn write_fig2a<W: Write>(stats: &AggregateStats, writer: W) -> Result<()> {
    let rows = stats
        .points
        .iter()
        .filter(|s| [5, 10, 15].contains(&s.point.n))
        .map(|s| {
            let mut row = lead(s, &[s.point.e_def]);
            row.extend(text(&[s.utility.mean, s.utility.std]));
            row
        });
    write_rows(
        writer,
        &["n", "e_def", "replicates", "utility_mean", "utility_std"],
        rows,
    )
}

/// Cost against population size at `E_def = 700`.
pub fn write_fig2b<W: Write>(stats: &AggregateStats, writer: W) -> Result<()> {
    let rows = stats.points.iter().filter(|s| s.point.e_def == 700.0).map(|s| {
        let mut row = lead(s, &[]);
        row.extend(text(&[s.cost.mean, s.cost.std, s.cost.standard_error(s.replicates)]));
        row
    });
    write_rows(writer, &["n", "replicates", "cost_mean", "cost_std", "cost_sem"], rows)
}

pub fn write_fig3<W: Write>(stats: &AggregateStats, writer: W) -> Result<()> {
    let rows = stats.points.iter().map(|s| {
        let mut row = lead(s, &[s.point.p, s.point.p_max]);
        row.extend(text(&[s.cost.mean, s.cost.std]));
        row
    });
    write_rows(
        writer,
        &["n", "p", "p_max", "replicates", "cost_mean", "cost_std"],
        rows,
    )
}

/// Per-consumer utility of the game and of the FIT at the reference budget.
pub fn write_fig4a<W: Write>(stats: &AggregateStats, writer: W) -> Result<()> {
    let rows = stats.points.iter().filter(|s| s.point.p == 185.0).map(|s| {
        let mut row = lead(s, &[]);
        row.extend(text(&[
            s.utility.mean,
            s.utility.std,
            s.fit_utility.mean,
            s.fit_utility.std,
            s.utility.mean / s.fit_utility.mean,
        ]));
        row
    });
    write_rows(
        writer,
        &[
            "n",
            "replicates",
            "utility_mean",
            "utility_std",
            "fit_utility_mean",
            "fit_utility_std",
            "ratio",
        ],
        rows,
    )
}

pub fn write_fig4b<W: Write>(stats: &AggregateStats, writer: W) -> Result<()> {
    let rows = stats.points.iter().map(|s| {
        let mut row = lead(s, &[s.point.p]);
        row.extend(text(&[
            s.cost.mean,
            s.cost.std,
            s.fit_cost_equal_budget.mean,
            s.fit_cost_equal_budget.std,
            s.fit_cost_equal_budget.mean - s.cost.mean,
        ]));
        row
    });
    write_rows(
        writer,
        &[
            "n",
            "p",
            "replicates",
            "cost_mean",
            "cost_std",
            "fit_cost_mean",
            "fit_cost_std",
            "gap",
        ],
        rows,
    )
}

/// Results behind the four figures.
#[derive(Debug, Clone)]
pub struct FigureData {
    pub convergence_params: Vec<EcParams>,
    pub convergence: EmesResult,
    pub population: AggregateStats,
    pub threshold: AggregateStats,
    pub comparison: AggregateStats,
}

fn create(dir: &Path, name: &str, written: &mut Vec<PathBuf>) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::create(&path)?;
    written.push(path);
    Ok(BufWriter::new(file))
}

/// Writes every panel into `dir`; returns the paths in panel order.
pub fn write_figures(data: &FigureData, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let panels = [
        ("fig1a_utility.csv", ConvergencePanel::Utility),
        ("fig1b_energy.csv", ConvergencePanel::Energy),
        ("fig1c_price.csv", ConvergencePanel::Price),
    ];
    for (name, panel) in panels {
        let file = create(dir, name, &mut written)?;
        write_convergence(&data.convergence, &data.convergence_params, panel, file)?;
    }
    write_fig2a(
        &data.population,
        create(dir, "fig2a_utility_vs_deficiency.csv", &mut written)?,
    )?;
    write_fig2b(
        &data.population,
        create(dir, "fig2b_cost_vs_consumers.csv", &mut written)?,
    )?;
    write_fig3(
        &data.threshold,
        create(dir, "fig3_cost_vs_price_cap.csv", &mut written)?,
    )?;
    write_fig4a(
        &data.comparison,
        create(dir, "fig4a_utility_vs_consumers.csv", &mut written)?,
    )?;
    write_fig4b(&data.comparison, create(dir, "fig4b_cost_vs_budget.csv", &mut written)?)?;
    Ok(written)
}
