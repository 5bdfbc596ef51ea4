//! Mean absolute difference between landscapes and the two baselines it is
//! measured against: the exact landscape (MAD_SIM) and the maximally mixed
//! state (MAD_MMS).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::circuit::{build_qaoa_circuit, QaoaParams};
use crate::error::{Error, Result};
use crate::landscape::{exact_reference, GridSpec, Landscape, LandscapeMeta, ShotMode};
use crate::problem::WeightedGraph;
use crate::simulator::energy_moments_exact;

/// `(1/|Γ||B|) Σ |E1 − E2|` over the shared grid.
pub fn mad(a: &Landscape, b: &Landscape) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch(format!(
            "{}x{} grid vs {}x{} grid",
            a.grid().gamma_values().len(),
            a.grid().beta_values().len(),
            b.grid().gamma_values().len(),
            b.grid().beta_values().len()
        )));
    }
    let total: f64 = a
        .energies()
        .iter()
        .flatten()
        .zip(b.energies().iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .sum();
    Ok(total / a.grid().point_count() as f64)
}

/// Constant landscape at the mean energy over all assignments, `−Σw/2`.
pub fn mms_landscape(g: &WeightedGraph, grid: &GridSpec) -> Landscape {
    let e = g.mixed_state_energy();
    let meta = LandscapeMeta {
        backend: "mms".into(),
        shots: ShotMode::Exact,
        depth: 1,
        fixed_layer1: None,
        seed: 0,
        created_at: 0,
        graph: g.clone(),
    };
    let rows = vec![vec![e; grid.beta_values().len()]; grid.gamma_values().len()];
    Landscape::new(grid.clone(), rows, meta).expect("constant landscape is well formed")
}

/// Checks that `reference` is a noise-free landscape for the same experiment as `l`.
pub fn check_reference(l: &Landscape, reference: &Landscape) -> Result<()> {
    let (m, r) = (l.meta(), reference.meta());
    let problem = if r.shots != ShotMode::Exact {
        Some("reference is not an exact landscape".to_string())
    } else if m.depth != r.depth {
        Some(format!("depth {} vs reference depth {}", m.depth, r.depth))
    } else if m.fixed_layer1 != r.fixed_layer1 {
        Some("fixed first layer differs from the reference".to_string())
    } else if m.graph != r.graph {
        Some("graph differs from the reference".to_string())
    } else if l.grid() != reference.grid() {
        Some("grid differs from the reference".to_string())
    } else {
        None
    };
    match problem {
        Some(p) => Err(Error::Provenance(p)),
        None => Ok(()),
    }
}

pub fn mad_sim(l: &Landscape, reference: &Landscape) -> Result<f64> {
    check_reference(l, reference)?;
    mad(l, reference)
}

pub fn mad_mms(l: &Landscape, g: &WeightedGraph) -> f64 {
    mad(l, &mms_landscape(g, l.grid())).expect("MMS landscape shares the grid")
}

/// Computes one exact reference per distinct experiment in `landscapes`.
pub fn exact_references(landscapes: &[Landscape]) -> Result<Vec<Landscape>> {
    let mut refs: Vec<Landscape> = Vec::new();
    for l in landscapes {
        if !refs.iter().any(|r| check_reference(l, r).is_ok()) {
            refs.push(exact_reference(l)?);
        }
    }
    Ok(refs)
}

/// Upper bound on the standard error of one sampled grid point of `like`.
///
/// Takes the largest single-shot energy standard deviation over the noise-free
/// grid points and the uniform distribution (the fully noisy limit), divided by
/// `√shots`.
pub fn shot_noise_se(like: &Landscape, shots: u64) -> Result<f64> {
    if shots == 0 {
        return Err(Error::ZeroShots);
    }
    let g = &like.meta().graph;
    let table = g.energy_table();
    let mean = g.mixed_state_energy();
    let uniform_var = table.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / table.len() as f64;
    let mut max_var = uniform_var;
    for &gamma in like.grid().gamma_values() {
        for &beta in like.grid().beta_values() {
            let params = match like.meta().fixed_layer1 {
                None => QaoaParams::depth1(gamma, beta)?,
                Some(l) => QaoaParams::new(vec![l.gamma, gamma], vec![l.beta, beta])?,
            };
            let (_, var) = energy_moments_exact(g, &build_qaoa_circuit(g, &params)?)?;
            max_var = max_var.max(var);
        }
    }
    Ok((max_var / shots as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MadRow {
    pub backend: String,
    pub depth: usize,
    pub replication: String,
    pub mad_sim: f64,
    pub mad_mms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MadReport {
    pub rows: Vec<MadRow>,
}

/// One row per landscape, grouped by backend (first appearance), then depth.
///
/// Replications of the same backend and depth are numbered from 1 in input
/// order. Each landscape is paired with the first matching reference.
pub fn report(landscapes: &[Landscape], references: &[Landscape], g: &WeightedGraph) -> Result<MadReport> {
    let mut backends: Vec<&str> = Vec::new();
    let mut rows = Vec::with_capacity(landscapes.len());
    for (i, l) in landscapes.iter().enumerate() {
        let meta = l.meta();
        if &meta.graph != g {
            return Err(Error::Provenance(format!(
                "landscape {i} ({}) was sampled on a different graph",
                meta.backend
            )));
        }
        let reference = references
            .iter()
            .find(|r| check_reference(l, r).is_ok())
            .ok_or_else(|| {
                Error::Provenance(format!(
                    "no matching exact reference for landscape {i} ({}, depth {})",
                    meta.backend, meta.depth
                ))
            })?;
        if !backends.contains(&meta.backend.as_str()) {
            backends.push(&meta.backend);
        }
        let replication = landscapes[..i]
            .iter()
            .filter(|p| p.meta().backend == meta.backend && p.meta().depth == meta.depth)
            .count()
            + 1;
        rows.push(MadRow {
            backend: meta.backend.clone(),
            depth: meta.depth,
            replication: replication.to_string(),
            mad_sim: mad(l, reference)?,
            mad_mms: mad_mms(l, g),
        });
    }
    let order = |r: &MadRow| backends.iter().position(|b| *b == r.backend);
    rows.sort_by_key(|r| (order(r), r.depth));
    Ok(MadReport { rows })
}

impl MadReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("backend,depth,replication,mad_sim,mad_mms\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.backend, r.depth, r.replication, r.mad_sim, r.mad_mms
            )
            .expect("write to string");
        }
        out
    }

    /// Aligned columns for terminals.
    pub fn render_text(&self) -> String {
        let header = ["backend", "depth", "replication", "mad_sim", "mad_mms"];
        let cells: Vec<[String; 5]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.backend.clone(),
                    r.depth.to_string(),
                    r.replication.clone(),
                    format!("{:.4}", r.mad_sim),
                    format!("{:.4}", r.mad_mms),
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        let mut line = |cols: [&str; 5]| {
            let mut s = format!("{:<w$}", cols[0], w = widths[0]);
            for (c, w) in cols.iter().zip(widths).skip(1) {
                write!(s, "  {c:>w$}").expect("write to string");
            }
            out.push_str(s.trim_end());
            out.push('\n');
        };
        line(header);
        for row in &cells {
            line([&row[0], &row[1], &row[2], &row[3], &row[4]]);
        }
        out
    }
}
