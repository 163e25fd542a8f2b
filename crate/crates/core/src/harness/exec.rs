//! Shared run executor: builds initial data from a config, runs the stepper
//! with the configured extra diagnostics evaluated at every record, checks
//! the invariant battery, and persists CSV/snapshot outputs.

use super::barrier::BarrierConfig;
use super::config::RunConfig;
use super::io::{self, SnapshotHeader};
use crate::diagnostics::{self, DiagnosticsRecord, KernelQuery};
use crate::error::Error;
use crate::field::{ScalarField, VectorField};
use crate::initial;
use crate::model::ModelKind;
use crate::stepper::{self, RunOptions};

/// Extra per-record series plus summary facts produced by [`execute`].
#[derive(Debug, Clone)]
pub struct ExecReport {
    pub records: Vec<DiagnosticsRecord>,
    /// `[record][center][ray]` zero-crossing radii (NaN where a ray misses).
    pub radius_series: Vec<Vec<Vec<f64>>>,
    /// `[record][query]` heat-kernel functional values (NaN when t >= s).
    pub kernel_series: Vec<Vec<f64>>,
    /// Record times matching the series above.
    pub times: Vec<f64>,
    /// Run-wide max of the density-ratio sample (NaN when not configured).
    pub density_cap: f64,
    /// First-variation values against the sine test field (empty when off).
    pub first_variation_series: Vec<f64>,
    /// Barrier ordering margins per record (empty when no barrier config).
    pub barrier_margins: Vec<f64>,
    pub max_energy_increase: f64,
    pub compat_energy_initial: f64,
    pub compat_energy_final: f64,
    pub surface_energy0: f64,
    pub m0: f64,
    pub int_lambda: f64,
    pub int_lambda_sq: f64,
    pub dissipation: f64,
    pub steps: u64,
    pub dt: f64,
    /// Violated per-record invariants (empty = battery passed).
    pub battery: Vec<String>,
}

/// Optional barrier overlay for [`execute`] (driven by the barrier scenario).
#[derive(Debug, Clone, Copy, Default)]
pub struct ExecExtras {
    pub barrier: Option<BarrierConfig>,
}

pub fn execute(cfg: &RunConfig, extras: &ExecExtras) -> Result<ExecReport, Error> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let pd = initial::build_phi0(&cfg.shape, grid, cfg.model.eps, cfg.clamp_width())?;
    let params = cfg.model_params(pd.m0)?;
    let ctrl = cfg.step_control(grid)?;
    if let Some(b) = &extras.barrier {
        b.validate()?;
        b.check_confinement(&cfg.shape)?;
    }

    let radius_centers: Vec<Vec<f64>> = if grid.dim() >= 2 {
        if cfg.diagnostics.radius_centers.is_empty() {
            vec![cfg.shape.reference_center()[..grid.dim()].to_vec()]
        } else {
            cfg.diagnostics.radius_centers.clone()
        }
    } else {
        Vec::new()
    };
    let kernel_queries: Vec<KernelQuery> = cfg
        .diagnostics
        .kernel_queries
        .iter()
        .map(|q| KernelQuery {
            y: q.y.clone(),
            s: q.s,
            t: 0.0,
        })
        .collect();
    let density_on =
        !cfg.diagnostics.density_centers.is_empty() && !cfg.diagnostics.density_radii.is_empty();
    let test_field: Option<VectorField> = cfg.diagnostics.first_variation.then(|| {
        let comps = (0..grid.dim())
            .map(|a| {
                ScalarField::from_fn(grid, |x| (2.0 * std::f64::consts::PI * x[a]).sin())
            })
            .collect();
        VectorField::from_components(comps).expect("sine test field")
    });

    let mut radius_series = Vec::new();
    let mut kernel_series = Vec::new();
    let mut times = Vec::new();
    let mut density_cap = f64::NAN;
    let mut first_variation_series = Vec::new();
    let mut barrier_margins = Vec::new();

    let opts = RunOptions {
        horizon: cfg.stepping.t_final,
        cadence: cfg.stepping.cadence,
        snapshot_times: cfg.output.snapshot_times.clone(),
        monitor_energy: cfg.diagnostics.energy_monitor,
    };

    let need_density_field = density_on || !kernel_queries.is_empty();
    let out = stepper::run_observed(&pd, params, &ctrl, &opts, |state, _rec| {
        times.push(state.t);
        if !radius_centers.is_empty() {
            let per_center: Vec<Vec<f64>> = radius_centers
                .iter()
                .map(|c| match diagnostics::level_set_geometry(&state.phi, c) {
                    Ok(ls) => ls.radius_samples,
                    Err(_) => Vec::new(), // collapsed phase: no samples
                })
                .collect();
            radius_series.push(per_center);
        }
        if need_density_field {
            let dens = diagnostics::energy_density(&state.phi, params.eps);
            if !kernel_queries.is_empty() {
                let vals: Vec<f64> = kernel_queries
                    .iter()
                    .map(|q| {
                        if state.t < q.s {
                            let query = KernelQuery {
                                y: q.y.clone(),
                                s: q.s,
                                t: state.t,
                            };
                            diagnostics::heat_kernel_functional_with(&dens, &query)
                        } else {
                            f64::NAN
                        }
                    })
                    .collect();
                kernel_series.push(vals);
            }
            if density_on {
                for c in &cfg.diagnostics.density_centers {
                    for &r in &cfg.diagnostics.density_radii {
                        let ratio = diagnostics::density_ratio_with(&dens, c, r);
                        if !(ratio <= density_cap) {
                            density_cap = ratio;
                        }
                    }
                }
            }
        }
        if let Some(tf) = &test_field {
            first_variation_series.push(diagnostics::first_variation(&state.phi, &params, tf));
        }
        if let Some(b) = &extras.barrier {
            let m = b.margin(&state.phi, params.eps, state.int_lambda, state.t);
            if state.t == 0.0 && m < 0.0 {
                return Err(Error::Geometry(format!(
                    "barrier ordering violated at t = 0: margin {m}"
                )));
            }
            barrier_margins.push(m);
        }
        Ok(())
    })?;

    if let Some(csv) = &cfg.output.csv {
        io::write_csv(&out.records, csv)?;
    }
    if let Some(dir) = &cfg.output.snapshot_dir {
        for (t, field) in &out.snapshots {
            let header = SnapshotHeader {
                dim: grid.dim(),
                n: grid.n(),
                eps: params.eps,
                alpha: params.alpha,
                kind: params.kind,
                t: *t,
                m0: params.m0,
            };
            let name = format!("snapshot-{:.9}.vpf", t);
            io::write_snapshot(&dir.join(name), &header, field)?;
        }
    }

    let battery = invariant_battery(&out.records, params.kind, cfg.model.eps, cfg.model.alpha);
    Ok(ExecReport {
        records: out.records,
        radius_series,
        kernel_series,
        times,
        density_cap,
        first_variation_series,
        barrier_margins,
        max_energy_increase: out.max_energy_increase,
        compat_energy_initial: out.compat_energy_initial,
        compat_energy_final: out.compat_energy_final,
        surface_energy0: pd.surface_energy0,
        m0: pd.m0,
        int_lambda: out.final_state.int_lambda,
        int_lambda_sq: out.final_state.int_lambda_sq,
        dissipation: out.final_state.dissipation,
        steps: out.final_state.steps(),
        dt: ctrl.dt,
        battery,
    })
}

/// The per-record invariant battery every scenario re-asserts.
pub fn invariant_battery(
    records: &[DiagnosticsRecord],
    kind: ModelKind,
    eps: f64,
    alpha: f64,
) -> Vec<String> {
    let mut bad = Vec::new();
    let Some(first) = records.first() else {
        return bad;
    };
    let e0 = first.e;
    let volume0 = first.volume;
    let lambda_cap = (4.0 / 3.0) * eps.powf(-alpha) * (1.0 + 1e-12);
    let mut prev: Option<&DiagnosticsRecord> = None;
    for r in records {
        let t = r.t;
        if !(r.e_s >= 0.0 && r.e_p >= 0.0) {
            bad.push(format!("t={t}: negative energy component"));
        }
        if (r.e - (r.e_s + r.e_p)).abs() > 1e-12 * r.e.abs().max(1.0) {
            bad.push(format!("t={t}: E != E_S + E_P beyond rounding"));
        }
        let lhs = r.mass_deficit * r.mass_deficit;
        let rhs = 2.0 * eps.powf(alpha) * r.e_p;
        if (lhs - rhs).abs() > 1e-12 * lhs.max(1e-300) {
            bad.push(format!("t={t}: deficit^2 != 2 eps^alpha E_P"));
        }
        if kind == ModelKind::Takasao {
            if r.mass_deficit > r.mass_bound * (1.0 + 1e-12) {
                bad.push(format!(
                    "t={t}: mass deficit {} exceeds bound {}",
                    r.mass_deficit, r.mass_bound
                ));
            }
            if r.sup_abs_phi > 1.0 + 1e-8 {
                bad.push(format!("t={t}: sup|phi| = {} > 1 + 1e-8", r.sup_abs_phi));
            }
            if r.lambda.abs() > lambda_cap {
                bad.push(format!("t={t}: |lambda| = {} above (4/3)eps^-alpha", r.lambda));
            }
        }
        if kind == ModelKind::RubinsteinSternberg && (r.volume - volume0).abs() > 0.5e-9 {
            bad.push(format!(
                "t={t}: RS linear mass drift {} beyond 1e-9",
                2.0 * (r.volume - volume0)
            ));
        }
        if r.xi_pos_l1 > 0.01 * first.e_s {
            bad.push(format!(
                "t={t}: positive discrepancy {} above 1% of E_S(0)",
                r.xi_pos_l1
            ));
        }
        if let Some(p) = prev {
            // the Lyapunov functional is E for the deficit penalty model but
            // only E_S for the mean-reaction model (its penalty term is not
            // part of the gradient structure)
            let (cur, old) = match kind {
                ModelKind::Takasao => (r.e, p.e),
                ModelKind::RubinsteinSternberg => (r.e_s, p.e_s),
            };
            if cur > old + 1e-7 * e0 {
                bad.push(format!("t={t}: energy increased beyond 1e-7 E(0)"));
            }
            if r.int_lambda_sq < p.int_lambda_sq || r.dissipation < p.dissipation {
                bad.push(format!("t={t}: accumulator decreased"));
            }
        }
        prev = Some(r);
    }
    bad.truncate(16);
    bad
}
