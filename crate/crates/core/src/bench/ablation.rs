//! The four-way ablation over shared seeds.

use std::fmt::Write as _;
use std::sync::Arc;

use super::scenario::{mean_ci95, run_with_solver, MetricsReport, ScenarioSpec, SolverKind};
use super::BenchError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Full,
    NoRl,
    NoDynamicCost,
    NoStaticCost,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Full,
        Variant::NoRl,
        Variant::NoDynamicCost,
        Variant::NoStaticCost,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoRl => "norl",
            Variant::NoDynamicCost => "no-dynamic-cost",
            Variant::NoStaticCost => "no-static-cost",
        }
    }

    /// The base spec with this variant's solver and cost toggles.
    pub fn apply(self, base: &ScenarioSpec) -> ScenarioSpec {
        let mut s = base.clone();
        s.use_static_cost = true;
        s.use_dynamic_cost = true;
        match self {
            Variant::Full => {}
            Variant::NoRl => s.solver = SolverKind::NoRl,
            Variant::NoDynamicCost => s.use_dynamic_cost = false,
            Variant::NoStaticCost => s.use_static_cost = false,
        }
        s
    }
}

/// Paired difference `full - variant` over shared seeds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairedDiff {
    pub mean: f64,
    pub ci95: f64,
}

impl PairedDiff {
    /// The full variant is better at 95% confidence.
    pub fn full_dominates(&self) -> bool {
        self.mean - self.ci95 > 0.0
    }
}

#[derive(Clone, Debug)]
pub struct AblationReport {
    pub reports: Vec<(Variant, MetricsReport)>,
}

impl AblationReport {
    pub fn get(&self, v: Variant) -> &MetricsReport {
        &self
            .reports
            .iter()
            .find(|(x, _)| *x == v)
            .expect("all variants are run")
            .1
    }

    pub fn paired_vs_full(&self, v: Variant) -> PairedDiff {
        let full = self.get(Variant::Full);
        let other = self.get(v);
        let diffs: Vec<f64> = full
            .per_seed
            .iter()
            .zip(&other.per_seed)
            .map(|(a, b)| {
                debug_assert_eq!(a.seed, b.seed);
                a.throughput - b.throughput
            })
            .collect();
        let (mean, ci95) = mean_ci95(&diffs);
        PairedDiff { mean, ci95 }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("variant,mean_throughput,ci95,diff_vs_full,diff_ci95,mean_visit_std\n");
        for (v, r) in &self.reports {
            let d = self.paired_vs_full(*v);
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                v.name(),
                r.mean_throughput,
                r.ci95,
                d.mean,
                d.ci95,
                r.mean_visit_std
            );
        }
        s
    }
}

/// Run all four variants of `base` on its seeds.
pub fn ablation_matrix(base: &ScenarioSpec) -> Result<AblationReport, BenchError> {
    base.validate()?;
    if base.solver == SolverKind::NoRl {
        return Err(BenchError::Spec("the ablation base must be a learned solver".into()));
    }
    let grid = Arc::new(base.map.load()?);
    let learned = base.resolve_solver()?;
    let mut reports = Vec::with_capacity(4);
    for v in Variant::ALL {
        let spec = v.apply(base);
        let solver = if v == Variant::NoRl {
            crate::solver::Solver::NoRl
        } else {
            learned.clone()
        };
        reports.push((v, run_with_solver(&spec, grid.clone(), &solver)?.report));
    }
    Ok(AblationReport { reports })
}
