use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::TensorAlgebra;
use crate::arch::{generate, GenerateOptions};
use crate::config::ExploreConfig;
use crate::error::{Error, Result};
use crate::sim::{random_inputs, reference_execute, simulate, SimOptions};

use super::cost::{cost_of_arch, SimSummary};
use super::{enumerate_designs_with, CostReport, DesignPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluated {
    pub point: DesignPoint,
    pub cost: CostReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExploreStatus {
    Ok,
    /// No legal design point exists.
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exploration {
    pub algebra: String,
    pub status: ExploreStatus,
    /// Sorted by estimated cycles, ties in enumeration order.
    pub points: Vec<Evaluated>,
    /// Indices into `points` of the (cycles, area, energy) frontier.
    pub pareto: Vec<usize>,
}

fn dominates(a: &CostReport, b: &CostReport) -> bool {
    let (ac, aa, ae) = (a.estimated_cycles as f64, a.area_proxy, a.energy_proxy);
    let (bc, ba, be) = (b.estimated_cycles as f64, b.area_proxy, b.energy_proxy);
    ac <= bc && aa <= ba && ae <= be && (ac < bc || aa < ba || ae < be)
}

/// Points not dominated in (cycles, area, energy), in input order.
pub fn pareto_front(costs: &[&CostReport]) -> Vec<usize> {
    (0..costs.len())
        .filter(|&i| !costs.iter().any(|c| dominates(c, costs[i])))
        .collect()
}

pub fn explore(algebra: &TensorAlgebra, cfg: &ExploreConfig) -> Result<Exploration> {
    let array = cfg.array_dims()?;
    let points = enumerate_designs_with(algebra, array, &cfg.alphabet, cfg.time_budget, cfg.dedup);
    let gen_opts = GenerateOptions {
        array,
        time_budget: cfg.time_budget,
    };
    let mut evaluated: Vec<Evaluated> = points
        .into_par_iter()
        .map(|point| {
            let arch = generate(algebra, &point.stt, gen_opts)?;
            let cost = cost_of_arch(&arch, cfg.bandwidth_cap, &cfg.area, &cfg.energy);
            Ok(Evaluated { point, cost })
        })
        .collect::<Result<_>>()?;
    evaluated.sort_by_key(|e| e.cost.estimated_cycles);

    let k = cfg.top_k.min(evaluated.len());
    if k > 0 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
        let inputs = random_inputs::<i64, _>(algebra, &mut rng);
        let want = reference_execute(algebra, &inputs)?;
        let opts = SimOptions {
            bandwidth_cap: cfg.bandwidth_cap,
            trace: false,
        };
        let sims: Vec<SimSummary> = evaluated[..k]
            .par_iter()
            .map(|e| {
                let arch = generate(algebra, &e.point.stt, gen_opts)?;
                let r = simulate(&arch, &inputs, opts)?;
                if r.output != want {
                    return Err(Error::Contract(format!("{} disagrees with the reference", e.point.name)));
                }
                Ok(SimSummary {
                    total_cycles: r.total_cycles,
                    compute_cycles: r.compute_cycles,
                    spatial_utilization: r.spatial_utilization,
                })
            })
            .collect::<Result<_>>()?;
        for (e, s) in evaluated.iter_mut().zip(sims) {
            e.cost.simulated = Some(s);
        }
    }
    let costs: Vec<&CostReport> = evaluated.iter().map(|e| &e.cost).collect();
    let pareto = pareto_front(&costs);
    Ok(Exploration {
        algebra: algebra.name.clone(),
        status: if evaluated.is_empty() {
            ExploreStatus::Empty
        } else {
            ExploreStatus::Ok
        },
        points: evaluated,
        pareto,
    })
}

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

impl Exploration {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "name,selection,T_flat,tiles,kinds,est_cycles,utilization,bw_peak,area_proxy,energy_proxy,sim_cycles\n",
        );
        for e in &self.points {
            let p = &e.point;
            let c = &e.cost;
            let kinds = join(p.dataflows.iter().map(|f| match f.sub_kind {
                Some(s) => format!("{}/{s:?}", f.kind),
                None => f.kind.to_string(),
            }));
            out.push_str(&format!(
                "{},{},{},{},{},{},{:.6},{},{},{},{}\n",
                p.name,
                join(p.selected_iterators.iter()),
                join(p.stt.flat()),
                join(p.tiles),
                kinds,
                c.estimated_cycles,
                c.spatial_utilization,
                c.bw_peak,
                c.area_proxy,
                c.energy_proxy,
                c.simulated.map(|s| s.total_cycles.to_string()).unwrap_or_default()
            ));
        }
        out
    }

    pub fn pareto_csv(&self) -> String {
        let mut lines = self.to_csv().lines().map(str::to_string).collect::<Vec<_>>();
        let head = lines.remove(0);
        let mut out = head + "\n";
        for &i in &self.pareto {
            out.push_str(&lines[i]);
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(c: u64, a: f64, e: f64) -> CostReport {
        CostReport {
            estimated_cycles: c,
            spatial_utilization: 1.0,
            bandwidth: Default::default(),
            bw_peak: 0,
            area_proxy: a,
            interconnect_area: 0.0,
            energy_proxy: e,
            approximate: false,
            simulated: None,
        }
    }

    #[test]
    fn front_drops_dominated() {
        let rs = [report(10, 5.0, 5.0), report(10, 6.0, 5.0), report(8, 9.0, 9.0), report(10, 5.0, 5.0)];
        let refs: Vec<&CostReport> = rs.iter().collect();
        assert_eq!(pareto_front(&refs), vec![0, 2, 3]);
    }
}
