use serde::Serialize;
use serde_json::json;
use torus_sir_core::simulator::{pair, run_tracked, TrackRecord};
use torus_sir_core::spectral::TrigPolynomial;

use super::{run_seed, RunOptions};
use crate::config::{test_function, ExperimentConfig};
use crate::error::Result;
use crate::formats::{write_events, write_snapshots, OutputDir};

#[derive(Debug, Serialize)]
struct Pairing {
    index: usize,
    susceptible: f64,
    infected: f64,
    recovered: f64,
    total: f64,
}

#[derive(Debug, Serialize)]
struct SummaryRecord<'a> {
    time: f64,
    susceptible: usize,
    infected: usize,
    recovered: usize,
    pairings: Vec<Pairing>,
    #[serde(skip_serializing_if = "Option::is_none")]
    track: Option<&'a TrackRecord>,
}

pub(super) fn run(config: &ExperimentConfig, options: &RunOptions, out: &mut OutputDir) -> Result<serde_json::Value> {
    let sim = config.simulation()?;
    let n = config.population()?;
    let replicates = options.replicates(config);
    let tests: Vec<TrigPolynomial> = sim.pairings.iter().map(|t| test_function(t)).collect::<Result<_>>()?;
    let track = match &sim.track {
        Some(t) => Some((test_function(&t.phi)?, t.sub_step)),
        None => None,
    };
    let mut runs = Vec::with_capacity(replicates);
    for r in 0..replicates {
        let seed = run_seed(config.seed, n, r);
        let sc = config.sim_config(n, seed)?;
        let output = match &track {
            Some((phi, h)) => run_tracked(&sc, std::slice::from_ref(phi), *h)?,
            None => torus_sir_core::simulator::run(&sc)?,
        };
        let tag = format!("r{r:04}");
        write_events(out, &format!("events_{tag}.csv"), &output.events)?;
        write_snapshots(out, &format!("snapshots_{tag}.csv"), &output.snapshots, !options.no_positions)?;
        let records: Vec<SummaryRecord> = output
            .snapshots
            .iter()
            .enumerate()
            .map(|(k, snap)| {
                let (s, i, rec) = snap.counts();
                let m = snap.empirical_measures();
                let pairings = tests
                    .iter()
                    .enumerate()
                    .map(|(index, phi)| Pairing {
                        index,
                        susceptible: pair(&m.susceptible, |x| phi.value(x)),
                        infected: pair(&m.infected, |x| phi.value(x)),
                        recovered: pair(&m.recovered, |x| phi.value(x)),
                        total: pair(&m.total, |x| phi.value(x)),
                    })
                    .collect();
                SummaryRecord {
                    time: snap.time,
                    susceptible: s,
                    infected: i,
                    recovered: rec,
                    pairings,
                    track: output.tracks.first().and_then(|t| t.records.get(k)),
                }
            })
            .collect();
        out.json_lines(&format!("summary_{tag}.jsonl"), &records)?;
        runs.push(json!({
            "replicate": r,
            "seed": seed,
            "events": output.events.len(),
            "proposals": output.stats.proposals,
            "accepted": output.stats.accepted,
        }));
    }
    let summary = json!({ "mode": "simulate", "n_agents": n, "replicates": replicates, "runs": runs });
    out.json("simulate.json", &summary)?;
    Ok(summary)
}
