//! Library-level run of the whole pipeline on a small synthetic system.

use liqnet::contagion::{run_all_seeds, SimulationInput};
use liqnet::synth::{self, SynthConfig};
use liqnet::*;

const YEAR: i32 = 2010;

fn data() -> synth::SynthData {
    let cfg = SynthConfig { banks: 15, countries: 3, first_year: YEAR, last_year: 2011, seed: 5, ..Default::default() };
    synth::generate(&cfg).unwrap()
}

fn ensemble(d: &synth::SynthData) -> Vec<ReconstructedNetwork> {
    let banks: Vec<_> = d.banks.iter().filter(|b| b.year == YEAR).cloned().collect();
    let cfg = ReconstructionConfig { ensemble_size: 4, seed: 11, ..Default::default() };
    generate_ensemble(&banks, &d.bis, &cfg).unwrap()
}

fn run(d: &synth::SynthData, nets: &[ReconstructedNetwork], variant: Variant) -> (Vec<Trajectory>, EnsembleResult) {
    let table = IndicatorTable::build(&d.banks, Some(&d.spreads), Pooling::AllYears).unwrap();
    let graphs: Vec<_> = nets.iter().map(ContagionGraph::from_network).collect();
    let terms: Vec<_> = graphs.iter().map(|g| NodeTerms::from_indicators(g, &table, YEAR).unwrap()).collect();
    let inputs: Vec<_> = graphs
        .iter()
        .zip(&terms)
        .enumerate()
        .map(|(network, (graph, terms))| SimulationInput { network, graph, terms })
        .collect();
    let cfg = ContagionConfig { variant, seed: 3, ..Default::default() };
    let trajs: Vec<_> = run_all_seeds(YEAR, &inputs, &cfg).unwrap().into_iter().map(|(_, t)| t).collect();
    let result = EnsembleResult::from_trajectories(YEAR, &trajs, &nets[0].nodes, &cfg).unwrap();
    (trajs, result)
}

#[test]
fn members_meet_their_strength_targets() {
    let d = data();
    for net in ensemble(&d) {
        assert_eq!(net.year, YEAR);
        let w = &net.weights;
        for (i, node) in net.nodes.iter().enumerate() {
            assert_eq!(w.get(i, i), 0.0);
            if node.assets > 0.0 {
                assert!((w.row_sum(i) - node.assets).abs() <= 1e-6 * node.assets, "{}", node.bank_id);
            }
        }
        assert_eq!(net.nodes.iter().filter(|n| n.is_ground).count(), 1);
    }
}

#[test]
fn networks_survive_a_file_roundtrip() {
    let d = data();
    let dir = tempfile::tempdir().unwrap();
    for net in ensemble(&d) {
        let path = io::write_network(dir.path(), &net).unwrap();
        assert_eq!(io::read_network(&path).unwrap(), net);
    }
}

#[test]
fn every_variant_seeds_each_real_bank_once() {
    let d = data();
    let nets = ensemble(&d);
    let real = nets[0].nodes.iter().filter(|n| !n.is_ground).count();
    for v in Variant::ALL {
        let (trajs, r) = run(&d, &nets, v);
        assert_eq!(r.runs, nets.len() * real, "{v:?}");
        assert_eq!(trajs.len(), r.runs);
        for w in Weighting::BOTH {
            let b = r.bankruptcy(w);
            assert!((0.0..=1.0).contains(&b.mean), "{v:?} {w:?}: {}", b.mean);
            assert!(b.lower <= b.mean && b.mean <= b.upper);
        }
        for t in &trajs {
            let s = t.last();
            assert!((s.s + s.i1 + s.i2 - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn reruns_are_identical() {
    let d = data();
    let a = ensemble(&d);
    assert_eq!(a, ensemble(&d));
    assert_eq!(run(&d, &a, Variant::NtResTheta), run(&d, &a, Variant::NtResTheta));
}
