//! Peer/bibliometric agreement on synthetic corpora across seeds.
//!
//! `cargo run --release --example dial -- <peer_noise> <n_seeds> [config-json]`

use research_assess::indicators::Scenario;
use research_assess::pipeline;
use research_assess::ranklab::{build_ranklist, spearman};
use research_assess::synthgen::{generate_in_memory, SynthConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let noise: f64 = args.get(1).map_or(1.0, |s| s.parse().expect("peer_noise"));
    let seeds: u64 = args.get(2).map_or(1, |s| s.parse().expect("seed count"));
    let base: SynthConfig = match args.get(3) {
        Some(j) => serde_json::from_str(j).expect("config json"),
        None => SynthConfig::default(),
    };
    let mut all = Vec::new();
    for seed in 0..seeds {
        let cfg = SynthConfig { peer_noise: noise, seed: base.seed + seed, ..base.clone() };
        let c = generate_in_memory(&cfg).expect("corpus");
        let imp = pipeline::impact(&c);
        let peer = pipeline::peer_scores(&pipeline::peer_tables(&c).expect("peer"));
        let ex = pipeline::excellence_score_table(
            &pipeline::excellence(&c, &imp, Scenario::B).expect("excellence"),
        );
        let mut line = format!("seed {:>3} R={} P={}", cfg.seed, c.roster().len(), c.publications().len());
        for (u, p) in &peer {
            let r = spearman(&build_ranklist(p, u).unwrap(), &build_ranklist(&ex[u], u).unwrap()).unwrap();
            line.push_str(&format!(" {u}={:.3}", r.rho));
            all.push(r.rho);
        }
        println!("{line}");
    }
    all.sort_by(f64::total_cmp);
    let abs_med = {
        let mut a: Vec<f64> = all.iter().map(|x| x.abs()).collect();
        a.sort_by(f64::total_cmp);
        a[a.len() / 2]
    };
    println!("min {:.3}  median {:.3}  median|rho| {:.3}", all[0], all[all.len() / 2], abs_med);
}
