//! Scratch timing probe for the heavy corpus benchmarks.

use std::time::Instant;

use dlq_core::cnf::ClassSet;
use dlq_core::corpus;
use dlq_core::interp::valuation;
use dlq_core::leakage::{Engine, EngineConfig, Prepared};

fn time_count(name: &str, engine: Engine, obs: &[(&str, u64)]) {
    let p = corpus::load_program(name).unwrap();
    let cfg = EngineConfig::with_engine(engine);
    let t = Instant::now();
    let mut prepared = Prepared::new(&p, &cfg).unwrap();
    let blast_ms = t.elapsed().as_secs_f64() * 1e3;
    eprintln!(
        "[{name} {} vars={} clauses={}]",
        engine.label(),
        prepared.formula().num_vars,
        prepared.formula().clauses.len()
    );
    let t = Instant::now();
    let c = prepared.count_preimage(&valuation(obs)).unwrap();
    let count_ms = t.elapsed().as_secs_f64() * 1e3;
    println!(
        "{name:22} {:9} vars={:6} clauses={:7} blast={blast_ms:8.1}ms construct={:9.1}ms count={count_ms:9.1}ms  -> {c}",
        engine.label(),
        prepared.formula().num_vars,
        prepared.formula().clauses.len(),
        prepared.construct_ms() - blast_ms,
    );
}

fn main() {
    let which: Vec<String> = std::env::args().skip(1).collect();
    let all = which.is_empty();
    let has = |s: &str| all || which.iter().any(|w| w == s);

    if has("popcount") {
        for e in [Engine::Cod, Engine::CiaBdd, Engine::CiaDnnf] {
            time_count("population_count", e, &[("o", 7)]);
        }
    }
    if has("shuffle") {
        for e in [Engine::Cod, Engine::CiaDnnf] {
            time_count("bit_shuffle", e, &[("o", 3)]);
        }
    }
    if has("shuffle-bdd") {
        time_count("bit_shuffle", Engine::CiaBdd, &[("o", 3)]);
    }
    if has("grade") {
        for e in [Engine::Cod, Engine::CiaBdd, Engine::CiaDnnf] {
            time_count("grade", e, &[("sum", 1)]);
        }
    }
    if has("grade-joint") {
        let p = corpus::load_program("grade").unwrap();
        let cfg = EngineConfig::with_engine(Engine::Cod);
        let mut prepared = Prepared::new(&p, &cfg).unwrap();
        let t = Instant::now();
        let joint = prepared
            .count(ClassSet::INPUT_COIN, Some(&valuation(&[("sum", 1)])))
            .unwrap();
        println!("grade joint  {:?} {joint}", t.elapsed());
    }
}
