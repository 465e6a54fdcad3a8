#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twinflow_core::circuit::{normalize, parse_netlist, CircuitGraph};

pub fn graph(text: &str) -> CircuitGraph {
    normalize(parse_netlist(text).unwrap()).unwrap()
}

/// Random fluid circuit with at most six segments, one of them a source.
/// Connection lines are shuffled when `shuffle` is given.
pub fn random_netlist(seed: u64, shuffle: Option<u64>) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=6);
    let mut out = format!("circuit rnd{seed} fluid\n");
    let mut roles = Vec::new();
    for i in 0..n {
        let role = if i == 0 {
            "source"
        } else {
            match rng.random_range(0..20) {
                0..=4 => "source",
                5..=10 => "sink",
                _ => "segment",
            }
        };
        out.push_str(&format!("{role} s{i}\n"));
        roles.push(role);
    }
    let edges = rng.random_range(n - 1..=n + 2);
    let mut decls = Vec::new();
    let mut lines = Vec::new();
    let mut dev = 0;
    for _ in 0..edges {
        let a = rng.random_range(0..n);
        let mut b = rng.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        let link = rng.random_range(0..5) == 0;
        let mut count = rng.random_range(0..=2);
        if count == 0 && (link || (roles[a] == "source" && roles[b] == "source")) {
            count = 1;
        }
        let mut chain = format!("s{a}");
        for _ in 0..count {
            let id = format!("d{dev}");
            dev += 1;
            if rng.random_range(0..10) < 3 {
                let (from, to) = if link && rng.random_bool(0.5) { (b, a) } else { (a, b) };
                decls.push(format!("checkvalve {id} : s{from} -> s{to}"));
            } else {
                decls.push(format!("actuator {id}"));
            }
            chain.push_str(&format!(" -- {id}"));
        }
        chain.push_str(&format!(" -- s{b}"));
        lines.push(format!("{} {chain}", if link { "link" } else { "connect" }));
    }
    if let Some(s) = shuffle {
        lines.shuffle(&mut ChaCha8Rng::seed_from_u64(s));
    }
    for d in decls {
        out.push_str(&d);
        out.push('\n');
    }
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    out
}
