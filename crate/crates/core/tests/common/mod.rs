#![allow(dead_code)]

pub mod lp_oracles;

use wdp::generators::{generate, Family, GeneratorSpec};
use wdp::rng::SeededRng;
use wdp::Auction;

/// Small auction (at most 12 bids, 5 goods, 3 units per good) from a
/// family picked by `seed`, so that exhaustive enumeration stays cheap.
pub fn small_instance(seed: u64) -> Auction {
    small_spec(seed).and_then(|s| generate(&s).ok()).expect("small instance")
}

pub fn small_spec(seed: u64) -> Option<GeneratorSpec> {
    let mut rng = SeededRng::new(seed);
    let family = Family::all_defaults()[rng.below(6) as usize];
    let goods = rng.between(1, 5) as usize;
    let bids = rng.between(1, 12) as usize;
    let mut spec = GeneratorSpec::new(family, goods, bids, rng.next_u64());
    match family {
        Family::CamusMultiUnit => {
            spec.units_low = 1;
            spec.units_high = rng.between(1, 3);
            spec.max_quantity = 3;
        }
        Family::SandholmUniform { .. } => {
            spec.family = Family::SandholmUniform {
                set_size: rng.between(1, goods as u32) as usize,
            };
        }
        Family::CatsMultipaths => {
            spec.alternatives = rng.between(1, 3) as usize;
        }
        _ => {}
    }
    spec.validate().ok().map(|_| spec)
}

/// Seeds whose small instance generates without error, in order.
pub fn small_instances(count: usize, base: u64) -> Vec<(u64, Auction)> {
    (base..)
        .filter_map(|s| small_spec(s).and_then(|spec| generate(&spec).ok()).map(|a| (s, a)))
        .take(count)
        .collect()
}
