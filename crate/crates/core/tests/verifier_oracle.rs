//! The bounded engine agrees with a naive full-interleaving interpreter on
//! seeded random models.

mod support;

use std::time::{Duration, Instant};

use bleproof_core::pvlang::{render, QuerySpec};
use bleproof_core::verifier::{check_query, Bounds, VerdictStatus};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use support::gen::{model, Shape};
use support::oracle::judge;

const MODELS: usize = 200;
const SEED: u64 = 0x05ee_db1e;
const TERM_DEPTH: usize = 2;
const BUDGET: Duration = Duration::from_secs(60);

#[test]
fn engine_matches_oracle_on_random_models() {
    let mut rng = StdRng::seed_from_u64(SEED);
    let start = Instant::now();
    let mut violated = [0usize; 3];
    for i in 0..MODELS {
        let b = rng.gen_range(1..=2);
        let shape = Shape { max_steps: 6, max_inputs: 3, max_input_sites: 2, session_bound: b };
        let m = model(&mut rng, &shape);
        let bounds = Bounds { session_bound: b, term_depth: TERM_DEPTH, ..Bounds::default() };
        let oracle = judge(&m, b, TERM_DEPTH);
        let emits_accept = m.main_process.emitted_events().contains(&"accept");
        for (slot, q) in m.queries.iter().enumerate() {
            let v = check_query(&m, q, bounds);
            let expected = match q {
                QuerySpec::Secrecy { .. } => oracle.secrecy_violated,
                QuerySpec::Correspondence { .. } => {
                    assert_eq!(
                        v.vacuous,
                        !oracle.end_reached && !oracle.correspondence_violated,
                        "model {i} vacuity\n{}",
                        render(&m)
                    );
                    oracle.correspondence_violated
                }
                QuerySpec::Freshness { .. } if !emits_accept => {
                    assert_eq!(v.status, VerdictStatus::NotApplicable, "model {i}");
                    continue;
                }
                QuerySpec::Freshness { .. } => oracle.freshness_violated,
            };
            let want = if expected { VerdictStatus::Violated } else { VerdictStatus::Holds };
            assert_eq!(v.status, want, "model {i} (B={b}) query {}\n{}", q.label(), render(&m));
            violated[slot % 3] += expected as usize;
        }
    }
    let elapsed = start.elapsed();
    eprintln!("{MODELS} models in {elapsed:?}; violations per query slot {violated:?}");
    assert!(elapsed < BUDGET, "took {elapsed:?}");
    // the generator must exercise both outcomes of every property
    assert!(violated.iter().all(|&n| n > 0 && n < MODELS), "{violated:?}");
}
