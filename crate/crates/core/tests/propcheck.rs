// Copyright 2026 The mcenoc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

use mcenoc::propcheck::{
    check_core, check_core_with, check_network, check_network_with, coverage_report,
    exhaustive_small, Legality, Sampling, Status, Stimulus,
};
use mcenoc::switch::Mutation;
use mcenoc::tdm::{all_to_all_schedule, validate_schedule};
use mcenoc::topology::Topology;

#[test]
fn core_properties_hold_with_real_preconditions() {
    for bits in 1..=3 {
        for legality in [Legality::Legal, Legality::Unconstrained] {
            let r = check_core(bits, &Stimulus::new(9, 50_000, legality));
            for id in ["C1", "C15"] {
                let p = r.get(id).unwrap();
                assert_eq!(
                    p.status(),
                    Status::Pass,
                    "p={bits} {legality:?}\n{}",
                    r.table()
                );
                assert!(p.hits > 0);
            }
        }
    }
}

#[test]
fn forwarding_after_error_is_caught() {
    let r = check_core_with(
        1,
        &Stimulus::new(1, 50_000, Legality::Legal),
        Mutation::ForwardAfterErr,
    );
    let p = r.get("C15").unwrap();
    assert_eq!(p.status(), Status::Fail);
    let cx = &p.counterexamples[0];
    assert!(!cx.window.is_empty() && cx.window.len() <= 8);
    assert_eq!(r.get("C1").unwrap().status(), Status::Pass);
}

#[test]
fn ignoring_ownership_is_caught() {
    let r = check_core_with(
        2,
        &Stimulus::new(1, 50_000, Legality::Legal),
        Mutation::IgnoreOwnership,
    );
    assert_eq!(r.get("C1").unwrap().status(), Status::Fail);
}

#[test]
fn inverted_direction_is_caught_at_network_level() {
    let topo = Topology::new(8, 1).unwrap();
    let stim = Stimulus::new(3, 0, Legality::Legal);
    let r = check_network_with(
        &topo,
        &stim,
        Sampling::Random(50),
        Mutation::InvertDirection,
    )
    .unwrap();
    assert_eq!(r.get("N4").unwrap().status(), Status::Fail);
    // The same mutant is invisible to the switch-local monitors.
    let r = check_core_with(
        1,
        &Stimulus::new(3, 20_000, Legality::Legal),
        Mutation::InvertDirection,
    );
    assert!(!r.failed());
}

#[test]
fn every_pair_lands_on_its_decoded_destination() {
    let topo = Topology::new(8, 1).unwrap();
    let r = check_network(
        &topo,
        &Stimulus::new(5, 20_000, Legality::Legal),
        Sampling::Exhaustive,
    )
    .unwrap();
    let n4 = r.get("N4").unwrap();
    assert!(n4.evaluations >= 256);
    assert_eq!(n4.status(), Status::Pass, "{}", r.table());
    for id in ["C1", "C15"] {
        assert_eq!(r.get(id).unwrap().status(), Status::Pass, "{}", r.table());
    }
}

#[test]
fn four_port_network_random_pairs() {
    let topo = Topology::new(32, 2).unwrap();
    let r = check_network(
        &topo,
        &Stimulus::new(8, 5_000, Legality::Unconstrained),
        Sampling::Random(500),
    )
    .unwrap();
    assert!(!r.failed(), "{}", r.table());
    assert!(r.get("N4").unwrap().hits > 0);
}

#[test]
fn injected_target_error_skips_the_route() {
    let topo = Topology::new(8, 1).unwrap();
    let r = check_network(
        &topo,
        &Stimulus::new(2, 0, Legality::Unconstrained),
        Sampling::Exhaustive,
    )
    .unwrap();
    let n4 = r.get("N4").unwrap();
    assert!(n4.hits < n4.evaluations);
    assert_eq!(n4.failures, 0);
}

#[test]
fn exhaustive_permutations() {
    let r = exhaustive_small(8, 1).unwrap();
    let p = r.get("PERM").unwrap();
    assert_eq!((p.evaluations, p.failures), (40_320, 0));
    let r = exhaustive_small(8, 2).unwrap();
    assert_eq!(r.get("PERM").unwrap().failures, 0);
}

#[test]
fn coverage_marks_levels() {
    let core = check_core(1, &Stimulus::new(0, 10_000, Legality::Legal));
    let cov = coverage_report(std::slice::from_ref(&core), None);
    assert_eq!(cov.row("N4").unwrap().status, Status::Uncovered);
    assert_eq!(cov.row("C1").unwrap().status, Status::Pass);

    let topo = Topology::new(8, 1).unwrap();
    let net = check_network(
        &topo,
        &Stimulus::new(0, 2_000, Legality::Legal),
        Sampling::Random(64),
    )
    .unwrap();
    let sched = validate_schedule(&topo, &all_to_all_schedule(8, 20).unwrap());
    let cov = coverage_report(&[core, net], Some(&sched));
    for id in ["C1", "C15", "N4", "S4"] {
        assert_eq!(cov.row(id).unwrap().status, Status::Pass, "{}", cov.table());
    }
    assert_eq!(
        cov.row("S4").unwrap().checked_by,
        "validated statically in tdm"
    );
}
