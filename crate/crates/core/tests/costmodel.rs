// Copyright 2026 The opsflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


use opsflow_core::costmodel::{
    closed_form, headlines, lt, reduction, sweep, sweep_csv, toc, to_f64, Cost, CostKind, CostParams, Method, Param, Scenario,
    StepTable,
};

const SCENARIOS: [Scenario; 2] = [Scenario::AddOrg, Scenario::DeployCc];
const METHODS: [Method; 2] = [Method::Conventional, Method::Proposed];
const KINDS: [CostKind; 2] = [CostKind::Toc, CostKind::Lt];

fn grid() -> impl Iterator<Item = CostParams> {
    (1..=50).flat_map(|n| (0..=10).flat_map(move |ch| (0..=10).map(move |cc| CostParams::new(n, ch, cc))))
}

#[test]
fn step_sums_equal_closed_forms_on_the_whole_grid() {
    let mut checked = 0;
    for s in SCENARIOS {
        for m in METHODS {
            let table = StepTable::new(s, m);
            for p in grid() {
                assert_eq!(toc(&table, &p), closed_form(s, m, CostKind::Toc, &p), "{s:?} {m:?} toc {p:?}");
                assert_eq!(lt(&table, &p), closed_form(s, m, CostKind::Lt, &p), "{s:?} {m:?} lt {p:?}");
                checked += 2;
            }
        }
    }
    assert_eq!(checked, 4 * 2 * 50 * 11 * 11);
}

#[test]
fn costs_are_monotone_in_every_parameter() {
    for s in SCENARIOS {
        for m in METHODS {
            let table = StepTable::new(s, m);
            for k in KINDS {
                for p in grid() {
                    let here = table.cost(k, &p);
                    for v in [Param::N, Param::Ch, Param::Cc] {
                        let next = p.with(v, p.get(v) + 1);
                        assert!(table.cost(k, &next) >= here, "{s:?} {m:?} {k:?} {p:?} +{v}");
                    }
                }
            }
        }
    }
}

#[test]
fn proposed_never_exceeds_conventional() {
    for s in SCENARIOS {
        let conv = StepTable::new(s, Method::Conventional);
        let prop = StepTable::new(s, Method::Proposed);
        for k in KINDS {
            for p in grid() {
                assert!(prop.cost(k, &p) <= conv.cost(k, &p), "{s:?} {k:?} {p:?}");
            }
        }
    }
}

#[test]
fn reduction_converges_to_one_third() {
    let p = CostParams::new(1_000_000, 2, 2);
    let conv = toc(&StepTable::new(Scenario::AddOrg, Method::Conventional), &p);
    let prop = toc(&StepTable::new(Scenario::AddOrg, Method::Proposed), &p);
    let ratio = to_f64(prop / conv);
    assert!((ratio - 2.0 / 3.0).abs() / (2.0 / 3.0) < 0.01, "{ratio}");
    assert!((to_f64(reduction(conv, prop)) - 1.0 / 3.0).abs() < 0.01);
}

#[test]
fn headline_values() {
    let h = headlines();
    let pick = |i: usize| (h[i].conventional, h[i].proposed, to_f64(h[i].reduction));
    let (c, p, r) = pick(0);
    assert_eq!((c, p), (Cost::from_integer(59), Cost::from_integer(30)));
    assert!((r - 0.4915).abs() < 0.01);
    let (c, p, r) = pick(1);
    assert_eq!((c, p), (Cost::from_integer(64), Cost::from_integer(12)));
    assert!((r - 0.8125).abs() < 1e-12);
    let (c, p, r) = pick(2);
    assert_eq!((c, p), (Cost::from_integer(79), Cost::from_integer(36)));
    assert!((r - 0.544).abs() < 0.01);
}

#[test]
fn sweeps_have_the_expected_shape() {
    let s1 = sweep(Scenario::AddOrg, CostKind::Toc, CostParams::new(1, 2, 2), Param::N, 2..=20);
    assert_eq!(s1.len(), 19);
    assert_eq!(s1.first().unwrap().x, 2);
    assert_eq!(s1.last().unwrap().x, 20);
    let at10 = s1.iter().find(|r| r.x == 10).unwrap();
    assert_eq!(reduction(at10.conventional, at10.proposed), Cost::new(29, 59));

    let s2 = sweep(Scenario::DeployCc, CostKind::Lt, CostParams::new(10, 2, 1), Param::Cc, 2..=10);
    assert_eq!(s2.len(), 9);
    for r in &s2 {
        assert_eq!(r.conventional / r.proposed, Cost::new(5, 2));
    }
    let csv = sweep_csv(&s2);
    assert_eq!(csv.lines().count(), 10);
    assert!(csv.starts_with("x,conventional,proposed,reduction\n2,10,4,0.600000\n"));
}
