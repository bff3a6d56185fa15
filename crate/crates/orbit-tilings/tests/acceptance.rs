//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line (run with `cargo test --test acceptance -- --nocapture` to see
//! them). Tolerances are zero unless a criterion states a runtime
//! budget, which is asserted from a wall-clock measurement.

use num_bigint::BigInt;
use num_rational::BigRational;
use orbit_tilings::crosssection::{extend_to_maximal, CandidateStream, LacunaryConfig};
use orbit_tilings::diophantine::{approx, n_of_eps};
use orbit_tilings::exactnum::QuadNum;
use orbit_tilings::geometry::{CrossSection, Point, Rect, Window};
use orbit_tilings::loe::{
    block_counts, block_map_units, covered_fraction, run_back_and_forth, verify_normalization,
    MeasuredUnit, OrbitFragmentProvider, Stage, Verdict,
};
use orbit_tilings::measures::{lift, product_identity_check, BoundedTiling, PullOperator, SectionMeasure};
use orbit_tilings::tiling::{
    all_tile_types, audit_partition, canonical_tiling, tile_window_bounded_sides, type_sizes,
};
use orbit_tilings::towers::{
    audit_limit, build_towers, limit_tiling, validate_spec, ShiftLedger, TowerSpec,
};
use rand::{Rng, SeedableRng};
use std::collections::BTreeMap;
use std::time::{Duration, Instant};

fn q(n: i64, d: i64) -> QuadNum {
    QuadNum::from_ratio(n, d)
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Run one criterion, print its PASS/FAIL line, enforce the budget.
fn criterion(number: u32, description: &str, budget: Option<Duration>, body: impl FnOnce()) {
    let start = Instant::now();
    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(body));
    let elapsed = start.elapsed();
    let status = if outcome.is_ok() { "PASS" } else { "FAIL" };
    println!(
        "[criterion {}] {} — {} ({:.2?})",
        number, status, description, elapsed
    );
    if let Err(panic) = outcome {
        std::panic::resume_unwind(panic);
    }
    if let Some(budget) = budget {
        assert!(
            elapsed < budget,
            "criterion {} exceeded its budget: {:.2?} >= {:.2?}",
            number,
            elapsed,
            budget
        );
    }
}

#[test]
fn criterion_1_exactness() {
    criterion(
        1,
        "field axioms on 10,000 random elements; partitions sum symbolically",
        Some(Duration::from_secs(5)),
        || {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xACCE_0001);
            let mut random = |nonzero: bool| loop {
                let v = QuadNum::from_parts(
                    rng.gen_range(-99..=99),
                    rng.gen_range(1..=30),
                    rng.gen_range(-99..=99),
                    rng.gen_range(1..=30),
                );
                if !nonzero || !v.is_zero() {
                    return v;
                }
            };
            for _ in 0..10_000 {
                let (x, y, z) = (random(false), random(false), random(false));
                assert_eq!((&x + &y) + &z, &x + &(&y + &z));
                assert_eq!((&x * &y) * &z, &x * &(&y * &z));
                assert_eq!(&x + &y, &y + &x);
                assert_eq!(&x * &y, &y * &x);
                assert_eq!(&x * &(&y + &z), &(&x * &y) + &(&x * &z));
                assert_eq!(&x + &(-&x), QuadNum::zero());
                let w = random(true);
                assert_eq!(w.div(&w), QuadNum::one());
            }
            // partitions produced by the tiling constructors sum to
            // their region volume exactly
            let window = Window::Box {
                rect: Rect::new(vec![q(0, 1); 2], vec![q(53, 5); 2]),
            };
            let t = tile_window_bounded_sides(&window, &q(2, 1), &rat(1, 2)).unwrap();
            t.audit().unwrap();
            let kappa = QuadNum::kappa();
            let r = Rect::new(vec![q(0, 1); 2], vec![QuadNum::from_int(3) * &kappa; 2]);
            let c = canonical_tiling(&window, &r).unwrap();
            c.audit().unwrap();
            let total: QuadNum = c
                .tiles
                .iter()
                .fold(QuadNum::zero(), |acc, t| acc + t.rect().volume());
            assert_eq!(total, r.volume());
        },
    );
}

#[test]
fn criterion_2_block_count_oracle_equivalence() {
    criterion(
        2,
        "block counts match the smallest-n scan and the dyadic window on the 0.01 grid",
        Some(Duration::from_secs(10)),
        || {
            let oracle = |zeta: &QuadNum, k: u32| -> u64 {
                let lo = &QuadNum::one() - &QuadNum::dyadic(k + 1);
                let side = QuadNum::dyadic(k);
                let mut n = 1u64;
                loop {
                    let ratio = (QuadNum::from_int(n as i64) * &side).div(zeta);
                    if ratio > lo && ratio < QuadNum::one() {
                        return n;
                    }
                    n += 1;
                }
            };
            for j in 0..=100 {
                let zeta = QuadNum::from_int(4) + q(j, 100);
                for k in 0..=6u32 {
                    let n = block_counts(&zeta, k);
                    assert_eq!(n, oracle(&zeta, k), "zeta=4+{}/100 k={}", j, k);
                    let f = covered_fraction(&zeta, k);
                    let lo = &QuadNum::one() - &QuadNum::dyadic(k + 1);
                    let hi = &QuadNum::one() - &QuadNum::dyadic(k + 2);
                    assert!(f > lo && f <= hi, "fraction {} escapes the window", f);
                }
                assert_eq!(block_counts(&zeta, 0), 3);
            }
            // the 8-vs-7 pair reproduces 28 vs 13 new B¹ blocks in d=2
            assert_eq!(block_counts(&q(5, 1), 1), 8);
            assert_eq!(block_counts(&q(4, 1), 1), 7);
            let b0 = 2 * block_counts(&q(5, 1), 0);
            assert_eq!(8 * 8 - b0 * b0 / 4 * 4, 28);
            assert_eq!(8u64 * 8 - 36, 28);
            assert_eq!(7u64 * 7 - 36, 13);
        },
    );
}

#[test]
fn criterion_3_diophantine_oracle() {
    criterion(
        3,
        "1,000 random approximations per ε verified against the exhaustive scan",
        Some(Duration::from_secs(30)),
        || {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xACCE_0003);
            let alpha = QuadNum::alpha();
            for eps in [rat(1, 2), rat(1, 10), rat(1, 20)] {
                let n = n_of_eps(&eps);
                let eps_q = QuadNum::from_big_rational(eps.clone());
                for _ in 0..1_000 {
                    let x = &n + &q(rng.gen_range(0..=10_000), 100);
                    let r = approx(&x, &eps).unwrap();
                    assert!(r.err.abs() < eps_q, "|err| >= eps at x = {}", x);
                    assert_eq!(r.value(), &x + &r.err);
                    // oracle: exhaustive scan over admissible pairs
                    use num_traits::ToPrimitive;
                    let cap = (&x + &eps_q).div(&alpha).floor_int().to_u64().unwrap();
                    let mut found = false;
                    let mut chosen_admissible = false;
                    for m2 in 0..=cap {
                        let r0 = &x - &(QuadNum::from_int(m2 as i64) * &alpha);
                        let f = r0.floor_int();
                        for cand in [f.clone(), &f + 1] {
                            if cand < BigInt::from(0) {
                                continue;
                            }
                            let v = QuadNum::from_bigint(cand.clone())
                                + QuadNum::from_int(m2 as i64) * &alpha;
                            if (&v - &x).abs() < eps_q {
                                found = true;
                                if cand == BigInt::from(r.m1) && m2 == r.m2 {
                                    chosen_admissible = true;
                                }
                            }
                        }
                    }
                    assert!(found, "oracle finds no admissible pair above N(eps)");
                    assert!(chosen_admissible, "chosen pair is not in the oracle's set");
                }
            }
        },
    );
}

#[test]
fn criterion_4_canonical_tiling_counts() {
    criterion(
        4,
        "canonical tilings have exactly K^d tiles of each of the 2^d types",
        None,
        || {
            let kappa = QuadNum::kappa();
            for d in 1..=3usize {
                for k in 1..=3i64 {
                    let side = QuadNum::from_int(k) * &kappa;
                    let window = Window::Box {
                        rect: Rect::new(vec![q(0, 1); d], vec![side.clone(); d]),
                    };
                    let r = Rect::new(vec![q(0, 1); d], vec![side; d]);
                    let t = canonical_tiling(&window, &r).unwrap();
                    t.audit().unwrap();
                    let expected = (k as usize).pow(d as u32);
                    let counts = t.type_counts();
                    assert_eq!(counts.len(), 1 << d);
                    for (_, n) in counts {
                        assert_eq!(n, expected, "d={} K={}", d, k);
                    }
                },
            }
        },
    );
}

#[test]
fn criterion_5_tower_audit() {
    criterion(
        5,
        "3-level d=2 tower passes the containment audits; shift ledger within Σ ε_k",
        Some(Duration::from_secs(60)),
        || {
            let spec = TowerSpec::with_defaults(2, 3, 1, 2);
            for (k, level) in spec.levels.iter().enumerate() {
                assert_eq!(level.eps, rat(1, 1 << (k + 1)));
            }
            assert!(validate_spec(&spec).is_empty());
            let side = QuadNum::from_int(4) * &spec.levels[2].l;
            let window = Window::Box {
                rect: Rect::new(vec![q(0, 1); 2], vec![side; 2]),
            };
            let family = build_towers(&window, &spec).unwrap();
            // (v) R_k-lacunarity, (vi) deep containment, (i) children
            family.audit().unwrap();
            assert_eq!(spec.depth(), 3);
            assert!(family.level_squares(1).len() > 1);
            // the ledger comes from actually running the extensions
            let limit = limit_tiling(&family).unwrap();
            limit.ledger.check_bounds(&spec).unwrap();
            let total_eps: BigRational = rat(1, 2) + rat(1, 4) + rat(1, 8);
            let bound = QuadNum::from_big_rational(total_eps);
            for acc in &limit.ledger.accumulated {
                assert!(ShiftLedger::sup_norm(acc) <= bound);
            }
        },
    );
}

#[test]
fn criterion_6_regular_tiling() {
    criterion(
        6,
        "limit tiling is an exact {1, α} partition with equal type counts and bijective θ",
        None,
        || {
            for (d, depth) in [(1usize, 3usize), (2, 2), (2, 3)] {
                let spec = TowerSpec::with_defaults(d, depth, 1, 2);
                let side = QuadNum::from_int(4) * &spec.levels[depth - 1].l;
                let window = Window::Box {
                    rect: Rect::new(vec![q(0, 1); d], vec![side; d]),
                };
                let family = build_towers(&window, &spec).unwrap();
                let limit = limit_tiling(&family).unwrap();
                // exact partition, per-region type counts, θ bijective
                // and label preserving, ledger bounds
                audit_limit(&family, &limit).unwrap();
                // every tile's sides are exactly 1 or α per its type
                for tile in &limit.tiling.tiles {
                    let rect = tile.rect();
                    for (axis, s) in type_sizes(&tile.tile_type).iter().enumerate() {
                        assert_eq!(rect.side(axis), *s);
                    }
                }
                let counts = limit.tiling.type_counts();
                let first = counts[0].1;
                assert!(first > 0);
                for (_, n) in &counts {
                    assert_eq!(*n, first, "d={} depth={}", d, depth);
                }
                assert_eq!(counts.len(), 1 << d);
            }
        },
    );
}

#[test]
fn criterion_7_back_and_forth_loe() {
    criterion(
        7,
        "level-3 back-and-forth on a 20-tile pair: injective, measure exact, Eq(6) coverage, LOE",
        Some(Duration::from_secs(120)),
        || {
            let mut x = OrbitFragmentProvider::new("fragment-x", 2, 0xACCE_0007, None);
            let mut y = OrbitFragmentProvider::new("fragment-y", 2, 0x0007_ACCE, None);
            let xs = x.issue_initial(20).unwrap();
            let ys = y.issue_initial(20).unwrap();
            let seed: Vec<(usize, usize)> = xs.into_iter().zip(ys).collect();
            let map = run_back_and_forth(&mut x, &mut y, &seed, 3).unwrap();
            // (a) two-sided injectivity
            map.audit_injectivity().unwrap();
            // (b) exact measure preservation per mapped unit
            map.audit_measure().unwrap();
            for pair in &map.pairs {
                assert_eq!(pair.source.measure(2), pair.target.measure(2));
            }
            // (c) per-axis coverage inside the dyadic window at each level
            assert_eq!(map.stage_reports.len(), 7); // forth 0..3 + back 1..3
            for report in &map.stage_reports {
                let k = match report.stage {
                    Stage::Forth(k) | Stage::Back(k) => k,
                };
                assert!(!report.full_tiles.is_empty());
                let lo = &QuadNum::one() - &QuadNum::dyadic(k + 1);
                let hi = &QuadNum::one() - &QuadNum::dyadic(k + 2);
                for (_, _, fractions) in &report.full_tiles {
                    for f in fractions {
                        assert!(f > &lo && f <= &hi);
                    }
                }
            }
            // (d) normalization constant and exactly one
            let units = block_map_units(&map, &x, &y);
            let report = verify_normalization(&units).unwrap();
            assert_eq!(report.verdict, Verdict::Loe);
            for ratio in report.per_label.values() {
                assert_eq!(*ratio, QuadNum::one());
            }
        },
    );
}

#[test]
fn criterion_8_measure_round_trip() {
    criterion(
        8,
        "ν_{μ_ν} = ν for 100 random measures over Voronoi and rectangular tilings, U-independent",
        None,
        || {
            // 1-D torus L = 4 with section {0, 2}; 2-D torus L = 4 with
            // the four even grid points
            let torus1 = Window::square_torus(1, q(4, 1));
            let torus2 = Window::square_torus(2, q(4, 1));
            let section1 = CrossSection::new(vec![Point(vec![q(0, 1)]), Point(vec![q(2, 1)])]);
            let section2 = CrossSection::new(vec![
                Point(vec![q(0, 1), q(0, 1)]),
                Point(vec![q(2, 1), q(0, 1)]),
                Point(vec![q(0, 1), q(2, 1)]),
                Point(vec![q(2, 1), q(2, 1)]),
            ]);
            let combos: Vec<(Window, CrossSection, BoundedTiling)> = vec![
                (
                    torus1.clone(),
                    section1.clone(),
                    BoundedTiling::Voronoi { window: torus1.clone(), section: section1.clone() },
                ),
                (
                    torus1.clone(),
                    section1.clone(),
                    BoundedTiling::Rectangular {
                        window: torus1.clone(),
                        pieces: section1
                            .points
                            .iter()
                            .map(|p| (p.clone(), Rect::centered_cube(1, q(1, 1))))
                            .collect(),
                    },
                ),
                (
                    torus2.clone(),
                    section2.clone(),
                    BoundedTiling::Voronoi { window: torus2.clone(), section: section2.clone() },
                ),
                (
                    torus2.clone(),
                    section2.clone(),
                    BoundedTiling::Rectangular {
                        window: torus2.clone(),
                        pieces: section2
                            .points
                            .iter()
                            .map(|p| (p.clone(), Rect::centered_cube(2, q(1, 1))))
                            .collect(),
                    },
                ),
            ];
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xACCE_0008);
            for (window, section, tiling) in combos {
                tiling.audit_partition().unwrap();
                let d = window.dim();
                let u_small = Rect::centered_cube(d, q(1, 4));
                let u_other = Rect::centered_cube(d, q(2, 5));
                let pull_small = PullOperator::new(&tiling, &section, &u_small).unwrap();
                let pull_other = PullOperator::new(&tiling, &section, &u_other).unwrap();
                for trial in 0..100 {
                    let weights: BTreeMap<Point, BigRational> = section
                        .points
                        .iter()
                        .map(|p| (p.clone(), rat(rng.gen_range(0..512), 64)))
                        .collect();
                    let nu = SectionMeasure::new(weights).unwrap();
                    let back = pull_small.apply(&nu).unwrap();
                    assert_eq!(back, nu, "round trip failed on trial {}", trial);
                    // the pull does not depend on the admissible body
                    let back_other = pull_other.apply(&nu).unwrap();
                    assert_eq!(back_other, nu);
                }
                // product identities hold through the lift
                let nu = SectionMeasure::uniform_on(&section, rat(3, 7)).unwrap();
                assert!(product_identity_check(&nu, &tiling, &u_small, 8).unwrap());
                let mu = lift(&nu, &tiling).unwrap();
                assert_eq!(
                    mu.total(),
                    QuadNum::from_big_rational(nu.total_mass())
                        * QuadNum::from_int(1)
                );
            }
        },
    );
}

#[test]
fn criterion_9_negative_controls() {
    criterion(
        9,
        "scaled maps yield wHOE-not-LOE; corrupted tilings and specs are rejected",
        None,
        || {
            // per-label scaling: wHOE but not LOE / HOE
            let unit = |ls: &str, lt: &str, s: QuadNum, t: QuadNum| MeasuredUnit {
                label_src: ls.into(),
                label_tgt: lt.into(),
                src_measure: s,
                tgt_measure: t,
            };
            let report = verify_normalization(&[
                unit("a", "a'", q(1, 4), q(1, 2)),
                unit("b", "b'", q(1, 8), q(1, 8)),
            ])
            .unwrap();
            assert_eq!(report.verdict, Verdict::Whoe);

            // corrupted tilings fail the partition audit
            let region = Rect::new(vec![q(0, 1); 2], vec![q(4, 1); 2]);
            let overlap = vec![
                Rect::new(vec![q(0, 1); 2], vec![q(3, 1), q(4, 1)]),
                Rect::new(vec![q(2, 1), q(0, 1)], vec![q(4, 1), q(4, 1)]),
            ];
            assert!(audit_partition(&[region.clone()], &overlap).is_err());
            let hole = vec![Rect::new(vec![q(0, 1); 2], vec![q(2, 1), q(4, 1)])];
            assert!(audit_partition(&[region.clone()], &hole).is_err());
            let outside = vec![
                Rect::new(vec![q(0, 1); 2], vec![q(2, 1), q(4, 1)]),
                Rect::new(vec![q(2, 1), q(0, 1)], vec![q(5, 1), q(4, 1)]),
            ];
            assert!(audit_partition(&[region], &outside).is_err());

            // each spec violation is reported by name
            let base = TowerSpec::with_defaults(2, 2, 1, 2);
            let mut s = base.clone();
            s.levels[0].b = q(7, 1);
            assert!(validate_spec(&s).iter().any(|v| v.contains("b_1") && v.contains("multiple")));
            let mut s = base.clone();
            s.levels[0].b = QuadNum::kappa();
            assert!(validate_spec(&s).iter().any(|v| v.contains("N(ε_1)")));
            let mut s = base.clone();
            s.levels[1].l = q(7, 1);
            assert!(validate_spec(&s).iter().any(|v| v.contains("l_2") && v.contains("multiple")));
            let mut s = base.clone();
            s.levels[1].l = QuadNum::kappa();
            assert!(validate_spec(&s).iter().any(|v| v.contains("l_2 = ") && v.contains("b̃_2")));
            let mut s = base.clone();
            s.levels[1].btilde = QuadNum::kappa();
            assert!(validate_spec(&s).iter().any(|v| v.contains("b̃_2")));
            let mut s = base.clone();
            s.levels[1].eps = rat(1, 2);
            assert!(validate_spec(&s).iter().any(|v| v.contains("ε_2")));
            let mut s = base;
            s.levels[0].eps = rat(3, 4);
            assert!(validate_spec(&s).iter().any(|v| v.contains("Σ ε_k")));

            // a maximal section refuses further points (maximality ⇔
            // U²-cocompactness at the window scale)
            let window = Window::square_torus(1, q(10, 1));
            let body = Rect::centered_cube(1, q(1, 1));
            let cfg = LacunaryConfig {
                body: body.clone(),
                stream: CandidateStream::Grid { base_mesh: q(1, 1), jitter_seed: None },
            };
            let report = extend_to_maximal(&window, &CrossSection::new(vec![]), &cfg, 4).unwrap();
            assert!(report.u2_cocompact);
        },
    );
}
