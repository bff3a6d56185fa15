use orbit_tilings::exactnum::QuadNum;
use orbit_tilings::geometry::{Rect, Window};
use orbit_tilings::loe::*;
use orbit_tilings::towers::*;
use std::time::Instant;

fn main() {
    // criterion 5 shape: d=2, 3 levels, defaults
    let t0 = Instant::now();
    let spec = TowerSpec::with_defaults(2, 3, 1, 2);
    for (i, l) in spec.levels.iter().enumerate() {
        println!("level {}: b={:.3} l={:.3} btilde={:.3}", i + 1, l.b.to_f64(), l.l.to_f64(), l.btilde.to_f64());
    }
    let side = QuadNum::from_int(4) * &spec.levels[2].l;
    let window = Window::Box { rect: Rect::new(vec![QuadNum::zero(); 2], vec![side; 2]) };
    let family = build_towers(&window, &spec).unwrap();
    family.audit().unwrap();
    println!("build+audit: {:?}, squares {}", t0.elapsed(), family.squares.len());
    let t1 = Instant::now();
    let limit = limit_tiling(&family).unwrap();
    println!("limit tiling: {:?}, tiles {}", t1.elapsed(), limit.tiling.tiles.len());
    let t2 = Instant::now();
    limit.ledger.check_bounds(&spec).unwrap();
    println!("ledger check: {:?}", t2.elapsed());
    let t2b = Instant::now();
    audit_limit(&family, &limit).unwrap();
    println!("full audit_limit: {:?}", t2b.elapsed());

    // criterion 7 shape: 20-tile pair, K=3
    let t3 = Instant::now();
    let mut x = OrbitFragmentProvider::new("x", 2, 101, None);
    let mut y = OrbitFragmentProvider::new("y", 2, 202, None);
    let xs = x.issue_initial(20).unwrap();
    let ys = y.issue_initial(20).unwrap();
    let seed: Vec<(usize, usize)> = xs.into_iter().zip(ys).collect();
    let map = run_back_and_forth(&mut x, &mut y, &seed, 3).unwrap();
    println!("back-and-forth: {:?}, pairs {}, x tiles {}, y tiles {}", t3.elapsed(), map.pairs.len(), x.tiles().len(), y.tiles().len());
    let t4 = Instant::now();
    map.audit_injectivity().unwrap();
    map.audit_measure().unwrap();
    let units = block_map_units(&map, &x, &y);
    let report = verify_normalization(&units).unwrap();
    println!("audits+verify: {:?}, verdict {:?}", t4.elapsed(), report.verdict);
}
// appended second probe
