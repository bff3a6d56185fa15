//! Command-line front end: one subcommand per pipeline, JSON artifacts
//! with exact symbolic numbers, optional SVG for d = 2, and seeded
//! determinism (same flags + seed give byte-identical JSON).
//!
//! Exit codes: 0 success/PASS, 1 verification FAIL, 2 usage error.
//! Set RT_LOG=1 for progress notes on stderr.

use clap::{Args, Parser, Subcommand};
use num_bigint::BigInt;
use num_rational::BigRational;
use orbit_tilings::crosssection::{extend_to_maximal, CandidateStream, LacunaryConfig};
use orbit_tilings::diophantine::{approx, n_of_eps, partition_exact};
use orbit_tilings::exactnum::QuadNum;
use orbit_tilings::geometry::{CrossSection, Point, Rect, Window};
use orbit_tilings::loe::{
    block_map_units, regular_tiling_loe, run_back_and_forth, tile_bijection_units,
    verify_normalization, OrbitFragmentProvider, Verdict,
};
use orbit_tilings::measures::{lift, product_identity_check, pull, BoundedTiling, SectionMeasure};
use orbit_tilings::svg;
use orbit_tilings::towers::{
    audit_limit, build_towers, coverage_report, limit_tiling, validate_spec, TowerSpec,
};
use orbit_tilings::JSON_SCHEMA_VERSION;
use rand::{Rng, SeedableRng};
use serde::Serialize;
use serde_json::json;
use std::collections::BTreeMap;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "orbit-tilings", version, about = "exact tilings and orbit equivalence on finite windows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutputArgs {
    /// Write the JSON artifact here instead of stdout.
    #[arg(long)]
    out: Option<String>,
    /// Write an SVG rendering here (d = 2 commands only).
    #[arg(long)]
    svg: Option<String>,
    /// Output format (only "json" is defined).
    #[arg(long, default_value = "json")]
    format: String,
}

#[derive(Subcommand)]
enum Command {
    /// Greedily extend a lacunary cross-section to maximality.
    CrossSection {
        #[arg(long, default_value_t = 1)]
        d: usize,
        /// Torus period per axis.
        #[arg(long, default_value = "10")]
        period: String,
        /// Half-width of the symmetric lacunarity body U.
        #[arg(long, default_value = "1")]
        body: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        rounds: u32,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Measure transfer between torus and cross-section.
    Measures {
        #[command(subcommand)]
        action: MeasuresAction,
    },
    /// Two-term approximation x ≈ m1 + m2·α.
    Approx {
        #[arg(long)]
        x: String,
        #[arg(long)]
        eps: String,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Canonical {1, α} partition of a length m1 + m2·α.
    Partition {
        #[arg(long)]
        len: String,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Build a Rokhlin tower hierarchy and its regular tiling.
    Towers {
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 2)]
        levels: usize,
        /// Window side as a multiple of the top square side 2·l_K.
        #[arg(long, default_value_t = 2)]
        window_mult: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Back-and-forth block map between two orbit fragments.
    Loe {
        #[arg(long, default_value_t = 2)]
        levels: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        d: usize,
        /// Initial tiles per fragment.
        #[arg(long, default_value_t = 3)]
        tiles: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// towers → regular tiling → tile bijection → normalization.
    Pipeline {
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 1)]
        levels: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Subcommand)]
enum MeasuresAction {
    /// Check ν_{μ_ν} = ν and the product identities on a torus.
    RoundTrip {
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, default_value = "4")]
        period: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
}

fn verbose() -> bool {
    std::env::var("RT_LOG").is_ok()
}

fn note(msg: &str) {
    if verbose() {
        eprintln!("[orbit-tilings] {}", msg);
    }
}

/// Accepts "n", "n/d", and "r+sa" with the trailing `a` standing for
/// α = √2 (e.g. "3+2a" is 3 + 2√2); each part may be a fraction.
fn parse_quad(s: &str) -> Result<QuadNum, String> {
    let parse_ratio = |t: &str| -> Result<BigRational, String> {
        let t = t.trim();
        if let Some((n, d)) = t.split_once('/') {
            let n: BigInt = n.trim().parse().map_err(|_| format!("bad number: {}", t))?;
            let d: BigInt = d.trim().parse().map_err(|_| format!("bad number: {}", t))?;
            Ok(BigRational::new(n, d))
        } else {
            let n: BigInt = t.parse().map_err(|_| format!("bad number: {}", t))?;
            Ok(BigRational::from_integer(n))
        }
    };
    let s = s.trim();
    if let Some((rat, irr)) = s.split_once('+') {
        let irr = irr
            .trim()
            .strip_suffix(['a', 'A'])
            .ok_or_else(|| format!("expected an α coefficient like 2a in {}", s))?;
        let irr = if irr.is_empty() { "1" } else { irr };
        Ok(QuadNum::new(parse_ratio(rat)?, parse_ratio(irr)?))
    } else if let Some(irr) = s.strip_suffix(['a', 'A']) {
        let irr = if irr.is_empty() { "1" } else { irr };
        Ok(QuadNum::new(BigRational::from_integer(BigInt::from(0)), parse_ratio(irr)?))
    } else {
        Ok(QuadNum::new(parse_ratio(s)?, BigRational::from_integer(BigInt::from(0))))
    }
}

fn parse_eps(s: &str) -> Result<BigRational, String> {
    let q = parse_quad(s)?;
    if !q.is_rational() {
        return Err("eps must be rational".into());
    }
    Ok(q.rat().clone())
}

fn emit(output: &OutputArgs, value: &serde_json::Value) -> Result<(), String> {
    if output.format != "json" {
        return Err(format!("unknown format: {}", output.format));
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    match &output.out {
        Some(path) => std::fs::write(path, text + "\n").map_err(|e| e.to_string())?,
        None => println!("{}", text),
    }
    Ok(())
}

fn write_svg(output: &OutputArgs, content: Option<String>) -> Result<(), String> {
    if let Some(path) = &output.svg {
        let content = content.ok_or("this command has no SVG output for d != 2")?;
        std::fs::write(path, content).map_err(|e| e.to_string())?;
        note(&format!("svg written to {}", path));
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("serializable artifact")
}

fn run(cli: Cli) -> Result<u8, String> {
    match cli.command {
        Command::CrossSection { d, period, body, seed, rounds, output } => {
            let period = parse_quad(&period)?;
            let body_half = parse_quad(&body)?;
            let window = Window::square_torus(d, period.clone());
            let u = Rect::centered_cube(d, body_half);
            let cfg = LacunaryConfig {
                body: u.clone(),
                stream: CandidateStream::Grid {
                    base_mesh: period.div(&QuadNum::from_int(8)),
                    jitter_seed: Some(seed),
                },
            };
            let report = extend_to_maximal(&window, &CrossSection::new(vec![]), &cfg, rounds)
                .map_err(|e| e.to_string())?;
            note(&format!(
                "{} points, U²-cocompact: {}",
                report.section.len(),
                report.u2_cocompact
            ));
            let doc = json!({
                "schema": JSON_SCHEMA_VERSION,
                "command": "cross-section",
                "points": to_json(&report.section.points),
                "lacunarity_body": to_json(&u),
                "cocompactness_radius_certificate": {
                    "body_doubled_cocompact": report.u2_cocompact,
                    "rounds": report.rounds,
                    "accepted": report.accepted,
                },
            });
            emit(&output, &doc)?;
            let scene = (d == 2).then(|| svg::render_cross_section(&window, &report.section, Some(&u)));
            write_svg(&output, scene)?;
            Ok(if report.u2_cocompact { 0 } else { 1 })
        }
        Command::Measures { action } => match action {
            MeasuresAction::RoundTrip { d, period, seed, output } => {
                let period = parse_quad(&period)?;
                let window = Window::square_torus(d, period.clone());
                // section on a step-2 grid
                let step = QuadNum::from_int(2);
                let mut coords: Vec<Vec<QuadNum>> = vec![Vec::new()];
                for _ in 0..d {
                    let mut next = Vec::new();
                    let mut x = QuadNum::zero();
                    while x < period {
                        for p in &coords {
                            let mut v = p.clone();
                            v.push(x.clone());
                            next.push(v);
                        }
                        x += &step;
                    }
                    coords = next;
                }
                let section = CrossSection::new(coords.into_iter().map(Point).collect());
                let tiling = BoundedTiling::Voronoi { window: window.clone(), section: section.clone() };
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let weights: BTreeMap<Point, BigRational> = section
                    .points
                    .iter()
                    .map(|p| {
                        (
                            p.clone(),
                            BigRational::new(BigInt::from(rng.gen_range(1..64)), BigInt::from(64)),
                        )
                    })
                    .collect();
                let nu = SectionMeasure::new(weights).map_err(|e| e.to_string())?;
                let u = Rect::centered_cube(d, QuadNum::from_ratio(1, 4));
                let mu = lift(&nu, &tiling).map_err(|e| e.to_string())?;
                let back = pull(&mu, &section, &u).map_err(|e| e.to_string())?;
                let round_trip_ok = back == nu;
                let product_ok =
                    product_identity_check(&nu, &tiling, &u, seed).map_err(|e| e.to_string())?;
                let doc = json!({
                    "schema": JSON_SCHEMA_VERSION,
                    "command": "measures round-trip",
                    "section": to_json(&section.points),
                    "nu": to_json(&nu),
                    "mu_total": to_json(&mu.total()),
                    "nu_total": [nu.total_mass().numer().to_string(), nu.total_mass().denom().to_string()],
                    "pulled_back": to_json(&back),
                    "round_trip_exact": round_trip_ok,
                    "product_identity": product_ok,
                    "verdict": if round_trip_ok && product_ok { "PASS" } else { "FAIL" },
                });
                emit(&output, &doc)?;
                Ok(if round_trip_ok && product_ok { 0 } else { 1 })
            }
        },
        Command::Approx { x, eps, output } => {
            let x = parse_quad(&x)?;
            let eps = parse_eps(&eps)?;
            let result = approx(&x, &eps).map_err(|e| e.to_string())?;
            let doc = json!({
                "schema": JSON_SCHEMA_VERSION,
                "command": "approx",
                "m1": result.m1,
                "m2": result.m2,
                "err": to_json(&result.err),
                "threshold": to_json(&n_of_eps(&eps)),
            });
            emit(&output, &doc)?;
            Ok(0)
        }
        Command::Partition { len, output } => {
            let len = parse_quad(&len)?;
            let part = partition_exact(&len).map_err(|e| e.to_string())?;
            let doc = json!({
                "schema": JSON_SCHEMA_VERSION,
                "command": "partition",
                "labels": to_json(&part.labels),
                "boundaries": to_json(&part.boundaries()),
            });
            emit(&output, &doc)?;
            Ok(0)
        }
        Command::Towers { d, levels, window_mult, seed, output } => {
            let _ = seed; // the construction is fully deterministic
            let spec = TowerSpec::with_defaults(d, levels, 1, 2);
            let violations = validate_spec(&spec);
            if !violations.is_empty() {
                return Err(format!("spec invalid: {:?}", violations));
            }
            let side = QuadNum::from_int(2 * window_mult as i64)
                * &spec.levels.last().expect("at least one level").l;
            let window = Window::Box {
                rect: Rect::new(vec![QuadNum::zero(); d], vec![side; d]),
            };
            note("building tower family");
            let family = build_towers(&window, &spec).map_err(|e| e.to_string())?;
            family.audit().map_err(|e| e.to_string())?;
            note(&format!("{} squares; tiling", family.squares.len()));
            let limit = limit_tiling(&family).map_err(|e| e.to_string())?;
            audit_limit(&family, &limit).map_err(|e| e.to_string())?;
            let coverage = coverage_report(&family);
            let doc = json!({
                "schema": JSON_SCHEMA_VERSION,
                "command": "towers",
                "family": to_json(&family),
                "ledger": to_json(&limit.ledger),
                "tiling": to_json(&limit.tiling),
                "matchings": to_json(&limit.theta),
                "type_counts": to_json(&limit.tiling.type_counts()),
                "coverage": to_json(&coverage),
                "residual_shift_bound": [
                    limit.residual_shift_bound.numer().to_string(),
                    limit.residual_shift_bound.denom().to_string()
                ],
                "snap_fallback_used": limit.snap_fallback_used,
            });
            emit(&output, &doc)?;
            let scene = (d == 2).then(|| svg::render_regular_tiling(&limit.tiling));
            write_svg(&output, scene)?;
            Ok(0)
        }
        Command::Loe { levels, seed, d, tiles, output } => {
            let mut x = OrbitFragmentProvider::new("x", d, seed.wrapping_mul(2).wrapping_add(1), None);
            let mut y = OrbitFragmentProvider::new("y", d, seed.wrapping_mul(2).wrapping_add(2), None);
            let xs = x.issue_initial(tiles).map_err(|e| e.to_string())?;
            let ys = y.issue_initial(tiles).map_err(|e| e.to_string())?;
            let pairing: Vec<(usize, usize)> = xs.into_iter().zip(ys).collect();
            note("running back-and-forth");
            let map = run_back_and_forth(&mut x, &mut y, &pairing, levels).map_err(|e| e.to_string())?;
            map.audit_injectivity().map_err(|e| e.to_string())?;
            map.audit_measure().map_err(|e| e.to_string())?;
            let units = block_map_units(&map, &x, &y);
            let report = verify_normalization(&units).map_err(|e| e.to_string())?;
            let is_loe = report.verdict == Verdict::Loe;
            let doc = json!({
                "schema": JSON_SCHEMA_VERSION,
                "command": "loe",
                "levels": levels,
                "x_tiles": to_json(&x.tiles()),
                "y_tiles": to_json(&y.tiles()),
                "pairs": to_json(&map.pairs),
                "stage_reports": to_json(&map.stage_reports),
                "total_mapped_measure": to_json(&map.total_mapped_measure()),
                "normalization": to_json(&report),
            });
            emit(&output, &doc)?;
            Ok(if is_loe { 0 } else { 1 })
        }
        Command::Pipeline { d, levels, seed, output } => {
            let spec = TowerSpec::with_defaults(d, levels, 1, 2);
            let side = QuadNum::from_int(4) * &spec.levels.last().expect("levels >= 1").l;
            let window_x = Window::Box {
                rect: Rect::new(vec![QuadNum::zero(); d], vec![side.clone(); d]),
            };
            // the other fragment lives in a translated copy of the window
            let offset = QuadNum::from_int(3) * &side;
            let window_y = Window::Box {
                rect: Rect::new(vec![offset.clone(); d], vec![&offset + &side; d]),
            };
            note("building both tower tilings");
            let fx = build_towers(&window_x, &spec).map_err(|e| e.to_string())?;
            let fy = build_towers(&window_y, &spec).map_err(|e| e.to_string())?;
            let lx = limit_tiling(&fx).map_err(|e| e.to_string())?;
            let ly = limit_tiling(&fy).map_err(|e| e.to_string())?;
            audit_limit(&fx, &lx).map_err(|e| e.to_string())?;
            audit_limit(&fy, &ly).map_err(|e| e.to_string())?;
            use orbit_tilings::diophantine::SegLabel;
            let ones = |t: &orbit_tilings::tiling::RegularTiling| -> Vec<usize> {
                let mut v: Vec<usize> = (0..t.tiles.len())
                    .filter(|i| t.tiles[*i].tile_type.iter().all(|l| *l == SegLabel::One))
                    .collect();
                v.sort_by(|a, b| t.tiles[*a].anchor.cmp(&t.tiles[*b].anchor));
                v
            };
            let ones_x = ones(&lx.tiling);
            let ones_y = ones(&ly.tiling);
            if ones_x.len() != ones_y.len() {
                return Err("fragments disagree on 1-tile counts".into());
            }
            let pairing: Vec<(usize, usize)> = ones_x.into_iter().zip(ones_y).collect();
            let bij = regular_tiling_loe(&lx.tiling, &lx.theta, &ly.tiling, &ly.theta, &pairing)
                .map_err(|e| e.to_string())?;
            let units = tile_bijection_units(&bij, &lx.tiling, &ly.tiling, "x", "y", seed);
            let report = verify_normalization(&units).map_err(|e| e.to_string())?;
            let is_loe = report.verdict == Verdict::Loe;
            let doc = json!({
                "schema": JSON_SCHEMA_VERSION,
                "command": "pipeline",
                "levels": levels,
                "tiles_matched": bij.pairs.len(),
                "normalization": to_json(&report),
                "verdict": if is_loe { "PASS" } else { "FAIL" },
            });
            emit(&output, &doc)?;
            let scene = (d == 2).then(|| svg::render_regular_tiling(&lx.tiling));
            write_svg(&output, scene)?;
            Ok(if is_loe { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {}", msg);
            ExitCode::from(1)
        }
    }
}
