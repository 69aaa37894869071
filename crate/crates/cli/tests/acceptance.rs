//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use coupled_cfmm::closed_form::{self, rel_diff};
use coupled_cfmm::oracle::{
    self, fd_derivative_half_line, indicator_regime_limit, linear_grid, random_states,
    sequential_swap_oracle, sequential_transmission, step_halving_ratios,
};
use coupled_cfmm::{CoupledState, Event, PoolState};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const INVARIANT_TOL: f64 = 1e-12;
const INVARIANT_CASES: usize = 10_000;
const INVARIANT_BUDGET: Duration = Duration::from_secs(1);
const COMPOSITION_TOL: f64 = 1e-12;
const RANDOM_STATES: usize = 1_000;
const ROUND_TRIP_TOL: f64 = 1e-10;
const DEPTH_TOL: f64 = 1e-6;
const TRANSMISSION_TOL: f64 = 1e-9;
const TRANSMISSION_GRID: (f64, f64, usize) = (0.0, 5.0, 100);
const SWEEP_GRID: (f64, f64, usize) = (0.0, 2.0, 100);
const EXPANSION_DRIFTS: [f64; 3] = [0.05, 0.5, 1.5];
const EXPANSION_DELTAS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];
const HALVING_BAND: (f64, f64) = (6.0, 10.0);
const ZERO_FEE_TOL: f64 = 1e-9;
const ZERO_FEE_MAX_FRACTION: f64 = 0.1;
const INDICATOR_SAMPLES: usize = 1_000;
const SUITE_BUDGET: Duration = Duration::from_secs(30);

type Outcome = Result<String, String>;
type Criterion = (&'static str, Box<dyn Fn() -> Outcome>);
type ClosedForm = fn(&CoupledState, f64) -> f64;

fn check(cond: bool, fail: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(fail())
    }
}

fn case() -> CoupledState {
    CoupledState::paper_case_study()
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo.ln()..hi.ln()).exp()
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(oracle::DEFAULT_SEED);
    let cases: Vec<(PoolState, f64)> = (0..INVARIANT_CASES)
        .map(|_| {
            let x = log_uniform(&mut rng, 1e3, 1e12);
            let y = log_uniform(&mut rng, 1e3, 1e12);
            let g = *oracle::RANDOM_GAMMAS.choose(&mut rng).unwrap();
            let d = x * log_uniform(&mut rng, 1e-6, 1e3);
            (PoolState::new(x, y, g).unwrap(), d)
        })
        .collect();
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (p, d) in &cases {
        let t = p.swap_exact_in(*d).map_err(|e| e.to_string())?;
        let (xb, yq) = p.discounted_reserves(*d).map_err(|e| e.to_string())?;
        check(t.post_state.reserve_quote() > 0.0, || {
            format!("reserve exhausted at Δ={d}")
        })?;
        worst = worst.max(rel_diff(p.invariant_at(xb, yq), p.invariant()));
    }
    let elapsed = start.elapsed();
    check(worst <= INVARIANT_TOL, || {
        format!("max |φ−k|/k = {worst:e}")
    })?;
    check(elapsed < INVARIANT_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{INVARIANT_CASES} swaps, max |φ−k|/k = {worst:.2e}, {elapsed:.2?}"
    ))
}

fn composition_error(s: &CoupledState, amount: f64, event: Event) -> Result<f64, String> {
    let (seq, seq_post) = sequential_swap_oracle(s, amount, event).map_err(|e| e.to_string())?;
    let (cf, post) = match event {
        Event::Purchase => s.purchase_compound(amount),
        Event::Liquidation => s.liquidate_compound(amount),
    }
    .map_err(|e| e.to_string())?;
    let state = [
        rel_diff(post.x(), seq_post.x()),
        rel_diff(post.y1(), seq_post.y1()),
        rel_diff(post.y2(), seq_post.y2()),
        rel_diff(post.z(), seq_post.z()),
    ];
    Ok(state.into_iter().fold(rel_diff(cf, seq), f64::max))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(oracle::DEFAULT_SEED + 2);
    let mut worst = 0.0f64;
    let mut count = 0;
    for s in random_states(oracle::DEFAULT_SEED, RANDOM_STATES) {
        let dx = s.x() * log_uniform(&mut rng, 1e-6, 3.0);
        let gz = s.z() * log_uniform(&mut rng, 1e-6, 3.0);
        worst = worst.max(composition_error(&s, dx, Event::Purchase)?);
        worst = worst.max(composition_error(&s, gz, Event::Liquidation)?);
        count += 2;
    }
    let s = case();
    for f in [1e-6, 1e-4, 1e-2, 0.1, 1.0, 10.0] {
        worst = worst.max(composition_error(&s, f * s.x(), Event::Purchase)?);
        worst = worst.max(composition_error(&s, f * s.z(), Event::Liquidation)?);
        count += 2;
    }
    check(worst <= COMPOSITION_TOL, || {
        format!("max rel error {worst:e}")
    })?;
    Ok(format!(
        "{count} compound trades, max rel error {worst:.2e}"
    ))
}

fn criterion_3() -> Outcome {
    let s = case();
    let mut pools = vec![
        s.first_pool(),
        s.second_pool(),
        s.second_pool().flipped(),
        s.first_pool().flipped(),
    ];
    pools.extend(
        random_states(oracle::DEFAULT_SEED, 50)
            .iter()
            .map(|r| r.first_pool()),
    );
    let mus: Vec<f64> = linear_grid(-6.0, 1.0, 71)
        .into_iter()
        .map(|e| 10f64.powf(e))
        .collect();
    let (mut trip, mut depth) = (0.0f64, 0.0f64);
    for p in &pools {
        let (bx, by) = p.price_drift(0.0).map_err(|e| e.to_string())?;
        check(bx.mu == 0.0 && by.mu == 0.0, || {
            "nonzero drift at Δ=0".into()
        })?;
        for &mu in mus.iter().chain(std::iter::once(&0.0)) {
            let d = p.input_for_drift(mu).map_err(|e| e.to_string())?;
            if mu > 0.0 {
                trip = trip.max(rel_diff(p.quote_drift(d).map_err(|e| e.to_string())?, mu));
            }
            let slope = fd_derivative_half_line(
                |t| p.quote_drift(t).unwrap_or(f64::NAN),
                d,
                1,
                p.reserve_base(),
            )
            .map_err(|e| e.to_string())?;
            depth = depth.max(rel_diff(
                p.marginal_depth(mu).map_err(|e| e.to_string())?,
                1.0 / slope,
            ));
        }
    }
    check(trip <= ROUND_TRIP_TOL, || {
        format!("round trip error {trip:e}")
    })?;
    check(depth <= DEPTH_TOL, || format!("depth error {depth:e}"))?;
    Ok(format!(
        "round trip {trip:.2e}, depth vs 1/(dμ/dΔ) {depth:.2e}"
    ))
}

fn sweep() -> Vec<f64> {
    linear_grid(SWEEP_GRID.0, SWEEP_GRID.1, SWEEP_GRID.2)
}

fn criterion_4() -> Outcome {
    let s = case();
    let grid = sweep();
    let v: Vec<f64> = grid
        .iter()
        .map(|&m| s.value_discrepancy_purchase(m))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    check(v[0] == 0.0, || format!("v(0) = {}", v[0]))?;
    if let Some(i) = (1..v.len()).find(|&i| v[i] <= 0.0) {
        return Err(format!("v({}) = {}", grid[i], v[i]));
    }
    let u: Vec<f64> = grid.iter().map(|m| (m + 1.0).sqrt()).collect();
    let mut min_second = f64::INFINITY;
    for i in 1..grid.len() - 1 {
        let left = (v[i] - v[i - 1]) / (u[i] - u[i - 1]);
        let right = (v[i + 1] - v[i]) / (u[i + 1] - u[i]);
        let second = (right - left) / (u[i + 1] - u[i - 1]);
        check(second > 0.0, || {
            format!("second difference {second} at μ={}", grid[i])
        })?;
        min_second = min_second.min(second);
    }
    Ok(format!(
        "v>0 on {} points, v(2) = {:.6e}, min second difference in √(μ+1) = {min_second:.4e}",
        grid.len() - 1,
        v[v.len() - 1]
    ))
}

fn criterion_5() -> Outcome {
    let s = case();
    let grid = sweep();
    let mut max = f64::NEG_INFINITY;
    for &m in &grid[1..] {
        let v = s
            .value_discrepancy_liquidation(m)
            .map_err(|e| e.to_string())?;
        check(v < 0.0, || format!("v_liq({m}) = {v}"))?;
        max = max.max(v);
    }
    Ok(format!(
        "v_liq<0 on {} points, max {max:.4e}",
        grid.len() - 1
    ))
}

fn criterion_6() -> Outcome {
    let s = case();
    let grid = linear_grid(
        TRANSMISSION_GRID.0,
        TRANSMISSION_GRID.1,
        TRANSMISSION_GRID.2,
    );
    let mut worst = 0.0f64;
    let cases: [(Event, ClosedForm, f64); 2] = [
        (
            Event::Purchase,
            closed_form::transmission_purchase,
            s.transmission_bound_purchase().map_err(|e| e.to_string())?,
        ),
        (
            Event::Liquidation,
            closed_form::transmission_liquidation,
            s.transmission_bound_liquidation()
                .map_err(|e| e.to_string())?,
        ),
    ];
    for (event, form, bound) in cases {
        let mut prev = f64::NEG_INFINITY;
        for &mu in &grid {
            let measured = sequential_transmission(&s, mu, event).map_err(|e| e.to_string())?;
            let cf = form(&s, mu);
            worst = worst.max(rel_diff(cf, measured));
            check(mu != 0.0 || (cf == 0.0 && measured == 0.0), || {
                format!("{event:?} nonzero at 0")
            })?;
            check(cf > prev, || format!("{event:?} not increasing at μ={mu}"))?;
            check(cf < bound, || format!("{event:?} above bound at μ={mu}"))?;
            prev = cf;
        }
        let far = form(&s, 1e6);
        check(far < bound, || {
            format!("{event:?} μ(1e6) = {far} ≥ bound {bound}")
        })?;
    }
    check(worst <= TRANSMISSION_TOL, || {
        format!("max rel error {worst:e}")
    })?;
    Ok(format!(
        "2×{} points, max rel error {worst:.2e}",
        grid.len()
    ))
}

fn criterion_7() -> Outcome {
    let s = case();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for event in [Event::Purchase, Event::Liquidation] {
        for mu in EXPANSION_DRIFTS {
            let ratios = step_halving_ratios(
                |d| Ok(s.marginal_output(event, mu, d)?.residual),
                &EXPANSION_DELTAS,
            )
            .map_err(|e| e.to_string())?;
            for q in ratios {
                check(q >= HALVING_BAND.0 && q <= HALVING_BAND.1, || {
                    format!("{event:?} μ={mu}: halving ratio {q}")
                })?;
                lo = lo.min(q);
                hi = hi.max(q);
            }
        }
    }
    Ok(format!("halving ratios within [{lo:.3}, {hi:.3}]"))
}

fn criterion_8() -> Outcome {
    let mut states = vec![CoupledState::new(1e7, 4.5e8, 7.2e7, 1e9, 1.0, 1.0).unwrap()];
    states.extend(
        random_states(oracle::DEFAULT_SEED + 8, 200)
            .iter()
            .map(|r| CoupledState::new(r.x(), r.y1(), r.y2(), r.z(), 1.0, 1.0).unwrap()),
    );
    let mut worst = 0.0f64;
    for s in &states {
        for f in linear_grid(0.0, ZERO_FEE_MAX_FRACTION, 21)
            .into_iter()
            .skip(1)
        {
            let dx = f * s.x();
            let (g, post) = s.purchase_compound(dx).map_err(|e| e.to_string())?;
            let (back, after) = post.liquidate_compound(g).map_err(|e| e.to_string())?;
            worst = worst
                .max(rel_diff(back, dx))
                .max(rel_diff(after.x(), s.x()));
        }
    }
    check(worst <= ZERO_FEE_TOL, || format!("max rel error {worst:e}"))?;
    Ok(format!(
        "{} states × 20 sizes, max rel error {worst:.2e}",
        states.len()
    ))
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(oracle::DEFAULT_SEED + 9);
    let mut inflation = 0;
    for (i, s) in random_states(oracle::DEFAULT_SEED, INDICATOR_SAMPLES)
        .iter()
        .enumerate()
    {
        let mu = rng.gen_range(1e-3..indicator_regime_limit(s));
        let v = s.purchase_valuation(mu).map_err(|e| e.to_string())?;
        check(v.in_regime, || {
            format!("sample {i} outside the regime guard")
        })?;
        check(v.indicator.signum() == v.value_discrepancy.signum(), || {
            format!(
                "sample {i}, μ={mu}: l={} v={}",
                v.indicator, v.value_discrepancy
            )
        })?;
        inflation += usize::from(v.indicator > 0.0);
    }
    Ok(format!(
        "{INDICATOR_SAMPLES} samples agree ({inflation} inflationary)"
    ))
}

// ---- criterion 10 ---------------------------------------------------------

fn run_cli(dir: &Path, tag: &str, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = dir.join(format!("{tag}.csv"));
    let status = Command::new(env!("CARGO_BIN_EXE_coupled-cfmm"))
        .args(args)
        .args(["--preset", "paper-case-study", "--out"])
        .arg(&out)
        .output()
        .map_err(|e| e.to_string())?;
    check(status.status.success(), || {
        format!(
            "{args:?} failed: {}",
            String::from_utf8_lossy(&status.stderr)
        )
    })?;
    std::fs::read(&out).map_err(|e| e.to_string())
}

fn parse(csv: &[u8]) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = String::from_utf8_lossy(csv);
    let mut lines = text.lines();
    let header = lines
        .next()
        .unwrap_or("")
        .split(',')
        .map(String::from)
        .collect();
    let rows = lines
        .map(|l| {
            l.split(',')
                .map(|v| v.parse().unwrap_or(f64::NAN))
                .collect()
        })
        .collect();
    (header, rows)
}

fn column(table: &(Vec<String>, Vec<Vec<f64>>), name: &str) -> Vec<f64> {
    let i = table
        .0
        .iter()
        .position(|h| h == name)
        .expect("column present");
    table.1.iter().map(|r| r[i]).collect()
}

/// `(d_mu, mu_y, marginal_output)` grouped by perturbation.
fn surface_columns(table: &(Vec<String>, Vec<Vec<f64>>)) -> Vec<(f64, Vec<(f64, f64)>)> {
    let (mu, d, o) = (
        column(table, "mu_y"),
        column(table, "d_mu_y"),
        column(table, "marginal_output"),
    );
    let mut out: Vec<(f64, Vec<(f64, f64)>)> = Vec::new();
    for i in 0..mu.len() {
        match out.iter_mut().find(|(k, _)| *k == d[i]) {
            Some((_, v)) => v.push((mu[i], o[i])),
            None => out.push((d[i], vec![(mu[i], o[i])])),
        }
    }
    out
}

fn criterion_10(suite_start: Instant) -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let commands: [(&str, &[&str]); 5] = [
        ("purchase", &["purchase-sweep"]),
        ("liquidation", &["liquidation-sweep"]),
        ("transmission", &["transmission"]),
        ("surface_purchase", &["surface", "--event", "purchase"]),
        (
            "surface_liquidation",
            &["surface", "--event", "liquidation"],
        ),
    ];
    let mut tables = Vec::new();
    for (tag, args) in commands {
        let a = run_cli(dir.path(), &format!("{tag}_a"), args)?;
        let b = run_cli(dir.path(), &format!("{tag}_b"), args)?;
        check(a == b, || format!("{tag} output differs between runs"))?;
        tables.push(parse(&a));
    }

    // Figure 1: inflation, zero at the origin
    let p = &tables[0];
    let v = column(p, "value_discrepancy");
    check(v[0] == 0.0 && column(p, "mu_y")[0] == 0.0, || {
        "purchase first row not zero".into()
    })?;
    check(v[1..].iter().all(|&x| x > 0.0), || {
        "purchase value not positive".into()
    })?;
    // Figure 2: transmission increasing, fastest for small swaps
    let mz = column(p, "mu_z");
    check(mz.windows(2).all(|w| w[1] > w[0]), || {
        "mu_z not increasing".into()
    })?;
    let first_step = mz[1] - mz[0];
    let last_step = mz[mz.len() - 1] - mz[mz.len() - 2];
    check(first_step > last_step, || {
        "mu_z slope not largest near zero".into()
    })?;
    // Figure 4: deflation
    let l = &tables[1];
    let vl = column(l, "value_discrepancy");
    check(vl[0] == 0.0 && vl.iter().all(|&x| x <= 0.0), || {
        "liquidation value not ≤ 0".into()
    })?;
    check(column(l, "mu_x").windows(2).all(|w| w[1] > w[0]), || {
        "mu_x not increasing".into()
    })?;
    let t = &tables[2];
    check(column(t, "mu_z") == mz, || {
        "transmission and purchase sweeps disagree".into()
    })?;
    let s = case();
    for (mu, mx) in column(t, "mu_y").into_iter().zip(column(t, "mu_x")) {
        let measured =
            sequential_transmission(&s, mu, Event::Liquidation).map_err(|e| e.to_string())?;
        check(rel_diff(mx, measured) <= TRANSMISSION_TOL, || {
            format!("mu_x off at {mu}")
        })?;
    }

    // Figures 3 and 5: output falls with drift; much faster on purchase
    let mut worst_ratio = f64::INFINITY;
    let buy = surface_columns(&tables[3]);
    let sell = surface_columns(&tables[4]);
    for ((d, bp), (d2, sp)) in buy.iter().zip(&sell) {
        check(d == d2, || "surface grids differ".into())?;
        for series in [bp, sp] {
            check(series.windows(2).all(|w| w[1].1 < w[0].1), || {
                format!("marginal output not decreasing at d_mu={d}")
            })?;
        }
        for (b, sl) in bp.windows(2).zip(sp.windows(2)) {
            // unit-free gradients, d ln o / dμ
            let gb = (b[0].1 / b[1].1).ln() / (b[1].0 - b[0].0);
            let gs = (sl[0].1 / sl[1].1).ln() / (sl[1].0 - sl[0].0);
            check(gb > gs, || {
                format!("purchase not steeper at μ={}, d_mu={d}", b[0].0)
            })?;
            worst_ratio = worst_ratio.min(gb / gs);
        }
    }
    let elapsed = suite_start.elapsed();
    check(elapsed < SUITE_BUDGET, || format!("suite took {elapsed:?}"))?;
    Ok(format!(
        "5 commands byte-identical; shapes hold; purchase log-gradient ≥ {worst_ratio:.2}× liquidation; suite {elapsed:.2?}"
    ))
}

fn main() {
    let start = Instant::now();
    let criteria: [Criterion; 10] = [
        ("invariant preservation", Box::new(criterion_1)),
        ("composition exactness", Box::new(criterion_2)),
        ("drift machinery", Box::new(criterion_3)),
        ("purchase inflation", Box::new(criterion_4)),
        ("liquidation deflation", Box::new(criterion_5)),
        ("transmission equivalence", Box::new(criterion_6)),
        ("expansion order", Box::new(criterion_7)),
        ("zero-fee round trip", Box::new(criterion_8)),
        ("indicator consistency", Box::new(criterion_9)),
        (
            "CLI determinism and figure shapes",
            Box::new(move || criterion_10(start)),
        ),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("{}/10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
