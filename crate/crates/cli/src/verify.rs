//! Seeded invariant suites. Set and function checks compare against a
//! brute-force model on the level-`GRID` cells; the pipeline suite compares
//! against closed-form densities.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rnkit::dyadic::{self, DyadicInterval, RingSet};
use rnkit::ec;
use rnkit::l1::{self, L1NamePrefix};
use rnkit::lowerbound::{self, EncodedMeasure};
use rnkit::measures::{self, FiniteMeasure, Measure, MeasureBounds};
use rnkit::radon_nikodym::{self as rn, KnownDensity, RnConfig, RnPipeline};
use rnkit::rational::{self, Rational};
use rnkit::stepfn::{self, StepFunction};

const GRID: u32 = 7;
const CELLS: usize = 1 << GRID;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SuiteName {
    Ring,
    Stepfn,
    Measures,
    L1,
    Rn,
    Lowerbound,
    All,
}

const SUITES: [SuiteName; 6] =
    [SuiteName::Ring, SuiteName::Stepfn, SuiteName::Measures, SuiteName::L1, SuiteName::Rn, SuiteName::Lowerbound];

#[derive(Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = SuiteName::All)]
    suite: SuiteName,
    /// Seed for the random cases; `RNKIT_SEED` takes precedence.
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

type Check = std::result::Result<(), String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn lib<T>(r: rnkit::Result<T>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

struct Tally {
    cases: usize,
    failures: Vec<String>,
}

impl Tally {
    fn new() -> Self {
        Tally { cases: 0, failures: Vec::new() }
    }

    fn case(&mut self, label: impl FnOnce() -> String, check: impl FnOnce() -> Check) {
        self.cases += 1;
        if let Err(e) = check() {
            self.failures.push(format!("{}: {e}", label()));
        }
    }
}

fn q(n: i64, d: i64) -> Rational {
    rational::ratio(n, d)
}

fn cell_len() -> Rational {
    q(1, CELLS as i64)
}

fn rand_set(rng: &mut ChaCha8Rng) -> RingSet {
    let count = rng.random_range(0..6);
    RingSet::from_intervals((0..count).map(|_| {
        let level = rng.random_range(0..=GRID);
        dyadic::interval(level, rng.random_range(0..(1u64 << level))).unwrap()
    }))
}

fn rand_value(rng: &mut ChaCha8Rng, nonneg: bool) -> Rational {
    let lo = if nonneg { 0 } else { -12 };
    q(rng.random_range(lo..=12), rng.random_range(1..=8))
}

fn rand_raw(rng: &mut ChaCha8Rng, nonneg: bool) -> Vec<(RingSet, Rational)> {
    let count = rng.random_range(0..5);
    (0..count).map(|_| (rand_set(rng), rand_value(rng, nonneg))).collect()
}

fn rand_precision(rng: &mut ChaCha8Rng) -> Rational {
    rational::pow2(-rng.random_range(0..12)) * rational::int(rng.random_range(1..4))
}

/// Cells covered by `e`, which must be no finer than the grid.
fn cells(e: &RingSet) -> Vec<bool> {
    let mut bits = vec![false; CELLS];
    for piece in e.pieces() {
        let shift = GRID - piece.level();
        let from = (piece.index() as usize) << shift;
        bits[from..from + (1 << shift)].iter_mut().for_each(|b| *b = true);
    }
    bits
}

fn from_cells(bits: &[bool]) -> RingSet {
    RingSet::from_intervals(
        bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| DyadicInterval::new(GRID, i as u64).unwrap()),
    )
}

fn cellwise(a: &RingSet, b: &RingSet, f: impl Fn(bool, bool) -> bool) -> RingSet {
    from_cells(&cells(a).iter().zip(cells(b)).map(|(&x, y)| f(x, y)).collect::<Vec<_>>())
}

/// Cell values of the pointwise sum of raw terms.
fn raw_values(raw: &[(RingSet, Rational)]) -> Vec<Rational> {
    let mut out = vec![Rational::default(); CELLS];
    for (support, value) in raw {
        for (i, b) in cells(support).into_iter().enumerate() {
            if b {
                out[i] += value;
            }
        }
    }
    out
}

fn values(s: &StepFunction) -> Vec<Rational> {
    let raw: Vec<_> = s.pieces().iter().map(|p| (p.support.clone(), p.value.clone())).collect();
    raw_values(&raw)
}

/// `∫_E v dλ₀` for cell values `v` and a set at any level.
fn weighted(v: &[Rational], e: &RingSet) -> Rational {
    let mut total = Rational::default();
    for piece in e.pieces() {
        if piece.level() <= GRID {
            let shift = GRID - piece.level();
            let from = (piece.index() as usize) << shift;
            total += v[from..from + (1 << shift)].iter().sum::<Rational>() * cell_len();
        } else {
            let cell = (piece.index() >> (piece.level() - GRID)) as usize;
            total += &v[cell] * rational::pow2(-i64::from(piece.level()));
        }
    }
    total
}

fn whole_grid() -> RingSet {
    from_cells(&[true; CELLS])
}

fn bounds_hold(b: &MeasureBounds, exact: &Rational, precision: &Rational) -> Check {
    ensure(b.low <= *exact && *exact <= b.high, || format!("{b} misses {}", rational::format(exact)))?;
    ensure(&b.high - &b.low <= *precision, || format!("{b} is wider than {}", rational::format(precision)))
}

fn ring(rng: &mut ChaCha8Rng) -> Tally {
    let mut t = Tally::new();
    for case in 0..300 {
        let (a, b, c) = (rand_set(rng), rand_set(rng), rand_set(rng));
        let code: u64 = rng.random_range(0..1 << 14);
        t.case(
            || format!("case {case}"),
            || {
                ensure(a.union(&b) == cellwise(&a, &b, |x, y| x || y), || "union".into())?;
                ensure(a.intersection(&b) == cellwise(&a, &b, |x, y| x && y), || "intersection".into())?;
                ensure(a.difference(&b) == cellwise(&a, &b, |x, y| x && !y), || "difference".into())?;
                ensure(a.complement() == cellwise(&a, &a, |x, _| !x), || "complement".into())?;
                ensure(
                    a.intersection(&b.union(&c)) == a.intersection(&b).union(&a.intersection(&c)),
                    || "distributivity".into(),
                )?;
                ensure(a.union(&b).complement() == a.complement().intersection(&b.complement()), || "De Morgan".into())?;
                ensure(RingSet::from_intervals(a.pieces().iter().copied()) == a, || "canonical form".into())?;
                ensure(RingSet::is_canonical(a.pieces()), || "stored pieces not canonical".into())?;
                let count = cells(&a).iter().filter(|&&x| x).count() as i64;
                ensure(a.lebesgue() == q(count, CELLS as i64), || "λ₀ disagrees with cell count".into())?;
                ensure(
                    a.union(&b).lebesgue() + a.intersection(&b).lebesgue() == a.lebesgue() + b.lebesgue(),
                    || "λ₀ is not modular".into(),
                )?;
                let e = lib(dyadic::alpha_u64(code))?;
                let least = lib(dyadic::alpha_inverse(&e))?;
                ensure(least <= code.into(), || format!("alpha_inverse({code}) is {least}"))?;
                ensure(lib(dyadic::alpha(&least))? == e, || format!("alpha round trip at {code}"))
            },
        );
    }
    t
}

fn stepfn_suite(rng: &mut ChaCha8Rng) -> Tally {
    let mut t = Tally::new();
    for case in 0..300 {
        let (raw_s, raw_u) = (rand_raw(rng, false), rand_raw(rng, false));
        let (a, b) = (rand_value(rng, false), rand_value(rng, false));
        let e = rand_set(rng);
        t.case(
            || format!("case {case}"),
            || {
                let (s, u) = (stepfn::normalize(raw_s.clone()), stepfn::normalize(raw_u.clone()));
                let (vs, vu) = (raw_values(&raw_s), raw_values(&raw_u));
                ensure(values(&s) == vs, || "normal form changed the function".into())?;
                ensure(stepfn::normalize(raw_s.clone()) == s, || "normal form is not deterministic".into())?;
                for (i, v) in vs.iter().enumerate() {
                    let mid = q(2 * i as i64 + 1, 2 * CELLS as i64);
                    ensure(lib(s.evaluate(&mid))? == *v, || format!("value in cell {i}"))?;
                }
                let combo = s.scale(&a).add(&u.scale(&b));
                let linear = &a * weighted(&vs, &e) + &b * weighted(&vu, &e);
                ensure(stepfn::integral_lebesgue(&combo, &e) == linear, || "integral is not linear".into())?;
                let dist: Rational = vs.iter().zip(&vu).map(|(x, y)| if x > y { x - y } else { y - x }).sum::<Rational>()
                    * cell_len();
                ensure(stepfn::l1_distance_lebesgue(&s, &u) == dist, || "L¹ distance".into())?;
                let json = serde_json::to_string(&s).map_err(|e| e.to_string())?;
                ensure(serde_json::from_str::<StepFunction>(&json).map_err(|e| e.to_string())? == s, || "JSON".into())?;
                for v in s.range() {
                    ensure(lib(rational::parse(&rational::format(&v)))? == v, || "p/q round trip".into())?;
                }
                match stepfn::rsf_code(&s) {
                    Ok(code) => ensure(lib(stepfn::rsf_decode(&code))? == s, || "code round trip".into()),
                    Err(rnkit::Error::CodeTooLarge(_)) => Ok(()),
                    Err(e) => Err(e.to_string()),
                }
            },
        );
    }
    t
}

fn measures_suite(rng: &mut ChaCha8Rng) -> Tally {
    let mut t = Tally::new();
    for case in 0..200 {
        let raw = rand_raw(rng, true);
        let (c0, c1) = (rand_value(rng, true), rand_value(rng, true));
        let (e, precision) = (rand_set(rng), rand_precision(rng));
        let stream = case % 20 == 0;
        t.case(
            || format!("case {case}"),
            || {
                let v = raw_values(&raw);
                let mu = lib(measures::density_measure(stepfn::normalize(raw.clone())))?;
                bounds_hold(&lib(mu.query(&e, &precision))?, &weighted(&v, &e), &precision)?;
                bounds_hold(&lib(mu.total_mass(&precision))?, &weighted(&v, &whole_grid()), &precision)?;
                let lin = lib(measures::linear_density_measure(c0.clone(), c1.clone()))?;
                let exact: Rational = cells(&e)
                    .iter()
                    .enumerate()
                    .filter(|(_, &b)| b)
                    .map(|(i, _)| {
                        let (x, y) = (q(i as i64, CELLS as i64), q(i as i64 + 1, CELLS as i64));
                        &c0 * (&y - &x) + &c1 * (&y * &y - &x * &x) / rational::int(2)
                    })
                    .sum();
                bounds_hold(&lib(lin.query(&e, &precision))?, &exact, &precision)?;
                if stream {
                    let text = lib(measures::render_triples(mu as Measure, 24))?;
                    for triple in lib(measures::parse_triples(&text))? {
                        let m = weighted(&v, &lib(dyadic::alpha(&triple.code))?);
                        ensure(triple.low < m && m < triple.high, || format!("triple {triple} misses {}", rational::format(&m)))?;
                    }
                }
                Ok(())
            },
        );
    }
    t
}

fn l1_suite(rng: &mut ChaCha8Rng) -> Tally {
    let mut t = Tally::new();
    for case in 0..100 {
        let (raw_h, raw_s, raw_u) = (rand_raw(rng, true), rand_raw(rng, false), rand_raw(rng, false));
        let precision = rand_precision(rng);
        t.case(
            || format!("case {case}"),
            || {
                let (vh, vs, vu) = (raw_values(&raw_h), raw_values(&raw_s), raw_values(&raw_u));
                let mu = lib(measures::density_measure(stepfn::normalize(raw_h.clone())))?;
                let (s, u) = (stepfn::normalize(raw_s.clone()), stepfn::normalize(raw_u.clone()));
                let integral: Rational = (0..CELLS).map(|i| &vs[i] * &vh[i]).sum::<Rational>() * cell_len();
                bounds_hold(&lib(l1::integrate_rsf(mu.as_ref(), &s, &precision))?, &integral, &precision)?;
                let dist: Rational = (0..CELLS)
                    .map(|i| {
                        let d = &vs[i] - &vu[i];
                        (if d < Rational::default() { -d } else { d }) * &vh[i]
                    })
                    .sum::<Rational>()
                    * cell_len();
                bounds_hold(&lib(l1::distance_rsf(mu.as_ref(), &s, &u, &precision))?, &dist, &precision)?;
                let name = l1::embed_rsf(Arc::clone(&mu) as Measure, s.clone());
                ensure(lib(l1::validate_name(&name, 3))?.passed(), || "constant name fails validation".into())?;
                let prefix = lib(l1::embed_rsf(measures::lebesgue_oracle(), s.clone()).to_prefix_json(3))?;
                let json = serde_json::to_string(&prefix).map_err(|e| e.to_string())?;
                let back: L1NamePrefix = serde_json::from_str(&json).map_err(|e| e.to_string())?;
                let rebuilt = lib(back.into_name())?;
                for i in 0..3 {
                    ensure(lib(rebuilt.approximant(i))? == s, || format!("prefix approximant {i}"))?;
                }
                Ok(())
            },
        );
    }
    t
}

fn rn_suite(rng: &mut ChaCha8Rng) -> Tally {
    let mut t = Tally::new();
    let step = |h: StepFunction| (lib(measures::density_measure(h.clone())), KnownDensity::Step(h));
    let mut corpus = vec![
        ("half".to_string(), step(StepFunction::constant(q(1, 2)))),
        ("zero".to_string(), step(StepFunction::zero())),
        (
            "four-step".to_string(),
            step(stepfn::normalize((0..4u64).map(|i| {
                let v = [q(1, 2), q(3, 2), q(2, 1), q(1, 4)][i as usize].clone();
                (RingSet::from_interval(dyadic::interval(2, i).unwrap()), v)
            }))),
        ),
        (
            "linear".to_string(),
            (lib(measures::linear_density_measure(q(0, 1), q(1, 1))), KnownDensity::Linear { c0: q(0, 1), c1: q(1, 1) }),
        ),
    ];
    for i in 0..2 {
        let raw: Vec<_> = (0..2).map(|_| (rand_set(rng), q(rng.random_range(0..=4), 2))).collect();
        corpus.push((format!("random #{i}"), step(stepfn::normalize(raw))));
    }
    for (label, (mu, h)) in corpus {
        t.case(
            || label.clone(),
            || {
                let mu: FiniteMeasure = mu?;
                let pipeline = RnPipeline::new(measures::lebesgue_oracle(), mu, RnConfig::default());
                let guard = ec::single_use_guard(lib(pipeline.certified_oracle(h.clone()))?);
                let name = pipeline.name(&lib(pipeline.run(&guard))?);
                for k in 0..=3 {
                    let d = h.distance(&lib(name.approximant(k))?);
                    ensure(d <= rational::pow2(-(k as i64)), || format!("‖s_{k} - h‖ = {}", rational::format(&d)))?;
                }
                ensure(guard.applications() == 1, || format!("EC applied {} times", guard.applications()))?;
                let seq = pipeline.sequence();
                let nu = Arc::clone(seq.nu());
                let total = lib(h.measure(&RingSet::whole()))?;
                for n in 0..seq.computed() {
                    let approx = lib(seq.get(n))?;
                    let failures = lib(rn::audit_certificate(
                        &approx,
                        &|e| h.measure(e),
                        &|e| nu.exact_with(e, &|s| s.lebesgue()),
                        &total,
                    ))?;
                    ensure(failures.is_empty(), || format!("level {n}: {}", failures.join("; ")))?;
                }
                Ok(())
            },
        );
    }
    t
}

fn lowerbound_suite(rng: &mut ChaCha8Rng) -> Tally {
    let mut t = Tally::new();
    let half = StepFunction::constant(q(1, 2));
    for case in 0..50 {
        let set: BTreeSet<u64> = (0..=10).filter(|_| rng.random_bool(0.4)).collect();
        let e = rand_set(rng);
        t.case(
            || format!("A = {set:?}"),
            || {
                let h = lib(lowerbound::density_of_set(&set))?;
                let gap = h.sub(&half).abs();
                for n in 0..=10u64 {
                    let band = RingSet::from_interval(lib(lowerbound::band(n))?);
                    let want = if set.contains(&n) { rational::pow2(-(n as i64) - 2) } else { Rational::default() };
                    ensure(stepfn::integral_lebesgue(&gap, &band) == want, || format!("band {n} integral"))?;
                }
                let m = lib(EncodedMeasure::from_set(set.iter().copied()))?;
                ensure(lib(m.exact(&e))? <= e.lebesgue(), || format!("case {case}: μ_p exceeds λ₀"))?;
                let guard = lowerbound::rn0_guard(lib(lowerbound::cheat_realizer(set.clone()))?);
                let reduction = lib(lowerbound::ec_via_rn0(&ec::en_encode(&set), &guard, 4))?;
                for n in 0..=10 {
                    ensure(lib(reduction.bit(n))? == set.contains(&n), || format!("bit {n} decoded wrongly"))?;
                }
                Ok(())
            },
        );
    }
    for set in [BTreeSet::new(), BTreeSet::from([0]), BTreeSet::from([1, 3])] {
        t.case(
            || format!("certified pipeline, A = {set:?}"),
            || {
                let h = KnownDensity::Step(lib(lowerbound::density_of_set(&set))?);
                let guard = lowerbound::rn0_guard(lowerbound::pipeline_realizer(RnConfig::default(), h));
                let reduction = lib(lowerbound::ec_via_rn0(&ec::en_encode(&set), &guard, 0))?;
                for n in 0..=10 {
                    ensure(lib(reduction.bit(n))? == set.contains(&n), || format!("bit {n} decoded wrongly"))?;
                }
                Ok(())
            },
        );
    }
    t
}

fn run_suite(name: SuiteName, seed: u64) -> Tally {
    // Each suite draws from its own stream, so results do not depend on
    // which other suites ran.
    let index = SUITES.iter().position(|&s| s == name).unwrap_or(0) as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(index));
    match name {
        SuiteName::Ring => ring(&mut rng),
        SuiteName::Stepfn => stepfn_suite(&mut rng),
        SuiteName::Measures => measures_suite(&mut rng),
        SuiteName::L1 => l1_suite(&mut rng),
        SuiteName::Rn => rn_suite(&mut rng),
        SuiteName::Lowerbound => lowerbound_suite(&mut rng),
        SuiteName::All => unreachable!(),
    }
}

fn effective_seed(flag: u64) -> Result<u64> {
    match std::env::var("RNKIT_SEED") {
        Ok(s) => s.trim().parse().with_context(|| format!("RNKIT_SEED={s:?} is not a u64")),
        Err(_) => Ok(flag),
    }
}

pub fn run(args: VerifyArgs) -> Result<ExitCode> {
    let seed = effective_seed(args.seed)?;
    let suites: Vec<SuiteName> = if args.suite == SuiteName::All { SUITES.to_vec() } else { vec![args.suite] };
    let mut report = format!("seed {seed}\n{:<12}{:>7}{:>8}{:>8}\n", "suite", "cases", "passed", "failed");
    let mut failed = 0;
    let mut details = String::new();
    for name in suites {
        let tally = run_suite(name, seed);
        let label = format!("{name:?}").to_lowercase();
        let bad = tally.failures.len();
        writeln!(report, "{label:<12}{:>7}{:>8}{bad:>8}", tally.cases, tally.cases - bad)?;
        for f in &tally.failures {
            writeln!(details, "FAIL {label}: {f}")?;
        }
        failed += bad;
    }
    report.push_str(&details);
    report.push_str(if failed == 0 { "all passed\n" } else { "FAILED\n" });
    print!("{report}");
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
