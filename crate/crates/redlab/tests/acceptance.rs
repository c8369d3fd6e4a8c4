//! The acceptance gate: one test per criterion, each printing a
//! PASS/FAIL line with the measured value next to the bound it is judged
//! against. Tolerances live in the constants below; nothing is clamped
//! or retried. Criteria run through the same harness entry points the
//! command line uses.

use std::collections::BTreeSet;
use std::time::Instant;

use redlab::bits::BitString;
use redlab::circuit::CircuitBuilder;
use redlab::cnf::to_cnf_pinned;
use redlab::harness::{run, ExperimentConfig};
use redlab::oracle::{SatOracle, SolverBackend};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every criterion runs on this seed; the reported numbers are the ones
/// frozen into the assertions' expectations.
const SEED: u64 = 46;

/// Mass of inputs allowed below the success threshold at eps = 0.05.
const APPROX_RG_BOUND: f64 = 0.30;
/// Total variation ceiling per uniformity instance.
const UNIFORMITY_TV: f64 = 0.1;
/// Heuristic error ceiling for the identification reduction,
/// eps_prime = 0.1 plus a 0.05 confidence margin.
const IDENT_HEUR_BOUND: f64 = 0.15;
/// Allowed gap between measured and predicted dataset validity.
const IDENT_VALIDITY_GAP: f64 = 0.05;
/// Circuits the oracle-equivalence sweep checks.
const TSEITIN_CIRCUITS: usize = 500;
/// Preimage sets above this size are resampled so the blocked model
/// enumeration stays bounded.
const TSEITIN_SUPPORT_CAP: usize = 3000;

fn verdict(criterion: &str, pass: bool, detail: &str, elapsed_s: f64, budget_s: f64) {
    println!(
        "criterion {criterion}: {} ({detail}; {elapsed_s:.1}s of {budget_s:.0}s budget)",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
    assert!(
        elapsed_s <= budget_s,
        "criterion {criterion} overran its budget: {elapsed_s:.1}s > {budget_s:.0}s"
    );
}

fn base(experiment: &str) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(experiment);
    cfg.seed = Some(SEED);
    cfg
}

fn metric(report: &redlab::harness::ReductionReport, key: &str) -> f64 {
    report.metrics[key].as_f64().unwrap_or_else(|| panic!("metric {key} missing"))
}

#[test]
fn criterion_01_xor_mask_distinctness_is_exactly_one_half() {
    let t = Instant::now();
    let mut cfg = base("verify-class");
    cfg.class = Some("xor".to_string());
    cfg.n = Some(8);
    let rep = run(&cfg).unwrap();
    let min = metric(&rep, "min_fraction");
    verdict(
        "01 xor-mask distinctness",
        rep.pass && min == 0.5,
        &format!("min pairwise disagreement {min}, required exactly 0.5 over all 2^8 masks"),
        t.elapsed().as_secs_f64(),
        60.0,
    );
}

#[test]
fn criterion_02_bit_index_smoothness_identity() {
    let t = Instant::now();
    let mut cfg = base("verify-class");
    cfg.class = Some("bit_index".to_string());
    cfg.n = Some(8);
    cfg.m = Some(8);
    let rep = run(&cfg).unwrap();
    let min = metric(&rep, "min_ratio");
    let identity = rep.bound["exact_ratio"].as_f64().unwrap();
    verdict(
        "02 bit-index smoothness",
        rep.pass && min >= 0.5 && min == identity,
        &format!("min E/d ratio {min}, identity {identity}, floor 0.5"),
        t.elapsed().as_secs_f64(),
        30.0,
    );
}

#[test]
fn criterion_03_code_distances_and_block_distinctness() {
    let t = Instant::now();
    let mut cfg = base("rs-props");
    cfg.m = Some(4);
    cfg.k = Some(2);
    let rep = run(&cfg).unwrap();
    let symbol = rep.metrics["min_symbol_distance"].as_u64().unwrap();
    let bit = rep.metrics["min_bit_distance"].as_u64().unwrap();
    let fraction = metric(&rep, "min_fraction");
    // the [6, 2] code meets its symbol bound; the bit and block-input
    // bounds do not hold at this shape (measured 6 < 8 and 0.2344 < 1/3
    // with 24 blocks over 256 inputs, where even division is impossible)
    // and the criterion is judged as stated, tolerance zero
    verdict(
        "03 code distance and block distinctness",
        rep.pass && symbol >= 5 && bit >= 8 && fraction >= 1.0 / 3.0,
        &format!("symbol {symbol} (>= 5), bit {bit} (>= 8), disagreement {fraction:.4} (>= 1/3)"),
        t.elapsed().as_secs_f64(),
        120.0,
    );
}

#[test]
fn criterion_04_pinned_cnf_matches_brute_force_preimages() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut oracle = SatOracle::new(SolverBackend::Builtin);
    let mut checked = 0usize;
    let mut models_total = 0usize;
    while checked < TSEITIN_CIRCUITS {
        let n = rng.gen_range(2..=16usize);
        let num_outputs = rng.gen_range(1..=3usize);
        let mut b = CircuitBuilder::new();
        let inputs = b.input_group("x", n);
        let mut pool = inputs.clone();
        for _ in 0..rng.gen_range(4..=30usize) {
            let u = pool[rng.gen_range(0..pool.len())];
            let v = pool[rng.gen_range(0..pool.len())];
            let g = match rng.gen_range(0..4) {
                0 => b.and(u, v),
                1 => b.or(u, v),
                2 => b.xor(u, v),
                _ => b.not(u),
            };
            pool.push(g);
        }
        let outputs: Vec<_> =
            (0..num_outputs).map(|_| pool[rng.gen_range(0..pool.len())]).collect();
        let circuit = b.finish(outputs);
        let pattern = BitString::random(&mut rng, num_outputs);

        let mut preimages = BTreeSet::new();
        for x in BitString::enumerate(n) {
            if circuit.eval(&[("x", &x)]).unwrap() == pattern {
                preimages.insert(x);
            }
        }
        if preimages.len() > TSEITIN_SUPPORT_CAP {
            continue;
        }
        let cnf = to_cnf_pinned(&circuit, &pattern).unwrap();
        let vars = cnf.group_vars("x").unwrap().to_vec();
        let models: BTreeSet<BitString> = oracle
            .enumerate_models(&cnf, &vars, preimages.len() + 1)
            .unwrap()
            .into_iter()
            .collect();
        assert_eq!(
            models, preimages,
            "projected solutions diverge from brute force at circuit {checked} (n = {n})"
        );
        models_total += models.len();
        checked += 1;
    }
    verdict(
        "04 pinned-CNF oracle equivalence",
        checked == TSEITIN_CIRCUITS,
        &format!("{checked} circuits, {models_total} projected models, all sets equal"),
        t.elapsed().as_secs_f64(),
        300.0,
    );
}

#[test]
fn criterion_05_exact_sampler_inversion_never_errs() {
    let t = Instant::now();
    let mut cfg = base("invert-exact-rg");
    cfg.n = Some(10);
    let rep = run(&cfg).unwrap();
    let disagreements = rep.metrics["disagreements"].as_u64().unwrap();
    verdict(
        "05 exact sampler inversion",
        rep.pass && disagreements == 0,
        &format!("{disagreements} disagreements over all 2^10 inputs"),
        t.elapsed().as_secs_f64(),
        600.0,
    );
}

#[test]
fn criterion_06_approx_sampler_inversion_respects_six_eps() {
    let t = Instant::now();
    let mut cfg = base("invert-approx-rg");
    cfg.n = Some(8);
    cfg.eps = Some(0.05);
    cfg.votes = Some(9);
    cfg.trials = Some(20);
    let rep = run(&cfg).unwrap();
    let bad = metric(&rep, "fraction_bad");
    verdict(
        "06 approximate sampler inversion",
        rep.pass && bad <= APPROX_RG_BOUND,
        &format!("fraction below 2/3 success: {bad:.4}, budget {APPROX_RG_BOUND}"),
        t.elapsed().as_secs_f64(),
        900.0,
    );
}

#[test]
fn criterion_07_witness_sampling_is_near_uniform() {
    let t = Instant::now();
    let cfg = base("witness-uniformity");
    let rep = run(&cfg).unwrap();
    let max_tv = metric(&rep, "max_tv");
    let instances = rep.params["instances"].as_u64().unwrap();
    let draws = rep.params["draws"].as_u64().unwrap();
    verdict(
        "07 witness uniformity",
        rep.pass && max_tv <= UNIFORMITY_TV && instances == 20 && draws == 100_000,
        &format!("max TV {max_tv:.4} over {instances} instances at {draws} draws each"),
        t.elapsed().as_secs_f64(),
        600.0,
    );
}

#[test]
fn criterion_08_identification_reduction_and_validity() {
    let t = Instant::now();
    let mut cfg = base("ident-reduce");
    cfg.n = Some(8);
    cfg.m = Some(8);
    cfg.eps = Some(0.125);
    cfg.eps_prime = Some(0.1);
    let rep = run(&cfg).unwrap();
    let bad = metric(&rep, "fraction_bad");
    let gap = metric(&rep, "validity_gap");
    let b = rep.params["b"].as_u64().unwrap();
    verdict(
        "08 identification reduction",
        rep.pass && b == 9 && bad <= IDENT_HEUR_BOUND && gap <= IDENT_VALIDITY_GAP,
        &format!(
            "B {b}, heuristic error {bad:.4} (<= {IDENT_HEUR_BOUND}), validity gap {gap:.4} \
             (<= {IDENT_VALIDITY_GAP})"
        ),
        t.elapsed().as_secs_f64(),
        1200.0,
    );
}

#[test]
fn criterion_09_advice_evaluators_are_exact() {
    let t = Instant::now();
    let mut detail = String::new();
    let mut all = true;
    for kind in ["singleton", "bit_index"] {
        let mut cfg = base("advice-eval");
        cfg.class = Some(kind.to_string());
        cfg.n = Some(8);
        cfg.m = Some(8);
        let rep = run(&cfg).unwrap();
        let disagreements = rep.metrics["disagreements"].as_u64().unwrap();
        let abstain = metric(&rep, "abstain_rate");
        all &= rep.pass && disagreements == 0 && abstain == 0.0;
        detail.push_str(&format!("{kind}: {disagreements} errors, abstain {abstain}; "));
    }
    verdict(
        "09 advice evaluators",
        all,
        detail.trim_end_matches("; "),
        t.elapsed().as_secs_f64(),
        120.0,
    );
}

#[test]
fn criterion_10_budgeted_gate_soundness_and_accepted_labeling() {
    let t = Instant::now();
    let mut gate = base("approx-verif");
    gate.n = Some(6);
    gate.b = Some(6);
    gate.beta = Some(6);
    gate.trials = Some(10_000);
    let gate_rep = run(&gate).unwrap();
    let violations = gate_rep.metrics["budget_violations"].as_u64().unwrap();
    let accepted = gate_rep.metrics["accepted"].as_u64().unwrap();

    let mut label = base("m-alpha");
    label.n = Some(6);
    label.b = Some(6);
    label.beta = Some(6);
    let label_rep = run(&label).unwrap();
    let bad = metric(&label_rep, "fraction_bad");
    let judged = label_rep.bound["fraction_bad"].as_f64().unwrap();
    let strict = label_rep.bound["strict_fraction_bad"].as_f64().unwrap();
    verdict(
        "10 budgeted gate soundness",
        gate_rep.pass && label_rep.pass && violations == 0 && bad <= judged,
        &format!(
            "{accepted} accepted cases, {violations} budget violations; labeler bad fraction \
             {bad:.4} vs {judged:.4} judged and {strict:.4} strict"
        ),
        t.elapsed().as_secs_f64(),
        1800.0,
    );
}

#[test]
fn criterion_11_reports_are_deterministic() {
    let t = Instant::now();
    let mut all = true;
    let mut detail = String::new();
    for (experiment, tweak) in [
        ("advice-eval", None),
        ("m-alpha", Some((4usize, 2usize, 3usize))),
        ("invert-exact-rg", None),
    ] {
        let mut cfg = base(experiment);
        cfg.n = Some(5);
        if let Some((n, b, beta)) = tweak {
            cfg.n = Some(n);
            cfg.b = Some(b);
            cfg.beta = Some(beta);
            cfg.trials = Some(8);
        }
        let a = run(&cfg).unwrap().deterministic_json();
        let b = run(&cfg).unwrap().deterministic_json();
        all &= a == b;
        detail.push_str(&format!("{experiment}: {}; ", if a == b { "stable" } else { "DRIFTED" }));
    }
    verdict(
        "11 report determinism",
        all,
        detail.trim_end_matches("; "),
        t.elapsed().as_secs_f64(),
        120.0,
    );
}
