//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line, then exits non-zero if any
//! criterion failed.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use fjrw_core::bmodel::{self, CycleLabel};
use fjrw_core::chamber::ChamberIndex;
use fjrw_core::invariants::{closed_trr_instances, ClosedTrr, InvariantEngine, SignConvention};
use fjrw_core::scalar::{int, ratio, sign};
use fjrw_core::spin::{BalancedKey, Cell, Marking, MarkingSet, ModelParams};
use fjrw_core::wallcross::{
    act_on_chamber, connect, is_identity, make_generator, preservation_check, random_element, GroupElement,
};
use fjrw_core::Rational;
use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn params(r: u32, s: u32) -> ModelParams {
    ModelParams::new(r, s).unwrap()
}

fn markings(p: ModelParams, twists: &[(u32, u32)]) -> MarkingSet {
    let ms: Vec<Marking> = twists.iter().enumerate().map(|(i, &(a, b))| Marking { label: i as u32 + 1, a, b }).collect();
    MarkingSet::new(p, &ms).unwrap()
}

fn uniform(ms: &MarkingSet, d: u32) -> BTreeMap<u32, u32> {
    ms.twists().keys().map(|&l| (l, d)).collect()
}

fn all_twists(p: ModelParams) -> Vec<(u32, u32)> {
    (0..p.r).flat_map(|a| (0..p.s).map(move |b| (a, b))).collect()
}

/// The three-marking (3,3) configuration used by several criteria.
fn reference_chamber() -> ChamberIndex<Rational> {
    let ms = markings(params(3, 3), &[(1, 1), (1, 1), (2, 2)]);
    ChamberIndex::build_minimal(ms.clone(), uniform(&ms, 1)).unwrap()
}

fn samples(nu: &ChamberIndex<Rational>, n: usize, seed: u64) -> Vec<GroupElement<Rational>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_element(nu.markings(), nu.dmax(), 5, &mut rng).unwrap()).collect()
}

fn forced_simple_invariants() -> Outcome {
    let mut checked = 0;
    for (r, s) in [(2, 3), (3, 3), (3, 4)] {
        let p = params(r, s);
        for twist in all_twists(p) {
            let ms = markings(p, &[twist, twist]);
            let nu = ChamberIndex::<Rational>::build_minimal(ms.clone(), uniform(&ms, 0)).unwrap();
            let empty = ms.balanced_keys(&Cell::empty()).unwrap();
            ensure!(empty.len() == 2, "({r},{s}): {} empty graphs", empty.len());
            for key in &empty {
                ensure!(nu.value(key).unwrap() == int(-1), "({r},{s}) empty p={}", key.p);
                checked += 1;
            }
            for l in [1, 2] {
                for key in ms.balanced_keys(&Cell::new([(l, 0)]).unwrap()).unwrap() {
                    ensure!(nu.value(&key).unwrap() == int(1), "({r},{s}) twist {twist:?} singleton p={}", key.p);
                    checked += 1;
                }
            }
        }
    }
    Ok(format!("{checked} forced values"))
}

fn singleton_amplitudes() -> Outcome {
    let mut checked = 0;
    for (r, s) in [(2, 3), (3, 3), (3, 4)] {
        let p = params(r, s);
        for twist in all_twists(p) {
            let ms = markings(p, &[twist]);
            let nu = ChamberIndex::<Rational>::build_minimal(ms.clone(), uniform(&ms, 4)).unwrap();
            for d in 0..=4 {
                let cell = Cell::new([(1, d)]).unwrap();
                let a = nu.amplitude(&cell).unwrap();
                ensure!(a == sign::<Rational>(d as i64), "({r},{s}) twist {twist:?} d={d}: {a}");
                ensure!(nu.amplitude_by_partitions(&cell).unwrap() == a, "partition sum disagrees at d={d}");
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} singleton amplitudes"))
}

fn period_identity() -> Outcome {
    let nu = reference_chamber();
    let w = bmodel::build_potential(&nu).unwrap();
    let table = bmodel::period_table(nu.params(), &w).unwrap();
    let extracted = bmodel::extract_amplitudes(nu.markings(), nu.dmax(), &table).map_err(|e| e.to_string())?;
    let direct = nu.amplitudes().unwrap();
    let mut n = 0;
    for (cell, v) in direct.iter().filter(|(c, _)| !c.is_empty()) {
        ensure!(extracted.get(cell) == Some(v), "{cell}: period gives {:?}, amplitude {v}", extracted.get(cell));
        n += 1;
    }
    ensure!(n == extracted.len(), "extracted {} cells, expected {n}", extracted.len());
    Ok(format!("{n} cells agree"))
}

fn chamber_independence() -> Outcome {
    let nu = reference_chamber();
    let base = nu.amplitudes().unwrap();
    for (i, g) in samples(&nu, 20, 4).iter().enumerate() {
        ensure!(g.factors.len() <= 5, "sample {i} has {} factors", g.factors.len());
        let moved = act_on_chamber(g, &nu).unwrap();
        ensure!(moved.check_axioms().passed(), "sample {i}: g(nu) fails the axioms");
        ensure!(moved.amplitudes().unwrap() == base, "sample {i}: amplitudes changed");
    }
    Ok("20 random elements".into())
}

fn torsor_round_trip() -> Outcome {
    let nu = reference_chamber();
    let mut non_identity = 0;
    for (i, g) in samples(&nu, 20, 5).iter().enumerate() {
        let moved = act_on_chamber(g, &nu).unwrap();
        let h = connect(&nu, &moved).map_err(|e| format!("sample {i}: {e}"))?;
        ensure!(act_on_chamber(&h, &nu).unwrap() == moved, "sample {i}: connect misses g(nu)");
        if !is_identity(g, nu.markings()).unwrap() {
            non_identity += 1;
            ensure!(moved != nu, "sample {i}: non-identity element fixes nu");
        }
    }
    ensure!(non_identity > 0, "no non-identity sample drawn");
    Ok(format!("20 round trips, {non_identity} non-identity"))
}

fn automorphism_preservation() -> Outcome {
    let nu = reference_chamber();
    let ms = nu.markings();
    let mut generators = 0;
    for cell in nu.cells().into_iter().filter(|c| !c.is_empty()) {
        for key in ms.critical_keys(&cell).unwrap() {
            for c in [ratio::<Rational>(1, 1), ratio(-1, 2)] {
                let g = GroupElement { factors: vec![make_generator(ms, key.clone(), c).unwrap()] };
                let rep = preservation_check(&g, ms).unwrap();
                ensure!(rep.passed(), "generator on {cell} p={}: {:?}", key.p, rep.details);
                generators += 1;
            }
        }
    }
    ensure!(generators > 0, "no generators on the domain");
    for (i, g) in samples(&nu, 20, 6).iter().enumerate() {
        let rep = preservation_check(g, ms).unwrap();
        ensure!(rep.passed(), "product {i}: {:?}", rep.details);
    }
    Ok(format!("{generators} generators, 20 products"))
}

fn open_trr() -> Outcome {
    let p = params(3, 3);
    let engine = InvariantEngine::<Rational>::new(p, SignConvention::default());
    let pool = [(1, 1), (2, 2), (1, 2)];
    let mut counts = [0usize; 3];
    for n in 1..=3usize {
        for code in 0..pool.len().pow(n as u32) {
            let twists: Vec<(u32, u32)> = (0..n).map(|i| pool[code / pool.len().pow(i as u32) % pool.len()]).collect();
            let ms = markings(p, &twists);
            for cell in ms.cells(&uniform(&ms, 1)).into_iter().filter(|c| c.len() == n) {
                let r1 = engine.verify_open_trr(&ms, &cell, 1, None).unwrap();
                ensure!(r1.is_zero(), "first identity {twists:?} {cell}: residual {r1}");
                counts[0] += 1;
                if n >= 2 {
                    let r2 = engine.verify_open_trr(&ms, &cell, 1, Some(2)).unwrap();
                    ensure!(r2.is_zero(), "second identity {twists:?} {cell}: residual {r2}");
                    let r3 = engine.verify_solved_form(&ms, &cell).unwrap();
                    ensure!(r3.is_zero(), "solved form {twists:?} {cell}: residual {r3}");
                    counts[1] += 1;
                    counts[2] += 1;
                }
            }
        }
    }
    Ok(format!("{} + {} + {} residuals vanish", counts[0], counts[1], counts[2]))
}

fn closed_trr_calibration() -> Outcome {
    let p = params(3, 3);
    let instances: Vec<_> = [3, 4].into_iter().flat_map(|n| closed_trr_instances(p, n, 1, 1)).collect();
    let mut surviving = Vec::new();
    let mut summary = Vec::new();
    for conv in [SignConvention::MirrorA, SignConvention::OpenMs] {
        let engine = InvariantEngine::<Rational>::new(p, conv);
        let (mut vanishing, mut failing, mut nonzero, mut dependent) = (0, 0, 0, 0);
        for ins in &instances {
            if let ClosedTrr::Residual { residual, nonzero_terms } = engine.verify_closed_trr(ins).unwrap() {
                if residual.is_zero() {
                    vanishing += 1;
                } else {
                    failing += 1;
                }
                if nonzero_terms > 0 {
                    nonzero += 1;
                }
            }
            if !engine.distinguished_independent(ins).unwrap() {
                dependent += 1;
            }
        }
        ensure!(nonzero > 0, "{conv:?}: every instance is trivially zero");
        if failing == 0 && dependent == 0 {
            surviving.push(conv);
        }
        summary.push(format!("{conv:?} {vanishing}/{} vanish, {dependent} choice-dependent", vanishing + failing));
    }
    ensure!(surviving == vec![SignConvention::default()], "surviving conventions {surviving:?}, default {:?}", SignConvention::default());
    Ok(format!("{} instances; {}", instances.len(), summary.join(", ")))
}

fn symmetric_compatibility() -> Outcome {
    let ms = markings(params(3, 3), &[(1, 1), (1, 1), (0, 1)]);
    let minimal = ChamberIndex::<Rational>::build_minimal(ms.clone(), uniform(&ms, 1)).unwrap();
    let g = samples(&minimal, 1, 9).remove(0);
    let perturbed = act_on_chamber(&g, &minimal).unwrap();
    let sym = perturbed.symmetrize().unwrap();
    ensure!(sym.is_symmetric() && sym.check_axioms().passed(), "symmetrization failed");
    let (ws, psi) = bmodel::build_potential_sym(&sym).unwrap();
    let mapped = ws.map_elements(psi.open_ring(), |e| psi.apply(e)).unwrap();
    ensure!(mapped == bmodel::build_potential(&sym).unwrap(), "psi(W_sym) differs from W");
    let mut cycles = 0;
    for cycle in CycleLabel::all(sym.params()).into_iter().filter(|c| c.is_good_basis(sym.params())) {
        let series = bmodel::period_integral(sym.params(), &ws, cycle).unwrap();
        let head = bmodel::flat_head(&series, cycle);
        ensure!(head.holds, "cycle {cycle}: {}", head.detail);
        cycles += 1;
    }
    Ok(format!("psi compatible, flat head on {cycles} cycles"))
}

fn worked_values() -> Outcome {
    let p = params(3, 3);
    let two = markings(p, &[(1, 1), (1, 1)]);
    let nu = ChamberIndex::<Rational>::build_minimal(two.clone(), uniform(&two, 0)).unwrap();
    let a = nu.amplitude(&Cell::new([(1, 0), (2, 0)]).unwrap()).unwrap();
    ensure!(a == int(1), "A({{1,2}},0) = {a}");
    let one = markings(p, &[(1, 1)]);
    let nu = ChamberIndex::<Rational>::build_minimal(one.clone(), uniform(&one, 1)).unwrap();
    let v = nu.value(&BalancedKey { cell: Cell::new([(1, 1)]).unwrap(), p: 0 }).unwrap();
    ensure!(v == ratio(-3, 2), "nu = {v}");
    Ok("A = 1, nu = -3/2".into())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("forced simple invariants", Duration::from_secs(1), forced_simple_invariants),
        ("singleton amplitudes", Duration::from_secs(5), singleton_amplitudes),
        ("period-integral identity", Duration::from_secs(60), period_identity),
        ("chamber independence", Duration::from_secs(60), chamber_independence),
        ("torsor round-trip", Duration::from_secs(60), torsor_round_trip),
        ("automorphism preservation", Duration::from_secs(10), automorphism_preservation),
        ("open TRR", Duration::from_secs(300), open_trr),
        ("closed TRR and convention calibration", Duration::from_secs(300), closed_trr_calibration),
        ("symmetric/non-symmetric compatibility", Duration::from_secs(30), symmetric_compatibility),
        ("worked values", Duration::from_secs(1), worked_values),
    ];
    let mut failed = 0;
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let (status, detail) = match result {
            Ok(d) if elapsed <= *budget => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; over the {budget:?} budget")),
            Err(e) => ("FAIL", e),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("criterion {:>2} {status}: {name} ({:.2?}) - {detail}", i + 1, elapsed);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
