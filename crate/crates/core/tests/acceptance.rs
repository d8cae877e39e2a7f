//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails other than those in `KNOWN_FAILURES`.

use std::process::{Command, ExitCode};

use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pq_spectra::decimation::{exceptional_set, verify_decimation_identity, CubicMap};
use pq_spectra::eigenfunction::{extend_formal_eigenfunction, trace_at_powers_of_three};
use pq_spectra::exact::{self, ExactParams};
use pq_spectra::julia::{cubic_preimages, julia_cover};
use pq_spectra::laplacian::{invariant_measure, transition_probabilities};
use pq_spectra::spectral::{
    decimation_closure_check, ds_formula, ds_kigami_lapidus, lambda1_scaling,
    spectrum_approximation, truncation_spectrum,
};
use pq_spectra::{Boundary, Caps, PqParams};

type Criterion = fn() -> Outcome;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

fn rng(tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x5eed_0000 + tag)
}

fn random_p(rng: &mut ChaCha8Rng) -> PqParams {
    PqParams::new(rng.gen_range(0.05..0.95)).unwrap()
}

fn non_exceptional_z(params: &PqParams, rng: &mut ChaCha8Rng, gap: f64) -> f64 {
    loop {
        let z = rng.gen_range(0.0..=2.0);
        if !params.is_exceptional(z, gap) {
            return z;
        }
    }
}

/// Reflecting level-1 matrix written out by hand from the row rules.
fn level_one_dense(p: f64, q: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(
        4,
        4,
        &[
            1.0, -1.0, 0.0, 0.0, //
            -q, 1.0, -p, 0.0, //
            0.0, -p, 1.0, -q, //
            0.0, 0.0, -1.0, 1.0,
        ],
    )
}

fn sorted_real_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.complex_eigenvalues().iter().map(|c| c.re).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn max_set_gap(mut got: Vec<f64>, mut want: Vec<f64>) -> f64 {
    got.sort_by(f64::total_cmp);
    want.sort_by(f64::total_cmp);
    if got.len() != want.len() {
        return f64::INFINITY;
    }
    got.iter()
        .zip(&want)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

fn criterion_1() -> Outcome {
    let mut rng = rng(1);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let params = random_p(&mut rng);
        let z = non_exceptional_z(&params, &mut rng, 1e-3);
        for level in 1..=3 {
            let res = verify_decimation_identity(&params, level, z).unwrap();
            worst = worst.max(res.interior);
        }
    }
    Outcome::new(
        worst < 1e-10,
        format!("max interior residual {worst:.3e} (tol 1e-10)"),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = rng(2);
    let mut worst: f64 = 0.0;
    let mut forward: f64 = 0.0;
    for _ in 0..50 {
        let params = random_p(&mut rng);
        let map = CubicMap::new(params);
        let (p, q) = (params.p(), params.q());
        for (seed, want) in [(0.0, vec![0.0, 1.0 + p, 1.0 + q]), (2.0, vec![p, q, 2.0])] {
            let roots = cubic_preimages(&map, seed).roots;
            for &r in &roots {
                forward = forward.max((map.eval(r) - seed).abs());
            }
            worst = worst.max(max_set_gap(roots, want));
        }
    }
    Outcome::new(
        worst < 1e-12 && forward < 1e-12,
        format!("max root error {worst:.3e}, max |R(root) - seed| {forward:.3e} (tol 1e-12)"),
    )
}

fn criterion_3() -> Outcome {
    let caps = Caps::default();
    let mut rng = rng(3);
    let mut worst: f64 = 0.0;
    let mut oracle: f64 = 0.0;
    for _ in 0..20 {
        let params = random_p(&mut rng);
        let (p, q) = (params.p(), params.q());
        let want = vec![0.0, p, 1.0 + q, 2.0];
        let dense = sorted_real_eigenvalues(level_one_dense(p, q));
        oracle = oracle.max(max_set_gap(dense, want.clone()));
        let got = truncation_spectrum(&params, 1, Boundary::Reflecting, &caps).unwrap();
        worst = worst.max(max_set_gap(got, want));
    }
    let half = PqParams::new(0.5).unwrap();
    let cheb = truncation_spectrum(&half, 1, Boundary::Reflecting, &caps).unwrap();
    let cheb_gap = max_set_gap(cheb, vec![0.0, 0.5, 1.5, 2.0]);
    Outcome::new(
        worst < 1e-10 && oracle < 1e-10 && cheb_gap < 1e-10,
        format!("library {worst:.3e}, dense oracle {oracle:.3e}, p=1/2 {cheb_gap:.3e} (tol 1e-10)"),
    )
}

fn criterion_4() -> Outcome {
    let caps = Caps::default();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for p in [0.2, 0.25, 1.0 / 3.0, 0.4, 0.5, 0.7] {
        let params = PqParams::new(p).unwrap();
        for level in 1..=5 {
            let report = decimation_closure_check(&params, level, 1e-8, &caps).unwrap();
            worst = worst.max(report.max_distance);
            checked += report.checked;
        }
    }
    Outcome::new(
        worst < 1e-8,
        format!("{checked} eigenvalues, max dist(R(z), coarse spectrum) {worst:.3e} (tol 1e-8)"),
    )
}

fn criterion_5() -> Outcome {
    let caps = Caps::default();
    let mut worst: f64 = 0.0;
    let mut monotone = true;
    let mut trail = Vec::new();
    for p in [0.2, 0.25, 0.3, 0.4] {
        let params = PqParams::new(p).unwrap();
        let mut previous = f64::INFINITY;
        for level in 1..=6 {
            let approx = spectrum_approximation(&params, level, &caps).unwrap();
            worst = worst.max(approx.max_cover_distance);
            if approx.hausdorff_to_orbit >= previous {
                monotone = false;
                trail.push(format!("p={p} m={level}"));
            }
            previous = approx.hausdorff_to_orbit;
        }
    }
    Outcome::new(
        worst < 1e-8 && monotone,
        format!(
            "max distance to cover {worst:.3e} (tol 1e-8); Hausdorff to orbit monotone: {monotone}{}",
            if trail.is_empty() {
                String::new()
            } else {
                format!(" (breaks at {})", trail.join(", "))
            }
        ),
    )
}

fn criterion_6() -> Outcome {
    let quarter = CubicMap::new(PqParams::new(0.25).unwrap());
    let cover = julia_cover(&quarter, 12).unwrap();
    let shrinks = cover.total_length < 0.02;
    let half = CubicMap::new(PqParams::new(0.5).unwrap());
    let mut full = true;
    for level in 0..=12 {
        let c = julia_cover(&half, level).unwrap();
        full &= (c.total_length - 2.0).abs() < 1e-12 && c.gaps.is_empty();
    }
    Outcome::new(
        shrinks && full,
        format!(
            "p=1/4 level-12 length {:.4e} (< 0.02); p=1/2 full [0,2] with no gaps at levels 0..=12: {full}",
            cover.total_length
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = rng(7);
    let mut worst_ratio: f64 = 0.0;
    for p in [0.2, 0.3, 0.4] {
        let params = PqParams::new(p).unwrap();
        let map = CubicMap::new(params);
        let growth = map.eval_prime(0.0) / 9.0;
        for _ in 0..50 {
            let z = non_exceptional_z(&params, &mut rng, 1e-3);
            let trace = extend_formal_eigenfunction(&params, z, 243);
            for n in 0..=5u32 {
                let expected = 1.0 - map.iterate(z, n);
                let got = trace.power_trace[n as usize];
                let tol = 1e-8 * growth.powi(n as i32) * expected.abs().max(1.0);
                worst_ratio = worst_ratio.max((got - expected).abs() / tol);
            }
        }
    }
    let mut exact_ok = true;
    for p in [0.2, 0.3, 0.4] {
        let params = PqParams::new(p).unwrap();
        let map = CubicMap::new(params);
        for z in [0.0, 2.0] {
            let trace = extend_formal_eigenfunction(&params, z, 243);
            let check = trace_at_powers_of_three(&trace, &map);
            exact_ok &= check.residuals.iter().all(|&r| r == 0.0);
        }
    }
    Outcome::new(
        worst_ratio < 1.0 && exact_ok,
        format!("worst residual / tolerance {worst_ratio:.3e} (< 1); zero residual at z in {{0, 2}}: {exact_ok}"),
    )
}

fn criterion_8() -> Outcome {
    let mut ok_zero = true;
    let mut ok_two = true;
    let mut worst_one: f64 = 0.0;
    let mut first_break: Option<(f64, usize)> = None;
    for p in [0.2, 0.3, 0.4, 0.5, 0.65] {
        let params = PqParams::new(p).unwrap();
        let f0 = extend_formal_eigenfunction(&params, 0.0, 729);
        ok_zero &= f0.values.iter().all(|&v| v == 1.0);
        let f2 = extend_formal_eigenfunction(&params, 2.0, 729);
        ok_two &= f2
            .values
            .iter()
            .enumerate()
            .all(|(x, &v)| v == if x % 2 == 0 { 1.0 } else { -1.0 });
        let f1 = extend_formal_eigenfunction(&params, 1.0, 729);
        let target = (params.q() / params.p()).powi(2);
        for x in (4..=729).step_by(4) {
            let deviation = (f1.values[x].abs() - target).abs() / target;
            worst_one = worst_one.max(deviation);
            if deviation > 1e-9 && first_break.is_none() && p != 0.5 {
                first_break = Some((p, x));
            }
        }
    }
    let ep = ExactParams::parse("3/10").unwrap();
    let exact_f = exact::formal_eigenfunction(&ep, &BigRational::one(), 729);
    let ratio = ep.q() / ep.p();
    let square = &ratio * &ratio;
    let exact_break = (4..=729)
        .step_by(4)
        .find(|&x| exact_f[x] != square && -exact_f[x].clone() != square)
        .map(|x| format!("4x={x}, f={}", exact_f[x]))
        .unwrap_or_else(|| "none".into());
    Outcome::new(
        ok_zero && ok_two && worst_one < 1e-9,
        format!(
            "z=0 constant: {ok_zero}; z=2 alternating: {ok_two}; z=1 |f(4x)|=(q/p)^2 max relative deviation {worst_one:.3e} \
             (first float break {first_break:?}; exact p=3/10 first break {exact_break})"
        ),
    )
}

fn criterion_9() -> Outcome {
    let extent = 3usize.pow(7);
    let mut rng = rng(9);
    let mut balance: f64 = 0.0;
    let mut powers: f64 = 0.0;
    for _ in 0..25 {
        let params = random_p(&mut rng);
        let pi = invariant_measure(&params, extent);
        for x in 0..extent {
            let (_, right) = transition_probabilities(&params, x as u64);
            let (left, _) = transition_probabilities(&params, x as u64 + 1);
            let (a, b) = (pi.values[x] * right, pi.values[x + 1] * left);
            balance = balance.max((a - b).abs() / a.max(b));
        }
        let mut n = 1;
        while n <= extent {
            powers = powers.max((pi.values[n] - pi.values[1]).abs() / pi.values[1]);
            n *= 3;
        }
    }
    let mut exact_ok = true;
    for text in ["1/3", "1/5", "2/7", "3/10", "1/2"] {
        let ep = ExactParams::parse(text).unwrap();
        let pi = exact::invariant_measure(&ep, 3 * 729);
        exact_ok &= (0..=729).all(|x| pi[x] == pi[3 * x]);
        for x in 0..3 * 729 {
            let (_, right) = ep.transition_probabilities(x as u64);
            let (left, _) = ep.transition_probabilities(x as u64 + 1);
            exact_ok &= &pi[x] * right == &pi[x + 1] * left;
        }
        exact_ok &= !pi[0].is_zero() && pi[0] == BigRational::one();
    }
    Outcome::new(
        balance < 1e-12 && powers < 1e-12 && exact_ok,
        format!(
            "detailed balance {balance:.3e}, pi(3^n) spread {powers:.3e} (tol 1e-12); exact pi(x)=pi(3x) for x<=729: {exact_ok}"
        ),
    )
}

fn criterion_10() -> Outcome {
    let caps = Caps::default();
    let half = PqParams::new(0.5).unwrap();
    let ds_half = ds_formula(&half);
    let tiny = PqParams::from_pq(1.0 / 40.0).unwrap();
    let ds_tiny = ds_formula(&tiny);
    let mut rng = rng(10);
    let mut kl_gap: f64 = 0.0;
    for _ in 0..100 {
        let params = random_p(&mut rng);
        let (kl, _) = ds_kigami_lapidus(&params).unwrap();
        kl_gap = kl_gap.max((kl - ds_formula(&params)).abs());
    }
    let ratio_error = |p: f64, level: u32| {
        let params = PqParams::new(p).unwrap();
        let table = lambda1_scaling(&params, level, &caps).unwrap();
        let ratio = table.rows[level as usize - 2].ratio.unwrap();
        (ratio - table.target).abs() / table.target
    };
    let r_half = ratio_error(0.5, 6);
    let r3 = ratio_error(0.3, 7);
    let r4 = ratio_error(0.4, 7);
    Outcome::new(
        ds_half == 1.0
            && (ds_tiny - 0.5).abs() < 1e-12
            && kl_gap < 1e-12
            && r_half < 0.05
            && r3 < 0.05
            && r4 < 0.05,
        format!(
            "ds(1/2)={ds_half}, ds(pq=1/40)={ds_tiny:.15}, max |KL - formula| {kl_gap:.3e}; \
             lambda1 ratio errors: p=1/2 {r_half:.3e}, p=0.3 {r3:.3e}, p=0.4 {r4:.3e} (< 5%)"
        ),
    )
}

fn criterion_11() -> Outcome {
    let caps = Caps::default();
    let mut min_dist = f64::INFINITY;
    let mut dirichlet_dist = f64::INFINITY;
    let mut images: f64 = 0.0;
    for p in [0.2, 0.3, 0.4] {
        let params = PqParams::new(p).unwrap();
        let [hi, lo] = exceptional_set(&params);
        let distance = |zs: Vec<f64>| {
            zs.iter()
                .map(|z| (z - hi).abs().min((z - lo).abs()))
                .fold(f64::INFINITY, f64::min)
        };
        for level in 1..=6 {
            let reflecting =
                truncation_spectrum(&params, level, Boundary::Reflecting, &caps).unwrap();
            min_dist = min_dist.min(distance(reflecting));
            let dirichlet =
                truncation_spectrum(&params, level, Boundary::Dirichlet, &caps).unwrap();
            dirichlet_dist = dirichlet_dist.min(distance(dirichlet));
        }
        let map = CubicMap::new(params);
        images = images
            .max((map.eval(lo) - 2.0).abs())
            .max(map.eval(hi).abs());
    }
    Outcome::new(
        min_dist > 1e-6 && images < 1e-12,
        format!(
            "reflecting truncations: min distance to 1±p {min_dist:.3e} (> 1e-6); \
             |R(1-p)-2|, |R(1+p)| <= {images:.3e}; Dirichlet truncations (informational) {dirichlet_dist:.3e}"
        ),
    )
}

fn criterion_12() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_pq-spectra");
    let run = || {
        Command::new(bin)
            .args(["verify-all", "--p", "0.3", "--seed", "17"])
            .output()
            .expect("run pq-spectra")
    };
    let (a, b) = (run(), run());
    let same = a.stdout == b.stdout && !a.stdout.is_empty();
    let ok = a.status.success() && b.status.success();
    Outcome::new(
        same && ok,
        format!(
            "{} bytes, identical: {same}, exit codes {:?}/{:?}",
            a.stdout.len(),
            a.status.code(),
            b.status.code()
        ),
    )
}

/// Criteria that fail for a documented mathematical reason. The run still
/// reports them as FAIL; it only exits non-zero when the set of failures
/// differs from this list.
const KNOWN_FAILURES: &[(usize, &str)] = &[(
    8,
    "exact rational recursion at z=1 gives |f(4x)| = (q/p)^2 only for 4x <= 24; \
     f(28) = (q/p)^4, so the closed form does not hold for all x",
)];

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 12] = [
        ("decimation identity", criterion_1),
        ("preimage exactness", criterion_2),
        ("level-1 spectrum", criterion_3),
        ("spectral closure", criterion_4),
        ("Julia containment", criterion_5),
        ("measure-zero trend", criterion_6),
        ("eigenfunction trace identity", criterion_7),
        ("fixed traces", criterion_8),
        ("invariant measure", criterion_9),
        ("spectral dimension", criterion_10),
        ("exceptional points", criterion_11),
        ("determinism", criterion_12),
    ];
    let mut failures = 0;
    let mut unexpected = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let number = i + 1;
        let outcome = check();
        let known = KNOWN_FAILURES.iter().find(|(n, _)| *n == number);
        let tag = match (outcome.passed, known) {
            (true, None) => "PASS",
            (true, Some(_)) => "PASS (listed as known failure)",
            (false, Some(_)) => "FAIL (known)",
            (false, None) => "FAIL",
        };
        println!("criterion {number:>2} [{tag}] {name}: {}", outcome.detail);
        if let (false, Some((_, reason))) = (outcome.passed, known) {
            println!("             reason: {reason}");
        }
        if !outcome.passed {
            failures += 1;
        }
        if outcome.passed == known.is_some() {
            unexpected += 1;
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
