//! Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

use std::path::Path;
use std::time::Instant;

use hzlab::bounds_verifier::{
    abs_explorer, bks_check, block_identity_checks, exponent_fit, holder_sweep, log_grid, ratio_experiment,
    trial_rng, BoundTag, OperatorSampler, RatioParams,
};
use hzlab::cli_report::{build_function, circle_lacunary, run, theorem_defaults, RunConfig};
use hzlab::contraction_dilation::{dilate, lemma_mc_residual, semi_spectral_doi, ContractionMatrix};
use hzlab::extremal_search::{
    evaluate, mcc_construction, mcc_transfer, omega_search, omega_sweep, OmegaTag, SearchParams, TransferDirection,
    Witness,
};
use hzlab::function::{ExponentialSum, FunctionModel, Polynomial, PowerAbs};
use hzlab::function_analysis::{partition_defect, qn_identity_residual, reconstruct, PeriodicSignal};
use hzlab::linalg::{random, spectral_norm, C64};
use hzlab::matrix_calc::{bsf_residual, lemma_m_residual, lemma_pl_slack, lemma_vl_slack};
use hzlab::moduli::{doubling_check, omega_star, vp_error_ratio, Grid, ModulusOfContinuity};
use hzlab::set_combinatorics::{kappa_closed, sets_with_max, verify_gen, KappaTable, UnitaryFamily};
use num_bigint::BigUint;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_real_poly<R: Rng>(rng: &mut R, max_deg: usize) -> Polynomial {
    let d = rng.random_range(0..=max_deg);
    let c: Vec<f64> = (0..=d).map(|_| rng.random_range(-1.0..1.0)).collect();
    Polynomial::real(&c)
}

fn random_trig<R: Rng>(rng: &mut R, deg: usize) -> PeriodicSignal {
    PeriodicSignal::new(
        (0..2 * deg + 1)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect(),
    )
}

fn random_analytic<R: Rng>(rng: &mut R, deg: usize) -> Polynomial {
    Polynomial::analytic(
        (0..=deg)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect(),
    )
}

fn c1_bsf() -> Outcome {
    let s = OperatorSampler::default();
    let s = OperatorSampler::new([2, 8], 1.0, s.delta_range).unwrap();
    let mut worst = 0.0f64;
    for t in 0..1000 {
        let mut rng = trial_rng(101, t);
        let n = s.dim(&mut rng);
        let f = random_real_poly(&mut rng, 6);
        let a = s.hermitian(&mut rng, n);
        let b = s.hermitian(&mut rng, n);
        worst = worst.max(bsf_residual(&f, &a, &b).unwrap());
    }
    outcome(worst <= 1e-9, format!("max relative residual {worst:.3e} over 1000 pairs (tol 1e-9)"))
}

fn c2_lemma_m() -> Outcome {
    let mut worst = [0.0f64; 2];
    for (slot, (m, hi)) in [(2usize, 5usize), (3, 4)].into_iter().enumerate() {
        let s = OperatorSampler::new([1, hi], 1.0, [1e-3, 1.0]).unwrap();
        for t in 0..500 {
            let mut rng = trial_rng(202 + m as u64, t);
            let n = s.dim(&mut rng);
            let f = random_real_poly(&mut rng, 6);
            let a = s.hermitian(&mut rng, n);
            let d = s.delta(&mut rng);
            let k = s.direction(&mut rng, n, d);
            worst[slot] = worst[slot].max(lemma_m_residual(&f, &a, &k, m).unwrap());
        }
    }
    let w = worst[0].max(worst[1]);
    outcome(
        w <= 1e-8,
        format!("max relative residual m=2 {:.3e}, m=3 {:.3e} (tol 1e-8)", worst[0], worst[1]),
    )
}

fn c3_gen() -> Outcome {
    let table = KappaTable::build(8).unwrap();
    let mut worst = 0.0f64;
    for big_n in 2..=5u32 {
        let s = OperatorSampler::new([1, 4], 1.0, [1e-3, 1.0]).unwrap();
        for t in 0..10 {
            let mut rng = trial_rng(300 + big_n as u64, t);
            let n = s.dim(&mut rng);
            let fam = UnitaryFamily::new((0..big_n).map(|_| random::haar_unitary(&mut rng, n)).collect()).unwrap();
            let deg = rng.random_range(0..=4);
            let f = random_trig(&mut rng, deg);
            worst = worst.max(verify_gen(big_n, &fam, &f, &table).unwrap().residual);
        }
    }
    let mut mismatches = 0;
    let mut checked = 0;
    for n in 1..=8 {
        for j in sets_with_max(n) {
            checked += 1;
            let rec = table.get(j).unwrap();
            let expect = if j.contains(1) { kappa_closed(j) } else { BigUint::ZERO };
            if *rec != expect {
                mismatches += 1;
            }
        }
    }
    outcome(
        worst <= 1e-8 && mismatches == 0,
        format!("max residual {worst:.3e} for N in 2..=5 (tol 1e-8); κ mismatches {mismatches}/{checked}"),
    )
}

fn c4_bks() -> Outcome {
    let s = OperatorSampler::new([1, 8], 1.0, [1e-4, 1.0]).unwrap();
    let mut parts = Vec::new();
    let mut ok = true;
    for alpha in [0.25, 0.5, 0.75] {
        match bks_check(&s, alpha, 10_000, 404) {
            Ok(rec) => parts.push(format!("α={alpha}: max {:.12}", rec.summary.max_ratio)),
            Err(e) => {
                ok = false;
                parts.push(format!("α={alpha}: {e}"));
            }
        }
    }
    outcome(ok, format!("{} (bound 1 + 1e-10, 10^4 PSD pairs each)", parts.join(", ")))
}

fn c5_exponent() -> Outcome {
    let deltas = log_grid(1e-4, 1e-1, 16);
    let mut half = (f64::INFINITY, f64::NEG_INFINITY);
    let mut lin = (f64::INFINITY, f64::NEG_INFINITY);
    let sqrt = PowerAbs::new(0.5);
    let id = Polynomial::identity();
    for dim in 2..=8 {
        for seed in 0..3 {
            let s = exponent_fit(&holder_sweep(&sqrt, dim, &deltas, 500 + seed).unwrap().sweep_points()).unwrap().slope;
            half = (half.0.min(s), half.1.max(s));
            let s = exponent_fit(&holder_sweep(&id, dim, &deltas, 500 + seed).unwrap().sweep_points()).unwrap().slope;
            lin = (lin.0.min(s), lin.1.max(s));
        }
    }
    let pass = half.0 >= 0.45 && half.1 <= 0.55 && lin.0 >= 0.999 && lin.1 <= 1.001;
    outcome(
        pass,
        format!(
            "|t|^1/2 slopes [{:.4}, {:.4}] (want [0.45, 0.55]); identity slopes [{:.6}, {:.6}] (want [0.999, 1.001])",
            half.0, half.1, lin.0, lin.1
        ),
    )
}

fn c6_kernels() -> Outcome {
    let pod = log_grid(1e-6, 1e6, 1000).into_iter().map(partition_defect).fold(0.0, f64::max);
    let mut rec = 0.0f64;
    for s in 0..5 {
        let mut rng = trial_rng(606, s);
        let f = random_trig(&mut rng, 1024);
        for big_n in [0u32, 3, 7] {
            rec = rec.max(reconstruct(&f, big_n).max_coeff_diff(&f));
        }
    }
    let tests = [
        ExponentialSum::cos_series(&[(1.0, 1.0)]),
        ExponentialSum::cos_series(&[(1.0, 0.3), (0.5, 2.5), (0.25, 7.0)]),
        ExponentialSum::new(vec![(C64::new(0.5, 0.5), 3.0), (C64::new(-1.0, 0.2), -0.7)], false),
    ];
    let xs: Vec<f64> = (0..7).map(|i| -1.5 + 0.5 * i as f64).collect();
    let mut qn = 0.0f64;
    for f in &tests {
        for m in 1..=3 {
            for n in -4..=8 {
                qn = qn.max(qn_identity_residual(f, n, m, &xs).unwrap());
            }
        }
    }
    outcome(
        pod <= 1e-12 && rec <= 1e-12 && qn <= 1e-8,
        format!("partition defect {pod:.3e} (tol 1e-12); reconstruction {rec:.3e} (tol 1e-12); Q_n residual {qn:.3e} (tol 1e-8)"),
    )
}

fn c7_omega_star() -> Outcome {
    let mut worst = 0.0f64;
    for m in 1..=3u32 {
        for alpha in [0.1, 0.25, 0.5, 0.75, 0.9, 1.3, 1.7, 2.2, 2.8] {
            if alpha >= m as f64 {
                continue;
            }
            let w = ModulusOfContinuity::power(alpha);
            for x in log_grid(1e-4, 1e2, 13) {
                let expect = x.powf(alpha) / (m as f64 - alpha);
                worst = worst.max((omega_star(&w, m, x) - expect).abs() / expect);
            }
        }
    }
    let ob = doubling_check(&ModulusOfContinuity::power(0.5), 1, &log_grid(1e-6, 1e3, 200));
    let ob_ok = ob.ob_pass == Some(true);
    outcome(
        worst <= 1e-8 && ob_ok,
        format!(
            "max relative error {worst:.3e} (tol 1e-8); √t doubling bound κ̂={:.6}, factor {:?}, holds: {ob_ok}",
            ob.kappa_hat, ob.ob_factor
        ),
    )
}

fn c8_pl_vl() -> Outcome {
    let s = OperatorSampler::new([1, 8], 1.0, [1e-3, 1.0]).unwrap();
    let mut pl = 0usize;
    let mut vl = 0usize;
    let mut min_pl = f64::INFINITY;
    let mut min_vl = f64::INFINITY;
    for t in 0..10_000 {
        let mut rng = trial_rng(808, t);
        let n = s.dim(&mut rng);
        let x = random::gaussian(&mut rng, n, n);
        let x = &x * C64::new(rng.random_range(0.0..1.0) / spectral_norm(&x).max(1e-300), 0.0);
        let y = random::gaussian(&mut rng, n, n);
        let y = &y * C64::new(rng.random_range(0.0..1.0) / spectral_norm(&y).max(1e-300), 0.0);
        let p = rng.random_range(1..=6u32);
        let sl = lemma_pl_slack(&x, &y, p);
        min_pl = min_pl.min(sl);
        if sl < -1e-12 {
            pl += 1;
        }
        let h = s.hermitian(&mut rng, n);
        let tm = &h * C64::new(rng.random_range(0.0..0.95) / spectral_norm(&h).max(1e-300), 0.0);
        let sv = lemma_vl_slack(&tm, &x).unwrap();
        let nt = spectral_norm(&tm);
        let scale = nt * spectral_norm(&(&x * &tm - &tm * &x)) / (1.0 - nt * nt).sqrt();
        min_vl = min_vl.min(sv / scale.max(1.0));
        if sv < -1e-12 {
            vl += 1;
        }
    }
    outcome(
        pl == 0 && vl == 0,
        format!("violations pl {pl}, vl {vl} of 10^4 each (slack -1e-12); min slack pl {min_pl:.3e}, relative vl {min_vl:.3e}"),
    )
}

fn c9_dilation() -> Outcome {
    let s = OperatorSampler::new([1, 4], 1.0, [1e-3, 0.5]).unwrap();
    let mut w = [0.0f64; 5];
    for t in 0..200 {
        let mut rng = trial_rng(909, t);
        let n = s.dim(&mut rng);
        let d = rng.random_range(1..=6);
        let tm = ContractionMatrix::new(s.contraction(&mut rng, n)).unwrap();
        let dil = dilate(&tm, d).unwrap();
        w[0] = w[0].max(dil.unitarity_residual());
        w[1] = w[1].max(dil.power_residual(tm.matrix()));
        let delta = s.delta(&mut rng);
        let rm = ContractionMatrix::new(s.contraction_near(&mut rng, tm.matrix(), delta)).unwrap();
        let f = random_analytic(&mut rng, d);
        let base = semi_spectral_doi(&f, &tm, &rm, None).unwrap();
        w[2] = w[2].max(base.residual_vs_direct);
        let other = semi_spectral_doi(&f, &tm, &rm, Some(d + 3)).unwrap();
        w[3] = w[3].max(spectral_norm(&(&base.result - &other.result)));
        w[4] = w[4].max(lemma_mc_residual(&f, &tm, &rm, 2).unwrap());
    }
    outcome(
        w[0] <= 1e-10 && w[1] <= 1e-10 && w[2] <= 1e-8 && w[3] <= 1e-9 && w[4] <= 1e-8,
        format!(
            "unitarity {:.2e}, power {:.2e} (tol 1e-10); semi-spectral doi {:.2e} (tol 1e-8); degree independence {:.2e} (tol 1e-9); mc {:.2e} (tol 1e-8)",
            w[0], w[1], w[2], w[3], w[4]
        ),
    )
}

const ENVELOPE_TRIALS: usize = 10_000;

fn c10_envelopes() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    let tags = [BoundTag::SaH, BoundTag::UH, BoundTag::CH, BoundTag::Omsa, BoundTag::Oon, BoundTag::Fcc];
    for tag in tags {
        let (fid, alpha, m, omega) = theorem_defaults(tag);
        let f = build_function(fid, alpha).unwrap();
        let mut params = match omega {
            Some(w) => RatioParams::modulus(hzlab::cli_report::build_modulus(w, m).unwrap()),
            None => RatioParams::holder(alpha),
        };
        params.alpha = alpha;
        params.m = m;
        let params = params.with_ascent(100, 40);
        let s = OperatorSampler::new([2, 12], 1.0, [1e-4, 1.0]).unwrap();
        let rec = ratio_experiment(tag, f.as_ref(), &params, &s, 2 * ENVELOPE_TRIALS, 1010).unwrap();
        let ascent = rec.envelope("ascent", usize::MAX);
        let small = rec.envelope("random", ENVELOPE_TRIALS).max(ascent);
        let large = rec.envelope("random", 2 * ENVELOPE_TRIALS).max(ascent);
        let change = (large - small) / large;
        let rand_small = rec.envelope("random", ENVELOPE_TRIALS);
        let rand_large = rec.envelope("random", 2 * ENVELOPE_TRIALS);
        let good = large.is_finite() && large > 0.0 && change < 0.05;
        ok &= good;
        parts.push(format!(
            "{tag} ĉ={large:.4} Δ={:.2}% (random only {rand_small:.4}→{rand_large:.4})",
            100.0 * change
        ));
    }
    let grid = Grid::circle(1024, 256);
    let mut vn = Vec::new();
    for (w, m) in [(ModulusOfContinuity::power(0.5), 1u32), (ModulusOfContinuity::power(1.5).with_order(2), 2)] {
        let f = circle_lacunary(10, if m == 1 { 0.5 } else { 1.5 });
        let r: Vec<f64> = (0..=12).map(|n| vp_error_ratio(&f, &w, m, n, &grid).unwrap()).collect();
        let top = r.iter().cloned().fold(0.0, f64::max);
        let early = r[..=4].iter().cloned().fold(0.0, f64::max);
        let late = r[8..].iter().cloned().fold(0.0, f64::max);
        // bounded: finite everywhere and the last third at most 1.5x the first third
        let good = top.is_finite() && late <= 1.5 * early;
        ok &= good;
        vn.push(format!("m={m} max {top:.3} (n≤4 {early:.3}, n≥8 {late:.3})"));
    }
    outcome(
        ok,
        format!(
            "{}; V_n ratios {} (stability tol 5%, n-range 0..=12)",
            parts.join(", "),
            vn.join(", ")
        ),
    )
}

fn c11_omega() -> Outcome {
    let params = SearchParams { dim: 3, restarts: 6, iters: 120, cap: 1.0, seed: 1111 };
    let id = Polynomial::identity();
    let sq = PowerAbs::new(0.5);
    let mut detail = Vec::new();
    let mut ok = true;
    for delta in [0.01, 0.1, 0.5] {
        let e = omega_search(&id, delta, OmegaTag::Omega, &params).unwrap();
        let good = e.lower_bound >= 0.999 * delta && e.lower_bound <= delta * (1.0 + 1e-12);
        ok &= good;
        let g = omega_search(&sq, delta, OmegaTag::Omega, &params).unwrap();
        let good2 = g.lower_bound >= delta.sqrt() - 1e-9;
        ok &= good2;
        detail.push(format!("δ={delta}: id {:.6}, √ {:.6} vs {:.6}", e.lower_bound / delta, g.lower_bound, delta.sqrt()));
    }
    // transfer inequalities on every evaluated candidate
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let f = build_function("sin", 1.0).unwrap();
    let deltas = [0.05, 0.2, 0.8];
    for tag in [OmegaTag::Commutator, OmegaTag::Omega] {
        let est = omega_sweep(f.as_ref(), &deltas, tag, &params).unwrap();
        let mut witnesses: Vec<Witness> = est.iter().map(|e| e.witness.clone()).collect();
        let s = OperatorSampler::new([1, 4], 1.0, [1e-3, 1.0]).unwrap();
        for t in 0..50 {
            let mut rng = trial_rng(1112, t);
            let n = s.dim(&mut rng);
            let a = s.hermitian(&mut rng, n);
            let b = s.hermitian(&mut rng, n);
            let r = random::hermitian_direction(&mut rng, n, 1.0);
            witnesses.push(Witness { a, b, r });
        }
        for w in &witnesses {
            count += 1;
            let dir = if tag == OmegaTag::Commutator {
                TransferDirection::CommutatorToOmega
            } else {
                TransferDirection::OmegaToQuasi
            };
            match mcc_transfer(f.as_ref(), w, dir) {
                Ok(tr) => {
                    let gap = if tag == OmegaTag::Commutator {
                        (0.5 * tr.source_value - tr.value).max(tr.constraint - tr.constraint_bound)
                    } else {
                        (tr.value - tr.source_value).abs().max(tr.constraint - tr.constraint_bound)
                    };
                    worst = worst.max(gap);
                }
                Err(_) => worst = f64::INFINITY,
            }
            let _ = evaluate(f.as_ref(), tag, w).unwrap();
        }
    }
    ok &= worst <= 1e-9;
    let block = mcc_construction(&random::hermitian_direction(&mut trial_rng(1113, 0), 4, 1.0), 0.5).unwrap();
    let factor_err = (block.bound_factor - (0.5 + 1.0 / (2.0 * 3f64.sqrt()))).abs();
    ok &= block.unitarity_defect <= 1e-12 && factor_err <= 1e-12;
    outcome(
        ok,
        format!(
            "{}; transfer slack {worst:.2e} over {count} candidates (tol 1e-9); unitarity {:.2e}, factor error {factor_err:.2e} (tol 1e-12)",
            detail.join(", "),
            block.unitarity_defect
        ),
    )
}

fn c12_blocks() -> Outcome {
    let s = OperatorSampler::new([1, 8], 1.0, [1e-3, 1.0]).unwrap();
    let f = build_function("sin", 1.0).unwrap();
    let mut worst = 0.0f64;
    for t in 0..1000 {
        let mut rng = trial_rng(1212, t);
        let n = s.dim(&mut rng);
        let a = s.hermitian(&mut rng, n);
        let b = s.hermitian(&mut rng, n);
        let r = random::gaussian(&mut rng, n, n);
        let fo: Option<&dyn FunctionModel> = if t % 2 == 0 { Some(f.as_ref()) } else { None };
        worst = worst.max(block_identity_checks(&a, &b, &r, fo).unwrap().max_residual());
    }
    outcome(worst <= 1e-12, format!("max relative residual {worst:.3e} over 1000 triples (tol 1e-12)"))
}

fn c13_abs() -> Outcome {
    let rep = abs_explorer(&[1, 2, 4, 8, 16], 400, 1313).unwrap();
    let best = rep.envelope.iter().map(|e| e.1).fold(0.0, f64::max);
    let env: Vec<String> = rep.envelope.iter().map(|(d, v)| format!("{d}:{v:.4}")).collect();
    outcome(best > 1.0, format!("envelope by dim {} (needs > 1)", env.join(" ")))
}

fn c14_determinism() -> Outcome {
    let configs = [
        "tag = bks\ntrials = 500\n",
        "tag = holder-scan\ntheorem = saH\ntrials = 300\nascent_runs = 4\nascent_iters = 10\n",
        "tag = holder-scan\ntheorem = uH\ntrials = 200\n",
        "tag = kappa\nn = 8\n",
        "tag = verify-doi\ntrials = 100\n",
        "tag = verify-moi\ntrials = 50\n",
        "tag = verify-gen\nn = 3\ntrials = 5\n",
        "tag = dilate-check\ntrials = 20\n",
        "tag = decompose\ndegree = 64\n",
        "tag = omega-scan\ndim = 2\nrestarts = 3\niters = 30\ndelta_points = 3\n",
        "tag = commutator-scan\nfunction = sin\ndim = 2\nrestarts = 2\niters = 20\ndelta_points = 2\n",
        "tag = abs-explorer\ndim_list = 1,2,4\nbudget = 40\n",
    ];
    let mut files = 0;
    let mut diffs = Vec::new();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for text in configs {
        let mut outs = Vec::new();
        for d in &dirs {
            let mut cfg = RunConfig::parse(&format!("{text}seed = 14\n")).unwrap();
            cfg.set("out", d.path().to_str().unwrap()).unwrap();
            outs.push(run(&cfg).unwrap());
        }
        for (p, q) in outs[0].csv.iter().zip(&outs[1].csv) {
            files += 1;
            if std::fs::read(p).unwrap() != std::fs::read(q).unwrap() {
                diffs.push(Path::new(p).file_name().unwrap().to_string_lossy().into_owned());
            }
        }
    }
    outcome(diffs.is_empty(), format!("{files} CSV files compared, differing: {diffs:?}"))
}

fn main() {
    let checks: [Criterion; 14] = [
        ("divided-difference identity", c1_bsf),
        ("higher-order differences", c2_lemma_m),
        ("unitary expansion and κ", c3_gen),
        ("power inequality constant", c4_bks),
        ("Hölder exponent recovery", c5_exponent),
        ("kernel identities", c6_kernels),
        ("ω_* closed forms", c7_omega_star),
        ("commutator lemmas", c8_pl_vl),
        ("dilations", c9_dilation),
        ("ratio envelopes", c10_envelopes),
        ("Ω search sanity", c11_omega),
        ("block identities", c12_blocks),
        ("|t| explorer", c13_abs),
        ("determinism", c14_determinism),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let t = Instant::now();
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed in {:.1}s", checks.len() - failed, checks.len(), start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
