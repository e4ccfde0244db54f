//! Acceptance criteria, one line each. Run with
//! `cargo test -p maxcut --test acceptance`.
//!
//! Hard criteria print `PASS`/`FAIL` and any failure makes the process exit
//! non-zero. The scaling check is soft (`SOFT`, never fails the run) and the
//! library-instance check is `SKIP`ped unless instances are provided:
//!
//! - `MAXCUT_BIQMAC_DIR`: directory with instance files plus `optima.txt`
//!   holding `name value` lines, e.g. `g05_100.0 1430`.
//! - `MAXCUT_SKIP_SCALING=1`: skip the timing comparison.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{
    brute_force_max_cut, brute_force_with_fixings, complete, cycle, exactness_suite, petersen,
    random_graph, validity_suite,
};
use maxcut::admm::{
    admm_iterate, admm_solve, residuals, safe_bound, update_rho, AdmmParams, AdmmState,
};
use maxcut::bounding::{bound_node, solve_basic, BoundingParams};
use maxcut::cuts::{adjoint_b, apply_b, triangle_scan, CutPool, GramSolver, HypermetricCut};
use maxcut::instance::{objective_matrix, Graph, ObjectiveMatrix, Subproblem};
use maxcut::linalg::SymMatrix;
use maxcut::parallel::harness::run_scripted;
use maxcut::{read_instance, solve_parallel, solve_serial, SolverConfig};

enum Outcome {
    Pass(String),
    Fail(String),
    Soft(String),
    Skip(String),
}

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn no_cuts() -> SolverConfig {
    SolverConfig {
        max_rounds: 0,
        root_max_rounds: 0,
        ..SolverConfig::default()
    }
}

fn min_eig(m: &SymMatrix) -> f64 {
    nalgebra::SymmetricEigen::new(m.as_dense().clone())
        .eigenvalues
        .min()
}

// 1. serial optimum equals exhaustive enumeration
fn exactness() -> Check {
    let cfg = SolverConfig::default();
    let suite = exactness_suite();
    let mut nodes = 0;
    for (k, g) in suite.iter().enumerate() {
        let s = solve_serial(g, &cfg).map_err(|e| format!("instance {k}: {e}"))?;
        let opt = brute_force_max_cut(g);
        ensure(s.proof && s.optimum == opt, || {
            format!("instance {k}: got {} want {opt}", s.optimum)
        })?;
        ensure(g.cut_value(&s.best_cut.assignment) == opt, || {
            format!("instance {k}: cut does not evaluate")
        })?;
        nodes += s.nodes_evaluated;
    }
    Ok(format!("{} instances, {nodes} nodes", suite.len()))
}

// 2. every bound is >= the true optimum of its (sub)problem
fn bound_validity() -> Check {
    let params = BoundingParams {
        forecast: false,
        ..BoundingParams::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut checked = 0;
    let mut min_slack = f64::INFINITY;
    for (k, g) in exactness_suite()
        .iter()
        .chain(validity_suite().iter())
        .enumerate()
    {
        let n = g.n();
        let mut cases = vec![BTreeMap::new()];
        for _ in 0..2 {
            let count = rng.random_range(1..=(n - 1).min(4));
            let mut fixed = BTreeMap::new();
            while fixed.len() < count {
                fixed.insert(rng.random_range(0..n - 1), rng.random_range(0..2u8));
            }
            cases.push(fixed);
        }
        for fixed in cases {
            let truth = brute_force_with_fixings(g, &fixed);
            let sub = Subproblem::from_fixings(g, &fixed).map_err(|e| e.to_string())?;
            // lb far below the optimum so no round ends by pruning
            let report = bound_node(&sub, truth - 50.0, &params, None)
                .map_err(|e| format!("graph {k}: {e}"))?;
            let all = report
                .history
                .iter()
                .chain([&report.upper_bound, &report.basic_bound]);
            for &b in all {
                ensure(b >= truth, || {
                    format!("graph {k} fixings {fixed:?}: bound {b} < optimum {truth}")
                })?;
                min_slack = min_slack.min(b - truth);
                checked += 1;
            }
        }
    }
    Ok(format!(
        "{checked} bounds on 450 (sub)problems, smallest slack {min_slack:.2e}"
    ))
}

// 3. basic relaxation against closed forms
fn basic_values() -> Check {
    let c5 = 25.0 / 8.0 + 25.0 * 5f64.sqrt() / 40.0;
    let mut line = Vec::new();
    for (name, g, want) in [
        ("K2", complete(2), 1.0),
        ("K3", complete(3), 2.25),
        ("C5", cycle(5), c5),
    ] {
        let b = solve_basic(&Subproblem::root(&g), &BoundingParams::default())
            .map_err(|e| e.to_string())?;
        ensure((b.bound - want).abs() <= 1e-3, || {
            format!("{name}: {} vs {want}", b.bound)
        })?;
        line.push(format!("{name} {:.4}", b.bound));
    }
    Ok(line.join(", "))
}

// 4. cuts close the gap at the root
fn cutting_plane_effect() -> Check {
    let k3 = complete(3);
    let l = objective_matrix(&k3).map_err(|e| e.to_string())?;
    let basic =
        admm_solve(&l, &CutPool::new(), None, &AdmmParams::default()).map_err(|e| e.to_string())?;
    let tri = triangle_scan(&basic.state.x, 10);
    ensure(tri.cuts.len() == 1, || {
        format!("K3 basic X violates {} triangles", tri.cuts.len())
    })?;
    let pool: CutPool = tri.cuts.into_iter().collect();
    let r = admm_solve(
        &l,
        &pool,
        None,
        &AdmmParams {
            eps: 1e-6,
            ..AdmmParams::default()
        },
    )
    .map_err(|e| e.to_string())?;
    ensure((r.safe_bound - 2.0).abs() <= 1e-3, || {
        format!("K3 with triangle: {}", r.safe_bound)
    })?;

    let c5 = cycle(5);
    let rep = bound_node(
        &Subproblem::root(&c5),
        3.01,
        &BoundingParams::default(),
        None,
    )
    .map_err(|e| e.to_string())?;
    ensure(rep.upper_bound <= 4.001, || {
        format!("C5 bound {}", rep.upper_bound)
    })?;

    for (name, g) in [("K3", &k3), ("C5", &c5)] {
        let s = solve_serial(g, &SolverConfig::default()).map_err(|e| e.to_string())?;
        ensure(s.nodes_evaluated == 1 && s.proof, || {
            format!("{name}: {} nodes", s.nodes_evaluated)
        })?;
    }
    Ok(format!(
        "K3 {:.4}, C5 {:.4}, both closed at the root",
        r.safe_bound, rep.upper_bound
    ))
}

fn random_pool(rng: &mut ChaCha8Rng, n: usize) -> CutPool {
    let target = rng.random_range(1..=30);
    let mut pool = CutPool::new();
    let orders: &[usize] = if n >= 5 { &[3, 5] } else { &[3] };
    // K3 only has four distinct triangles
    for _ in 0..200 {
        if pool.len() >= target {
            break;
        }
        let k = orders[rng.random_range(0..orders.len())];
        let support = rand::seq::index::sample(rng, n, k).into_vec();
        let signs: Vec<i8> = (0..k)
            .map(|_| if rng.random_bool(0.5) { 1 } else { -1 })
            .collect();
        pool.push(HypermetricCut::new(&support, &signs).expect("valid cut"));
    }
    pool
}

fn check_iterate(st: &AdmmState, pool: &CutPool) -> Result<(), String> {
    let n = st.x.n();
    ensure(min_eig(&st.x) >= -1e-9, || {
        format!("X min eig {}", min_eig(&st.x))
    })?;
    ensure(min_eig(&st.z) >= -1e-9, || {
        format!("Z min eig {}", min_eig(&st.z))
    })?;
    ensure(st.x.inner(&st.z).abs() <= 1e-8, || {
        format!("<X,Z> = {}", st.x.inner(&st.z))
    })?;
    ensure(st.u.iter().chain(&st.s).all(|&v| v >= 0.0), || {
        "negative u or s".into()
    })?;
    let us: f64 = st.u.iter().zip(&st.s).map(|(u, s)| u * s).sum();
    ensure(us.abs() <= 1e-8, || format!("u's = {us}"))?;
    let by = apply_b(pool, &SymMatrix::from_diag(&st.y)).map_err(|e| e.to_string())?;
    ensure(by.iter().all(|&v| v == 0.0), || "B(Diag(y)) != 0".into())?;
    let bt = adjoint_b(pool, &st.t, n).map_err(|e| e.to_string())?;
    ensure(bt.diag().iter().all(|&v| v == 0.0), || {
        "diag(B'(t)) != 0".into()
    })
}

// 5. per-iteration invariants and convergence
fn admm_invariants() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let graphs = [
        ("K3", complete(3)),
        ("C5", cycle(5)),
        ("Petersen", petersen()),
    ];
    let mut runs = 0;
    let mut worst_iters = 0;
    for (name, g) in &graphs {
        let l = objective_matrix(g).map_err(|e| e.to_string())?;
        for trial in 0..10 {
            let pool = random_pool(&mut rng, l.n());
            let gram = GramSolver::new(&pool).map_err(|e| e.to_string())?;
            let mut st = AdmmState::zero(l.n(), pool.len(), 1.6);
            let mut converged = false;
            for it in 1..=2000 {
                st = admm_iterate(&st, &l, &pool, &gram).map_err(|e| e.to_string())?;
                check_iterate(&st, &pool)
                    .map_err(|e| format!("{name} trial {trial} iteration {it}: {e}"))?;
                let (rp, rd) = residuals(&st, &l, &pool);
                if rp.max(rd) < 1e-5 {
                    converged = true;
                    worst_iters = worst_iters.max(it);
                    break;
                }
                st.rho = update_rho(st.rho, rp, rd);
            }
            ensure(converged, || {
                format!(
                    "{name} trial {trial} ({} cuts) did not converge",
                    pool.len()
                )
            })?;
            runs += 1;
        }
    }
    Ok(format!(
        "{runs} runs, all iterates valid, slowest converged in {worst_iters} iterations"
    ))
}

/// `-n lambda_min` of `Diag(y) + B'(u) - L`, with the spectrum from a
/// separate dense eigensolver.
fn correction_oracle(st: &AdmmState, l: &ObjectiveMatrix, pool: &CutPool) -> f64 {
    let n = l.n();
    let bu = adjoint_b(pool, &st.u, n).unwrap();
    let m = DMatrix::from_fn(n, n, |i, j| {
        bu.get(i, j) - l.matrix().get(i, j) + if i == j { st.y[i] } else { 0.0 }
    });
    let lmin = nalgebra::SymmetricEigen::new(m).eigenvalues.min();
    -(n as f64) * lmin.min(0.0)
}

// 6. the correction is exactly -n lambda_min whenever it applies
fn safe_bound_correction() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut corrected = 0;
    let mut total = 0;
    let mut graphs: Vec<Graph> = vec![complete(3), cycle(5), petersen()];
    graphs.extend(exactness_suite().into_iter().take(20));
    for (k, g) in graphs.iter().enumerate() {
        let l = objective_matrix(g).map_err(|e| e.to_string())?;
        let pool = random_pool(&mut rng, l.n());
        // loose and tight solves, so some states need the shift and some not
        for eps in [1e-2, 1e-3, 1e-5] {
            let r = admm_solve(
                &l,
                &pool,
                None,
                &AdmmParams {
                    eps,
                    ..AdmmParams::default()
                },
            )
            .map_err(|e| e.to_string())?;
            let sb = safe_bound(&r.state, &l, &pool).map_err(|e| e.to_string())?;
            ensure(
                sb.value == r.safe_bound && sb.raw == r.raw_dual_value,
                || format!("graph {k}: result disagrees"),
            )?;
            ensure(sb.value >= sb.raw, || {
                format!("graph {k}: safe {} < raw {}", sb.value, sb.raw)
            })?;
            let want = correction_oracle(&r.state, &l, &pool);
            let got = sb.value - sb.raw;
            ensure((got - want).abs() <= 1e-10 * (1.0 + want.abs()), || {
                format!("graph {k} eps {eps}: correction {got} vs oracle {want}")
            })?;
            if sb.lambda_min < 0.0 {
                corrected += 1;
            }
            total += 1;
        }
    }
    Ok(format!(
        "{total} runs, {corrected} needed the eigenvalue shift"
    ))
}

// 7. parallel = serial, and clean termination under random interleavings
fn parallel_equivalence() -> Check {
    let suite = exactness_suite();
    let mut runs = 0;
    for (cfg_name, base) in [("default", SolverConfig::default()), ("no-cuts", no_cuts())] {
        for (k, g) in suite.iter().enumerate() {
            let serial = solve_serial(g, &base).map_err(|e| e.to_string())?;
            for w in [1, 2, 4, 8] {
                let par = solve_parallel(
                    g,
                    &SolverConfig {
                        workers: w,
                        ..base.clone()
                    },
                )
                .map_err(|e| e.to_string())?;
                ensure(par.optimum == serial.optimum && par.proof, || {
                    format!(
                        "{cfg_name} instance {k} W={w}: {} vs serial {}",
                        par.optimum, serial.optimum
                    )
                })?;
                ensure(par.stats.balanced(), || {
                    format!("{cfg_name} instance {k} W={w}: node counts do not add up")
                })?;
                runs += 1;
            }
        }
    }
    let mut branched = 0;
    for seed in 0..100u64 {
        let g = &suite[(seed as usize * 7) % suite.len()];
        let workers = 2 + (seed as usize % 4);
        let cfg = SolverConfig {
            workers,
            ..no_cuts()
        };
        let run = run_scripted(g, &cfg, seed).map_err(|e| format!("schedule {seed}: {e}"))?;
        ensure(run.terminates.iter().all(|&t| t == 1), || {
            format!("schedule {seed}: terminates {:?}", run.terminates)
        })?;
        let opt = brute_force_max_cut(g);
        ensure(run.solution.optimum == opt && run.solution.proof, || {
            format!("schedule {seed}: wrong optimum")
        })?;
        ensure(run.solution.stats.balanced(), || {
            format!("schedule {seed}: node counts do not add up")
        })?;
        if run.solution.stats.nodes_branched > 0 {
            branched += 1;
        }
    }
    Ok(format!("{runs} threaded runs; 100 scripted schedules ({branched} branching), one Terminate per worker"))
}

// 8. soft: 4 workers vs serial on a dense instance
fn scaling() -> Outcome {
    if std::env::var_os("MAXCUT_SKIP_SCALING").is_some() {
        return Outcome::Skip("MAXCUT_SKIP_SCALING set".into());
    }
    // weights in [-10, 10], density 1/2; about 35 s serially in release
    let g = random_graph(&mut ChaCha8Rng::seed_from_u64(1), 60, 0.5);
    let t = Instant::now();
    let serial = match solve_serial(&g, &SolverConfig::default()) {
        Ok(s) => s,
        Err(e) => return Outcome::Fail(format!("serial solve failed: {e}")),
    };
    let t_serial = t.elapsed();
    let t = Instant::now();
    let par = match solve_parallel(
        &g,
        &SolverConfig {
            workers: 4,
            ..SolverConfig::default()
        },
    ) {
        Ok(s) => s,
        Err(e) => return Outcome::Fail(format!("parallel solve failed: {e}")),
    };
    let t_par = t.elapsed();
    if par.optimum != serial.optimum {
        return Outcome::Fail(format!(
            "optimum {} with 4 workers vs {} serially",
            par.optimum, serial.optimum
        ));
    }
    let ratio = t_par.as_secs_f64() / t_serial.as_secs_f64();
    let verdict = if t_serial < Duration::from_secs(30) {
        "serial run under 30 s, below the intended size"
    } else if ratio <= 0.6 {
        "meets <= 0.6"
    } else if serial.nodes_evaluated <= 3 {
        "misses <= 0.6: the root node dominates and workers only share nodes after branching"
    } else {
        "misses <= 0.6"
    };
    Outcome::Soft(format!(
        "n=60 opt {}: serial {:.1}s / {} nodes, 4 workers {:.1}s / {} nodes, ratio {ratio:.2} ({verdict})",
        serial.optimum,
        t_serial.as_secs_f64(),
        serial.nodes_evaluated,
        t_par.as_secs_f64(),
        par.nodes_evaluated
    ))
}

// 9. optional: library instances with user-supplied optima
fn library_instances() -> Outcome {
    let Some(dir) = std::env::var_os("MAXCUT_BIQMAC_DIR") else {
        return Outcome::Skip("MAXCUT_BIQMAC_DIR not set".into());
    };
    let dir = std::path::PathBuf::from(dir);
    let optima = match std::fs::read_to_string(dir.join("optima.txt")) {
        Ok(s) => s,
        Err(e) => return Outcome::Skip(format!("no optima.txt in {}: {e}", dir.display())),
    };
    let mut solved = Vec::new();
    for line in optima
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
    {
        let mut parts = line.split_whitespace();
        let (Some(name), Some(value)) = (
            parts.next(),
            parts.next().and_then(|v| v.parse::<f64>().ok()),
        ) else {
            return Outcome::Fail(format!("bad optima line {line:?}"));
        };
        let g = match std::fs::File::open(dir.join(name))
            .map_err(|e| e.to_string())
            .and_then(|f| read_instance(f).map_err(|e| e.to_string()))
        {
            Ok(g) => g,
            Err(e) => return Outcome::Fail(format!("{name}: {e}")),
        };
        match solve_serial(&g, &SolverConfig::default()) {
            Ok(s) if s.proof && s.optimum == value => solved.push(format!("{name} {value}")),
            Ok(s) => {
                return Outcome::Fail(format!(
                    "{name}: got {} (proof {}) want {value}",
                    s.optimum, s.proof
                ))
            }
            Err(e) => return Outcome::Fail(format!("{name}: {e}")),
        }
    }
    if solved.is_empty() {
        Outcome::Skip("optima.txt lists no instances".into())
    } else {
        Outcome::Pass(solved.join(", "))
    }
}

fn hard(f: fn() -> Check) -> Box<dyn FnOnce() -> Outcome> {
    Box::new(move || match f() {
        Ok(s) => Outcome::Pass(s),
        Err(s) => Outcome::Fail(s),
    })
}

fn main() {
    let criteria: Vec<(&str, Box<dyn FnOnce() -> Outcome>)> = vec![
        ("C1 exactness vs enumeration", hard(exactness)),
        ("C2 safe-bound validity", hard(bound_validity)),
        ("C3 basic relaxation values", hard(basic_values)),
        ("C4 cutting-plane effect", hard(cutting_plane_effect)),
        ("C5 ADMM invariants", hard(admm_invariants)),
        ("C6 safe-bound correction", hard(safe_bound_correction)),
        ("C7 parallel equivalence", hard(parallel_equivalence)),
        ("C8 scaling (soft)", Box::new(scaling)),
        ("C9 library instances", Box::new(library_instances)),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Outcome::Fail(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = t.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Soft(d) => ("SOFT", d),
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("{tag} {name} [{secs:.1}s]: {detail}");
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
