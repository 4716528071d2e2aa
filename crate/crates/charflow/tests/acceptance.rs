//! Acceptance suite: one test per criterion, each printing a single
//! `criterion N: PASS/FAIL` line with the measured evidence. Tolerances
//! are pinned here and are not meant to be tuned per run.

use std::time::{Duration, Instant};

use charflow::chain::{amano_check, analyze, run_chain, Verdict};
use charflow::field::PolyVectorField;
use charflow::glaeser::{
    numeric_char_chain, zariski_tangent_estimate, Metric, PointCloud,
};
use charflow::ideal::{
    exact_abs_values, EmptinessStatus, Ideal, SearchBox, DEFAULT_SPAIR_BUDGET,
};
use charflow::parser::parse_field_system;
use charflow::poly::Poly;
use charflow::smooth::{parse_smooth_expr, parse_smooth_field};
use charflow::torus::{
    assemble_operator, concentration_test, positive_clusters, smallest_eigs,
    weierstrass_scaling_test, TorusGrid,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::{oracle, rand_poly};

const BUDGET: usize = DEFAULT_SPAIR_BUDGET;

/// Print the verdict line for a criterion and fail the test on FAIL.
fn criterion(n: usize, outcome: Result<String, String>) {
    match outcome {
        Ok(detail) => println!("criterion {n}: PASS - {detail}"),
        Err(detail) => {
            println!("criterion {n}: FAIL - {detail}");
            panic!("criterion {n} failed: {detail}");
        }
    }
}

fn within(t0: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let el = t0.elapsed();
    if el <= limit {
        Ok(())
    } else {
        Err(format!("{what}: runtime {el:?} exceeds {limit:?}"))
    }
}

fn bx() -> SearchBox {
    SearchBox::default()
}

// ---------------------------------------------------------------------
// 1. exact-chain soundness on the Grushin system, plus oracle equality

#[test]
fn criterion_01_grushin_exact_chain() {
    criterion(1, (|| {
        let t0 = Instant::now();
        let sys = parse_field_system("vars x,y; field 1,0; field 0,x")
            .map_err(|e| e.to_string())?;

        let (rep, witness, v) = analyze(&sys, 1, &bx(), BUDGET).map_err(|e| e.to_string())?;
        if witness.is_some() {
            return Err("unexpected witness for Grushin s=1".into());
        }
        match v {
            Verdict::Precompact { certified_step: 1 } => {}
            other => return Err(format!("s=1 verdict {other:?}, expected Precompact(k=1)")),
        }
        if rep.steps.len() != 2 {
            return Err(format!("s=1 chain has {} steps, expected 2", rep.steps.len()));
        }
        // step 0 basis is <x>; step 1 is the unit ideal
        let mut i0 = rep.steps[0].ideal.clone();
        let b0 = i0.groebner(BUDGET).map_err(|e| e.to_string())?.to_vec();
        if b0 != vec![Poly::var(2, 0)] {
            return Err(format!("step-0 basis {b0:?}, expected [x]"));
        }
        let mut i1 = rep.steps[1].ideal.clone();
        if !i1.contains_one(BUDGET).map_err(|e| e.to_string())? {
            return Err("step-1 ideal is not the unit ideal".into());
        }

        // exact equality against the naive-Buchberger oracle
        for (k, step) in rep.steps.iter().enumerate() {
            let mut engine = step.ideal.clone();
            let eng = engine.groebner(BUDGET).map_err(|e| e.to_string())?.to_vec();
            let orc = oracle::reduced_groebner(step.ideal.generators());
            if eng != orc {
                return Err(format!("step {k}: engine basis differs from naive oracle"));
            }
        }

        let (_, _, v2) = analyze(&sys, 2, &bx(), BUDGET).map_err(|e| e.to_string())?;
        match v2 {
            Verdict::Precompact { certified_step: 0 } => {}
            other => return Err(format!("s=2 verdict {other:?}, expected Precompact(k=0)")),
        }
        within(t0, Duration::from_secs(1), "criterion 1")?;
        Ok(format!(
            "Grushin s=1 chain <x> -> unit (Precompact k=1), s=2 Precompact k=0, \
             bases equal naive oracle, {:?}",
            t0.elapsed()
        ))
    })());
}

// ---------------------------------------------------------------------
// 2. characteristic-submanifold witnesses

#[test]
fn criterion_02_submanifold_witnesses() {
    criterion(2, (|| {
        let t0 = Instant::now();

        // stable line {y = 0}
        let sys = parse_field_system("vars x,y; field 1,0; field 0,x^2*y")
            .map_err(|e| e.to_string())?;
        let (rep, witness, v) = analyze(&sys, 1, &bx(), BUDGET).map_err(|e| e.to_string())?;
        if rep.stabilized_at.is_none() {
            return Err("line system: chain did not stabilize".into());
        }
        let w = witness.ok_or("line system: no witness certified")?;
        if !w.tangency_certified || w.jacobian_rank != 1 {
            return Err(format!(
                "line witness: tangency {} rank {}, expected certified rank 1",
                w.tangency_certified, w.jacobian_rank
            ));
        }
        if w.point[1].abs() > 1e-6 {
            return Err(format!("line witness point {:?} not on y = 0", w.point));
        }
        if !matches!(v, Verdict::NotPrecompact { .. }) {
            return Err(format!("line verdict {v:?}, expected NotPrecompact"));
        }

        // origin witness, both fields vanish
        let sys2 = parse_field_system("vars x,y; field y^2,0; field 0,x^2")
            .map_err(|e| e.to_string())?;
        let (rep2, witness2, v2) = analyze(&sys2, 1, &bx(), BUDGET).map_err(|e| e.to_string())?;
        if rep2.stabilized_at.is_none() {
            return Err("origin system: chain did not stabilize".into());
        }
        let w2 = witness2.ok_or("origin system: no witness certified")?;
        if !w2.tangency_certified || w2.jacobian_rank != 2 {
            return Err(format!(
                "origin witness: tangency {} rank {}, expected certified rank 2",
                w2.tangency_certified, w2.jacobian_rank
            ));
        }
        if w2.point.iter().any(|c| c.abs() > 1e-6) {
            return Err(format!("origin witness point {:?} not the origin", w2.point));
        }
        for f in &sys2.fields {
            let vvec = f.eval_f64(&w2.point);
            if vvec.iter().any(|c| c.abs() > 1e-10) {
                return Err("a field does not vanish at the origin witness".into());
            }
        }
        if !matches!(v2, Verdict::NotPrecompact { .. }) {
            return Err(format!("origin verdict {v2:?}, expected NotPrecompact"));
        }
        within(t0, Duration::from_secs(5), "criterion 2")?;
        Ok(format!(
            "line witness (rank 1, on y=0) and origin witness (rank 2, fields vanish) \
             certified, {:?}",
            t0.elapsed()
        ))
    })());
}

// ---------------------------------------------------------------------
// 3. stabilization bound on random systems

fn rand_poly_total_deg(rng: &mut ChaCha8Rng, nvars: usize, max_terms: usize, max_deg: u32) -> Poly {
    let terms = rng.gen_range(0..=max_terms);
    let mut acc = Poly::zero(nvars);
    for _ in 0..terms {
        let mut exps = vec![0u32; nvars];
        let mut left = max_deg;
        for e in exps.iter_mut() {
            let d = rng.gen_range(0..=left);
            *e = d;
            left -= d;
        }
        let c = rng.gen_range(-3i64..=3);
        acc = acc.add(&Poly::from_terms(
            nvars,
            [(charflow::poly::Monomial(exps), common::rat(c))],
        ));
    }
    acc
}

#[test]
fn criterion_03_stabilization_bound_random() {
    criterion(3, (|| {
        let t0 = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(20240601);
        let sb = bx();
        // a couple of the random n=3, r=3 systems hit severe coefficient
        // swell; a tight S-pair budget turns them into honest
        // budget-limited outcomes instead of multi-minute grinds
        let budget = 2_000usize;
        let mut analyzed = 0usize;
        let mut budget_outs = 0usize;
        for case in 0..50usize {
            let n = 2 + case % 2;
            let r = 1 + case % 3;
            let vars: Vec<String> = (0..n).map(|i| format!("x{}", i + 1)).collect();
            let fields: Vec<PolyVectorField> = (0..r)
                .map(|_| {
                    let coeffs: Vec<Poly> = (0..n)
                        .map(|_| rand_poly_total_deg(&mut rng, n, 2, 3))
                        .collect();
                    PolyVectorField::new(coeffs)
                })
                .collect();
            let sys = charflow::field::FieldSystem::new(vars, fields)
                .map_err(|e| e.to_string())?;
            let (rep, witness, v) = match analyze(&sys, 1, &sb, budget) {
                Ok(out) => out,
                Err(charflow::Error::ComputationBudgetExhausted(_)) => {
                    budget_outs += 1;
                    continue;
                }
                Err(e) => return Err(format!("case {case}: engine error {e}")),
            };
            analyzed += 1;

            if rep.steps.len() > n + 2 {
                return Err(format!(
                    "case {case}: chain has {} steps, bound is n+2 = {}",
                    rep.steps.len(),
                    n + 2
                ));
            }

            // verdict certificates
            match &v {
                Verdict::Precompact { certified_step } => {
                    let step = &rep.steps[*certified_step];
                    if step.status != EmptinessStatus::EmptyCertified {
                        return Err(format!("case {case}: Precompact without empty certificate"));
                    }
                    // independent re-check from the raw generators
                    let mut fresh = Ideal::new(n, step.ideal.generators().to_vec());
                    if !fresh.contains_one(budget).map_err(|e| e.to_string())? {
                        return Err(format!("case {case}: emptiness certificate fails re-check"));
                    }
                }
                Verdict::NotPrecompact { witness: w } => {
                    if !w.tangency_certified || w.jacobian_rank < 1 {
                        return Err(format!("case {case}: NotPrecompact without certificate"));
                    }
                    let mut wi = w.ideal.clone();
                    let basis = wi.groebner(budget).map_err(|e| e.to_string())?.to_vec();
                    let exact = exact_abs_values(&basis, &w.point);
                    if exact.iter().any(|&a| a > sb.tol_witness.sqrt()) {
                        return Err(format!("case {case}: witness fails exact re-check"));
                    }
                }
                Verdict::Unknown { .. } => {}
            }
            if witness.is_some() && matches!(v, Verdict::Precompact { .. }) {
                return Err(format!("case {case}: witness coexists with Precompact"));
            }

            // sampled-variety nesting: samples of step k+1 satisfy step k
            for pair in rep.steps.windows(2) {
                let prev_gens: Vec<Poly> = pair[0]
                    .ideal
                    .cached_basis()
                    .map(|b| b.to_vec())
                    .unwrap_or_else(|| pair[0].ideal.generators().to_vec());
                for p in &pair[1].samples {
                    let ss: f64 = prev_gens.iter().map(|g| g.eval_f64(p).powi(2)).sum();
                    if ss >= sb.tol_witness {
                        return Err(format!(
                            "case {case}: nesting violated, residual {ss:.3e} at step {}",
                            pair[1].k
                        ));
                    }
                }
            }
        }
        within(t0, Duration::from_secs(300), "criterion 3")?;
        Ok(format!(
            "{analyzed} random systems analyzed ({budget_outs} budget-limited), chains within \
             n+2 steps, certificates and sampled nesting verified, {:?}",
            t0.elapsed()
        ))
    })());
}

// ---------------------------------------------------------------------
// 4. algebra property suite, 1000 random cases per law

#[test]
fn criterion_04_algebra_laws_bulk() {
    criterion(4, (|| {
        use charflow::field::{apply_field, lie_bracket};
        let t0 = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 3;
        let fld = |rng: &mut ChaCha8Rng| common::rand_field(rng, n, 2, 2);

        for i in 0..1000 {
            // ring laws
            let a = rand_poly(&mut rng, n, 4, 2);
            let b = rand_poly(&mut rng, n, 4, 2);
            let c = rand_poly(&mut rng, n, 4, 2);
            if a.add(&b) != b.add(&a) || a.mul(&b) != b.mul(&a) {
                return Err(format!("case {i}: commutativity violated"));
            }
            if a.mul(&b).mul(&c) != a.mul(&b.mul(&c)) {
                return Err(format!("case {i}: associativity violated"));
            }
            if a.mul(&b.add(&c)) != a.mul(&b).add(&a.mul(&c)) {
                return Err(format!("case {i}: distributivity violated"));
            }
            if !a.sub(&a).is_zero() {
                return Err(format!("case {i}: additive inverse violated"));
            }

            // Leibniz
            let x = fld(&mut rng);
            let lhs = apply_field(&x, &a.mul(&b)).map_err(|e| e.to_string())?;
            let rhs = a
                .mul(&apply_field(&x, &b).map_err(|e| e.to_string())?)
                .add(&b.mul(&apply_field(&x, &a).map_err(|e| e.to_string())?));
            if lhs != rhs {
                return Err(format!("case {i}: Leibniz violated"));
            }

            // antisymmetry + Jacobi
            let y = fld(&mut rng);
            let z = fld(&mut rng);
            let xy = lie_bracket(&x, &y).map_err(|e| e.to_string())?;
            let yx = lie_bracket(&y, &x).map_err(|e| e.to_string())?;
            if xy
                .coeffs()
                .iter()
                .zip(yx.coeffs())
                .any(|(p, q)| !p.add(q).is_zero())
            {
                return Err(format!("case {i}: antisymmetry violated"));
            }
            let t1 = lie_bracket(&x, &lie_bracket(&y, &z).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?;
            let t2 = lie_bracket(&y, &lie_bracket(&z, &x).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?;
            let t3 = lie_bracket(&z, &lie_bracket(&x, &y).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?;
            if t1
                .coeffs()
                .iter()
                .zip(t2.coeffs())
                .zip(t3.coeffs())
                .any(|((p, q), r)| !p.add(q).add(r).is_zero())
            {
                return Err(format!("case {i}: Jacobi violated"));
            }
        }
        within(t0, Duration::from_secs(30), "criterion 4")?;
        Ok(format!(
            "1000 exact random cases each: ring laws, Leibniz, antisymmetry, Jacobi, {:?}",
            t0.elapsed()
        ))
    })());
}

// ---------------------------------------------------------------------
// 5. spectral oracle: 1-D d/dx eigenvalues converge to k^2 at order >= 1.8

#[test]
fn criterion_05_spectral_oracle_convergence() {
    criterion(5, (|| {
        let t0 = Instant::now();
        let resolutions = [32usize, 64, 128];
        let mut errs: Vec<Vec<f64>> = Vec::new(); // errs[res][k-1]
        for &n in &resolutions {
            let grid = TorusGrid::new(1, n).map_err(|e| e.to_string())?;
            let f = parse_smooth_field("1", &["x".to_string()]).map_err(|e| e.to_string())?;
            let op = assemble_operator(&[f], &grid, None).map_err(|e| e.to_string())?;

            // exact constant in the kernel
            let ones = vec![1.0; grid.total];
            let mut out = vec![0.0; grid.total];
            op.matvec(&ones, &mut out);
            let k0 = out.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
            if k0 > 1e-9 {
                return Err(format!("N={n}: P*1 has norm {k0:.3e} > 1e-9"));
            }

            // the symmetrized first-difference aliases mode k with N/2 - k,
            // so each cluster below the Nyquist ridge has multiplicity 4;
            // 16 pairs cover the kernel plus the k = 1..3 clusters
            let entry = smallest_eigs(&op, 16, 5).map_err(|e| e.to_string())?;
            if entry.eigenvalues[0].abs() > 1e-9 {
                return Err(format!(
                    "N={n}: lowest eigenvalue {:.3e} not in the kernel to 1e-9",
                    entry.eigenvalues[0]
                ));
            }
            let clusters = positive_clusters(&entry.eigenvalues, 1e-6);
            if clusters.len() < 3 {
                return Err(format!("N={n}: only {} positive clusters", clusters.len()));
            }
            errs.push(
                (1..=3)
                    .map(|k| (clusters[k - 1] - (k * k) as f64).abs())
                    .collect(),
            );
        }
        let mut orders = Vec::new();
        for k in 0..3 {
            for w in 0..resolutions.len() - 1 {
                let order = (errs[w][k] / errs[w + 1][k]).log2();
                orders.push(order);
                if order < 1.8 {
                    return Err(format!(
                        "mode k={}: observed order {order:.2} < 1.8 between N={} and N={}",
                        k + 1,
                        resolutions[w],
                        resolutions[w + 1]
                    ));
                }
            }
        }
        within(t0, Duration::from_secs(10), "criterion 5")?;
        let omin = orders.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(format!(
            "eigenvalue clusters -> k^2 for k<=3, min observed order {omin:.2} >= 1.8, \
             kernel exact to 1e-9, {:?}",
            t0.elapsed()
        ))
    })());
}

// ---------------------------------------------------------------------
// 6. Weierstrass scaling: bounded energy on the characteristic slice,
//    t^2 growth for the elliptic control

#[test]
fn criterion_06_weierstrass_scaling() {
    criterion(6, (|| {
        let t0 = Instant::now();
        let vars = ["x".to_string(), "y".to_string()];
        let grid = TorusGrid::new(2, 256).map_err(|e| e.to_string())?;
        let ts = [4.0, 8.0, 16.0];

        let chr = [
            parse_smooth_field("1, 0", &vars).map_err(|e| e.to_string())?,
            parse_smooth_field("0, sin(x)*sin(y)", &vars).map_err(|e| e.to_string())?,
        ];
        let rows = weierstrass_scaling_test(&chr, &[1], &grid, &ts, None)
            .map_err(|e| e.to_string())?;
        let emax = rows.iter().map(|r| r.energy).fold(f64::MIN, f64::max);
        let emin = rows.iter().map(|r| r.energy).fold(f64::MAX, f64::min);
        if emax / emin > 2.0 {
            return Err(format!(
                "characteristic slice: energy ratio {:.2} > 2 (rows {:?})",
                emax / emin,
                rows
            ));
        }
        let lmax = rows.iter().map(|r| r.l2_norm_sq).fold(f64::MIN, f64::max);
        let lmin = rows.iter().map(|r| r.l2_norm_sq).fold(f64::MAX, f64::min);
        if lmax / lmin > 1.1 {
            return Err(format!(
                "characteristic slice: l2 mass varies by {:.1}% > 10%",
                (lmax / lmin - 1.0) * 100.0
            ));
        }

        let ell = [
            parse_smooth_field("1, 0", &vars).map_err(|e| e.to_string())?,
            parse_smooth_field("0, 1", &vars).map_err(|e| e.to_string())?,
        ];
        let rows_e = weierstrass_scaling_test(&ell, &[1], &grid, &ts, None)
            .map_err(|e| e.to_string())?;
        let growth = rows_e[2].energy / rows_e[0].energy;
        if growth < 8.0 {
            return Err(format!("elliptic control: energy(16)/energy(4) = {growth:.2} < 8"));
        }
        within(t0, Duration::from_secs(30), "criterion 6")?;
        Ok(format!(
            "characteristic energy ratio {:.2} <= 2, l2 within {:.1}%, elliptic growth \
             {growth:.1} >= 8, {:?}",
            emax / emin,
            (lmax / lmin - 1.0) * 100.0,
            t0.elapsed()
        ))
    })());
}

// ---------------------------------------------------------------------
// 7. concentration test: bounded C(eps) for the non-characteristic
//    circle, large C(eps) for the flat characteristic-circle control

fn expr_mask(grid: &TorusGrid, expr: &str, vars: &[String], zero_set: bool) -> Result<Vec<bool>, String> {
    let e = parse_smooth_expr(expr, vars).map_err(|e| e.to_string())?;
    let mut mask = Vec::with_capacity(grid.total);
    for p in 0..grid.total {
        let v = e.eval(&grid.coords(p)).map_err(|e| e.to_string())?;
        mask.push(if zero_set { v.abs() < 1e-9 } else { v > 0.0 });
    }
    Ok(mask)
}

#[test]
fn criterion_07_concentration() {
    criterion(7, (|| {
        let t0 = Instant::now();
        let vars = ["x".to_string(), "y".to_string()];
        let grid = TorusGrid::new(2, 64).map_err(|e| e.to_string())?;
        let eps = [0.4, 0.2, 0.1];

        // non-characteristic: Grushin-analogue, A = {x = 0} transversal to d/dx
        let gru = [
            parse_smooth_field("1, 0", &vars).map_err(|e| e.to_string())?,
            parse_smooth_field("0, sin(x)", &vars).map_err(|e| e.to_string())?,
        ];
        let a_gru = expr_mask(&grid, "sin(x/2)", &vars, true)?;
        let v_all = vec![true; grid.total];
        let rows_g = concentration_test(&gru, &grid, &a_gru, &v_all, &eps, 24, 11, None)
            .map_err(|e| e.to_string())?;
        let cg: Vec<f64> = rows_g.iter().map(|r| r.c_eps).collect();
        let gmax = cg.iter().cloned().fold(f64::MIN, f64::max);
        let gmin = cg.iter().cloned().fold(f64::MAX, f64::min);
        if gmin <= 0.0 || gmax / gmin > 4.0 {
            return Err(format!(
                "non-characteristic C(eps) not bounded: {cg:?} (max/min > 4)"
            ));
        }

        // characteristic control: both coefficients vanish to second order
        // on the circle {y = 0}, so functions supported on the circle row
        // are exact kernel elements; V is restricted to a tube around the
        // circle so the mirror modes at y = pi do not enter the estimate
        let ctl = [
            parse_smooth_field("sin(y)^2, 0", &vars).map_err(|e| e.to_string())?,
            parse_smooth_field("0, sin(y)^2", &vars).map_err(|e| e.to_string())?,
        ];
        let a_ctl = expr_mask(&grid, "sin(y/2)", &vars, true)?;
        let v_ctl = expr_mask(&grid, "cos(y) + 1/2", &vars, false)?;
        let rows_c = concentration_test(&ctl, &grid, &a_ctl, &v_ctl, &eps, 24, 11, None)
            .map_err(|e| e.to_string())?;
        let cc: Vec<f64> = rows_c.iter().map(|r| r.c_eps).collect();

        // the control constant dominates the non-characteristic one by >= 10x
        // at every eps in the range
        for (i, (&a, &b)) in cc.iter().zip(&cg).enumerate() {
            if a < 10.0 * b {
                return Err(format!(
                    "eps = {}: control C = {a:.3e} not >= 10x bounded C = {b:.3e} \
                     (control {cc:?}, bounded {cg:?})",
                    eps[i]
                ));
            }
        }
        within(t0, Duration::from_secs(60), "criterion 7")?;
        Ok(format!(
            "bounded C(eps) {cg:?} (ratio {:.2} <= 4); characteristic control {cc:?} \
             >= 10x at every eps, {:?}",
            gmax / gmin,
            t0.elapsed()
        ))
    })());
}

// ---------------------------------------------------------------------
// 8. Glaeser suite

fn torus_zero_cloud(n_axis: usize, exprs: &[&str], vars: &[String]) -> Result<PointCloud, String> {
    let h = 2.0 * std::f64::consts::PI / n_axis as f64;
    let parsed: Vec<_> = exprs
        .iter()
        .map(|e| parse_smooth_expr(e, vars))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let mut points = Vec::new();
    let dim = vars.len();
    let total = n_axis.pow(dim as u32);
    for idx in 0..total {
        let mut rem = idx;
        let mut x = Vec::with_capacity(dim);
        for _ in 0..dim {
            x.push((rem % n_axis) as f64 * h);
            rem /= n_axis;
        }
        let mut hit = false;
        for e in &parsed {
            if e.eval(&x).map_err(|e| e.to_string())?.abs() < 1e-9 {
                hit = true;
                break;
            }
        }
        if hit {
            points.push(x);
        }
    }
    PointCloud::new(points, h, Metric::Torus).map_err(|e| e.to_string())
}

fn torus_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| TorusGrid::wrap(x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[test]
fn criterion_08_glaeser_suite() {
    criterion(8, (|| {
        let t0 = Instant::now();
        let pi = std::f64::consts::PI;
        let vars = ["x".to_string(), "y".to_string()];

        // circle cloud: tangents within 2 degrees at >= 99% of points
        let m = 512usize;
        let pitch = 2.0 * pi / m as f64;
        let pts: Vec<Vec<f64>> = (0..m)
            .map(|k| {
                let t = 2.0 * pi * k as f64 / m as f64;
                vec![t.cos(), t.sin()]
            })
            .collect();
        let circle = PointCloud::new(pts.clone(), pitch, Metric::Euclidean)
            .map_err(|e| e.to_string())?;
        let cone = zariski_tangent_estimate(&circle).map_err(|e| e.to_string())?;
        let cos2 = (2.0f64).to_radians().cos();
        let mut good = 0usize;
        for (k, fiber) in cone.fibers.iter().enumerate() {
            if fiber.basis.len() != 1 {
                continue;
            }
            let t = 2.0 * pi * k as f64 / m as f64;
            let tan = [-t.sin(), t.cos()];
            let d: f64 = fiber.basis[0][0] * tan[0] + fiber.basis[0][1] * tan[1];
            if d.abs() >= cos2 {
                good += 1;
            }
        }
        if (good as f64) < 0.99 * m as f64 {
            return Err(format!(
                "circle tangents within 2 degrees at only {good}/{m} points"
            ));
        }

        // V(xy): origin fiber is 2-dimensional
        let mut axes = Vec::new();
        let steps = 100i64;
        for k in -steps..=steps {
            let c = k as f64 * 0.01;
            axes.push(vec![c, 0.0]);
            if k != 0 {
                axes.push(vec![0.0, c]);
            }
        }
        let axes_cloud = PointCloud::new(axes.clone(), 0.01, Metric::Euclidean)
            .map_err(|e| e.to_string())?;
        let origin = axes
            .iter()
            .position(|p| p[0] == 0.0 && p[1] == 0.0)
            .unwrap();
        let cone2 = zariski_tangent_estimate(&axes_cloud).map_err(|e| e.to_string())?;
        if cone2.fibers[origin].basis.len() != 2 {
            return Err(format!(
                "V(xy) origin fiber dimension {}, expected 2",
                cone2.fibers[origin].basis.len()
            ));
        }

        let lattice = [[0.0, 0.0], [0.0, pi], [pi, 0.0], [pi, pi]];

        // periodized Example 1: stable nonempty set around the lattice points
        let a0 = torus_zero_cloud(512, &["sin(x)", "sin(y)"], &vars)?;
        let ex1 = [
            parse_smooth_field("flat2(sin(y)), 0", &vars).map_err(|e| e.to_string())?,
            parse_smooth_field("0, flat2(sin(x))", &vars).map_err(|e| e.to_string())?,
        ];
        let steps1 = numeric_char_chain(&ex1, &a0, 3).map_err(|e| e.to_string())?;
        let last1 = steps1.last().unwrap();
        if last1.points.is_empty() || !last1.characteristic.iter().all(|&c| c) {
            return Err("Example 1 chain did not stabilize nonempty".into());
        }
        let a1 = &steps1[1].points;
        for l in &lattice {
            if !a1.iter().any(|p| torus_dist(p, l) < 1e-9) {
                return Err(format!("Example 1: A1 misses lattice point {l:?}"));
            }
        }
        if a1
            .iter()
            .any(|p| lattice.iter().all(|l| torus_dist(p, l) > 0.3))
        {
            return Err("Example 1: A1 has points farther than 0.3 from the lattice".into());
        }

        // periodized Example 3: A1 finite (the lattice), A2 empty
        let ex3 = [
            parse_smooth_field("flat2(sin(y)), 0", &vars).map_err(|e| e.to_string())?,
            parse_smooth_field("1, 16*sin(x)", &vars).map_err(|e| e.to_string())?,
        ];
        let steps3 = numeric_char_chain(&ex3, &a0, 3).map_err(|e| e.to_string())?;
        if steps3.len() < 3 {
            return Err(format!("Example 3 chain has only {} steps", steps3.len()));
        }
        let a1 = &steps3[1].points;
        if a1.is_empty() || a1.len() > 16 {
            return Err(format!(
                "Example 3: A1 has {} points, expected the small lattice set",
                a1.len()
            ));
        }
        if a1
            .iter()
            .any(|p| lattice.iter().all(|l| torus_dist(p, l) > 1e-9))
        {
            return Err("Example 3: A1 contains a non-lattice point".into());
        }
        if !steps3.last().unwrap().points.is_empty() {
            return Err(format!(
                "Example 3: final step has {} points, expected empty",
                steps3.last().unwrap().points.len()
            ));
        }
        within(t0, Duration::from_secs(60), "criterion 8")?;
        Ok(format!(
            "circle tangents {good}/{m} within 2 degrees, V(xy) origin dim 2, Example 1 \
             stable lattice set ({} pts), Example 3 A1 = lattice -> A2 empty, {:?}",
            steps1[1].points.len(),
            t0.elapsed()
        ))
    })());
}

// ---------------------------------------------------------------------
// 9. Amano comparison

#[test]
fn criterion_09_amano_comparison() {
    criterion(9, (|| {
        let t0 = Instant::now();

        // positive: Phi = x, Y1 = d/dx over Grushin
        let grushin = parse_field_system("vars x,y; field 1,0; field 0,x")
            .map_err(|e| e.to_string())?;
        let phi = Poly::var(2, 0);
        let ys = vec![grushin.fields[0].clone()];
        let rep = amano_check(&grushin, &phi, &ys, 1, &bx(), BUDGET).map_err(|e| e.to_string())?;
        if rep.holds != Some(true) {
            return Err(format!("positive example: holds = {:?}", rep.holds));
        }
        let chain = run_chain(&grushin, 1, &bx(), BUDGET).map_err(|e| e.to_string())?;
        let empty_by_1 = chain
            .steps
            .iter()
            .any(|s| s.k <= 1 && s.status == EmptinessStatus::EmptyCertified);
        if !empty_by_1 {
            return Err("positive example: chain not certified empty by step 1".into());
        }

        // negative: Phi = y over {d/dx, x^2 y d/dy}
        let sys2 = parse_field_system("vars x,y; field 1,0; field 0,x^2*y")
            .map_err(|e| e.to_string())?;
        let phi2 = Poly::var(2, 1);
        let ys2 = vec![sys2.fields[0].clone()];
        let rep2 = amano_check(&sys2, &phi2, &ys2, 1, &bx(), BUDGET).map_err(|e| e.to_string())?;
        if rep2.holds != Some(false) {
            return Err(format!("negative example: holds = {:?}", rep2.holds));
        }
        let chain2 = run_chain(&sys2, 1, &bx(), BUDGET).map_err(|e| e.to_string())?;
        if chain2.stabilized_at.is_none() {
            return Err("negative example: chain did not stabilize".into());
        }
        match &chain2.steps.last().unwrap().status {
            EmptinessStatus::NonEmptyWitness { .. } => {}
            other => return Err(format!("negative example: final status {other:?}, expected nonempty")),
        }
        within(t0, Duration::from_secs(5), "criterion 9")?;
        Ok(format!(
            "Amano holds for Phi=x over Grushin (chain empty by step 1); fails for Phi=y \
             over the stable-line system (chain stabilizes nonempty), {:?}",
            t0.elapsed()
        ))
    })());
}

// ---------------------------------------------------------------------
// 10. Kusuoka-Stroock fields on T^3

#[test]
fn criterion_10_kusuoka_stroock() {
    criterion(10, (|| {
        let t0 = Instant::now();
        let vars = ["x1".to_string(), "x2".to_string(), "x3".to_string()];
        let fields = [
            parse_smooth_field("1, 0, 0", &vars).map_err(|e| e.to_string())?,
            parse_smooth_field("0, flatabs(sin(x1)), 0", &vars).map_err(|e| e.to_string())?,
            parse_smooth_field("0, 0, 1", &vars).map_err(|e| e.to_string())?,
        ];
        let a0 = torus_zero_cloud(32, &["sin(x1)"], &vars)?;
        if a0.len() != 2 * 32 * 32 {
            return Err(format!("A0 has {} points, expected 2048", a0.len()));
        }
        let steps = numeric_char_chain(&fields, &a0, 4).map_err(|e| e.to_string())?;
        if steps.len() != 2 {
            return Err(format!("chain has {} steps, expected A1 empty at step 1", steps.len()));
        }
        if steps[0].characteristic.iter().any(|&c| c) {
            return Err("some A0 point classified characteristic".into());
        }
        if !steps.last().unwrap().points.is_empty() {
            return Err("final step not empty".into());
        }
        within(t0, Duration::from_secs(120), "criterion 10")?;
        Ok(format!(
            "A0 = two planes (2048 pts), every point non-characteristic, A1 empty at \
             step 1, {:?}",
            t0.elapsed()
        ))
    })());
}

// ---------------------------------------------------------------------
// 11. reproducibility: identical config + seed => byte-identical reports

fn run_cli(config: &str, out: &std::path::Path, sub: &str) -> Result<(), String> {
    let dir = out.parent().unwrap();
    let cfg_path = dir.join("config.json");
    std::fs::write(&cfg_path, config).map_err(|e| e.to_string())?;
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_charflow"))
        .arg(sub)
        .arg("--config")
        .arg(&cfg_path)
        .arg("--out")
        .arg(out)
        .status()
        .map_err(|e| e.to_string())?;
    if !status.success() {
        return Err(format!("CLI run failed with {status}"));
    }
    Ok(())
}

fn compare_outputs(a: &std::path::Path, b: &std::path::Path) -> Result<Vec<String>, String> {
    let mut names: Vec<String> = std::fs::read_dir(a)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n != "timings.json") // wall-clock sidecar, varies by design
        .collect();
    names.sort();
    for n in &names {
        let fa = std::fs::read(a.join(n)).map_err(|e| e.to_string())?;
        let fb = std::fs::read(b.join(n)).map_err(|e| format!("{n}: {e}"))?;
        if fa != fb {
            return Err(format!("output file {n} differs between runs"));
        }
    }
    Ok(names)
}

#[test]
fn criterion_11_reproducibility() {
    criterion(11, (|| {
        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut compared = Vec::new();

        let spectrum_cfg = r#"{
            "mode": "spectrum",
            "dimension": 1,
            "variables": ["x"],
            "fields": ["1"],
            "seed": 9,
            "resolutions": [32, 64],
            "grid": {"n_points": 64, "m_eigs": 6},
            "marked_exprs": ["sin(x)"]
        }"#;
        let (a, b) = (tmp.path().join("spec_a"), tmp.path().join("spec_b"));
        run_cli(spectrum_cfg, &a, "spectrum")?;
        run_cli(spectrum_cfg, &b, "spectrum")?;
        compared.extend(compare_outputs(&a, &b)?);

        let conc_cfg = r#"{
            "mode": "concentration",
            "dimension": 2,
            "variables": ["x", "y"],
            "fields": ["1, 0", "0, sin(x)"],
            "seed": 3,
            "grid": {"n_points": 16, "m_eigs": 4},
            "a_exprs": ["sin(x/2)"],
            "eps_values": [0.8, 0.4],
            "probes": 20
        }"#;
        let (c, d) = (tmp.path().join("conc_a"), tmp.path().join("conc_b"));
        run_cli(conc_cfg, &c, "concentration")?;
        run_cli(conc_cfg, &d, "concentration")?;
        compared.extend(compare_outputs(&c, &d)?);

        Ok(format!(
            "spectrum and concentration runs byte-identical across reruns ({} files compared)",
            compared.len()
        ))
    })());
}
