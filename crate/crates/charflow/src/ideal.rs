//! Polynomial ideal computations: Buchberger's algorithm with the normal
//! selection strategy and both elimination criteria, normal forms,
//! determinantal (minors) ideals, and a tiered real-emptiness status.
//!
//! Everything runs over the rationals in graded reverse lexicographic
//! order. The reduced Groebner basis is cached on the ideal; computations
//! that would exceed the S-pair reduction budget fail with
//! `ComputationBudgetExhausted` rather than returning a wrong answer.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};

use crate::error::{Error, Result};
use crate::poly::Poly;

/// Default cap on reduction steps inside one Groebner run.
pub const DEFAULT_SPAIR_BUDGET: usize = 200_000;

/// Default tolerance on the sum of squared generator values at a witness.
pub const DEFAULT_TOL_WITNESS: f64 = 1e-18;

/// An ideal given by generators, with an optional cached reduced basis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ideal {
    nvars: usize,
    generators: Vec<Poly>,
    basis: Option<Vec<Poly>>,
}

impl Ideal {
    /// Zero generators are dropped; an all-zero list yields the zero ideal.
    pub fn new(nvars: usize, generators: Vec<Poly>) -> Self {
        let generators: Vec<Poly> = generators.into_iter().filter(|g| !g.is_zero()).collect();
        for g in &generators {
            assert_eq!(g.nvars(), nvars);
        }
        Ideal {
            nvars,
            generators,
            basis: None,
        }
    }

    pub fn zero(nvars: usize) -> Self {
        Ideal::new(nvars, Vec::new())
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn generators(&self) -> &[Poly] {
        &self.generators
    }

    pub fn cached_basis(&self) -> Option<&[Poly]> {
        self.basis.as_deref()
    }

    /// Compute and cache the reduced Groebner basis. Idempotent.
    pub fn groebner(&mut self, budget: usize) -> Result<&[Poly]> {
        if self.basis.is_none() {
            let b = buchberger(&self.generators, budget)?;
            self.basis = Some(b);
        }
        Ok(self.basis.as_deref().unwrap())
    }

    /// Unique remainder of `f` modulo the reduced basis.
    pub fn normal_form(&mut self, f: &Poly, budget: usize) -> Result<Poly> {
        if f.nvars() != self.nvars {
            return Err(Error::DimensionMismatch(f.nvars(), self.nvars));
        }
        self.groebner(budget)?;
        let basis = self.basis.as_ref().unwrap();
        let mut counter = usize::MAX;
        Ok(reduce_full(f, basis, &mut counter).expect("unbounded reduction cannot exhaust"))
    }

    /// True iff 1 lies in the ideal; implies the real variety is empty.
    pub fn contains_one(&mut self, budget: usize) -> Result<bool> {
        let basis = self.groebner(budget)?;
        Ok(basis.iter().any(|g| {
            g.leading()
                .map(|(m, _)| m.is_constant())
                .unwrap_or(false)
        }))
    }
}

/// Remainder of `f` on full division by `basis`; decrements `*steps` per
/// reduction and errors when it hits zero.
fn reduce_full(f: &Poly, basis: &[Poly], steps: &mut usize) -> Result<Poly> {
    let mut p = f.clone();
    let mut remainder = Poly::zero(f.nvars());
    'outer: while let Some((lm, lc)) = p.leading().map(|(m, c)| (m.clone(), c.clone())) {
        for g in basis {
            let (gm, gc) = g.leading().expect("basis elements are nonzero");
            if gm.divides(&lm) {
                if *steps == 0 {
                    return Err(Error::ComputationBudgetExhausted(
                        "reduction step cap hit".into(),
                    ));
                }
                *steps -= 1;
                let q = gm.quotient(&lm);
                let c = &lc / gc;
                p = p.sub_mul_term(&c, &q, g);
                continue 'outer;
            }
        }
        // leading term irreducible: move it to the remainder
        remainder = remainder.add(&Poly::from_terms(f.nvars(), [(lm.clone(), lc.clone())]));
        p = p.sub(&Poly::from_terms(f.nvars(), [(lm, lc)]));
    }
    Ok(remainder)
}

/// Buchberger's algorithm returning the reduced (hence unique) basis.
fn buchberger(generators: &[Poly], budget: usize) -> Result<Vec<Poly>> {
    let mut basis: Vec<Poly> = generators
        .iter()
        .filter(|g| !g.is_zero())
        .map(|g| g.monic())
        .collect();
    if basis.is_empty() {
        return Ok(Vec::new());
    }
    let mut steps = budget;

    // pending S-pairs (i, j) with i < j
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut done: std::collections::HashSet<(usize, usize)> = std::collections::HashSet::new();
    for j in 1..basis.len() {
        for i in 0..j {
            pairs.push((i, j));
        }
    }

    let lm = |basis: &[Poly], i: usize| basis[i].leading().unwrap().0.clone();

    while !pairs.is_empty() {
        // normal selection: minimal lcm in the monomial order
        let (best_idx, _) = pairs
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                let la = lm(&basis, a.0).lcm(&lm(&basis, a.1));
                let lb = lm(&basis, b.0).lcm(&lm(&basis, b.1));
                la.cmp(&lb)
            })
            .map(|(k, p)| (k, *p))
            .unwrap();
        let (i, j) = pairs.swap_remove(best_idx);
        done.insert((i, j));

        let (mi, mj) = (lm(&basis, i), lm(&basis, j));
        // first Buchberger criterion: coprime leading monomials
        if mi.is_coprime(&mj) {
            continue;
        }
        // second (chain) criterion
        let l = mi.lcm(&mj);
        let chained = (0..basis.len()).any(|k| {
            k != i
                && k != j
                && lm(&basis, k).divides(&l)
                && done.contains(&(i.min(k), i.max(k)))
                && done.contains(&(j.min(k), j.max(k)))
        });
        if chained {
            continue;
        }

        let s = s_poly(&basis[i], &basis[j]);
        let r = reduce_full(&s, &basis, &mut steps)?;
        if !r.is_zero() {
            let r = r.monic();
            let new = basis.len();
            basis.push(r);
            for k in 0..new {
                pairs.push((k, new));
            }
        }
    }

    Ok(reduce_basis(basis))
}

fn s_poly(f: &Poly, g: &Poly) -> Poly {
    let (mf, cf) = f.leading().unwrap();
    let (mg, cg) = g.leading().unwrap();
    let l = mf.lcm(mg);
    let qf = mf.quotient(&l);
    let qg = mg.quotient(&l);
    let tf = Poly::from_terms(f.nvars(), [(qf, cf.recip())]);
    let tg = Poly::from_terms(g.nvars(), [(qg, cg.recip())]);
    tf.mul(f).sub(&tg.mul(g))
}

/// Minimize then autoreduce: unique reduced basis, monic, sorted by
/// leading monomial.
fn reduce_basis(mut basis: Vec<Poly>) -> Vec<Poly> {
    // minimize: drop any element whose leading term another one divides
    let mut keep = vec![true; basis.len()];
    for i in 0..basis.len() {
        if !keep[i] {
            continue;
        }
        let mi = basis[i].leading().unwrap().0.clone();
        for j in 0..basis.len() {
            if i == j || !keep[j] {
                continue;
            }
            let mj = basis[j].leading().unwrap().0.clone();
            if mj.divides(&mi) && (mj != mi || j < i) {
                keep[i] = false;
                break;
            }
        }
    }
    let mut minimal: Vec<Poly> = basis
        .drain(..)
        .zip(keep)
        .filter_map(|(g, k)| if k { Some(g) } else { None })
        .collect();

    // autoreduce tails
    let mut reduced = Vec::with_capacity(minimal.len());
    for i in 0..minimal.len() {
        let others: Vec<Poly> = minimal
            .iter()
            .enumerate()
            .filter_map(|(j, g)| if j != i { Some(g.clone()) } else { None })
            .collect();
        let mut unlimited = usize::MAX;
        let r = reduce_full(&minimal[i], &others, &mut unlimited).unwrap();
        reduced.push(r.monic());
    }
    minimal.clear();

    reduced.sort_by(|a, b| a.leading().unwrap().0.cmp(b.leading().unwrap().0));
    reduced
}

/// Ideal generated by all `n x n` minors of an `n x m` matrix of
/// polynomials given column-wise. With fewer than `n` columns the rank can
/// never reach `n`, so the zero ideal is returned.
pub fn minors_ideal(nvars: usize, columns: &[Vec<Poly>], n: usize) -> Ideal {
    let m = columns.len();
    for c in columns {
        assert_eq!(c.len(), n);
    }
    if m < n {
        return Ideal::zero(nvars);
    }
    let mut gens = Vec::new();
    let mut choice = vec![0usize; n];
    subsets(m, n, 0, 0, &mut choice, &mut |sel| {
        let minor = det_cofactor(nvars, columns, sel);
        gens.push(minor);
    });
    Ideal::new(nvars, gens)
}

fn subsets(m: usize, n: usize, start: usize, depth: usize, choice: &mut [usize], f: &mut impl FnMut(&[usize])) {
    if depth == n {
        f(choice);
        return;
    }
    for i in start..m {
        choice[depth] = i;
        subsets(m, n, i + 1, depth + 1, choice, f);
    }
}

/// Exact determinant of the square submatrix on the selected columns,
/// by cofactor expansion along the first row.
fn det_cofactor(nvars: usize, columns: &[Vec<Poly>], sel: &[usize]) -> Poly {
    fn go(nvars: usize, columns: &[Vec<Poly>], sel: &[usize], rows: &[usize]) -> Poly {
        let n = rows.len();
        if n == 1 {
            return columns[sel[0]][rows[0]].clone();
        }
        let mut acc = Poly::zero(nvars);
        for (k, &col) in sel.iter().enumerate() {
            let a = &columns[col][rows[0]];
            if a.is_zero() {
                continue;
            }
            let sub_sel: Vec<usize> = sel
                .iter()
                .enumerate()
                .filter_map(|(j, &c)| if j != k { Some(c) } else { None })
                .collect();
            let minor = go(nvars, columns, &sub_sel, &rows[1..]);
            let term = a.mul(&minor);
            if k % 2 == 0 {
                acc = acc.add(&term);
            } else {
                acc = acc.sub(&term);
            }
        }
        acc
    }
    let rows: Vec<usize> = (0..sel.len()).collect();
    go(nvars, columns, sel, &rows)
}

/// Search parameters for the numeric witness tiers.
#[derive(Debug, Clone)]
pub struct SearchBox {
    pub radius: f64,
    pub grid_per_axis: usize,
    pub tol_witness: f64,
}

impl Default for SearchBox {
    fn default() -> Self {
        SearchBox {
            radius: 2.0,
            grid_per_axis: 9,
            tol_witness: DEFAULT_TOL_WITNESS,
        }
    }
}

/// Outcome of the tiered variety-emptiness decision.
#[derive(Debug, Clone, PartialEq)]
pub enum EmptinessStatus {
    /// 1 lies in the ideal; the real variety is certainly empty.
    EmptyCertified,
    /// A float point where the sum of squared generators is below tolerance.
    NonEmptyWitness { point: Vec<f64>, residual: f64 },
    /// Neither certified empty nor witnessed nonempty.
    Unknown,
}

impl EmptinessStatus {
    pub fn tag(&self) -> &'static str {
        match self {
            EmptinessStatus::EmptyCertified => "empty_certified",
            EmptinessStatus::NonEmptyWitness { .. } => "nonempty_witness",
            EmptinessStatus::Unknown => "unknown",
        }
    }
}

/// Tiered decision: certified emptiness over the complex field, then a
/// grid-seeded local descent for a real witness, then `Unknown`.
///
/// Budget exhaustion in tier 1 degrades to the numeric tiers and never
/// fabricates a certificate.
pub fn real_emptiness_status(ideal: &mut Ideal, bx: &SearchBox, budget: usize) -> EmptinessStatus {
    match ideal.contains_one(budget) {
        Ok(true) => return EmptinessStatus::EmptyCertified,
        Ok(false) => {}
        Err(_) => {} // fall through to numeric tiers on the raw generators
    }
    let gens: Vec<Poly> = ideal
        .cached_basis()
        .map(|b| b.to_vec())
        .unwrap_or_else(|| ideal.generators().to_vec());
    if gens.is_empty() {
        // zero ideal: the whole space, trivially nonempty
        let n = ideal.nvars();
        return EmptinessStatus::NonEmptyWitness {
            point: vec![0.0; n],
            residual: 0.0,
        };
    }
    match witness_search(ideal.nvars(), &gens, bx) {
        Some((point, residual)) => EmptinessStatus::NonEmptyWitness { point, residual },
        None => EmptinessStatus::Unknown,
    }
}

fn sum_sq(gens: &[Poly], x: &[f64]) -> f64 {
    gens.iter().map(|g| g.eval_f64(x).powi(2)).sum()
}

/// Grid scan over the box followed by coordinate-wise damped Newton
/// descent on `F = sum g_i^2` from the best seeds.
pub fn witness_search(n: usize, gens: &[Poly], bx: &SearchBox) -> Option<(Vec<f64>, f64)> {
    witness_points(n, gens, bx).into_iter().next()
}

/// All distinct sub-tolerance points found by the grid-seeded descent,
/// best first.
pub fn witness_points(n: usize, gens: &[Poly], bx: &SearchBox) -> Vec<(Vec<f64>, f64)> {
    let gpa = bx.grid_per_axis.max(2);
    let partials: Vec<Vec<Poly>> = gens
        .iter()
        .map(|g| (0..n).map(|k| g.derivative(k)).collect())
        .collect();

    // enumerate grid points
    let mut seeds: Vec<(f64, Vec<f64>)> = Vec::new();
    let total = gpa.pow(n as u32);
    for id in 0..total {
        let mut rem = id;
        let mut x = vec![0.0; n];
        for xi in x.iter_mut() {
            let i = rem % gpa;
            rem /= gpa;
            *xi = -bx.radius + 2.0 * bx.radius * (i as f64) / ((gpa - 1) as f64);
        }
        let f = sum_sq(gens, &x);
        seeds.push((f, x));
    }
    seeds.sort_by(|a, b| a.0.total_cmp(&b.0));
    seeds.truncate(16);

    let mut found: Vec<(Vec<f64>, f64)> = Vec::new();
    for (_, seed) in seeds {
        let (x, f) = descend(gens, &partials, seed, bx.tol_witness);
        if f >= bx.tol_witness {
            continue;
        }
        let dup = found.iter().any(|(y, _)| {
            x.iter()
                .zip(y)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
                < 1e-6
        });
        if !dup {
            found.push((x, f));
        }
    }
    found.sort_by(|a, b| a.1.total_cmp(&b.1));
    found
}

fn descend(gens: &[Poly], partials: &[Vec<Poly>], mut x: Vec<f64>, tol: f64) -> (Vec<f64>, f64) {
    let n = x.len();
    let mut f = sum_sq(gens, &x);
    for _ in 0..200 {
        if f < tol * 1e-2 {
            break;
        }
        let mut improved = false;
        for k in 0..n {
            // Gauss-Newton curvature along coordinate k
            let mut grad = 0.0;
            let mut curv = 0.0;
            for (g, dg) in gens.iter().zip(partials) {
                let gv = g.eval_f64(&x);
                let dv = dg[k].eval_f64(&x);
                grad += 2.0 * gv * dv;
                curv += 2.0 * dv * dv;
            }
            if grad == 0.0 {
                continue;
            }
            let mut step = -grad / (curv + 1e-300);
            // damped line search
            for _ in 0..40 {
                let mut xt = x.clone();
                xt[k] += step;
                let ft = sum_sq(gens, &xt);
                if ft < f {
                    x = xt;
                    f = ft;
                    improved = true;
                    break;
                }
                step *= 0.5;
            }
        }
        if !improved {
            break;
        }
    }
    (x, f)
}

/// Round a float coordinate vector to the nearest rationals with
/// denominator `2^40`; used to re-check witnesses in exact arithmetic.
pub fn nearest_dyadic(x: &[f64]) -> Vec<BigRational> {
    let denom = BigInt::from(1u64 << 40);
    x.iter()
        .map(|&v| {
            let scaled = (v * (1u64 << 40) as f64).round();
            BigRational::new(BigInt::from(scaled as i64), denom.clone())
        })
        .collect()
}

/// Exact |g(point)| evaluations at the dyadic rounding of a witness.
pub fn exact_abs_values(gens: &[Poly], point: &[f64]) -> Vec<f64> {
    let q = nearest_dyadic(point);
    gens.iter()
        .map(|g| g.eval_rational(&q).abs().to_f64().unwrap_or(f64::INFINITY))
        .collect()
}
