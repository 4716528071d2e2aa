//! Shared test support: an independent naive Buchberger oracle (FIFO
//! pair queue, no selection strategy, no elimination criteria) and a
//! seeded random polynomial generator for bulk law checks.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use charflow::field::PolyVectorField;
use charflow::poly::{Monomial, Poly};

pub fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Random polynomial with up to `max_terms` terms, per-variable exponents
/// 0..=max_exp, integer coefficients in -4..=4 (zero coefficients allowed,
/// so the zero polynomial occurs).
pub fn rand_poly(rng: &mut ChaCha8Rng, nvars: usize, max_terms: usize, max_exp: u32) -> Poly {
    let terms = rng.gen_range(0..=max_terms);
    let mut acc = Poly::zero(nvars);
    for _ in 0..terms {
        let exps: Vec<u32> = (0..nvars).map(|_| rng.gen_range(0..=max_exp)).collect();
        let c = rng.gen_range(-4i64..=4);
        acc = acc.add(&Poly::from_terms(nvars, [(Monomial(exps), rat(c))]));
    }
    acc
}

pub fn rand_field(rng: &mut ChaCha8Rng, nvars: usize, max_terms: usize, max_exp: u32) -> PolyVectorField {
    let coeffs: Vec<Poly> = (0..nvars)
        .map(|_| rand_poly(rng, nvars, max_terms, max_exp))
        .collect();
    PolyVectorField::new(coeffs)
}

pub mod oracle {
    use super::*;

    fn lead(p: &Poly) -> (Monomial, BigRational) {
        let (m, c) = p.leading().unwrap();
        (m.clone(), c.clone())
    }

    fn divide(f: &Poly, basis: &[Poly]) -> Poly {
        let mut p = f.clone();
        let mut rem = Poly::zero(f.nvars());
        'outer: while !p.is_zero() {
            let (lm, lc) = lead(&p);
            for g in basis {
                let (gm, gc) = lead(g);
                if gm.divides(&lm) {
                    let q = gm.quotient(&lm);
                    p = p.sub_mul_term(&(&lc / &gc), &q, g);
                    continue 'outer;
                }
            }
            rem = rem.add(&Poly::from_terms(f.nvars(), [(lm.clone(), lc.clone())]));
            p = p.sub(&Poly::from_terms(f.nvars(), [(lm, lc)]));
        }
        rem
    }

    fn spol(f: &Poly, g: &Poly) -> Poly {
        let (mf, cf) = lead(f);
        let (mg, cg) = lead(g);
        let l = mf.lcm(&mg);
        let a = Poly::from_terms(f.nvars(), [(mf.quotient(&l), cf.recip())]);
        let b = Poly::from_terms(g.nvars(), [(mg.quotient(&l), cg.recip())]);
        a.mul(f).sub(&b.mul(g))
    }

    pub fn reduced_groebner(gens: &[Poly]) -> Vec<Poly> {
        let mut basis: Vec<Poly> = gens
            .iter()
            .filter(|g| !g.is_zero())
            .map(|g| g.monic())
            .collect();
        if basis.is_empty() {
            return Vec::new();
        }
        let mut queue: std::collections::VecDeque<(usize, usize)> = Default::default();
        for j in 1..basis.len() {
            for i in 0..j {
                queue.push_back((i, j));
            }
        }
        while let Some((i, j)) = queue.pop_front() {
            let r = divide(&spol(&basis[i], &basis[j]), &basis);
            if !r.is_zero() {
                let n = basis.len();
                basis.push(r.monic());
                for k in 0..n {
                    queue.push_back((k, n));
                }
            }
        }
        // minimize
        let mut minimal: Vec<Poly> = Vec::new();
        for (i, g) in basis.iter().enumerate() {
            let (mi, _) = lead(g);
            let dominated = basis.iter().enumerate().any(|(j, h)| {
                if i == j {
                    return false;
                }
                let (mj, _) = lead(h);
                mj.divides(&mi) && (mj != mi || j < i)
            });
            if !dominated {
                minimal.push(g.clone());
            }
        }
        // autoreduce
        let mut reduced: Vec<Poly> = Vec::new();
        for i in 0..minimal.len() {
            let others: Vec<Poly> = minimal
                .iter()
                .enumerate()
                .filter_map(|(j, g)| (j != i).then(|| g.clone()))
                .collect();
            reduced.push(divide(&minimal[i], &others).monic());
        }
        reduced.sort_by(|a, b| lead(a).0.cmp(&lead(b).0));
        reduced
    }
}
