//! Polynomial vector fields, their action on functions, and iterated
//! Lie brackets.

use crate::error::{Error, Result};
use crate::poly::Poly;

/// A vector field `X = sum_k b_k d/dx_k` with polynomial components.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyVectorField {
    coeffs: Vec<Poly>,
}

impl PolyVectorField {
    pub fn new(coeffs: Vec<Poly>) -> Self {
        assert!(!coeffs.is_empty());
        let n = coeffs[0].nvars();
        assert!(coeffs.iter().all(|p| p.nvars() == n));
        assert_eq!(coeffs.len(), n, "a field on an n-dim chart has n components");
        PolyVectorField { coeffs }
    }

    pub fn zero(n: usize) -> Self {
        PolyVectorField {
            coeffs: (0..n).map(|_| Poly::zero(n)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[Poly] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|p| p.is_zero())
    }

    pub fn eval_f64(&self, x: &[f64]) -> Vec<f64> {
        self.coeffs.iter().map(|p| p.eval_f64(x)).collect()
    }
}

/// A finite system of polynomial vector fields on an n-dimensional chart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldSystem {
    pub variables: Vec<String>,
    pub fields: Vec<PolyVectorField>,
}

impl FieldSystem {
    pub fn new(variables: Vec<String>, fields: Vec<PolyVectorField>) -> Result<Self> {
        let n = variables.len();
        if fields.is_empty() {
            return Err(Error::Config("a field system needs at least one field".into()));
        }
        for f in &fields {
            if f.dim() != n {
                return Err(Error::DimensionMismatch(f.dim(), n));
            }
        }
        Ok(FieldSystem { variables, fields })
    }

    pub fn dim(&self) -> usize {
        self.variables.len()
    }

    pub fn num_fields(&self) -> usize {
        self.fields.len()
    }
}

/// Word of field indices naming a left-nested iterated bracket
/// `[X_{i1}, [ ... [X_{i(k-1)}, X_{ik}] ... ]]`; length-1 words denote the
/// fields themselves. Indices are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BracketWord(pub Vec<usize>);

impl BracketWord {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `X f = sum_k b_k df/dx_k`, the exact symbolic derivative of `f` along `X`.
pub fn apply_field(field: &PolyVectorField, f: &Poly) -> Result<Poly> {
    if field.dim() != f.nvars() {
        return Err(Error::DimensionMismatch(field.dim(), f.nvars()));
    }
    let mut out = Poly::zero(f.nvars());
    for (k, b) in field.coeffs().iter().enumerate() {
        if b.is_zero() {
            continue;
        }
        out = out.add(&b.mul(&f.derivative(k)));
    }
    Ok(out)
}

/// Commutator `[X, Y]` with components `X(Y_k) - Y(X_k)`.
pub fn lie_bracket(x: &PolyVectorField, y: &PolyVectorField) -> Result<PolyVectorField> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch(x.dim(), y.dim()));
    }
    let coeffs = x
        .coeffs()
        .iter()
        .zip(y.coeffs())
        .map(|(xk, yk)| Ok(apply_field(x, yk)?.sub(&apply_field(y, xk)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(PolyVectorField::new(coeffs))
}

/// All left-nested iterated brackets of words of length <= s.
///
/// Zero fields are dropped and syntactic duplicates deduplicated keeping
/// the shortest word; no antisymmetry or Jacobi reduction is applied.
pub fn bracket_basis(sys: &FieldSystem, s: usize) -> Vec<(BracketWord, PolyVectorField)> {
    assert!(s >= 1);
    let r = sys.num_fields();
    // level k holds every word of length k with its field, zeros included,
    // so longer words can still be built through vanishing intermediates?
    // No: [X, 0] = 0 forever, so zero entries can be pruned per level.
    let mut level: Vec<(BracketWord, PolyVectorField)> = (0..r)
        .map(|i| (BracketWord(vec![i + 1]), sys.fields[i].clone()))
        .collect();
    let mut out: Vec<(BracketWord, PolyVectorField)> = Vec::new();
    let push_unique = |out: &mut Vec<(BracketWord, PolyVectorField)>, w: BracketWord, f: PolyVectorField| {
        if f.is_zero() {
            return;
        }
        if out.iter().any(|(_, g)| *g == f) {
            return;
        }
        out.push((w, f));
    };
    for (w, f) in &level {
        push_unique(&mut out, w.clone(), f.clone());
    }
    for _ in 2..=s {
        let mut next = Vec::new();
        for (w, f) in &level {
            if f.is_zero() {
                continue;
            }
            for i in 0..r {
                let bracket = lie_bracket(&sys.fields[i], f).expect("dimensions agree");
                let mut word = vec![i + 1];
                word.extend_from_slice(&w.0);
                let word = BracketWord(word);
                push_unique(&mut out, word.clone(), bracket.clone());
                next.push((word, bracket));
            }
        }
        level = next;
    }
    out
}
