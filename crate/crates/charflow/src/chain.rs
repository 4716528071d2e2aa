//! The core decision procedure: degeneration ideal, iterated
//! characteristic-set steps, stabilization within the n+1 bound,
//! characteristic-submanifold witnesses, the Amano comparison, and the
//! final precompactness verdict.
//!
//! Soundness contract: the variety of each chain step is a superset of
//! the true characteristic set, so a certified-empty step proves
//! precompactness, while a nonempty stable chain alone proves nothing —
//! a verified submanifold witness is required for the negative verdict.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::field::{apply_field, bracket_basis, FieldSystem};
use crate::ideal::{
    minors_ideal, real_emptiness_status, witness_points, EmptinessStatus, Ideal, SearchBox,
};
use crate::poly::Poly;

/// Cap on bracket-matrix columns before minors enumeration.
pub const DEFAULT_MAX_COLUMNS: usize = 2048;
/// Kernel-membership tolerance, relative to the field magnitude.
pub const TOL_TANGENT: f64 = 1e-8;
/// Singular-value gap ratio deciding numeric Jacobian rank.
pub const RANK_GAP: f64 = 1e6;

#[derive(Debug, Clone)]
pub struct ChainStep {
    pub k: usize,
    pub ideal: Ideal,
    pub status: EmptinessStatus,
    pub generator_count: usize,
    /// Numeric variety samples used for the stabilization test.
    pub samples: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct ChainReport {
    pub s: usize,
    pub steps: Vec<ChainStep>,
    pub stabilized_at: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SubmanifoldWitness {
    pub ideal: Ideal,
    pub point: Vec<f64>,
    pub jacobian_rank: usize,
    pub tangency_certified: bool,
}

#[derive(Debug, Clone)]
pub enum Verdict {
    Precompact { certified_step: usize },
    NotPrecompact { witness: SubmanifoldWitness },
    Unknown { reason: String },
}

impl Verdict {
    pub fn tag(&self) -> &'static str {
        match self {
            Verdict::Precompact { .. } => "precompact",
            Verdict::NotPrecompact { .. } => "not_precompact",
            Verdict::Unknown { .. } => "unknown",
        }
    }
}

/// Ideal of all n x n minors of the bracket coefficient matrix: its
/// variety is the s-step degeneration locus.
pub fn degeneration_ideal(sys: &FieldSystem, s: usize, max_columns: usize) -> Result<Ideal> {
    assert!(s >= 1);
    let n = sys.dim();
    let basis = bracket_basis(sys, s);
    if basis.len() > max_columns {
        return Err(Error::ComputationBudgetExhausted(format!(
            "bracket basis has {} columns, cap is {}",
            basis.len(),
            max_columns
        )));
    }
    let columns: Vec<Vec<Poly>> = basis
        .into_iter()
        .map(|(_, f)| f.coeffs().to_vec())
        .collect();
    Ok(minors_ideal(n, &columns, n))
}

/// One characteristic-set step: adjoin every `X_j g` for `g` in the
/// reduced basis. The result's variety contains the characteristic set
/// of the input's variety.
pub fn char_step(ideal: &mut Ideal, sys: &FieldSystem, budget: usize) -> Result<Ideal> {
    let basis: Vec<Poly> = ideal.groebner(budget)?.to_vec();
    let mut gens = basis.clone();
    for g in &basis {
        for x in &sys.fields {
            gens.push(apply_field(x, g)?);
        }
    }
    Ok(Ideal::new(ideal.nvars(), gens))
}

fn variety_samples(ideal: &mut Ideal, bx: &SearchBox, budget: usize) -> Vec<Vec<f64>> {
    let gens: Vec<Poly> = match ideal.groebner(budget) {
        Ok(b) => b.to_vec(),
        Err(_) => ideal.generators().to_vec(),
    };
    if gens.is_empty() {
        return vec![vec![0.0; ideal.nvars()]];
    }
    witness_points(ideal.nvars(), &gens, bx)
        .into_iter()
        .map(|(p, _)| p)
        .collect()
}

fn satisfies_all(gens: &[Poly], p: &[f64], tol: f64) -> bool {
    gens.iter().map(|g| g.eval_f64(p).powi(2)).sum::<f64>() < tol
}

/// Iterate `char_step` from the degeneration ideal. Stops at the first
/// certified-empty step, at an exact ideal fixpoint, or at step n+1.
///
/// Mutual sampling containment between consecutive varieties is
/// necessary for stabilization but not sufficient: the adjoined
/// tangency generators can vanish identically on the current variety
/// while still strengthening the ideal enough to shrink a later step.
/// It is therefore recorded per transition and only promoted to
/// `stabilized_at` when it holds at the final transition and no exact
/// fixpoint was reached.
pub fn run_chain(sys: &FieldSystem, s: usize, bx: &SearchBox, budget: usize) -> Result<ChainReport> {
    let n = sys.dim();
    let mut ideal = degeneration_ideal(sys, s, DEFAULT_MAX_COLUMNS)?;
    let mut steps: Vec<ChainStep> = Vec::new();
    let mut stabilized_at = None;
    let mut last_containment: Option<usize> = None;

    for k in 0..=(n + 1) {
        let status = real_emptiness_status(&mut ideal, bx, budget);
        let samples = match status {
            EmptinessStatus::EmptyCertified => Vec::new(),
            _ => variety_samples(&mut ideal, bx, budget),
        };
        let empty = status == EmptinessStatus::EmptyCertified;
        steps.push(ChainStep {
            k,
            ideal: ideal.clone(),
            status,
            generator_count: ideal.generators().len().max(
                ideal.cached_basis().map(|b| b.len()).unwrap_or(0),
            ),
            samples,
        });
        if empty || k == n + 1 {
            break;
        }

        let next = char_step(&mut ideal, sys, budget)?;
        let mut next = next;

        // exact fixpoint: every adjoined generator reduces to zero
        let fixed = {
            let mut all_zero = true;
            for g in next.generators() {
                match ideal.normal_form(g, budget) {
                    Ok(nf) => {
                        if !nf.is_zero() {
                            all_zero = false;
                            break;
                        }
                    }
                    Err(_) => {
                        all_zero = false;
                        break;
                    }
                }
            }
            all_zero
        };
        if fixed {
            stabilized_at = Some(k);
            break;
        }

        // set-level containment check for this transition (recorded,
        // not a stopping rule)
        let prev_samples = steps.last().unwrap().samples.clone();
        if !prev_samples.is_empty() {
            let next_gens: Vec<Poly> = next.generators().to_vec();
            let prev_gens: Vec<Poly> = ideal
                .cached_basis()
                .map(|b| b.to_vec())
                .unwrap_or_else(|| ideal.generators().to_vec());
            let next_samples = variety_samples(&mut next, bx, budget);
            let forward = prev_samples
                .iter()
                .all(|p| satisfies_all(&next_gens, p, bx.tol_witness));
            let backward = next_samples
                .iter()
                .all(|p| satisfies_all(&prev_gens, p, bx.tol_witness));
            if forward && backward && !next_samples.is_empty() {
                last_containment = Some(k);
            }
        }

        ideal = next;
    }

    // fall back to the set-level signal only when it survived to the
    // very last transition
    if stabilized_at.is_none() {
        if let Some(k) = last_containment {
            if k + 2 == steps.len() {
                stabilized_at = Some(k);
            }
        }
    }

    Ok(ChainReport {
        s,
        steps,
        stabilized_at,
    })
}

/// Numeric rank of the basis Jacobian at a point, by singular-value gap.
fn jacobian_rank(basis: &[Poly], p: &[f64]) -> usize {
    let n = p.len();
    let rows = basis.len();
    if rows == 0 {
        return 0;
    }
    let mut m = DMatrix::zeros(rows, n);
    for (i, g) in basis.iter().enumerate() {
        let grad = g.gradient_f64(p);
        for (j, v) in grad.iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    let svals = m.singular_values();
    let smax = svals.iter().cloned().fold(0.0f64, f64::max);
    if smax < 1e-10 {
        return 0;
    }
    svals.iter().filter(|&&s| s > smax / RANK_GAP).count()
}

fn jacobian_matrix(basis: &[Poly], p: &[f64]) -> DMatrix<f64> {
    let n = p.len();
    let mut m = DMatrix::zeros(basis.len(), n);
    for (i, g) in basis.iter().enumerate() {
        let grad = g.gradient_f64(p);
        for (j, v) in grad.iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    m
}

/// Square-free parts of an all-monomial basis: same variety, radical
/// generators. Returns `None` when some generator is not a monomial.
fn monomial_radical(ideal: &Ideal) -> Option<Ideal> {
    let basis = ideal.cached_basis()?;
    let mut gens = Vec::new();
    for g in basis {
        if g.num_terms() != 1 {
            return None;
        }
        let (m, _) = g.leading().unwrap();
        let squarefree: Vec<u32> = m.0.iter().map(|&e| e.min(1)).collect();
        gens.push(Poly::from_terms(
            ideal.nvars(),
            [(
                crate::poly::Monomial(squarefree),
                num_rational::BigRational::from_integer(1.into()),
            )],
        ));
    }
    Some(Ideal::new(ideal.nvars(), gens))
}

/// Try to certify a characteristic submanifold inside the stable
/// variety: exact tangency of every field against the defining ideal,
/// plus a numeric smooth point of locally constant Jacobian rank whose
/// field vectors lie in the Jacobian kernel.
pub fn verify_witness(
    stable: &Ideal,
    sys: &FieldSystem,
    bx: &SearchBox,
    budget: usize,
) -> Result<Option<SubmanifoldWitness>> {
    // prefer the square-free (radical) representative when available: it
    // has the same variety and a nondegenerate Jacobian on it
    let mut candidates: Vec<Ideal> = Vec::new();
    {
        let mut st = stable.clone();
        if st.groebner(budget).is_ok() {
            if let Some(mut rad) = monomial_radical(&st) {
                if rad.groebner(budget).is_ok() && rad.cached_basis() != st.cached_basis() {
                    candidates.push(rad);
                }
            }
        }
    }
    candidates.push(stable.clone());

    for mut cand in candidates {
        let basis: Vec<Poly> = match cand.groebner(budget) {
            Ok(b) => b.to_vec(),
            Err(_) => continue,
        };
        if basis.is_empty() {
            continue; // zero ideal: whole space, no positive codimension
        }
        if basis.iter().any(|g| g.is_constant()) {
            continue; // unit ideal: empty variety
        }

        // exact tangency: X_j g must be a member for every basis g
        let mut certified = true;
        'tangency: for g in &basis {
            for x in &sys.fields {
                let xg = apply_field(x, g)?;
                match cand.normal_form(&xg, budget) {
                    Ok(nf) => {
                        if !nf.is_zero() {
                            certified = false;
                            break 'tangency;
                        }
                    }
                    Err(_) => {
                        certified = false;
                        break 'tangency;
                    }
                }
            }
        }
        if !certified {
            continue;
        }

        // numeric smooth point with locally constant rank
        let points = witness_points(cand.nvars(), &basis, bx);
        let n = cand.nvars();
        let delta = 1e-4;
        for (p, _) in points {
            let c = jacobian_rank(&basis, &p);
            if c < 1 || c > n {
                continue;
            }
            let mut constant = true;
            for i in 0..n {
                for sgn in [-1.0, 1.0] {
                    let mut q = p.clone();
                    q[i] += sgn * delta;
                    if jacobian_rank(&basis, &q) != c {
                        constant = false;
                    }
                }
            }
            if !constant {
                continue;
            }
            let jac = jacobian_matrix(&basis, &p);
            let smax = jac.singular_values().iter().cloned().fold(0.0f64, f64::max);
            let mut tangent = true;
            for x in &sys.fields {
                let v = x.eval_f64(&p);
                let vn = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                if vn < 1e-12 {
                    continue; // vanishing field vector is trivially tangent
                }
                let jv = &jac * nalgebra::DVector::from_vec(v);
                if jv.norm() > TOL_TANGENT * vn * (1.0 + smax) {
                    tangent = false;
                    break;
                }
            }
            if !tangent {
                continue;
            }
            return Ok(Some(SubmanifoldWitness {
                ideal: cand.clone(),
                point: p,
                jacobian_rank: c,
                tangency_certified: true,
            }));
        }
    }
    Ok(None)
}

/// Combine the chain outcome and the optional witness into the final,
/// sound verdict.
pub fn verdict(report: &ChainReport, witness: Option<&SubmanifoldWitness>) -> Verdict {
    let n_plus_1 = report
        .steps
        .first()
        .map(|s0| s0.ideal.nvars() + 1)
        .unwrap_or(usize::MAX);
    for step in &report.steps {
        if step.status == EmptinessStatus::EmptyCertified && step.k <= n_plus_1 {
            return Verdict::Precompact {
                certified_step: step.k,
            };
        }
    }
    if let Some(w) = witness {
        if w.tangency_certified && w.jacobian_rank >= 1 {
            return Verdict::NotPrecompact { witness: w.clone() };
        }
    }
    let reason = if report.stabilized_at.is_some() {
        "chain stabilized nonempty but no certified submanifold witness".to_string()
    } else if report
        .steps
        .iter()
        .any(|s| s.status == EmptinessStatus::Unknown)
    {
        "real emptiness undecided".to_string()
    } else {
        "chain did not stabilize within the n+1 bound".to_string()
    };
    Verdict::Unknown { reason }
}

/// Full pipeline: run the chain, look for a witness when it ends
/// nonempty, and issue the verdict.
pub fn analyze(
    sys: &FieldSystem,
    s: usize,
    bx: &SearchBox,
    budget: usize,
) -> Result<(ChainReport, Option<SubmanifoldWitness>, Verdict)> {
    let report = run_chain(sys, s, bx, budget)?;
    let last_empty = report
        .steps
        .last()
        .map(|st| st.status == EmptinessStatus::EmptyCertified)
        .unwrap_or(false);
    let witness = if last_empty {
        None
    } else {
        let stable = &report.steps.last().unwrap().ideal;
        verify_witness(stable, sys, bx, budget)?
    };
    let v = verdict(&report, witness.as_ref());
    Ok((report, witness, v))
}

/// Result of the Amano-condition comparison.
#[derive(Debug, Clone)]
pub struct AmanoReport {
    /// `Some(true)`: no degeneration point annihilates all iterated
    /// derivatives of Phi. `Some(false)`: witnessed failure. `None`:
    /// undecided.
    pub holds: Option<bool>,
    pub comparison: String,
}

/// Test Amano's iterated-derivative cover of the degeneration locus and
/// compare with the characteristic chain at sampled points.
pub fn amano_check(
    sys: &FieldSystem,
    phi: &Poly,
    ys: &[crate::field::PolyVectorField],
    s: usize,
    bx: &SearchBox,
    budget: usize,
) -> Result<AmanoReport> {
    if ys.is_empty() {
        return Err(Error::Config("amano_check requires at least one Y field".into()));
    }
    let deg = degeneration_ideal(sys, s, DEFAULT_MAX_COLUMNS)?;

    // iterated derivatives Y_k ... Y_1 Phi
    let mut derivs = Vec::with_capacity(ys.len());
    let mut cur = phi.clone();
    for y in ys {
        cur = apply_field(y, &cur)?;
        derivs.push(cur.clone());
    }

    let mut gens: Vec<Poly> = deg.generators().to_vec();
    gens.push(phi.clone());
    gens.extend(derivs.iter().cloned());
    let mut annihilator = Ideal::new(sys.dim(), gens);
    let status = real_emptiness_status(&mut annihilator, bx, budget);
    let holds = match &status {
        EmptinessStatus::EmptyCertified => Some(true),
        EmptinessStatus::NonEmptyWitness { .. } => Some(false),
        EmptinessStatus::Unknown => None,
    };

    // inclusion Z_k subset of {Y_i...Y_1 Phi = 0, i <= k} at sampled
    // chain points
    let chain = run_chain(sys, s, bx, budget)?;
    let mut lines = Vec::new();
    for step in &chain.steps {
        if step.k == 0 || step.k > derivs.len() {
            continue;
        }
        for p in &step.samples {
            let ok = derivs[..step.k]
                .iter()
                .all(|d| d.eval_f64(p).abs() < bx.tol_witness.sqrt());
            lines.push(format!(
                "step {}: sample {:?} satisfies iterated-derivative vanishing: {}",
                step.k, p, ok
            ));
        }
    }
    if lines.is_empty() {
        lines.push("no nonempty sampled chain steps to compare".to_string());
    }
    Ok(AmanoReport {
        holds,
        comparison: lines.join("\n"),
    })
}
