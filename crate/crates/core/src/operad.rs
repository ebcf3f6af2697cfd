//! Partial and total composition in the endomorphism operad, the
//! Gerstenhaber bracket, and residual checkers for the operad axioms.
//!
//! Signs follow the graded convention
//! `f ∘_i g = (−1)^{i|g|} f ∘ (1^{⊗i} ⊗ g ⊗ 1^{⊗(|f|−i)})`, where `|f|` is the
//! reduced degree `arity − 1`. Slot indices are zero-based.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multilinear::{Operation, Vector};
use crate::rng::{trial_seed, SeededRng};

fn sign(exponent: usize) -> f64 {
    if exponent.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `f ∘_i g`: `g` inserted into input slot `i` of `f`, with sign `(−1)^{i|g|}`.
pub fn partial_compose(f: &Operation, g: &Operation, i: usize) -> Result<Operation> {
    f.check_same_dim(g)?;
    let m = f.arity();
    let n = g.arity();
    if i >= m {
        return Err(Error::Index {
            index: i,
            max: f.reduced_degree(),
        });
    }
    let d = f.dim();
    let arity = m + n - 1;
    let pow = |k: usize| d.pow(k as u32);
    let prefix_len = pow(i + 1); // [out, j_0 .. j_{i-1}]
    let middle_len = pow(n); //     [j_i .. j_{i+n-1}]
    let suffix_len = pow(m - 1 - i);
    let s_sign = sign(i * g.reduced_degree());

    let fc = f.coeffs();
    let gc = g.coeffs();
    let mut out = vec![0.0; pow(arity + 1)];
    for prefix in 0..prefix_len {
        for middle in 0..middle_len {
            let row = (prefix * middle_len + middle) * suffix_len;
            for s in 0..d {
                let gv = gc[s * middle_len + middle];
                if gv == 0.0 {
                    continue;
                }
                let f_row = (prefix * d + s) * suffix_len;
                for suffix in 0..suffix_len {
                    out[row + suffix] += fc[f_row + suffix] * gv;
                }
            }
        }
    }
    if s_sign < 0.0 {
        out.iter_mut().for_each(|x| *x = -*x);
    }
    Operation::new(d, arity, out)
}

/// `f • g = Σ_{i=0}^{|f|} f ∘_i g`.
pub fn total_compose(f: &Operation, g: &Operation) -> Result<Operation> {
    let mut acc = partial_compose(f, g, 0)?;
    for i in 1..f.arity() {
        acc = Operation::linear_combine(1.0, &acc, 1.0, &partial_compose(f, g, i)?)?;
    }
    Ok(acc)
}

/// `[f, g] = f • g − (−1)^{|f||g|} g • f`.
pub fn gerstenhaber_bracket(f: &Operation, g: &Operation) -> Result<Operation> {
    let fg = total_compose(f, g)?;
    let gf = total_compose(g, f)?;
    Operation::linear_combine(
        1.0,
        &fg,
        -sign(f.reduced_degree() * g.reduced_degree()),
        &gf,
    )
}

/// Outcome of one law check, or of a suite of them merged together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawReport {
    #[serde(rename = "law")]
    pub law_name: String,
    pub trials: usize,
    pub max_abs_residual: f64,
    pub pass: bool,
    #[serde(rename = "seed")]
    pub worst_case_seed: u64,
}

impl LawReport {
    pub fn new(law: &str, trials: usize, residual: f64, tol: f64, seed: u64) -> Self {
        Self {
            law_name: law.to_string(),
            trials: trials.max(1),
            max_abs_residual: residual,
            pass: residual <= tol,
            worst_case_seed: seed,
        }
    }

    /// Folds `other` into `self`: trial counts add, the worst residual and
    /// its seed are kept, and pass becomes the conjunction.
    pub fn absorb(&mut self, other: &LawReport) {
        self.trials += other.trials;
        if other.max_abs_residual > self.max_abs_residual || other.max_abs_residual.is_nan() {
            self.max_abs_residual = other.max_abs_residual;
            self.worst_case_seed = other.worst_case_seed;
        }
        self.pass &= other.pass;
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.worst_case_seed = seed;
        self
    }
}

/// Residual of the three-case composition relations
/// `(h ∘_i f) ∘_j g = …` over every admissible `(i, j)`.
pub fn check_composition_relations(
    h: &Operation,
    f: &Operation,
    g: &Operation,
    tol: f64,
) -> Result<LawReport> {
    let rh = h.reduced_degree();
    let rf = f.reduced_degree();
    let rg = g.reduced_degree();
    let swap = sign(rf * rg);
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    for i in 0..=rh {
        let hf = partial_compose(h, f, i)?;
        // j < i
        for j in 0..i {
            let lhs = partial_compose(&hf, g, j)?;
            let rhs = partial_compose(&partial_compose(h, g, j)?, f, i + rg)?.scale(swap);
            worst = worst.max(lhs.max_abs_diff(&rhs)?);
            pairs += 1;
        }
        // i ≤ j ≤ i + |f|
        for j in i..=i + rf {
            let lhs = partial_compose(&hf, g, j)?;
            let rhs = partial_compose(h, &partial_compose(f, g, j - i)?, i)?;
            worst = worst.max(lhs.max_abs_diff(&rhs)?);
            pairs += 1;
        }
        // i + deg f ≤ j ≤ |h| + |f|
        for j in (i + f.arity())..=(rh + rf) {
            let lhs = partial_compose(&hf, g, j)?;
            let rhs = partial_compose(&partial_compose(h, g, j - rf)?, f, i)?.scale(swap);
            worst = worst.max(lhs.max_abs_diff(&rhs)?);
            pairs += 1;
        }
    }
    Ok(LawReport::new("composition-relations", pairs, worst, tol, 0))
}

/// Residual of the graded Jacobi identity
/// `(−1)^{|f||h|}[[f,g],h] + (−1)^{|g||f|}[[g,h],f] + (−1)^{|h||g|}[[h,f],g]`.
pub fn check_graded_jacobi(
    f: &Operation,
    g: &Operation,
    h: &Operation,
    tol: f64,
) -> Result<LawReport> {
    let (rf, rg, rh) = (f.reduced_degree(), g.reduced_degree(), h.reduced_degree());
    let t1 = gerstenhaber_bracket(&gerstenhaber_bracket(f, g)?, h)?;
    let t2 = gerstenhaber_bracket(&gerstenhaber_bracket(g, h)?, f)?;
    let t3 = gerstenhaber_bracket(&gerstenhaber_bracket(h, f)?, g)?;
    let sum = Operation::linear_combine(sign(rf * rh), &t1, sign(rg * rf), &t2)?;
    let sum = Operation::linear_combine(1.0, &sum, sign(rh * rg), &t3)?;
    Ok(LawReport::new("graded-jacobi", 1, sum.max_abs(), tol, 0))
}

/// `𝕀 ∘_0 f = f` and `f ∘_i 𝕀 = f` for every slot.
pub fn check_unit_laws(f: &Operation, tol: f64) -> Result<LawReport> {
    let unit = Operation::identity(f.dim())?;
    let mut worst = partial_compose(&unit, f, 0)?.max_abs_diff(f)?;
    for i in 0..f.arity() {
        worst = worst.max(partial_compose(f, &unit, i)?.max_abs_diff(f)?);
    }
    Ok(LawReport::new("unit-laws", f.arity() + 1, worst, tol, 0))
}

/// `[f, g] + (−1)^{|f||g|} [g, f] = 0`.
pub fn check_antisymmetry(f: &Operation, g: &Operation, tol: f64) -> Result<LawReport> {
    let fg = gerstenhaber_bracket(f, g)?;
    let gf = gerstenhaber_bracket(g, f)?;
    let sum = Operation::linear_combine(
        1.0,
        &fg,
        sign(f.reduced_degree() * g.reduced_degree()),
        &gf,
    )?;
    Ok(LawReport::new("antisymmetry", 1, sum.max_abs(), tol, 0))
}

/// Compares the coefficient-level `f ∘_i g` against direct evaluation of `f`
/// with `g` applied to the `i`-th block of arguments, on random inputs.
pub fn check_compose_evaluate_consistency(
    f: &Operation,
    g: &Operation,
    i: usize,
    trials: usize,
    tol: f64,
    seed: u64,
) -> Result<LawReport> {
    let composed = partial_compose(f, g, i)?;
    let n = g.arity();
    let s = sign(i * g.reduced_degree());
    let mut rng = SeededRng::new(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials.max(1) {
        let args: Vec<Vector> = (0..composed.arity()).map(|_| rng.vector(f.dim())).collect();
        let lhs = composed.evaluate(&args)?;
        let inner = g.evaluate(&args[i..i + n])?;
        let mut outer_args = args[..i].to_vec();
        outer_args.push(inner);
        outer_args.extend_from_slice(&args[i + n..]);
        let rhs = f.evaluate(&outer_args)?;
        let diff = Vector::axpby(1.0, &lhs, -s, &rhs)?;
        worst = diff.entries().iter().fold(worst, |m, x| m.max(x.abs()));
    }
    Ok(LawReport::new("compose-evaluate", trials.max(1), worst, tol, seed))
}

/// Runs every operad law on `trials` seeded random triples with dims 1–3,
/// arities 1–3 and coefficients uniform in `[−1, 1)`. Reports come back sorted
/// by law name; each carries the seed of its worst trial.
pub fn run_law_suite(trials: usize, seed: u64, tol: f64) -> Result<Vec<LawReport>> {
    let mut merged: Vec<LawReport> = Vec::new();
    let mut push = |report: LawReport| match merged.iter_mut().find(|r| r.law_name == report.law_name) {
        Some(existing) => existing.absorb(&report),
        None => merged.push(report),
    };
    for t in 0..trials.max(1) {
        let s = trial_seed(seed, t);
        let mut rng = SeededRng::new(s);
        let dim = rng.int_inclusive(1, 3);
        let (ah, af, ag) = (
            rng.int_inclusive(1, 3),
            rng.int_inclusive(1, 3),
            rng.int_inclusive(1, 3),
        );
        let h = rng.operation(dim, ah);
        let f = rng.operation(dim, af);
        let g = rng.operation(dim, ag);
        let slot = rng.int_inclusive(0, af - 1);

        push(check_composition_relations(&h, &f, &g, tol)?.with_seed(s));
        push(check_graded_jacobi(&f, &g, &h, tol)?.with_seed(s));
        let mut units = check_unit_laws(&h, tol)?;
        units.absorb(&check_unit_laws(&f, tol)?);
        units.absorb(&check_unit_laws(&g, tol)?);
        push(units.with_seed(s));
        let mut anti = check_antisymmetry(&f, &g, tol)?;
        anti.absorb(&check_antisymmetry(&g, &h, tol)?);
        anti.absorb(&check_antisymmetry(&h, &f, tol)?);
        push(anti.with_seed(s));
        push(check_compose_evaluate_consistency(&f, &g, slot, 5, tol, s)?);
    }
    merged.sort_by(|a, b| a.law_name.cmp(&b.law_name));
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(arity: usize, c: f64) -> Operation {
        Operation::new(1, arity, vec![c]).unwrap()
    }

    fn only(dim: usize, arity: usize, index: &[usize]) -> Operation {
        Operation::from_fn(dim, arity, |idx| if idx == index { 1.0 } else { 0.0 }).unwrap()
    }

    #[test]
    fn scalar_composition_signs() {
        let f = scalar(2, 2.0);
        let g = scalar(2, 3.0);
        let c0 = partial_compose(&f, &g, 0).unwrap();
        let c1 = partial_compose(&f, &g, 1).unwrap();
        assert_eq!((c0.arity(), c0.coeffs()), (3, &[6.0][..]));
        assert_eq!(c1.coeffs(), &[-6.0]);
        assert_eq!(total_compose(&f, &g).unwrap().coeffs(), &[0.0]);
    }

    #[test]
    fn slot_out_of_range() {
        let f = scalar(2, 1.0);
        assert_eq!(
            partial_compose(&f, &f, 2),
            Err(Error::Index { index: 2, max: 1 })
        );
        let g = Operation::zeros(2, 1).unwrap();
        assert!(matches!(partial_compose(&f, &g, 0), Err(Error::Dimension(_))));
    }

    #[test]
    fn arity_one_is_matrix_product() {
        let f = Operation::from_matrix(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let g = Operation::from_matrix(&[vec![0.5, -1.0], vec![2.0, 0.0]]).unwrap();
        // F·G by hand
        let expected = [1.0 * 0.5 + 2.0 * 2.0, -1.0, 3.0 * 0.5 + 4.0 * 2.0, -3.0];
        assert_eq!(partial_compose(&f, &g, 0).unwrap().coeffs(), &expected);
        assert_eq!(total_compose(&f, &g).unwrap().coeffs(), &expected);
    }

    #[test]
    fn unit_composition() {
        let mut rng = SeededRng::new(3);
        let f = rng.operation(2, 2);
        let unit = Operation::identity(2).unwrap();
        assert_eq!(partial_compose(&unit, &f, 0).unwrap(), f);
        // f • 𝕀 = deg(f)·f
        let twice = total_compose(&f, &unit).unwrap();
        assert_eq!(twice.max_abs_diff(&f.scale(2.0)).unwrap(), 0.0);
    }

    #[test]
    fn matrix_commutator() {
        let f = Operation::from_matrix(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let g = Operation::from_matrix(&[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let b = gerstenhaber_bracket(&f, &g).unwrap();
        assert_eq!(b.coeffs(), &[1.0, 0.0, 0.0, -1.0]);
    }

    #[test]
    fn bracket_with_unit_is_reduced_degree_multiple() {
        let mut rng = SeededRng::new(11);
        for arity in 1..=3 {
            let f = rng.operation(2, arity);
            let unit = Operation::identity(2).unwrap();
            let b = gerstenhaber_bracket(&f, &unit).unwrap();
            let expected = f.scale(f.reduced_degree() as f64);
            assert!(b.max_abs_diff(&expected).unwrap() < 1e-15);
        }
    }

    #[test]
    fn bracket_of_oscillator_m_with_basis_mu() {
        let m = Operation::from_matrix(&[vec![0.0, -0.5], vec![0.5, 0.0]]).unwrap();
        let mu = only(2, 2, &[0, 0, 0]);
        let b = gerstenhaber_bracket(&m, &mu).unwrap();
        let mut expected = [0.0; 8];
        expected[4] = 0.5; // mu^2_11
        expected[1] = 0.5; // mu^1_12
        expected[2] = 0.5; // mu^1_21
        assert_eq!(b.coeffs(), &expected);
    }

    #[test]
    fn composition_relations_random_binary() {
        let mut rng = SeededRng::new(5);
        let (h, f, g) = (rng.operation(2, 2), rng.operation(2, 2), rng.operation(2, 2));
        let r = check_composition_relations(&h, &f, &g, 1e-10).unwrap();
        assert!(r.pass, "{r:?}");
        // i ranges over 0..=1 and j over 0..=2 for each i
        assert_eq!(r.trials, 6);
    }

    #[test]
    fn composition_relations_identity_and_matrices() {
        let unit = Operation::identity(2).unwrap();
        let r = check_composition_relations(&unit, &unit, &unit, 1e-10).unwrap();
        assert_eq!(r.max_abs_residual, 0.0);

        let mut rng = SeededRng::new(6);
        let (h, f, g) = (rng.operation(3, 1), rng.operation(3, 1), rng.operation(3, 1));
        let r = check_composition_relations(&h, &f, &g, 1e-13).unwrap();
        assert!(r.max_abs_residual <= 1e-13);
        // matrix associativity as an independent oracle
        let hf = partial_compose(&h, &f, 0).unwrap();
        let left = partial_compose(&hf, &g, 0).unwrap();
        let mut by_hand = [0.0; 9];
        for a in 0..3 {
            for c in 0..3 {
                for x in 0..3 {
                    for y in 0..3 {
                        by_hand[a * 3 + c] += h.get(&[a, x]) * f.get(&[x, y]) * g.get(&[y, c]);
                    }
                }
            }
        }
        for (u, v) in left.coeffs().iter().zip(by_hand) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn jacobi_examples() {
        let unit = Operation::identity(2).unwrap();
        assert_eq!(
            check_graded_jacobi(&unit, &unit, &unit, 1e-10).unwrap().max_abs_residual,
            0.0
        );
        let mut rng = SeededRng::new(8);
        let r = check_graded_jacobi(
            &rng.operation(2, 2),
            &rng.operation(2, 2),
            &rng.operation(2, 2),
            1e-10,
        )
        .unwrap();
        assert!(r.pass, "{r:?}");
        let r = check_graded_jacobi(
            &rng.operation(2, 1),
            &rng.operation(2, 2),
            &rng.operation(2, 3),
            1e-10,
        )
        .unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn unit_laws_are_exact() {
        let unit = Operation::identity(2).unwrap();
        assert_eq!(check_unit_laws(&unit, 1e-12).unwrap().max_abs_residual, 0.0);
        let mut rng = SeededRng::new(9);
        assert_eq!(check_unit_laws(&rng.operation(3, 2), 1e-12).unwrap().max_abs_residual, 0.0);
        assert_eq!(check_unit_laws(&rng.operation(2, 3), 1e-12).unwrap().max_abs_residual, 0.0);
    }

    #[test]
    fn compose_evaluate_examples() {
        let mut rng = SeededRng::new(10);
        let (f, g) = (rng.operation(2, 2), rng.operation(2, 2));
        let r = check_compose_evaluate_consistency(&f, &g, 1, 50, 1e-12, 1).unwrap();
        assert!(r.pass, "{r:?}");

        let unit = Operation::identity(2).unwrap();
        let r = check_compose_evaluate_consistency(&f, &unit, 0, 10, 1e-12, 2).unwrap();
        assert_eq!(r.max_abs_residual, 0.0);

        // dim 1, f = [2], g = [3], i = 0 at (1,1,1): both sides are 6
        let (f, g) = (scalar(2, 2.0), scalar(2, 3.0));
        let c = partial_compose(&f, &g, 0).unwrap();
        let one = Vector::new(vec![1.0]).unwrap();
        let lhs = c.evaluate(&[one.clone(), one.clone(), one.clone()]).unwrap();
        let inner = g.evaluate(&[one.clone(), one.clone()]).unwrap();
        let rhs = f.evaluate(&[inner, one]).unwrap();
        assert_eq!(lhs.entries(), &[6.0]);
        assert_eq!(rhs.entries(), &[6.0]);
    }

    #[test]
    fn suite_is_sorted_and_passes() {
        let reports = run_law_suite(10, 42, 1e-10).unwrap();
        let names: Vec<_> = reports.iter().map(|r| r.law_name.as_str()).collect();
        assert_eq!(
            names,
            [
                "antisymmetry",
                "compose-evaluate",
                "composition-relations",
                "graded-jacobi",
                "unit-laws"
            ]
        );
        assert!(reports.iter().all(|r| r.pass), "{reports:?}");
    }

    #[test]
    fn report_json_keys() {
        let r = LawReport::new("unit-laws", 3, 0.0, 1e-12, 7);
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["law", "max_abs_residual", "pass", "seed", "trials"]);
    }
}
