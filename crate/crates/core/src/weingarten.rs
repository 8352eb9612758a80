//! Exact first- and second-order Haar moments via the Weingarten function,
//! plus an independent Monte Carlo oracle for the same quantities.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::haar::{sample_haar_unitary, SeededRng};
use crate::matrix::Operator;
use crate::report::{sig17, Verdict};
use crate::stats::complex_mean_stderr;

/// Permutation of {0, .., n-1} stored by images.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self { images: (0..n).collect() }
    }

    /// Full cycle (0 1 ... n-1).
    pub fn full_cycle(n: usize) -> Self {
        Self { images: (0..n).map(|i| (i + 1) % n).collect() }
    }

    pub fn from_images(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &img in &images {
            if img >= n || seen[img] {
                return Err(Error::Parameter("images do not form a permutation".into()));
            }
            seen[img] = true;
        }
        Ok(Self { images })
    }

    /// The transposition (a b) on n points.
    pub fn transposition(n: usize, a: usize, b: usize) -> Self {
        let mut images: Vec<usize> = (0..n).collect();
        images.swap(a, b);
        Self { images }
    }

    pub fn size(&self) -> usize {
        self.images.len()
    }

    pub fn apply(&self, i: usize) -> usize {
        self.images[i]
    }

    /// (self o other)(i) = self(other(i)).
    pub fn compose(&self, other: &Self) -> Self {
        assert_eq!(self.size(), other.size(), "permutation size mismatch");
        Self { images: other.images.iter().map(|&i| self.images[i]).collect() }
    }

    pub fn inverse(&self) -> Self {
        let mut images = vec![0; self.size()];
        for (i, &img) in self.images.iter().enumerate() {
            images[img] = i;
        }
        Self { images }
    }

    /// Disjoint cycles covering {0, .., n-1}, each starting at its smallest
    /// element, in traversal order.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let n = self.size();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut cycle = vec![start];
            seen[start] = true;
            let mut cur = self.images[start];
            while cur != start {
                seen[cur] = true;
                cycle.push(cur);
                cur = self.images[cur];
            }
            out.push(cycle);
        }
        out
    }
}

/// Weingarten function for n <= 2, evaluated as an exact rational in f64.
///
/// Values: Wg((1), d) = 1/d, Wg((1)(2), d) = 1/(d^2 - 1),
/// Wg((12), d) = -1/(d (d^2 - 1)).
pub fn wg(pi: &Permutation, d: usize) -> Result<f64> {
    let n = pi.size();
    if n == 0 || n > 2 {
        return Err(Error::UnsupportedOrder(n));
    }
    if d == 0 {
        return Err(Error::Parameter("dimension must be positive".into()));
    }
    match n {
        1 => Ok(1.0 / d as f64),
        2 => {
            if d == 1 {
                return Err(Error::WeingartenPole);
            }
            let df = d as f64;
            let denom = df * df - 1.0;
            if pi.cycles().len() == 2 {
                Ok(1.0 / denom)
            } else {
                Ok(-1.0 / (df * denom))
            }
        }
        _ => unreachable!(),
    }
}

/// Tr_sigma(M_1, .., M_n) = prod over cycles of the trace of the cyclic
/// product of the matrices visited by the cycle.
pub fn permuted_trace(sigma: &Permutation, ops: &[Operator]) -> Result<Complex64> {
    if sigma.size() != ops.len() {
        return Err(Error::Dimension(format!(
            "permutation on {} points but {} operators",
            sigma.size(),
            ops.len()
        )));
    }
    let d = ops.first().map(|m| m.rows()).unwrap_or(0);
    for m in ops {
        if !m.is_square() || m.rows() != d {
            return Err(Error::Dimension("operators must be square and same size".into()));
        }
    }
    let mut result = Complex64::new(1.0, 0.0);
    for cycle in sigma.cycles() {
        let mut prod = ops[cycle[0]].clone();
        for &i in &cycle[1..] {
            prod = prod.mul(&ops[i]);
        }
        result *= prod.trace();
    }
    Ok(result)
}

fn symmetric_group(n: usize) -> Vec<Permutation> {
    match n {
        1 => vec![Permutation::identity(1)],
        2 => vec![Permutation::identity(2), Permutation::transposition(2, 0, 1)],
        _ => Vec::new(),
    }
}

/// Closed form for E Tr(U B_1 U^dag A_1 ... U B_n U^dag A_n) over Haar U:
///
///   sum over alpha, beta in S_n of
///     Wg(beta alpha^{-1}, d) Tr_{beta^{-1}}(B..) Tr_{alpha gamma_n}(A..)
///
/// with gamma_n the full cycle. Supported for n in {1, 2}.
pub fn haar_moment_closed_form(
    a_ops: &[Operator],
    b_ops: &[Operator],
    d: usize,
) -> Result<Complex64> {
    let n = a_ops.len();
    if n != b_ops.len() {
        return Err(Error::Dimension("need equally many A and B operators".into()));
    }
    if n == 0 || n > 2 {
        return Err(Error::UnsupportedOrder(n));
    }
    for m in a_ops.iter().chain(b_ops) {
        if !m.is_square() || m.rows() != d {
            return Err(Error::Dimension(format!("operators must be {d}x{d}")));
        }
    }
    let gamma = Permutation::full_cycle(n);
    let group = symmetric_group(n);
    let mut acc = Complex64::new(0.0, 0.0);
    for alpha in &group {
        for beta in &group {
            let weight = wg(&beta.compose(&alpha.inverse()), d)?;
            let tb = permuted_trace(&beta.inverse(), b_ops)?;
            let ta = permuted_trace(&alpha.compose(&gamma), a_ops)?;
            acc += tb * ta * weight;
        }
    }
    Ok(acc)
}

/// Unbiased Monte Carlo estimate of the same moment, with standard error.
/// Sample i draws its unitary from substream i, so the estimate is
/// independent of the parallel schedule.
pub fn mc_haar_moment(
    a_ops: &[Operator],
    b_ops: &[Operator],
    d: usize,
    samples: usize,
    rng: &SeededRng,
) -> Result<(Complex64, f64)> {
    let n = a_ops.len();
    if n != b_ops.len() || n == 0 {
        return Err(Error::Dimension("need equally many A and B operators".into()));
    }
    if samples == 0 {
        return Err(Error::Parameter("need at least one sample".into()));
    }
    for m in a_ops.iter().chain(b_ops) {
        if !m.is_square() || m.rows() != d {
            return Err(Error::Dimension(format!("operators must be {d}x{d}")));
        }
    }
    let values: Vec<Complex64> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let u = sample_haar_unitary(d, &rng.substream(i)).expect("d >= 1");
            let udag = u.adjoint();
            let mut prod = Operator::identity(&[d]);
            for (a, b) in a_ops.iter().zip(b_ops) {
                prod = prod.mul(&u).mul(b).mul(&udag).mul(a);
            }
            prod.trace()
        })
        .collect();
    Ok(complex_mean_stderr(&values))
}

/// One row of the self-test battery: a named moment, its closed form, and
/// the Monte Carlo estimate.
#[derive(Clone, Debug)]
pub struct WgCheckRow {
    pub case: String,
    pub closed_form: Complex64,
    pub estimate: Complex64,
    pub stderr: f64,
    pub z_score: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug)]
pub struct WgCheckReport {
    pub d: usize,
    pub samples: usize,
    pub seed: u64,
    pub rows: Vec<WgCheckRow>,
}

impl WgCheckReport {
    pub fn verdict(&self) -> Verdict {
        Verdict::from_bool(self.rows.iter().all(|r| r.verdict.passed()))
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "# weingarten-check d={} samples={} seed={}\n",
            self.d, self.samples, self.seed
        );
        s.push_str(
            "case,closed_form_re,closed_form_im,estimate_re,estimate_im,stderr,z_score,verdict\n",
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.case,
                sig17(r.closed_form.re),
                sig17(r.closed_form.im),
                sig17(r.estimate.re),
                sig17(r.estimate.im),
                sig17(r.stderr),
                sig17(r.z_score),
                r.verdict
            ));
        }
        s
    }
}

fn check_row(
    case: &str,
    a_ops: &[Operator],
    b_ops: &[Operator],
    d: usize,
    samples: usize,
    rng: &SeededRng,
) -> Result<WgCheckRow> {
    let closed = haar_moment_closed_form(a_ops, b_ops, d)?;
    let (estimate, stderr) = mc_haar_moment(a_ops, b_ops, d, samples, rng)?;
    let dev = (estimate - closed).norm();
    let z_score = if stderr > 0.0 {
        dev / stderr
    } else if dev <= 1e-12 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(WgCheckRow {
        case: case.to_string(),
        closed_form: closed,
        estimate,
        stderr,
        z_score,
        verdict: Verdict::from_bool(z_score <= 4.0),
    })
}

/// Battery of first- and second-moment checks at dimension d, comparing the
/// closed form against seeded Monte Carlo. Each case uses its own substream
/// namespace.
pub fn weingarten_check(d: usize, samples: usize, seed: u64) -> Result<WgCheckReport> {
    if d < 2 {
        return Err(Error::Parameter("check battery needs d >= 2".into()));
    }
    let base = SeededRng::new(seed);
    let ident = Operator::identity(&[d]);
    let herm = |idx: u64| {
        let g = crate::haar::sample_ginibre(d, d, &base.substream(1_000_000 + idx));
        g.add(&g.adjoint()).scale(Complex64::new(0.5, 0.0))
    };
    let h1 = herm(0);
    let h2 = herm(1);
    let mut proj0 = Operator::zeros(&[d], &[d]);
    proj0.set(0, 0, Complex64::new(1.0, 0.0));

    let rows = vec![
        check_row(
            "n1_identity",
            std::slice::from_ref(&ident),
            std::slice::from_ref(&ident),
            d,
            samples,
            &base.substream(1),
        )?,
        check_row(
            "n1_random_hermitian",
            std::slice::from_ref(&h1),
            std::slice::from_ref(&h2),
            d,
            samples,
            &base.substream(2),
        )?,
        check_row(
            "n2_identity",
            &[ident.clone(), ident.clone()],
            &[ident.clone(), ident],
            d,
            samples,
            &base.substream(3),
        )?,
        check_row(
            "n2_random_hermitian",
            &[h1.clone(), h2.clone()],
            &[h2, h1],
            d,
            samples,
            &base.substream(4),
        )?,
        // E |U_00|^4 = 2 / (d (d + 1)).
        check_row(
            "n2_entry_fourth_power",
            &[proj0.clone(), proj0.clone()],
            &[proj0.clone(), proj0],
            d,
            samples,
            &base.substream(5),
        )?,
    ];
    Ok(WgCheckReport { d, samples, seed, rows })
}
