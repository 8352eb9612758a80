//! Monte Carlo verification of the moment identities and bounds behind the
//! ensemble separation argument: the cross-block and symmetrized-difference
//! operators, their second and fourth Haar moments, the Hoelder chain for
//! the first moment, the Lipschitz constant of the Choi distance, and the
//! concentration tail.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{choi_trace_distance, maximally_entangled_vector, stinespring_to_kraus, Isometry};
use crate::decomp::hermitian_eig;
use crate::ensembles::{Case, Construction, EnsembleParams};
use crate::error::{Error, Result};
use crate::haar::{sample_haar_unitary, sample_unit_hermitian, SeededRng};
use crate::matrix::{pair_two_norm, Operator};
use crate::report::{sig17, Verdict};
use crate::stats::{binomial_stderr, mean_stderr};
use crate::weingarten::{wg, Permutation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Equals,
    AtLeast,
    AtMost,
}

impl Relation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Relation::Equals => "equals",
            Relation::AtLeast => "at_least",
            Relation::AtMost => "at_most",
        }
    }
}

/// One verified quantity: the estimate, its target, and the 4-sigma verdict.
#[derive(Clone, Debug)]
pub struct MomentReport {
    pub quantity: String,
    pub estimate: f64,
    pub stderr: f64,
    pub target: f64,
    pub relation: Relation,
    pub samples: usize,
    pub seed: u64,
    pub formula: String,
    pub verdict: Verdict,
}

impl MomentReport {
    #[allow(clippy::too_many_arguments)]
    fn judge(
        quantity: &str,
        estimate: f64,
        stderr: f64,
        target: f64,
        relation: Relation,
        samples: usize,
        seed: u64,
        formula: &str,
    ) -> Self {
        let slack = 4.0 * stderr;
        let ok = match relation {
            Relation::Equals => (estimate - target).abs() <= slack,
            Relation::AtLeast => estimate >= target - slack,
            Relation::AtMost => estimate <= target + slack,
        };
        MomentReport {
            quantity: quantity.to_string(),
            estimate,
            stderr,
            target,
            relation,
            samples,
            seed,
            formula: formula.to_string(),
            verdict: Verdict::from_bool(ok),
        }
    }
}

pub fn reports_to_csv(comment: &str, reports: &[MomentReport]) -> String {
    let mut s = String::new();
    if !comment.is_empty() {
        s.push_str(&format!("# {comment}\n"));
    }
    s.push_str("quantity,estimate,stderr,target,relation,tolerance,samples,seed,verdict,formula\n");
    for r in reports {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.quantity,
            sig17(r.estimate),
            sig17(r.stderr),
            sig17(r.target),
            r.relation.as_str(),
            sig17(4.0 * r.stderr),
            r.samples,
            r.seed,
            r.verdict,
            r.formula
        ));
    }
    s
}

/// Cross block C = Tr_E[(1 (x) V0) Psi (1 (x) (V1 - V2))^dag] on A' (x) B:
/// the off-diagonal flag block of the Choi difference of two tilted
/// channels sharing the reference dilation. Zero when U1 = U2.
pub fn cross_block(
    v0: &Isometry,
    u1: &Operator,
    u2: &Operator,
    s: &Operator,
) -> Result<Operator> {
    let d_a = v0.input_dim();
    let d_b = v0.output_dim();
    let r = v0.env_dim();
    if u1.rows() != r * d_b || u2.rows() != r * d_b || s.rows() != r * d_b || s.cols() != d_a {
        return Err(Error::Dimension("cross block shapes disagree".into()));
    }
    let k0 = stinespring_to_kraus(v0);
    let rot1 = u1.mul(s).with_row_dims(&[r, d_b])?;
    let rot2 = u2.mul(s).with_row_dims(&[r, d_b])?;
    let amp = 1.0 / d_a as f64;
    let mut c = Operator::zeros(&[d_a, d_b], &[d_a, d_b]);
    for i in 0..r {
        // Environment-index blocks of the three dilations.
        let mut acc = vec![Complex64::new(0.0, 0.0); d_a * d_b];
        let mut diff = vec![Complex64::new(0.0, 0.0); d_a * d_b];
        for a in 0..d_a {
            for b in 0..d_b {
                acc[a * d_b + b] = k0.operators()[i][(b, a)];
                diff[a * d_b + b] = rot1[(i * d_b + b, a)] - rot2[(i * d_b + b, a)];
            }
        }
        for row in 0..d_a * d_b {
            if acc[row].norm_sqr() == 0.0 {
                continue;
            }
            for col in 0..d_a * d_b {
                let add = acc[row] * diff[col].conj() * amp;
                let cur = c[(row, col)];
                c.set(row, col, cur + add);
            }
        }
    }
    Ok(c)
}

/// Symmetrized first-order difference D = A1 + A1^dag - A2 - A2^dag with
/// A_z = Tr_E[(1 (x) U_z Obar U_z^dag) Psi], on A' (x) B. Hermitian by
/// construction and zero when U1 = U2.
pub fn sym_diff(
    u1: &Operator,
    u2: &Operator,
    offset_bar: &Operator,
    r: usize,
) -> Result<Operator> {
    let d_a = offset_bar.rows();
    if !offset_bar.is_square() || u1.rows() != d_a || u2.rows() != d_a {
        return Err(Error::Dimension("symmetrized difference shapes disagree".into()));
    }
    if !d_a.is_multiple_of(r) {
        return Err(Error::Dimension(format!("r = {r} does not divide d_A = {d_a}")));
    }
    let d_b = d_a / r;
    let psi = maximally_entangled_vector(d_a);
    let half = |u: &Operator| -> Result<Operator> {
        let m = u.mul(offset_bar).mul(&u.adjoint());
        // (1 (x) M)|Psi> has component M[b, a] / sqrt(d_A) at (a, b).
        let smeared = Operator::from_fn(&[d_a, d_a], &[1], |idx, _| {
            let (a, b) = (idx / d_a, idx % d_a);
            m[(b, a)] / (d_a as f64).sqrt()
        });
        let rank1 = smeared.mul(&psi.adjoint());
        rank1
            .with_row_dims(&[d_a, r, d_b])?
            .with_col_dims(&[d_a, r, d_b])?
            .partial_trace(&[0, 2])
    };
    let a1 = half(u1)?;
    let a2 = half(u2)?;
    Ok(a1.add(&a1.adjoint()).sub(&a2).sub(&a2.adjoint()))
}

fn require_case(params: &EnsembleParams, case: Case) -> Result<()> {
    params.validate()?;
    if params.case != case {
        return Err(Error::Regime(format!(
            "operation needs the {} construction",
            case.as_str()
        )));
    }
    Ok(())
}

struct CrossSamples {
    m1: Vec<f64>,
    m2: Vec<f64>,
    m4: Vec<f64>,
}

/// Draws (tr|C|, tr|C|^2, tr|C|^4) per independent unitary pair.
fn sample_cross_moments(
    params: &EnsembleParams,
    samples: usize,
    rng: &SeededRng,
) -> Result<CrossSamples> {
    require_case(params, Case::Tilted)?;
    if samples == 0 {
        return Err(Error::Parameter("need at least one sample".into()));
    }
    let construction = Construction::for_params(params)?;
    let (v0, s) = match &construction {
        Construction::Tilted { v0, s, .. } => (v0.clone(), s.clone()),
        _ => unreachable!(),
    };
    let dim = params.unitary_dim();
    let rows: Vec<(f64, f64, f64)> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let u1 = sample_haar_unitary(dim, &rng.substream(2 * i)).expect("dim >= 1");
            let u2 = sample_haar_unitary(dim, &rng.substream(2 * i + 1)).expect("dim >= 1");
            let c = cross_block(&v0, &u1, &u2, &s).expect("shapes fixed");
            let m2 = c.frobenius_norm().powi(2);
            let gram = c.adjoint().mul(&c);
            let m4 = gram.frobenius_norm().powi(2);
            let m1 = c.trace_norm();
            (m1, m2, m4)
        })
        .collect();
    Ok(CrossSamples {
        m1: rows.iter().map(|r| r.0).collect(),
        m2: rows.iter().map(|r| r.1).collect(),
        m4: rows.iter().map(|r| r.2).collect(),
    })
}

/// E tr|C|^2 against its exact value 2/r.
pub fn cross_second_moment(
    params: &EnsembleParams,
    samples: usize,
    rng: &SeededRng,
) -> Result<MomentReport> {
    let draws = sample_cross_moments(params, samples, &rng.substream(0x6332))?;
    let (est, se) = mean_stderr(&draws.m2);
    Ok(MomentReport::judge(
        "cross_second_moment",
        est,
        se,
        2.0 / params.r as f64,
        Relation::Equals,
        samples,
        rng.seed(),
        "E tr|C|^2 = 2/r",
    ))
}

/// E tr|C|^4 against its upper bound 128/r^3.
pub fn cross_fourth_moment(
    params: &EnsembleParams,
    samples: usize,
    rng: &SeededRng,
) -> Result<MomentReport> {
    let draws = sample_cross_moments(params, samples, &rng.substream(0x6334))?;
    let (est, se) = mean_stderr(&draws.m4);
    let r = params.r as f64;
    Ok(MomentReport::judge(
        "cross_fourth_moment",
        est,
        se,
        128.0 / (r * r * r),
        Relation::AtMost,
        samples,
        rng.seed(),
        "E tr|C|^4 <= 128/r^3",
    ))
}

/// sqrt(m2^3 / m4): the Hoelder lower bound on (E tr|C|)^2 released as a
/// bound on E tr|C|.
pub fn holder_lower_bound(m2: f64, m4: f64) -> Result<f64> {
    if m2 <= 0.0 || m4 <= 0.0 {
        return Err(Error::Parameter("moments must be positive".into()));
    }
    Ok((m2 * m2 * m2 / m4).sqrt())
}

/// Two first-moment reports from one sampling pass: E tr|C| against the
/// Hoelder bound formed from the *sampled* m2 and m4, and against the
/// closed-form value 1/4 obtained from m2 = 2/r and m4 = 128/r^3.
pub fn cross_first_moment_reports(
    params: &EnsembleParams,
    samples: usize,
    rng: &SeededRng,
) -> Result<(MomentReport, MomentReport)> {
    let draws = sample_cross_moments(params, samples, &rng.substream(0x6331))?;
    let (m1, se1) = mean_stderr(&draws.m1);
    let (m2, se2) = mean_stderr(&draws.m2);
    let (m4, se4) = mean_stderr(&draws.m4);
    let bound = holder_lower_bound(m2, m4)?;
    // Delta-method spread of the sampled bound (covariances dropped, which
    // only widens the slack).
    let d2 = 1.5 * bound / m2;
    let d4 = 0.5 * bound / m4;
    let bound_se = ((d2 * se2).powi(2) + (d4 * se4).powi(2)).sqrt();
    let combined_se = (se1 * se1 + bound_se * bound_se).sqrt();
    let sampled = MomentReport::judge(
        "cross_first_moment_vs_sampled_holder",
        m1,
        combined_se,
        bound,
        Relation::AtLeast,
        samples,
        rng.seed(),
        "E tr|C| >= sqrt(m2^3/m4) from sampled moments",
    );
    let exact = MomentReport::judge(
        "cross_first_moment_vs_quarter",
        m1,
        se1,
        0.25,
        Relation::AtLeast,
        samples,
        rng.seed(),
        "E tr|C| >= sqrt((2/r)^3 / (128/r^3)) = 1/4",
    );
    Ok((sampled, exact))
}

/// E ||J_1 - J_2||_1 for tilted pairs against the explicit intermediate
/// bound 0.5 eps sqrt(1 - eps^2) - 2 eps^2.
pub fn tilted_first_moment(
    params: &EnsembleParams,
    samples: usize,
    rng: &SeededRng,
) -> Result<MomentReport> {
    require_case(params, Case::Tilted)?;
    if samples == 0 {
        return Err(Error::Parameter("need at least one sample".into()));
    }
    let construction = Construction::for_params(params)?;
    let dim = params.unitary_dim();
    let ns = rng.substream(0x7431);
    let values: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let u1 = sample_haar_unitary(dim, &ns.substream(2 * i)).expect("dim >= 1");
            let u2 = sample_haar_unitary(dim, &ns.substream(2 * i + 1)).expect("dim >= 1");
            let v1 = construction.isometry(&u1).expect("construction valid");
            let v2 = construction.isometry(&u2).expect("construction valid");
            choi_trace_distance(&v1, &v2).expect("same shape")
        })
        .collect();
    let (est, se) = mean_stderr(&values);
    let eps = params.eps;
    let target = 0.5 * eps * (1.0 - eps * eps).sqrt() - 2.0 * eps * eps;
    Ok(MomentReport::judge(
        "tilted_first_moment",
        est,
        se,
        target,
        Relation::AtLeast,
        samples,
        rng.seed(),
        "E||J1 - J2||_1 >= 0.5 eps sqrt(1-eps^2) - 2 eps^2",
    ))
}

struct SymDiffSamples {
    m2: Vec<f64>,
    m4: Vec<f64>,
}

fn sample_sym_diff_moments(
    params: &EnsembleParams,
    samples: usize,
    rng: &SeededRng,
) -> Result<SymDiffSamples> {
    require_case(params, Case::Equal)?;
    if samples == 0 {
        return Err(Error::Parameter("need at least one sample".into()));
    }
    let offset_bar = crate::ensembles::traceless_phase_offset(params.d_a, params.eps)?;
    let dim = params.unitary_dim();
    let r = params.r;
    let rows: Vec<(f64, f64)> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let u1 = sample_haar_unitary(dim, &rng.substream(2 * i)).expect("dim >= 1");
            let u2 = sample_haar_unitary(dim, &rng.substream(2 * i + 1)).expect("dim >= 1");
            let d = sym_diff(&u1, &u2, &offset_bar, r).expect("shapes fixed");
            let m2 = d.frobenius_norm().powi(2);
            let m4 = d.mul(&d).frobenius_norm().powi(2);
            (m2, m4)
        })
        .collect();
    Ok(SymDiffSamples {
        m2: rows.iter().map(|r| r.0).collect(),
        m4: rows.iter().map(|r| r.1).collect(),
    })
}

/// Exact two-term target for E tr|D|^2, evaluated through the Weingarten
/// table:
///
///   E tr|D|^2 = 4 Re E tr[A1 A1^dag] + 4 Re E tr[A1 A1]
///             = 4 tr[Obar^dag Obar]/(r d_A)
///               + 4 tr[Obar Obar] (Wg((12), d_A) r d_B^2 + Wg(e, d_A) r^2 d_B) / d_A^2.
///
/// For this construction tr[Obar Obar] = -tr[Obar^dag Obar] (the shifted
/// diagonal entries are purely imaginary), so the second term is negative.
pub fn sym_diff_second_moment_target(params: &EnsembleParams) -> Result<f64> {
    let offset_bar = crate::ensembles::traceless_phase_offset(params.d_a, params.eps)?;
    let gram = offset_bar.adjoint().mul(&offset_bar).trace().re;
    let square = offset_bar.mul(&offset_bar).trace();
    let d_a = params.d_a as f64;
    let (r, d_b) = (params.r as f64, params.d_b as f64);
    let term1 = 4.0 * gram / (r * d_a);
    let swap = Permutation::transposition(2, 0, 1);
    let ident = Permutation::identity(2);
    let weights =
        wg(&swap, params.d_a)? * r * d_b * d_b + wg(&ident, params.d_a)? * r * r * d_b;
    let term2 = 4.0 * (square * weights / (d_a * d_a)).re;
    Ok(term1 + term2)
}

pub fn sym_diff_second_moment(
    params: &EnsembleParams,
    samples: usize,
    rng: &SeededRng,
) -> Result<MomentReport> {
    let draws = sample_sym_diff_moments(params, samples, &rng.substream(0x6432))?;
    let (est, se) = mean_stderr(&draws.m2);
    Ok(MomentReport::judge(
        "sym_diff_second_moment",
        est,
        se,
        sym_diff_second_moment_target(params)?,
        Relation::Equals,
        samples,
        rng.seed(),
        "E tr|D|^2 = 4 tr[Ob+Ob]/(r dA) + 4 Re E tr[A1 A1] (Weingarten exact)",
    ))
}

/// Upper-bound target for E tr|D|^4:
/// 4^4 (2/(r^2 d_A^3)) ((tr[Obar Obar^dag])^2 d_B + tr[(Obar Obar^dag)^2] r).
pub fn sym_diff_fourth_moment_target(params: &EnsembleParams) -> Result<f64> {
    let offset_bar = crate::ensembles::traceless_phase_offset(params.d_a, params.eps)?;
    let sq = offset_bar.mul(&offset_bar.adjoint());
    let gram = sq.trace().re;
    let quart = sq.mul(&sq).trace().re;
    let d_a = params.d_a as f64;
    let (r, d_b) = (params.r as f64, params.d_b as f64);
    Ok(256.0 * 2.0 / (r * r * d_a * d_a * d_a) * (gram * gram * d_b + quart * r))
}

pub fn sym_diff_fourth_moment(
    params: &EnsembleParams,
    samples: usize,
    rng: &SeededRng,
) -> Result<MomentReport> {
    let draws = sample_sym_diff_moments(params, samples, &rng.substream(0x6434))?;
    let (est, se) = mean_stderr(&draws.m4);
    Ok(MomentReport::judge(
        "sym_diff_fourth_moment",
        est,
        se,
        sym_diff_fourth_moment_target(params)?,
        Relation::AtMost,
        samples,
        rng.seed(),
        "E tr|D|^4 <= 256 (2/(r^2 dA^3)) ((tr ObOb+)^2 dB + tr[(ObOb+)^2] r)",
    ))
}

/// The Lipschitz constant of (U1, U2) -> ||J_1 - J_2||_1 with respect to
/// the l2-sum of Frobenius norms, for either construction.
pub fn lipschitz_constant(params: &EnsembleParams) -> f64 {
    4.0 * (2.0 / params.d_a as f64).sqrt() * params.eps
}

/// exp(i s H) U for Hermitian H: a small unitary perturbation of U.
fn perturb_unitary(u: &Operator, h: &Operator, scale: f64) -> Operator {
    let eig = hermitian_eig(h).expect("perturbation direction is Hermitian");
    let phases: Vec<Complex64> = eig
        .eigenvalues
        .iter()
        .map(|&l| Complex64::from_polar(1.0, scale * l))
        .collect();
    let q = &eig.eigenvectors;
    q.mul(&Operator::diagonal(&phases)).mul(&q.adjoint()).mul(u)
}

/// Empirical Lipschitz ratio over perturbed pairs:
/// max |f(U1, U2) - f(U1', U2')| / ||(U1 - U1', U2 - U2')||_2,
/// which must stay below 4 sqrt(2/d_A) eps (plus numerical slack).
pub fn lipschitz_ratio(
    params: &EnsembleParams,
    pair_samples: usize,
    perturbation_scale: f64,
    rng: &SeededRng,
) -> Result<MomentReport> {
    params.validate()?;
    if pair_samples == 0 {
        return Err(Error::Parameter("need at least one pair".into()));
    }
    if perturbation_scale <= 0.0 {
        return Err(Error::Parameter("perturbation scale must be positive".into()));
    }
    let construction = Construction::for_params(params)?;
    let dim = params.unitary_dim();
    let ns = rng.substream(0x6c69);
    let ratios: Vec<f64> = (0..pair_samples as u64)
        .into_par_iter()
        .map(|i| {
            let u1 = sample_haar_unitary(dim, &ns.substream(4 * i)).expect("dim >= 1");
            let u2 = sample_haar_unitary(dim, &ns.substream(4 * i + 1)).expect("dim >= 1");
            let h1 = sample_unit_hermitian(dim, &ns.substream(4 * i + 2));
            let h2 = sample_unit_hermitian(dim, &ns.substream(4 * i + 3));
            let u1p = perturb_unitary(&u1, &h1, perturbation_scale);
            let u2p = perturb_unitary(&u2, &h2, perturbation_scale);
            let f = |a: &Operator, b: &Operator| -> f64 {
                let va = construction.isometry(a).expect("construction valid");
                let vb = construction.isometry(b).expect("construction valid");
                choi_trace_distance(&va, &vb).expect("same shape")
            };
            let denom = pair_two_norm(&u1.sub(&u1p), &u2.sub(&u2p));
            (f(&u1, &u2) - f(&u1p, &u2p)).abs() / denom
        })
        .collect();
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(MomentReport::judge(
        "lipschitz_ratio",
        max_ratio,
        0.0,
        lipschitz_constant(params) + 1e-6,
        Relation::AtMost,
        pair_samples,
        rng.seed(),
        "ratio <= L = 4 sqrt(2/dA) eps",
    ))
}

/// One tail row: exceedance frequencies above/below the sample mean at
/// offset t, against the concentration bound exp(-d t^2 / (12 L^2)).
#[derive(Clone, Debug)]
pub struct TailRow {
    pub t: f64,
    pub upper_frequency: f64,
    pub lower_frequency: f64,
    pub bound: f64,
    pub upper_stderr: f64,
    pub lower_stderr: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug)]
pub struct TailReport {
    pub rows: Vec<TailRow>,
    pub mean: f64,
    pub lipschitz: f64,
    pub dim: usize,
    pub samples: usize,
    pub seed: u64,
    pub verdict: Verdict,
}

impl TailReport {
    /// Tail rows rendered as moment reports (frequency <= bound).
    pub fn to_moment_reports(&self) -> Vec<MomentReport> {
        self.rows
            .iter()
            .flat_map(|row| {
                [
                    MomentReport::judge(
                        &format!("tail_upper_t={}", row.t),
                        row.upper_frequency,
                        row.upper_stderr,
                        row.bound,
                        Relation::AtMost,
                        self.samples,
                        self.seed,
                        "P[f >= Ef + t] <= exp(-d t^2/(12 L^2))",
                    ),
                    MomentReport::judge(
                        &format!("tail_lower_t={}", row.t),
                        row.lower_frequency,
                        row.lower_stderr,
                        row.bound,
                        Relation::AtMost,
                        self.samples,
                        self.seed,
                        "P[f <= Ef - t] <= exp(-d t^2/(12 L^2))",
                    ),
                ]
            })
            .collect()
    }
}

/// Samples f = ||J_1 - J_2||_1 over independent Haar pairs and checks both
/// one-sided tails (the lower tail is the bound applied to -f) against the
/// theoretical envelope at every t in the grid. The tail is measured from
/// the sample mean, whose own error is negligible at these sample counts.
pub fn concentration_tail(
    params: &EnsembleParams,
    samples: usize,
    t_grid: &[f64],
    rng: &SeededRng,
) -> Result<TailReport> {
    params.validate()?;
    if samples < 2 {
        return Err(Error::Parameter("need at least two samples".into()));
    }
    if t_grid.is_empty() || t_grid.iter().any(|&t| t <= 0.0) {
        return Err(Error::Parameter("t grid must be positive".into()));
    }
    let construction = Construction::for_params(params)?;
    let dim = params.unitary_dim();
    let ns = rng.substream(0x7461);
    let values: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let u1 = sample_haar_unitary(dim, &ns.substream(2 * i)).expect("dim >= 1");
            let u2 = sample_haar_unitary(dim, &ns.substream(2 * i + 1)).expect("dim >= 1");
            let v1 = construction.isometry(&u1).expect("construction valid");
            let v2 = construction.isometry(&u2).expect("construction valid");
            choi_trace_distance(&v1, &v2).expect("same shape")
        })
        .collect();
    let (mean, _) = mean_stderr(&values);
    let lipschitz = lipschitz_constant(params);
    let dim_group = params.r * params.d_b;
    let rows: Vec<TailRow> = t_grid
        .iter()
        .map(|&t| {
            let upper = values.iter().filter(|&&v| v >= mean + t).count() as f64
                / samples as f64;
            let lower = values.iter().filter(|&&v| v <= mean - t).count() as f64
                / samples as f64;
            let bound =
                (-(dim_group as f64) * t * t / (12.0 * lipschitz * lipschitz)).exp();
            let upper_stderr = binomial_stderr(upper, samples);
            let lower_stderr = binomial_stderr(lower, samples);
            let ok = upper <= bound + 4.0 * upper_stderr && lower <= bound + 4.0 * lower_stderr;
            TailRow {
                t,
                upper_frequency: upper,
                lower_frequency: lower,
                bound,
                upper_stderr,
                lower_stderr,
                verdict: Verdict::from_bool(ok),
            }
        })
        .collect();
    let verdict = Verdict::from_bool(rows.iter().all(|r| r.verdict.passed()));
    Ok(TailReport {
        rows,
        mean,
        lipschitz,
        dim: dim_group,
        samples,
        seed: rng.seed(),
        verdict,
    })
}

pub const DEFAULT_T_GRID: [f64; 5] = [0.05, 0.1, 0.2, 0.5, 1.0];

/// The full per-case battery: every moment report the construction admits,
/// including the concentration tail rows.
pub fn moment_suite(
    params: &EnsembleParams,
    samples: usize,
    rng: &SeededRng,
) -> Result<Vec<MomentReport>> {
    params.validate()?;
    let mut reports = Vec::new();
    match params.case {
        Case::Tilted => {
            reports.push(cross_second_moment(params, samples, rng)?);
            reports.push(cross_fourth_moment(params, 4 * samples, rng)?);
            let (sampled, exact) = cross_first_moment_reports(params, samples, rng)?;
            reports.push(sampled);
            reports.push(exact);
            reports.push(tilted_first_moment(params, samples.min(2000), rng)?);
        }
        Case::Equal => {
            reports.push(sym_diff_second_moment(params, samples, rng)?);
            reports.push(sym_diff_fourth_moment(params, 4 * samples, rng)?);
        }
    }
    reports.push(lipschitz_ratio(params, (samples / 10).max(50), 1e-3, rng)?);
    let tail = concentration_tail(params, samples, &DEFAULT_T_GRID, rng)?;
    reports.extend(tail.to_moment_reports());
    Ok(reports)
}
