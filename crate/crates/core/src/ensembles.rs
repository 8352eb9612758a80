//! The two random-isometry ensemble constructions and the fixed reference
//! channel they are measured against, plus ensemble certification.
//!
//! Equal regime (d_A = r d_B): V = U (1 + O) U^dag where O is a diagonal
//! phase offset with (1 + O)^dag (1 + O) = 1 and ||O|| = eps.
//!
//! Tilted regime (2 d_A <= r d_B): V = sqrt(1 - eps^2) |0>_F (x) V_0 plus
//! eps |1>_F (x) U S, blending a fixed reference dilation V_0 with a
//! Haar-rotated basis embedding S behind a flag qubit F.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channels::{
    choi_trace_distance, isometry_distance, kraus_to_stinespring, load_kraus_set, save_kraus_set,
    stinespring_to_kraus, Isometry, KrausSet,
};
use crate::error::{Error, Result};
use crate::haar::{sample_haar_unitary, SeededRng};
use crate::matrix::{Operator, read_matrix_file, write_matrix_file};
use crate::report::{sig17, Verdict};

/// Which of the two constructions an ensemble uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    /// Square regime d_A = r d_B.
    Equal,
    /// Flagged-blend regime 2 d_A <= r d_B.
    Tilted,
}

impl Case {
    pub fn as_str(&self) -> &'static str {
        match self {
            Case::Equal => "equal",
            Case::Tilted => "tilted",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "equal" => Ok(Case::Equal),
            "tilted" => Ok(Case::Tilted),
            other => Err(Error::Parameter(format!("unknown case '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub d_a: usize,
    pub d_b: usize,
    pub r: usize,
    pub eps: f64,
    pub m: usize,
    pub seed: u64,
    pub case: Case,
}

impl EnsembleParams {
    pub fn validate(&self) -> Result<()> {
        if self.d_a == 0 || self.d_b == 0 || self.r == 0 {
            return Err(Error::Parameter("dimensions must be positive".into()));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::Parameter(format!("eps {} outside (0, 1)", self.eps)));
        }
        if self.m == 0 {
            return Err(Error::Parameter("ensemble size must be positive".into()));
        }
        match self.case {
            Case::Equal => {
                if self.d_a != self.r * self.d_b {
                    return Err(Error::Regime(format!(
                        "equal case needs d_A = r d_B, got {} vs {}",
                        self.d_a,
                        self.r * self.d_b
                    )));
                }
            }
            Case::Tilted => {
                if 2 * self.d_a > self.r * self.d_b {
                    return Err(Error::Regime(format!(
                        "tilted case needs 2 d_A <= r d_B, got {} vs {}",
                        2 * self.d_a,
                        self.r * self.d_b
                    )));
                }
                if self.r > self.d_a * self.d_b {
                    return Err(Error::Regime(format!(
                        "Choi rank r = {} cannot exceed d_A d_B = {}",
                        self.r,
                        self.d_a * self.d_b
                    )));
                }
            }
        }
        Ok(())
    }

    /// Dimension of the Haar unitaries the construction draws.
    pub fn unitary_dim(&self) -> usize {
        self.r * self.d_b
    }
}

/// theta in (pi/2, pi] with eps = -2 cos(theta).
pub fn offset_angle(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Parameter(format!("eps {eps} outside (0, 1)")));
    }
    Ok((-eps / 2.0).acos())
}

/// Diagonal offset O = eps diag(e^{i theta}, e^{-i theta}, ...) with a
/// trailing zero when d_A is odd. Satisfies (1 + O)^dag (1 + O) = 1 and
/// ||O||_op = eps.
pub fn phase_offset(d_a: usize, eps: f64) -> Result<Operator> {
    if d_a == 0 {
        return Err(Error::Parameter("d_A must be positive".into()));
    }
    let theta = offset_angle(eps)?;
    let up = Complex64::from_polar(eps, theta);
    let down = Complex64::from_polar(eps, -theta);
    let entries: Vec<Complex64> = (0..d_a)
        .map(|j| {
            if d_a % 2 == 1 && j == d_a - 1 {
                Complex64::new(0.0, 0.0)
            } else if j % 2 == 0 {
                up
            } else {
                down
            }
        })
        .collect();
    Ok(Operator::diagonal(&entries))
}

/// Traceless version O - tr(O)/d_A:  adds (floor(d_A/2) eps^2 / d_A) 1.
pub fn traceless_phase_offset(d_a: usize, eps: f64) -> Result<Operator> {
    let o = phase_offset(d_a, eps)?;
    let shift = o.trace() / d_a as f64;
    let mut out = o;
    for j in 0..d_a {
        let v = out[(j, j)] - shift;
        out.set(j, j, v);
    }
    Ok(out)
}

const UNITARITY_TOL: f64 = 1e-10;

fn check_unitary(u: &Operator) -> Result<()> {
    if !u.is_square() {
        return Err(Error::Dimension("expected a square unitary".into()));
    }
    let dev = u
        .adjoint()
        .mul(u)
        .sub(&Operator::identity(&[u.rows()]))
        .operator_norm();
    if dev > UNITARITY_TOL {
        return Err(Error::Contract(format!(
            "matrix is not unitary: residual {dev:.3e}"
        )));
    }
    Ok(())
}

/// Equal-regime isometry V = U (1 + O) U^dag, viewed as A -> E (x) B with
/// d_E = d_A / d_B.
pub fn equal_isometry(u: &Operator, offset: &Operator, d_b: usize) -> Result<Isometry> {
    check_unitary(u)?;
    let d_a = u.rows();
    if offset.rows() != d_a || !offset.is_square() {
        return Err(Error::Dimension("offset must match the unitary".into()));
    }
    if !d_a.is_multiple_of(d_b) {
        return Err(Error::Dimension(format!("d_B = {d_b} does not divide d_A = {d_a}")));
    }
    let d_e = d_a / d_b;
    let v = u
        .mul(&Operator::identity(&[d_a]).add(offset))
        .mul(&u.adjoint());
    Isometry::new(v.with_row_dims(&[d_e, d_b])?.with_col_dims(&[d_a])?)
}

/// The d^2 unitaries X^a Z^b; trace-orthogonal: tr[P^dag Q] = d delta_PQ.
pub fn generalized_paulis(d: usize) -> Vec<Operator> {
    let omega = std::f64::consts::TAU / d as f64;
    let mut out = Vec::with_capacity(d * d);
    for a in 0..d {
        for b in 0..d {
            let mut m = Operator::zeros(&[d], &[d]);
            for k in 0..d {
                m.set((k + a) % d, k, Complex64::from_polar(1.0, omega * (b * k) as f64));
            }
            out.push(m);
        }
    }
    out
}

/// Embeds a d_small x d_small block at the given row/column offsets of a
/// rows x cols zero matrix.
fn embed_block(rows: usize, cols: usize, block: &Operator, row0: usize, col0: usize) -> Operator {
    let mut m = Operator::zeros(&[rows], &[cols]);
    for i in 0..block.rows() {
        for j in 0..block.cols() {
            m.set(row0 + i, col0 + j, block[(i, j)]);
        }
    }
    m
}

/// Fixed reference Kraus family with pairwise trace overlaps bounded by
/// 2 d_A / r, at most r operators, built from block-embedded generalized
/// Paulis. Requires the tilted regime 2 d_A <= r d_B and r <= d_A d_B.
pub fn reference_kraus(d_a: usize, d_b: usize, r: usize) -> Result<KrausSet> {
    if d_a == 0 || d_b == 0 || r == 0 {
        return Err(Error::Parameter("dimensions must be positive".into()));
    }
    if 2 * d_a > r * d_b {
        return Err(Error::Regime(format!(
            "reference channel needs 2 d_A <= r d_B, got {} vs {}",
            2 * d_a,
            r * d_b
        )));
    }
    if r > d_a * d_b {
        return Err(Error::Regime(format!(
            "Choi rank r = {r} cannot exceed d_A d_B = {}",
            d_a * d_b
        )));
    }

    let mut ops: Vec<Operator> = Vec::new();
    if d_a <= d_b {
        // Input copies stacked along the output: pick ceil(r/2) of the
        // k * d_A^2 block-embedded Paulis.
        let k = d_b / d_a;
        let paulis = generalized_paulis(d_a);
        let need = r.div_ceil(2);
        if k * paulis.len() < need {
            return Err(Error::Regime("not enough orthogonal unitaries".into()));
        }
        let weight = Complex64::new(1.0 / (need as f64).sqrt(), 0.0);
        'outer: for block in 0..k {
            for p in &paulis {
                if ops.len() == need {
                    break 'outer;
                }
                ops.push(embed_block(d_b, d_a, &p.scale(weight), block * d_a, 0));
            }
        }
    } else {
        // Output copies partition the input: k blocks of size d_B and a
        // remainder block of size d_C < d_B.
        let k = d_a / d_b;
        let d_c = d_a - k * d_b;
        let l = r.div_ceil(2 * k);
        let paulis = generalized_paulis(d_b);
        if l > paulis.len() {
            return Err(Error::Regime("not enough orthogonal unitaries".into()));
        }
        let weight = Complex64::new(1.0 / (l as f64).sqrt(), 0.0);
        for block in 0..k {
            for p in paulis.iter().take(l) {
                ops.push(embed_block(d_b, d_a, &p.scale(weight), 0, block * d_b));
            }
        }
        if d_c > 0 {
            // Tall isometries d_C -> d_B from sub-block-embedded Paulis of
            // dimension d_C; the formula for their count gives 0 only when
            // d_C = 0, and then this branch is skipped entirely.
            let r_prime = (r * d_c).div_ceil(2 * d_a);
            let sub_blocks = d_b / d_c;
            let small = generalized_paulis(d_c);
            if r_prime > sub_blocks * small.len() {
                return Err(Error::Regime("not enough orthogonal isometries".into()));
            }
            let w = Complex64::new(1.0 / (r_prime as f64).sqrt(), 0.0);
            let mut placed = 0;
            'c_outer: for sb in 0..sub_blocks {
                for p in &small {
                    if placed == r_prime {
                        break 'c_outer;
                    }
                    let tall = embed_block(d_b, d_c, &p.scale(w), sb * d_c, 0);
                    ops.push(embed_block(d_b, d_a, &tall, 0, k * d_b));
                    placed += 1;
                }
            }
        }
    }

    if ops.len() > r {
        return Err(Error::Regime(format!(
            "construction produced {} Kraus operators for rank budget {r}",
            ops.len()
        )));
    }
    KrausSet::new(ops)
}

/// The reference dilation with its environment padded to exactly r, so it
/// composes with Haar unitaries on U(r d_B).
pub fn reference_isometry(d_a: usize, d_b: usize, r: usize) -> Result<Isometry> {
    Ok(kraus_to_stinespring(&reference_kraus(d_a, d_b, r)?.padded(r)))
}

/// S = sum_{i < d_A} |i>_{EB} <i|_A: the first d_A columns of the identity
/// on the r d_B output, entries in {0, 1}.
pub fn basis_embedding(d_a: usize, d_b: usize, r: usize) -> Result<Operator> {
    let out_dim = r * d_b;
    if d_a > out_dim {
        return Err(Error::Dimension(format!(
            "cannot embed dimension {d_a} into {out_dim}"
        )));
    }
    let mut s = Operator::zeros(&[r, d_b], &[d_a]);
    for i in 0..d_a {
        s.set(i, i, Complex64::new(1.0, 0.0));
    }
    Ok(s)
}

/// Tilted isometry: blends the reference dilation with the rotated
/// embedding U S behind a flag qubit. Output ordering is E (x) F (x) B,
/// so the Kraus operators (on the flag-extended output F (x) B) are
/// K_i = sqrt(1-eps^2) |0><i|_E V_0 + eps |1><i|_E U S.
pub fn tilted_isometry(
    u: &Operator,
    v0: &Isometry,
    s: &Operator,
    eps: f64,
) -> Result<Isometry> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Parameter(format!("eps {eps} outside (0, 1)")));
    }
    check_unitary(u)?;
    let d_a = s.cols();
    let r = v0.env_dim();
    let d_b = v0.output_dim();
    if u.rows() != r * d_b || s.rows() != r * d_b || v0.input_dim() != d_a {
        return Err(Error::Dimension("tilted construction shapes disagree".into()));
    }
    let rotated = u.mul(s).with_row_dims(&[r, d_b])?;
    let base_kraus = stinespring_to_kraus(v0);
    let rotated_kraus = stinespring_to_kraus(&Isometry::new(rotated)?);
    let w0 = Complex64::new((1.0 - eps * eps).sqrt(), 0.0);
    let w1 = Complex64::new(eps, 0.0);
    let ops: Vec<Operator> = base_kraus
        .operators()
        .iter()
        .zip(rotated_kraus.operators())
        .map(|(k0, kx)| {
            Operator::from_fn(&[2, d_b], &[d_a], |row, col| {
                let (f, b) = (row / d_b, row % d_b);
                if f == 0 {
                    w0 * k0[(b, col)]
                } else {
                    w1 * kx[(b, col)]
                }
            })
        })
        .collect();
    Ok(kraus_to_stinespring(&KrausSet::new(ops)?))
}

/// Construction context: everything fixed across ensemble members.
#[derive(Clone, Debug)]
pub enum Construction {
    Equal { offset: Operator, d_b: usize, theta: f64 },
    Tilted { v0: Isometry, s: Operator, eps: f64 },
}

impl Construction {
    pub fn for_params(params: &EnsembleParams) -> Result<Self> {
        params.validate()?;
        match params.case {
            Case::Equal => Ok(Construction::Equal {
                offset: phase_offset(params.d_a, params.eps)?,
                d_b: params.d_b,
                theta: offset_angle(params.eps)?,
            }),
            Case::Tilted => Ok(Construction::Tilted {
                v0: reference_isometry(params.d_a, params.d_b, params.r)?,
                s: basis_embedding(params.d_a, params.d_b, params.r)?,
                eps: params.eps,
            }),
        }
    }

    /// Builds the member isometry for one Haar unitary draw.
    pub fn isometry(&self, u: &Operator) -> Result<Isometry> {
        match self {
            Construction::Equal { offset, d_b, .. } => equal_isometry(u, offset, *d_b),
            Construction::Tilted { v0, s, eps } => tilted_isometry(u, v0, s, *eps),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ChannelEnsemble {
    pub params: EnsembleParams,
    pub isometries: Vec<Isometry>,
    /// theta for the equal case; the reference Kraus set for the tilted one.
    pub construction: Construction,
}

impl ChannelEnsemble {
    /// Largest pairwise Stinespring distance; the closeness parameter eta.
    pub fn max_isometry_distance(&self) -> f64 {
        let mut eta: f64 = 0.0;
        for i in 0..self.isometries.len() {
            for j in (i + 1)..self.isometries.len() {
                let d = isometry_distance(&self.isometries[i], &self.isometries[j])
                    .expect("members share a shape");
                eta = eta.max(d);
            }
        }
        eta
    }
}

/// Draws the M members deterministically: member x uses substream x of the
/// ensemble seed.
pub fn generate_ensemble(params: &EnsembleParams) -> Result<ChannelEnsemble> {
    let construction = Construction::for_params(params)?;
    let rng = SeededRng::new(params.seed);
    let dim = params.unitary_dim();
    let isometries: Vec<Isometry> = (0..params.m as u64)
        .map(|x| {
            let u = sample_haar_unitary(dim, &rng.substream(x))?;
            construction.isometry(&u)
        })
        .collect::<Result<_>>()?;
    Ok(ChannelEnsemble { params: *params, isometries, construction })
}

#[derive(Clone, Debug)]
pub struct PairCheck {
    pub i: usize,
    pub j: usize,
    pub choi_distance: f64,
    pub isometry_distance: f64,
    pub verdict: Verdict,
}

/// Pairwise certification report: separation at the Choi level, closeness
/// at the Stinespring level.
#[derive(Clone, Debug)]
pub struct CertificationReport {
    pub pairs: Vec<PairCheck>,
    pub separation_threshold: f64,
    pub threshold_was_default: bool,
    pub eta: f64,
    pub min_separation: f64,
    pub max_closeness: f64,
    pub verdict: Verdict,
}

impl CertificationReport {
    pub fn to_csv(&self, params: &EnsembleParams) -> String {
        let mut s = format!(
            "# certify case={} dA={} dB={} r={} eps={} M={} seed={} threshold={} threshold_default={} eta={}\n",
            params.case.as_str(),
            params.d_a,
            params.d_b,
            params.r,
            sig17(params.eps),
            params.m,
            params.seed,
            sig17(self.separation_threshold),
            self.threshold_was_default,
            sig17(self.eta),
        );
        s.push_str("pair,choi_dist,iso_dist,verdict\n");
        for p in &self.pairs {
            s.push_str(&format!(
                "{}-{},{},{},{}\n",
                p.i,
                p.j,
                sig17(p.choi_distance),
                sig17(p.isometry_distance),
                p.verdict
            ));
        }
        s.push_str(&format!(
            "summary,{},{},{}\n",
            sig17(self.min_separation),
            sig17(self.max_closeness),
            self.verdict
        ));
        s
    }
}

/// Checks every pair: Choi trace distance must exceed the separation
/// threshold and isometry distance must stay within eta. When no threshold
/// is given, a quarter of the mean pairwise Choi distance is used and
/// recorded as such.
pub fn certify_ensemble(
    ensemble: &ChannelEnsemble,
    separation_threshold: Option<f64>,
    eta: f64,
) -> CertificationReport {
    use rayon::prelude::*;
    let members = &ensemble.isometries;
    let index_pairs: Vec<(usize, usize)> = (0..members.len())
        .flat_map(|i| ((i + 1)..members.len()).map(move |j| (i, j)))
        .collect();
    let raw: Vec<(usize, usize, f64, f64)> = index_pairs
        .par_iter()
        .map(|&(i, j)| {
            let cd = choi_trace_distance(&members[i], &members[j]).expect("same shape");
            let id = isometry_distance(&members[i], &members[j]).expect("same shape");
            (i, j, cd, id)
        })
        .collect();
    let mean_choi = if raw.is_empty() {
        0.0
    } else {
        raw.iter().map(|r| r.2).sum::<f64>() / raw.len() as f64
    };
    let threshold_was_default = separation_threshold.is_none();
    let threshold = separation_threshold.unwrap_or(0.25 * mean_choi);
    let pairs: Vec<PairCheck> = raw
        .into_iter()
        .map(|(i, j, cd, id)| PairCheck {
            i,
            j,
            choi_distance: cd,
            isometry_distance: id,
            verdict: Verdict::from_bool(cd > threshold && id <= eta),
        })
        .collect();
    let min_separation = pairs.iter().map(|p| p.choi_distance).fold(f64::INFINITY, f64::min);
    let max_closeness = pairs.iter().map(|p| p.isometry_distance).fold(0.0, f64::max);
    let verdict = Verdict::from_bool(pairs.iter().all(|p| p.verdict.passed()));
    CertificationReport {
        pairs,
        separation_threshold: threshold,
        threshold_was_default,
        eta,
        min_separation,
        max_closeness,
        verdict,
    }
}

#[derive(Serialize, Deserialize)]
struct EnsembleManifest {
    case: Case,
    d_a: usize,
    d_b: usize,
    r: usize,
    eps: f64,
    m: usize,
    seed: u64,
    theta: Option<f64>,
    reference_stem: Option<String>,
    embedding_file: Option<String>,
    member_stems: Vec<String>,
}

/// Writes the ensemble as channel manifests (one per member, one matrix
/// file per Kraus operator) plus a top-level manifest.
pub fn save_ensemble(dir: &Path, ensemble: &ChannelEnsemble) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let p = &ensemble.params;
    let mut manifest = EnsembleManifest {
        case: p.case,
        d_a: p.d_a,
        d_b: p.d_b,
        r: p.r,
        eps: p.eps,
        m: p.m,
        seed: p.seed,
        theta: None,
        reference_stem: None,
        embedding_file: None,
        member_stems: Vec::new(),
    };
    match &ensemble.construction {
        Construction::Equal { theta, .. } => manifest.theta = Some(*theta),
        Construction::Tilted { v0, s, .. } => {
            let k0 = stinespring_to_kraus(v0);
            save_kraus_set(dir, "reference", &k0, p.r, serde_json::json!({"role": "reference"}))?;
            manifest.reference_stem = Some("reference".into());
            write_matrix_file(&dir.join("embedding.json"), s)?;
            manifest.embedding_file = Some("embedding.json".into());
        }
    }
    for (x, v) in ensemble.isometries.iter().enumerate() {
        let stem = format!("member_{x:03}");
        let kraus = stinespring_to_kraus(v);
        save_kraus_set(
            dir,
            &stem,
            &kraus,
            p.r,
            serde_json::json!({"member": x, "d_e": v.env_dim()}),
        )?;
        manifest.member_stems.push(stem);
    }
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    crate::report::write_atomic(&dir.join("ensemble.json"), &text)
}

pub fn load_ensemble(dir: &Path) -> Result<ChannelEnsemble> {
    let path = dir.join("ensemble.json");
    let text = std::fs::read_to_string(&path)?;
    let manifest: EnsembleManifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let params = EnsembleParams {
        d_a: manifest.d_a,
        d_b: manifest.d_b,
        r: manifest.r,
        eps: manifest.eps,
        m: manifest.m,
        seed: manifest.seed,
        case: manifest.case,
    };
    let construction = match manifest.case {
        Case::Equal => Construction::Equal {
            offset: phase_offset(params.d_a, params.eps)?,
            d_b: params.d_b,
            theta: manifest.theta.unwrap_or(offset_angle(params.eps)?),
        },
        Case::Tilted => {
            let stem = manifest.reference_stem.as_deref().unwrap_or("reference");
            let (k0, r, _) = load_kraus_set(dir, stem)?;
            let s = match &manifest.embedding_file {
                Some(name) => read_matrix_file(&dir.join(name))?
                    .with_row_dims(&[params.r, params.d_b])?,
                None => basis_embedding(params.d_a, params.d_b, params.r)?,
            };
            Construction::Tilted {
                v0: kraus_to_stinespring(&k0.padded(r)),
                s,
                eps: params.eps,
            }
        }
    };
    let mut isometries = Vec::with_capacity(manifest.member_stems.len());
    for stem in &manifest.member_stems {
        let (kraus, _, _) = load_kraus_set(dir, stem)?;
        isometries.push(kraus_to_stinespring(&kraus));
    }
    Ok(ChannelEnsemble { params, isometries, construction })
}
