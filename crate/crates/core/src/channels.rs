//! Quantum channel representations (Kraus, Stinespring, Choi), conversions
//! between them, and the two distance quantities the certification uses.
//!
//! Internal convention: a Stinespring isometry V maps the input space A into
//! E (x) B with the environment E as the *leftmost* tensor factor, so the
//! Kraus operator for environment index i is (<i|_E (x) 1_B) V. Papers often
//! write the output as B (x) E; the two differ by a fixed swap that cancels
//! in every trace and norm computed here.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::decomp::hermitian_eig;
use crate::error::{Error, Result};
use crate::matrix::{read_matrix_file, write_matrix_file, Operator};

const ISOMETRY_TOL: f64 = 1e-10;
const COMPLETENESS_TOL: f64 = 1e-10;
const CHOI_PSD_TOL: f64 = -1e-10;
const CHOI_TRACE_TOL: f64 = 1e-10;
const CHOI_MARGINAL_TOL: f64 = 1e-9;

/// Tall matrix V: A -> E (x) B with V^dag V = 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Isometry {
    matrix: Operator,
    d_a: usize,
    d_b: usize,
    d_e: usize,
}

impl Isometry {
    /// Validates the isometry contract. The matrix must carry row dims
    /// `[d_e, d_b]` and a single column factor `[d_a]`.
    pub fn new(matrix: Operator) -> Result<Self> {
        if matrix.row_dims().len() != 2 || matrix.col_dims().len() != 1 {
            return Err(Error::Dimension(
                "isometry matrix needs row dims [d_e, d_b] and col dims [d_a]".into(),
            ));
        }
        let d_e = matrix.row_dims()[0];
        let d_b = matrix.row_dims()[1];
        let d_a = matrix.col_dims()[0];
        let residual = matrix
            .adjoint()
            .mul(&matrix)
            .sub(&Operator::identity(&[d_a]))
            .operator_norm();
        if residual > ISOMETRY_TOL {
            return Err(Error::Contract(format!(
                "V^dag V - 1 has operator norm {residual:.3e} > {ISOMETRY_TOL:.0e}"
            )));
        }
        Ok(Self { matrix, d_a, d_b, d_e })
    }

    pub fn matrix(&self) -> &Operator {
        &self.matrix
    }

    pub fn input_dim(&self) -> usize {
        self.d_a
    }

    pub fn output_dim(&self) -> usize {
        self.d_b
    }

    pub fn env_dim(&self) -> usize {
        self.d_e
    }
}

/// Kraus operators K_i: A -> B with sum_i K_i^dag K_i = 1.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausSet {
    ops: Vec<Operator>,
    d_a: usize,
    d_b: usize,
}

impl KrausSet {
    pub fn new(ops: Vec<Operator>) -> Result<Self> {
        let first = ops
            .first()
            .ok_or_else(|| Error::Contract("empty Kraus set".into()))?;
        let d_b = first.rows();
        let d_a = first.cols();
        for op in &ops {
            if op.rows() != d_b || op.cols() != d_a {
                return Err(Error::Dimension("Kraus operators differ in shape".into()));
            }
        }
        let mut sum = Operator::zeros(&[d_a], &[d_a]);
        for op in &ops {
            sum = sum.add(&op.adjoint().mul(op));
        }
        let residual = sum.sub(&Operator::identity(&[d_a])).operator_norm();
        if residual > COMPLETENESS_TOL {
            return Err(Error::Contract(format!(
                "Kraus completeness residual {residual:.3e} > {COMPLETENESS_TOL:.0e}"
            )));
        }
        Ok(Self { ops, d_a, d_b })
    }

    pub fn operators(&self) -> &[Operator] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.d_a
    }

    pub fn output_dim(&self) -> usize {
        self.d_b
    }

    /// Appends zero operators until the set has `count` elements, fixing
    /// the environment dimension without changing the channel.
    pub fn padded(mut self, count: usize) -> Self {
        while self.ops.len() < count {
            self.ops.push(Operator::zeros(&[self.d_b], &[self.d_a]));
        }
        self
    }
}

/// Choi state J on A' (x) B, with its CPTP invariants checked.
#[derive(Clone, Debug, PartialEq)]
pub struct ChoiState {
    matrix: Operator,
    d_a: usize,
    d_b: usize,
}

impl ChoiState {
    pub fn new(matrix: Operator) -> Result<Self> {
        if matrix.row_dims().len() != 2 || matrix.row_dims() != matrix.col_dims() {
            return Err(Error::Dimension(
                "Choi matrix needs matching row/col dims [d_a, d_b]".into(),
            ));
        }
        let d_a = matrix.row_dims()[0];
        let d_b = matrix.row_dims()[1];
        let eig = hermitian_eig(&matrix)?;
        let min_eig = eig.eigenvalues.last().copied().unwrap_or(0.0);
        if min_eig < CHOI_PSD_TOL {
            return Err(Error::Contract(format!(
                "Choi matrix has eigenvalue {min_eig:.3e} below tolerance"
            )));
        }
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > CHOI_TRACE_TOL || trace.im.abs() > CHOI_TRACE_TOL {
            return Err(Error::Contract(format!("Choi trace {trace} is not 1")));
        }
        let marginal = matrix.partial_trace(&[0])?;
        let target = Operator::identity(&[d_a]).scale(Complex64::new(1.0 / d_a as f64, 0.0));
        let dev = marginal.sub(&target).operator_norm();
        if dev > CHOI_MARGINAL_TOL {
            return Err(Error::Contract(format!(
                "Choi marginal deviates from 1/d_A by {dev:.3e}"
            )));
        }
        Ok(Self { matrix, d_a, d_b })
    }

    pub fn matrix(&self) -> &Operator {
        &self.matrix
    }

    pub fn input_dim(&self) -> usize {
        self.d_a
    }

    pub fn output_dim(&self) -> usize {
        self.d_b
    }

    /// Number of eigenvalues above `tol` (default 1e-8 times the largest).
    pub fn rank(&self, tol: Option<f64>) -> usize {
        let eig = hermitian_eig(&self.matrix).expect("Choi matrices are Hermitian");
        let top = eig.eigenvalues.first().copied().unwrap_or(0.0);
        let cut = tol.unwrap_or(1e-8 * top.max(0.0));
        eig.eigenvalues.iter().filter(|&&l| l > cut).count()
    }
}

/// |Psi> = (1/sqrt d) sum_i |i>|i> as a column vector with row dims [d, d].
pub fn maximally_entangled_vector(d: usize) -> Operator {
    let amp = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
    let mut data = vec![Complex64::new(0.0, 0.0); d * d];
    for i in 0..d {
        data[i * d + i] = amp;
    }
    Operator::new(vec![d, d], vec![1], data).expect("finite amplitudes")
}

/// Extracts Kraus operators K_i = (<i|_E (x) 1_B) V.
pub fn stinespring_to_kraus(v: &Isometry) -> KrausSet {
    let (d_a, d_b, d_e) = (v.input_dim(), v.output_dim(), v.env_dim());
    let ops: Vec<Operator> = (0..d_e)
        .map(|i| {
            Operator::from_fn(&[d_b], &[d_a], |b, a| v.matrix()[(i * d_b + b, a)])
        })
        .collect();
    KrausSet { ops, d_a, d_b }
}

/// Assembles V = sum_i |i>_E (x) K_i. The environment dimension equals the
/// number of Kraus operators.
pub fn kraus_to_stinespring(k: &KrausSet) -> Isometry {
    let d_e = k.len();
    let (d_a, d_b) = (k.input_dim(), k.output_dim());
    let mut m = Operator::zeros(&[d_e, d_b], &[d_a]);
    for (i, op) in k.operators().iter().enumerate() {
        for b in 0..d_b {
            for a in 0..d_a {
                m.set(i * d_b + b, a, op[(b, a)]);
            }
        }
    }
    Isometry::new(m).expect("complete Kraus sets dilate to isometries")
}

/// Phi(rho) = sum_i K_i rho K_i^dag = Tr_E[V rho V^dag].
pub fn apply_channel(v: &Isometry, rho: &Operator) -> Result<Operator> {
    if !rho.is_square() || rho.rows() != v.input_dim() {
        return Err(Error::Dimension(format!(
            "state must be {0}x{0}",
            v.input_dim()
        )));
    }
    let kraus = stinespring_to_kraus(v);
    let mut out = Operator::zeros(&[v.output_dim()], &[v.output_dim()]);
    for k in kraus.operators() {
        out = out.add(&k.mul(rho).mul(&k.adjoint()));
    }
    Ok(out)
}

/// Choi state J = (Id (x) Phi)(|Psi><Psi|) on A' (x) B.
pub fn choi_state(v: &Isometry) -> ChoiState {
    choi_state_of_kraus(&stinespring_to_kraus(v))
}

pub fn choi_state_of_kraus(k: &KrausSet) -> ChoiState {
    ChoiState::new(choi_matrix_of_kraus(k)).expect("valid Kraus sets yield CPTP Choi states")
}

/// The Choi matrix without invariant checks; useful for differences.
fn choi_matrix_of_kraus(k: &KrausSet) -> Operator {
    let (d_a, d_b) = (k.input_dim(), k.output_dim());
    let dim = d_a * d_b;
    let amp = 1.0 / d_a as f64;
    let mut j = Operator::zeros(&[d_a, d_b], &[d_a, d_b]);
    for op in k.operators() {
        // (1 (x) K)|Psi> has component K[b, a] / sqrt(d_A) at index (a, b).
        let mut vec = vec![Complex64::new(0.0, 0.0); dim];
        for a in 0..d_a {
            for b in 0..d_b {
                vec[a * d_b + b] = op[(b, a)];
            }
        }
        for r in 0..dim {
            for c in 0..dim {
                let add = vec[r] * vec[c].conj() * amp;
                let cur = j[(r, c)];
                j.set(r, c, cur + add);
            }
        }
    }
    j
}

/// ||J_1 - J_2||_1: the Choi trace distance, a lower bound on the diamond
/// distance.
pub fn choi_trace_distance(v1: &Isometry, v2: &Isometry) -> Result<f64> {
    if v1.input_dim() != v2.input_dim() || v1.output_dim() != v2.output_dim() {
        return Err(Error::Dimension("channels act on different spaces".into()));
    }
    let j1 = choi_matrix_of_kraus(&stinespring_to_kraus(v1));
    let j2 = choi_matrix_of_kraus(&stinespring_to_kraus(v2));
    Ok(j1.sub(&j2).trace_norm())
}

/// ||V_1 - V_2||_op; together with the Choi trace distance this sandwiches
/// the diamond distance (trace distance <= diamond <= 2 op distance).
pub fn isometry_distance(v1: &Isometry, v2: &Isometry) -> Result<f64> {
    if v1.matrix().rows() != v2.matrix().rows() || v1.input_dim() != v2.input_dim() {
        return Err(Error::Dimension("isometries have different shapes".into()));
    }
    Ok(v1.matrix().sub(v2.matrix()).operator_norm())
}

/// Convex mixture (1-p) Phi_a + p Phi_b as the Kraus set
/// {sqrt(1-p) A_i} u {sqrt(p) B_j}.
pub fn mix_channels(a: &KrausSet, b: &KrausSet, p: f64) -> Result<KrausSet> {
    if a.input_dim() != b.input_dim() || a.output_dim() != b.output_dim() {
        return Err(Error::Dimension("mixture components differ in shape".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Parameter(format!("mixture weight {p} outside [0, 1]")));
    }
    let mut ops = Vec::with_capacity(a.len() + b.len());
    let wa = Complex64::new((1.0 - p).sqrt(), 0.0);
    let wb = Complex64::new(p.sqrt(), 0.0);
    for op in a.operators() {
        ops.push(op.scale(wa));
    }
    for op in b.operators() {
        ops.push(op.scale(wb));
    }
    KrausSet::new(ops)
}

#[derive(Serialize, Deserialize)]
struct ChannelManifest {
    d_a: usize,
    d_b: usize,
    r: usize,
    kraus_files: Vec<String>,
    #[serde(default)]
    metadata: serde_json::Value,
}

/// Writes one matrix file per Kraus operator plus a manifest document.
pub fn save_kraus_set(
    dir: &Path,
    stem: &str,
    k: &KrausSet,
    r: usize,
    metadata: serde_json::Value,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for (i, op) in k.operators().iter().enumerate() {
        let name = format!("{stem}_k{i:03}.json");
        write_matrix_file(&dir.join(&name), op)?;
        files.push(name);
    }
    let manifest = ChannelManifest {
        d_a: k.input_dim(),
        d_b: k.output_dim(),
        r,
        kraus_files: files,
        metadata,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    crate::report::write_atomic(&dir.join(format!("{stem}.manifest.json")), &text)
}

/// Reads a channel manifest and its Kraus operator files.
pub fn load_kraus_set(dir: &Path, stem: &str) -> Result<(KrausSet, usize, serde_json::Value)> {
    let path = dir.join(format!("{stem}.manifest.json"));
    let text = std::fs::read_to_string(&path)?;
    let manifest: ChannelManifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut ops = Vec::new();
    for name in &manifest.kraus_files {
        ops.push(read_matrix_file(&dir.join(name))?);
    }
    let k = KrausSet::new(ops)?;
    if k.input_dim() != manifest.d_a || k.output_dim() != manifest.d_b {
        return Err(Error::Parse {
            path: path.display().to_string(),
            message: "manifest dimensions disagree with Kraus files".into(),
        });
    }
    Ok((k, manifest.r, manifest.metadata))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::haar::{sample_density_matrix, sample_haar_unitary, SeededRng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Isometry with trivial environment: the channel rho -> U rho U^dag.
    fn unitary_isometry(u: &Operator) -> Isometry {
        let d = u.rows();
        let m = Operator::new(
            vec![1, d],
            vec![d],
            u.data().to_vec(),
        )
        .unwrap();
        Isometry::new(m).unwrap()
    }

    /// Haar-random isometry A -> E (x) B from the first d_a columns of a
    /// Haar unitary on the output space.
    fn random_isometry(d_a: usize, d_b: usize, d_e: usize, rng: &SeededRng) -> Isometry {
        let u = sample_haar_unitary(d_b * d_e, rng).unwrap();
        let m = Operator::from_fn(&[d_e, d_b], &[d_a], |i, j| u[(i, j)]);
        Isometry::new(m).unwrap()
    }

    #[test]
    fn identity_channel_kraus() {
        let id = Operator::identity(&[3]);
        let v = unitary_isometry(&id);
        let k = stinespring_to_kraus(&v);
        assert_eq!(k.len(), 1);
        assert!(k.operators()[0].sub(&id).frobenius_norm() < 1e-15);
    }

    #[test]
    fn kraus_stinespring_round_trip_is_exact() {
        let rng = SeededRng::new(2);
        let v = random_isometry(3, 2, 2, &rng);
        let k = stinespring_to_kraus(&v);
        assert_eq!(k.len(), v.env_dim());
        let v2 = kraus_to_stinespring(&k);
        assert!(v.matrix().sub(v2.matrix()).max_abs() < 1e-12);
        let k2 = stinespring_to_kraus(&v2);
        for (a, b) in k.operators().iter().zip(k2.operators()) {
            assert!(a.sub(b).max_abs() < 1e-12);
        }
    }

    #[test]
    fn redundant_dilation_of_a_unitary() {
        let rng = SeededRng::new(4);
        let u = sample_haar_unitary(2, &rng).unwrap();
        let w = u.scale(c(std::f64::consts::FRAC_1_SQRT_2, 0.0));
        let k = KrausSet::new(vec![w.clone(), w]).unwrap();
        let v = kraus_to_stinespring(&k);
        assert_eq!(v.env_dim(), 2);
        let residual = v
            .matrix()
            .adjoint()
            .mul(v.matrix())
            .sub(&Operator::identity(&[2]))
            .operator_norm();
        assert!(residual <= 1e-10);
    }

    #[test]
    fn incomplete_kraus_rejected() {
        let half = Operator::identity(&[2]).scale(c(0.5, 0.0));
        assert!(matches!(KrausSet::new(vec![half]), Err(Error::Contract(_))));
    }

    #[test]
    fn apply_unitary_channel() {
        let rng = SeededRng::new(6);
        let u = sample_haar_unitary(3, &rng.substream(0)).unwrap();
        let v = unitary_isometry(&u);
        let rho = sample_density_matrix(3, &rng.substream(1));
        let out = apply_channel(&v, &rho).unwrap();
        let want = u.mul(&rho).mul(&u.adjoint());
        assert!(out.sub(&want).max_abs() < 1e-12);
        assert!((out.trace().re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn apply_channel_preserves_trace_on_random_isometry() {
        let rng = SeededRng::new(7);
        let v = random_isometry(4, 2, 2, &rng.substream(0));
        let rho = sample_density_matrix(4, &rng.substream(1));
        let out = apply_channel(&v, &rho).unwrap();
        assert!((out.trace().re - 1.0).abs() < 1e-10);
        assert!(out.trace().im.abs() < 1e-12);
        // Positivity of the output.
        let eig = hermitian_eig(&out).unwrap();
        assert!(eig.eigenvalues.last().unwrap() > &-1e-12);
    }

    #[test]
    fn apply_channel_dimension_error() {
        let v = unitary_isometry(&Operator::identity(&[2]));
        let rho = Operator::identity(&[3]).scale(c(1.0 / 3.0, 0.0));
        assert!(apply_channel(&v, &rho).is_err());
    }

    #[test]
    fn choi_of_identity_channel_is_max_entangled() {
        let v = unitary_isometry(&Operator::identity(&[2]));
        let j = choi_state(&v);
        let psi = maximally_entangled_vector(2);
        let proj = psi.mul(&psi.adjoint());
        assert!(j.matrix().sub(&proj).max_abs() < 1e-12);
        assert_eq!(j.rank(None), 1);
    }

    #[test]
    fn choi_of_depolarizing_channel_is_maximally_mixed() {
        let paulis = crate::ensembles::generalized_paulis(2);
        let ops: Vec<Operator> = paulis.iter().map(|p| p.scale(c(0.5, 0.0))).collect();
        let k = KrausSet::new(ops).unwrap();
        let j = choi_state_of_kraus(&k);
        let want = Operator::identity(&[2, 2]).scale(c(0.25, 0.0));
        assert!(j.matrix().sub(&want).max_abs() < 1e-12);
        assert_eq!(j.rank(None), 4);
    }

    #[test]
    fn choi_marginal_invariant_on_random_isometries() {
        let rng = SeededRng::new(9);
        for (i, (da, db, de)) in [(2usize, 2usize, 2usize), (4, 2, 2), (3, 3, 2)]
            .iter()
            .enumerate()
        {
            let v = random_isometry(*da, *db, *de, &rng.substream(i as u64));
            let j = choi_state(&v);
            let marginal = j.matrix().partial_trace(&[0]).unwrap();
            let target = Operator::identity(&[*da]).scale(c(1.0 / *da as f64, 0.0));
            assert!(marginal.sub(&target).operator_norm() <= 1e-9);
            assert!(j.rank(None) <= *de);
        }
    }

    #[test]
    fn choi_distance_of_orthogonal_unitaries_is_two() {
        let id = Operator::identity(&[2]);
        let z = Operator::diagonal(&[c(1.0, 0.0), c(-1.0, 0.0)]);
        let vi = unitary_isometry(&id);
        let vz = unitary_isometry(&z);
        let dist = choi_trace_distance(&vi, &vz).unwrap();
        assert!((dist - 2.0).abs() < 1e-10);
        assert_eq!(choi_trace_distance(&vi, &vi).unwrap(), 0.0);
    }

    #[test]
    fn choi_distance_under_twice_isometry_distance() {
        let rng = SeededRng::new(12);
        for i in 0..50u64 {
            let v1 = random_isometry(3, 2, 2, &rng.substream(2 * i));
            let v2 = random_isometry(3, 2, 2, &rng.substream(2 * i + 1));
            let lhs = choi_trace_distance(&v1, &v2).unwrap();
            let rhs = isometry_distance(&v1, &v2).unwrap();
            assert!(lhs <= 2.0 * rhs + 1e-9, "choi {lhs} vs 2 eta {rhs}");
        }
    }

    #[test]
    fn channel_from_choi_contraction_identity() {
        // Phi(rho) = d_A Tr_{A'}[J (rho^T (x) 1)].
        let rng = SeededRng::new(14);
        let v = random_isometry(3, 2, 2, &rng.substream(0));
        let rho = sample_density_matrix(3, &rng.substream(1));
        let j = choi_state(&v);
        let contracted = j
            .matrix()
            .mul(&rho.transpose().tensor(&Operator::identity(&[2])))
            .partial_trace(&[1])
            .unwrap()
            .scale(c(3.0, 0.0));
        let direct = apply_channel(&v, &rho).unwrap();
        assert!(contracted.sub(&direct).max_abs() < 1e-9);
    }

    #[test]
    fn mixture_weights_and_choi_linearity() {
        let rng = SeededRng::new(16);
        let u1 = sample_haar_unitary(2, &rng.substream(0)).unwrap();
        let u2 = sample_haar_unitary(2, &rng.substream(1)).unwrap();
        let ka = KrausSet::new(vec![u1]).unwrap();
        let kb = KrausSet::new(vec![u2]).unwrap();
        let j_a = choi_state_of_kraus(&ka);
        let j_b = choi_state_of_kraus(&kb);

        let m0 = mix_channels(&ka, &kb, 0.0).unwrap();
        assert!(choi_state_of_kraus(&m0).matrix().sub(j_a.matrix()).max_abs() < 1e-12);
        let m1 = mix_channels(&ka, &kb, 1.0).unwrap();
        assert!(choi_state_of_kraus(&m1).matrix().sub(j_b.matrix()).max_abs() < 1e-12);

        let p = 0.3;
        let mp = mix_channels(&ka, &kb, p).unwrap();
        let want = j_a
            .matrix()
            .scale(c(1.0 - p, 0.0))
            .add(&j_b.matrix().scale(c(p, 0.0)));
        assert!(choi_state_of_kraus(&mp).matrix().sub(&want).max_abs() < 1e-10);

        assert!(mix_channels(&ka, &kb, 1.2).is_err());
    }

    #[test]
    fn mixture_distance_scales_linearly_at_choi_level() {
        // Mixing two channels with a shared component scales their Choi
        // difference by exactly the mixing weight.
        let rng = SeededRng::new(18);
        let shared = KrausSet::new(vec![sample_haar_unitary(2, &rng.substream(0)).unwrap()]).unwrap();
        let ka = KrausSet::new(vec![sample_haar_unitary(2, &rng.substream(1)).unwrap()]).unwrap();
        let kb = KrausSet::new(vec![sample_haar_unitary(2, &rng.substream(2)).unwrap()]).unwrap();
        let eps = 0.05;
        let p = 4.0 * eps;
        let mix_a = mix_channels(&shared, &ka, p).unwrap();
        let mix_b = mix_channels(&shared, &kb, p).unwrap();
        let d_mixed = choi_state_of_kraus(&mix_a)
            .matrix()
            .sub(choi_state_of_kraus(&mix_b).matrix())
            .trace_norm();
        let d_raw = choi_state_of_kraus(&ka)
            .matrix()
            .sub(choi_state_of_kraus(&kb).matrix())
            .trace_norm();
        assert!((d_mixed - p * d_raw).abs() < 1e-9, "{d_mixed} vs {}", p * d_raw);
    }

    #[test]
    fn kraus_set_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rng = SeededRng::new(20);
        let v = random_isometry(3, 2, 2, &rng);
        let k = stinespring_to_kraus(&v);
        save_kraus_set(dir.path(), "chan", &k, 2, serde_json::json!({"kind": "test"})).unwrap();
        let (loaded, r, meta) = load_kraus_set(dir.path(), "chan").unwrap();
        assert_eq!(r, 2);
        assert_eq!(meta["kind"], "test");
        assert_eq!(loaded.len(), k.len());
        for (a, b) in loaded.operators().iter().zip(k.operators()) {
            assert_eq!(a.data(), b.data());
        }
    }
}
