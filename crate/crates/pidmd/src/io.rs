//! Persistence formats: a little-endian binary container for snapshot sets
//! and a JSON container for fitted models. Both round-trip byte-identically
//! (write -> read -> write produces the same bytes).

use std::io::{Read, Write};
use std::path::Path;

use faer::complex_native::c64;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::baselines::{InterpScheme, ReducedOpInterpModel, StackedDmdModel};
use crate::dmd::{DmdModel, SnapshotSet};
use crate::error::{Error, Result, Warning};
use crate::linalg::{ComplexMat, RealMat};
use crate::pidmd::{ParamMap, PiDmdModel, TrainingMeta};

/// Magic bytes opening every snapshot file.
pub const SNAPSHOT_MAGIC: &[u8; 5] = b"PDMD1";
/// Byte-order tag: header and payload are little-endian.
pub const SNAPSHOT_ENDIAN_TAG: u8 = b'L';
/// Container version.
pub const SNAPSHOT_VERSION: u8 = 1;

/// Model-file format marker.
pub const MODEL_FORMAT: &str = "pidmd-model";
/// Model-file version.
pub const MODEL_VERSION: u32 = 1;

fn read_exact<const N: usize>(r: &mut impl Read, what: &str) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated {what}: {e}")))?;
    Ok(buf)
}

fn read_u64(r: &mut impl Read, what: &str) -> Result<u64> {
    Ok(u64::from_le_bytes(read_exact::<8>(r, what)?))
}

fn read_f64(r: &mut impl Read, what: &str) -> Result<f64> {
    Ok(f64::from_le_bytes(read_exact::<8>(r, what)?))
}

/// Serialize a snapshot set into the binary container.
///
/// Layout, all multi-byte fields little-endian:
/// magic `PDMD1`, endian tag `L`, version byte, one reserved byte,
/// `n: u64`, `cols: u64`, `dt: f64`, `p: u64`, `p` parameter doubles,
/// `label_len: u32` + UTF-8 label bytes, then `n * cols` state doubles in
/// column-major order.
pub fn snapshot_to_bytes(set: &SnapshotSet) -> Vec<u8> {
    let n = set.states.nrows();
    let cols = set.states.ncols();
    let label = set.label.as_bytes();
    let mut out = Vec::with_capacity(48 + label.len() + 8 * (set.theta.len() + n * cols));
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.push(SNAPSHOT_ENDIAN_TAG);
    out.push(SNAPSHOT_VERSION);
    out.push(0u8);
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(cols as u64).to_le_bytes());
    out.extend_from_slice(&set.dt.to_le_bytes());
    out.extend_from_slice(&(set.theta.len() as u64).to_le_bytes());
    for t in &set.theta {
        out.extend_from_slice(&t.to_le_bytes());
    }
    out.extend_from_slice(&(label.len() as u32).to_le_bytes());
    out.extend_from_slice(label);
    for j in 0..cols {
        for i in 0..n {
            out.extend_from_slice(&set.states[(i, j)].to_le_bytes());
        }
    }
    out
}

/// Parse the binary container; rejects wrong magic/version, truncation and
/// trailing bytes.
pub fn snapshot_from_bytes(bytes: &[u8]) -> Result<SnapshotSet> {
    let mut r = bytes;
    let magic = read_exact::<5>(&mut r, "magic")?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(Error::Format("wrong magic bytes".into()));
    }
    let tag = read_exact::<1>(&mut r, "endian tag")?[0];
    if tag != SNAPSHOT_ENDIAN_TAG {
        return Err(Error::Format(format!("unsupported byte-order tag {tag:#x}")));
    }
    let version = read_exact::<1>(&mut r, "version")?[0];
    if version != SNAPSHOT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let _reserved = read_exact::<1>(&mut r, "reserved byte")?;
    let n = read_u64(&mut r, "state dimension")? as usize;
    let cols = read_u64(&mut r, "column count")? as usize;
    let dt = read_f64(&mut r, "time step")?;
    let p = read_u64(&mut r, "parameter dimension")? as usize;
    if n == 0 || cols == 0 {
        return Err(Error::Format(format!("{n}x{cols} snapshot matrix")));
    }
    if n.checked_mul(cols).and_then(|c| c.checked_mul(8)).is_none() {
        return Err(Error::Format("payload size overflows".into()));
    }
    let mut theta = Vec::with_capacity(p);
    for i in 0..p {
        theta.push(read_f64(&mut r, &format!("parameter {i}"))?);
    }
    let label_len = u32::from_le_bytes(read_exact::<4>(&mut r, "label length")?) as usize;
    if r.len() < label_len {
        return Err(Error::Format("truncated label".into()));
    }
    let (label_bytes, rest) = r.split_at(label_len);
    let label = std::str::from_utf8(label_bytes)
        .map_err(|e| Error::Format(format!("label is not UTF-8: {e}")))?
        .to_string();
    r = rest;

    let want = n * cols * 8;
    if r.len() != want {
        return Err(Error::Format(format!(
            "payload holds {} bytes, header promises {want}",
            r.len()
        )));
    }
    let mut states = RealMat::zeros(n, cols);
    let mut at = 0usize;
    for j in 0..cols {
        for i in 0..n {
            states[(i, j)] = f64::from_le_bytes(r[at..at + 8].try_into().unwrap());
            at += 8;
        }
    }
    SnapshotSet::new(states, dt, theta, label)
}

/// Write a snapshot file.
pub fn write_snapshot(path: &Path, set: &SnapshotSet) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&snapshot_to_bytes(set))?;
    Ok(())
}

/// Read a snapshot file.
pub fn read_snapshot(path: &Path) -> Result<SnapshotSet> {
    let bytes = std::fs::read(path)?;
    snapshot_from_bytes(&bytes)
}

/// Dense real matrix in file form, column-major data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatData {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatData {
    pub fn from_mat(m: &RealMat) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                data.push(m[(i, j)]);
            }
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    pub fn to_mat(&self) -> Result<RealMat> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::Format(format!(
                "matrix data holds {} values for a {}x{} shape",
                self.data.len(),
                self.rows,
                self.cols
            )));
        }
        Ok(Mat::from_fn(self.rows, self.cols, |i, j| {
            self.data[j * self.rows + i]
        }))
    }
}

/// Dense complex matrix in file form, column-major, split components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CMatData {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl CMatData {
    pub fn from_mat(m: &ComplexMat) -> Self {
        let size = m.nrows() * m.ncols();
        let mut re = Vec::with_capacity(size);
        let mut im = Vec::with_capacity(size);
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                re.push(m[(i, j)].re);
                im.push(m[(i, j)].im);
            }
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            re,
            im,
        }
    }

    pub fn to_mat(&self) -> Result<ComplexMat> {
        if self.re.len() != self.rows * self.cols || self.im.len() != self.re.len() {
            return Err(Error::Format(format!(
                "complex matrix data holds {}/{} values for a {}x{} shape",
                self.re.len(),
                self.im.len(),
                self.rows,
                self.cols
            )));
        }
        Ok(Mat::from_fn(self.rows, self.cols, |i, j| {
            let at = j * self.rows + i;
            c64::new(self.re[at], self.im[at])
        }))
    }
}

fn cvec_to_parts(v: &[c64]) -> (Vec<f64>, Vec<f64>) {
    (v.iter().map(|z| z.re).collect(), v.iter().map(|z| z.im).collect())
}

fn parts_to_cvec(re: &[f64], im: &[f64]) -> Result<Vec<c64>> {
    if re.len() != im.len() {
        return Err(Error::Format("mismatched complex vector parts".into()));
    }
    Ok(re.iter().zip(im).map(|(&r, &i)| c64::new(r, i)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DmdModelData {
    pub atilde: MatData,
    pub u_r: MatData,
    pub phi: CMatData,
    pub lambda_re: Vec<f64>,
    pub lambda_im: Vec<f64>,
    pub omega_re: Vec<f64>,
    pub omega_im: Vec<f64>,
    pub dt: f64,
    pub rank: usize,
    pub singular_values: Vec<f64>,
    pub discarded_energy: f64,
    pub train_residual: f64,
    pub warnings: Vec<Warning>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiDmdModelData {
    pub atilde: MatData,
    pub btilde: Vec<MatData>,
    pub u_hat: MatData,
    pub dt: f64,
    pub param_map: ParamMap,
    pub rank_tilde: usize,
    pub rank_hat: usize,
    pub meta: TrainingMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackedModelData {
    pub train_thetas: Vec<Vec<f64>>,
    pub param_map: ParamMap,
    pub u_r: MatData,
    pub atilde: MatData,
    pub lambda_re: Vec<f64>,
    pub lambda_im: Vec<f64>,
    pub omega_re: Vec<f64>,
    pub omega_im: Vec<f64>,
    pub modes: Vec<CMatData>,
    pub dt: f64,
    pub rank: usize,
    pub scheme: InterpScheme,
    pub warnings: Vec<Warning>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RkoiModelData {
    pub train_thetas: Vec<Vec<f64>>,
    pub param_map: ParamMap,
    pub u_r: MatData,
    pub operators: Vec<MatData>,
    pub dt: f64,
    pub rank: usize,
    pub scheme: InterpScheme,
    pub warnings: Vec<Warning>,
}

/// Any fitted model, in file form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelData {
    Dmd(DmdModelData),
    Pidmd(PiDmdModelData),
    Stacked(StackedModelData),
    Rkoi(RkoiModelData),
}

/// JSON model container with format/version markers and the hash of the
/// run configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub model: ModelData,
}

impl ModelFile {
    pub fn new(model: ModelData, config_hash: String) -> Self {
        Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            config_hash,
            model,
        }
    }

    pub fn method_name(&self) -> &'static str {
        match self.model {
            ModelData::Dmd(_) => "dmd",
            ModelData::Pidmd(_) => "pidmd",
            ModelData::Stacked(_) => "stacked",
            ModelData::Rkoi(_) => "rkoi",
        }
    }
}

impl From<&DmdModel> for DmdModelData {
    fn from(m: &DmdModel) -> Self {
        let (lambda_re, lambda_im) = cvec_to_parts(&m.lambda);
        let (omega_re, omega_im) = cvec_to_parts(&m.omega);
        Self {
            atilde: MatData::from_mat(&m.atilde),
            u_r: MatData::from_mat(&m.u_r),
            phi: CMatData::from_mat(&m.phi),
            lambda_re,
            lambda_im,
            omega_re,
            omega_im,
            dt: m.dt,
            rank: m.rank,
            singular_values: m.singular_values.clone(),
            discarded_energy: m.discarded_energy,
            train_residual: m.train_residual,
            warnings: m.warnings.clone(),
        }
    }
}

impl DmdModelData {
    pub fn to_model(&self) -> Result<DmdModel> {
        Ok(DmdModel {
            atilde: self.atilde.to_mat()?,
            u_r: self.u_r.to_mat()?,
            phi: self.phi.to_mat()?,
            lambda: parts_to_cvec(&self.lambda_re, &self.lambda_im)?,
            omega: parts_to_cvec(&self.omega_re, &self.omega_im)?,
            dt: self.dt,
            rank: self.rank,
            singular_values: self.singular_values.clone(),
            discarded_energy: self.discarded_energy,
            train_residual: self.train_residual,
            warnings: self.warnings.clone(),
        })
    }
}

impl From<&PiDmdModel> for PiDmdModelData {
    fn from(m: &PiDmdModel) -> Self {
        Self {
            atilde: MatData::from_mat(&m.atilde),
            btilde: m.btilde.iter().map(MatData::from_mat).collect(),
            u_hat: MatData::from_mat(&m.u_hat),
            dt: m.dt,
            param_map: m.param_map.clone(),
            rank_tilde: m.rank_tilde,
            rank_hat: m.rank_hat,
            meta: m.meta.clone(),
        }
    }
}

impl PiDmdModelData {
    pub fn to_model(&self) -> Result<PiDmdModel> {
        Ok(PiDmdModel {
            atilde: self.atilde.to_mat()?,
            btilde: self
                .btilde
                .iter()
                .map(|b| b.to_mat())
                .collect::<Result<Vec<_>>>()?,
            u_hat: self.u_hat.to_mat()?,
            dt: self.dt,
            param_map: self.param_map.clone(),
            rank_tilde: self.rank_tilde,
            rank_hat: self.rank_hat,
            meta: self.meta.clone(),
        })
    }
}

impl From<&StackedDmdModel> for StackedModelData {
    fn from(m: &StackedDmdModel) -> Self {
        let (lambda_re, lambda_im) = cvec_to_parts(&m.lambda);
        let (omega_re, omega_im) = cvec_to_parts(&m.omega);
        Self {
            train_thetas: m.train_thetas.clone(),
            param_map: m.param_map.clone(),
            u_r: MatData::from_mat(&m.u_r),
            atilde: MatData::from_mat(&m.atilde),
            lambda_re,
            lambda_im,
            omega_re,
            omega_im,
            modes: m.modes.iter().map(CMatData::from_mat).collect(),
            dt: m.dt,
            rank: m.rank,
            scheme: m.scheme,
            warnings: m.warnings.clone(),
        }
    }
}

impl StackedModelData {
    pub fn to_model(&self) -> Result<StackedDmdModel> {
        Ok(StackedDmdModel {
            train_thetas: self.train_thetas.clone(),
            param_map: self.param_map.clone(),
            u_r: self.u_r.to_mat()?,
            atilde: self.atilde.to_mat()?,
            lambda: parts_to_cvec(&self.lambda_re, &self.lambda_im)?,
            omega: parts_to_cvec(&self.omega_re, &self.omega_im)?,
            modes: self
                .modes
                .iter()
                .map(|m| m.to_mat())
                .collect::<Result<Vec<_>>>()?,
            dt: self.dt,
            rank: self.rank,
            scheme: self.scheme,
            warnings: self.warnings.clone(),
        })
    }
}

impl From<&ReducedOpInterpModel> for RkoiModelData {
    fn from(m: &ReducedOpInterpModel) -> Self {
        Self {
            train_thetas: m.train_thetas.clone(),
            param_map: m.param_map.clone(),
            u_r: MatData::from_mat(&m.u_r),
            operators: m.operators.iter().map(MatData::from_mat).collect(),
            dt: m.dt,
            rank: m.rank,
            scheme: m.scheme,
            warnings: m.warnings.clone(),
        }
    }
}

impl RkoiModelData {
    pub fn to_model(&self) -> Result<ReducedOpInterpModel> {
        Ok(ReducedOpInterpModel {
            train_thetas: self.train_thetas.clone(),
            param_map: self.param_map.clone(),
            u_r: self.u_r.to_mat()?,
            operators: self
                .operators
                .iter()
                .map(|o| o.to_mat())
                .collect::<Result<Vec<_>>>()?,
            dt: self.dt,
            rank: self.rank,
            scheme: self.scheme,
            warnings: self.warnings.clone(),
        })
    }
}

/// Serialize a model file to canonical JSON text (stable field order,
/// shortest round-trip float form).
pub fn model_to_string(file: &ModelFile) -> Result<String> {
    serde_json::to_string_pretty(file)
        .map_err(|e| Error::Format(format!("model serialization failed: {e}")))
}

/// Write a model file.
pub fn write_model(path: &Path, file: &ModelFile) -> Result<()> {
    std::fs::write(path, model_to_string(file)?)?;
    Ok(())
}

/// Read a model file; rejects unknown fields, wrong format marker or
/// unsupported version.
pub fn read_model(path: &Path) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path)?;
    let file: ModelFile =
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("model parse: {e}")))?;
    if file.format != MODEL_FORMAT {
        return Err(Error::Format(format!("format marker '{}'", file.format)));
    }
    if file.version != MODEL_VERSION {
        return Err(Error::Format(format!("unsupported model version {}", file.version)));
    }
    Ok(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_set() -> SnapshotSet {
        let states = Mat::from_fn(3, 4, |i, j| (i * 4 + j) as f64 * 0.25 - 1.0);
        SnapshotSet::new(states, 0.05, vec![0.01, 7.5], "sample".into()).unwrap()
    }

    #[test]
    fn snapshot_header_layout_is_frozen() {
        let set = sample_set();
        let bytes = snapshot_to_bytes(&set);
        assert_eq!(&bytes[0..5], b"PDMD1");
        assert_eq!(bytes[5], b'L');
        assert_eq!(bytes[6], 1);
        assert_eq!(bytes[7], 0);
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 4);
        assert_eq!(f64::from_le_bytes(bytes[24..32].try_into().unwrap()), 0.05);
        assert_eq!(u64::from_le_bytes(bytes[32..40].try_into().unwrap()), 2);
        assert_eq!(f64::from_le_bytes(bytes[40..48].try_into().unwrap()), 0.01);
        assert_eq!(f64::from_le_bytes(bytes[48..56].try_into().unwrap()), 7.5);
        assert_eq!(u32::from_le_bytes(bytes[56..60].try_into().unwrap()), 6);
        assert_eq!(&bytes[60..66], b"sample");
        // First payload double is states(0, 0).
        assert_eq!(
            f64::from_le_bytes(bytes[66..74].try_into().unwrap()),
            set.states[(0, 0)]
        );
        assert_eq!(bytes.len(), 66 + 8 * 12);
    }

    #[test]
    fn snapshot_round_trip_is_byte_identical() {
        let set = sample_set();
        let bytes = snapshot_to_bytes(&set);
        let back = snapshot_from_bytes(&bytes).unwrap();
        assert_eq!(snapshot_to_bytes(&back), bytes);
        assert_eq!(back.label, "sample");
        assert_eq!(back.theta, vec![0.01, 7.5]);
    }

    #[test]
    fn snapshot_parser_rejects_corruption() {
        let set = sample_set();
        let good = snapshot_to_bytes(&set);

        let mut wrong_magic = good.clone();
        wrong_magic[0] = b'X';
        assert!(matches!(
            snapshot_from_bytes(&wrong_magic),
            Err(Error::Format(_))
        ));

        let mut wrong_tag = good.clone();
        wrong_tag[5] = b'B';
        assert!(snapshot_from_bytes(&wrong_tag).is_err());

        let truncated = &good[..good.len() - 3];
        assert!(snapshot_from_bytes(truncated).is_err());

        let mut trailing = good.clone();
        trailing.push(0);
        assert!(snapshot_from_bytes(&trailing).is_err());

        let mut nan_payload = good;
        let at = 66;
        nan_payload[at..at + 8].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(snapshot_from_bytes(&nan_payload).is_err());
    }

    #[test]
    fn model_file_round_trip_is_byte_identical() {
        use crate::dmd::fit_dmd_set;
        let set = sample_set();
        let model = fit_dmd_set(&set, 2).unwrap();
        let file = ModelFile::new(ModelData::Dmd((&model).into()), "cfg".into());
        let text = model_to_string(&file).unwrap();
        let back: ModelFile = serde_json::from_str(&text).unwrap();
        assert_eq!(model_to_string(&back).unwrap(), text);
        assert_eq!(back, file);
        // The reloaded model predicts identically.
        let reloaded = match &back.model {
            ModelData::Dmd(d) => d.to_model().unwrap(),
            _ => unreachable!(),
        };
        let x0 = vec![1.0, -0.5, 0.25];
        let a = crate::dmd::predict_dmd(&model, &x0, 5).unwrap();
        let b = crate::dmd::predict_dmd(&reloaded, &x0, 5).unwrap();
        assert_eq!(
            crate::linalg::frob((&a.states - &b.states).as_ref()),
            0.0,
            "reloaded model must predict bit-identically"
        );
    }

    #[test]
    fn model_reader_rejects_unknown_fields_and_versions() {
        let junk = r#"{"format":"pidmd-model","version":1,"config_hash":"x","model":{"method":"dmd"},"extra":1}"#;
        assert!(serde_json::from_str::<ModelFile>(junk).is_err());
    }
}
