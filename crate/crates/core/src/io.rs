//! JSON model and parameter files, and seeded random test systems.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fast_apply::StackParams;
use crate::grammians::{solve_dual_stein, spectral_radius};
use crate::hoon::HoonParams;
use crate::otson::{family_for, otson_domain_check, OtsonParams, BOUNDARY_TOL};
use crate::pair::OutputPair;
use crate::rotations::OrpKind;

pub const FORMAT_VERSION: u32 = 1;
const MAX_RESAMPLES: usize = 8;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub provenance: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub n: usize,
    pub d: usize,
    #[serde(default)]
    pub m: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<Vec<f64>>>,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub dd: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub metadata: Metadata,
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(name: &str, rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<DMatrix<f64>> {
    if rows.len() != nrows {
        return Err(Error::Dimension(format!("{name} has {} rows, expected {nrows}", rows.len())));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != ncols {
            return Err(Error::Dimension(format!("{name} row {} has {} entries, expected {ncols}", i + 1, r.len())));
        }
        if let Some(j) = r.iter().position(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("{name}[{},{}] is not finite", i + 1, j + 1)));
        }
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl ModelFile {
    pub fn from_pair(
        pair: &OutputPair,
        b: Option<&DMatrix<f64>>,
        dd: Option<&DMatrix<f64>>,
        metadata: Metadata,
    ) -> Self {
        let m = b.map(|b| b.ncols()).or(dd.map(|x| x.ncols())).unwrap_or(0);
        Self {
            format_version: FORMAT_VERSION,
            n: pair.n(),
            d: pair.d(),
            m,
            a: to_rows(pair.a()),
            c: to_rows(pair.c()),
            b: b.map(to_rows),
            dd: dd.map(to_rows),
            metadata,
        }
    }

    /// Check declared dimensions against the matrices.
    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Parse(format!("unsupported format_version {}", self.format_version)));
        }
        self.a_matrix()?;
        self.c_matrix()?;
        self.b_matrix()?;
        self.d_matrix()?;
        Ok(())
    }

    pub fn a_matrix(&self) -> Result<DMatrix<f64>> {
        from_rows("A", &self.a, self.n, self.n)
    }

    pub fn c_matrix(&self) -> Result<DMatrix<f64>> {
        from_rows("C", &self.c, self.d, self.n)
    }

    pub fn b_matrix(&self) -> Result<Option<DMatrix<f64>>> {
        self.b.as_ref().map(|b| from_rows("B", b, self.n, self.m)).transpose()
    }

    pub fn d_matrix(&self) -> Result<Option<DMatrix<f64>>> {
        self.dd.as_ref().map(|x| from_rows("D", x, self.d, self.m)).transpose()
    }

    pub fn pair(&self) -> Result<OutputPair> {
        OutputPair::new(self.a_matrix()?, self.c_matrix()?)
    }

    /// Same model with `(A, C)` replaced and `B` transformed alongside.
    pub fn with_pair(&self, pair: &OutputPair, b: Option<DMatrix<f64>>, provenance: &str) -> Self {
        let mut meta = self.metadata.clone();
        if !provenance.is_empty() {
            meta.provenance = if meta.provenance.is_empty() {
                provenance.to_string()
            } else {
                format!("{} | {provenance}", meta.provenance)
            };
        }
        let dd = self.d_matrix().ok().flatten();
        let mut out = Self::from_pair(pair, b.as_ref(), dd.as_ref(), meta);
        out.m = self.m;
        out
    }
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text)
        .map_err(|e| Error::Parse(format!("{what}: {e} (line {}, column {})", e.line(), e.column())))
}

pub fn parse_model(text: &str) -> Result<ModelFile> {
    let model: ModelFile = parse_json(text, "model file")?;
    model.validate()?;
    Ok(model)
}

pub fn read_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    parse_model(&fs::read_to_string(path)?)
}

fn check_finite(rows: &[Vec<f64>], name: &str) -> Result<()> {
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Domain(format!("{name} has non-finite entries")));
    }
    Ok(())
}

/// Shortest decimal text that parses back to the same doubles.
pub fn model_to_string(model: &ModelFile) -> Result<String> {
    check_finite(&model.a, "A")?;
    check_finite(&model.c, "C")?;
    if let Some(b) = &model.b {
        check_finite(b, "B")?;
    }
    if let Some(x) = &model.dd {
        check_finite(x, "D")?;
    }
    let mut s = serde_json::to_string_pretty(model).map_err(|e| Error::Parse(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_model(path: impl AsRef<Path>, model: &ModelFile) -> Result<()> {
    fs::write(path, model_to_string(model)?)?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Otson,
    Hoon,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamFile {
    pub format_version: u32,
    pub kind: ParamKind,
    pub n: usize,
    pub d: usize,
    /// One of `q1`, `q2`, `q3`, `householder`.
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Flattened angles, stage by stage.
    pub thetas: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_sign: Option<f64>,
    pub strict: bool,
}

pub fn kind_name(kind: OrpKind) -> &'static str {
    match kind {
        OrpKind::Q1 => "q1",
        OrpKind::Q2 => "q2",
        OrpKind::Q3 => "q3",
        OrpKind::Householder => "householder",
    }
}

pub fn parse_kind(name: &str) -> Result<OrpKind> {
    match name.to_ascii_lowercase().as_str() {
        "q1" => Ok(OrpKind::Q1),
        "q2" => Ok(OrpKind::Q2),
        "q3" => Ok(OrpKind::Q3),
        "householder" => Ok(OrpKind::Householder),
        other => Err(Error::Parse(format!("unknown family '{other}'"))),
    }
}

impl ParamFile {
    pub fn from_params(params: &StackParams) -> Self {
        match params {
            StackParams::Otson(p) => Self {
                format_version: FORMAT_VERSION,
                kind: ParamKind::Otson,
                n: p.n(),
                d: p.d(),
                family: kind_name(p.family().kind()).into(),
                gamma: None,
                thetas: p.flat(),
                final_sign: None,
                strict: otson_domain_check(p, BOUNDARY_TOL) == crate::otson::DomainStatus::Strict,
            },
            StackParams::Hoon(p) => Self {
                format_version: FORMAT_VERSION,
                kind: ParamKind::Hoon,
                n: p.n(),
                d: p.d(),
                family: kind_name(p.family().kind()).into(),
                gamma: Some(p.gamma()),
                thetas: p.flat(),
                final_sign: (p.final_sign() != 1.0).then_some(p.final_sign()),
                strict: crate::hoon::hoon_domain_check(p, BOUNDARY_TOL) == crate::otson::DomainStatus::Strict,
            },
        }
    }

    pub fn to_params(&self) -> Result<StackParams> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Parse(format!("unsupported format_version {}", self.format_version)));
        }
        if self.thetas.iter().any(|t| !t.is_finite()) {
            return Err(Error::Domain("thetas contain non-finite values".into()));
        }
        let kind = parse_kind(&self.family)?;
        match self.kind {
            ParamKind::Otson => {
                if self.gamma.is_some() {
                    return Err(Error::Parse("gamma is only meaningful for hoon parameters".into()));
                }
                let fam = family_for(kind, self.d)?;
                Ok(StackParams::Otson(OtsonParams::from_flat(self.n, self.d, fam, &self.thetas)?))
            }
            ParamKind::Hoon => {
                let gamma = self.gamma.ok_or_else(|| Error::Missing("hoon parameters need gamma".into()))?;
                let sign = self.final_sign.unwrap_or(1.0);
                Ok(StackParams::Hoon(HoonParams::from_flat(self.n, self.d, kind, gamma, &self.thetas, sign)?))
            }
        }
    }
}

pub fn parse_params(text: &str) -> Result<ParamFile> {
    let p: ParamFile = parse_json(text, "parameter file")?;
    p.to_params()?;
    Ok(p)
}

pub fn read_params(path: impl AsRef<Path>) -> Result<ParamFile> {
    parse_params(&fs::read_to_string(path)?)
}

pub fn params_to_string(p: &ParamFile) -> Result<String> {
    let mut s = serde_json::to_string_pretty(p).map_err(|e| Error::Parse(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_params(path: impl AsRef<Path>, p: &ParamFile) -> Result<()> {
    fs::write(path, params_to_string(p)?)?;
    Ok(())
}

fn normal_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

/// Random stable observable system with `ρ(A) = rho_target`.
pub fn random_system(n: usize, d: usize, m: usize, rho_target: f64, seed: u64) -> Result<ModelFile> {
    if n == 0 || d == 0 || d > n {
        return Err(Error::Dimension(format!("need 1 ≤ d ≤ n, got n = {n}, d = {d}")));
    }
    if !(rho_target > 0.0 && rho_target < 1.0) {
        return Err(Error::Domain(format!("rho target {rho_target} is outside (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_RESAMPLES {
        let a0 = normal_matrix(&mut rng, n, n);
        let c = normal_matrix(&mut rng, d, n);
        let b = normal_matrix(&mut rng, n, m);
        let rho = spectral_radius(&a0)?;
        if rho < 1e-8 {
            continue;
        }
        let a = a0 * (rho_target / rho);
        let p = solve_dual_stein(&a, &c)?;
        let min = nalgebra::SymmetricEigen::new(p).eigenvalues.min();
        if min <= 1e-10 {
            continue;
        }
        let pair = OutputPair::new(a, c)?;
        let meta = Metadata { seed: Some(seed), provenance: format!("random n={n} d={d} m={m} rho={rho_target}") };
        let bm = (m > 0).then_some(b);
        return Ok(ModelFile::from_pair(&pair, bm.as_ref(), None, meta));
    }
    Err(Error::Unobservable(format!("no observable sample in {MAX_RESAMPLES} draws")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_round_trip_is_exact() {
        let m = random_system(5, 2, 3, 0.7, 11).unwrap();
        let text = model_to_string(&m).unwrap();
        let back = parse_model(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(model_to_string(&back).unwrap(), text);
    }

    #[test]
    fn wrong_row_count_names_matrix() {
        let text = r#"{"format_version":1,"n":2,"d":1,"m":0,"A":[[0,0],[0,0],[0,0]],"C":[[1,0]]}"#;
        let err = parse_model(text).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
        assert!(err.to_string().contains('A'));
    }

    #[test]
    fn parse_error_has_location() {
        let err = parse_model("{\n  \"n\": 2,\n  oops\n}").unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
        assert!(err.to_string().contains("line 3"));
    }

    #[test]
    fn random_is_deterministic_and_scaled() {
        let x = random_system(6, 2, 1, 0.5, 3).unwrap();
        let y = random_system(6, 2, 1, 0.5, 3).unwrap();
        assert_eq!(x, y);
        let rho = spectral_radius(&x.a_matrix().unwrap()).unwrap();
        assert!((rho - 0.5).abs() < 1e-6);
        let sq = random_system(3, 3, 0, 0.9, 4).unwrap();
        assert!(sq.b.is_none());
    }
}
