//! On-disk JSON form of a fitted model.
//!
//! Matrices are row-major arrays written with 17 significant digits, so every
//! `f64` survives a save/load cycle unchanged. `digest` is the SHA-256 of the
//! compact JSON of `model` and is checked on load.

use std::fs;
use std::path::Path;

use anyhow::{bail, ensure, Context};
use battdmd::dmd::spectrum_of;
use battdmd::{DmdModel, DmdcModel, DmdcOperators, EmbeddingSpec, FittedModel, ModelKind};
use nalgebra::DMatrix;
use serde::ser::Error as _;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::output::sha256_hex;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelVariant {
    Dmd,
    DmdcFull,
    DmdcReduced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    #[serde(serialize_with = "seventeen_digits")]
    pub data: Vec<f64>,
}

fn seventeen_digits<S: Serializer>(data: &[f64], s: S) -> Result<S::Ok, S::Error> {
    let mut text = String::with_capacity(data.len() * 25 + 2);
    text.push('[');
    for (k, x) in data.iter().enumerate() {
        if !x.is_finite() {
            return Err(S::Error::custom(format!(
                "matrix entry {k} is not finite: {x}"
            )));
        }
        if k > 0 {
            text.push(',');
        }
        text.push_str(&format!("{x:.16e}"));
    }
    text.push(']');
    RawValue::from_string(text)
        .map_err(S::Error::custom)?
        .serialize(s)
}

impl Matrix {
    pub fn from_dmatrix(m: &DMatrix<f64>) -> Self {
        let (rows, cols) = m.shape();
        Self {
            rows,
            cols,
            data: m.transpose().as_slice().to_vec(),
        }
    }

    pub fn to_dmatrix(&self) -> anyhow::Result<DMatrix<f64>> {
        ensure!(
            self.data.len() == self.rows * self.cols,
            "matrix declares {}x{} but holds {} entries",
            self.rows,
            self.cols,
            self.data.len()
        );
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Matrices {
    /// `A`, or `At` for the reduced fit.
    pub a: Matrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Matrix>,
    /// Output basis of the reduced fit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<Matrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ranks {
    pub rank: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_output: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagnostics {
    pub fit_residual: f64,
    pub spectral_radius: f64,
    pub train_samples: usize,
    pub snapshots: usize,
    pub dt_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub input_sha256: String,
    pub config_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBody {
    pub kind: ModelKind,
    pub variant: ModelVariant,
    pub embedding: EmbeddingSpec,
    pub ranks: Ranks,
    pub matrices: Matrices,
    pub diagnostics: Diagnostics,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format_version: u32,
    pub digest: String,
    pub model: ModelBody,
}

fn body_digest(body: &ModelBody) -> anyhow::Result<String> {
    Ok(sha256_hex(&serde_json::to_vec(body)?))
}

impl ModelBody {
    pub fn new(
        model: &FittedModel<f64>,
        train_samples: usize,
        dt_s: f64,
        provenance: Provenance,
    ) -> Self {
        let (kind, variant, embedding, ranks, matrices, fit_residual, state) = match model {
            FittedModel::Dmd(d) => (
                ModelKind::Dmd,
                ModelVariant::Dmd,
                d.spec,
                Ranks {
                    rank: d.rank_used,
                    rank_output: None,
                },
                Matrices {
                    a: Matrix::from_dmatrix(&d.a),
                    b: None,
                    basis: None,
                },
                d.fit_residual,
                &d.a,
            ),
            FittedModel::Dmdc(c) => {
                let ranks = Ranks {
                    rank: c.rank_omega,
                    rank_output: c.rank_output,
                };
                let (variant, matrices) = match &c.operators {
                    DmdcOperators::Full { a, b } => (
                        ModelVariant::DmdcFull,
                        Matrices {
                            a: Matrix::from_dmatrix(a),
                            b: Some(Matrix::from_dmatrix(b)),
                            basis: None,
                        },
                    ),
                    DmdcOperators::Reduced {
                        a_tilde,
                        b_tilde,
                        basis,
                    } => (
                        ModelVariant::DmdcReduced,
                        Matrices {
                            a: Matrix::from_dmatrix(a_tilde),
                            b: Some(Matrix::from_dmatrix(b_tilde)),
                            basis: Some(Matrix::from_dmatrix(basis)),
                        },
                    ),
                };
                (
                    ModelKind::Dmdc,
                    variant,
                    c.spec,
                    ranks,
                    matrices,
                    c.fit_residual,
                    c.state_operator(),
                )
            }
        };
        let spec = embedding;
        Self {
            kind,
            variant,
            embedding,
            ranks,
            matrices,
            diagnostics: Diagnostics {
                fit_residual,
                spectral_radius: spectrum_of(state, 0).spectral_radius(),
                train_samples,
                snapshots: spec.columns(train_samples),
                dt_s,
            },
            provenance,
        }
    }

    pub fn to_model(&self) -> anyhow::Result<FittedModel<f64>> {
        let spec = EmbeddingSpec::new(self.embedding.m, self.embedding.ell, self.embedding.tau)?;
        let m = spec.m;
        let a = self.matrices.a.to_dmatrix()?;
        let b = self
            .matrices
            .b
            .as_ref()
            .map(Matrix::to_dmatrix)
            .transpose()?;
        let basis = self
            .matrices
            .basis
            .as_ref()
            .map(Matrix::to_dmatrix)
            .transpose()?;
        let fit_residual = self.diagnostics.fit_residual;
        let need_b = |b: Option<DMatrix<f64>>, rows: usize| -> anyhow::Result<DMatrix<f64>> {
            let b = b.context("DMDc model has no B matrix")?;
            ensure!(
                b.shape() == (rows, spec.ell),
                "B is {}x{}, expected {rows}x{}",
                b.nrows(),
                b.ncols(),
                spec.ell
            );
            Ok(b)
        };
        let model = match (self.kind, self.variant) {
            (ModelKind::Dmd, ModelVariant::Dmd) => {
                ensure!(
                    a.shape() == (m, m),
                    "A is {}x{}, expected {m}x{m}",
                    a.nrows(),
                    a.ncols()
                );
                ensure!(
                    b.is_none() && basis.is_none(),
                    "DMD model carries DMDc matrices"
                );
                FittedModel::Dmd(DmdModel {
                    a,
                    spec,
                    fit_residual,
                    rank_used: self.ranks.rank,
                })
            }
            (ModelKind::Dmdc, ModelVariant::DmdcFull) => {
                ensure!(
                    a.shape() == (m, m),
                    "A is {}x{}, expected {m}x{m}",
                    a.nrows(),
                    a.ncols()
                );
                ensure!(basis.is_none(), "full DMDc model carries an output basis");
                let b = need_b(b, m)?;
                FittedModel::Dmdc(DmdcModel {
                    operators: DmdcOperators::Full { a, b },
                    spec,
                    rank_omega: self.ranks.rank,
                    rank_output: self.ranks.rank_output,
                    fit_residual,
                })
            }
            (ModelKind::Dmdc, ModelVariant::DmdcReduced) => {
                let basis = basis.context("reduced DMDc model has no output basis")?;
                let r = basis.ncols();
                ensure!(
                    basis.nrows() == m,
                    "basis has {} rows, expected {m}",
                    basis.nrows()
                );
                ensure!(
                    a.shape() == (r, r),
                    "At is {}x{}, expected {r}x{r}",
                    a.nrows(),
                    a.ncols()
                );
                let b = need_b(b, r)?;
                FittedModel::Dmdc(DmdcModel {
                    operators: DmdcOperators::Reduced {
                        a_tilde: a,
                        b_tilde: b,
                        basis,
                    },
                    spec,
                    rank_omega: self.ranks.rank,
                    rank_output: self.ranks.rank_output,
                    fit_residual,
                })
            }
            (kind, variant) => bail!("model kind {kind} does not match variant {variant:?}"),
        };
        Ok(model)
    }
}

impl ModelFile {
    pub fn new(model: ModelBody) -> anyhow::Result<Self> {
        Ok(Self {
            format_version: MODEL_FORMAT_VERSION,
            digest: body_digest(&model)?,
            model,
        })
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        ensure!(
            file.format_version == MODEL_FORMAT_VERSION,
            "unsupported model format version {}",
            file.format_version
        );
        let actual = body_digest(&file.model)?;
        ensure!(
            actual == file.digest,
            "model digest mismatch: file says {}, content hashes to {actual}",
            file.digest
        );
        Ok(file)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading model {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("loading model {}", path.display()))
    }
}
