//! Named-tensor parameter files.
//!
//! ```json
//! { "schema_version": 1, "kind": "model", "config": { ... },
//!   "tensors": { "out_proj.weight": { "shape": [5, 6], "data": [ ... ] } } }
//! ```
//!
//! `data` is either a JSON number array or a base64 string of little-endian
//! `f64` values.

use std::collections::BTreeMap;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::layers::{Conv1d, ElmanRnn, Linear, LstmCell};
use super::{Attention, Model, ModelConfig};
use crate::error::{bail, Result};
use crate::linalg::Matrix;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TensorData {
    Values(Vec<f64>),
    Base64(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: TensorData,
}

impl Tensor {
    fn from_values(shape: Vec<usize>, values: &[f64], base64: bool) -> Self {
        let data = if base64 {
            let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
            TensorData::Base64(STANDARD.encode(bytes))
        } else {
            TensorData::Values(values.to_vec())
        };
        Self { shape, data }
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        let values = match &self.data {
            TensorData::Values(v) => v.clone(),
            TensorData::Base64(s) => {
                let bytes = STANDARD.decode(s).map_err(|e| crate::Error::Schema(format!("bad base64 tensor: {e}")))?;
                if bytes.len() % 8 != 0 {
                    bail!(Schema, "base64 tensor length {} is not a multiple of 8", bytes.len());
                }
                bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect()
            }
        };
        let expected: usize = self.shape.iter().product();
        if values.len() != expected {
            bail!(Schema, "tensor of shape {:?} holds {} values", self.shape, values.len());
        }
        Ok(values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub kind: String,
    pub config: ModelConfig,
    pub tensors: BTreeMap<String, Tensor>,
}

struct Writer {
    map: BTreeMap<String, Tensor>,
    base64: bool,
}

impl Writer {
    fn matrix(&mut self, name: &str, m: &Matrix) {
        self.map.insert(name.to_owned(), Tensor::from_values(vec![m.rows(), m.cols()], m.as_slice(), self.base64));
    }

    fn vector(&mut self, name: &str, v: &[f64]) {
        self.map.insert(name.to_owned(), Tensor::from_values(vec![v.len()], v, self.base64));
    }

    fn conv(&mut self, name: &str, c: &Conv1d) {
        let shape = vec![c.out_channels(), c.in_channels(), c.width];
        self.map.insert(format!("{name}.weight"), Tensor::from_values(shape, c.weight.as_slice(), self.base64));
        self.vector(&format!("{name}.bias"), &c.bias);
    }

    fn lstm(&mut self, name: &str, l: &LstmCell) {
        self.matrix(&format!("{name}.w_ih"), &l.w_ih);
        self.matrix(&format!("{name}.w_hh"), &l.w_hh);
        self.vector(&format!("{name}.bias"), &l.bias);
    }
}

struct Reader<'a> {
    map: &'a BTreeMap<String, Tensor>,
}

impl Reader<'_> {
    fn get(&self, name: &str) -> Result<&Tensor> {
        self.map.get(name).ok_or_else(|| crate::Error::Schema(format!("missing tensor {name}")))
    }

    fn matrix(&self, name: &str) -> Result<Matrix> {
        let t = self.get(name)?;
        let [r, c] = t.shape[..] else {
            bail!(Schema, "tensor {name} must be 2-D, has shape {:?}", t.shape);
        };
        Matrix::from_vec(r, c, t.values()?)
    }

    fn vector(&self, name: &str) -> Result<Vec<f64>> {
        let t = self.get(name)?;
        if t.shape.len() != 1 {
            bail!(Schema, "tensor {name} must be 1-D, has shape {:?}", t.shape);
        }
        let v = t.values()?;
        if v.iter().any(|x| !x.is_finite()) {
            bail!(Schema, "tensor {name} has non-finite values");
        }
        Ok(v)
    }

    fn conv(&self, name: &str) -> Result<Conv1d> {
        let t = self.get(&format!("{name}.weight"))?;
        let [o, i, w] = t.shape[..] else {
            bail!(Schema, "tensor {name}.weight must be 3-D, has shape {:?}", t.shape);
        };
        Ok(Conv1d { weight: Matrix::from_vec(o, i * w, t.values()?)?, bias: self.vector(&format!("{name}.bias"))?, width: w })
    }

    fn lstm(&self, name: &str) -> Result<LstmCell> {
        Ok(LstmCell {
            w_ih: self.matrix(&format!("{name}.w_ih"))?,
            w_hh: self.matrix(&format!("{name}.w_hh"))?,
            bias: self.vector(&format!("{name}.bias"))?,
        })
    }
}

impl Model {
    pub fn to_file(&self, base64: bool) -> ModelFile {
        let mut w = Writer { map: BTreeMap::new(), base64 };
        w.matrix("asr_encoder.w_ih", &self.asr_encoder.w_ih);
        w.matrix("asr_encoder.w_hh", &self.asr_encoder.w_hh);
        w.vector("asr_encoder.bias", &self.asr_encoder.bias);
        for (i, layer) in self.spk_encoder.iter().enumerate() {
            w.conv(&format!("spk_encoder.{i}"), layer);
        }
        w.matrix("embedding", &self.embedding);
        w.lstm("decoder_rnn", &self.decoder_rnn);
        let a = &self.attention;
        w.matrix("attention.w_q", &a.w_q);
        w.matrix("attention.w_k", &a.w_k);
        w.matrix("attention.w_f", &a.w_f);
        w.vector("attention.bias", &a.bias);
        w.vector("attention.v", &a.v);
        w.conv("attention.loc_conv", &a.loc_conv);
        w.lstm("query_rnn", &self.query_rnn);
        w.matrix("w_d", &self.w_d);
        w.lstm("out_rnn", &self.out_rnn);
        w.matrix("out_proj.weight", &self.out_proj.weight);
        w.vector("out_proj.bias", &self.out_proj.bias);
        ModelFile { schema_version: MODEL_SCHEMA_VERSION, kind: "model".into(), config: self.config.clone(), tensors: w.map }
    }

    pub fn from_file(file: &ModelFile) -> Result<Self> {
        if file.kind != "model" {
            bail!(Schema, "expected a model file, got kind {:?}", file.kind);
        }
        if file.schema_version != MODEL_SCHEMA_VERSION {
            bail!(Schema, "unsupported model schema version {}", file.schema_version);
        }
        let r = Reader { map: &file.tensors };
        let spk_encoder = (0..file.config.spk_hidden.len() + 1).map(|i| r.conv(&format!("spk_encoder.{i}"))).collect::<Result<_>>()?;
        let model = Self {
            config: file.config.clone(),
            asr_encoder: ElmanRnn {
                w_ih: r.matrix("asr_encoder.w_ih")?,
                w_hh: r.matrix("asr_encoder.w_hh")?,
                bias: r.vector("asr_encoder.bias")?,
            },
            spk_encoder,
            embedding: r.matrix("embedding")?,
            decoder_rnn: r.lstm("decoder_rnn")?,
            attention: Attention {
                w_q: r.matrix("attention.w_q")?,
                w_k: r.matrix("attention.w_k")?,
                w_f: r.matrix("attention.w_f")?,
                bias: r.vector("attention.bias")?,
                v: r.vector("attention.v")?,
                loc_conv: r.conv("attention.loc_conv")?,
            },
            query_rnn: r.lstm("query_rnn")?,
            w_d: r.matrix("w_d")?,
            out_rnn: r.lstm("out_rnn")?,
            out_proj: Linear::new(r.matrix("out_proj.weight")?, r.vector("out_proj.bias")?)?,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self, base64: bool) -> Result<String> {
        Ok(serde_json::to_string(&self.to_file(base64))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| crate::Error::Schema(format!("model file: {e}")))?;
        Self::from_file(&file)
    }
}
