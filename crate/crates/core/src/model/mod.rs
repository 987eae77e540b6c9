//! Speaker-attributed attention encoder-decoder.
//!
//! Per step the decoder runs: recurrent state update from the previous token
//! and context, location-aware attention over the encoded frames, context and
//! speaker-stream pooling, the speaker-query recurrence, cosine attention over
//! the profile inventory, and the output recurrence feeding the token softmax.

pub mod constructed;
pub mod layers;
pub mod params;
mod types;
pub mod vocab;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use types::{DecoderState, EncodedInput, FeatureSequence, SpeakerInventory, SpeakerProfile, StepOutput};
pub use vocab::{Specials, TokenId, Vocabulary};

use crate::error::{bail, Result};
use crate::linalg::{cosine, log_softmax, softmax_unchecked, Matrix};
use layers::{Conv1d, ElmanRnn, Linear, LstmCell};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Raw feature dimension F.
    pub feat_dim: usize,
    /// Raw frames stacked into one encoder frame.
    pub stack: usize,
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub enc_dim: usize,
    pub spk_dim: usize,
    /// Hidden channel counts of the speaker convolution stack.
    pub spk_hidden: Vec<usize>,
    pub spk_kernel: usize,
    pub att_dim: usize,
    pub loc_channels: usize,
    pub loc_width: usize,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("feat_dim", self.feat_dim),
            ("stack", self.stack),
            ("embed_dim", self.embed_dim),
            ("enc_dim", self.enc_dim),
            ("spk_dim", self.spk_dim),
            ("att_dim", self.att_dim),
            ("loc_channels", self.loc_channels),
        ];
        for (name, v) in dims {
            if v == 0 {
                bail!(Config, "{name} must be positive");
            }
        }
        if self.vocab_size < 3 {
            bail!(Config, "vocabulary needs the two reserved symbols and at least one token");
        }
        if self.spk_kernel % 2 == 0 || self.loc_width % 2 == 0 {
            bail!(Config, "convolution widths must be odd");
        }
        if self.spk_hidden.contains(&0) {
            bail!(Config, "speaker encoder channel counts must be positive");
        }
        Ok(())
    }

    fn stacked_dim(&self) -> usize {
        self.feat_dim * self.stack
    }
}

/// Location-aware additive attention:
/// `e_t = v · tanh(W_q u + W_k h_t + W_f f_t + b)`, `f = conv(α_prev)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Attention {
    pub w_q: Matrix,
    pub w_k: Matrix,
    pub w_f: Matrix,
    pub bias: Vec<f64>,
    pub v: Vec<f64>,
    pub loc_conv: Conv1d,
}

impl Attention {
    fn keys(&self, h_enc: &Matrix) -> Matrix {
        let mut keys = Matrix::zeros(h_enc.rows(), self.w_k.rows());
        for t in 0..h_enc.rows() {
            self.w_k.matvec_acc(h_enc.row(t), keys.row_mut(t));
        }
        keys
    }

    fn weights(&self, u: &[f64], alpha_prev: &[f64], keys: &Matrix) -> Vec<f64> {
        let t_len = keys.rows();
        if t_len == 1 {
            return vec![1.0];
        }
        let mut query = self.bias.clone();
        self.w_q.matvec_acc(u, &mut query);
        let loc = self.loc_conv.forward_signal(alpha_prev);
        let mut pre = vec![0.0; query.len()];
        let energies: Vec<f64> = (0..t_len)
            .map(|t| {
                pre.copy_from_slice(&query);
                for (p, k) in pre.iter_mut().zip(keys.row(t)) {
                    *p += k;
                }
                self.w_f.matvec_acc(loc.row(t), &mut pre);
                pre.iter().zip(&self.v).map(|(p, v)| v * p.tanh()).sum()
            })
            .collect();
        softmax_unchecked(&energies)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub asr_encoder: ElmanRnn,
    /// ReLU between layers, linear output.
    pub spk_encoder: Vec<Conv1d>,
    /// `V × embed_dim`.
    pub embedding: Matrix,
    /// Input `[embedding; c_prev]`.
    pub decoder_rnn: LstmCell,
    pub attention: Attention,
    /// Input `[p; embedding]`.
    pub query_rnn: LstmCell,
    /// `enc_dim × spk_dim`.
    pub w_d: Matrix,
    pub out_rnn: LstmCell,
    pub out_proj: Linear,
}

/// Encoder output with the attention keys precomputed.
#[derive(Debug, Clone)]
pub struct PreparedInput {
    enc: EncodedInput,
    keys: Matrix,
}

impl PreparedInput {
    pub fn encoded(&self) -> &EncodedInput {
        &self.enc
    }
}

/// Cosine attention over the inventory followed by the weighted profile.
pub fn inventory_attention(q: &[f64], inv: &SpeakerInventory) -> Result<(Vec<f64>, Vec<f64>)> {
    if q.len() != inv.dim() {
        bail!(Config, "speaker query has dimension {}, profiles have {}", q.len(), inv.dim());
    }
    let scores = inv.profiles().iter().map(|p| cosine(q, &p.embedding)).collect::<Result<Vec<_>>>()?;
    let beta = softmax_unchecked(&scores);
    let mut d_bar = vec![0.0; inv.dim()];
    for (b, p) in beta.iter().zip(inv.profiles()) {
        for (d, e) in d_bar.iter_mut().zip(&p.embedding) {
            *d += b * e;
        }
    }
    Ok((beta, d_bar))
}

impl Model {
    /// Every parameter uniform in `[-scale, scale]`.
    pub fn random<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R, scale: f64) -> Result<Self> {
        config.validate()?;
        let c = &config;
        let mut spk_encoder = Vec::new();
        let mut cin = c.stacked_dim();
        for &h in c.spk_hidden.iter().chain(std::iter::once(&c.spk_dim)) {
            spk_encoder.push(Conv1d::random(rng, cin, h, c.spk_kernel, scale));
            cin = h;
        }
        let model = Self {
            asr_encoder: ElmanRnn::random(rng, c.stacked_dim(), c.enc_dim, scale),
            spk_encoder,
            embedding: layers::random_matrix(rng, c.vocab_size, c.embed_dim, scale),
            decoder_rnn: LstmCell::random(rng, c.embed_dim + c.enc_dim, c.enc_dim, scale),
            attention: Attention {
                w_q: layers::random_matrix(rng, c.att_dim, c.enc_dim, scale),
                w_k: layers::random_matrix(rng, c.att_dim, c.enc_dim, scale),
                w_f: layers::random_matrix(rng, c.att_dim, c.loc_channels, scale),
                bias: layers::random_vec(rng, c.att_dim, scale),
                v: layers::random_vec(rng, c.att_dim, scale),
                loc_conv: Conv1d::random(rng, 1, c.loc_channels, c.loc_width, scale),
            },
            query_rnn: LstmCell::random(rng, c.spk_dim + c.embed_dim, c.spk_dim, scale),
            w_d: layers::random_matrix(rng, c.enc_dim, c.spk_dim, scale),
            out_rnn: LstmCell::random(rng, c.enc_dim, c.enc_dim, scale),
            out_proj: Linear::random(rng, c.enc_dim, c.vocab_size, scale),
            config,
        };
        model.validate()?;
        Ok(model)
    }

    /// All parameters zero; the caller fills in the weights it needs.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let c = &config;
        let mut spk_encoder = Vec::new();
        let mut cin = c.stacked_dim();
        for &h in c.spk_hidden.iter().chain(std::iter::once(&c.spk_dim)) {
            spk_encoder.push(Conv1d::zeros(cin, h, c.spk_kernel));
            cin = h;
        }
        Ok(Self {
            asr_encoder: ElmanRnn::zeros(c.stacked_dim(), c.enc_dim),
            spk_encoder,
            embedding: Matrix::zeros(c.vocab_size, c.embed_dim),
            decoder_rnn: LstmCell::zeros(c.embed_dim + c.enc_dim, c.enc_dim),
            attention: Attention {
                w_q: Matrix::zeros(c.att_dim, c.enc_dim),
                w_k: Matrix::zeros(c.att_dim, c.enc_dim),
                w_f: Matrix::zeros(c.att_dim, c.loc_channels),
                bias: vec![0.0; c.att_dim],
                v: vec![0.0; c.att_dim],
                loc_conv: Conv1d::zeros(1, c.loc_channels, c.loc_width),
            },
            query_rnn: LstmCell::zeros(c.spk_dim + c.embed_dim, c.spk_dim),
            w_d: Matrix::zeros(c.enc_dim, c.spk_dim),
            out_rnn: LstmCell::zeros(c.enc_dim, c.enc_dim),
            out_proj: Linear::zeros(c.enc_dim, c.vocab_size),
            config,
        })
    }

    /// Checks every tensor shape against the configuration.
    pub fn validate(&self) -> Result<()> {
        let c = &self.config;
        c.validate()?;
        let shape = |name: &str, m: &Matrix, rows: usize, cols: usize| -> Result<()> {
            if m.rows() != rows || m.cols() != cols {
                bail!(Config, "{name} is {}x{}, expected {rows}x{cols}", m.rows(), m.cols());
            }
            Ok(())
        };
        shape("asr_encoder.w_ih", &self.asr_encoder.w_ih, c.enc_dim, c.stacked_dim())?;
        shape("asr_encoder.w_hh", &self.asr_encoder.w_hh, c.enc_dim, c.enc_dim)?;
        if self.asr_encoder.bias.len() != c.enc_dim {
            bail!(Config, "asr_encoder.bias has the wrong length");
        }
        if self.spk_encoder.len() != c.spk_hidden.len() + 1 {
            bail!(Config, "speaker encoder has {} layers, expected {}", self.spk_encoder.len(), c.spk_hidden.len() + 1);
        }
        let mut cin = c.stacked_dim();
        for (i, (layer, &h)) in self.spk_encoder.iter().zip(c.spk_hidden.iter().chain(std::iter::once(&c.spk_dim))).enumerate() {
            layer.check(&format!("spk_encoder.{i}"))?;
            if layer.width != c.spk_kernel || layer.in_channels() != cin || layer.out_channels() != h {
                bail!(Config, "spk_encoder.{i} has the wrong shape");
            }
            cin = h;
        }
        shape("embedding", &self.embedding, c.vocab_size, c.embed_dim)?;
        let lstm = |name: &str, cell: &LstmCell, input: usize, hidden: usize| -> Result<()> {
            cell.check(name)?;
            if cell.input_dim() != input || cell.hidden_dim() != hidden {
                bail!(Config, "{name} is {}->{}, expected {input}->{hidden}", cell.input_dim(), cell.hidden_dim());
            }
            Ok(())
        };
        lstm("decoder_rnn", &self.decoder_rnn, c.embed_dim + c.enc_dim, c.enc_dim)?;
        lstm("query_rnn", &self.query_rnn, c.spk_dim + c.embed_dim, c.spk_dim)?;
        lstm("out_rnn", &self.out_rnn, c.enc_dim, c.enc_dim)?;
        let a = &self.attention;
        shape("attention.w_q", &a.w_q, c.att_dim, c.enc_dim)?;
        shape("attention.w_k", &a.w_k, c.att_dim, c.enc_dim)?;
        shape("attention.w_f", &a.w_f, c.att_dim, c.loc_channels)?;
        if a.bias.len() != c.att_dim || a.v.len() != c.att_dim {
            bail!(Config, "attention vectors have the wrong length");
        }
        a.loc_conv.check("attention.loc_conv")?;
        if a.loc_conv.in_channels() != 1 || a.loc_conv.out_channels() != c.loc_channels || a.loc_conv.width != c.loc_width {
            bail!(Config, "attention.loc_conv has the wrong shape");
        }
        shape("w_d", &self.w_d, c.enc_dim, c.spk_dim)?;
        shape("out_proj.weight", &self.out_proj.weight, c.vocab_size, c.enc_dim)?;
        if self.out_proj.bias.len() != c.vocab_size {
            bail!(Config, "out_proj.bias has the wrong length");
        }
        Ok(())
    }

    pub fn vocab_size(&self) -> usize {
        self.config.vocab_size
    }

    /// Groups `stack` consecutive frames into one, zero-padding the tail.
    pub fn stack_frames(&self, x: &FeatureSequence) -> Matrix {
        let (s, f) = (self.config.stack, x.dim());
        let t_out = x.len().div_ceil(s);
        let mut out = Matrix::zeros(t_out, s * f);
        let src = x.frames().as_slice();
        let dst = out.as_mut_slice();
        let n = src.len();
        dst[..n].copy_from_slice(src);
        out
    }

    pub fn encode(&self, x: &FeatureSequence) -> Result<EncodedInput> {
        if x.dim() != self.config.feat_dim {
            bail!(Config, "features have dimension {}, model expects {}", x.dim(), self.config.feat_dim);
        }
        let stacked = self.stack_frames(x);
        let h_enc = self.asr_encoder.forward(&stacked);
        let mut h = stacked;
        let last = self.spk_encoder.len() - 1;
        for (i, layer) in self.spk_encoder.iter().enumerate() {
            h = layer.forward(&h);
            if i < last {
                h.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        EncodedInput::new(h_enc, h, x.frame_shift() * self.config.stack as f64)
    }

    pub fn prepare(&self, enc: EncodedInput) -> Result<PreparedInput> {
        if enc.h_enc().cols() != self.config.enc_dim || enc.h_spk().cols() != self.config.spk_dim {
            bail!(Config, "encoded input does not match the model dimensions");
        }
        let keys = self.attention.keys(enc.h_enc());
        Ok(PreparedInput { enc, keys })
    }

    pub fn encode_prepared(&self, x: &FeatureSequence) -> Result<PreparedInput> {
        self.prepare(self.encode(x)?)
    }

    /// Attention weights for decoder state `u` given the previous row.
    pub fn attend(&self, u: &[f64], alpha_prev: &[f64], enc: &EncodedInput) -> Result<Vec<f64>> {
        if alpha_prev.len() != enc.frames() {
            bail!(Dimension, "previous attention has length {}, input has {} frames", alpha_prev.len(), enc.frames());
        }
        if u.len() != self.config.enc_dim {
            bail!(Dimension, "decoder state has length {}, expected {}", u.len(), self.config.enc_dim);
        }
        let keys = self.attention.keys(enc.h_enc());
        Ok(self.attention.weights(u, alpha_prev, &keys))
    }

    /// Zero recurrent state, uniform attention, previous token = start symbol.
    pub fn initial_state(&self, enc: &EncodedInput, sos: TokenId) -> DecoderState {
        let c = &self.config;
        let t = enc.frames();
        DecoderState {
            u: vec![0.0; c.enc_dim],
            u_cell: vec![0.0; c.enc_dim],
            q: vec![0.0; c.spk_dim],
            q_cell: vec![0.0; c.spk_dim],
            out_h: vec![0.0; c.enc_dim],
            out_cell: vec![0.0; c.enc_dim],
            c_prev: vec![0.0; c.enc_dim],
            alpha_prev: vec![1.0 / t as f64; t],
            y_prev: Some(sos),
        }
    }

    /// One decoding step. The returned state has no previous token until
    /// [`DecoderState::with_token`] commits one.
    pub fn decode_step(&self, state: &DecoderState, input: &PreparedInput, inv: &SpeakerInventory) -> Result<(StepOutput, DecoderState)> {
        let c = &self.config;
        let Some(y_prev) = state.y_prev else {
            bail!(Contract, "decoder state has no committed token");
        };
        if y_prev >= c.vocab_size {
            bail!(Contract, "token id {y_prev} outside vocabulary of {}", c.vocab_size);
        }
        if inv.dim() != c.spk_dim {
            bail!(Config, "profiles have dimension {}, model expects {}", inv.dim(), c.spk_dim);
        }
        let enc = &input.enc;
        if state.alpha_prev.len() != enc.frames() {
            bail!(Dimension, "state attention has length {}, input has {} frames", state.alpha_prev.len(), enc.frames());
        }
        let emb = self.embedding.row(y_prev);

        let mut dec_in = Vec::with_capacity(c.embed_dim + c.enc_dim);
        dec_in.extend_from_slice(emb);
        dec_in.extend_from_slice(&state.c_prev);
        let (u, u_cell) = self.decoder_rnn.step(&dec_in, &state.u, &state.u_cell);

        let alpha = self.attention.weights(&u, &state.alpha_prev, &input.keys);
        let ctx = weighted_rows(enc.h_enc(), &alpha);
        let p = weighted_rows(enc.h_spk(), &alpha);

        let mut q_in = Vec::with_capacity(c.spk_dim + c.embed_dim);
        q_in.extend_from_slice(&p);
        q_in.extend_from_slice(emb);
        let (q, q_cell) = self.query_rnn.step(&q_in, &state.q, &state.q_cell);

        let (beta, d_bar) = inventory_attention(&q, inv)?;

        let mut z = self.w_d.matvec(&d_bar);
        for ((zi, ci), ui) in z.iter_mut().zip(&ctx).zip(&u) {
            *zi += ci + ui;
        }
        let (out_h, out_cell) = self.out_rnn.step(&z, &state.out_h, &state.out_cell);
        let token_logprobs = log_softmax(&self.out_proj.forward(&out_h));

        let next = DecoderState {
            u,
            u_cell,
            q: q.clone(),
            q_cell,
            out_h,
            out_cell,
            c_prev: ctx,
            alpha_prev: alpha.clone(),
            y_prev: None,
        };
        Ok((StepOutput { token_logprobs, beta, alpha, q, d_bar }, next))
    }

    /// Runs the decoder over a fixed token sequence.
    pub fn teacher_force(&self, input: &PreparedInput, inv: &SpeakerInventory, tokens: &[TokenId], sos: TokenId) -> Result<Vec<StepOutput>> {
        let mut state = self.initial_state(&input.enc, sos);
        let mut outs = Vec::with_capacity(tokens.len());
        for &y in tokens {
            if y >= self.config.vocab_size {
                bail!(Contract, "token id {y} outside vocabulary of {}", self.config.vocab_size);
            }
            let (out, next) = self.decode_step(&state, input, inv)?;
            outs.push(out);
            state = next.with_token(y);
        }
        Ok(outs)
    }
}

/// `Σ_t w_t · m[t, :]`.
pub(crate) fn weighted_rows(m: &Matrix, w: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m.cols()];
    for (t, &a) in w.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(m.row(t)) {
            *o += a * v;
        }
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn small_config() -> ModelConfig {
        ModelConfig {
            feat_dim: 4,
            stack: 3,
            vocab_size: 5,
            embed_dim: 3,
            enc_dim: 6,
            spk_dim: 4,
            spk_hidden: vec![5],
            spk_kernel: 3,
            att_dim: 5,
            loc_channels: 4,
            loc_width: 11,
        }
    }

    fn features(rng: &mut ChaCha8Rng, t: usize, f: usize) -> FeatureSequence {
        FeatureSequence::new(layers::random_matrix(rng, t, f, 1.0), 0.01).unwrap()
    }

    fn inventory(rng: &mut ChaCha8Rng, k: usize, d: usize) -> SpeakerInventory {
        let profiles = (0..k).map(|i| SpeakerProfile::new(format!("s{i}"), layers::random_vec(rng, d, 1.0))).collect();
        SpeakerInventory::new(profiles).unwrap()
    }

    #[test]
    fn stacking_frame_arithmetic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = Model::random(small_config(), &mut rng, 0.5).unwrap();
        let enc = model.encode(&features(&mut rng, 9, 4)).unwrap();
        assert_eq!(enc.h_enc().rows(), 3);
        assert_eq!(enc.h_spk().rows(), 3);
        assert_abs_diff_eq!(enc.frame_shift(), 0.03, epsilon = 1e-15);
        assert_eq!(model.encode(&features(&mut rng, 10, 4)).unwrap().frames(), 4);
        assert!(model.encode(&features(&mut rng, 9, 5)).is_err());
    }

    #[test]
    fn encode_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = Model::random(small_config(), &mut rng, 0.5).unwrap();
        let x = features(&mut rng, 12, 4);
        let a = model.encode(&x).unwrap();
        let b = model.encode(&x).unwrap();
        assert_eq!(a, b);
        assert!(a.h_enc().as_slice().iter().chain(a.h_spk().as_slice()).all(|v| v.is_finite()));
    }

    #[test]
    fn single_frame_attention_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = Model::random(small_config(), &mut rng, 2.0).unwrap();
        let enc = model.encode(&features(&mut rng, 2, 4)).unwrap();
        let u = layers::random_vec(&mut rng, 6, 1.0);
        assert_eq!(model.attend(&u, &[1.0], &enc).unwrap(), vec![1.0]);
    }

    #[test]
    fn equal_scores_without_location_give_uniform_attention() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut model = Model::random(small_config(), &mut rng, 1.0).unwrap();
        model.attention.w_k = Matrix::zeros(5, 6);
        model.attention.loc_conv = Conv1d::zeros(1, 4, 11);
        let enc = model.encode(&features(&mut rng, 15, 4)).unwrap();
        let prev = softmax_unchecked(&layers::random_vec(&mut rng, 5, 3.0));
        let alpha = model.attend(&layers::random_vec(&mut rng, 6, 1.0), &prev, &enc).unwrap();
        for a in alpha {
            assert_abs_diff_eq!(a, 0.2, epsilon = 1e-15);
        }
    }

    #[test]
    fn inventory_attention_examples() {
        let inv = SpeakerInventory::new(vec![SpeakerProfile::new("a", vec![1.0, 0.0]), SpeakerProfile::new("b", vec![0.0, 1.0])]).unwrap();
        let (beta, _) = inventory_attention(&[1.0, 0.0], &inv).unwrap();
        let e = std::f64::consts::E;
        assert_abs_diff_eq!(beta[0], e / (e + 1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(beta[0], 0.7311, epsilon = 1e-4);

        let same = SpeakerInventory::new(vec![SpeakerProfile::new("a", vec![0.3, 0.4]), SpeakerProfile::new("b", vec![0.3, 0.4])]).unwrap();
        let (beta, d_bar) = inventory_attention(&[1.0, -2.0], &same).unwrap();
        assert_eq!(beta, vec![0.5, 0.5]);
        assert_abs_diff_eq!(d_bar[0], 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(d_bar[1], 0.4, epsilon = 1e-15);

        let one = SpeakerInventory::new(vec![SpeakerProfile::new("a", vec![0.3, -0.4])]).unwrap();
        let (beta, d_bar) = inventory_attention(&[5.0, 1.0], &one).unwrap();
        assert_eq!(beta, vec![1.0]);
        assert_eq!(d_bar, vec![0.3, -0.4]);

        assert!(matches!(inventory_attention(&[0.0, 0.0], &inv), Err(crate::Error::Domain(_))));
        assert!(matches!(inventory_attention(&[1.0], &inv), Err(crate::Error::Config(_))));
    }

    #[test]
    fn decode_step_contracts() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = Model::random(small_config(), &mut rng, 1.0).unwrap();
        let input = model.encode_prepared(&features(&mut rng, 11, 4)).unwrap();
        let inv = inventory(&mut rng, 1, 4);
        let state = model.initial_state(input.encoded(), 0);
        let (out, next) = model.decode_step(&state, &input, &inv).unwrap();
        assert_eq!(out.beta, vec![1.0]);
        assert_eq!(out.d_bar, inv.get(0).embedding);
        assert!(next.y_prev.is_none());
        assert!(model.decode_step(&next, &input, &inv).is_err());
        let total: f64 = out.token_logprobs.iter().map(|l| l.exp()).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);

        let wrong = inventory(&mut rng, 2, 3);
        assert!(matches!(model.decode_step(&state, &input, &wrong), Err(crate::Error::Config(_))));
    }

    #[test]
    fn profile_scaling_keeps_beta() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let model = Model::random(small_config(), &mut rng, 1.0).unwrap();
        let input = model.encode_prepared(&features(&mut rng, 8, 4)).unwrap();
        let inv = inventory(&mut rng, 3, 4);
        let scaled = SpeakerInventory::new(
            inv.profiles().iter().map(|p| SpeakerProfile::new(p.speaker_id.clone(), p.embedding.iter().map(|v| 3.0 * v).collect())).collect(),
        )
        .unwrap();
        let a = model.teacher_force(&input, &inv, &[2, 3, 0], 0).unwrap();
        let b = model.teacher_force(&input, &scaled, &[2, 3, 0], 0).unwrap();
        for (x, y) in a.iter().zip(&b) {
            for (bx, by) in x.beta.iter().zip(&y.beta) {
                assert_abs_diff_eq!(bx, by, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn random_models_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut model = Model::random(small_config(), &mut rng, 1.0).unwrap();
        model.validate().unwrap();
        model.w_d = Matrix::zeros(2, 2);
        assert!(model.validate().is_err());
        let mut bad = small_config();
        bad.loc_width = 4;
        assert!(Model::zeros(bad).is_err());
    }
}
