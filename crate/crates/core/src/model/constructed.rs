//! A hand-wired recognizer for the synthetic feature layout.
//!
//! No training is involved. The weights implement a pointer reader over the
//! event frames planted by the simulator: every event frame carries the token
//! spoken there and, as its key, the token that precedes it in the serialized
//! transcript. The decoder state holds the previous token, attention jumps to
//! the frame keyed by it (a location tap breaks ties in favour of the frame
//! right after the current one), and the output layer reads the token off the
//! attended frame. When no frame matches, the end symbol wins through its bias.
//!
//! The speaker-query recurrence is a leaky integrator of the pooled speaker
//! stream that resets after a speaker change, so the query at a change or end
//! step summarises the speaker who just talked. `W_d` is zero: token
//! posteriors do not depend on the profiles.

use serde::{Deserialize, Serialize};

use super::{Model, ModelConfig, TokenId};
use crate::error::{bail, Result};
use crate::layout::{FeatureLayout, STACK};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointerGains {
    /// Pre-activation gain of the token/key encoder.
    pub encoder: f64,
    /// Pre-activation gain of the key-match units.
    pub match_gain: f64,
    /// Output weight of each key-match unit.
    pub match_scale: f64,
    /// Pre-activation gain of the location unit.
    pub location_gain: f64,
    /// Output weight of the location unit.
    pub location_scale: f64,
    pub output: f64,
    pub eos_bias: f64,
    /// Forget-gate bias of the query integrator (0 gives a factor of one half).
    pub query_forget: f64,
    /// Small constant added to the query so it is never exactly zero.
    pub query_floor: f64,
    /// Saturation bias for gates that should be fully open or closed.
    pub saturate: f64,
}

impl Default for PointerGains {
    fn default() -> Self {
        Self {
            encoder: 3.0,
            match_gain: 4.0,
            match_scale: 15.0,
            location_gain: 10.0,
            location_scale: 7.2,
            output: 30.0,
            eos_bias: 10.0,
            query_forget: 0.0,
            query_floor: 1e-3,
            saturate: 30.0,
        }
    }
}

pub fn pointer_config(layout: &FeatureLayout) -> ModelConfig {
    let v = layout.vocab_size;
    ModelConfig {
        feat_dim: layout.feat_dim(),
        stack: STACK,
        vocab_size: v,
        embed_dim: v,
        enc_dim: 2 * v,
        spk_dim: layout.sig_dim,
        spk_hidden: vec![2 * layout.sig_dim],
        spk_kernel: 1,
        att_dim: v + 1,
        loc_channels: 4,
        loc_width: 11,
    }
}

/// Builds the pointer reader for `layout`.
pub fn pointer_model(layout: &FeatureLayout, eos: TokenId, sc: TokenId, g: &PointerGains) -> Result<Model> {
    let v = layout.vocab_size;
    let d = layout.sig_dim;
    if eos >= v || sc >= v || eos == sc {
        bail!(Config, "reserved symbols {eos}/{sc} invalid for a vocabulary of {v}");
    }
    if d == 0 {
        bail!(Config, "signature dimension must be positive");
    }
    let config = pointer_config(layout);
    let f = config.feat_dim;
    let e = 2 * v;
    let mut m = Model::zeros(config)?;

    // Encoder: token and key one-hots summed over the stacked sub-frames.
    for s in 0..STACK {
        for j in 0..v {
            m.asr_encoder.w_ih[(j, s * f + layout.token(j))] = g.encoder;
            m.asr_encoder.w_ih[(v + j, s * f + layout.key(j))] = g.encoder;
        }
        for k in 0..d {
            let w = 1.0 / STACK as f64;
            m.spk_encoder[0].weight[(k, s * f + layout.sig(k))] = w;
            m.spk_encoder[0].weight[(d + k, s * f + layout.sig(k))] = -w;
        }
    }
    for k in 0..d {
        m.spk_encoder[1].weight[(k, k)] = 1.0;
        m.spk_encoder[1].weight[(k, d + k)] = -1.0;
    }
    let enc_level = g.encoder.tanh();

    for j in 0..v {
        m.embedding[(j, j)] = 1.0;
    }

    // Decoder state: previous token one-hot in the key half, no memory.
    set_gates(&mut m.decoder_rnn.bias, e, g.saturate);
    for j in 0..v {
        m.decoder_rnn.w_ih[(2 * e + v + j, j)] = g.encoder;
    }
    let u_level = enc_level.tanh();

    // Key-match units plus one location unit.
    let a = &mut m.attention;
    for j in 0..v {
        a.w_q[(j, v + j)] = g.match_gain / u_level;
        a.w_k[(j, v + j)] = g.match_gain / enc_level;
        a.bias[j] = -1.5 * g.match_gain;
        a.v[j] = g.match_scale;
    }
    *a.loc_conv.tap_mut(0, 0, -1) = 1.0;
    a.w_f[(v, 0)] = g.location_gain;
    a.bias[v] = -0.5 * g.location_gain;
    a.v[v] = g.location_scale;

    // Query integrator: input gate open, output open, forget half, reset on <sc>.
    let q = &mut m.query_rnn;
    for k in 0..d {
        q.bias[k] = g.saturate;
        q.bias[d + k] = g.query_forget;
        q.bias[2 * d + k] = g.query_floor;
        q.bias[3 * d + k] = g.saturate;
        q.w_ih[(2 * d + k, k)] = 1.0;
        q.w_ih[(d + k, d + sc)] = -2.0 * g.saturate;
    }

    // Output recurrence reads the token half of the context.
    set_gates(&mut m.out_rnn.bias, e, g.saturate);
    for j in 0..v {
        m.out_rnn.w_ih[(2 * e + j, j)] = g.encoder;
        m.out_proj.weight[(j, j)] = g.output;
    }
    m.out_proj.bias[eos] = g.eos_bias;
    m.validate()?;
    Ok(m)
}

/// Input and output gates open, forget gate closed.
fn set_gates(bias: &mut [f64], hidden: usize, sat: f64) {
    for j in 0..hidden {
        bias[j] = sat;
        bias[hidden + j] = -sat;
        bias[3 * hidden + j] = sat;
    }
}
