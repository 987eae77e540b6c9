//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use saasr::decoder::{beam_search, BeamConfig};
use saasr::diarize::{cluster_recognized, speaker_transcripts, Counting, DiarizeConfig, Embedding};
use saasr::labels::{build_speaker_fifo, build_utterance_fifo, ReferenceUtterance};
use saasr::linalg::{argmax, Matrix};
use saasr::metrics::{cpwer, der, der_exact, estimate_boundaries, weighted_frame_index, SpeakerTranscripts, TimedSpeech};
use saasr::model::{inventory_attention, FeatureSequence, Model, ModelConfig, SpeakerInventory, SpeakerProfile, Specials, TokenId};
use saasr::objective::{sa_mmi_score, AttributedTranscript};
use saasr::simgen::{generate_meeting, MeetingConfig, Preset};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn random_inventory(rng: &mut ChaCha8Rng, k: usize, dim: usize) -> SpeakerInventory {
    let profiles = (0..k)
        .map(|i| {
            let mut e: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            e[0] += if e[0] >= 0.0 { 0.1 } else { -0.1 };
            SpeakerProfile::new(format!("p{i}"), e)
        })
        .collect();
    SpeakerInventory::new(profiles).unwrap()
}

fn odd(rng: &mut ChaCha8Rng, max: usize) -> usize {
    2 * rng.random_range(0..=max / 2) + 1
}

fn random_config(rng: &mut ChaCha8Rng, vocab_size: usize) -> ModelConfig {
    ModelConfig {
        feat_dim: rng.random_range(1..=5),
        stack: rng.random_range(1..=3),
        vocab_size,
        embed_dim: rng.random_range(1..=4),
        enc_dim: rng.random_range(1..=6),
        spk_dim: rng.random_range(1..=5),
        spk_hidden: if rng.random_bool(0.5) { vec![rng.random_range(1..=4)] } else { vec![] },
        spk_kernel: odd(rng, 5),
        att_dim: rng.random_range(1..=5),
        loc_channels: rng.random_range(1..=4),
        loc_width: odd(rng, 11),
    }
}

fn forward_contracts() -> Verdict {
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    let mut negative = 0;
    let mut argmax_changes = 0;
    let mut steps = 0;
    for trial in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(10_000 + trial);
        let v = rng.random_range(3..=7);
        let config = random_config(&mut rng, v);
        let model = Model::random(config.clone(), &mut rng, 1.0).unwrap();
        let frames = rng.random_range(1..=12);
        let x = FeatureSequence::new(uniform_matrix(&mut rng, frames, config.feat_dim), 0.01).unwrap();
        let k = rng.random_range(1..=5);
        let inv = random_inventory(&mut rng, k, config.spk_dim);
        let tokens: Vec<TokenId> = (0..rng.random_range(1..=6)).map(|_| rng.random_range(0..v)).collect();
        let input = model.encode_prepared(&x).unwrap();
        let outs = model.teacher_force(&input, &inv, &tokens, 0).unwrap();

        let scaled = SpeakerInventory::new(
            inv.profiles()
                .iter()
                .map(|p| {
                    let c = rng.random_range(0.05..20.0);
                    SpeakerProfile::new(p.speaker_id.clone(), p.embedding.iter().map(|e| e * c).collect())
                })
                .collect(),
        )
        .unwrap();
        let outs_scaled = model.teacher_force(&input, &scaled, &tokens, 0).unwrap();

        for (o, s) in outs.iter().zip(&outs_scaled) {
            steps += 1;
            let token_sum: f64 = o.token_logprobs.iter().map(|l| l.exp()).sum();
            for (sum, values) in [(o.alpha.iter().sum::<f64>(), &o.alpha), (o.beta.iter().sum(), &o.beta), (token_sum, &o.token_logprobs)] {
                worst = worst.max((sum - 1.0).abs());
                if values.as_ptr() != o.token_logprobs.as_ptr() && values.iter().any(|a| *a < 0.0) {
                    negative += 1;
                }
            }
            let best = argmax(&o.beta);
            let c = rng.random_range(0.05..20.0);
            let q_scaled: Vec<f64> = o.q.iter().map(|v| v * c).collect();
            let (beta_q, _) = inventory_attention(&q_scaled, &inv).unwrap();
            if argmax(&s.beta) != best || argmax(&beta_q) != best {
                argmax_changes += 1;
            }
        }
    }
    let elapsed = t0.elapsed();
    verdict(
        worst <= 1e-6 && negative == 0 && argmax_changes == 0 && elapsed < Duration::from_secs(10),
        format!("{steps} steps, max |sum-1| = {worst:.2e}, negative entries {negative}, beta argmax changes {argmax_changes}, {elapsed:.2?}"),
    )
}

fn oracle_decode() -> Verdict {
    let t0 = Instant::now();
    let mut matches = 0;
    let max_len = 3;
    for trial in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(20_000 + trial);
        let v = rng.random_range(3..=4);
        let k = rng.random_range(1..=2);
        let config = random_config(&mut rng, v);
        let model = Model::random(config.clone(), &mut rng, 2.0).unwrap();
        let frames = rng.random_range(1..=6);
        let x = FeatureSequence::new(uniform_matrix(&mut rng, frames, config.feat_dim), 0.01).unwrap();
        let inv = random_inventory(&mut rng, k, config.spk_dim);
        let input = model.encode_prepared(&x).unwrap();
        let eos = 0;

        // Every string of length max_len, cut after its first end symbol.
        let mut space: BTreeSet<Vec<TokenId>> = BTreeSet::new();
        for code in 0..v.pow(max_len as u32) {
            let mut seq = Vec::new();
            let mut c = code;
            for _ in 0..max_len {
                let y = c % v;
                c /= v;
                seq.push(y);
                if y == eos {
                    break;
                }
            }
            space.insert(seq);
        }
        let mut best: Option<(f64, Vec<TokenId>)> = None;
        for seq in space {
            let outs = model.teacher_force(&input, &inv, &seq, eos).unwrap();
            let score: f64 = outs.iter().zip(&seq).map(|(o, &y)| o.token_logprobs[y]).sum();
            if best.as_ref().is_none_or(|b| score > b.0) {
                best = Some((score, seq));
            }
        }
        let beam = BeamConfig { beam_width: v.pow(max_len as u32), max_len, ..Default::default() };
        let hyps = beam_search(&model, &input, &inv, eos, eos, &beam, &[]).unwrap();
        if hyps.first().map(|h| &h.tokens) == best.as_ref().map(|b| &b.1) {
            matches += 1;
        }
    }
    let elapsed = t0.elapsed();
    verdict(matches == 20 && elapsed < Duration::from_secs(30), format!("{matches}/20 exact top-sequence matches, {elapsed:.2?}"))
}

/// The tiny hand-set model: every gate pre-activation except the cell input
/// is zero, so input, forget and output gates sit at 1/2.
fn spreadsheet_model() -> Model {
    let config = ModelConfig {
        feat_dim: 2,
        stack: 1,
        vocab_size: 3,
        embed_dim: 1,
        enc_dim: 2,
        spk_dim: 2,
        spk_hidden: vec![],
        spk_kernel: 1,
        att_dim: 1,
        loc_channels: 1,
        loc_width: 1,
    };
    let mut m = Model::zeros(config).unwrap();
    m.asr_encoder.w_ih = Matrix::identity(2);
    m.spk_encoder[0].weight = Matrix::from_rows(&[[1.0, 0.5], [0.5, 1.0]]).unwrap();
    m.spk_encoder[0].bias = vec![0.0, 0.2];
    m.embedding = Matrix::from_rows(&[[0.0], [0.5], [-1.0]]).unwrap();
    // Cell-input rows are 4 and 5 (gate order i, f, g, o).
    m.decoder_rnn.w_ih[(4, 0)] = 1.0;
    m.decoder_rnn.w_ih[(4, 1)] = 1.0;
    m.decoder_rnn.w_ih[(5, 0)] = 1.0;
    m.decoder_rnn.w_ih[(5, 2)] = 1.0;
    m.attention.w_q = Matrix::from_rows(&[[1.0, 0.0]]).unwrap();
    m.attention.w_k = Matrix::from_rows(&[[0.0, 1.0]]).unwrap();
    m.attention.w_f = Matrix::from_rows(&[[1.0]]).unwrap();
    m.attention.v = vec![2.0];
    m.attention.loc_conv.weight = Matrix::from_rows(&[[0.5]]).unwrap();
    m.query_rnn.w_ih[(4, 0)] = 1.0;
    m.query_rnn.w_ih[(5, 1)] = 1.0;
    m.query_rnn.w_ih[(5, 2)] = 1.0;
    m.w_d = Matrix::from_rows(&[[1.0, 0.0], [0.0, -1.0]]).unwrap();
    m.out_rnn.w_ih[(4, 0)] = 1.0;
    m.out_rnn.w_ih[(5, 1)] = 1.0;
    m.out_proj.weight = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, -1.0]]).unwrap();
    m.out_proj.bias = vec![0.0, 0.1, -0.2];
    m
}

/// Cell-by-cell evaluation of the hand-set model on two frames and two
/// tokens. Returns per-step log-probabilities and the joint score.
fn spreadsheet(tokens: [usize; 2], speakers: [usize; 2], gamma: f64) -> ([[f64; 3]; 2], f64) {
    let x = [[1.0f64, -0.5], [0.2, 0.8]];
    let h_enc = [[x[0][0].tanh(), x[0][1].tanh()], [x[1][0].tanh(), x[1][1].tanh()]];
    let h_spk = [[x[0][0] + 0.5 * x[0][1], 0.5 * x[0][0] + x[0][1] + 0.2], [x[1][0] + 0.5 * x[1][1], 0.5 * x[1][0] + x[1][1] + 0.2]];
    let emb = [0.0, 0.5, -1.0];
    let d = [[1.0, 0.0], [0.6, 0.8]];

    let mut u_cell = [0.0f64; 2];
    let mut q_cell = [0.0f64; 2];
    let mut o_cell = [0.0f64; 2];
    let mut ctx = [0.0f64; 2];
    let mut alpha = [0.5f64, 0.5];
    let mut y_prev = 0;
    let mut logps = [[0.0; 3]; 2];
    let mut score = 0.0;
    for n in 0..2 {
        let e = emb[y_prev];
        u_cell = [0.5 * u_cell[0] + 0.5 * (e + ctx[0]).tanh(), 0.5 * u_cell[1] + 0.5 * (e + ctx[1]).tanh()];
        let u = [0.5 * u_cell[0].tanh(), 0.5 * u_cell[1].tanh()];

        let energy = [2.0 * (u[0] + h_enc[0][1] + 0.5 * alpha[0]).tanh(), 2.0 * (u[0] + h_enc[1][1] + 0.5 * alpha[1]).tanh()];
        let z = energy[0].exp() + energy[1].exp();
        alpha = [energy[0].exp() / z, energy[1].exp() / z];
        ctx = [alpha[0] * h_enc[0][0] + alpha[1] * h_enc[1][0], alpha[0] * h_enc[0][1] + alpha[1] * h_enc[1][1]];
        let p = [alpha[0] * h_spk[0][0] + alpha[1] * h_spk[1][0], alpha[0] * h_spk[0][1] + alpha[1] * h_spk[1][1]];

        q_cell = [0.5 * q_cell[0] + 0.5 * p[0].tanh(), 0.5 * q_cell[1] + 0.5 * (p[1] + e).tanh()];
        let q = [0.5 * q_cell[0].tanh(), 0.5 * q_cell[1].tanh()];
        let q_norm = (q[0] * q[0] + q[1] * q[1]).sqrt();
        let cos = [(q[0] * d[0][0] + q[1] * d[0][1]) / q_norm, (q[0] * d[1][0] + q[1] * d[1][1]) / q_norm];
        let zb = cos[0].exp() + cos[1].exp();
        let beta = [cos[0].exp() / zb, cos[1].exp() / zb];
        let d_bar = [beta[0] * d[0][0] + beta[1] * d[1][0], beta[0] * d[0][1] + beta[1] * d[1][1]];

        let zz = [ctx[0] + u[0] + d_bar[0], ctx[1] + u[1] - d_bar[1]];
        o_cell = [0.5 * o_cell[0] + 0.5 * zz[0].tanh(), 0.5 * o_cell[1] + 0.5 * zz[1].tanh()];
        let o_h = [0.5 * o_cell[0].tanh(), 0.5 * o_cell[1].tanh()];
        let logits = [o_h[0], o_h[1] + 0.1, o_h[0] - o_h[1] - 0.2];
        let lse = (logits[0].exp() + logits[1].exp() + logits[2].exp()).ln();
        logps[n] = [logits[0] - lse, logits[1] - lse, logits[2] - lse];

        score += logps[n][tokens[n]] + gamma * beta[speakers[n]].ln();
        y_prev = tokens[n];
    }
    (logps, score)
}

fn spreadsheet_check() -> Verdict {
    let model = spreadsheet_model();
    let x = FeatureSequence::new(Matrix::from_rows(&[[1.0, -0.5], [0.2, 0.8]]).unwrap(), 0.01).unwrap();
    let inv = SpeakerInventory::new(vec![SpeakerProfile::new("a", vec![1.0, 0.0]), SpeakerProfile::new("b", vec![0.6, 0.8])]).unwrap();
    let specials = Specials { sc: 1, eos: 0 };
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for (tokens, speakers) in [([2, 0], [1, 1]), ([1, 0], [0, 1]), ([2, 0], [0, 0])] {
        let t = AttributedTranscript::new(tokens.to_vec(), speakers.to_vec(), specials).unwrap();
        let input = model.encode_prepared(&x).unwrap();
        let outs = model.teacher_force(&input, &inv, &t.tokens, 0).unwrap();
        for gamma in [0.0, 0.1, 1.0] {
            let (logps, expected) = spreadsheet(tokens, speakers, gamma);
            let got = sa_mmi_score(&model, &x, &t, &inv, gamma, 0).unwrap();
            worst = worst.max((got - expected).abs());
            for (o, l) in outs.iter().zip(&logps) {
                for (a, b) in o.token_logprobs.iter().zip(l) {
                    worst = worst.max((a - b).abs());
                }
            }
            cases += 1;
        }
    }
    verdict(worst <= 1e-9, format!("{cases} score evaluations, max deviation {worst:.2e}"))
}

fn levenshtein(a: &[String], b: &[String]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = (prev[j + 1] + 1).min(cur[j] + 1).min(prev[j] + usize::from(x != y));
        }
        prev = cur;
    }
    prev[b.len()]
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

fn brute_force_errors(r: &SpeakerTranscripts, h: &SpeakerTranscripts) -> usize {
    let cat = |t: &SpeakerTranscripts| -> Vec<Vec<String>> { t.values().map(|us| us.concat()).collect() };
    let (mut r, mut h) = (cat(r), cat(h));
    let size = r.len().max(h.len());
    r.resize(size, vec![]);
    h.resize(size, vec![]);
    permutations(size).iter().map(|p| p.iter().enumerate().map(|(i, &j)| levenshtein(&r[i], &h[j])).sum()).min().unwrap()
}

fn random_transcripts(rng: &mut ChaCha8Rng, speakers: usize, prefix: &str) -> SpeakerTranscripts {
    const WORDS: [&str; 8] = ["a", "b", "c", "d", "e", "f", "g", "h"];
    (0..speakers)
        .map(|s| {
            let us = (0..rng.random_range(1..=3)).map(|_| (0..rng.random_range(0..=6)).map(|_| WORDS.choose(rng).unwrap().to_string()).collect()).collect();
            (format!("{prefix}{s}"), us)
        })
        .collect()
}

fn cpwer_oracle() -> Verdict {
    let t0 = Instant::now();
    let mut agree = 0;
    let mut trials = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(30_000);
    while trials < 100 {
        let (nr, nh) = (rng.random_range(2..=6), rng.random_range(2..=6));
        let r = random_transcripts(&mut rng, nr, "r");
        if r.values().all(|us| us.iter().all(|u| u.is_empty())) {
            continue;
        }
        let h = random_transcripts(&mut rng, nh, "h");
        trials += 1;
        let rep = cpwer(&r, &h).unwrap();
        let words: usize = r.values().map(|us| us.iter().map(Vec::len).sum::<usize>()).sum();
        let errors = rep.substitutions + rep.insertions + rep.deletions;
        if errors == brute_force_errors(&r, &h) && rep.wer == errors as f64 / words as f64 {
            agree += 1;
        }
    }
    let elapsed = t0.elapsed();
    verdict(agree == trials && elapsed < Duration::from_secs(30), format!("{agree}/{trials} exact agreements with permutation search, {elapsed:.2?}"))
}

fn meeting_config(seed: u64) -> MeetingConfig {
    MeetingConfig { preset: Preset::ALL[seed as usize % Preset::ALL.len()], n_speakers: (3, 8), ..Default::default() }
}

fn clustering_recovery() -> Verdict {
    let mut nme_ok = 0;
    let mut oracle_ok = 0;
    let mut misses = Vec::new();
    for seed in 0..100u64 {
        let s = generate_meeting(40_000 + seed, &meeting_config(seed)).unwrap();
        let k = s.speaker_ids().len();
        let base = DiarizeConfig::default();
        let rec = common::decode_with_examples(&s, &base);
        let nme = cluster_recognized(rec.clone(), &DiarizeConfig { counting: Counting::Nme, max_speakers: 8, ..base }).unwrap();
        let oracle = cluster_recognized(rec, &DiarizeConfig { counting: Counting::Oracle(k), ..base }).unwrap();
        if nme.k == k && common::label_accuracy(&s, &nme.utterances) == 1.0 {
            nme_ok += 1;
        } else {
            misses.push(format!("seed {seed}: k {} vs {k}", nme.k));
        }
        if oracle.k == k && common::label_accuracy(&s, &oracle.utterances) == 1.0 {
            oracle_ok += 1;
        }
    }
    let mut detail = format!("NME {nme_ok}/100 (need 95), oracle k {oracle_ok}/100 (need 100)");
    if !misses.is_empty() {
        detail.push_str(&format!("; NME misses: {}", misses.join(", ")));
    }
    verdict(nme_ok >= 95 && oracle_ok == 100, detail)
}

/// Pooled cpWER (total errors over total reference words) per clustering
/// configuration, over the same 20 decoded sessions.
fn table_runs(configs: &[DiarizeConfig]) -> Vec<f64> {
    let mut errors = vec![0usize; configs.len()];
    let mut words = 0usize;
    for seed in 0..20u64 {
        let s = generate_meeting(50_000 + seed, &meeting_config(seed)).unwrap();
        let reference = common::reference(&s);
        words += reference.values().map(|us| us.iter().map(Vec::len).sum::<usize>()).sum::<usize>();
        let rec = common::decode_with_examples(&s, &DiarizeConfig::default());
        let k = s.speaker_ids().len();
        for (e, c) in errors.iter_mut().zip(configs) {
            let c = match c.counting {
                Counting::Oracle(_) => DiarizeConfig { counting: Counting::Oracle(k), ..*c },
                Counting::Nme => *c,
            };
            let d = cluster_recognized(rec.clone(), &c).unwrap();
            let rep = cpwer(&reference, &speaker_transcripts(&d.utterances, &s.vocabulary)).unwrap();
            *e += rep.substitutions + rep.insertions + rep.deletions;
        }
    }
    errors.iter().map(|&e| e as f64 / words as f64).collect()
}

fn counting_mode_ordering() -> Verdict {
    let base = DiarizeConfig::default();
    let w = table_runs(&[
        DiarizeConfig { counting: Counting::Oracle(1), ..base },
        DiarizeConfig { counting: Counting::Nme, max_speakers: 8, ..base },
        DiarizeConfig { counting: Counting::Nme, max_speakers: 16, ..base },
    ]);
    verdict(w[0] <= w[1] && w[1] <= w[2], format!("cpWER oracle {:.4}, NME(max=8) {:.4}, NME(max=16) {:.4}", w[0], w[1], w[2]))
}

fn embedding_comparison() -> Verdict {
    let base = DiarizeConfig::default();
    let w = table_runs(&[DiarizeConfig { embedding: Embedding::Query, ..base }, DiarizeConfig { embedding: Embedding::WeightedProfile, ..base }]);
    verdict(w[0] <= w[1], format!("cpWER speaker query {:.4}, weighted profile {:.4}", w[0], w[1]))
}

fn random_references(rng: &mut ChaCha8Rng) -> Vec<ReferenceUtterance> {
    let speakers = ["alice", "bob", "carol", "dave", "erin"];
    let n_speakers = rng.random_range(1..=speakers.len());
    let mut out = Vec::new();
    for spk in &speakers[..n_speakers] {
        let mut t = rng.random_range(0..4) as f64 * 0.5;
        for _ in 0..rng.random_range(0..=3) {
            let len = rng.random_range(1..=4) as f64 * 0.5;
            let tokens = (0..rng.random_range(1..=4)).map(|_| rng.random_range(2..30)).collect();
            out.push(ReferenceUtterance::new(*spk, t, t + len, tokens).unwrap());
            t += len + rng.random_range(0..3) as f64 * 0.5;
        }
    }
    out.shuffle(rng);
    out
}

fn fifo_suite() -> Verdict {
    let sp = Specials { sc: 1, eos: 0 };
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(60_000);
    for trial in 0..1000 {
        let us = random_references(&mut rng);
        let mut content: Vec<TokenId> = us.iter().flat_map(|u| u.tokens.iter().copied()).collect();
        content.sort_unstable();
        let distinct: BTreeSet<&str> = us.iter().map(|u| u.speaker_id.as_str()).collect();
        for (name, out, expected_sc) in [
            ("speaker", build_speaker_fifo(&us, sp).unwrap(), distinct.len().saturating_sub(1)),
            ("utterance", build_utterance_fifo(&us, sp).unwrap(), us.len().saturating_sub(1)),
        ] {
            let mut kept: Vec<TokenId> = out.iter().copied().filter(|&t| t != sp.sc && t != sp.eos).collect();
            kept.sort_unstable();
            let sc = out.iter().filter(|&&t| t == sp.sc).count();
            let eos = out.iter().filter(|&&t| t == sp.eos).count();
            if kept != content || sc != expected_sc || eos != 1 || out.last() != Some(&sp.eos) {
                failures.push(format!("{name} #{trial}"));
            }
        }
    }
    let (a, b, c, d) = (10, 11, 12, 13);
    let u = |spk: &str, start: f64, tokens: &[TokenId]| ReferenceUtterance::new(spk, start, start + 0.8, tokens.to_vec()).unwrap();
    let example = vec![u("spk1", 0.0, &[a, b]), u("spk2", 1.0, &[c]), u("spk1", 2.0, &[d])];
    let speaker_ok = build_speaker_fifo(&example, sp).unwrap() == vec![a, b, d, sp.sc, c, sp.eos];
    let utterance_ok = build_utterance_fifo(&example, sp).unwrap() == vec![a, b, sp.sc, c, sp.sc, d, sp.eos];
    verdict(
        failures.is_empty() && speaker_ok && utterance_ok,
        format!("1000 reference sets, {} property failures; worked example speaker {speaker_ok}, utterance {utterance_ok}", failures.len()),
    )
}

fn random_timed(rng: &mut ChaCha8Rng, prefix: &str) -> Vec<TimedSpeech> {
    (0..rng.random_range(1..=3))
        .map(|s| {
            let mut t = rng.random_range(0.0..2.0);
            let intervals = (0..rng.random_range(1..=3))
                .map(|_| {
                    let start = t;
                    t += rng.random_range(0.05..3.0);
                    let iv = (start, t);
                    t += rng.random_range(0.0..1.5);
                    iv
                })
                .collect();
            TimedSpeech::new(format!("{prefix}{s}"), intervals).unwrap()
        })
        .collect()
}

fn boundaries_and_der() -> Verdict {
    let one_hot = |t: usize, len: usize| {
        let mut v = vec![0.0; len];
        v[t] = 1.0;
        v
    };
    let (tf, tm) = (0.03, 0.5);
    let close = |(a, b): (f64, f64), (c, d): (f64, f64)| (a - c).abs() <= 1e-12 && (b - d).abs() <= 1e-12;
    let mut hand = Vec::new();
    hand.push(close(estimate_boundaries(&[one_hot(10, 30)], tf, tm, 0.0).unwrap(), (0.0, 0.8)));
    hand.push((weighted_frame_index(&[0.1; 10]) - 4.5).abs() <= 1e-12);
    hand.push(close(estimate_boundaries(&[one_hot(20, 30), one_hot(10, 30)], tf, tm, 0.0).unwrap(), (0.0, 1.1)));
    hand.push(close(estimate_boundaries(&[one_hot(40, 60), one_hot(25, 60)], tf, tm, 2.0).unwrap(), (2.25, 3.7)));
    let a = TimedSpeech::new("A", vec![(0.0, 10.0)]).unwrap();
    let x = TimedSpeech::new("X", vec![(0.0, 8.0)]).unwrap();
    let r = der_exact(&[a], &[x]).unwrap();
    hand.push((r.miss - 0.2).abs() < 1e-12 && r.false_alarm == 0.0 && r.speaker_error == 0.0 && (r.der - 0.2).abs() < 1e-12);
    let hand_ok = hand.iter().all(|&h| h);

    let resolution = 0.01;
    let mut within = 0;
    let mut sums_ok = true;
    let mut worst_ratio: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(70_000);
    let trials = 200;
    for _ in 0..trials {
        let reference = random_timed(&mut rng, "r");
        let hyp = random_timed(&mut rng, "h");
        let exact = der_exact(&reference, &hyp).unwrap();
        let disc = der(&reference, &hyp, resolution).unwrap();
        for rep in [&exact, &disc] {
            sums_ok &= (rep.der - (rep.miss + rep.false_alarm + rep.speaker_error)).abs() <= 1e-9;
        }
        // Only frames holding a boundary can differ; each contributes at most
        // one frame of error per speaker on either side.
        let boundaries: BTreeSet<u64> = reference.iter().chain(&hyp).flat_map(|s| s.intervals.iter().flat_map(|&(a, b)| [a.to_bits(), b.to_bits()])).collect();
        let (nr, nh) = (reference.len() as f64, hyp.len() as f64);
        let slack = boundaries.len() as f64 * resolution;
        let bound = (slack * (nr + nh) + exact.der * slack * nr) / disc.reference_time;
        let gap = (exact.der - disc.der).abs();
        worst_ratio = worst_ratio.max(gap / bound);
        if gap <= bound {
            within += 1;
        }
        let self_der = der(&reference, &reference, resolution).unwrap();
        sums_ok &= self_der.der == 0.0;
    }
    verdict(
        hand_ok && within == trials && sums_ok,
        format!("hand cases {}/{}; {within}/{trials} random cases within the resolution bound (worst gap/bound {worst_ratio:.3}); components sum: {sums_ok}", hand.iter().filter(|&&h| h).count(), hand.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("forward-pass contracts", forward_contracts),
        ("oracle decode equivalence", oracle_decode),
        ("SA-MMI spreadsheet check", spreadsheet_check),
        ("cpWER oracle", cpwer_oracle),
        ("clustering recovery", clustering_recovery),
        ("counting-mode ordering", counting_mode_ordering),
        ("embedding comparison", embedding_comparison),
        ("FIFO builders", fifo_suite),
        ("boundaries and DER", boundaries_and_der),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let t0 = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        if !v.pass {
            failed += 1;
        }
        println!("{} {name}: {} [{:.2?}]", if v.pass { "PASS" } else { "FAIL" }, v.detail, t0.elapsed());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
