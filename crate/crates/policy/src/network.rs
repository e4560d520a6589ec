//! The policy network: CSI encoder, text embedding, connector, transformer
//! backbone, preference head and one actor head per catalog module.

use linkforge_core::action::{ActionIndex, LinkConfig, Module, NUM_MODULES, OPTION_COUNTS};
use linkforge_core::channel::{CsiFeatures, CSI_COLS, GRID_SYMBOLS};
use linkforge_core::intent::{PreferenceClass, MAX_TOKENS, PAD_ID, VOCAB_SIZE};
use linkforge_core::PreferenceVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{PolicyError, Result};
use crate::graph::{Graph, NodeId, Tensor};
use crate::params::{ParamId, ParamStore};

pub const D_MODEL: usize = 64;
pub const FF_HIDDEN: usize = 128;
pub const NUM_BLOCKS: usize = 2;
pub const NUM_HEADS: usize = 4;
/// Text length after the connector's sequence projection.
pub const REDUCED_TEXT_LEN: usize = 8;
pub const NUM_CLASSES: usize = 3;
/// CSI values (dB and the SNR column) are scaled by this before encoding.
pub const CSI_INPUT_SCALE: f64 = 1.0 / 20.0;
/// Standard deviation of the preference and actor head weights at init;
/// small enough that the initial policy is uniform to within about 1e-3 nats.
pub const HEAD_INIT_STD: f64 = 1e-4;

const ACTOR_INPUTS: usize = D_MODEL + NUM_CLASSES;

/// One decision state: CSI matrix and token ids (padded to `MAX_TOKENS`).
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyInput {
    pub csi: CsiFeatures,
    pub tokens: Vec<u16>,
}

#[derive(Debug, Clone)]
struct BlockIds {
    ln1_g: ParamId,
    ln1_b: ParamId,
    wq: ParamId,
    wk: ParamId,
    wv: ParamId,
    wo: ParamId,
    ln2_g: ParamId,
    ln2_b: ParamId,
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
}

#[derive(Debug, Clone)]
struct Ids {
    csi_w: ParamId,
    csi_b: ParamId,
    csi_pos: ParamId,
    embed: ParamId,
    text_pos: ParamId,
    len_proj: ParamId,
    sa_q: ParamId,
    sa_k: ParamId,
    sa_v: ParamId,
    ca_q: ParamId,
    ca_k: ParamId,
    ca_v: ParamId,
    blocks: Vec<BlockIds>,
    lnf_g: ParamId,
    lnf_b: ParamId,
    pref_w: ParamId,
    pref_b: ParamId,
    actor_w: Vec<ParamId>,
    actor_b: Vec<ParamId>,
}

/// Node handles of one recorded forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub batch: usize,
    pub csi_enc: NodeId,
    pub text_emb: NodeId,
    pub connector: NodeId,
    pub hidden: NodeId,
    pub pooled: NodeId,
    /// Log class probabilities, `[B x 3]`.
    pub pref_logp: NodeId,
    /// Class probabilities, `[B x 3]`.
    pub pref: NodeId,
    /// Log option probabilities per module, each `[B x options]`.
    pub heads: Vec<NodeId>,
}

#[derive(Debug, Clone)]
pub struct Policy {
    store: ParamStore,
    ids: Ids,
}

fn ones_row(n: usize) -> Tensor {
    Tensor::ones((1, n))
}

fn zeros_row(n: usize) -> Tensor {
    Tensor::zeros((1, n))
}

impl Policy {
    /// Fresh parameters with near-uniform output heads.
    pub fn new(seed: u64) -> Self {
        Self::with_head_std(seed, HEAD_INIT_STD)
    }

    /// Fresh parameters with the given head weight scale.
    pub fn with_head_std(seed: u64, head_std: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = ParamStore::new();
        let d = D_MODEL;
        let glorot = |fan_in: usize| 1.0 / (fan_in as f64).sqrt();

        let csi_w = s.register_normal("csi.w", CSI_COLS, d, glorot(CSI_COLS), &mut rng);
        let csi_b = s.register("csi.b", zeros_row(d));
        let csi_pos = s.register_normal("csi.pos", GRID_SYMBOLS, d, 0.1, &mut rng);
        let embed = s.register_normal("text.embed", VOCAB_SIZE, d, 1.0, &mut rng);
        let text_pos = s.register_normal("text.pos", MAX_TOKENS, d, 0.1, &mut rng);
        let len_proj = s.register_normal("conn.len", REDUCED_TEXT_LEN, MAX_TOKENS, glorot(MAX_TOKENS), &mut rng);
        let sa_q = s.register_normal("conn.self.wq", d, d, glorot(d), &mut rng);
        let sa_k = s.register_normal("conn.self.wk", d, d, glorot(d), &mut rng);
        let sa_v = s.register_normal("conn.self.wv", d, d, glorot(d), &mut rng);
        let ca_q = s.register_normal("conn.cross.wq", d, d, glorot(d), &mut rng);
        let ca_k = s.register_normal("conn.cross.wk", d, d, glorot(d), &mut rng);
        let ca_v = s.register_normal("conn.cross.wv", d, d, glorot(d), &mut rng);

        let blocks = (0..NUM_BLOCKS)
            .map(|i| {
                let p = |n: &str| format!("block{i}.{n}");
                BlockIds {
                    ln1_g: s.register(&p("ln1.g"), ones_row(d)),
                    ln1_b: s.register(&p("ln1.b"), zeros_row(d)),
                    wq: s.register_normal(&p("attn.wq"), d, d, glorot(d), &mut rng),
                    wk: s.register_normal(&p("attn.wk"), d, d, glorot(d), &mut rng),
                    wv: s.register_normal(&p("attn.wv"), d, d, glorot(d), &mut rng),
                    wo: s.register_normal(&p("attn.wo"), d, d, glorot(d), &mut rng),
                    ln2_g: s.register(&p("ln2.g"), ones_row(d)),
                    ln2_b: s.register(&p("ln2.b"), zeros_row(d)),
                    w1: s.register_normal(&p("ff.w1"), d, FF_HIDDEN, glorot(d), &mut rng),
                    b1: s.register(&p("ff.b1"), zeros_row(FF_HIDDEN)),
                    w2: s.register_normal(&p("ff.w2"), FF_HIDDEN, d, glorot(FF_HIDDEN), &mut rng),
                    b2: s.register(&p("ff.b2"), zeros_row(d)),
                }
            })
            .collect();

        let lnf_g = s.register("final.ln.g", ones_row(d));
        let lnf_b = s.register("final.ln.b", zeros_row(d));
        let pref_w = s.register_normal("pref.w", d, NUM_CLASSES, head_std, &mut rng);
        let pref_b = s.register("pref.b", zeros_row(NUM_CLASSES));
        let mut actor_w = Vec::with_capacity(NUM_MODULES);
        let mut actor_b = Vec::with_capacity(NUM_MODULES);
        for m in Module::ALL {
            let n = m.option_count();
            actor_w.push(s.register_normal(&format!("actor.{}.w", m.name()), ACTOR_INPUTS, n, head_std, &mut rng));
            actor_b.push(s.register(&format!("actor.{}.b", m.name()), zeros_row(n)));
        }

        Self {
            store: s,
            ids: Ids {
                csi_w,
                csi_b,
                csi_pos,
                embed,
                text_pos,
                len_proj,
                sa_q,
                sa_k,
                sa_v,
                ca_q,
                ca_k,
                ca_v,
                blocks,
                lnf_g,
                lnf_b,
                pref_w,
                pref_b,
                actor_w,
                actor_b,
            },
        }
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Stacks the CSI of a batch into a scaled `[B*16 x 65]` input.
    pub fn csi_input(batch: &[PolicyInput]) -> Tensor {
        let mut t = Tensor::zeros((batch.len() * GRID_SYMBOLS, CSI_COLS));
        for (b, inp) in batch.iter().enumerate() {
            for (i, &v) in inp.csi.values().iter().enumerate() {
                t[[b * GRID_SYMBOLS + i / CSI_COLS, i % CSI_COLS]] = v as f64 * CSI_INPUT_SCALE;
            }
        }
        t
    }

    /// Per-row affine map of the CSI plus learned positional offsets:
    /// `[B*16 x 65] -> [B*16 x d]`.
    pub fn encode_csi(&self, g: &mut Graph, csi: NodeId) -> Result<NodeId> {
        let s = &self.store;
        let w = g.param(s, self.ids.csi_w);
        let b = g.param(s, self.ids.csi_b);
        let pos = g.param(s, self.ids.csi_pos);
        let x = g.matmul(csi, w)?;
        let x = g.add_row(x, b)?;
        g.add_tiled(x, pos)
    }

    /// Embedding lookup plus positions: `[B*32 x d]`, and the row mask that
    /// zeroes pad positions.
    pub fn embed_text(&self, g: &mut Graph, tokens: &[&[u16]]) -> Result<(NodeId, Vec<f64>)> {
        let mut ids = Vec::with_capacity(tokens.len() * MAX_TOKENS);
        let mut mask = Vec::with_capacity(tokens.len() * MAX_TOKENS);
        for seq in tokens {
            if seq.len() > MAX_TOKENS {
                return Err(PolicyError::Shape(format!("{} tokens, at most {MAX_TOKENS}", seq.len())));
            }
            for i in 0..MAX_TOKENS {
                let t = seq.get(i).copied().unwrap_or(PAD_ID);
                if t as usize >= VOCAB_SIZE {
                    return Err(PolicyError::TokenOutOfRange(t));
                }
                ids.push(t as usize);
                mask.push(if t == PAD_ID { 0.0 } else { 1.0 });
            }
        }
        let table = g.param(&self.store, self.ids.embed);
        let pos = g.param(&self.store, self.ids.text_pos);
        let e = g.gather(table, ids)?;
        Ok((g.add_tiled(e, pos)?, mask))
    }

    /// Sequence-length projection of the masked text, self-attention over
    /// the reduced rows, then cross-attention with the CSI rows as queries.
    /// Output is CSI-aligned: `[B*16 x d]`.
    pub fn connector(&self, g: &mut Graph, text: NodeId, mask: Vec<f64>, csi: NodeId) -> Result<NodeId> {
        let s = &self.store;
        let ids = &self.ids;
        let masked = g.row_mask(text, mask)?;
        let w = g.param(s, ids.len_proj);
        let z = g.seq_project(w, masked)?;

        let (wq, wk, wv) = (g.param(s, ids.sa_q), g.param(s, ids.sa_k), g.param(s, ids.sa_v));
        let q = g.matmul(z, wq)?;
        let k = g.matmul(z, wk)?;
        let v = g.matmul(z, wv)?;
        let z = g.attention(q, k, v, REDUCED_TEXT_LEN, REDUCED_TEXT_LEN, 1)?;

        let (wq, wk, wv) = (g.param(s, ids.ca_q), g.param(s, ids.ca_k), g.param(s, ids.ca_v));
        let q = g.matmul(csi, wq)?;
        let k = g.matmul(z, wk)?;
        let v = g.matmul(z, wv)?;
        g.attention(q, k, v, GRID_SYMBOLS, REDUCED_TEXT_LEN, 1)
    }

    /// Pre-norm transformer blocks over `[B*32 x d]` followed by a final
    /// layer norm.
    pub fn backbone(&self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        let s = &self.store;
        let len = 2 * GRID_SYMBOLS;
        let mut x = x;
        for b in &self.ids.blocks {
            let (g1, b1) = (g.param(s, b.ln1_g), g.param(s, b.ln1_b));
            let h = g.layer_norm(x, g1, b1)?;
            let (wq, wk, wv, wo) = (g.param(s, b.wq), g.param(s, b.wk), g.param(s, b.wv), g.param(s, b.wo));
            let q = g.matmul(h, wq)?;
            let k = g.matmul(h, wk)?;
            let v = g.matmul(h, wv)?;
            let a = g.attention(q, k, v, len, len, NUM_HEADS)?;
            let a = g.matmul(a, wo)?;
            x = g.add(x, a)?;

            let (g2, b2) = (g.param(s, b.ln2_g), g.param(s, b.ln2_b));
            let h = g.layer_norm(x, g2, b2)?;
            let (w1, c1, w2, c2) = (g.param(s, b.w1), g.param(s, b.b1), g.param(s, b.w2), g.param(s, b.b2));
            let f = g.matmul(h, w1)?;
            let f = g.add_row(f, c1)?;
            let f = g.gelu(f);
            let f = g.matmul(f, w2)?;
            let f = g.add_row(f, c2)?;
            x = g.add(x, f)?;
        }
        let (gf, bf) = (g.param(s, self.ids.lnf_g), g.param(s, self.ids.lnf_b));
        g.layer_norm(x, gf, bf)
    }

    /// Mean-pools the hidden rows and maps them to class log-probabilities.
    /// Returns `(pooled, log_probs)`.
    pub fn predict_preference(&self, g: &mut Graph, hidden: NodeId) -> Result<(NodeId, NodeId)> {
        let pooled = g.mean_blocks(hidden, 2 * GRID_SYMBOLS)?;
        let w = g.param(&self.store, self.ids.pref_w);
        let b = g.param(&self.store, self.ids.pref_b);
        let logits = g.matmul(pooled, w)?;
        let logits = g.add_row(logits, b)?;
        Ok((pooled, g.log_softmax(logits)))
    }

    /// One affine head per module over `[pooled | class probabilities]`,
    /// returning per-module log-probabilities.
    pub fn actor_forward(&self, g: &mut Graph, pooled: NodeId, pref: NodeId) -> Result<Vec<NodeId>> {
        let x = g.concat_cols(pooled, pref)?;
        (0..NUM_MODULES)
            .map(|m| {
                let w = g.param(&self.store, self.ids.actor_w[m]);
                let b = g.param(&self.store, self.ids.actor_b[m]);
                let l = g.matmul(x, w)?;
                let l = g.add_row(l, b)?;
                Ok(g.log_softmax(l))
            })
            .collect()
    }

    /// Records the full forward pass of a batch.
    pub fn forward(&self, g: &mut Graph, batch: &[PolicyInput]) -> Result<Forward> {
        if batch.is_empty() {
            return Err(PolicyError::Shape("empty batch".into()));
        }
        let csi = g.input(Self::csi_input(batch));
        let csi_enc = self.encode_csi(g, csi)?;
        let tokens: Vec<&[u16]> = batch.iter().map(|b| b.tokens.as_slice()).collect();
        let (text_emb, mask) = self.embed_text(g, &tokens)?;
        let connector = self.connector(g, text_emb, mask, csi_enc)?;
        let joint = g.concat_blocks(connector, GRID_SYMBOLS, csi_enc, GRID_SYMBOLS)?;
        let hidden = self.backbone(g, joint)?;
        let (pooled, pref_logp) = self.predict_preference(g, hidden)?;
        let pref = g.exp(pref_logp);
        let heads = self.actor_forward(g, pooled, pref)?;
        Ok(Forward {
            batch: batch.len(),
            csi_enc,
            text_emb,
            connector,
            hidden,
            pooled,
            pref_logp,
            pref,
            heads,
        })
    }

    /// Inference for a batch.
    pub fn infer(&self, batch: &[PolicyInput]) -> Result<Vec<PolicyOutput>> {
        let mut g = Graph::new();
        let f = self.forward(&mut g, batch)?;
        (0..batch.len()).map(|b| PolicyOutput::from_graph(&g, &f, b)).collect()
    }

    pub fn infer_one(&self, input: &PolicyInput) -> Result<PolicyOutput> {
        Ok(self.infer(std::slice::from_ref(input))?.remove(0))
    }
}

/// Per-module categorical distributions and the inferred preference for one
/// state.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    pub dists: Vec<Vec<f64>>,
    /// Probabilities of (LowBER, HighRate, Conventional).
    pub class_probs: [f64; NUM_CLASSES],
    /// Class-probability mixture of the canonical preference vectors.
    pub p_hat: PreferenceVector,
    /// Mean-pooled backbone output.
    pub hidden: Vec<f64>,
}

impl PolicyOutput {
    fn from_graph(g: &Graph, f: &Forward, b: usize) -> Result<Self> {
        let dists: Vec<Vec<f64>> = f.heads.iter().map(|&h| g.value(h).row(b).mapv(f64::exp).to_vec()).collect();
        let pref = g.value(f.pref).row(b);
        let class_probs = [pref[0], pref[1], pref[2]];
        if dists.iter().flatten().chain(class_probs.iter()).any(|x| !x.is_finite()) {
            return Err(PolicyError::NonFinite("policy output".into()));
        }
        Ok(Self {
            dists,
            class_probs,
            p_hat: mix_preference(class_probs)?,
            hidden: g.value(f.pooled).row(b).to_vec(),
        })
    }

    /// Most probable preference class, ties to the lower index.
    pub fn predicted_class(&self) -> PreferenceClass {
        PreferenceClass::from_index(argmax(&self.class_probs)).expect("three classes")
    }

    pub fn log_prob(&self, config: &LinkConfig) -> f64 {
        log_prob(&self.dists, &config.indices())
    }

    pub fn greedy_action(&self) -> LinkConfig {
        greedy_action(&self.dists)
    }

    pub fn sample_action(&self, seed: u64) -> (LinkConfig, f64) {
        sample_action(&self.dists, &mut ChaCha8Rng::seed_from_u64(seed))
    }
}

/// Mixture `sum_c probs[c] * class_to_p(c)`.
pub fn mix_preference(probs: [f64; NUM_CLASSES]) -> Result<PreferenceVector> {
    let mut p = [0.0; 3];
    for (c, &w) in PreferenceClass::ALL.iter().zip(&probs) {
        for (acc, v) in p.iter_mut().zip(c.preference().as_array()) {
            *acc += w * v;
        }
    }
    Ok(PreferenceVector::new(p)?)
}

/// First index of the maximum.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub fn log_prob(dists: &[Vec<f64>], idx: &ActionIndex) -> f64 {
    dists.iter().zip(idx).map(|(d, &i)| d[i].ln()).sum()
}

/// Per-module argmax, ties to the lowest option.
pub fn greedy_action(dists: &[Vec<f64>]) -> LinkConfig {
    let mut idx = [0usize; NUM_MODULES];
    for (slot, d) in idx.iter_mut().zip(dists) {
        *slot = argmax(d);
    }
    LinkConfig::from_indices(&idx).expect("head sizes match the catalog")
}

/// Independent inverse-CDF draw per module; returns the configuration and
/// its log-probability.
pub fn sample_action(dists: &[Vec<f64>], rng: &mut impl Rng) -> (LinkConfig, f64) {
    let mut idx = [0usize; NUM_MODULES];
    for (m, d) in dists.iter().enumerate() {
        let u: f64 = rng.random();
        let mut cum = 0.0;
        let mut pick = None;
        for (i, &p) in d.iter().enumerate() {
            cum += p;
            if p > 0.0 && u < cum {
                pick = Some(i);
                break;
            }
        }
        // Rounding can leave the cumulative sum just below u.
        idx[m] = pick.unwrap_or_else(|| d.iter().rposition(|&p| p > 0.0).unwrap_or(0));
        debug_assert!(idx[m] < OPTION_COUNTS[m]);
    }
    let lp = log_prob(dists, &idx);
    (LinkConfig::from_indices(&idx).expect("head sizes match the catalog"), lp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use linkforge_core::intent::tokenize;

    fn input(fill: f32, text: &str) -> PolicyInput {
        let mut v = vec![fill; GRID_SYMBOLS * CSI_COLS];
        for t in 0..GRID_SYMBOLS {
            v[t * CSI_COLS + CSI_COLS - 1] = 5.0;
        }
        PolicyInput {
            csi: CsiFeatures::from_values(v).unwrap(),
            tokens: tokenize(text),
        }
    }

    #[test]
    fn output_shapes() {
        let p = Policy::new(1);
        let mut g = Graph::new();
        let batch = vec![input(0.0, "low error please"), input(-3.0, "fast")];
        let f = p.forward(&mut g, &batch).unwrap();
        assert_eq!(g.value(f.csi_enc).dim(), (2 * 16, 64));
        assert_eq!(g.value(f.text_emb).dim(), (2 * 32, 64));
        assert_eq!(g.value(f.connector).dim(), (2 * 16, 64));
        assert_eq!(g.value(f.hidden).dim(), (2 * 32, 64));
        for (m, &h) in f.heads.iter().enumerate() {
            assert_eq!(g.value(h).dim(), (2, OPTION_COUNTS[m]));
        }
    }

    #[test]
    fn initial_policy_is_nearly_uniform() {
        let out = Policy::new(3).infer_one(&input(-10.0, "anything")).unwrap();
        for (d, &n) in out.dists.iter().zip(&OPTION_COUNTS) {
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for &p in d {
                assert!((p - 1.0 / n as f64).abs() < 1e-2);
            }
        }
    }

    #[test]
    fn zero_csi_and_weights_give_positions() {
        let mut p = Policy::new(0);
        p.store_mut().set("csi.w", Tensor::zeros((CSI_COLS, D_MODEL))).unwrap();
        let mut g = Graph::new();
        let csi = g.input(Tensor::zeros((GRID_SYMBOLS, CSI_COLS)));
        let y = p.encode_csi(&mut g, csi).unwrap();
        let pos = p.store().get(p.store().id("csi.pos").unwrap());
        assert_eq!(g.value(y), pos);
    }

    #[test]
    fn all_pad_rows_are_pad_embedding_plus_position() {
        let p = Policy::new(0);
        let mut g = Graph::new();
        let (e, mask) = p.embed_text(&mut g, &[&[]]).unwrap();
        assert!(mask.iter().all(|&m| m == 0.0));
        let table = p.store().get(p.store().id("text.embed").unwrap());
        let pos = p.store().get(p.store().id("text.pos").unwrap());
        for r in 0..MAX_TOKENS {
            let expected = &table.row(PAD_ID as usize) + &pos.row(r);
            assert_eq!(g.value(e).row(r), expected);
        }
    }

    #[test]
    fn out_of_vocabulary_token_is_rejected() {
        let p = Policy::new(0);
        let mut g = Graph::new();
        assert!(matches!(
            p.embed_text(&mut g, &[&[3, 256]]),
            Err(PolicyError::TokenOutOfRange(256))
        ));
    }

    #[test]
    fn zeroed_blocks_pass_input_through_final_norm() {
        let mut p = Policy::new(0);
        for i in 0..NUM_BLOCKS {
            for (n, r, c) in [
                ("attn.wo", D_MODEL, D_MODEL),
                ("ff.w2", FF_HIDDEN, D_MODEL),
            ] {
                p.store_mut().set(&format!("block{i}.{n}"), Tensor::zeros((r, c))).unwrap();
            }
        }
        let mut g = Graph::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Tensor::from_shape_simple_fn((32, D_MODEL), || rng.random::<f64>() - 0.5);
        let xi = g.input(x);
        let y = p.backbone(&mut g, xi).unwrap();
        let (gg, gb) = (g.input(ones_row(D_MODEL)), g.input(zeros_row(D_MODEL)));
        let expected = g.layer_norm(xi, gg, gb).unwrap();
        let diff = (g.value(y) - g.value(expected)).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
        assert!(diff < 1e-12);
    }

    #[test]
    fn inference_is_deterministic_and_graph_is_input_independent() {
        let p = Policy::new(9);
        let a = input(-40.0, "maximum reliability");
        let b = input(20.0, "");
        assert_eq!(p.infer_one(&a).unwrap(), p.infer_one(&a).unwrap());
        let mut ga = Graph::new();
        let mut gb = Graph::new();
        p.forward(&mut ga, std::slice::from_ref(&a)).unwrap();
        p.forward(&mut gb, std::slice::from_ref(&b)).unwrap();
        assert_eq!(ga.shapes(), gb.shapes());
    }

    #[test]
    fn extreme_csi_stays_finite() {
        let p = Policy::with_head_std(2, 0.2);
        for fill in [-40.0, 20.0] {
            let out = p.infer_one(&input(fill, "throughput")).unwrap();
            assert!(out.dists.iter().flatten().all(|x| x.is_finite()));
            assert!((out.class_probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn one_hot_sampling_is_deterministic() {
        let dists: Vec<Vec<f64>> = OPTION_COUNTS
            .iter()
            .map(|&n| {
                let mut d = vec![0.0; n];
                d[n - 1] = 1.0;
                d
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let (c, lp) = sample_action(&dists, &mut rng);
            assert_eq!(lp, 0.0);
            assert_eq!(c.indices().to_vec(), OPTION_COUNTS.iter().map(|n| n - 1).collect::<Vec<_>>());
        }
        assert_eq!(greedy_action(&dists), sample_action(&dists, &mut rng).0);
    }

    #[test]
    fn greedy_ties_go_low() {
        let dists: Vec<Vec<f64>> = OPTION_COUNTS.iter().map(|&n| vec![1.0 / n as f64; n]).collect();
        assert_eq!(greedy_action(&dists), LinkConfig::default());
    }
}
