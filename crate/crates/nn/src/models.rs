//! Graph classifier, conditional graph VAE, and link-prediction autoencoder.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::graph::GraphInput;
use crate::params::Params;
use crate::tape::{Result, Tape, Var};

pub const HIDDEN: usize = 64;
pub const LATENT: usize = 32;
pub const EMBED: usize = 16;
pub const LOGVAR_CLAMP: f64 = 20.0;
const ATTN_SLOPE: f64 = 0.2;

fn dense(t: &mut Tape, p: &Params, x: Var, w: usize, b: usize) -> Result<Var> {
    let w = t.param(p, w);
    let b = t.param(p, b);
    let xw = t.matmul(x, w)?;
    t.add_row(xw, b)
}

fn gcn_layer(t: &mut Tape, p: &Params, a: Var, x: Var, w: usize, b: usize) -> Result<Var> {
    let ax = t.matmul(a, x)?;
    dense(t, p, ax, w, b)
}

pub fn standard_normal<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample(StandardNormal))
}

// ---------------------------------------------------------------- classifier

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierConfig {
    pub in_dim: usize,
    pub hidden: usize,
    pub classes: usize,
    /// Attention-weighted neighbour aggregation instead of the mean.
    pub attention: bool,
}

impl ClassifierConfig {
    pub fn new(in_dim: usize, classes: usize) -> Self {
        Self {
            in_dim,
            hidden: HIDDEN,
            classes,
            attention: false,
        }
    }
}

struct SageLayer {
    w_self: usize,
    w_neigh: usize,
    bias: usize,
    attn: Option<(usize, usize)>,
}

/// Two SAGE layers, mean pooling, linear head.
pub struct SageClassifier {
    pub cfg: ClassifierConfig,
    pub params: Params,
    layers: [SageLayer; 2],
    head_w: usize,
    head_b: usize,
}

impl SageClassifier {
    pub fn new<R: Rng>(cfg: ClassifierConfig, rng: &mut R) -> Self {
        let mut p = Params::new();
        let mut layer = |p: &mut Params, k: usize, i: usize| SageLayer {
            w_self: p.glorot(&format!("sage{k}.w_self"), i, cfg.hidden, rng),
            w_neigh: p.glorot(&format!("sage{k}.w_neigh"), i, cfg.hidden, rng),
            bias: p.zeros(&format!("sage{k}.b"), 1, cfg.hidden),
            attn: cfg.attention.then(|| {
                (
                    p.glorot(&format!("sage{k}.a_src"), cfg.hidden, 1, rng),
                    p.glorot(&format!("sage{k}.a_dst"), cfg.hidden, 1, rng),
                )
            }),
        };
        let l0 = layer(&mut p, 0, cfg.in_dim);
        let l1 = layer(&mut p, 1, cfg.hidden);
        let head_w = p.glorot("head.w", cfg.hidden, cfg.classes, rng);
        let head_b = p.zeros("head.b", 1, cfg.classes);
        Self {
            cfg,
            params: p,
            layers: [l0, l1],
            head_w,
            head_b,
        }
    }

    fn layer(&self, t: &mut Tape, l: &SageLayer, h: Var, agg: Var, mask: &Array2<f64>) -> Result<Var> {
        let p = &self.params;
        let ws = t.param(p, l.w_self);
        let wn = t.param(p, l.w_neigh);
        let own = t.matmul(h, ws)?;
        let hn = t.matmul(h, wn)?;
        let neigh = match l.attn {
            None => t.matmul(agg, hn)?,
            Some((src, dst)) => {
                let a_src = t.param(p, src);
                let a_dst = t.param(p, dst);
                let s = t.matmul(hn, a_src)?;
                let d = t.matmul(hn, a_dst)?;
                let d = t.transpose(d);
                let scores = t.outer_add(s, d)?;
                let scores = t.leaky_relu(scores, ATTN_SLOPE);
                let att = t.masked_softmax_rows(scores, mask.clone())?;
                t.matmul(att, hn)?
            }
        };
        let sum = t.add(own, neigh)?;
        let b = t.param(p, l.bias);
        let out = t.add_row(sum, b)?;
        Ok(t.relu(out))
    }

    /// `1×classes` logits.
    pub fn logits(&self, t: &mut Tape, g: &GraphInput) -> Result<Var> {
        let x = t.constant(g.x.clone());
        let agg = t.constant(g.a_mean.clone());
        let h = self.layer(t, &self.layers[0], x, agg, &g.a)?;
        let h = self.layer(t, &self.layers[1], h, agg, &g.a)?;
        let pooled = t.mean_rows(h);
        dense(t, &self.params, pooled, self.head_w, self.head_b)
    }

    pub fn loss(&self, t: &mut Tape, g: &GraphInput, label: usize) -> Result<Var> {
        let l = self.logits(t, g)?;
        t.cross_entropy(l, &[label])
    }

    pub fn predict(&self, g: &GraphInput) -> Result<usize> {
        let mut t = Tape::new();
        let l = self.logits(&mut t, g)?;
        let row = t.value(l).row(0).to_owned();
        Ok(argmax(row.as_slice().expect("contiguous")))
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

// ---------------------------------------------------------------- cgvae

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgvaeConfig {
    pub in_dim: usize,
    pub n_categories: usize,
    pub hidden: usize,
    pub latent: usize,
    pub embed: usize,
    pub beta: f64,
}

impl CgvaeConfig {
    pub fn new(in_dim: usize, n_categories: usize) -> Self {
        Self {
            in_dim,
            n_categories,
            hidden: HIDDEN,
            latent: LATENT,
            embed: EMBED,
            beta: 1.0,
        }
    }
}

/// Conditional graph VAE: GCN encoder over `[x | category embedding]`,
/// feature and adjacency decoders conditioned on the same embedding.
pub struct Cgvae {
    pub cfg: CgvaeConfig,
    pub params: Params,
    emb: usize,
    enc: (usize, usize),
    mu: (usize, usize),
    logvar: (usize, usize),
    feat1: (usize, usize),
    feat2: (usize, usize),
    adj1: (usize, usize),
    adj2: (usize, usize),
}

/// Scalar parts of one CGVAE loss evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgvaeLoss {
    pub total: f64,
    pub feature: f64,
    pub adjacency: f64,
    pub kl: f64,
}

pub struct CgvaeOutput {
    pub loss: Var,
    pub parts: CgvaeLoss,
}

fn dense_pair<R: Rng>(p: &mut Params, name: &str, i: usize, o: usize, rng: &mut R) -> (usize, usize) {
    (p.glorot(&format!("{name}.w"), i, o, rng), p.zeros(&format!("{name}.b"), 1, o))
}

/// Identity on the off-diagonal, zero on the diagonal.
pub fn off_diagonal_mask(n: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, n), |(i, j)| if i == j { 0.0 } else { 1.0 })
}

impl Cgvae {
    pub fn new<R: Rng>(cfg: CgvaeConfig, rng: &mut R) -> Self {
        let mut p = Params::new();
        let emb = p.glorot("embedding", cfg.n_categories, cfg.embed, rng);
        let cond = cfg.latent + cfg.embed;
        let enc = dense_pair(&mut p, "enc", cfg.in_dim + cfg.embed, cfg.hidden, rng);
        let mu = dense_pair(&mut p, "enc_mu", cfg.hidden, cfg.latent, rng);
        let logvar = dense_pair(&mut p, "enc_logvar", cfg.hidden, cfg.latent, rng);
        let feat1 = dense_pair(&mut p, "dec_feat1", cond, cfg.hidden, rng);
        let feat2 = dense_pair(&mut p, "dec_feat2", cfg.hidden, cfg.in_dim, rng);
        let adj1 = dense_pair(&mut p, "dec_adj1", cond, cfg.hidden, rng);
        let adj2 = dense_pair(&mut p, "dec_adj2", cfg.hidden, cfg.embed, rng);
        Self {
            cfg,
            params: p,
            emb,
            enc,
            mu,
            logvar,
            feat1,
            feat2,
            adj1,
            adj2,
        }
    }

    fn embed(&self, t: &mut Tape, categories: &[usize]) -> Result<Var> {
        let table = t.param(&self.params, self.emb);
        t.lookup_rows(table, categories)
    }

    /// `(mu, logvar)`, each `N×latent`.
    pub fn encode(&self, t: &mut Tape, g: &GraphInput) -> Result<(Var, Var, Var)> {
        let p = &self.params;
        let e = self.embed(t, &g.categories)?;
        let x = t.constant(g.x.clone());
        let a = t.constant(g.a_gcn.clone());
        let xe = t.concat_cols(x, e)?;
        let h = gcn_layer(t, p, a, xe, self.enc.0, self.enc.1)?;
        let h = t.relu(h);
        let mu = gcn_layer(t, p, a, h, self.mu.0, self.mu.1)?;
        let lv = gcn_layer(t, p, a, h, self.logvar.0, self.logvar.1)?;
        let lv = t.clamp(lv, -LOGVAR_CLAMP, LOGVAR_CLAMP);
        Ok((mu, lv, e))
    }

    /// `(features N×F, edge probabilities N×N)` from latents and embeddings.
    pub fn decode(&self, t: &mut Tape, z: Var, e: Var) -> Result<(Var, Var)> {
        let p = &self.params;
        let ze = t.concat_cols(z, e)?;
        let hf = dense(t, p, ze, self.feat1.0, self.feat1.1)?;
        let hf = t.relu(hf);
        let xf = dense(t, p, hf, self.feat2.0, self.feat2.1)?;
        let ha = dense(t, p, ze, self.adj1.0, self.adj1.1)?;
        let ha = t.relu(ha);
        let emb = dense(t, p, ha, self.adj2.0, self.adj2.1)?;
        let logits = t.matmul_t(emb, emb)?;
        Ok((xf, t.sigmoid(logits)))
    }

    /// Loss with a caller-supplied `N×latent` noise sample.
    pub fn loss_with_noise(&self, t: &mut Tape, g: &GraphInput, eps: Array2<f64>) -> Result<CgvaeOutput> {
        let (mu, lv, e) = self.encode(t, g)?;
        let z = t.reparameterize(mu, lv, eps)?;
        let (xf, probs) = self.decode(t, z, e)?;
        let mse = t.mse(xf, &g.x)?;
        let mask = off_diagonal_mask(g.n());
        let bce = t.bce(probs, &g.a, Some(&mask))?;
        let kl = t.kl(mu, lv)?;
        let recon = t.add(mse, bce)?;
        let kl_w = t.scale(kl, self.cfg.beta);
        let loss = t.add(recon, kl_w)?;
        let parts = CgvaeLoss {
            total: t.scalar(loss),
            feature: t.scalar(mse),
            adjacency: t.scalar(bce),
            kl: t.scalar(kl),
        };
        Ok(CgvaeOutput { loss, parts })
    }

    pub fn loss<R: Rng>(&self, t: &mut Tape, g: &GraphInput, rng: &mut R) -> Result<CgvaeOutput> {
        let eps = standard_normal(rng, g.n(), self.cfg.latent);
        self.loss_with_noise(t, g, eps)
    }
}

// ---------------------------------------------------------------- link prediction

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkPredConfig {
    pub in_dim: usize,
    pub hidden: usize,
    pub latent: usize,
}

impl LinkPredConfig {
    pub fn new(in_dim: usize) -> Self {
        Self {
            in_dim,
            hidden: HIDDEN,
            latent: LATENT,
        }
    }
}

/// Two-layer GCN encoder with an inner-product decoder.
pub struct GraphAutoEncoder {
    pub cfg: LinkPredConfig,
    pub params: Params,
    l1: (usize, usize),
    l2: (usize, usize),
}

impl GraphAutoEncoder {
    pub fn new<R: Rng>(cfg: LinkPredConfig, rng: &mut R) -> Self {
        let mut p = Params::new();
        let l1 = dense_pair(&mut p, "gcn1", cfg.in_dim, cfg.hidden, rng);
        let l2 = dense_pair(&mut p, "gcn2", cfg.hidden, cfg.latent, rng);
        Self { cfg, params: p, l1, l2 }
    }

    /// Node embeddings `N×latent` given features and a normalised adjacency.
    pub fn encode(&self, t: &mut Tape, x: Var, a_norm: Var) -> Result<Var> {
        let h = gcn_layer(t, &self.params, a_norm, x, self.l1.0, self.l1.1)?;
        let h = t.relu(h);
        gcn_layer(t, &self.params, a_norm, h, self.l2.0, self.l2.1)
    }

    /// Edge probabilities `sigmoid(Z Zᵀ)`.
    pub fn decode(&self, t: &mut Tape, z: Var) -> Result<Var> {
        let logits = t.matmul_t(z, z)?;
        Ok(t.sigmoid(logits))
    }

    /// Weighted BCE of reconstructed edges against `target`.
    pub fn loss(&self, t: &mut Tape, x: &Array2<f64>, a_norm: &Array2<f64>, target: &Array2<f64>, weight: &Array2<f64>) -> Result<Var> {
        let x = t.constant(x.clone());
        let a = t.constant(a_norm.clone());
        let z = self.encode(t, x, a)?;
        let p = self.decode(t, z)?;
        t.bce(p, target, Some(weight))
    }
}
