//! Dual-branch text network.
//!
//! Both branches read the same embedded token sequence. The left branch
//! runs a BiLSTM and then n-gram convolutions; the right branch applies
//! n-gram convolutions to the embeddings directly. For every n-gram width
//! the right branch scores the left branch position by position:
//!
//! ```text
//! s_i = <b_i, a_i>,   alpha = softmax(s),   H = sum_i alpha_i * a_i
//! ```
//!
//! The attended vectors (optionally joined by the max-pooled right branch)
//! pass through a dense stack whose last hidden layer is the text feature.

use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::autograd::{Module, Padding, Param, Tape, Var};
use crate::error::{invalid, Error, Result};
use crate::nn::{dropout, BiLstm, Conv1dLayer, Dense, EmbeddingTable, LEAKY_SLOPE};
use crate::tensor::{Scalar, Tensor};
use crate::Emotion;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextConfig {
    /// Tokens per transcript after padding or truncation.
    pub max_len: usize,
    /// BiLSTM hidden size per direction.
    pub hidden: usize,
    /// n-gram convolution widths.
    pub widths: Vec<usize>,
    /// Output channels of every n-gram convolution.
    pub filters: usize,
    pub dense_width: usize,
    pub feature_width: usize,
    pub dropout: f64,
    /// Also feed the max-pooled right-branch outputs to the dense stack.
    pub include_right_pooled: bool,
}

impl TextConfig {
    pub const PAPER_FEATURE_WIDTH: usize = 4800;

    pub fn paper() -> Self {
        Self {
            max_len: 100,
            hidden: 64,
            widths: vec![1, 3, 5],
            filters: 8,
            dense_width: 512,
            feature_width: Self::PAPER_FEATURE_WIDTH,
            dropout: 0.3,
            include_right_pooled: true,
        }
    }

    pub fn toy() -> Self {
        Self {
            hidden: 8,
            dense_width: 32,
            feature_width: 48,
            dropout: 0.0,
            ..Self::paper()
        }
    }

    /// Width of the vector entering the dense stack.
    pub fn summary_width(&self) -> usize {
        let per_branch = self.widths.len() * self.filters;
        if self.include_right_pooled {
            2 * per_branch
        } else {
            per_branch
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_len == 0 || self.hidden == 0 || self.filters == 0 {
            return Err(invalid!(
                "text max_len, hidden and filters must be positive"
            ));
        }
        if self.widths.is_empty() || self.widths.contains(&0) {
            return Err(invalid!(
                "text n-gram widths must be non-empty and positive"
            ));
        }
        if self.dense_width == 0 || self.feature_width == 0 {
            return Err(invalid!("text dense widths must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(invalid!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        Ok(())
    }
}

/// Attention weights over positions and the attended vector.
#[derive(Clone, Copy, Debug)]
pub struct AttentionSummary<'t, T: Scalar> {
    /// `[T]`
    pub alpha: Var<'t, T>,
    /// `[C]`
    pub context: Var<'t, T>,
}

/// Cross-attention of `b` onto `a`, both `[T, C]`.
pub fn cross_attention<'t, T: Scalar>(
    a: Var<'t, T>,
    b: Var<'t, T>,
) -> Result<AttentionSummary<'t, T>> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa != sb || sa.len() != 2 {
        return Err(Error::shape("cross_attention", &sa, &sb));
    }
    let steps = sa[0];
    let alpha = a.mul(b)?.sum_axis(1)?.softmax()?;
    let context = alpha
        .reshape(vec![1, steps])?
        .matmul(a)?
        .reshape(vec![sa[1]])?;
    Ok(AttentionSummary { alpha, context })
}

#[derive(Clone, Debug)]
pub struct TextOutput<'t, T: Scalar> {
    pub logits: Var<'t, T>,
    pub feature: Var<'t, T>,
    /// One summary per n-gram width.
    pub attention: Vec<AttentionSummary<'t, T>>,
}

#[derive(Clone, Debug)]
pub struct TextNet<T: Scalar> {
    pub embeddings: Arc<EmbeddingTable<T>>,
    pub bilstm: BiLstm<T>,
    pub left: Vec<Conv1dLayer<T>>,
    pub right: Vec<Conv1dLayer<T>>,
    pub hidden: Dense<T>,
    pub feature: Dense<T>,
    pub classifier: Dense<T>,
    config: TextConfig,
}

impl<T: Scalar> TextNet<T> {
    pub fn new(
        config: TextConfig,
        embeddings: Arc<EmbeddingTable<T>>,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        config.validate()?;
        let dim = embeddings.dim();
        let bilstm = BiLstm::new("text.bilstm", dim, config.hidden, rng);
        let left = ngram_convs(&config, "left", 2 * config.hidden, rng);
        let right = ngram_convs(&config, "right", dim, rng);
        Ok(Self {
            embeddings,
            bilstm,
            left,
            right,
            hidden: Dense::new(
                "text.hidden",
                config.summary_width(),
                config.dense_width,
                rng,
            ),
            feature: Dense::new(
                "text.feature",
                config.dense_width,
                config.feature_width,
                rng,
            ),
            classifier: Dense::new("text.classifier", config.feature_width, Emotion::COUNT, rng),
            config,
        })
    }

    pub fn config(&self) -> &TextConfig {
        &self.config
    }

    pub fn feature_width(&self) -> usize {
        self.config.feature_width
    }

    /// Forward pass over `max_len` token indices. Dropout is active only
    /// when `rng` is given.
    pub fn forward<'t>(
        &self,
        tape: &'t Tape<T>,
        tokens: &[usize],
        mut rng: Option<&mut dyn RngCore>,
    ) -> Result<TextOutput<'t, T>> {
        if tokens.len() != self.config.max_len {
            return Err(invalid!(
                "text input has {} tokens, expected {}",
                tokens.len(),
                self.config.max_len
            ));
        }
        let emb = self.embeddings.lookup(tape, tokens)?;
        let left_in = self.bilstm.forward(tape, emb)?.transpose()?;
        let right_in = emb.transpose()?;
        let mut contexts = Vec::with_capacity(self.left.len());
        let mut pooled = Vec::with_capacity(self.right.len());
        let mut attention = Vec::with_capacity(self.left.len());
        for (lc, rc) in self.left.iter().zip(&self.right) {
            // [C, T] channel-major outputs, transposed to [T, C] per position.
            let a = lc.forward(tape, left_in)?.leaky_relu(LEAKY_SLOPE)?;
            let b = rc.forward(tape, right_in)?.leaky_relu(LEAKY_SLOPE)?;
            let summary = cross_attention(a.transpose()?, b.transpose()?)?;
            contexts.push(summary.context);
            attention.push(summary);
            if self.config.include_right_pooled {
                let c = b.shape()[0];
                pooled.push(b.max_pool(self.config.max_len)?.reshape(vec![c])?);
            }
        }
        contexts.extend(pooled);
        let joined = Var::concat(&contexts, 0)?;
        let h = self.hidden.forward(tape, joined)?.leaky_relu(LEAKY_SLOPE)?;
        let p = self.config.dropout;
        let h = dropout(h, p, rng.as_mut().map(|r| &mut **r as &mut dyn RngCore))?;
        let feature = self.feature.forward(tape, h)?.leaky_relu(LEAKY_SLOPE)?;
        let dropped = dropout(
            feature,
            p,
            rng.as_mut().map(|r| &mut **r as &mut dyn RngCore),
        )?;
        let logits = self.classifier.forward(tape, dropped)?;
        Ok(TextOutput {
            logits,
            feature,
            attention,
        })
    }

    /// Eval-mode feature vector.
    pub fn feature_of(&self, tokens: &[usize]) -> Result<Vec<T>> {
        let tape = Tape::inference();
        Ok(self
            .forward(&tape, tokens, None)?
            .feature
            .value()
            .data()
            .to_vec())
    }

    /// Eval-mode logits.
    pub fn logits_of(&self, tokens: &[usize]) -> Result<Vec<T>> {
        let tape = Tape::inference();
        Ok(self
            .forward(&tape, tokens, None)?
            .logits
            .value()
            .data()
            .to_vec())
    }
}

fn ngram_convs<T: Scalar>(
    config: &TextConfig,
    side: &str,
    in_ch: usize,
    rng: &mut impl Rng,
) -> Vec<Conv1dLayer<T>> {
    config
        .widths
        .iter()
        .map(|&w| {
            Conv1dLayer::new(
                &format!("text.{side}.conv{w}"),
                in_ch,
                config.filters,
                w,
                Padding::Same,
                rng,
            )
        })
        .collect()
}

/// Predicted class; ties go to the lowest class index.
pub fn text_classify<T: Scalar>(net: &TextNet<T>, tokens: &[usize]) -> Result<usize> {
    Ok(classify_logits(&net.logits_of(tokens)?))
}

/// Argmax with ties broken toward the lowest index.
pub fn classify_logits<T: Scalar>(logits: &[T]) -> usize {
    Tensor::from_vec(logits.to_vec()).argmax().unwrap_or(0)
}

impl<T: Scalar> Module<T> for TextNet<T> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        self.bilstm.visit_params(f);
        for c in self.left.iter().chain(&self.right) {
            c.visit_params(f);
        }
        self.hidden.visit_params(f);
        self.feature.visit_params(f);
        self.classifier.visit_params(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        self.bilstm.visit_params_mut(f);
        for c in self.left.iter_mut().chain(&mut self.right) {
            c.visit_params_mut(f);
        }
        self.hidden.visit_params_mut(f);
        self.feature.visit_params_mut(f);
        self.classifier.visit_params_mut(f);
    }
}
