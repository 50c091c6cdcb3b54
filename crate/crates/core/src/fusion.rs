//! Feature-level fusion of acoustic and text features.
//!
//! - `F1`: the concatenated features go straight to the classifier.
//! - `F2`: one gate over the concatenation.
//! - `F3`: one gate per modality, applied before concatenation.
//!
//! A gate computes `q = sigmoid(tanh(W c + b)) * c` elementwise.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Module, Param, Tape, Var};
use crate::error::{invalid, Error, Result};
use crate::nn::{fan_in_bound, Dense, LEAKY_SLOPE};
use crate::tensor::{Scalar, Tensor};
use crate::Emotion;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FusionMode {
    F1,
    F2,
    F3,
}

impl FusionMode {
    pub const ALL: [FusionMode; 3] = [FusionMode::F1, FusionMode::F2, FusionMode::F3];
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FusionMode::F1 => "F1",
            FusionMode::F2 => "F2",
            FusionMode::F3 => "F3",
        })
    }
}

impl FromStr for FusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "").as_str() {
            "F1" | "FI" => Ok(FusionMode::F1),
            "F2" | "FII" => Ok(FusionMode::F2),
            "F3" | "FIII" => Ok(FusionMode::F3),
            _ => Err(invalid!(
                "unknown fusion mode {s:?} (expected F1, F2 or F3)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionConfig {
    pub mode: FusionMode,
    pub acoustic_width: usize,
    pub text_width: usize,
    pub hidden: usize,
}

impl FusionConfig {
    pub fn paper(mode: FusionMode) -> Self {
        Self {
            mode,
            acoustic_width: 2048,
            text_width: 4800,
            hidden: 512,
        }
    }

    pub fn merged_width(&self) -> usize {
        self.acoustic_width + self.text_width
    }

    pub fn validate(&self) -> Result<()> {
        if self.acoustic_width == 0 || self.text_width == 0 || self.hidden == 0 {
            return Err(invalid!("fusion widths must be positive"));
        }
        Ok(())
    }
}

/// Elementwise sigmoid gate computed from its own input.
#[derive(Clone, Debug)]
pub struct GatedAttention<T: Scalar> {
    /// `[D, D]`
    pub weight: Param<T>,
    /// `[D]`
    pub bias: Param<T>,
}

impl<T: Scalar> GatedAttention<T> {
    pub fn new(name: &str, width: usize, rng: &mut impl Rng) -> Self {
        let bound = fan_in_bound(width);
        Self {
            weight: Param::new(
                format!("{name}.weight"),
                Tensor::uniform(vec![width, width], bound, rng),
            ),
            bias: Param::new(format!("{name}.bias"), Tensor::zeros(vec![width])),
        }
    }

    pub fn width(&self) -> usize {
        self.bias.value().len()
    }

    /// `(beta, q)` for an input `c: [D]`.
    pub fn forward<'t>(
        &self,
        tape: &'t Tape<T>,
        c: Var<'t, T>,
    ) -> Result<(Var<'t, T>, Var<'t, T>)> {
        if c.shape() != [self.width()] {
            return Err(Error::shape("gated_attention", &c.shape(), &[self.width()]));
        }
        let h = tape
            .param(&self.weight)
            .matvec(c)?
            .add(tape.param(&self.bias))?
            .tanh()?;
        let beta = h.sigmoid()?;
        Ok((beta, beta.mul(c)?))
    }
}

impl<T: Scalar> Module<T> for GatedAttention<T> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        f(&self.weight);
        f(&self.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FusionOutput<'t, T: Scalar> {
    pub logits: Var<'t, T>,
    /// The vector the classifier sees.
    pub merged: Var<'t, T>,
}

#[derive(Clone, Debug)]
pub struct FusionNet<T: Scalar> {
    /// Empty for F1, one gate for F2, acoustic then text gate for F3.
    pub gates: Vec<GatedAttention<T>>,
    pub hidden: Dense<T>,
    pub classifier: Dense<T>,
    config: FusionConfig,
}

impl<T: Scalar> FusionNet<T> {
    pub fn new(config: FusionConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let gates = match config.mode {
            FusionMode::F1 => vec![],
            FusionMode::F2 => vec![GatedAttention::new(
                "fusion.gate",
                config.merged_width(),
                rng,
            )],
            FusionMode::F3 => vec![
                GatedAttention::new("fusion.gate_acoustic", config.acoustic_width, rng),
                GatedAttention::new("fusion.gate_text", config.text_width, rng),
            ],
        };
        Ok(Self {
            gates,
            hidden: Dense::new("fusion.hidden", config.merged_width(), config.hidden, rng),
            classifier: Dense::new("fusion.classifier", config.hidden, Emotion::COUNT, rng),
            config,
        })
    }

    pub fn config(&self) -> &FusionConfig {
        &self.config
    }

    pub fn mode(&self) -> FusionMode {
        self.config.mode
    }

    /// The merged vector for each mode, before the classifier.
    pub fn merge<'t>(
        &self,
        tape: &'t Tape<T>,
        acoustic: Var<'t, T>,
        text: Var<'t, T>,
    ) -> Result<Var<'t, T>> {
        let check = |v: Var<'t, T>, want: usize, what: &str| {
            let s = v.shape();
            if s != [want] {
                Err(invalid!(
                    "{what} feature has shape {s:?}, expected [{want}]"
                ))
            } else {
                Ok(())
            }
        };
        check(acoustic, self.config.acoustic_width, "acoustic")?;
        check(text, self.config.text_width, "text")?;
        match self.config.mode {
            FusionMode::F1 => Var::concat(&[acoustic, text], 0),
            FusionMode::F2 => {
                let c = Var::concat(&[acoustic, text], 0)?;
                Ok(self.gates[0].forward(tape, c)?.1)
            }
            FusionMode::F3 => {
                let a = self.gates[0].forward(tape, acoustic)?.1;
                let t = self.gates[1].forward(tape, text)?.1;
                Var::concat(&[a, t], 0)
            }
        }
    }

    pub fn forward<'t>(
        &self,
        tape: &'t Tape<T>,
        acoustic: Var<'t, T>,
        text: Var<'t, T>,
    ) -> Result<FusionOutput<'t, T>> {
        let merged = self.merge(tape, acoustic, text)?;
        let h = self.hidden.forward(tape, merged)?.leaky_relu(LEAKY_SLOPE)?;
        Ok(FusionOutput {
            logits: self.classifier.forward(tape, h)?,
            merged,
        })
    }

    /// Eval-mode logits from plain feature vectors.
    pub fn logits_of(&self, acoustic: &[T], text: &[T]) -> Result<Vec<T>> {
        let tape = Tape::inference();
        let a = tape.constant(Tensor::from_vec(acoustic.to_vec()));
        let t = tape.constant(Tensor::from_vec(text.to_vec()));
        Ok(self.forward(&tape, a, t)?.logits.value().data().to_vec())
    }
}

impl<T: Scalar> Module<T> for FusionNet<T> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        for g in &self.gates {
            g.visit_params(f);
        }
        self.hidden.visit_params(f);
        self.classifier.visit_params(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        for g in &mut self.gates {
            g.visit_params_mut(f);
        }
        self.hidden.visit_params_mut(f);
        self.classifier.visit_params_mut(f);
    }
}
