use crate::error::{Error, Result};
use crate::Emotion;

/// Maps a raw annotation to one of the four classes. "excitement" is
/// folded into happiness; anything outside the five accepted names is
/// rejected. Matching ignores case and surrounding whitespace.
pub fn merge_labels(raw: &str) -> Result<Emotion> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "anger" => Ok(Emotion::Anger),
        "happiness" | "excitement" => Ok(Emotion::Happiness),
        "neutral" => Ok(Emotion::Neutral),
        "sadness" => Ok(Emotion::Sadness),
        _ => Err(Error::UnknownLabel(raw.to_string())),
    }
}
