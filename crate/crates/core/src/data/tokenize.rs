use crate::nn::{EmbeddingTable, PAD_INDEX};
use crate::tensor::Scalar;

/// Transcript length after padding or truncation.
pub const MAX_TOKENS: usize = 100;

/// Lowercases and splits a transcript into words. Punctuation becomes a
/// word break, except apostrophes between two letters or digits
/// ("don't" stays one word).
pub fn normalize_words(transcript: &str) -> Vec<String> {
    let chars: Vec<char> = transcript.to_lowercase().chars().collect();
    let mut cleaned = String::with_capacity(chars.len());
    for (i, &c) in chars.iter().enumerate() {
        let inner = |j: Option<usize>| {
            j.and_then(|j| chars.get(j))
                .is_some_and(|c| c.is_alphanumeric())
        };
        if c.is_alphanumeric() {
            cleaned.push(c);
        } else if matches!(c, '\'' | '\u{2019}') && inner(i.checked_sub(1)) && inner(Some(i + 1)) {
            cleaned.push('\'');
        } else {
            cleaned.push(' ');
        }
    }
    cleaned.split_whitespace().map(str::to_string).collect()
}

/// Token indices for the first `max_len` words, right-padded with the pad
/// index. Unknown words map to the OOV index.
pub fn tokenize_and_pad<T: Scalar>(
    transcript: &str,
    table: &EmbeddingTable<T>,
    max_len: usize,
) -> Vec<usize> {
    let mut tokens: Vec<usize> = normalize_words(transcript)
        .iter()
        .take(max_len)
        .map(|w| table.index_of(w))
        .collect();
    tokens.resize(max_len, PAD_INDEX);
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::OOV_INDEX;

    fn table() -> EmbeddingTable<f32> {
        let words = ["i", "am", "happy", "don't"];
        EmbeddingTable::from_entries(2, words.iter().map(|w| (w.to_string(), vec![1.0, 1.0])))
            .unwrap()
    }

    #[test]
    fn normalisation_rules() {
        assert_eq!(normalize_words("I am HAPPY!"), ["i", "am", "happy"]);
        assert_eq!(
            normalize_words("Don't 'quote' me, ok?"),
            ["don't", "quote", "me", "ok"]
        );
        assert_eq!(normalize_words("well...yes"), ["well", "yes"]);
        assert!(normalize_words("  ?! ").is_empty());
    }

    #[test]
    fn padding_and_truncation() {
        let t = table();
        let tokens = tokenize_and_pad("I am HAPPY!", &t, MAX_TOKENS);
        assert_eq!(tokens.len(), 100);
        assert_eq!(&tokens[..3], &[2, 3, 4]);
        assert!(tokens[3..].iter().all(|&x| x == PAD_INDEX));
        assert_eq!(tokenize_and_pad("", &t, MAX_TOKENS), vec![PAD_INDEX; 100]);
        let long: Vec<String> = (0..120)
            .map(|i| if i < 100 { "am".into() } else { "happy".into() })
            .collect();
        let tokens = tokenize_and_pad(&long.join(" "), &t, MAX_TOKENS);
        assert!(tokens.iter().all(|&x| x == 3));
        assert_eq!(
            tokenize_and_pad("zebra", &t, 3),
            vec![OOV_INDEX, PAD_INDEX, PAD_INDEX]
        );
    }
}
