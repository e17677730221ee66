//! Whitespace-and-punctuation tokenizer.
//!
//! A token is either a maximal run of word characters (alphanumeric or `_`)
//! or a single non-whitespace, non-word character. Whitespace separates
//! tokens and is never a token itself. This is the unit for generated code
//! size and for prompt truncation budgets.

fn is_word(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Byte ranges of every token in `text`, in order.
pub fn token_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut word_start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if is_word(c) {
            word_start.get_or_insert(i);
            continue;
        }
        if let Some(start) = word_start.take() {
            spans.push((start, i));
        }
        if !c.is_whitespace() {
            spans.push((i, i + c.len_utf8()));
        }
    }
    if let Some(start) = word_start {
        spans.push((start, text.len()));
    }
    spans
}

pub fn count_tokens(text: &str) -> usize {
    token_spans(text).len()
}

/// Longest prefix of `text` holding at most `budget` tokens.
pub fn truncate_to_tokens(text: &str, budget: usize) -> &str {
    let spans = token_spans(text);
    if spans.len() <= budget {
        return text;
    }
    if budget == 0 {
        return "";
    }
    &text[..spans[budget - 1].1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_words_and_punctuation() {
        let text = "const x = f(a_b, 42);";
        let toks: Vec<&str> = token_spans(text).iter().map(|&(s, e)| &text[s..e]).collect();
        assert_eq!(toks, ["const", "x", "=", "f", "(", "a_b", ",", "42", ")", ";"]);
    }

    #[test]
    fn empty_and_whitespace() {
        assert_eq!(count_tokens(""), 0);
        assert_eq!(count_tokens(" \n\t "), 0);
    }

    #[test]
    fn truncation_keeps_whole_tokens() {
        assert_eq!(truncate_to_tokens("alpha beta gamma", 2), "alpha beta");
        assert_eq!(truncate_to_tokens("alpha beta", 5), "alpha beta");
        assert_eq!(truncate_to_tokens("alpha", 0), "");
    }
}
