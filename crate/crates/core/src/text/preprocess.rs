//! Lowercasing tokenizer with URL, hashtag and mention placeholders.

pub const URL: &str = "<url>";
pub const HASHTAG: &str = "<hashtag>";
pub const MENTION: &str = "<mention>";

fn is_word(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn starts_url(s: &str) -> bool {
    s.starts_with("http://") || s.starts_with("https://") || s.starts_with("www.")
}

/// Splits `raw` into lowercase tokens.
///
/// Whitespace separates chunks. Inside a chunk, a URL (`http://`, `https://`
/// or `www.`) swallows the rest of the chunk, `#word` and `@word` become
/// placeholders, runs of letters, digits and `_` form words, and every other
/// character is its own token. Placeholder spellings are recognized verbatim
/// so the function is idempotent on its own joined output.
pub fn preprocess(raw: &str) -> Vec<String> {
    let lower = raw.to_lowercase();
    let mut out = Vec::new();
    for chunk in lower.split_whitespace() {
        let mut rest = chunk;
        while !rest.is_empty() {
            if starts_url(rest) {
                out.push(URL.to_string());
                break;
            }
            if let Some(p) = [URL, HASHTAG, MENTION].into_iter().find(|p| rest.starts_with(p)) {
                out.push(p.to_string());
                rest = &rest[p.len()..];
                continue;
            }
            let mut chars = rest.char_indices();
            let (_, c) = chars.next().expect("nonempty");
            if c == '#' || c == '@' {
                let word_len: usize = rest[1..].chars().take_while(|&c| is_word(c)).map(char::len_utf8).sum();
                if word_len > 0 {
                    out.push(if c == '#' { HASHTAG } else { MENTION }.to_string());
                    rest = &rest[1 + word_len..];
                    continue;
                }
            }
            if is_word(c) {
                let len: usize = rest.chars().take_while(|&c| is_word(c)).map(char::len_utf8).sum();
                out.push(rest[..len].to_string());
                rest = &rest[len..];
            } else {
                out.push(c.to_string());
                rest = &rest[c.len_utf8()..];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        preprocess(s)
    }

    #[test]
    fn placeholders_and_punctuation() {
        assert_eq!(
            toks("Check HTTP://T.co/x #MAGA @User!"),
            ["check", "<url>", "<hashtag>", "<mention>", "!"]
        );
        assert_eq!(toks("see www.example.com now"), ["see", "<url>", "now"]);
        assert_eq!(toks("a # b @"), ["a", "#", "b", "@"]);
        assert_eq!(toks("don't"), ["don", "'", "t"]);
    }

    #[test]
    fn empty_and_case() {
        assert!(toks("").is_empty());
        assert!(toks("   \t\n").is_empty());
        assert_eq!(toks("ABC abc"), ["abc", "abc"]);
    }

    #[test]
    fn unicode_words_survive() {
        assert_eq!(toks("Ça VA, señor"), ["ça", "va", ",", "señor"]);
    }

    proptest! {
        #[test]
        fn idempotent_on_joined_output(s in "[a-zA-Z0-9#@:/.,!?' _-]{0,60}") {
            let once = preprocess(&s);
            let twice = preprocess(&once.join(" "));
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn idempotent_with_urls(words in proptest::collection::vec(
            prop_oneof![Just("http://t.co/Ab".to_string()), Just("#Tag".to_string()), Just("@bob:".to_string()), "[a-z!?]{1,6}"], 0..8)) {
            let s = words.join(" ");
            let once = preprocess(&s);
            prop_assert_eq!(preprocess(&once.join(" ")), once);
        }
    }
}
