//! Tokenization shared by the dataset, the grammar's literal matching and the
//! feature extractor.

use crate::decimal::Decimal;

/// Lowercases and splits on whitespace and punctuation. A run of digits with
/// embedded `,` or `.` separators (`127,541`, `2.5`) stays one token.
pub fn tokenize(s: &str) -> Vec<String> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_ascii_digit() {
            let mut tok = String::new();
            while i < chars.len() {
                let d = chars[i];
                let sep = (d == ',' || d == '.')
                    && !tok.is_empty()
                    && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
                if d.is_ascii_digit() || sep {
                    tok.push(d);
                    i += 1;
                } else {
                    break;
                }
            }
            out.push(tok);
        } else if c.is_alphanumeric() {
            let mut tok = String::new();
            while i < chars.len() && chars[i].is_alphanumeric() {
                tok.extend(chars[i].to_lowercase());
                i += 1;
            }
            out.push(tok);
        } else {
            i += 1;
        }
    }
    out
}

/// Numeric reading of a token, ignoring thousands separators.
pub fn token_number(tok: &str) -> Option<Decimal> {
    if !tok.starts_with(|c: char| c.is_ascii_digit()) {
        return None;
    }
    tok.replace(',', "").parse().ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_and_lowercases() {
        assert_eq!(
            tokenize("How many times, after 2007?"),
            vec!["how", "many", "times", "after", "2007"]
        );
        assert_eq!(tokenize("Attendance of 127,541."), vec!["attendance", "of", "127,541"]);
        assert_eq!(tokenize("NW-Cup's 2.5"), vec!["nw", "cup", "s", "2.5"]);
        assert!(tokenize("  ?! ").is_empty());
    }

    #[test]
    fn numeric_tokens() {
        assert_eq!(token_number("127,541"), Some(Decimal::from_int(127541)));
        assert_eq!(token_number("2007"), Some(Decimal::from_int(2007)));
        assert_eq!(token_number("abc"), None);
    }
}
