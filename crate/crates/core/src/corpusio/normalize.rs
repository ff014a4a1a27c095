//! Punctuation normalization.
//!
//! A subset of the Moses `normalize-punctuation.perl` replacement table:
//!
//! | input                         | output   |
//! |-------------------------------|----------|
//! | `` ` `` `´` `‚`               | `'`      |
//! | `„` `“` `”` `«` `»`           | `"`      |
//! | `‘`                           | `'`      |
//! | `’` between two letters       | `'`      |
//! | `’` elsewhere                 | `"`      |
//! | `–` (en dash)                 | `-`      |
//! | `—` (em dash)                 | ` - `    |
//! | `…`                           | `...`    |
//! | `''`                          | `"`      |
//! | any Unicode white space       | ` `      |
//! | `\r`, U+FEFF, U+200B          | removed  |
//!
//! The spacing heuristics of the Moses script (`"60 %"` → `"60%"` and the
//! like) are deliberately left out because they fight the tokenizer.
//! Runs of spaces are collapsed and the result is trimmed.

/// Map Unicode punctuation variants to ASCII and collapse white space.
pub fn normalize(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut mapped = String::with_capacity(text.len());
    for (i, &c) in chars.iter().enumerate() {
        match c {
            '\r' | '\u{feff}' | '\u{200b}' => {}
            '`' | '´' | '‚' | '‘' => mapped.push('\''),
            '„' | '“' | '”' | '«' | '»' => mapped.push('"'),
            '’' => {
                let before = i > 0 && chars[i - 1].is_alphabetic();
                let after = chars.get(i + 1).is_some_and(|n| n.is_alphabetic());
                mapped.push(if before && after { '\'' } else { '"' });
            }
            '–' => mapped.push('-'),
            '—' => mapped.push_str(" - "),
            '…' => mapped.push_str("..."),
            c if c.is_whitespace() || c.is_control() => mapped.push(' '),
            c => mapped.push(c),
        }
    }
    let mapped = mapped.replace("''", "\"");

    let mut out = String::with_capacity(mapped.len());
    for word in mapped.split(' ').filter(|w| !w.is_empty()) {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}
