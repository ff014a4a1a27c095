/// Characters split off the edges of a white-space delimited chunk.
const DETACHABLE: &[char] = &['.', ',', ';', ':', '!', '?', '(', ')', '"', '\''];

/// French elided articles and conjunctions; `l'avion` becomes `l'` `avion`.
const ELISIONS: &[&str] = &[
    "c", "d", "j", "l", "m", "n", "s", "t", "qu", "jusqu", "lorsqu", "puisqu", "quoiqu",
];

fn is_elision(head: &str) -> bool {
    !head.is_empty() && ELISIONS.contains(&head.to_lowercase().as_str())
}

/// Split normalized text into tokens.
///
/// White space separates chunks; clause and terminal punctuation is peeled
/// off the front and back of each chunk as single-character tokens. Hyphens
/// and apostrophes inside words stay put, except after a French elision
/// prefix where the apostrophe stays attached to the prefix.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        split_chunk(chunk, &mut out);
    }
    out
}

fn split_chunk(chunk: &str, out: &mut Vec<String>) {
    let mut rest = chunk;
    while let Some(c) = rest.chars().next() {
        if !DETACHABLE.contains(&c) {
            break;
        }
        out.push(c.to_string());
        rest = &rest[c.len_utf8()..];
    }

    let mut trailing = Vec::new();
    while let Some(c) = rest.chars().next_back() {
        if !DETACHABLE.contains(&c) {
            break;
        }
        let head = &rest[..rest.len() - c.len_utf8()];
        if c == '\'' && is_elision(head) {
            break;
        }
        trailing.push(c);
        rest = head;
    }

    while !rest.is_empty() {
        match elision_split(rest) {
            Some(at) => {
                out.push(rest[..at].to_string());
                rest = &rest[at..];
            }
            None => {
                out.push(rest.to_string());
                break;
            }
        }
    }
    out.extend(trailing.into_iter().rev().map(String::from));
}

fn elision_split(word: &str) -> Option<usize> {
    let idx = word.find('\'')?;
    let next = word[idx + 1..].chars().next()?;
    (is_elision(&word[..idx]) && next.is_alphabetic()).then_some(idx + 1)
}
