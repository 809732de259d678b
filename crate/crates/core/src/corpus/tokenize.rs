//! Rule-based tokenizer and sentence splitter.

/// Punctuation that is split off the edges of a whitespace-delimited chunk.
pub fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{00A1}' // ¡
                | '\u{00AB}' // «
                | '\u{00BB}' // »
                | '\u{00BF}' // ¿
                | '\u{2010}'..='\u{2027}'
                | '\u{2030}'..='\u{205E}'
                | '\u{3001}'..='\u{3003}'
                | '\u{3008}'..='\u{3011}'
        )
}

/// Splits on Unicode whitespace, then peels leading and trailing punctuation
/// characters into single-character tokens. Interior punctuation (apostrophes,
/// hyphens, decimal points) stays attached.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        push_chunk(chunk, &mut out);
    }
    out
}

fn push_chunk(chunk: &str, out: &mut Vec<String>) {
    let start = chunk
        .char_indices()
        .find(|&(_, c)| !is_punctuation(c))
        .map(|(i, _)| i);
    let Some(start) = start else {
        out.extend(chunk.chars().map(String::from));
        return;
    };
    let end = chunk
        .char_indices()
        .rev()
        .find(|&(_, c)| !is_punctuation(c))
        .map(|(i, c)| i + c.len_utf8())
        .unwrap_or(chunk.len());

    out.extend(chunk[..start].chars().map(String::from));
    out.push(chunk[start..end].to_string());
    out.extend(chunk[end..].chars().map(String::from));
}

/// Sentences of one raw paragraph: one per line when the paragraph spans
/// several lines, else split after `.`, `?` or `!` followed by whitespace.
pub fn split_sentences<'a>(lines: &[&'a str]) -> Vec<&'a str> {
    if lines.len() > 1 {
        return lines
            .iter()
            .map(|l| l.trim())
            .filter(|l| !l.is_empty())
            .collect();
    }
    let Some(text) = lines.first() else {
        return Vec::new();
    };

    let mut sentences = Vec::new();
    let mut begin = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '?' | '!') {
            if let Some(&(_, next)) = chars.peek() {
                if next.is_whitespace() {
                    let end = i + c.len_utf8();
                    sentences.push(&text[begin..end]);
                    begin = end;
                }
            }
        }
    }
    sentences.push(&text[begin..]);
    sentences
        .into_iter()
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}
