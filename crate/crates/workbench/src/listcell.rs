//! List cells in exported CSVs, written the way Python prints a list of
//! strings: `['G0', 'A0']`, `[]`.

use std::fmt::Write;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed list cell at byte {offset}: {reason}")]
pub struct ListCellError {
    pub offset: usize,
    pub reason: &'static str,
}

fn quote_into(out: &mut String, s: &str) {
    let quote = if s.contains('\'') && !s.contains('"') { '"' } else { '\'' };
    out.push(quote);
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if c == quote => {
                out.push('\\');
                out.push(c);
            }
            c if (c as u32) < 0x20 || c == '\x7f' => {
                let _ = write!(out, "\\x{:02x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push(quote);
}

pub fn format_list<I, S>(items: I) -> String
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut out = String::from("[");
    for (i, item) in items.into_iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        quote_into(&mut out, item.as_ref());
    }
    out.push(']');
    out
}

/// Inverse of [`format_list`]. Only the canonical layout is accepted.
pub fn parse_list(cell: &str) -> Result<Vec<String>, ListCellError> {
    let err = |offset, reason| ListCellError { offset, reason };
    let bytes = cell.as_bytes();
    if bytes.first() != Some(&b'[') {
        return Err(err(0, "expected `[`"));
    }
    let mut items = Vec::new();
    let mut chars = cell.char_indices().skip(1).peekable();
    if let Some(&(_, ']')) = chars.peek() {
        chars.next();
        return match chars.next() {
            None => Ok(items),
            Some((at, _)) => Err(err(at, "trailing characters")),
        };
    }
    loop {
        let (at, quote) = chars.next().ok_or(err(cell.len(), "unterminated list"))?;
        if quote != '\'' && quote != '"' {
            return Err(err(at, "expected a quoted string"));
        }
        let mut item = String::new();
        loop {
            let (at, c) = chars.next().ok_or(err(cell.len(), "unterminated string"))?;
            match c {
                '\\' => {
                    let (at, e) = chars.next().ok_or(err(cell.len(), "dangling escape"))?;
                    match e {
                        '\\' | '\'' | '"' => item.push(e),
                        'n' => item.push('\n'),
                        'r' => item.push('\r'),
                        't' => item.push('\t'),
                        'x' => {
                            let hex: String = (0..2).filter_map(|_| chars.next().map(|(_, h)| h)).collect();
                            let code = u32::from_str_radix(&hex, 16).map_err(|_| err(at, "bad \\x escape"))?;
                            item.push(char::from_u32(code).ok_or(err(at, "bad \\x escape"))?);
                        }
                        _ => return Err(err(at, "unknown escape")),
                    }
                }
                c if c == quote => break,
                c => {
                    let _ = at;
                    item.push(c);
                }
            }
        }
        items.push(item);
        match chars.next() {
            Some((_, ']')) => {
                return match chars.next() {
                    None => Ok(items),
                    Some((at, _)) => Err(err(at, "trailing characters")),
                }
            }
            Some((at, ',')) => match chars.next() {
                Some((_, ' ')) => {}
                _ => return Err(err(at, "expected `, ` between items")),
            },
            Some((at, _)) => return Err(err(at, "expected `,` or `]`")),
            None => return Err(err(cell.len(), "unterminated list")),
        }
    }
}
