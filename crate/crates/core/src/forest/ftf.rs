//! Forest text format: one `GAP NODE` line per tree, where
//! `NODE := LENGTH [r|b] ["(" NODE "," NODE ")"]`. A final line holding a
//! lone `GAP` records the tail gap.

use super::{Color, ForestEntry, ForestError, PlaneForest, PlaneTree, TreeBuilder, Truncation};

/// Renders a float with 17 significant digits, trimming trailing zeros but
/// keeping at least one fractional digit. Parses back bit-identically.
pub fn format_f64(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0.0" } else { "0.0" }.into();
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };
    if (-5..17).contains(&exp) {
        if exp >= 0 {
            let int_len = exp as usize + 1;
            let (int, frac) = if digits.len() > int_len {
                (digits[..int_len].to_string(), digits[int_len..].to_string())
            } else {
                (format!("{digits:0<int_len$}"), "0".to_string())
            };
            format!("{sign}{int}.{frac}")
        } else {
            let zeros = "0".repeat((-exp - 1) as usize);
            format!("{sign}0.{zeros}{digits}")
        }
    } else {
        let frac = if digits.len() > 1 { &digits[1..] } else { "0" };
        format!("{sign}{}.{frac}e{exp}", &digits[..1])
    }
}

fn write_tree(tree: &PlaneTree, out: &mut String) {
    enum Tok {
        Node(usize),
        Text(char),
    }
    let mut stack = vec![Tok::Node(0)];
    while let Some(tok) = stack.pop() {
        match tok {
            Tok::Text(c) => out.push(c),
            Tok::Node(i) => {
                let n = tree.node(i);
                out.push_str(&format_f64(n.length));
                if let Some(c) = n.color {
                    out.push(c.letter());
                }
                if let Some((l, r)) = tree.children(i) {
                    out.push('(');
                    stack.push(Tok::Text(')'));
                    stack.push(Tok::Node(r));
                    stack.push(Tok::Text(','));
                    stack.push(Tok::Node(l));
                }
            }
        }
    }
}

pub fn serialize_forest(forest: &PlaneForest) -> String {
    let mut out = String::new();
    for e in forest.entries() {
        out.push_str(&format_f64(e.gap));
        out.push(' ');
        write_tree(&e.tree, &mut out);
        out.push('\n');
    }
    if let Some(g) = forest.tail_gap() {
        out.push_str(&format_f64(g));
        out.push('\n');
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    line: usize,
}

impl Cursor<'_> {
    fn err(&self, message: impl Into<String>) -> ForestError {
        ForestError::Parse {
            line: self.line,
            column: self.pos + 1,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), ForestError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected `{}`", c as char)))
        }
    }

    fn number(&mut self) -> Result<f64, ForestError> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || matches!(c, b'.' | b'e' | b'E' | b'+' | b'-') {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        text.parse().map_err(|_| ForestError::Parse {
            line: self.line,
            column: start + 1,
            message: format!("invalid number `{text}`"),
        })
    }

    fn header(&mut self) -> Result<(f64, Option<Color>), ForestError> {
        let col = self.pos + 1;
        let len = self.number()?;
        if !(len > 0.0 && len.is_finite()) {
            return Err(ForestError::Parse {
                line: self.line,
                column: col,
                message: format!("branch length must be positive, got {len}"),
            });
        }
        let color = match self.peek() {
            Some(b'r') => Some(Color::Red),
            Some(b'b') => Some(Color::Black),
            Some(c) if c.is_ascii_alphabetic() => {
                return Err(self.err(format!("invalid colour letter `{}`", c as char)))
            }
            _ => None,
        };
        if color.is_some() {
            self.pos += 1;
        }
        Ok((len, color))
    }

    fn tree(&mut self) -> Result<PlaneTree, ForestError> {
        struct Frame {
            length: f64,
            color: Option<Color>,
            left: Option<u32>,
        }
        let mut b = TreeBuilder::new();
        let mut stack: Vec<Frame> = Vec::new();
        loop {
            let (length, color) = self.header()?;
            if self.peek() == Some(b'(') {
                self.pos += 1;
                stack.push(Frame {
                    length,
                    color,
                    left: None,
                });
                continue;
            }
            let mut done = b.leaf(length, color);
            loop {
                match stack.last_mut() {
                    None => return Ok(b.finish(done)),
                    Some(f) if f.left.is_none() => {
                        f.left = Some(done);
                        self.expect(b',')?;
                        break;
                    }
                    Some(_) => {
                        self.expect(b')')?;
                        let f = stack.pop().unwrap();
                        done = b.join(f.length, f.color, f.left.unwrap(), done);
                    }
                }
            }
        }
    }
}

pub fn deserialize_forest(text: &str) -> Result<PlaneForest, ForestError> {
    let mut entries = Vec::new();
    let mut tail = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end();
        if line.is_empty() {
            continue;
        }
        let mut c = Cursor {
            bytes: line.as_bytes(),
            pos: 0,
            line: i + 1,
        };
        if tail.is_some() {
            return Err(c.err("entry after the tail gap line"));
        }
        let gap = c.number()?;
        if !(gap > 0.0 && gap.is_finite()) {
            return Err(ForestError::Parse {
                line: i + 1,
                column: 1,
                message: format!("gap must be positive, got {gap}"),
            });
        }
        if c.peek().is_none() {
            tail = Some(gap);
            continue;
        }
        c.expect(b' ')?;
        let tree = c.tree()?;
        if c.peek().is_some() {
            return Err(c.err("trailing characters"));
        }
        tree.validate().map_err(|e| ForestError::Parse {
            line: i + 1,
            column: 1,
            message: e.to_string(),
        })?;
        entries.push(ForestEntry { gap, tree });
    }
    let n = entries.len();
    PlaneForest::new(entries, tail, Truncation::Trees(n))
}
